#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "specfair/rng.hpp"
#include "specfair/tabular_model.hpp"

namespace specfair {

struct WeightedContext {
  Context context;
  double weight = 0.0;
};

/// A distribution over prefixes with finite support, plus an optional latent
/// posterior u(.|s) that generated the task's data.
class Task {
 public:
  Task(std::string id, std::vector<WeightedContext> prefixes,
       std::shared_ptr<const TabularSoftmaxModel> posterior = nullptr);

  const std::string& id() const noexcept { return id_; }
  std::span<const WeightedContext> prefixes() const noexcept { return prefixes_; }
  std::size_t support_size() const noexcept { return prefixes_.size(); }
  const TabularSoftmaxModel* posterior() const noexcept { return posterior_.get(); }
  const std::shared_ptr<const TabularSoftmaxModel>& posterior_ptr() const noexcept {
    return posterior_;
  }

  const Context& sample_prefix(Rng& rng) const;
  std::size_t sample_prefix_index(Rng& rng) const;

 private:
  std::string id_;
  std::vector<WeightedContext> prefixes_;
  std::vector<double> cumulative_;
  std::shared_ptr<const TabularSoftmaxModel> posterior_;
};

/// At least two tasks with unique ids.
class TaskFamily {
 public:
  explicit TaskFamily(std::vector<Task> tasks);

  std::size_t size() const noexcept { return tasks_.size(); }
  const Task& operator[](std::size_t i) const { return tasks_[i]; }
  const std::vector<Task>& tasks() const noexcept { return tasks_; }
  auto begin() const { return tasks_.begin(); }
  auto end() const { return tasks_.end(); }

  /// Index of the task with `id`; throws kInvalidArgument when absent.
  std::size_t index_of(const std::string& id) const;

 private:
  std::vector<Task> tasks_;
};

}  // namespace specfair
