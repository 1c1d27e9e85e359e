#include "specfair/task.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "specfair/error.hpp"

namespace specfair {

Task::Task(std::string id, std::vector<WeightedContext> prefixes,
           std::shared_ptr<const TabularSoftmaxModel> posterior)
    : id_(std::move(id)), prefixes_(std::move(prefixes)), posterior_(std::move(posterior)) {
  if (id_.empty()) fail(ErrorCode::kInvalidArgument, "task id must not be empty");
  if (prefixes_.empty()) {
    fail(ErrorCode::kInvalidArgument, "task '" + id_ + "' has an empty prefix support");
  }
  double total = 0.0;
  for (const auto& wc : prefixes_) {
    if (!std::isfinite(wc.weight) || wc.weight < 0.0) {
      fail(ErrorCode::kInvalidArgument,
           "task '" + id_ + "' has a negative or non-finite prefix weight");
    }
    total += wc.weight;
  }
  const double off = std::abs(total - 1.0);
  if (off > kRenormTolerance) {
    fail(ErrorCode::kInvalidArgument, "task '" + id_ + "' prefix weights do not sum to 1");
  }
  if (off > kNormTolerance) {
    for (auto& wc : prefixes_) wc.weight /= total;
  }
  cumulative_.reserve(prefixes_.size());
  double running = 0.0;
  for (const auto& wc : prefixes_) {
    running += wc.weight;
    cumulative_.push_back(running);
  }
}

std::size_t Task::sample_prefix_index(Rng& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  std::size_t index = static_cast<std::size_t>(it - cumulative_.begin());
  if (index >= prefixes_.size()) index = prefixes_.size() - 1;
  // Zero-weight entries share a cumulative value with their predecessor and
  // are never selected by upper_bound.
  return index;
}

const Context& Task::sample_prefix(Rng& rng) const {
  return prefixes_[sample_prefix_index(rng)].context;
}

TaskFamily::TaskFamily(std::vector<Task> tasks) : tasks_(std::move(tasks)) {
  if (tasks_.size() < 2) {
    fail(ErrorCode::kInvalidArgument, "a task family needs at least 2 tasks");
  }
  std::set<std::string> seen;
  for (const auto& task : tasks_) {
    if (!seen.insert(task.id()).second) {
      fail(ErrorCode::kInvalidArgument, "duplicate task id '" + task.id() + "'");
    }
  }
}

std::size_t TaskFamily::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < tasks_.size(); ++i) {
    if (tasks_[i].id() == id) return i;
  }
  fail(ErrorCode::kInvalidArgument, "no task with id '" + id + "'");
}

}  // namespace specfair
