#pragma once

// Tabular softmax next-token models.
//
// A model of order k conditions on the last k tokens of the context. Shorter
// contexts are left-padded with the reserved pad index (== vocab_size), so
// every key has exactly k slots. Rows that were never written are the zero
// row, i.e. they predict the uniform distribution.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "specfair/dist.hpp"

namespace specfair {

using Token = std::int32_t;
using Context = std::vector<Token>;
using ContextKey = std::vector<Token>;

enum class ModelRole { kDrafter, kVerifier, kPosterior };

std::string_view to_string(ModelRole role);
ModelRole parse_model_role(std::string_view name);

class TabularSoftmaxModel {
 public:
  TabularSoftmaxModel(std::size_t vocab_size, std::size_t order,
                      ModelRole role = ModelRole::kDrafter);

  std::size_t vocab_size() const noexcept { return vocab_size_; }
  std::size_t order() const noexcept { return order_; }
  ModelRole role() const noexcept { return role_; }
  void set_role(ModelRole role) noexcept { role_ = role; }
  Token pad_token() const noexcept { return static_cast<Token>(vocab_size_); }

  /// Last `order` tokens of `context`, left-padded. Throws kInvalidArgument
  /// on out-of-vocabulary tokens.
  ContextKey key(std::span<const Token> context) const;

  Categorical predict(std::span<const Token> context) const;
  Categorical predict_key(const ContextKey& key) const;

  /// Logit row for `key`; zeros when the row has never been written.
  std::vector<double> logits(const ContextKey& key) const;
  void set_logits(const ContextKey& key, std::vector<double> logits);
  /// row += scale * delta, creating the row if needed.
  void add_to_logits(const ContextKey& key, std::span<const double> delta,
                     double scale = 1.0);

  const std::map<ContextKey, std::vector<double>>& rows() const noexcept {
    return rows_;
  }

  /// Gradient of cross_entropy(target, predict(context)) with respect to the
  /// logit row of key(context): predict(context) - target.
  std::vector<double> ce_gradient(std::span<const Token> context,
                                  const Categorical& target) const;

  /// FNV-1a over order, vocabulary, role and the exact bytes of every row.
  std::uint64_t parameter_hash() const;

  std::string to_json() const;
  static TabularSoftmaxModel from_json(std::string_view json);
  void save(const std::string& path) const;
  static TabularSoftmaxModel load(const std::string& path);

  bool operator==(const TabularSoftmaxModel& other) const = default;

 private:
  void check_key(const ContextKey& key) const;

  std::size_t vocab_size_;
  std::size_t order_;
  ModelRole role_;
  std::map<ContextKey, std::vector<double>> rows_;
};

}  // namespace specfair
