#include "specfair/tabular_model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "specfair/error.hpp"

namespace specfair {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= bytes[i];
    h *= kFnvPrime;
  }
}

template <typename T>
void fnv_value(std::uint64_t& h, T value) {
  fnv_mix(h, &value, sizeof(value));
}

}  // namespace

std::string_view to_string(ModelRole role) {
  switch (role) {
    case ModelRole::kDrafter: return "drafter";
    case ModelRole::kVerifier: return "verifier";
    case ModelRole::kPosterior: return "posterior";
  }
  return "drafter";
}

ModelRole parse_model_role(std::string_view name) {
  if (name == "drafter") return ModelRole::kDrafter;
  if (name == "verifier") return ModelRole::kVerifier;
  if (name == "posterior") return ModelRole::kPosterior;
  fail(ErrorCode::kInvalidArgument, "unknown model role '" + std::string(name) + "'");
}

TabularSoftmaxModel::TabularSoftmaxModel(std::size_t vocab_size, std::size_t order,
                                         ModelRole role)
    : vocab_size_(vocab_size), order_(order), role_(role) {
  if (vocab_size < 2 || vocab_size > kMaxVocabulary) {
    fail(ErrorCode::kInvalidArgument,
         "vocab_size must be in [2, " + std::to_string(kMaxVocabulary) + "]");
  }
}

ContextKey TabularSoftmaxModel::key(std::span<const Token> context) const {
  ContextKey out(order_, pad_token());
  const std::size_t take = std::min(order_, context.size());
  for (std::size_t i = 0; i < take; ++i) {
    const Token t = context[context.size() - take + i];
    if (t < 0 || static_cast<std::size_t>(t) >= vocab_size_) {
      fail(ErrorCode::kInvalidArgument,
           "context token " + std::to_string(t) + " outside vocabulary");
    }
    out[order_ - take + i] = t;
  }
  return out;
}

void TabularSoftmaxModel::check_key(const ContextKey& key) const {
  if (key.size() != order_) {
    fail(ErrorCode::kInvalidArgument, "context key length differs from model order");
  }
  for (Token t : key) {
    if (t < 0 || static_cast<std::size_t>(t) > vocab_size_) {
      fail(ErrorCode::kInvalidArgument, "context key token outside vocabulary");
    }
  }
}

Categorical TabularSoftmaxModel::predict(std::span<const Token> context) const {
  return predict_key(key(context));
}

Categorical TabularSoftmaxModel::predict_key(const ContextKey& key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) return Categorical::uniform(vocab_size_);
  return Categorical::from_logits(it->second);
}

std::vector<double> TabularSoftmaxModel::logits(const ContextKey& key) const {
  auto it = rows_.find(key);
  if (it == rows_.end()) return std::vector<double>(vocab_size_, 0.0);
  return it->second;
}

void TabularSoftmaxModel::set_logits(const ContextKey& key, std::vector<double> logits) {
  check_key(key);
  if (logits.size() != vocab_size_) {
    fail(ErrorCode::kVocabularyMismatch, "logit row length differs from vocab_size");
  }
  for (double v : logits) {
    if (!std::isfinite(v)) fail(ErrorCode::kInvalidArgument, "logits must be finite");
  }
  rows_[key] = std::move(logits);
}

void TabularSoftmaxModel::add_to_logits(const ContextKey& key,
                                        std::span<const double> delta, double scale) {
  check_key(key);
  if (delta.size() != vocab_size_) {
    fail(ErrorCode::kVocabularyMismatch, "logit delta length differs from vocab_size");
  }
  auto [it, inserted] = rows_.try_emplace(key, vocab_size_, 0.0);
  for (std::size_t x = 0; x < vocab_size_; ++x) it->second[x] += scale * delta[x];
}

std::vector<double> TabularSoftmaxModel::ce_gradient(std::span<const Token> context,
                                                     const Categorical& target) const {
  const Categorical q = predict(context);
  if (target.size() != q.size()) {
    fail(ErrorCode::kVocabularyMismatch, "target vocabulary differs from model");
  }
  std::vector<double> grad(q.size());
  for (std::size_t x = 0; x < q.size(); ++x) grad[x] = q[x] - target[x];
  return grad;
}

std::uint64_t TabularSoftmaxModel::parameter_hash() const {
  std::uint64_t h = kFnvOffset;
  fnv_value(h, static_cast<std::uint64_t>(vocab_size_));
  fnv_value(h, static_cast<std::uint64_t>(order_));
  fnv_value(h, static_cast<std::uint64_t>(role_));
  for (const auto& [key, row] : rows_) {
    fnv_mix(h, key.data(), key.size() * sizeof(Token));
    for (double v : row) fnv_value(h, std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

std::string TabularSoftmaxModel::to_json() const {
  nlohmann::json doc;
  doc["order"] = order_;
  doc["vocab_size"] = vocab_size_;
  doc["role"] = std::string(to_string(role_));
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, row] : rows_) {
    rows.push_back({{"key", key}, {"logits", row}});
  }
  doc["rows"] = std::move(rows);
  return doc.dump(2);
}

TabularSoftmaxModel TabularSoftmaxModel::from_json(std::string_view json) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model JSON: ") + e.what());
  }
  try {
    const auto role = doc.contains("role")
                          ? parse_model_role(doc.at("role").get<std::string>())
                          : ModelRole::kDrafter;
    TabularSoftmaxModel model(doc.at("vocab_size").get<std::size_t>(),
                              doc.at("order").get<std::size_t>(), role);
    for (const auto& row : doc.at("rows")) {
      model.set_logits(row.at("key").get<ContextKey>(),
                       row.at("logits").get<std::vector<double>>());
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("model JSON: ") + e.what());
  }
}

void TabularSoftmaxModel::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIo, "cannot write model file " + path);
  out << to_json() << '\n';
  if (!out) fail(ErrorCode::kIo, "failed writing model file " + path);
}

TabularSoftmaxModel TabularSoftmaxModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read model file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json(text.str());
}

}  // namespace specfair
