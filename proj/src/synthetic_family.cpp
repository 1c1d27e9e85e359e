#include "specfair/synthetic_family.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "specfair/error.hpp"

namespace specfair {
namespace {

constexpr std::size_t kMaxSyntheticOrder = 4;
constexpr double kLogFloor = 1e-300;
constexpr int kBisectionIterations = 80;

std::vector<double> log_probs(const std::vector<double>& probs) {
  std::vector<double> out(probs.size());
  for (std::size_t x = 0; x < probs.size(); ++x) out[x] = std::log(std::max(probs[x], kLogFloor));
  return out;
}

std::vector<double> mix(const Categorical& base, const Categorical& noise, double weight) {
  std::vector<double> out(base.size());
  for (std::size_t x = 0; x < base.size(); ++x) {
    out[x] = (1.0 - weight) * base[x] + weight * noise[x];
  }
  return out;
}

std::size_t checked_power(std::size_t base, std::size_t exponent) {
  std::size_t out = 1;
  for (std::size_t i = 0; i < exponent; ++i) {
    if (out > (std::size_t{1} << 40) / std::max<std::size_t>(base, 1)) return std::size_t{1} << 40;
    out *= base;
  }
  return out;
}

std::vector<ContextKey> draw_support(const TokenRange& range, std::size_t order,
                                     std::size_t count, Rng& rng) {
  const auto width = static_cast<std::size_t>(range.end - range.begin);
  const std::size_t total = checked_power(width, order);
  std::vector<ContextKey> keys;
  if (total <= 4096) {
    keys.reserve(total);
    for (std::size_t code = 0; code < total; ++code) {
      ContextKey key(order);
      std::size_t rest = code;
      for (std::size_t j = order; j-- > 0;) {
        key[j] = range.begin + static_cast<Token>(rest % width);
        rest /= width;
      }
      keys.push_back(std::move(key));
    }
    for (std::size_t i = keys.size(); i > 1; --i) {
      std::swap(keys[i - 1], keys[rng.below(i)]);
    }
    keys.resize(count);
    return keys;
  }
  std::set<ContextKey> seen;
  while (keys.size() < count) {
    ContextKey key(order);
    for (auto& t : key) t = range.begin + static_cast<Token>(rng.below(width));
    if (seen.insert(key).second) keys.push_back(std::move(key));
  }
  return keys;
}

Categorical random_categorical(std::size_t size, double scale, Rng& rng) {
  std::vector<double> logits(size);
  for (auto& v : logits) v = scale * rng.normal();
  return Categorical::from_logits(logits);
}

struct PrefixRow {
  ContextKey key;
  double weight;
  Categorical posterior;
  std::vector<double> posterior_logits;
};

// Writes rows mixing u toward seeded noise so that E_s TV(u, model) == target.
void fit_misfit(TabularSoftmaxModel& model, const std::vector<PrefixRow>& rows,
                double target, double noise_scale, Rng rng, const std::string& task_id) {
  if (target == 0.0) {
    for (const auto& row : rows) model.set_logits(row.key, row.posterior_logits);
    return;
  }
  const std::size_t vocab = model.vocab_size();
  std::vector<Categorical> noise;
  noise.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    noise.push_back(random_categorical(vocab, noise_scale, rng));
  }

  auto measured = [&](double weight) {
    double tv = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto fitted = Categorical::from_logits(log_probs(mix(rows[i].posterior, noise[i], weight)));
      tv += rows[i].weight * total_variation(rows[i].posterior, fitted);
    }
    return tv;
  };

  if (measured(1.0) < target) {
    // Random noise is too close to u; a point mass on the least likely token
    // reaches TV = 1 - min_x u(x) >= 1 - 1/|V|.
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto& u = rows[i].posterior.vector();
      const auto lowest = static_cast<std::size_t>(std::min_element(u.begin(), u.end()) - u.begin());
      noise[i] = Categorical::one_hot(vocab, lowest);
    }
    if (measured(1.0) < target - 1e-12) {
      fail(ErrorCode::kInfeasibleSpec, "task '" + task_id + "': misfit " +
                                           std::to_string(target) + " is not reachable");
    }
  }

  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < kBisectionIterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (measured(mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double weight = 0.5 * (lo + hi);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    model.set_logits(rows[i].key, log_probs(mix(rows[i].posterior, noise[i], weight)));
  }
}

// Empty-context row: mass spread over each signature in proportion to `weights`.
std::vector<double> prior_row(std::size_t vocab, const std::vector<TokenRange>& signatures,
                              const std::vector<double>& weights) {
  std::vector<double> probs(vocab, 0.0);
  double total = 0.0;
  for (double w : weights) total += w;
  for (std::size_t i = 0; i < signatures.size(); ++i) {
    const auto width = static_cast<double>(signatures[i].end - signatures[i].begin);
    for (Token t = signatures[i].begin; t < signatures[i].end; ++t) {
      probs[static_cast<std::size_t>(t)] = weights[i] / (total * width);
    }
  }
  return log_probs(probs);
}

}  // namespace

double max_feasible_misfit(std::size_t vocab_size) {
  return 1.0 - 1.0 / static_cast<double>(vocab_size);
}

double expected_tv(const TabularSoftmaxModel& reference, const TabularSoftmaxModel& model,
                   const Task& task) {
  double tv = 0.0;
  for (const auto& wc : task.prefixes()) {
    tv += wc.weight * total_variation(reference.predict(wc.context), model.predict(wc.context));
  }
  return tv;
}

SyntheticFamily make_synthetic_family(const FamilySpec& spec, std::uint64_t seed) {
  const std::size_t m = spec.tasks.size();
  const std::size_t vocab = spec.vocab_size;
  const std::size_t order = spec.context_order;
  if (m < 2) fail(ErrorCode::kInfeasibleSpec, "family needs at least 2 tasks");
  if (vocab < 2 || vocab > kMaxVocabulary) {
    fail(ErrorCode::kInfeasibleSpec, "vocab_size must be in [2, 1024]");
  }
  if (order < 1 || order > kMaxSyntheticOrder) {
    fail(ErrorCode::kInfeasibleSpec, "synthetic families need context_order in [1, 4]");
  }
  const std::size_t width = vocab / m;
  if (width < 1) {
    fail(ErrorCode::kInfeasibleSpec, "vocab_size too small for one signature token per task");
  }
  const double max_misfit = max_feasible_misfit(vocab);
  const std::size_t max_support = checked_power(width, order);
  for (const auto& t : spec.tasks) {
    for (double r : {t.r_p, t.r_q}) {
      if (!(r >= 0.0) || r > max_misfit) {
        fail(ErrorCode::kInfeasibleSpec, "task '" + t.id + "': misfit " + std::to_string(r) +
                                             " outside [0, 1 - 1/|V|]");
      }
    }
    if (t.support_size < 1 || t.support_size > max_support) {
      fail(ErrorCode::kInfeasibleSpec, "task '" + t.id + "': support_size must be in [1, " +
                                           std::to_string(max_support) + "]");
    }
    if (!(t.representation >= 0.0)) {
      fail(ErrorCode::kInfeasibleSpec, "task '" + t.id + "': representation must be >= 0");
    }
  }

  double represented = 0.0;
  for (const auto& t : spec.tasks) represented += t.representation;
  if (!(represented > 0.0)) fail(ErrorCode::kInfeasibleSpec, "at least one task needs representation > 0");

  std::vector<TokenRange> signatures;
  for (std::size_t i = 0; i < m; ++i) {
    signatures.push_back({static_cast<Token>(i * width), static_cast<Token>((i + 1) * width)});
  }

  auto posterior = std::make_shared<TabularSoftmaxModel>(vocab, order, ModelRole::kPosterior);
  TabularSoftmaxModel verifier(vocab, order, ModelRole::kVerifier);
  TabularSoftmaxModel drafter(vocab, order, ModelRole::kDrafter);

  std::vector<std::vector<PrefixRow>> task_rows(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& ts = spec.tasks[i];
    Rng rng = Rng::stream(seed, StreamPurpose::kFamily, i, 0);
    auto keys = draw_support(signatures[i], order, ts.support_size, rng);
    std::vector<double> weights(keys.size());
    double total = 0.0;
    for (auto& w : weights) total += (w = 0.5 + rng.uniform());
    for (std::size_t j = 0; j < keys.size(); ++j) {
      std::vector<double> logits(vocab);
      for (std::size_t x = 0; x < vocab; ++x) {
        logits[x] = spec.posterior_scale * rng.normal();
        if (signatures[i].contains(static_cast<Token>(x))) logits[x] += spec.signature_bonus;
      }
      posterior->set_logits(keys[j], logits);
      task_rows[i].push_back({keys[j], weights[j] / total, posterior->predict_key(keys[j]),
                              std::move(logits)});
    }
    fit_misfit(verifier, task_rows[i], ts.r_p, spec.noise_scale,
               Rng::stream(seed, StreamPurpose::kFamily, i, 1), ts.id);
    fit_misfit(drafter, task_rows[i], ts.r_q, spec.noise_scale,
               Rng::stream(seed, StreamPurpose::kFamily, i, 2), ts.id);
  }

  const ContextKey empty(order, static_cast<Token>(vocab));
  std::vector<double> representation;
  for (const auto& t : spec.tasks) representation.push_back(t.representation);
  const std::vector<double> equal(m, 1.0);
  drafter.set_logits(empty, prior_row(vocab, signatures, representation));
  verifier.set_logits(empty, prior_row(vocab, signatures, equal));
  posterior->set_logits(empty, prior_row(vocab, signatures, equal));

  std::vector<Task> tasks;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<WeightedContext> prefixes;
    for (const auto& row : task_rows[i]) prefixes.push_back({row.key, row.weight});
    tasks.emplace_back(spec.tasks[i].id, std::move(prefixes), posterior);
  }
  return SyntheticFamily{std::move(verifier), std::move(drafter), std::move(posterior),
                         TaskFamily(std::move(tasks)), std::move(signatures)};
}

}  // namespace specfair
