#include "specfair/spec_engine.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <json.hpp>

#include "specfair/error.hpp"

namespace specfair {
namespace {

void require_compatible(const TabularSoftmaxModel& verifier, const TabularSoftmaxModel& drafter) {
  if (verifier.vocab_size() != drafter.vocab_size()) {
    fail(ErrorCode::kVocabularyMismatch, "verifier and drafter vocabularies differ");
  }
}

double accept_probability(const Categorical& p, const Categorical& q, std::size_t x) {
  if (q[x] <= 0.0) return 1.0;
  return std::min(1.0, p[x] / q[x]);
}

}  // namespace

void SpecConfig::validate() const {
  if (gamma < 1) fail(ErrorCode::kInvalidArgument, "gamma must be >= 1");
  if (!(cost_ratio >= 0.0 && cost_ratio < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "cost_ratio must be in [0, 1)");
  }
}

StepTrace speculative_step(const TabularSoftmaxModel& verifier,
                           const TabularSoftmaxModel& drafter,
                           std::span<const Token> context, const SpecConfig& cfg,
                           Rng& rng) {
  require_compatible(verifier, drafter);
  cfg.validate();
  const auto gamma = static_cast<std::size_t>(cfg.gamma);

  StepTrace trace;
  trace.drafted.reserve(gamma);
  std::vector<Categorical> draft_dists;
  draft_dists.reserve(gamma);
  Context running(context.begin(), context.end());
  for (std::size_t i = 0; i < gamma; ++i) {
    draft_dists.push_back(drafter.predict(running));
    const auto x = static_cast<Token>(sample_index(draft_dists.back(), rng.uniform()));
    trace.drafted.push_back(x);
    running.push_back(x);
  }

  running.assign(context.begin(), context.end());
  for (std::size_t i = 0; i < gamma; ++i) {
    const Categorical p = verifier.predict(running);
    const Categorical& q = draft_dists[i];
    const Token x = trace.drafted[i];
    const double a = accept_probability(p, q, static_cast<std::size_t>(x));
    trace.per_token_accept_probs.push_back(a);
    if (rng.uniform() < a) {
      ++trace.accepted_prefix_len;
      trace.emitted.push_back(x);
      running.push_back(x);
      continue;
    }
    try {
      const Categorical corrected = residual(p, q);
      trace.emitted.push_back(static_cast<Token>(sample_index(corrected, rng.uniform())));
    } catch (const Error& e) {
      fail(ErrorCode::kInternal, std::string("rejection with degenerate residual: ") + e.what());
    }
    return trace;
  }
  const Categorical bonus = verifier.predict(running);
  trace.emitted.push_back(static_cast<Token>(sample_index(bonus, rng.uniform())));
  return trace;
}

Categorical enumerate_step_distribution(const TabularSoftmaxModel& verifier,
                                        const TabularSoftmaxModel& drafter,
                                        std::span<const Token> context,
                                        const SpecConfig& cfg) {
  require_compatible(verifier, drafter);
  cfg.validate();
  const std::size_t vocab = verifier.vocab_size();
  if (vocab > kMaxEnumerationVocab || cfg.gamma > kMaxEnumerationGamma) {
    fail(ErrorCode::kEnumerationTooLarge,
         "enumeration limited to |V| <= 16 and gamma <= 3");
  }
  constexpr int kUndecided = -1;
  std::vector<double> law(vocab, 0.0);
  Context running(context.begin(), context.end());

  std::function<void(int, double, int)> expand = [&](int depth, double mass, int first) {
    const Categorical p = verifier.predict(running);
    if (depth == cfg.gamma) {
      for (std::size_t y = 0; y < vocab; ++y) {
        law[first == kUndecided ? y : static_cast<std::size_t>(first)] += mass * p[y];
      }
      return;
    }
    const Categorical q = drafter.predict(running);
    for (std::size_t x = 0; x < vocab; ++x) {
      if (q[x] <= 0.0) continue;
      const double a = accept_probability(p, q, x);
      const double reject = mass * q[x] * (1.0 - a);
      if (reject > 0.0) {
        const Categorical corrected = residual(p, q);
        for (std::size_t y = 0; y < vocab; ++y) {
          law[first == kUndecided ? y : static_cast<std::size_t>(first)] += reject * corrected[y];
        }
      }
      if (a > 0.0) {
        running.push_back(static_cast<Token>(x));
        expand(depth + 1, mass * q[x] * a, first == kUndecided ? static_cast<int>(x) : first);
        running.pop_back();
      }
    }
  };
  expand(0, 1.0, kUndecided);
  return Categorical(std::move(law));
}

double expected_tokens(double alpha, int gamma) {
  if (!(alpha >= 0.0 && alpha < 1.0)) {
    fail(ErrorCode::kDomain, "expected_tokens needs 0 <= alpha < 1");
  }
  return expected_tokens_closed(alpha, gamma);
}

double expected_tokens_closed(double alpha, int gamma) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorCode::kDomain, "alpha must be in [0, 1]");
  }
  if (gamma < 1) fail(ErrorCode::kInvalidArgument, "gamma must be >= 1");
  // Horner form of the geometric sum; no 0/0 at alpha -> 1.
  double sum = 1.0;
  for (int k = 0; k < gamma; ++k) sum = 1.0 + alpha * sum;
  return sum;
}

double speedup(double alpha, const SpecConfig& cfg) {
  cfg.validate();
  return expected_tokens(alpha, cfg.gamma) / (cfg.gamma * cfg.cost_ratio + 1.0);
}

double speedup_closed(double alpha, const SpecConfig& cfg) {
  cfg.validate();
  return expected_tokens_closed(alpha, cfg.gamma) / (cfg.gamma * cfg.cost_ratio + 1.0);
}

std::vector<Token> vanilla_decode(const TabularSoftmaxModel& verifier,
                                  std::span<const Token> context, std::size_t n_tokens,
                                  Rng& rng) {
  Context running(context.begin(), context.end());
  std::vector<Token> out;
  out.reserve(n_tokens);
  for (std::size_t i = 0; i < n_tokens; ++i) {
    const auto x = static_cast<Token>(sample_index(verifier.predict(running), rng.uniform()));
    out.push_back(x);
    running.push_back(x);
  }
  return out;
}

void write_trace_line(std::ostream& out, std::size_t step, std::span<const Token> context,
                      const StepTrace& trace) {
  nlohmann::ordered_json line;
  line["step"] = step;
  line["context"] = std::vector<Token>(context.begin(), context.end());
  line["drafted"] = trace.drafted;
  line["accepted_prefix_len"] = trace.accepted_prefix_len;
  line["emitted"] = trace.emitted;
  out << line.dump() << '\n';
}

}  // namespace specfair
