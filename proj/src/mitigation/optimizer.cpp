#include <cmath>

#include "specfair/error.hpp"
#include "specfair/mitigation.hpp"

namespace specfair {

std::string_view to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd: return "sgd";
    case OptimizerKind::kMomentum: return "momentum";
    case OptimizerKind::kAdam: return "adaptive-moment";
  }
  return "sgd";
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "momentum") return OptimizerKind::kMomentum;
  if (name == "adaptive-moment" || name == "adam") return OptimizerKind::kAdam;
  fail(ErrorCode::kInvalidArgument,
       "unknown optimizer '" + std::string(name) + "' (sgd | momentum | adaptive-moment)");
}

void TrainerConfig::validate() const {
  if (steps < 1) fail(ErrorCode::kInvalidArgument, "trainer.steps must be >= 1");
  if (batch_per_task < 1) fail(ErrorCode::kInvalidArgument, "trainer.batch_per_task must be >= 1");
  if (!(step_size > 0.0) || !std::isfinite(step_size)) {
    fail(ErrorCode::kInvalidArgument, "trainer.step_size must be > 0");
  }
  if (!(grad_clip >= 0.0)) fail(ErrorCode::kInvalidArgument, "trainer.grad_clip must be >= 0");
  if (!(convergence_tol >= 0.0)) {
    fail(ErrorCode::kInvalidArgument, "trainer.convergence_tol must be >= 0");
  }
  if (convergence_window < 1) {
    fail(ErrorCode::kInvalidArgument, "trainer.convergence_window must be >= 1");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "trainer.momentum must be in [0, 1)");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    fail(ErrorCode::kInvalidArgument, "adaptive-moment betas must be in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) fail(ErrorCode::kInvalidArgument, "trainer.adam_epsilon must be > 0");
  if (!(divergence_factor > 1.0)) {
    fail(ErrorCode::kInvalidArgument, "trainer.divergence_factor must be > 1");
  }
  if (proxy_gamma < 1) fail(ErrorCode::kInvalidArgument, "trainer.proxy_gamma must be >= 1");
  if (proxy_prefixes < 1) fail(ErrorCode::kInvalidArgument, "trainer.proxy_prefixes must be >= 1");
}

void Optimizer::apply(TabularSoftmaxModel& model, const LogitGradient& direction) {
  double scale = 1.0;
  if (cfg_.grad_clip > 0.0) {
    const double norm = l2_norm(direction);
    if (norm > cfg_.grad_clip) scale = cfg_.grad_clip / norm;
  }
  ++t_;
  const double lr = cfg_.step_size;
  switch (cfg_.optimizer) {
    case OptimizerKind::kSgd:
      for (const auto& [key, row] : direction) model.add_to_logits(key, row, lr * scale);
      break;
    case OptimizerKind::kMomentum:
      // Rows absent from this step's direction keep coasting on their velocity.
      for (const auto& [key, row] : direction) {
        auto [it, inserted] = velocity_.try_emplace(key, row.size(), 0.0);
        (void)inserted;
      }
      for (auto& [key, v] : velocity_) {
        const auto d = direction.find(key);
        for (std::size_t x = 0; x < v.size(); ++x) {
          v[x] = cfg_.momentum * v[x] + (d == direction.end() ? 0.0 : scale * d->second[x]);
        }
        model.add_to_logits(key, v, lr);
      }
      break;
    case OptimizerKind::kAdam: {
      const double b1 = cfg_.adam_beta1;
      const double b2 = cfg_.adam_beta2;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
      for (const auto& [key, row] : direction) {
        first_moment_.try_emplace(key, row.size(), 0.0);
        second_moment_.try_emplace(key, row.size(), 0.0);
      }
      for (auto& [key, m] : first_moment_) {
        auto& v = second_moment_[key];
        const auto d = direction.find(key);
        std::vector<double> step(m.size());
        for (std::size_t x = 0; x < m.size(); ++x) {
          // The direction is a descent direction, so the gradient is its negation.
          const double g = d == direction.end() ? 0.0 : -scale * d->second[x];
          m[x] = b1 * m[x] + (1.0 - b1) * g;
          v[x] = b2 * v[x] + (1.0 - b2) * g * g;
          step[x] = -(m[x] / c1) / (std::sqrt(v[x] / c2) + cfg_.adam_epsilon);
        }
        model.add_to_logits(key, step, lr);
      }
      break;
    }
  }
}

}  // namespace specfair
