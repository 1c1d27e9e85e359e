#include "specfair/specfair.h"

#include <cstring>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include "specfair/config.hpp"
#include "specfair/dist.hpp"
#include "specfair/error.hpp"
#include "specfair/experiments.hpp"
#include "specfair/fairness.hpp"
#include "specfair/spec_engine.hpp"
#include "specfair/tabular_model.hpp"

struct specfair_config {
  specfair::ExperimentConfig cfg;
};

struct specfair_model {
  specfair::TabularSoftmaxModel model;
};

namespace {

thread_local std::string g_last_error;

template <class F>
specfair_status guarded(F&& body) {
  try {
    body();
    return SPECFAIR_OK;
  } catch (const specfair::Error& e) {
    g_last_error = e.what();
    return static_cast<specfair_status>(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return SPECFAIR_E_INTERNAL;
}

void require(const void* ptr, const char* name) {
  if (ptr == nullptr) specfair::fail(specfair::ErrorCode::kInvalidArgument, std::string(name) + " is null");
}

specfair::Categorical categorical(const double* v, std::size_t n, const char* name) {
  require(v, name);
  return specfair::Categorical(std::vector<double>(v, v + n));
}

template <class F>
specfair_status pairwise(const double* p, const double* q, std::size_t n, double* out, F&& f) {
  return guarded([&] {
    require(out, "out");
    *out = f(categorical(p, n, "p"), categorical(q, n, "q"));
  });
}

}  // namespace

extern "C" {

const char* specfair_version(void) { return specfair::kToolVersion; }

const char* specfair_status_string(specfair_status status) {
  switch (status) {
    case SPECFAIR_OK: return "ok";
    case SPECFAIR_E_VOCABULARY_MISMATCH: return "vocabulary mismatch";
    case SPECFAIR_E_DEGENERATE_RESIDUAL: return "degenerate residual";
    case SPECFAIR_E_INVALID_TEMPERATURE: return "invalid temperature";
    case SPECFAIR_E_DOMAIN: return "domain error";
    case SPECFAIR_E_INVALID_DISTRIBUTION: return "invalid distribution";
    case SPECFAIR_E_INFEASIBLE_SPEC: return "infeasible spec";
    case SPECFAIR_E_ENUMERATION_TOO_LARGE: return "enumeration too large";
    case SPECFAIR_E_CONFIG: return "config error";
    case SPECFAIR_E_IO: return "i/o error";
    case SPECFAIR_E_THEOREM_VIOLATION: return "theorem violation";
    case SPECFAIR_E_TRAINING_DIVERGED: return "training diverged";
    case SPECFAIR_E_INVALID_ARGUMENT: return "invalid argument";
    case SPECFAIR_E_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* specfair_last_error(void) { return g_last_error.c_str(); }

specfair_status specfair_acceptance_overlap(const double* p, const double* q, size_t n, double* out) {
  return pairwise(p, q, n, out, [](const auto& a, const auto& b) {
    return specfair::acceptance_overlap(a, b);
  });
}

specfair_status specfair_total_variation(const double* p, const double* q, size_t n, double* out) {
  return pairwise(p, q, n, out, [](const auto& a, const auto& b) {
    return specfair::total_variation(a, b);
  });
}

specfair_status specfair_kl_divergence(const double* p, const double* q, size_t n, double epsilon,
                                       double* out) {
  return pairwise(p, q, n, out, [epsilon](const auto& a, const auto& b) {
    return specfair::kl_divergence(a, b, epsilon);
  });
}

specfair_status specfair_cross_entropy(const double* p, const double* q, size_t n, double epsilon,
                                       double* out) {
  return pairwise(p, q, n, out, [epsilon](const auto& a, const auto& b) {
    return specfair::cross_entropy(a, b, epsilon);
  });
}

specfair_status specfair_residual(const double* p, const double* q, size_t n, double* out) {
  return guarded([&] {
    require(out, "out");
    const auto r = specfair::residual(categorical(p, n, "p"), categorical(q, n, "q"));
    for (std::size_t i = 0; i < n; ++i) out[i] = r[i];
  });
}

specfair_status specfair_speedup(double alpha, int gamma, double cost_ratio, double* out) {
  return guarded([&] {
    require(out, "out");
    const specfair::SpecConfig cfg{gamma, cost_ratio};
    cfg.validate();
    *out = specfair::speedup(alpha, cfg);
  });
}

specfair_status specfair_unfairness(const double* d, size_t m, double* out) {
  return guarded([&] {
    require(d, "d");
    require(out, "out");
    *out = specfair::unfairness(std::span<const double>(d, m));
  });
}

specfair_status specfair_config_load(const char* path, specfair_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new specfair_config{specfair::load_config(path)};
  });
}

specfair_status specfair_config_parse(const char* json, specfair_config** out) {
  return guarded([&] {
    require(json, "json");
    require(out, "out");
    *out = new specfair_config{specfair::parse_config(json)};
  });
}

specfair_status specfair_config_resolve_seed(specfair_config* cfg, int has_seed, uint64_t seed) {
  return guarded([&] {
    require(cfg, "cfg");
    specfair::apply_seed_precedence(cfg->cfg, has_seed != 0 ? std::optional<std::uint64_t>(seed)
                                                            : std::nullopt);
  });
}

specfair_status specfair_config_set_output_dir(specfair_config* cfg, const char* directory) {
  return guarded([&] {
    require(cfg, "cfg");
    require(directory, "directory");
    if (*directory == '\0') specfair::fail(specfair::ErrorCode::kInvalidArgument, "empty output directory");
    cfg->cfg.outputs.directory = directory;
  });
}

specfair_status specfair_config_set_train_steps(specfair_config* cfg, size_t steps) {
  return guarded([&] {
    require(cfg, "cfg");
    if (steps < 1) specfair::fail(specfair::ErrorCode::kInvalidArgument, "steps must be >= 1");
    cfg->cfg.trainer.steps = steps;
  });
}

specfair_status specfair_config_set_representation_k(specfair_config* cfg, size_t k) {
  return guarded([&] {
    require(cfg, "cfg");
    if (k < 1) specfair::fail(specfair::ErrorCode::kInvalidArgument, "k must be >= 1");
    cfg->cfg.representation.k = k;
  });
}

specfair_status specfair_config_seed(const specfair_config* cfg, uint64_t* out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = cfg->cfg.seed;
  });
}

specfair_status specfair_config_hash(const specfair_config* cfg, char* buffer, size_t size) {
  return guarded([&] {
    require(cfg, "cfg");
    require(buffer, "buffer");
    const std::string h = specfair::config_hash(cfg->cfg);
    if (size < h.size() + 1) specfair::fail(specfair::ErrorCode::kInvalidArgument, "buffer too small");
    std::memcpy(buffer, h.c_str(), h.size() + 1);
  });
}

void specfair_config_free(specfair_config* cfg) { delete cfg; }

specfair_status specfair_model_load(const char* path, specfair_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new specfair_model{specfair::TabularSoftmaxModel::load(path)};
  });
}

specfair_status specfair_model_save(const specfair_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    model->model.save(path);
  });
}

specfair_status specfair_model_vocab_size(const specfair_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.vocab_size();
  });
}

specfair_status specfair_model_predict(const specfair_model* model, const int32_t* context,
                                       size_t length, double* out, size_t out_size) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    if (length > 0) require(context, "context");
    if (out_size < model->model.vocab_size()) {
      specfair::fail(specfair::ErrorCode::kInvalidArgument, "output buffer smaller than vocabulary");
    }
    const auto dist = model->model.predict(std::span<const std::int32_t>(context, length));
    for (std::size_t i = 0; i < dist.size(); ++i) out[i] = dist[i];
  });
}

void specfair_model_free(specfair_model* model) { delete model; }

specfair_status specfair_run_simulate(const specfair_config* cfg, size_t steps, int trace) {
  return guarded([&] {
    require(cfg, "cfg");
    specfair::run_simulate(cfg->cfg, {steps, trace != 0}, std::cout);
  });
}

specfair_status specfair_run_metrics(const specfair_config* cfg, double* unfairness_out) {
  return guarded([&] {
    require(cfg, "cfg");
    const auto result = specfair::run_metrics(cfg->cfg, std::cout);
    if (unfairness_out != nullptr) *unfairness_out = result.unfairness.value_or(0.0);
  });
}

specfair_status specfair_run_verify_theorems(const specfair_config* cfg, size_t trials) {
  return guarded([&] {
    require(cfg, "cfg");
    specfair::run_verify_theorems(cfg->cfg, trials, std::cout);
  });
}

specfair_status specfair_run_train_scdf(const specfair_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    specfair::run_train_scdf(cfg->cfg, std::cout);
  });
}

specfair_status specfair_run_sweep_temperature(const specfair_config* cfg, const double* temps,
                                               size_t n, const char* quality_path) {
  return guarded([&] {
    require(cfg, "cfg");
    if (n > 0) require(temps, "temps");
    std::optional<std::string> quality;
    if (quality_path != nullptr) quality = quality_path;
    specfair::run_sweep_temperature(cfg->cfg, std::vector<double>(temps, temps + n), quality,
                                    std::cout);
  });
}

specfair_status specfair_run_balance_data(const specfair_config* cfg, const double* grid, size_t n) {
  return guarded([&] {
    require(cfg, "cfg");
    if (n > 0) require(grid, "grid");
    specfair::run_balance_data(cfg->cfg, std::vector<double>(grid, grid + n), std::cout);
  });
}

specfair_status specfair_run_estimate_representation(const specfair_config* cfg) {
  return guarded([&] {
    require(cfg, "cfg");
    specfair::run_estimate_representation(cfg->cfg, std::cout);
  });
}

specfair_status specfair_run_report(const char* run_dir) {
  return guarded([&] {
    require(run_dir, "run_dir");
    specfair::run_report(run_dir, std::cout);
  });
}

}  // extern "C"
