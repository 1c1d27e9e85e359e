#include "specfair/config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "specfair/error.hpp"

namespace specfair {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& path, const std::string& message) {
  fail(ErrorCode::kConfig, (path.empty() ? std::string("/") : path) + ": " + message);
}

// Consumes keys of one JSON object; finish() rejects whatever is left over.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) config_error(path_, "expected an object");
  }

  std::string field(const std::string& key) const { return path_ + "/" + key; }

  const json* find(const std::string& key) {
    consumed_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = find(key);
    if (v == nullptr) config_error(field(key), "missing required field");
    return *v;
  }

  std::uint64_t u64(const std::string& key, std::optional<std::uint64_t> fallback) {
    const json* v = fallback ? find(key) : &require(key);
    if (v == nullptr) return *fallback;
    if (!v->is_number_unsigned()) config_error(field(key), "expected a non-negative integer");
    return v->get<std::uint64_t>();
  }

  std::size_t size(const std::string& key, std::optional<std::size_t> fallback) {
    return static_cast<std::size_t>(
        u64(key, fallback ? std::optional<std::uint64_t>(*fallback) : std::nullopt));
  }

  int integer(const std::string& key, int fallback) {
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_number_integer()) config_error(field(key), "expected an integer");
    const auto value = v->get<std::int64_t>();
    if (value < -1000000 || value > 1000000) config_error(field(key), "integer out of range");
    return static_cast<int>(value);
  }

  double real(const std::string& key, std::optional<double> fallback) {
    const json* v = fallback ? find(key) : &require(key);
    if (v == nullptr) return *fallback;
    if (!v->is_number()) config_error(field(key), "expected a number");
    return v->get<double>();
  }

  bool boolean(const std::string& key, bool fallback) {
    const json* v = find(key);
    if (v == nullptr) return fallback;
    if (!v->is_boolean()) config_error(field(key), "expected true or false");
    return v->get<bool>();
  }

  std::string string(const std::string& key, std::optional<std::string> fallback) {
    const json* v = fallback ? find(key) : &require(key);
    if (v == nullptr) return *fallback;
    if (!v->is_string()) config_error(field(key), "expected a string");
    return v->get<std::string>();
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!consumed_.contains(key)) config_error(field(key), "unknown key");
    }
  }

 private:
  const json& node_;
  std::string path_;
  std::set<std::string> consumed_;
};

void check(bool ok, const std::string& path, const std::string& message) {
  if (!ok) config_error(path, message);
}

std::string locate(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

void parse_family(ObjectReader& root, ExperimentConfig& cfg) {
  ObjectReader fam(root.require("family"), root.field("family"));
  const json& tasks = fam.require("tasks");
  const std::string tasks_path = fam.field("tasks");
  check(tasks.is_array(), tasks_path, "expected an array");
  check(tasks.size() >= 2, tasks_path, "a family needs at least 2 tasks");
  std::set<std::string> ids;
  const double max_misfit = max_feasible_misfit(cfg.vocab_size);
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    ObjectReader t(tasks[i], tasks_path + "/" + std::to_string(i));
    TaskSpec spec;
    spec.id = t.string("id", std::nullopt);
    check(!spec.id.empty(), t.field("id"), "must not be empty");
    check(ids.insert(spec.id).second, t.field("id"), "duplicate task id '" + spec.id + "'");
    spec.support_size = t.size("support_size", spec.support_size);
    check(spec.support_size >= 1, t.field("support_size"), "must be >= 1");
    spec.r_q = t.real("r_q", std::nullopt);
    spec.r_p = t.real("r_p", 0.0);
    for (const char* key : {"r_p", "r_q"}) {
      const double r = std::string(key) == "r_p" ? spec.r_p : spec.r_q;
      check(r >= 0.0 && r <= max_misfit, t.field(key),
            "must be in [0, 1 - 1/vocab_size] = [0, " + std::to_string(max_misfit) + "]");
    }
    spec.representation = t.real("representation", spec.representation);
    check(spec.representation >= 0.0, t.field("representation"), "must be >= 0");
    if (const json* q = t.find("quality")) {
      check(q->is_number(), t.field("quality"), "expected a number");
      cfg.quality[spec.id] = q->get<double>();
    }
    t.finish();
    cfg.family.tasks.push_back(std::move(spec));
  }
  cfg.family.posterior_scale = fam.real("posterior_scale", cfg.family.posterior_scale);
  check(cfg.family.posterior_scale >= 0.0, fam.field("posterior_scale"), "must be >= 0");
  cfg.family.signature_bonus = fam.real("signature_bonus", cfg.family.signature_bonus);
  cfg.family.noise_scale = fam.real("noise_scale", cfg.family.noise_scale);
  check(cfg.family.noise_scale >= 0.0, fam.field("noise_scale"), "must be >= 0");
  cfg.identical_tasks = fam.boolean("identical_tasks", cfg.identical_tasks);
  fam.finish();
  cfg.family.vocab_size = cfg.vocab_size;
  cfg.family.context_order = cfg.context_order;
}

void parse_trainer(ObjectReader& root, ExperimentConfig& cfg) {
  const json* node = root.find("trainer");
  if (node == nullptr) return;
  ObjectReader t(*node, root.field("trainer"));
  TrainerConfig& tr = cfg.trainer;
  tr.steps = t.size("steps", tr.steps);
  check(tr.steps >= 1, t.field("steps"), "must be >= 1");
  tr.batch_per_task = t.size("batch_per_task", tr.batch_per_task);
  check(tr.batch_per_task >= 1, t.field("batch_per_task"), "must be >= 1");
  tr.step_size = t.real("step_size", tr.step_size);
  check(tr.step_size > 0.0, t.field("step_size"), "must be > 0");
  const std::string optimizer = t.string("optimizer", std::string(to_string(tr.optimizer)));
  try {
    tr.optimizer = parse_optimizer(optimizer);
  } catch (const Error& e) {
    config_error(t.field("optimizer"), e.what());
  }
  tr.momentum = t.real("momentum", tr.momentum);
  check(tr.momentum >= 0.0 && tr.momentum < 1.0, t.field("momentum"), "must be in [0, 1)");
  tr.adam_beta1 = t.real("adam_beta1", tr.adam_beta1);
  check(tr.adam_beta1 >= 0.0 && tr.adam_beta1 < 1.0, t.field("adam_beta1"), "must be in [0, 1)");
  tr.adam_beta2 = t.real("adam_beta2", tr.adam_beta2);
  check(tr.adam_beta2 >= 0.0 && tr.adam_beta2 < 1.0, t.field("adam_beta2"), "must be in [0, 1)");
  tr.adam_epsilon = t.real("adam_epsilon", tr.adam_epsilon);
  check(tr.adam_epsilon > 0.0, t.field("adam_epsilon"), "must be > 0");
  tr.grad_clip = t.real("grad_clip", tr.grad_clip);
  check(tr.grad_clip >= 0.0, t.field("grad_clip"), "must be >= 0 (0 disables clipping)");
  tr.tasks_per_step = t.size("tasks_per_step", tr.tasks_per_step);
  check(tr.tasks_per_step <= cfg.family.tasks.size(), t.field("tasks_per_step"),
        "cannot exceed the number of tasks");
  tr.convergence_tol = t.real("convergence_tol", tr.convergence_tol);
  check(tr.convergence_tol >= 0.0, t.field("convergence_tol"), "must be >= 0");
  tr.convergence_window = t.size("convergence_window", tr.convergence_window);
  check(tr.convergence_window >= 1, t.field("convergence_window"), "must be >= 1");
  tr.divergence_factor = t.real("divergence_factor", tr.divergence_factor);
  check(tr.divergence_factor > 1.0, t.field("divergence_factor"), "must be > 1");
  tr.exact_x_expectation = t.boolean("exact_x_expectation", tr.exact_x_expectation);
  tr.proxy_gamma = t.integer("proxy_gamma", tr.proxy_gamma);
  check(tr.proxy_gamma >= 1, t.field("proxy_gamma"), "must be >= 1");
  tr.proxy_prefixes = t.size("proxy_prefixes", tr.proxy_prefixes);
  check(tr.proxy_prefixes >= 1, t.field("proxy_prefixes"), "must be >= 1");
  if (t.find("seed") != nullptr) {
    tr.seed = t.u64("seed", std::nullopt);
    cfg.trainer_seed_explicit = true;
  }
  t.finish();
}

}  // namespace

void ExperimentConfig::override_seed(std::uint64_t value) {
  seed = value;
  if (!trainer_seed_explicit) trainer.seed = value;
}

ExperimentConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    fail(ErrorCode::kConfig, "config syntax error at " + locate(text, e.byte > 0 ? e.byte - 1 : 0) +
                                 ": " + e.what());
  }
  ExperimentConfig cfg;
  ObjectReader root(doc, "");
  cfg.seed = root.u64("seed", cfg.seed);
  cfg.vocab_size = root.size("vocab_size", std::nullopt);
  check(cfg.vocab_size >= 2 && cfg.vocab_size <= kMaxVocabulary, "/vocab_size",
        "must be in [2, 1024]");
  cfg.context_order = root.size("context_order", cfg.context_order);
  check(cfg.context_order >= 1 && cfg.context_order <= 4, "/context_order", "must be in [1, 4]");
  cfg.epsilon_floor = root.real("epsilon_floor", cfg.epsilon_floor);
  check(cfg.epsilon_floor > 0.0 && cfg.epsilon_floor <= 1e-6, "/epsilon_floor",
        "must be in (0, 1e-6]");

  parse_family(root, cfg);

  if (const json* node = root.find("spec")) {
    ObjectReader s(*node, "/spec");
    cfg.spec.gamma = s.integer("gamma", cfg.spec.gamma);
    check(cfg.spec.gamma >= 1, s.field("gamma"), "must be >= 1");
    cfg.spec.cost_ratio = s.real("cost_ratio", cfg.spec.cost_ratio);
    check(cfg.spec.cost_ratio >= 0.0 && cfg.spec.cost_ratio < 1.0, s.field("cost_ratio"),
          "must be in [0, 1)");
    s.finish();
  }

  cfg.trainer.seed = cfg.seed;
  parse_trainer(root, cfg);

  if (const json* node = root.find("outputs")) {
    ObjectReader o(*node, "/outputs");
    cfg.outputs.directory = o.string("directory", cfg.outputs.directory);
    check(!cfg.outputs.directory.empty(), o.field("directory"), "must not be empty");
    cfg.outputs.emit_svg = o.boolean("emit_svg", cfg.outputs.emit_svg);
    o.finish();
  }
  if (const json* node = root.find("representation")) {
    ObjectReader r(*node, "/representation");
    cfg.representation.k = r.size("k", cfg.representation.k);
    check(cfg.representation.k >= 1, r.field("k"), "must be >= 1");
    cfg.representation.generation_length =
        r.size("generation_length", cfg.representation.generation_length);
    check(cfg.representation.generation_length >= 1, r.field("generation_length"), "must be >= 1");
    r.finish();
  }
  if (const json* node = root.find("metrics")) {
    ObjectReader m(*node, "/metrics");
    cfg.max_exact_support = m.size("max_exact_support", cfg.max_exact_support);
    check(cfg.max_exact_support >= 1, m.field("max_exact_support"), "must be >= 1");
    cfg.monte_carlo_samples = m.size("monte_carlo_samples", cfg.monte_carlo_samples);
    check(cfg.monte_carlo_samples >= 2, m.field("monte_carlo_samples"), "must be >= 2");
    m.finish();
  }
  root.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIo, "cannot read config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) fail(ErrorCode::kConfig, path + ": " + e.what());
    throw;
  }
}

std::string config_to_json(const ExperimentConfig& cfg) {
  ordered_json doc;
  doc["seed"] = cfg.seed;
  doc["vocab_size"] = cfg.vocab_size;
  doc["context_order"] = cfg.context_order;
  doc["epsilon_floor"] = cfg.epsilon_floor;
  ordered_json tasks = ordered_json::array();
  for (const auto& t : cfg.family.tasks) {
    ordered_json task;
    task["id"] = t.id;
    task["support_size"] = t.support_size;
    task["r_p"] = t.r_p;
    task["r_q"] = t.r_q;
    task["representation"] = t.representation;
    if (auto q = cfg.quality.find(t.id); q != cfg.quality.end()) task["quality"] = q->second;
    tasks.push_back(std::move(task));
  }
  doc["family"] = {{"tasks", std::move(tasks)},
                   {"posterior_scale", cfg.family.posterior_scale},
                   {"signature_bonus", cfg.family.signature_bonus},
                   {"noise_scale", cfg.family.noise_scale},
                   {"identical_tasks", cfg.identical_tasks}};
  doc["spec"] = {{"gamma", cfg.spec.gamma}, {"cost_ratio", cfg.spec.cost_ratio}};
  const TrainerConfig& tr = cfg.trainer;
  doc["trainer"] = {{"steps", tr.steps},
                    {"batch_per_task", tr.batch_per_task},
                    {"step_size", tr.step_size},
                    {"optimizer", std::string(to_string(tr.optimizer))},
                    {"momentum", tr.momentum},
                    {"adam_beta1", tr.adam_beta1},
                    {"adam_beta2", tr.adam_beta2},
                    {"adam_epsilon", tr.adam_epsilon},
                    {"grad_clip", tr.grad_clip},
                    {"tasks_per_step", tr.tasks_per_step},
                    {"convergence_tol", tr.convergence_tol},
                    {"convergence_window", tr.convergence_window},
                    {"divergence_factor", tr.divergence_factor},
                    {"exact_x_expectation", tr.exact_x_expectation},
                    {"proxy_gamma", tr.proxy_gamma},
                    {"proxy_prefixes", tr.proxy_prefixes},
                    {"seed", tr.seed}};
  doc["outputs"] = {{"directory", cfg.outputs.directory}, {"emit_svg", cfg.outputs.emit_svg}};
  doc["representation"] = {{"k", cfg.representation.k},
                           {"generation_length", cfg.representation.generation_length}};
  doc["metrics"] = {{"max_exact_support", cfg.max_exact_support},
                    {"monte_carlo_samples", cfg.monte_carlo_samples}};
  return doc.dump(2);
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config_to_json(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void apply_seed_precedence(ExperimentConfig& cfg, std::optional<std::uint64_t> flag_seed) {
  if (flag_seed) {
    cfg.override_seed(*flag_seed);
    return;
  }
  const char* env = std::getenv("SPECFAIR_SEED");
  if (env == nullptr || *env == '\0') return;
  char* end = nullptr;
  errno = 0;
  const unsigned long long value = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0' || env[0] == '-') {
    fail(ErrorCode::kConfig, std::string("SPECFAIR_SEED is not an unsigned integer: '") + env + "'");
  }
  cfg.override_seed(value);
}

}  // namespace specfair
