#include "specfair/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "specfair/csv.hpp"
#include "specfair/error.hpp"
#include "specfair/fairness.hpp"
#include "specfair/mitigation.hpp"
#include "specfair/spec_engine.hpp"
#include "svg.hpp"

namespace specfair {
namespace fs = std::filesystem;
namespace {

// Collects artifacts for one run and writes the manifest last.
class RunWriter {
 public:
  RunWriter(std::string command, fs::path dir, const ExperimentConfig* cfg)
      : command_(std::move(command)), dir_(std::move(dir)), cfg_(cfg), started_(utc_timestamp()) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) fail(ErrorCode::kIo, "cannot create output directory " + dir_.string() + ": " + ec.message());
  }

  std::ofstream open(const std::string& name) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIo, "cannot write " + (dir_ / name).string());
    if (std::find(artifacts_.begin(), artifacts_.end(), name) == artifacts_.end()) {
      artifacts_.push_back(name);
    }
    return out;
  }

  void write(const std::string& name, const std::string& body) {
    auto out = open(name);
    out << body;
    close(out, name);
  }

  void close(std::ofstream& out, const std::string& name) {
    out.close();
    if (!out) fail(ErrorCode::kIo, "failed writing " + (dir_ / name).string());
  }

  const fs::path& dir() const { return dir_; }

  RunResult finish(const std::string& manifest_name = "manifest.json") {
    nlohmann::ordered_json doc;
    doc["command"] = command_;
    doc["tool_version"] = kToolVersion;
    if (cfg_ != nullptr) doc["config_hash"] = config_hash(*cfg_);
    doc["started"] = started_;
    doc["finished"] = utc_timestamp();
    doc["artifacts"] = artifacts_;
    if (cfg_ != nullptr) doc["config"] = nlohmann::ordered_json::parse(config_to_json(*cfg_));
    const fs::path tmp = dir_ / (manifest_name + ".tmp");
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::kIo, "cannot write " + tmp.string());
      out << doc.dump(2) << '\n';
      out.close();
      if (!out) fail(ErrorCode::kIo, "failed writing " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, dir_ / manifest_name, ec);
    if (ec) fail(ErrorCode::kIo, "cannot finalize manifest: " + ec.message());
    RunResult result;
    result.directory = dir_;
    result.artifacts = artifacts_;
    result.artifacts.push_back(manifest_name);
    return result;
  }

 private:
  std::string command_;
  fs::path dir_;
  const ExperimentConfig* cfg_;
  std::string started_;
  std::vector<std::string> artifacts_;
};

std::vector<TaskMetrics> metrics_for(const ExperimentConfig& cfg, const SyntheticFamily& fam,
                                     const TabularSoftmaxModel& drafter) {
  std::vector<TaskMetrics> out;
  for (std::size_t t = 0; t < fam.family.size(); ++t) {
    const Task& task = fam.family[t];
    if (task.support_size() <= cfg.max_exact_support) {
      out.push_back(task_metrics(fam.verifier, drafter, task, cfg.spec, cfg.epsilon_floor));
    } else {
      Rng rng = Rng::stream(cfg.seed, StreamPurpose::kSimulate, t, 1u << 20);
      out.push_back(task_metrics_sampled(fam.verifier, drafter, task, cfg.spec,
                                         cfg.monte_carlo_samples, rng, cfg.epsilon_floor));
    }
  }
  return out;
}

void write_metrics(RunWriter& run, const std::string& name, std::span<const TaskMetrics> metrics) {
  auto out = run.open(name);
  write_metrics_csv(out, metrics);
  run.close(out, name);
}

void write_family_summary(RunWriter& run, std::span<const TaskMetrics> metrics) {
  const auto d = divergences(metrics);
  const std::size_t star = argmin_divergence(d);
  auto out = run.open("family_summary.csv");
  CsvWriter csv(out);
  csv.header(kFamilySummaryHeader);
  csv.row({std::to_string(metrics.size()), format_number(unfairness(d)), format_number(d[star]),
           metrics[star].task, format_number(alpha_variance(metrics))});
  run.close(out, "family_summary.csv");
}

void render_plots(const fs::path& dir, RunWriter& run, std::ostream& log);

void maybe_render(const ExperimentConfig& cfg, RunWriter& run, std::ostream& log) {
  if (cfg.outputs.emit_svg) render_plots(run.dir(), run, log);
}

}  // namespace

SyntheticFamily build_family(const ExperimentConfig& cfg) {
  FamilySpec spec = cfg.family;
  spec.vocab_size = cfg.vocab_size;
  spec.context_order = cfg.context_order;
  SyntheticFamily fam = [&] {
    try {
      return make_synthetic_family(spec, cfg.seed);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kInfeasibleSpec) fail(ErrorCode::kConfig, std::string("/family: ") + e.what());
      throw;
    }
  }();
  if (!cfg.identical_tasks) return fam;
  // Every task reuses the first task's prefixes and posterior, so all tasks
  // see one model pair on one distribution.
  const Task& first = fam.family[0];
  std::vector<Task> copies;
  for (const auto& task : fam.family) {
    std::vector<WeightedContext> prefixes(first.prefixes().begin(), first.prefixes().end());
    copies.emplace_back(task.id(), std::move(prefixes), first.posterior_ptr());
  }
  fam.family = TaskFamily(std::move(copies));
  fam.signatures.assign(fam.signatures.size(), fam.signatures.front());
  return fam;
}

double alpha_variance(std::span<const TaskMetrics> metrics) {
  if (metrics.empty()) return 0.0;
  double mean = 0.0;
  for (const auto& m : metrics) mean += m.alpha;
  mean /= static_cast<double>(metrics.size());
  double var = 0.0;
  for (const auto& m : metrics) var += (m.alpha - mean) * (m.alpha - mean);
  return var / static_cast<double>(metrics.size());
}

std::vector<double> parse_number_list(std::string_view text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    std::string_view cell = text.substr(start, comma - start);
    while (!cell.empty() && cell.front() == ' ') cell.remove_prefix(1);
    while (!cell.empty() && cell.back() == ' ') cell.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size()) {
      fail(ErrorCode::kInvalidArgument, "not a number list: '" + std::string(text) + "'");
    }
    out.push_back(value);
    start = comma + 1;
  }
  return out;
}

std::map<std::string, double> load_quality_file(const std::string& path) {
  const CsvTable table = read_csv_file(path);
  const std::size_t task = table.column("task");
  const std::size_t quality = table.column("quality");
  std::map<std::string, double> out;
  for (const auto& row : table.rows) {
    const auto beta = parse_number(row.at(quality));
    if (!beta) fail(ErrorCode::kIo, path + ": empty quality for task '" + row.at(task) + "'");
    out[row.at(task)] = *beta;
  }
  return out;
}

RunResult run_simulate(const ExperimentConfig& cfg, const SimulateOptions& opts, std::ostream& log) {
  if (opts.steps < 1) fail(ErrorCode::kInvalidArgument, "simulate needs --steps >= 1");
  const SyntheticFamily fam = build_family(cfg);
  RunWriter run("simulate", cfg.outputs.directory, &cfg);
  const auto metrics = metrics_for(cfg, fam, fam.drafter);
  const auto gamma = static_cast<std::size_t>(cfg.spec.gamma);

  std::ofstream traces;
  if (opts.trace) traces = run.open("traces.jsonl");

  auto out = run.open("simulate.csv");
  CsvWriter csv(out);
  std::string header = "task,steps,exact_alpha,realized_alpha,realized_alpha_se,mean_tokens,model_tokens";
  for (std::size_t i = 0; i < gamma; ++i) header += ",accept_pos_" + std::to_string(i);
  csv.header(header);

  for (std::size_t t = 0; t < fam.family.size(); ++t) {
    const Task& task = fam.family[t];
    std::vector<std::size_t> scanned(gamma, 0);
    std::vector<std::size_t> accepted(gamma, 0);
    std::size_t tokens = 0;
    for (std::size_t step = 0; step < opts.steps; ++step) {
      Rng rng = Rng::stream(cfg.seed, StreamPurpose::kSimulate, t, step);
      const Context& prefix = task.sample_prefix(rng);
      const StepTrace trace = speculative_step(fam.verifier, fam.drafter, prefix, cfg.spec, rng);
      for (std::size_t i = 0; i < gamma && i <= trace.accepted_prefix_len; ++i) {
        ++scanned[i];
        if (i < trace.accepted_prefix_len) ++accepted[i];
      }
      tokens += trace.emitted.size();
      if (opts.trace) write_trace_line(traces, step, prefix, trace);
    }
    const double n = static_cast<double>(opts.steps);
    const double a0 = static_cast<double>(accepted[0]) / n;
    std::vector<std::string> row{task.id(), std::to_string(opts.steps), format_number(metrics[t].alpha),
                                 format_number(a0), format_number(std::sqrt(a0 * (1.0 - a0) / n)),
                                 format_number(static_cast<double>(tokens) / n),
                                 format_number(expected_tokens_closed(metrics[t].alpha, cfg.spec.gamma))};
    for (std::size_t i = 0; i < gamma; ++i) {
      row.push_back(scanned[i] == 0 ? std::string()
                                    : format_number(static_cast<double>(accepted[i]) /
                                                    static_cast<double>(scanned[i])));
    }
    csv.row(row);
    log << task.id() << ": realized alpha " << format_number(a0) << " (exact "
        << format_number(metrics[t].alpha) << ")\n";
  }
  run.close(out, "simulate.csv");
  if (opts.trace) run.close(traces, "traces.jsonl");
  return run.finish();
}

RunResult run_metrics(const ExperimentConfig& cfg, std::ostream& log) {
  const SyntheticFamily fam = build_family(cfg);
  RunWriter run("metrics", cfg.outputs.directory, &cfg);
  const auto metrics = metrics_for(cfg, fam, fam.drafter);
  write_metrics(run, "metrics.csv", metrics);
  write_family_summary(run, metrics);
  maybe_render(cfg, run, log);
  const double u = unfairness(divergences(metrics));
  log << "U = " << format_number(u) << '\n';
  RunResult result = run.finish();
  result.unfairness = u;
  return result;
}

RunResult run_verify_theorems(const ExperimentConfig& cfg, std::size_t trials, std::ostream& log) {
  if (trials < 1) fail(ErrorCode::kInvalidArgument, "verify-theorems needs --trials >= 1");
  struct Tally {
    std::string check;
    std::size_t evaluated = 0;
    std::size_t violations = 0;
    double min_margin = std::numeric_limits<double>::infinity();

    void add(double margin, bool ok) {
      ++evaluated;
      if (!ok) ++violations;
      min_margin = std::min(min_margin, margin);
    }
  };
  Tally jensen{"chain_jensen"}, pinsker{"chain_pinsker"}, entropy{"chain_entropy"},
      total{"chain_total"}, fitness{"fitness_bound"}, disparity{"disparity_condition"};

  static constexpr int kGammas[] = {1, 2, 4, 8};
  static constexpr double kCosts[] = {0.0, 0.1, 0.5};

  RunWriter run("verify-theorems", cfg.outputs.directory, &cfg);
  auto violations = run.open("violations.csv");
  CsvWriter vcsv(violations);
  vcsv.header("trial,check,task,gamma,cost_ratio,margin");
  const double max_misfit = max_feasible_misfit(cfg.vocab_size);

  for (std::size_t trial = 0; trial < trials; ++trial) {
    Rng rng = Rng::stream(cfg.seed, StreamPurpose::kVerify, trial);
    FamilySpec spec = cfg.family;
    spec.vocab_size = cfg.vocab_size;
    spec.context_order = cfg.context_order;
    for (auto& t : spec.tasks) {
      t.r_q = rng.uniform() * 0.6 * max_misfit;
      t.r_p = rng.uniform() * std::min(0.1, 0.5 * max_misfit);
    }
    const SyntheticFamily fam = make_synthetic_family(spec, rng());

    std::vector<TaskMetrics> base;
    for (int gamma : kGammas) {
      for (double c : kCosts) {
        const SpecConfig sc{gamma, c};
        const auto metrics = family_metrics(fam.verifier, fam.drafter, fam.family, sc, cfg.epsilon_floor);
        for (const auto& m : metrics) {
          const ChainReport r = chain_report(m, sc);
          const std::pair<Tally*, double> margins[] = {{&jensen, r.margin_jensen},
                                                       {&pinsker, r.margin_pinsker},
                                                       {&entropy, r.margin_entropy},
                                                       {&total, r.margin_total}};
          for (auto [tally, margin] : margins) {
            const bool ok = margin >= -kBoundSlack;
            tally->add(margin, ok);
            if (!ok) {
              vcsv.row({std::to_string(trial), tally->check, m.task, std::to_string(gamma),
                        format_number(c), format_number(margin)});
            }
          }
        }
        if (gamma == cfg.spec.gamma && c == cfg.spec.cost_ratio) base = metrics;
      }
    }
    if (base.empty()) base = family_metrics(fam.verifier, fam.drafter, fam.family, cfg.spec, cfg.epsilon_floor);

    for (const auto& r : validate_fitness_bound(base)) {
      if (r.skipped) continue;
      fitness.add(r.bound - r.deviation, r.ok);
      if (!r.ok) {
        vcsv.row({std::to_string(trial), fitness.check, r.task, "", "", format_number(r.bound - r.deviation)});
      }
    }
    for (std::size_t i = 0; i < base.size(); ++i) {
      for (std::size_t j = 0; j < base.size(); ++j) {
        if (i == j) continue;
        const DisparityReport r = validate_disparity_condition(base[i], base[j], cfg.spec);
        if (!r.condition) continue;
        disparity.add(r.alpha_gap, r.ok);
        if (!r.ok) {
          vcsv.row({std::to_string(trial), disparity.check, base[i].task + ">" + base[j].task,
                    std::to_string(cfg.spec.gamma), format_number(cfg.spec.cost_ratio),
                    format_number(r.alpha_gap)});
        }
      }
    }
  }
  run.close(violations, "violations.csv");

  auto out = run.open("verify_summary.csv");
  CsvWriter csv(out);
  csv.header(kVerifySummaryHeader);
  std::size_t bad = 0;
  for (const Tally* t : {&jensen, &pinsker, &entropy, &total, &fitness, &disparity}) {
    csv.row({t->check, std::to_string(t->evaluated), std::to_string(t->violations),
             t->evaluated == 0 ? std::string() : format_number(t->min_margin)});
    log << t->check << ": " << t->evaluated << " checked, " << t->violations << " violations\n";
    bad += t->violations;
  }
  run.close(out, "verify_summary.csv");
  RunResult result = run.finish();
  result.violations = bad;
  if (bad > 0) {
    fail(ErrorCode::kTheoremViolation,
         std::to_string(bad) + " bound violations, see " + (run.dir() / "violations.csv").string());
  }
  return result;
}

RunResult run_train_scdf(const ExperimentConfig& cfg, std::ostream& log) {
  const SyntheticFamily fam = build_family(cfg);
  RunWriter run("train-scdf", cfg.outputs.directory, &cfg);
  const auto before = metrics_for(cfg, fam, fam.drafter);
  write_metrics(run, "metrics_before.csv", before);

  auto train_log = run.open("train_log.csv");
  const ScdfResult result =
      run_scdf(fam.verifier, fam.drafter, fam.family, cfg.trainer, cfg.epsilon_floor, &train_log);
  run.close(train_log, "train_log.csv");

  const auto after = metrics_for(cfg, fam, result.drafter);
  write_metrics(run, "metrics_after.csv", after);

  auto history = run.open("u_history.csv");
  CsvWriter csv(history);
  csv.header(kUHistoryHeader);
  csv.row({"0", format_number(result.initial_u)});
  for (const auto& step : result.history) {
    csv.row({std::to_string(step.step + 1), format_number(step.exact_u)});
  }
  run.close(history, "u_history.csv");
  run.write("drafter_final.json", result.drafter.to_json() + "\n");
  maybe_render(cfg, run, log);

  const double u_after = unfairness(divergences(after));
  log << "U: " << format_number(result.initial_u) << " -> " << format_number(u_after) << '\n';
  log << "alpha variance: " << format_number(alpha_variance(before)) << " -> "
      << format_number(alpha_variance(after)) << '\n';
  log << "steps: " << result.history.size() << (result.converged ? " (converged)" : "") << '\n';
  RunResult out = run.finish();
  out.unfairness = u_after;
  return out;
}

RunResult run_sweep_temperature(const ExperimentConfig& cfg, const std::vector<double>& temps,
                                const std::optional<std::string>& quality_path, std::ostream& log) {
  if (temps.empty()) fail(ErrorCode::kInvalidArgument, "sweep-temperature needs --temps");
  const SyntheticFamily fam = build_family(cfg);
  std::map<std::string, double> quality = cfg.quality;
  if (quality_path) {
    for (const auto& [task, beta] : load_quality_file(*quality_path)) quality[task] = beta;
  }
  RunWriter run("sweep-temperature", cfg.outputs.directory, &cfg);
  const auto rows = temperature_sweep(fam.verifier, fam.drafter, fam.family, temps, quality,
                                      cfg.epsilon_floor);
  auto out = run.open("temperature_sweep.csv");
  write_sweep_csv(out, rows);
  run.close(out, "temperature_sweep.csv");
  log << rows.size() << " sweep rows\n";
  return run.finish();
}

RunResult run_balance_data(const ExperimentConfig& cfg, const std::vector<double>& grid,
                           std::ostream& log) {
  if (grid.empty()) fail(ErrorCode::kInvalidArgument, "balance-data needs --grid");
  const SyntheticFamily fam = build_family(cfg);
  RunWriter run("balance-data", cfg.outputs.directory, &cfg);
  const auto rows = data_balance_finetune(fam.verifier, fam.drafter, fam.family[0], fam.family[1],
                                          grid, cfg.trainer, cfg.epsilon_floor);
  auto out = run.open("balance.csv");
  write_balance_csv(out, rows);
  run.close(out, "balance.csv");
  for (const auto& r : rows) log << "mix " << format_number(r.mix) << ": U = " << format_number(r.unfairness) << '\n';
  return run.finish();
}

RunResult run_estimate_representation(const ExperimentConfig& cfg, std::ostream& log) {
  const SyntheticFamily fam = build_family(cfg);
  RunWriter run("estimate-representation", cfg.outputs.directory, &cfg);
  std::vector<std::pair<Token, Token>> ranges;
  std::vector<std::string> ids;
  for (std::size_t t = 0; t < fam.family.size(); ++t) {
    ranges.emplace_back(fam.signatures[t].begin, fam.signatures[t].end);
    ids.push_back(fam.family[t].id());
  }
  Rng rng = Rng::stream(cfg.seed, StreamPurpose::kRepresentation);
  const auto est = estimate_representation(fam.drafter, ids, signature_classifier(ranges),
                                           cfg.representation.k,
                                           cfg.representation.generation_length, rng);
  auto out = run.open("representation.csv");
  CsvWriter csv(out);
  csv.header(kRepresentationHeader);
  for (std::size_t i = 0; i < est.ranked.size(); ++i) {
    const auto& e = est.ranked[i];
    csv.row({std::to_string(i + 1), e.task, format_number(e.probability), std::to_string(e.count)});
  }
  run.close(out, "representation.csv");
  log << est.samples << " samples, " << est.rejected << " unclassified";
  if (!est.ranked.empty()) log << "; most represented: " << est.ranked.front().task;
  log << '\n';
  return run.finish();
}

namespace {

double cell_number(const std::vector<std::string>& row, std::size_t col, const std::string& file) {
  const auto v = parse_number(row.at(col));
  if (!v) fail(ErrorCode::kIo, file + ": empty numeric cell");
  return *v;
}

void render_plots(const fs::path& dir, RunWriter& run, std::ostream& log) {
  fs::path metrics_path = dir / "metrics_after.csv";
  if (!fs::exists(metrics_path)) metrics_path = dir / "metrics.csv";
  if (!fs::exists(metrics_path)) {
    fail(ErrorCode::kIo, "no metrics.csv or metrics_after.csv in " + dir.string());
  }
  const std::string mfile = metrics_path.string();
  const CsvTable metrics = read_csv_file(mfile);
  const std::size_t task_col = metrics.column("task");
  const std::size_t alpha_col = metrics.column("alpha");
  const std::size_t rq_col = metrics.column("r_q");

  std::vector<std::pair<std::string, double>> bars;
  std::vector<std::pair<double, double>> fitness;
  std::vector<std::string> labels;
  for (const auto& row : metrics.rows) {
    const double alpha = cell_number(row, alpha_col, mfile);
    bars.emplace_back(row.at(task_col), alpha);
    if (const auto rq = parse_number(row.at(rq_col))) {
      fitness.emplace_back(1.0 - *rq, alpha);
      labels.push_back(row.at(task_col));
    }
  }
  run.write("alpha_by_task.svg",
            svg::bar_chart({"Acceptance rate by task", "task", "alpha_T"}, bars));
  run.write("alpha_vs_fitness.svg",
            svg::scatter({"Acceptance vs drafter fitness", "1 - r_q", "alpha_T"}, fitness, labels,
                         true));

  const fs::path history_path = dir / "u_history.csv";
  if (fs::exists(history_path)) {
    const CsvTable history = read_csv_file(history_path.string());
    const std::size_t step_col = history.column("step");
    const std::size_t u_col = history.column("unfairness");
    std::vector<std::pair<double, double>> points;
    for (const auto& row : history.rows) {
      points.emplace_back(cell_number(row, step_col, history_path.string()),
                          cell_number(row, u_col, history_path.string()));
    }
    run.write("unfairness_over_steps.svg",
              svg::line_chart({"Unfairness over training", "step", "U"}, points));
  }
  log << "rendered plots from " << metrics_path.filename().string() << '\n';
}

}  // namespace

RunResult run_report(const fs::path& run_dir, std::ostream& log) {
  if (!fs::is_directory(run_dir)) fail(ErrorCode::kIo, "run directory not found: " + run_dir.string());
  RunWriter run("report", run_dir, nullptr);
  render_plots(run_dir, run, log);
  return run.finish("report_manifest.json");
}

}  // namespace specfair
