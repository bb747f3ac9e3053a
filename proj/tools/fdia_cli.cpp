#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "fdia/cases.hpp"
#include "fdia/eval.hpp"

using namespace fdia;
namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// FDIA_WORKERS, or the hardware thread count when unset.
int workers_from_env() {
  if (const char* v = std::getenv("FDIA_WORKERS")) {
    try {
      const int w = std::stoi(v);
      if (w >= 1) return w;
    } catch (const std::exception&) {
    }
    throw UsageError(std::string("FDIA_WORKERS must be a positive integer, got '") + v + "'");
  }
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

/// Every subcommand reads the whole schema, so one document serves all of them and typos are still rejected.
SweepConfig load_config(const std::string& path) {
  const auto doc = path.empty() ? ConfigDocument{} : ConfigDocument::load(path);
  auto cfg = sweep_config_from(doc);
  doc.require_all_used();
  return cfg;
}

void write_text(const std::string& path, const std::string& text) {
  if (const auto dir = fs::path(path).parent_path(); !dir.empty()) fs::create_directories(dir);
  std::ofstream os(path);
  if (!os) throw DataError("cannot write '" + path + "'");
  os << text;
  if (!os) throw DataError("failed writing '" + path + "'");
}

void write_trace(const TrainTrace& t, const std::string& path) {
  std::ostringstream os;
  write_trace_csv(t, os);
  write_text(path, os.str());
}

Domain parse_role(const std::string& role) {
  try {
    return domain_from_string(role);
  } catch (const std::exception&) {
    throw UsageError("--role must be source, target or target-test (got '" + role + "')");
  }
}

/// Normalize a raw target or test set with the statistics stored alongside a model.
Dataset normalize_with(const Dataset& raw, const NormStats& stats, std::uint64_t seed) {
  if (!raw.norm_stats.empty()) throw DataError("dataset is already normalized; pass the raw file written by 'gen'");
  return apply_normalization(raw, stats, seed);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw UsageError("invalid number '" + item + "' in list '" + text + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos)
      throw UsageError("invalid number '" + item + "' in list '" + text + "'");
    out.push_back(v);
  }
  return out;
}

std::string fmt_pct(double v) { return pct(v) + "%"; }

// ---------------------------------------------------------------------------
// Subcommands

int cmd_demo3bus(bool json, bool zero_noise) {
  const auto rep = run_3bus_demo(zero_noise);
  if (json)
    std::cout << render_json(rep).dump(2) << "\n";
  else
    std::cout << render_text(rep);
  return kExitOk;
}

struct GenArgs {
  std::string case_path = "ieee14", role, out, csv;
  double delta = 0.0, sigma = 0.01;
  std::uint64_t seed = 1, perturb_seed = 1;
  int n_base = 10, n_per_base = 1000;
};

int cmd_gen(const GenArgs& a, int workers) {
  const Domain role = parse_role(a.role);
  if (role == Domain::source && a.delta != 0.0)
    throw UsageError("source data comes from the nominal case; --delta must be 0 for --role source");
  if (a.n_base < 1 || a.n_per_base < 1) throw UsageError("--n-base and --n-per-base must be >= 1");
  if (a.sigma < 0.0) throw UsageError("--sigma must be >= 0");
  const auto nominal = cases::resolve(a.case_path);
  GenerationConfig g;
  g.n_base = a.n_base;
  g.n_per_base = a.n_per_base;
  g.sigma = a.sigma;
  g.seed = a.seed;
  g.workers = workers;
  Dataset d;
  if (role == Domain::source) {
    d = generate_source_dataset(nominal, g);
  } else {
    const auto real = perturb_case(nominal, {a.delta, perturbation_seed(a.perturb_seed)});
    d = role == Domain::target ? generate_target_dataset(real, g) : generate_target_test_dataset(real, g);
  }
  save_dataset(d, a.out);
  if (!a.csv.empty()) {
    std::ofstream os(a.csv);
    if (!os) throw DataError("cannot write '" + a.csv + "'");
    export_csv(d, os);
  }
  std::cout << "wrote " << d.size() << " " << to_string(role) << " samples (" << d.count(Label::attack) << " attacks, "
            << d.feature_dim() << " features, " << d.resampled << " redrawn profiles) to " << a.out << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string source, target, config, model, out, trace;
};

int cmd_pretrain(const TrainArgs& a) {
  auto cfg = load_config(a.config).train;
  const auto raw_source = load_dataset(a.source);
  const auto raw_target = load_dataset(a.target, &raw_source.layout);
  if (raw_target.count(Label::attack) > 0) throw DataError("stage-1 target data must be normal-only (use --role target)");
  if (!raw_source.norm_stats.empty()) throw DataError("source dataset is already normalized; pass the raw file written by 'gen'");
  const auto source = normalize_and_split(raw_source, derive_seed(cfg.seed, 11));
  const auto target = normalize_with(raw_target, source.norm_stats, derive_seed(cfg.seed, 12));
  cfg.model.input_dim = source.feature_dim();
  cfg.validate();
  const auto r = pretrain(initial_model(cfg), source, target, cfg);
  save_checkpoint(r.model, checkpoint_metadata(source, cfg, r.trace), a.out);
  write_trace(r.trace, a.trace.empty() ? a.out + ".trace.csv" : a.trace);
  std::cout << "stage 1: " << r.trace.iterations_run << " iterations, best source-validation ACC "
            << fmt_pct(r.trace.best_val) << " at iteration " << r.trace.best_iteration
            << (r.trace.reached_threshold ? " (threshold reached)" : "") << "\n";
  return kExitOk;
}

int cmd_finetune(const TrainArgs& a) {
  auto cfg = load_config(a.config).train;
  nlohmann::json meta;
  auto model = nn::load_checkpoint<double>(a.model, &meta);
  if (meta.contains("format")) throw DataError("'" + a.model + "' is a baseline, not a stage-1 checkpoint");
  cfg.model = model.config;
  cfg.validate();
  const auto stats = norm_stats_from_metadata(meta);
  const auto raw_target = load_dataset(a.target);
  if (raw_target.layout.fingerprint() != meta.at("layout_hash").get<std::uint64_t>())
    throw DataError("layout mismatch: target data does not match the checkpoint");
  if (raw_target.count(Label::attack) > 0) throw DataError("stage-2 target data must be normal-only (use --role target)");
  const auto target = normalize_with(raw_target, stats, derive_seed(cfg.seed, 12));
  Dataset source;
  if (cfg.stage2_replay && cfg.replay_ratio > 0.0) {
    if (a.source.empty())
      throw UsageError("stage 2 replays source attacks: pass --source, or set train.stage2_replay = false");
    const auto raw_source = load_dataset(a.source, &raw_target.layout);
    source = normalize_with(raw_source, stats, derive_seed(cfg.seed, 11));
  }
  const auto r = finetune(model, build_stage2_set(target, source, cfg), cfg);
  auto out_meta = checkpoint_metadata(target, cfg, r.trace);
  save_checkpoint(r.model, out_meta, a.out);
  write_trace(r.trace, a.trace.empty() ? a.out + ".trace.csv" : a.trace);
  std::cout << "stage 2: " << r.trace.iterations_run << " iterations, selected iteration " << r.trace.best_iteration
            << " (stage-2 validation ACC " << fmt_pct(r.trace.best_val) << ")\n";
  return kExitOk;
}

struct BaselineArgs {
  std::string kind, source, out, config, case_path;
};

int cmd_baseline(const BaselineArgs& a, int workers) {
  BaselineKind kind;
  try {
    kind = baseline_kind_from_string(a.kind);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto all = load_config(a.config);
  auto cfg = all.train;
  auto grid = all.baselines;
  grid.workers = workers;
  const auto raw = load_dataset(a.source);
  if (!raw.norm_stats.empty()) throw DataError("source dataset is already normalized; pass the raw file written by 'gen'");
  const auto source = normalize_and_split(raw, derive_seed(cfg.seed, 11));
  cfg.model.input_dim = source.feature_dim();
  std::optional<GridCase> nominal;
  if (kind == BaselineKind::bdd) nominal = cases::resolve(a.case_path.empty() ? source.case_id : a.case_path);
  const auto m = train_baseline(kind, source, grid, cfg, nominal ? &*nominal : nullptr);
  save_baseline(m, a.out);
  std::cout << to_string(kind) << ":";
  for (const auto& c : m.selection) std::cout << " " << c.dump();
  std::cout << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string model, test, report;
};

int cmd_eval(const EvalArgs& a, int workers) {
  const auto raw = load_dataset(a.test);
  std::vector<Label> verdicts;
  std::string method;
  Dataset test;
  nlohmann::json meta;
  bool is_baseline = !is_nn_checkpoint(a.model);
  if (!is_baseline) {
    auto net = nn::load_checkpoint<double>(a.model, &meta);
    is_baseline = meta.contains("format");
    if (!is_baseline) {
      if (raw.layout.fingerprint() != meta.at("layout_hash").get<std::uint64_t>())
        throw DataError("layout mismatch: test data does not match the checkpoint");
      test = normalize_with(raw, norm_stats_from_metadata(meta), 13);
      verdicts = classify(net, test).verdicts;
      method = "proposed";
    }
  }
  if (is_baseline) {
    const auto m = load_baseline(a.model);
    test = normalize_with(raw, m.norm_stats, 13);
    verdicts = predict_baseline(m, test, {}, workers);
    method = to_string(m.kind);
  }
  ScenarioResult s;
  s.case_id = raw.case_id;
  s.seed = raw.seed;
  s.n_test = raw.size();
  s.label = fs::path(a.test).filename().string();
  s.methods.push_back(summarize(method, {confusion(verdicts, test.labels)}));
  const auto& r = s.methods.front();
  write_text(a.report, emit_report({s}, report_format_for_path(a.report)));
  std::cout << method_info(method).name << ": ACC " << fmt_pct(r.acc_mean) << ", MAR "
            << (r.mar_mean ? fmt_pct(*r.mar_mean) : std::string("n/a")) << " on " << raw.size() << " samples (TP "
            << r.counts.tp << ", TN " << r.counts.tn << ", FP " << r.counts.fp << ", FN " << r.counts.fn << ")\n";
  return kExitOk;
}

struct SweepArgs {
  std::string case_path = "ieee14", deltas, sigmas, config, report_dir;
};

void write_sweep(const std::string& dir, const std::string& name, const std::vector<ScenarioResult>& results,
                 const std::vector<ScenarioTraces>& traces, bool sigma_axis) {
  write_text(dir + "/" + name + ".md", emit_report(results, ReportFormat::markdown));
  write_text(dir + "/" + name + ".csv", emit_report(results, ReportFormat::csv));
  write_text(dir + "/" + name + ".json", emit_report(results, ReportFormat::json));
  write_text(dir + "/" + name + "_runtimes.csv", emit_runtime_csv(results));
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto tag = sigma_axis ? "sigma_" + pct(results[i].sigma_source) : "delta_" + pct(results[i].delta);
    if (!traces[i].stage1.records.empty()) write_trace(traces[i].stage1, dir + "/traces/" + tag + "_stage1.csv");
    if (!traces[i].stage2.records.empty()) write_trace(traces[i].stage2, dir + "/traces/" + tag + "_stage2.csv");
  }
  std::cout << emit_report(results, ReportFormat::markdown);
}

int cmd_sweep(const SweepArgs& a, int workers) {
  const auto deltas = parse_list(a.deltas), sigmas = parse_list(a.sigmas);
  auto cfg = load_config(a.config);
  cfg.workers = workers;
  const auto nominal = cases::resolve(a.case_path);
  fs::create_directories(a.report_dir);
  bool any_error = false;
  const auto check = [&](const std::vector<ScenarioResult>& rs) {
    for (const auto& s : rs) {
      any_error = any_error || !s.error.empty();
      for (const auto& m : s.methods) any_error = any_error || !m.error.empty();
    }
  };
  if (!deltas.empty()) {
    std::vector<ScenarioTraces> traces;
    const auto r = run_delta_sweep(nominal, deltas, cfg, &traces);
    write_sweep(a.report_dir, "delta_sweep", r, traces, false);
    check(r);
  }
  if (!sigmas.empty()) {
    std::vector<ScenarioTraces> traces;
    const auto r = run_sigma_sweep(nominal, sigmas, cfg, &traces);
    write_sweep(a.report_dir, "sigma_sweep", r, traces, true);
    check(r);
  }
  if (deltas.empty() && sigmas.empty()) std::cout << "no scenarios requested\n";
  if (any_error) std::cerr << "some scenarios or methods failed; see the reports\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detection of stealthy false data injection attacks under line modeling errors"};
  app.require_subcommand(1);

  auto* demo = app.add_subcommand("demo3bus", "three-bus modeling-error illustration");
  bool demo_json = false, demo_zero = false;
  demo->add_flag("--json", demo_json, "print JSON instead of text");
  demo->add_flag("--zero-noise", demo_zero, "use e = 0");

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate a labelled dataset");
  gen->add_option("--case", gen_args.case_path, "case file or embedded name (ieee14, demo3)")->capture_default_str();
  gen->add_option("--delta", gen_args.delta, "line-parameter perturbation level for target roles")->capture_default_str();
  gen->add_option("--sigma", gen_args.sigma, "relative measurement noise")->capture_default_str();
  gen->add_option("--role", gen_args.role, "source, target or target-test")->required();
  gen->add_option("--out", gen_args.out, "output dataset file")->required();
  gen->add_option("--seed", gen_args.seed, "generation seed")->capture_default_str();
  gen->add_option("--perturb-seed", gen_args.perturb_seed, "seed of the line-parameter perturbation")->capture_default_str();
  gen->add_option("--n-base", gen_args.n_base, "base load conditions")->capture_default_str();
  gen->add_option("--n-per-base", gen_args.n_per_base, "profiles per base condition")->capture_default_str();
  gen->add_option("--csv", gen_args.csv, "also export CSV");

  TrainArgs pre_args;
  auto* pre = app.add_subcommand("pretrain", "stage 1: joint CE + MMD training");
  pre->add_option("--source", pre_args.source, "source dataset")->required();
  pre->add_option("--target", pre_args.target, "normal-only target dataset")->required();
  pre->add_option("--config", pre_args.config, "configuration document");
  pre->add_option("--out", pre_args.out, "output checkpoint")->required();
  pre->add_option("--trace", pre_args.trace, "trace CSV (default: <out>.trace.csv)");

  TrainArgs fin_args;
  auto* fin = app.add_subcommand("finetune", "stage 2: fine-tune on target data");
  fin->add_option("--model", fin_args.model, "stage-1 checkpoint")->required();
  fin->add_option("--target", fin_args.target, "normal-only target dataset")->required();
  fin->add_option("--source", fin_args.source, "source dataset for attack replay");
  fin->add_option("--config", fin_args.config, "configuration document");
  fin->add_option("--out", fin_args.out, "output checkpoint")->required();
  fin->add_option("--trace", fin_args.trace, "trace CSV (default: <out>.trace.csv)");

  BaselineArgs base_args;
  auto* base = app.add_subcommand("baseline", "train a comparison detector");
  base->add_option("--kind", base_args.kind, "bdd, dnn_b, lr, knn or gnb")->required();
  base->add_option("--source", base_args.source, "source dataset")->required();
  base->add_option("--out", base_args.out, "output model file")->required();
  base->add_option("--config", base_args.config, "configuration document");
  base->add_option("--case", base_args.case_path, "nominal case for BDD (default: the dataset's case)");

  EvalArgs eval_args;
  auto* ev = app.add_subcommand("eval", "evaluate a model on a test set");
  ev->add_option("--model", eval_args.model, "checkpoint or baseline file")->required();
  ev->add_option("--test", eval_args.test, "test dataset")->required();
  ev->add_option("--report", eval_args.report, "report path (.md, .csv or .json)")->required();

  SweepArgs sweep_args;
  auto* sw = app.add_subcommand("sweep", "delta and sigma scenario sweeps");
  sw->add_option("--case", sweep_args.case_path, "case file or embedded name")->capture_default_str();
  sw->add_option("--deltas", sweep_args.deltas, "comma-separated perturbation levels, e.g. 0,0.02,0.5");
  sw->add_option("--sigmas", sweep_args.sigmas, "comma-separated source noise levels, e.g. 0,0.01,0.1");
  sw->add_option("--config", sweep_args.config, "configuration document");
  sw->add_option("--report-dir", sweep_args.report_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*demo) return cmd_demo3bus(demo_json, demo_zero);
    const int workers = workers_from_env();
    if (*gen) return cmd_gen(gen_args, workers);
    if (*pre) return cmd_pretrain(pre_args);
    if (*fin) return cmd_finetune(fin_args);
    if (*base) return cmd_baseline(base_args, workers);
    if (*ev) return cmd_eval(eval_args, workers);
    if (*sw) return cmd_sweep(sweep_args, workers);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
