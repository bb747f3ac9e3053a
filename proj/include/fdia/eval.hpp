#ifndef FDIA_EVAL_HPP
#define FDIA_EVAL_HPP

#include <bit>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fdia/baselines.hpp"

namespace fdia {

// ---------------------------------------------------------------------------
// Metrics (attack is the positive class)

struct ConfusionCounts {
  std::int64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(const std::vector<Label>& predicted, const std::vector<Label>& truth) {
  if (predicted.size() != truth.size()) throw DataError("confusion: verdict count differs from sample count");
  ConfusionCounts c;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predicted[i] == Label::attack, t = truth[i] == Label::attack;
    (p ? (t ? c.tp : c.fp) : (t ? c.fn : c.tn)) += 1;
  }
  return c;
}

struct Metrics {
  double acc = 0.0;
  std::optional<double> mar;  // empty when there are no positives
};

inline Metrics compute_metrics(const ConfusionCounts& c) {
  if (c.tp < 0 || c.tn < 0 || c.fp < 0 || c.fn < 0) throw std::invalid_argument("confusion counts must be >= 0");
  if (c.total() == 0) throw DataError("compute_metrics: no samples");
  Metrics m;
  m.acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn > 0) m.mar = static_cast<double>(c.fn) / static_cast<double>(c.tp + c.fn);
  return m;
}

// ---------------------------------------------------------------------------
// Methods in report order

struct MethodInfo {
  const char* key;
  const char* name;
  const char* type;
  bool implemented;
};

inline const std::vector<MethodInfo>& method_table() {
  static const std::vector<MethodInfo> t{
      {"bdd", "BDD", "Model-based", true},       {"lr", "LR", "Data-driven", true},
      {"knn", "KNN", "Data-driven", true},       {"gnb", "GNB", "Data-driven", true},
      {"svm", "SVM", "Data-driven", false},      {"rf", "RF", "Data-driven", false},
      {"dnn_b", "DNN-B", "Data-driven", true},   {"proposed", "Proposed", "Transfer learning", true},
  };
  return t;
}

inline const MethodInfo& method_info(const std::string& key) {
  for (const auto& m : method_table())
    if (key == m.key) return m;
  throw std::invalid_argument("unknown method '" + key + "'");
}

// ---------------------------------------------------------------------------
// Results

struct MethodResult {
  std::string method;
  bool implemented = true;
  std::string error;  // non-empty when the method failed in this scenario
  int trials = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  std::optional<double> mar_mean, mar_std;
  ConfusionCounts counts;  // summed over trials
  double seconds = 0.0;    // wall clock, kept out of every report

  bool operator==(const MethodResult& o) const {
    return method == o.method && implemented == o.implemented && error == o.error && trials == o.trials &&
           acc_mean == o.acc_mean && acc_std == o.acc_std && mar_mean == o.mar_mean && mar_std == o.mar_std &&
           counts == o.counts;
  }
};

struct ScenarioResult {
  double delta = 0.0;
  double sigma_source = 0.01;
  double sigma_target = 0.01;
  std::string case_id;
  std::string label;  // column heading override for single-evaluation reports
  std::uint64_t seed = 0;
  std::size_t n_source = 0, n_target = 0, n_test = 0;
  std::string error;
  std::vector<MethodResult> methods;
  nlohmann::json diagnostics = nlohmann::json::object();

  const MethodResult* find(const std::string& method) const {
    for (const auto& m : methods)
      if (m.method == method) return &m;
    return nullptr;
  }

  bool operator==(const ScenarioResult& o) const {
    return delta == o.delta && sigma_source == o.sigma_source && sigma_target == o.sigma_target && case_id == o.case_id && label == o.label &&
           seed == o.seed && n_source == o.n_source && n_target == o.n_target && n_test == o.n_test && error == o.error &&
           methods == o.methods && diagnostics == o.diagnostics;
  }
};

/// Mean and sample standard deviation (0 for a single value).
inline std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

/// Aggregate per-trial confusion counts of one method.
inline MethodResult summarize(const std::string& method, const std::vector<ConfusionCounts>& per_trial, double seconds = 0.0) {
  MethodResult r;
  r.method = method;
  r.trials = static_cast<int>(per_trial.size());
  r.seconds = seconds;
  std::vector<double> acc, mar;
  for (const auto& c : per_trial) {
    const auto m = compute_metrics(c);
    acc.push_back(m.acc);
    if (m.mar) mar.push_back(*m.mar);
    r.counts += c;
  }
  std::tie(r.acc_mean, r.acc_std) = mean_std(acc);
  if (!mar.empty() && mar.size() == per_trial.size()) {
    const auto [mm, ms] = mean_std(mar);
    r.mar_mean = mm;
    r.mar_std = ms;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sweep configuration

struct SweepConfig {
  TrainConfig train;
  BaselineGrid baselines;
  int n_base = 10;
  int n_per_base_source = 1000;     // 20k source samples
  int n_per_base_target = 2000;     // 20k target normals
  int n_per_base_test = 200;        // 4k balanced test samples
  double sigma = 0.01;              // noise in both domains for the delta sweep
  double sigma_target = 0.01;       // target noise for the sigma sweep
  double sigma_sweep_delta = 0.5;   // fixed delta for the sigma sweep
  std::uint64_t seed = 1;
  int trials = 5;
  std::vector<std::string> methods{"bdd", "lr", "knn", "gnb", "svm", "rf", "dnn_b", "proposed"};
  int held_out_rows = 1000;         // rows per domain for the layer-J MMD diagnostic
  int workers = 1;

  void validate() const {
    train.validate();
    baselines.validate();
    if (n_base < 1 || n_per_base_source < 1 || n_per_base_target < 1 || n_per_base_test < 1)
      throw std::invalid_argument("dataset sizes must be >= 1");
    if (sigma < 0.0 || sigma_target < 0.0) throw std::invalid_argument("sigma must be >= 0");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    for (const auto& m : methods) method_info(m);
  }
};

/// Reads [data] and [sweep] plus the training and baseline sections.
inline SweepConfig sweep_config_from(const ConfigDocument& doc, SweepConfig s = {}) {
  s.train = train_config_from(doc, s.train);
  s.baselines = baseline_grid_from(doc, s.baselines);
  s.n_base = doc.get("data.n_base", s.n_base);
  s.n_per_base_source = doc.get("data.n_per_base_source", s.n_per_base_source);
  s.n_per_base_target = doc.get("data.n_per_base_target", s.n_per_base_target);
  s.n_per_base_test = doc.get("data.n_per_base_test", s.n_per_base_test);
  s.sigma = doc.get("data.sigma", s.sigma);
  s.sigma_target = doc.get("sweep.sigma_target", s.sigma_target);
  s.sigma_sweep_delta = doc.get("sweep.sigma_sweep_delta", s.sigma_sweep_delta);
  s.seed = doc.get<std::uint64_t>("sweep.seed", s.seed);
  s.trials = doc.get("sweep.trials", s.trials);
  s.methods = doc.get_list<std::string>("sweep.methods", s.methods);
  s.held_out_rows = doc.get("sweep.held_out_rows", s.held_out_rows);
  s.validate();
  return s;
}

// ---------------------------------------------------------------------------
// Scenario execution

namespace detail {

constexpr std::uint64_t kTagScenario = 0x7363656eULL;
constexpr std::uint64_t kTagPerturb = 0x70657274ULL;

inline std::uint64_t bits(double v) { return std::bit_cast<std::uint64_t>(v); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Line-parameter perturbation seed. It ignores delta, so every delta scales the same relative
/// deviation pattern and the delta and sigma sweeps share H* at equal delta.
inline std::uint64_t perturbation_seed(std::uint64_t seed) { return derive_seed(seed, detail::kTagPerturb); }

inline std::uint64_t scenario_seed(std::uint64_t seed, double delta, double sigma_source, double sigma_target) {
  return derive_seed(seed, detail::kTagScenario, detail::bits(delta), detail::bits(sigma_source), detail::bits(sigma_target));
}

/// Datasets of one trial, normalized with the source training statistics.
struct ScenarioData {
  Dataset source, target, test;
};

inline ScenarioData scenario_data(const GridCase& nominal, const GridCase& real, const SweepConfig& cfg, double sigma_source,
                                  double sigma_target, std::uint64_t trial_seed, int workers) {
  GenerationConfig g;
  g.n_base = cfg.n_base;
  g.workers = workers;
  ScenarioData d;
  g.sigma = sigma_source;
  g.n_per_base = cfg.n_per_base_source;
  g.seed = derive_seed(trial_seed, 1);
  d.source = normalize_and_split(generate_source_dataset(nominal, g), derive_seed(trial_seed, 11));
  g.sigma = sigma_target;
  g.n_per_base = cfg.n_per_base_target;
  g.seed = derive_seed(trial_seed, 2);
  d.target = apply_normalization(generate_target_dataset(real, g), d.source.norm_stats, derive_seed(trial_seed, 12));
  g.n_per_base = cfg.n_per_base_test;
  g.seed = derive_seed(trial_seed, 3);
  d.test = apply_normalization(generate_target_test_dataset(real, g), d.source.norm_stats, derive_seed(trial_seed, 13));
  return d;
}

struct ProposedOutcome {
  Model model;
  TrainTrace stage1, stage2;
  double mmd_init = 0.0, mmd_stage1 = 0.0;
};

/// Both transfer stages; also records the held-out layer-J MMD before and after stage 1.
inline ProposedOutcome run_proposed(const ScenarioData& d, const TrainConfig& cfg, int held_out_rows) {
  ProposedOutcome out;
  const auto hs = capped(d.source.split.validation, held_out_rows);
  const auto ht = capped(d.target.split.validation, held_out_rows);
  const Model init = initial_model(cfg);
  out.mmd_init = layer_j_mmd(init, d.source, hs, d.target, ht);
  auto pre = pretrain(init, d.source, d.target, cfg);
  out.mmd_stage1 = layer_j_mmd(pre.model, d.source, hs, d.target, ht);
  out.stage1 = std::move(pre.trace);
  auto fin = finetune(pre.model, build_stage2_set(d.target, d.source, cfg), cfg);
  out.model = std::move(fin.model);
  out.stage2 = std::move(fin.trace);
  return out;
}

struct ScenarioTraces {
  TrainTrace stage1, stage2;  // first trial of the proposed method
};

/// One (delta, sigma_source, sigma_target) scenario: `trials` independent data draws and trainings.
inline ScenarioResult run_scenario(const GridCase& nominal, double delta, double sigma_source, double sigma_target,
                                   const SweepConfig& cfg, int workers = 1, ScenarioTraces* traces = nullptr) {
  ScenarioResult r;
  r.delta = delta;
  r.sigma_source = sigma_source;
  r.sigma_target = sigma_target;
  r.case_id = nominal.id();
  r.seed = scenario_seed(cfg.seed, delta, sigma_source, sigma_target);
  try {
    const auto real = perturb_case(nominal, {delta, perturbation_seed(cfg.seed)});
    std::map<std::string, std::vector<ConfusionCounts>> counts;
    std::map<std::string, double> seconds;
    std::map<std::string, std::string> errors;
    nlohmann::json mmd_init = nlohmann::json::array(), mmd_end = nlohmann::json::array(),
                   iters1 = nlohmann::json::array(), best2 = nlohmann::json::array();
    for (int t = 0; t < cfg.trials; ++t) {
      const auto trial_seed = derive_seed(r.seed, static_cast<std::uint64_t>(t));
      const auto data = scenario_data(nominal, real, cfg, sigma_source, sigma_target, trial_seed, workers);
      r.n_source = data.source.size();
      r.n_target = data.target.size();
      r.n_test = data.test.size();
      auto train = cfg.train;
      train.seed = derive_seed(trial_seed, 4);
      train.model.input_dim = data.source.feature_dim();
      auto grid = cfg.baselines;
      grid.seed = derive_seed(trial_seed, 5);
      grid.workers = workers;
      for (const auto& method : cfg.methods) {
        if (!method_info(method).implemented || errors.count(method)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        try {
          std::vector<Label> verdicts;
          if (method == "proposed") {
            auto p = run_proposed(data, train, cfg.held_out_rows);
            verdicts = classify(p.model, data.test).verdicts;
            mmd_init.push_back(p.mmd_init);
            mmd_end.push_back(p.mmd_stage1);
            iters1.push_back(p.stage1.iterations_run);
            best2.push_back(p.stage2.best_iteration);
            if (traces && t == 0) *traces = {p.stage1, p.stage2};
          } else {
            const auto m = train_baseline(baseline_kind_from_string(method), data.source, grid, train, &nominal);
            verdicts = predict_baseline(m, data.test, {}, workers);
          }
          counts[method].push_back(confusion(verdicts, data.test.labels));
        } catch (const NumericalError& e) {
          errors[method] = std::string("numerical failure: ") + e.what();
        }
        seconds[method] += detail::seconds_since(t0);
      }
    }
    for (const auto& method : cfg.methods) {
      MethodResult m;
      if (!method_info(method).implemented) {
        m.method = method;
        m.implemented = false;
      } else if (errors.count(method)) {
        m.method = method;
        m.error = errors[method];
      } else {
        m = summarize(method, counts[method]);
      }
      m.seconds = seconds[method];
      r.methods.push_back(std::move(m));
    }
    if (!mmd_init.empty()) {
      r.diagnostics["layer_j_mmd_init"] = mmd_init;
      r.diagnostics["layer_j_mmd_stage1"] = mmd_end;
      r.diagnostics["stage1_iterations"] = iters1;
      r.diagnostics["stage2_best_iteration"] = best2;
    }
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

struct ScenarioSpec {
  double delta, sigma_source, sigma_target;
};

/// Runs scenarios concurrently (up to cfg.workers); results keep the input order.
inline std::vector<ScenarioResult> run_scenarios(const GridCase& nominal, const std::vector<ScenarioSpec>& specs,
                                                 const SweepConfig& cfg, std::vector<ScenarioTraces>* traces = nullptr) {
  cfg.validate();
  std::vector<ScenarioResult> out(specs.size());
  std::vector<ScenarioTraces> tr(specs.size());
  const int outer = std::max(1, std::min<int>(cfg.workers, static_cast<int>(specs.size())));
  const int inner = outer > 1 ? 1 : cfg.workers;
  detail::parallel_for(specs.size(), outer, [&](std::size_t i) {
    out[i] = run_scenario(nominal, specs[i].delta, specs[i].sigma_source, specs[i].sigma_target, cfg, inner, &tr[i]);
  });
  if (traces) *traces = std::move(tr);
  return out;
}

inline std::vector<ScenarioResult> run_delta_sweep(const GridCase& nominal, const std::vector<double>& deltas,
                                                   const SweepConfig& cfg, std::vector<ScenarioTraces>* traces = nullptr) {
  std::vector<ScenarioSpec> specs;
  for (double d : deltas) specs.push_back({d, cfg.sigma, cfg.sigma});
  return run_scenarios(nominal, specs, cfg, traces);
}

inline std::vector<ScenarioResult> run_sigma_sweep(const GridCase& nominal, const std::vector<double>& sigmas_source,
                                                   const SweepConfig& cfg, std::vector<ScenarioTraces>* traces = nullptr) {
  std::vector<ScenarioSpec> specs;
  for (double s : sigmas_source) specs.push_back({cfg.sigma_sweep_delta, s, cfg.sigma_target});
  return run_scenarios(nominal, specs, cfg, traces);
}

// ---------------------------------------------------------------------------
// Reports (no wall-clock values, so reruns with equal seeds give identical files)

enum class ReportFormat { markdown, csv, json };

inline ReportFormat report_format_for_path(const std::string& path) {
  const auto ends = [&](const char* ext) {
    const std::string e(ext);
    return path.size() >= e.size() && path.compare(path.size() - e.size(), e.size(), e) == 0;
  };
  if (ends(".json")) return ReportFormat::json;
  if (ends(".csv")) return ReportFormat::csv;
  return ReportFormat::markdown;
}

inline std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

inline std::string scenario_label(const ScenarioResult& s, bool show_delta, bool show_sigma) {
  if (!s.label.empty()) return s.label;
  std::string out;
  if (show_delta) out += "δ=" + pct(s.delta) + "%";
  if (show_sigma) out += std::string(out.empty() ? "" : " ") + "σ=" + pct(s.sigma_source) + "%";
  return out.empty() ? "δ=" + pct(s.delta) + "%" : out;
}

namespace detail {

inline std::string cell(const ScenarioResult& s, const std::string& method, bool mar) {
  if (!s.error.empty()) return "error";
  const auto* m = s.find(method);
  if (!m) return "";
  if (!m->implemented) return "not implemented";
  if (!m->error.empty()) return "error";
  if (mar && !m->mar_mean) return "n/a";
  const double mean = mar ? *m->mar_mean : m->acc_mean;
  const double sd = mar ? *m->mar_std : m->acc_std;
  return m->trials > 1 ? pct(mean) + " ± " + pct(sd) : pct(mean);
}

inline std::vector<std::string> report_methods(const std::vector<ScenarioResult>& results) {
  std::vector<std::string> out;
  for (const auto& info : method_table())
    for (const auto& s : results)
      if (s.find(info.key)) {
        out.push_back(info.key);
        break;
      }
  return out;
}

inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

inline std::optional<double> opt_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace detail

inline nlohmann::json to_json(const ScenarioResult& s) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& m : s.methods)
    methods.push_back({{"method", m.method},
                       {"implemented", m.implemented},
                       {"error", m.error},
                       {"trials", m.trials},
                       {"acc_mean", m.acc_mean},
                       {"acc_std", m.acc_std},
                       {"mar_mean", detail::opt_json(m.mar_mean)},
                       {"mar_std", detail::opt_json(m.mar_std)},
                       {"tp", m.counts.tp},
                       {"tn", m.counts.tn},
                       {"fp", m.counts.fp},
                       {"fn", m.counts.fn}});
  return {{"delta", s.delta},       {"sigma_source", s.sigma_source}, {"sigma_target", s.sigma_target},
          {"case_id", s.case_id},   {"label", s.label},               {"seed", s.seed},                 {"n_source", s.n_source},
          {"n_target", s.n_target}, {"n_test", s.n_test},             {"error", s.error},
          {"methods", methods},     {"diagnostics", s.diagnostics}};
}

inline ScenarioResult scenario_from_json(const nlohmann::json& j) {
  ScenarioResult s;
  s.delta = j.at("delta").get<double>();
  s.sigma_source = j.at("sigma_source").get<double>();
  s.sigma_target = j.at("sigma_target").get<double>();
  s.case_id = j.at("case_id").get<std::string>();
  s.label = j.value("label", "");
  s.seed = j.at("seed").get<std::uint64_t>();
  s.n_source = j.at("n_source").get<std::size_t>();
  s.n_target = j.at("n_target").get<std::size_t>();
  s.n_test = j.at("n_test").get<std::size_t>();
  s.error = j.at("error").get<std::string>();
  s.diagnostics = j.at("diagnostics");
  for (const auto& mj : j.at("methods")) {
    MethodResult m;
    m.method = mj.at("method").get<std::string>();
    m.implemented = mj.at("implemented").get<bool>();
    m.error = mj.at("error").get<std::string>();
    m.trials = mj.at("trials").get<int>();
    m.acc_mean = mj.at("acc_mean").get<double>();
    m.acc_std = mj.at("acc_std").get<double>();
    m.mar_mean = detail::opt_from(mj.at("mar_mean"));
    m.mar_std = detail::opt_from(mj.at("mar_std"));
    m.counts = {mj.at("tp").get<std::int64_t>(), mj.at("tn").get<std::int64_t>(), mj.at("fp").get<std::int64_t>(),
                mj.at("fn").get<std::int64_t>()};
    s.methods.push_back(std::move(m));
  }
  return s;
}

inline std::vector<ScenarioResult> results_from_json(const nlohmann::json& j) {
  try {
    std::vector<ScenarioResult> out;
    for (const auto& s : j.at("scenarios")) out.push_back(scenario_from_json(s));
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt report: ") + e.what());
  }
}

inline std::string emit_report(const std::vector<ScenarioResult>& results, ReportFormat format) {
  if (results.empty()) throw std::invalid_argument("emit_report: no results");
  std::ostringstream os;
  if (format == ReportFormat::json) {
    nlohmann::json j;
    j["format"] = "fdia-report-1";
    j["scenarios"] = nlohmann::json::array();
    for (const auto& s : results) j["scenarios"].push_back(to_json(s));
    os << j.dump(2) << "\n";
    return os.str();
  }
  const auto methods = detail::report_methods(results);
  if (format == ReportFormat::csv) {
    os << "type,algorithm,case,delta_pct,sigma_source_pct,sigma_target_pct,trials,acc_pct,acc_std_pct,mar_pct,mar_std_pct,status\n";
    for (const auto& key : methods) {
      const auto& info = method_info(key);
      for (const auto& s : results) {
        const auto* m = s.find(key);
        if (!m) continue;
        os << info.type << "," << info.name << "," << s.case_id << "," << pct(s.delta) << "," << pct(s.sigma_source) << ","
           << pct(s.sigma_target) << ",";
        const bool ok = s.error.empty() && m->implemented && m->error.empty();
        if (ok) {
          os << m->trials << "," << pct(m->acc_mean) << "," << pct(m->acc_std) << ","
             << (m->mar_mean ? pct(*m->mar_mean) : "") << "," << (m->mar_std ? pct(*m->mar_std) : "") << ",ok\n";
        } else {
          os << ",,,,," << (!m->implemented ? "not implemented" : "error") << "\n";
        }
      }
    }
    return os.str();
  }

  bool same_delta = true, same_sigma = true;
  for (const auto& s : results) {
    same_delta = same_delta && s.delta == results.front().delta;
    same_sigma = same_sigma && s.sigma_source == results.front().sigma_source;
  }
  const bool show_delta = !same_delta || same_sigma;
  const bool show_sigma = !same_sigma;
  for (const bool mar : {false, true}) {
    os << "### " << (mar ? "MAR (%)" : "ACC (%)") << "\n\n| Type | Algorithm |";
    for (const auto& s : results) os << " " << scenario_label(s, show_delta, show_sigma) << " |";
    os << "\n|---|---|";
    for (std::size_t i = 0; i < results.size(); ++i) os << "---|";
    os << "\n";
    for (const auto& key : methods) {
      const auto& info = method_info(key);
      os << "| " << info.type << " | " << info.name << " |";
      for (const auto& s : results) os << " " << detail::cell(s, key, mar) << " |";
      os << "\n";
    }
    os << "\n";
  }
  for (const auto& s : results)
    if (!s.error.empty()) os << "- " << scenario_label(s, true, true) << ": " << s.error << "\n";
  for (const auto& s : results)
    for (const auto& m : s.methods)
      if (!m.error.empty()) os << "- " << scenario_label(s, true, true) << " " << method_info(m.method).name << ": " << m.error << "\n";
  return os.str();
}

/// Wall-clock seconds per (scenario, method); written next to reports, never inside them.
inline std::string emit_runtime_csv(const std::vector<ScenarioResult>& results) {
  std::ostringstream os;
  os << "delta_pct,sigma_source_pct,sigma_target_pct,method,seconds\n";
  for (const auto& s : results)
    for (const auto& m : s.methods)
      if (m.implemented)
        os << pct(s.delta) << "," << pct(s.sigma_source) << "," << pct(s.sigma_target) << "," << m.method << ","
           << std::fixed << std::setprecision(3) << m.seconds << std::defaultfloat << "\n";
  return os.str();
}

}  // namespace fdia

#endif  // FDIA_EVAL_HPP
