#ifndef FDIA_TRANSFER_HPP
#define FDIA_TRANSFER_HPP

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdia/config.hpp"
#include "fdia/dataset.hpp"
#include "fdia/nn.hpp"

namespace fdia {

using Model = nn::Mlp<double>;

struct TrainConfig {
  /// 0 scales the 1000-sample batch with the source size (1000 per 1e6 samples, at least 100).
  int batch_source = 0;
  int batch_target = 0;
  double lr_stage1 = 1e-3;
  double lr_stage2 = 1e-5;
  double lambda = 1e-2;
  double mu = 5e2;
  nn::MmdOptions mmd;
  double stage1_acc_threshold = 0.995;
  int stage1_max_iters = 5000;
  int stage2_max_iters = 2000;
  /// Iterations between recorded trace points (accuracy evaluation and checkpoint selection).
  int eval_every = 25;
  /// Cap on rows used for train/validation accuracy at trace points; 0 uses every row.
  int eval_max_rows = 0;
  /// Stage 2 adds source attack samples to the normal-only target data.
  bool stage2_replay = true;
  double replay_ratio = 1.0;
  std::uint64_t seed = 1;
  nn::MlpConfig model;

  void validate() const {
    if (!(lr_stage1 > 0.0 && lr_stage2 > 0.0)) throw std::invalid_argument("learning rates must be positive");
    if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("loss weights must be non-negative");
    if (!(stage1_acc_threshold > 0.0 && stage1_acc_threshold <= 1.0))
      throw std::invalid_argument("stage1_acc_threshold must lie in (0, 1]");
    if (stage1_max_iters < 0 || stage2_max_iters < 0) throw std::invalid_argument("iteration caps must be >= 0");
    if (eval_every < 1) throw std::invalid_argument("eval_every must be >= 1");
    if (batch_source < 0 || batch_target < 0) throw std::invalid_argument("batch sizes must be >= 0");
    if (replay_ratio < 0.0) throw std::invalid_argument("replay_ratio must be >= 0");
    model.validate();
  }
};

/// Reads the [train] and [model] sections.
inline TrainConfig train_config_from(const ConfigDocument& doc, TrainConfig c = {}) {
  c.batch_source = doc.get("train.batch_source", c.batch_source);
  c.batch_target = doc.get("train.batch_target", c.batch_target);
  c.lr_stage1 = doc.get("train.lr_stage1", c.lr_stage1);
  c.lr_stage2 = doc.get("train.lr_stage2", c.lr_stage2);
  c.lambda = doc.get("train.lambda", c.lambda);
  c.mu = doc.get("train.mu", c.mu);
  c.mmd.kernel = nn::mmd_kernel_from_string(doc.get<std::string>("train.mmd_kernel", nn::to_string(c.mmd.kernel)));
  c.mmd.bandwidth = doc.get("train.mmd_bandwidth", c.mmd.bandwidth);
  c.stage1_acc_threshold = doc.get("train.stage1_acc_threshold", c.stage1_acc_threshold);
  c.stage1_max_iters = doc.get("train.stage1_max_iters", c.stage1_max_iters);
  c.stage2_max_iters = doc.get("train.stage2_max_iters", c.stage2_max_iters);
  c.eval_every = doc.get("train.eval_every", c.eval_every);
  c.eval_max_rows = doc.get("train.eval_max_rows", c.eval_max_rows);
  c.stage2_replay = doc.get("train.stage2_replay", c.stage2_replay);
  c.replay_ratio = doc.get("train.replay_ratio", c.replay_ratio);
  c.seed = doc.get("train.seed", c.seed);
  c.model.hidden_layers = doc.get("model.hidden_layers", c.model.hidden_layers);
  c.model.hidden_width = doc.get("model.hidden_width", c.model.hidden_width);
  c.model.mmd_depth = doc.get("model.mmd_depth", c.model.mmd_depth);
  c.model.leaky_slope = doc.get("model.leaky_slope", c.model.leaky_slope);
  c.model.bn_momentum = doc.get("model.bn_momentum", c.model.bn_momentum);
  c.model.bn_epsilon = doc.get("model.bn_epsilon", c.model.bn_epsilon);
  return c;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  return {{"batch_source", c.batch_source},
          {"batch_target", c.batch_target},
          {"lr_stage1", c.lr_stage1},
          {"lr_stage2", c.lr_stage2},
          {"lambda", c.lambda},
          {"mu", c.mu},
          {"mmd_kernel", nn::to_string(c.mmd.kernel)},
          {"mmd_bandwidth", c.mmd.bandwidth},
          {"stage1_acc_threshold", c.stage1_acc_threshold},
          {"stage1_max_iters", c.stage1_max_iters},
          {"stage2_max_iters", c.stage2_max_iters},
          {"eval_every", c.eval_every},
          {"eval_max_rows", c.eval_max_rows},
          {"stage2_replay", c.stage2_replay},
          {"replay_ratio", c.replay_ratio},
          {"seed", c.seed},
          {"model", nn::config_to_json(c.model)}};
}

/// Initial network for a run; the proposed model and DNN-B share it so the ablation differs only in training.
inline Model initial_model(const TrainConfig& cfg) {
  return nn::init_model<double>(cfg.model, derive_seed(cfg.seed, 0x696e6974ULL));
}

inline int scaled_batch(int configured, std::size_t n_source) {
  if (configured > 0) return configured;
  const auto scaled = static_cast<int>(std::llround(1000.0 * static_cast<double>(n_source) / 1e6));
  return std::max(100, std::min(1000, scaled));
}

struct TraceRecord {
  int iteration = 0;
  double loss_ce = 0.0, loss_mmd = 0.0, loss_reg = 0.0, loss_total = 0.0;
  double acc_train = 0.0, acc_val = 0.0;
  /// NaN when no test set was supplied.
  double acc_test = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

struct TrainTrace {
  std::string stage;
  std::vector<TraceRecord> records;
  int iterations_run = 0;
  int best_iteration = 0;
  double best_val = -1.0;
  bool reached_threshold = false;
};

inline void write_trace_csv(const TrainTrace& t, std::ostream& os) {
  os << "iteration,loss_ce,loss_mmd,loss_reg,loss_total,acc_train,acc_val,acc_test,seconds\n";
  os.precision(10);
  for (const auto& r : t.records) {
    os << r.iteration << ',' << r.loss_ce << ',' << r.loss_mmd << ',' << r.loss_reg << ',' << r.loss_total << ','
       << r.acc_train << ',' << r.acc_val << ',';
    if (!std::isnan(r.acc_test)) os << r.acc_test;
    os << ',' << r.seconds << '\n';
  }
}

struct TrainResult {
  Model model;
  TrainTrace trace;
};

class TrainingDiverged : public NumericalError {
 public:
  TrainingDiverged(const std::string& what, TrainTrace t) : NumericalError(what), trace(std::move(t)) {}
  TrainTrace trace;
};

// ---------------------------------------------------------------------------
// Helpers

/// Sample rows of a dataset as a double matrix.
inline Matrix gather_rows(const Dataset& d, const std::vector<std::int32_t>& rows) {
  Matrix X(static_cast<Eigen::Index>(rows.size()), d.feature_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) X.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]).cast<double>();
  return X;
}

inline std::vector<std::int32_t> all_rows(const Dataset& d) {
  std::vector<std::int32_t> r(d.size());
  std::iota(r.begin(), r.end(), 0);
  return r;
}

inline int class_of(Label l) { return l == Label::attack ? nn::kAttackClass : nn::kNormalClass; }

/// Evenly strided subset of at most `cap` rows (all rows when cap is 0).
inline std::vector<std::int32_t> capped(const std::vector<std::int32_t>& rows, int cap) {
  if (cap <= 0 || rows.size() <= static_cast<std::size_t>(cap)) return rows;
  std::vector<std::int32_t> out;
  const double stride = static_cast<double>(rows.size()) / cap;
  for (int i = 0; i < cap; ++i) out.push_back(rows[static_cast<std::size_t>(i * stride)]);
  return out;
}

/// Share of rows whose argmax prediction matches the label.
inline double accuracy(const Model& model, const Dataset& d, const std::vector<std::int32_t>& rows) {
  if (rows.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0;
  const std::size_t chunk = 4096;
  for (std::size_t start = 0; start < rows.size(); start += chunk) {
    const std::vector<std::int32_t> part(rows.begin() + static_cast<std::ptrdiff_t>(start),
                                         rows.begin() + static_cast<std::ptrdiff_t>(std::min(rows.size(), start + chunk)));
    const Matrix p = nn::predict_proba(model, gather_rows(d, part));
    for (std::size_t i = 0; i < part.size(); ++i)
      correct += nn::predicted_class(p, static_cast<Eigen::Index>(i)) == class_of(d.labels[part[i]]);
  }
  return static_cast<double>(correct) / static_cast<double>(rows.size());
}

inline double accuracy(const Model& model, const Dataset& d) { return accuracy(model, d, all_rows(d)); }

/// Epoch-wise shuffled minibatch stream over a fixed row set.
class BatchStream {
 public:
  BatchStream(std::vector<std::int32_t> rows, std::uint64_t seed) : rows_(std::move(rows)), rng_(seed) {
    if (rows_.empty()) throw DataError("cannot draw batches from an empty set");
    shuffle();
  }

  std::vector<std::int32_t> next(std::size_t k) {
    std::vector<std::int32_t> out;
    out.reserve(k);
    while (out.size() < k) {
      if (pos_ == rows_.size()) shuffle();
      out.push_back(rows_[pos_++]);
    }
    return out;
  }

 private:
  void shuffle() {
    for (std::size_t i = rows_.size(); i > 1; --i) std::swap(rows_[i - 1], rows_[rng_.index(i)]);
    pos_ = 0;
  }

  std::vector<std::int32_t> rows_;
  Rng rng_;
  std::size_t pos_ = 0;
};

namespace detail {

inline void require_normalized(const Dataset& d, const char* what) {
  if (d.norm_stats.empty()) throw DataError(std::string(what) + " dataset is not normalized");
  if (d.size() == 0) throw DataError(std::string(what) + " dataset is empty");
}

inline std::vector<std::int32_t> train_rows(const Dataset& d) { return d.split.empty() ? all_rows(d) : d.split.train; }

struct LoopSpec {
  std::string stage;
  double lr = 1e-3;
  int max_iters = 0;
  double threshold = 2.0;  // > 1 disables the early stop
  nn::LossWeights weights;
  int batch_labeled = 100;
  int batch_unlabeled = 0;
  std::uint64_t seed = 0;
};

/// Shared optimization loop; the labeled set provides train/validation accuracy and
/// checkpoint selection, the unlabeled set (optional) feeds the MMD term.
inline TrainResult run_loop(Model model, const Dataset& labeled, const Dataset* unlabeled, const Dataset* test,
                            const TrainConfig& cfg, const LoopSpec& spec) {
  if (labeled.split.empty()) throw DataError("labeled dataset has no train/validation split");
  if (model.config.input_dim != labeled.feature_dim())
    throw DataError("model input_dim " + std::to_string(model.config.input_dim) + " does not match dataset width " +
                    std::to_string(labeled.feature_dim()));
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res{model, {}};
  res.trace.stage = spec.stage;
  Model best = model;
  best.mode = nn::Mode::eval;

  BatchStream src(labeled.split.train, derive_seed(spec.seed, 1));
  std::optional<BatchStream> tgt;
  const bool use_target = unlabeled && spec.weights.lambda > 0.0;
  if (use_target) tgt.emplace(train_rows(*unlabeled), derive_seed(spec.seed, 2));
  const auto eval_train = capped(labeled.split.train, cfg.eval_max_rows);
  const auto eval_val = capped(labeled.split.validation, cfg.eval_max_rows);

  nn::Adam<double> opt;
  opt.learning_rate = spec.lr;
  nn::Gradients<double> grads;
  model.mode = nn::Mode::train;
  for (int it = 1; it <= spec.max_iters; ++it) {
    const auto rows = src.next(static_cast<std::size_t>(spec.batch_labeled));
    const Matrix Xs = gather_rows(labeled, rows);
    std::vector<int> classes;
    classes.reserve(rows.size());
    for (auto r : rows) classes.push_back(class_of(labeled.labels[r]));
    Matrix Xt;
    if (use_target) Xt = gather_rows(*unlabeled, tgt->next(static_cast<std::size_t>(spec.batch_unlabeled)));

    const auto loss = nn::loss_and_gradients(model, Xs, classes, Xt, spec.weights, &grads);
    res.trace.iterations_run = it;
    if (!std::isfinite(loss.total))
      throw TrainingDiverged(spec.stage + ": non-finite loss at iteration " + std::to_string(it), res.trace);
    try {
      nn::optimizer_step(opt, model.parameters(), grads);
    } catch (const NumericalError& e) {
      throw TrainingDiverged(spec.stage + ": " + e.what() + " at iteration " + std::to_string(it), res.trace);
    }

    if (it % cfg.eval_every != 0 && it != spec.max_iters) continue;
    TraceRecord rec;
    rec.iteration = it;
    rec.loss_ce = loss.ce;
    rec.loss_mmd = loss.mmd;
    rec.loss_reg = loss.reg;
    rec.loss_total = loss.total;
    rec.acc_train = accuracy(model, labeled, eval_train);
    rec.acc_val = accuracy(model, labeled, eval_val);
    if (test) rec.acc_test = accuracy(model, *test);
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    res.trace.records.push_back(rec);
    if (rec.acc_val > res.trace.best_val) {
      res.trace.best_val = rec.acc_val;
      res.trace.best_iteration = it;
      best = model;
      best.mode = nn::Mode::eval;
    }
    if (rec.acc_train >= spec.threshold && rec.acc_val >= spec.threshold) {
      res.trace.reached_threshold = true;
      break;
    }
  }
  res.model = res.trace.records.empty() ? model : best;
  res.model.mode = nn::Mode::eval;
  return res;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Stages

/// Stage 1: cross entropy on labeled source batches plus lambda * MMD between source and
/// target layer-J features plus mu * exp(-||Theta_J||). Returns the best-validation model.
inline TrainResult pretrain(const Model& model, const Dataset& source, const Dataset& target, const TrainConfig& cfg,
                            const Dataset* test = nullptr) {
  cfg.validate();
  detail::require_normalized(source, "source");
  detail::require_normalized(target, "target");
  if (!(source.norm_stats == target.norm_stats))
    throw DataError("source and target must share normalization stats");
  if (source.count(Label::attack) == 0 || source.count(Label::normal) == 0)
    throw DataError("source dataset must contain both classes");
  if (target.count(Label::attack) != 0) throw DataError("target dataset must be normal-only");
  detail::LoopSpec spec;
  spec.stage = "pretrain";
  spec.lr = cfg.lr_stage1;
  spec.max_iters = cfg.stage1_max_iters;
  spec.threshold = cfg.stage1_acc_threshold;
  spec.weights = {cfg.lambda, cfg.mu, cfg.mmd};
  spec.batch_labeled = scaled_batch(cfg.batch_source, source.size());
  spec.batch_unlabeled = scaled_batch(cfg.batch_target, source.size());
  spec.seed = derive_seed(cfg.seed, 0x5747);
  return detail::run_loop(model, source, &target, test, cfg, spec);
}

/// Cross-entropy-only training on the source (the DNN-B ablation uses this).
inline TrainResult train_supervised(const Model& model, const Dataset& source, const TrainConfig& cfg,
                                    const Dataset* test = nullptr) {
  cfg.validate();
  detail::require_normalized(source, "source");
  detail::LoopSpec spec;
  spec.stage = "supervised";
  spec.lr = cfg.lr_stage1;
  spec.max_iters = cfg.stage1_max_iters;
  spec.threshold = cfg.stage1_acc_threshold;
  spec.weights = {0.0, 0.0, cfg.mmd};
  spec.batch_labeled = scaled_batch(cfg.batch_source, source.size());
  spec.seed = derive_seed(cfg.seed, 0x5747);
  return detail::run_loop(model, source, nullptr, test, cfg, spec);
}

/// Stage-2 labeled set: every target sample (normal) plus, unless strict, source attack
/// samples at replay_ratio times the target count. Carries its own 7:3 split.
inline Dataset build_stage2_set(const Dataset& target, const Dataset& source, const TrainConfig& cfg) {
  detail::require_normalized(target, "target");
  Dataset out = target;
  out.split = {};
  if (cfg.stage2_replay && cfg.replay_ratio > 0.0) {
    detail::require_normalized(source, "source");
    std::vector<std::int32_t> attacks;
    for (std::size_t i = 0; i < source.size(); ++i)
      if (source.labels[i] == Label::attack) attacks.push_back(static_cast<std::int32_t>(i));
    const auto want = static_cast<std::size_t>(std::llround(cfg.replay_ratio * static_cast<double>(target.size())));
    Rng rng(derive_seed(cfg.seed, 0x7e91a));
    for (std::size_t i = attacks.size(); i > 1; --i) std::swap(attacks[i - 1], attacks[rng.index(i)]);
    attacks.resize(std::min(want, attacks.size()));
    std::sort(attacks.begin(), attacks.end());
    out = concatenate(out, subset(source, attacks));
  }
  out.split = make_split(out.size(), derive_seed(cfg.seed, 0x5e72));
  return out;
}

/// Stage 2: cross-entropy fine-tuning at lr_stage2 on the stage-2 labeled set.
inline TrainResult finetune(const Model& model, const Dataset& stage2, const TrainConfig& cfg,
                            const Dataset* test = nullptr) {
  cfg.validate();
  detail::require_normalized(stage2, "stage-2");
  if (stage2.split.empty()) throw DataError("stage-2 dataset has no train/validation split");
  detail::LoopSpec spec;
  spec.stage = "finetune";
  spec.lr = cfg.lr_stage2;
  spec.max_iters = cfg.stage2_max_iters;
  spec.weights = {0.0, 0.0, cfg.mmd};
  spec.batch_labeled = scaled_batch(cfg.batch_source, stage2.size());
  spec.seed = derive_seed(cfg.seed, 0xf17e);
  if (cfg.stage2_max_iters == 0) {
    TrainResult r{model, {}};
    r.trace.stage = spec.stage;
    r.model.mode = nn::Mode::eval;
    return r;
  }
  return detail::run_loop(model, stage2, nullptr, test, cfg, spec);
}

// ---------------------------------------------------------------------------
// Inference

struct Classification {
  std::vector<Label> verdicts;
  Matrix probabilities;  // column 0 attack, column 1 normal
};

/// Argmax of the two softmax outputs; ties go to normal.
inline Label decide(double p_attack, double p_normal) { return p_attack > p_normal ? Label::attack : Label::normal; }

inline Classification classify(const Model& model, const Dataset& samples) {
  if (samples.feature_dim() != model.config.input_dim)
    throw DataError("layout mismatch: samples have " + std::to_string(samples.feature_dim()) +
                    " features, model expects " + std::to_string(model.config.input_dim));
  Classification c;
  c.probabilities = Matrix(static_cast<Eigen::Index>(samples.size()), 2);
  const std::size_t chunk = 4096;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    std::vector<std::int32_t> rows;
    for (std::size_t i = start; i < std::min(samples.size(), start + chunk); ++i) rows.push_back(static_cast<std::int32_t>(i));
    c.probabilities.middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(rows.size())) =
        nn::predict_proba(model, gather_rows(samples, rows));
  }
  for (Eigen::Index i = 0; i < c.probabilities.rows(); ++i)
    c.verdicts.push_back(decide(c.probabilities(i, nn::kAttackClass), c.probabilities(i, nn::kNormalClass)));
  return c;
}

/// Layer-J mean-difference MMD between eval-mode features of two row sets.
inline double layer_j_mmd(const Model& model, const Dataset& a, const std::vector<std::int32_t>& rows_a,
                          const Dataset& b, const std::vector<std::int32_t>& rows_b) {
  const Matrix fa = nn::layer_j_features(model, gather_rows(a, rows_a));
  const Matrix fb = nn::layer_j_features(model, gather_rows(b, rows_b));
  return nn::loss_mmd(fa, fb);
}

/// Checkpoint metadata tying a model to its input normalization and layout.
inline nlohmann::json checkpoint_metadata(const Dataset& reference, const TrainConfig& cfg, const TrainTrace& trace) {
  return {{"layout_hash", reference.layout.fingerprint()},
          {"n_bus", reference.layout.n_bus},
          {"n_branch", reference.layout.n_branch},
          {"norm_min", reference.norm_stats.min},
          {"norm_max", reference.norm_stats.max},
          {"norm_constant", reference.norm_stats.constant_features},
          {"train_config", to_json(cfg)},
          {"stage", trace.stage},
          {"step", trace.iterations_run},
          {"best_iteration", trace.best_iteration},
          {"best_val", trace.best_val}};
}

inline NormStats norm_stats_from_metadata(const nlohmann::json& meta) {
  NormStats s;
  try {
    s.min = meta.at("norm_min").get<std::vector<float>>();
    s.max = meta.at("norm_max").get<std::vector<float>>();
    s.constant_features = meta.at("norm_constant").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint lacks normalization metadata: ") + e.what());
  }
  return s;
}

}  // namespace fdia

#endif  // FDIA_TRANSFER_HPP
