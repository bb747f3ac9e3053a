#ifndef FDIA_BASELINES_HPP
#define FDIA_BASELINES_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "fdia/estimation.hpp"
#include "fdia/transfer.hpp"

namespace fdia {

enum class BaselineKind { bdd, dnn_b, lr, knn, gnb };

inline const char* to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::bdd: return "bdd";
    case BaselineKind::dnn_b: return "dnn_b";
    case BaselineKind::lr: return "lr";
    case BaselineKind::knn: return "knn";
    case BaselineKind::gnb: return "gnb";
  }
  return "?";
}

inline BaselineKind baseline_kind_from_string(std::string s) {
  std::replace(s.begin(), s.end(), '-', '_');
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  if (s == "bdd") return BaselineKind::bdd;
  if (s == "dnn_b" || s == "dnnb") return BaselineKind::dnn_b;
  if (s == "lr") return BaselineKind::lr;
  if (s == "knn") return BaselineKind::knn;
  if (s == "gnb") return BaselineKind::gnb;
  throw std::invalid_argument("unknown baseline kind '" + s + "' (expected bdd, dnn_b, lr, knn or gnb)");
}

/// Hyperparameter grids and fixed settings for the comparison detectors.
struct BaselineGrid {
  // LR objective: mean cross-entropy + ||w||^2 / (2 C n), C taken from this grid
  std::vector<double> lr_penalties{1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2};
  int lr_iters = 300;
  double lr_step = 5e-2;
  std::vector<int> knn_k{1, 2, 5, 10, 50};
  int knn_max_refs = 10000;
  double gnb_var_floor = 1e-9;
  double bdd_quantile = 0.999;
  int bdd_calibration_rows = 2000;
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const {
    if (lr_penalties.empty() || knn_k.empty()) throw std::invalid_argument("baseline grids must not be empty");
    for (double c : lr_penalties)
      if (!(c > 0.0)) throw std::invalid_argument("LR penalties must be positive");
    for (int k : knn_k)
      if (k < 1) throw std::invalid_argument("KNN k must be >= 1");
    if (lr_iters < 0 || knn_max_refs < 1 || bdd_calibration_rows < 1) throw std::invalid_argument("invalid baseline sizes");
    if (!(bdd_quantile > 0.0 && bdd_quantile < 1.0)) throw std::invalid_argument("bdd_quantile must lie in (0, 1)");
  }
};

inline BaselineGrid baseline_grid_from(const ConfigDocument& doc, BaselineGrid g = {}) {
  g.lr_penalties = doc.get_list<double>("baselines.lr_penalties", g.lr_penalties);
  g.lr_iters = doc.get("baselines.lr_iters", g.lr_iters);
  g.lr_step = doc.get("baselines.lr_step", g.lr_step);
  g.knn_k = doc.get_list<int>("baselines.knn_k", g.knn_k);
  g.knn_max_refs = doc.get("baselines.knn_max_refs", g.knn_max_refs);
  g.gnb_var_floor = doc.get("baselines.gnb_var_floor", g.gnb_var_floor);
  g.bdd_quantile = doc.get("baselines.bdd_quantile", g.bdd_quantile);
  g.bdd_calibration_rows = doc.get("baselines.bdd_calibration_rows", g.bdd_calibration_rows);
  g.seed = doc.get<std::uint64_t>("baselines.seed", g.seed);
  g.validate();
  return g;
}

struct LogisticParams {
  Vector w;
  double b = 0.0;
  double penalty = 1.0;
};

struct KnnParams {
  int k = 1;
  Matrix refs;
  std::vector<Label> labels;
};

struct GnbParams {
  Matrix mean;  // row 0 normal, row 1 attack
  Matrix var;
  double log_prior[2] = {0.0, 0.0};
};

struct BddParams {
  GridCase nominal;
  double tau = 0.0;
};

struct BaselineModel {
  BaselineKind kind = BaselineKind::lr;
  std::variant<LogisticParams, KnnParams, GnbParams, BddParams, Model> params;
  int feature_dim = 0;
  std::uint64_t layout_hash = 0;
  NormStats norm_stats;
  nlohmann::json selection;  // candidates and their source-validation accuracy
};

// ---------------------------------------------------------------------------
// Shared helpers

namespace detail {

inline std::vector<std::int32_t> rows_or_all(const std::vector<std::int32_t>& rows, const Dataset& d) {
  return rows.empty() ? all_rows(d) : rows;
}

inline Vector binary_targets(const Dataset& d, const std::vector<std::int32_t>& rows) {
  Vector y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) y(static_cast<Eigen::Index>(i)) = d.labels[rows[i]] == Label::attack ? 1.0 : 0.0;
  return y;
}

inline double verdict_accuracy(const std::vector<Label>& v, const Dataset& d, const std::vector<std::int32_t>& rows) {
  if (rows.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) ok += v[i] == d.labels[rows[i]];
  return static_cast<double>(ok) / static_cast<double>(rows.size());
}

inline void check_features(const BaselineModel& m, const Dataset& d) {
  if (d.feature_dim() != m.feature_dim)
    throw DataError("layout mismatch: samples have " + std::to_string(d.feature_dim()) + " features, baseline expects " +
                    std::to_string(m.feature_dim));
  if (m.layout_hash != 0 && d.layout.fingerprint() != m.layout_hash)
    throw DataError("layout mismatch: measurement layout differs from the training data");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Logistic regression

inline std::vector<Label> predict_lr(const LogisticParams& p, const Matrix& X) {
  const Vector s = X * p.w;
  std::vector<Label> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) out[static_cast<std::size_t>(i)] = s(i) + p.b > 0.0 ? Label::attack : Label::normal;
  return out;
}

/// Full-batch Adam on mean cross-entropy + ||w||^2 / (2 C n).
inline LogisticParams fit_lr(const Matrix& X, const Vector& y, double penalty, int iters, double step) {
  const auto n = static_cast<double>(X.rows());
  const Eigen::Index d = X.cols();
  Vector theta = Vector::Zero(d + 1), m = Vector::Zero(d + 1), v = Vector::Zero(d + 1), g(d + 1);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double reg = 1.0 / (penalty * n);
  for (int t = 1; t <= iters; ++t) {
    const Vector z = (X * theta.head(d)).array() + theta(d);
    const Vector r = (1.0 / (1.0 + (-z.array()).exp())).matrix() - y;
    g.head(d) = X.transpose() * r / n + reg * theta.head(d);
    g(d) = r.mean();
    if (!g.allFinite()) throw NumericalError("logistic regression: non-finite gradient");
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g.cwiseProduct(g);
    const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
    theta.array() -= step * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
  return {theta.head(d), theta(d), penalty};
}

// ---------------------------------------------------------------------------
// K nearest neighbours (Euclidean); majority vote, ties go to normal

/// Indices of the kmax nearest references for each query, nearest first (ties by lower index).
inline std::vector<std::vector<std::int32_t>> nearest_neighbors(const Matrix& refs, const Matrix& queries, int kmax,
                                                                int workers) {
  const int k = std::min<int>(kmax, static_cast<int>(refs.rows()));
  const Vector ref_sq = refs.rowwise().squaredNorm();
  std::vector<std::vector<std::int32_t>> out(static_cast<std::size_t>(queries.rows()));
  const Eigen::Index block = 256;
  const auto n_blocks = static_cast<std::size_t>((queries.rows() + block - 1) / block);
  detail::parallel_for(n_blocks, workers, [&](std::size_t bi) {
    const Eigen::Index start = static_cast<Eigen::Index>(bi) * block;
    const Eigen::Index len = std::min(block, queries.rows() - start);
    Matrix dist = -2.0 * queries.middleRows(start, len) * refs.transpose();
    dist.colwise() += queries.middleRows(start, len).rowwise().squaredNorm();
    dist.rowwise() += ref_sq.transpose();
    std::vector<std::int32_t> idx(static_cast<std::size_t>(refs.rows()));
    for (Eigen::Index q = 0; q < len; ++q) {
      std::iota(idx.begin(), idx.end(), 0);
      const auto cmp = [&](std::int32_t a, std::int32_t b) {
        const double da = dist(q, a), db = dist(q, b);
        return da < db || (da == db && a < b);
      };
      std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), cmp);
      out[static_cast<std::size_t>(start + q)].assign(idx.begin(), idx.begin() + k);
    }
  });
  return out;
}

inline Label knn_vote(const std::vector<std::int32_t>& nn, const std::vector<Label>& labels, int k) {
  int attacks = 0;
  const int used = std::min<int>(k, static_cast<int>(nn.size()));
  for (int i = 0; i < used; ++i) attacks += labels[nn[i]] == Label::attack;
  return 2 * attacks > used ? Label::attack : Label::normal;
}

inline std::vector<Label> predict_knn(const KnnParams& p, const Matrix& X, int workers = 1) {
  const auto nn = nearest_neighbors(p.refs, X, p.k, workers);
  std::vector<Label> out;
  out.reserve(nn.size());
  for (const auto& row : nn) out.push_back(knn_vote(row, p.labels, p.k));
  return out;
}

// ---------------------------------------------------------------------------
// Gaussian naive Bayes

inline GnbParams fit_gnb(const Matrix& X, const Vector& y, double var_floor) {
  GnbParams p;
  p.mean = Matrix::Zero(2, X.cols());
  p.var = Matrix::Zero(2, X.cols());
  double count[2] = {0.0, 0.0};
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int c = y(i) > 0.5 ? 1 : 0;
    p.mean.row(c) += X.row(i);
    count[c] += 1.0;
  }
  if (count[0] == 0.0 || count[1] == 0.0) throw DataError("GNB needs samples of both classes");
  for (int c = 0; c < 2; ++c) p.mean.row(c) /= count[c];
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const int c = y(i) > 0.5 ? 1 : 0;
    p.var.row(c) += (X.row(i) - p.mean.row(c)).cwiseAbs2();
  }
  for (int c = 0; c < 2; ++c) {
    p.var.row(c) /= count[c];
    p.var.row(c) = p.var.row(c).cwiseMax(var_floor);
    p.log_prior[c] = std::log(count[c] / (count[0] + count[1]));
  }
  return p;
}

inline std::vector<Label> predict_gnb(const GnbParams& p, const Matrix& X) {
  std::vector<Label> out(static_cast<std::size_t>(X.rows()));
  double ll[2];
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (int c = 0; c < 2; ++c)
      ll[c] = p.log_prior[c] - 0.5 * ((X.row(i) - p.mean.row(c)).cwiseAbs2().cwiseQuotient(p.var.row(c)).sum() +
                                      p.var.row(c).array().log().sum());
    out[static_cast<std::size_t>(i)] = ll[1] > ll[0] ? Label::attack : Label::normal;
  }
  return out;
}

// ---------------------------------------------------------------------------
// BDD: AC WLS residual on the nominal model against tau

/// Raw feature value of a normalized entry (inverse of the min-max map).
inline Vector denormalize_row(const Dataset& d, std::size_t row) {
  const auto& s = d.norm_stats;
  Vector out(d.features.cols());
  for (Eigen::Index j = 0; j < d.features.cols(); ++j) {
    const double x = d.features(static_cast<Eigen::Index>(row), j);
    if (s.empty()) {
      out(j) = x;
      continue;
    }
    const double lo = s.min[j], hi = s.max[j];
    out(j) = hi == lo ? lo : (x + 1.0) * 0.5 * (hi - lo) + lo;
  }
  return out;
}

inline double bdd_residual(const GridCase& nominal, const Dataset& d, std::size_t row) {
  const Vector raw = denormalize_row(d, row);
  MeasurementVector z;
  z.layout = d.layout;
  z.values = raw.segment(2 * d.layout.n_bus, d.layout.size());
  return wls_estimate_ac(nominal, z).residual_norm;
}

inline std::vector<double> bdd_residuals(const GridCase& nominal, const Dataset& d, const std::vector<std::int32_t>& rows,
                                         int workers) {
  if (!(d.layout == measurement_layout(nominal))) throw DataError("layout mismatch: dataset does not match the BDD case");
  std::vector<double> r(rows.size());
  detail::parallel_for(rows.size(), workers, [&](std::size_t i) { r[i] = bdd_residual(nominal, d, static_cast<std::size_t>(rows[i])); });
  return r;
}

// ---------------------------------------------------------------------------
// Training and prediction

inline std::vector<Label> predict_baseline(const BaselineModel& m, const Dataset& d,
                                           const std::vector<std::int32_t>& rows_in = {}, int workers = 1) {
  detail::check_features(m, d);
  const auto rows = detail::rows_or_all(rows_in, d);
  switch (m.kind) {
    case BaselineKind::lr: return predict_lr(std::get<LogisticParams>(m.params), gather_rows(d, rows));
    case BaselineKind::knn: return predict_knn(std::get<KnnParams>(m.params), gather_rows(d, rows), workers);
    case BaselineKind::gnb: return predict_gnb(std::get<GnbParams>(m.params), gather_rows(d, rows));
    case BaselineKind::bdd: {
      const auto& p = std::get<BddParams>(m.params);
      const auto r = bdd_residuals(p.nominal, d, rows, workers);
      std::vector<Label> out;
      for (double v : r) out.push_back(v > p.tau ? Label::attack : Label::normal);
      return out;
    }
    case BaselineKind::dnn_b: {
      const auto c = classify(std::get<Model>(m.params), subset(d, rows));
      return c.verdicts;
    }
  }
  return {};
}

/// Fit one baseline on the source training rows and pick the candidate with the best
/// source-validation accuracy (first one wins ties).
inline BaselineModel train_baseline(BaselineKind kind, const Dataset& source, const BaselineGrid& grid,
                                    const TrainConfig& nn_cfg = {}, const GridCase* nominal = nullptr) {
  grid.validate();
  if (source.norm_stats.empty()) throw DataError("baseline training needs a normalized source dataset");
  if (source.split.empty()) throw DataError("baseline training needs a train/validation split");
  BaselineModel best;
  best.kind = kind;
  best.feature_dim = source.feature_dim();
  best.layout_hash = source.layout.fingerprint();
  best.norm_stats = source.norm_stats;
  best.selection = nlohmann::json::array();
  const auto& tr = source.split.train;
  const auto& va = source.split.validation;
  double best_acc = -1.0;
  const auto consider = [&](auto params, nlohmann::json hyper) {
    BaselineModel cand = best;
    cand.params = std::move(params);
    const double acc = detail::verdict_accuracy(predict_baseline(cand, source, va, grid.workers), source, va);
    hyper["val_acc"] = acc;
    best.selection.push_back(hyper);
    if (acc > best_acc) {
      best_acc = acc;
      best.params = std::move(cand.params);
    }
  };

  switch (kind) {
    case BaselineKind::lr: {
      const Matrix X = gather_rows(source, tr);
      const Vector y = detail::binary_targets(source, tr);
      for (double c : grid.lr_penalties) consider(fit_lr(X, y, c, grid.lr_iters, grid.lr_step), {{"penalty", c}});
      break;
    }
    case BaselineKind::knn: {
      std::vector<std::int32_t> refs = tr;
      if (refs.size() > static_cast<std::size_t>(grid.knn_max_refs)) {
        Rng rng(derive_seed(grid.seed, 0x6b6e6eULL));
        for (std::size_t i = refs.size(); i > 1; --i) std::swap(refs[i - 1], refs[rng.index(i)]);
        refs.resize(static_cast<std::size_t>(grid.knn_max_refs));
        std::sort(refs.begin(), refs.end());
      }
      KnnParams base;
      base.refs = gather_rows(source, refs);
      for (auto r : refs) base.labels.push_back(source.labels[r]);
      // one neighbour search serves every k
      const int kmax = *std::max_element(grid.knn_k.begin(), grid.knn_k.end());
      const auto nn = nearest_neighbors(base.refs, gather_rows(source, va), kmax, grid.workers);
      for (int k : grid.knn_k) {
        std::vector<Label> v;
        for (const auto& row : nn) v.push_back(knn_vote(row, base.labels, k));
        const double acc = detail::verdict_accuracy(v, source, va);
        best.selection.push_back({{"k", k}, {"val_acc", acc}, {"n_refs", refs.size()}});
        if (acc > best_acc) {
          best_acc = acc;
          KnnParams p = base;
          p.k = k;
          best.params = std::move(p);
        }
      }
      break;
    }
    case BaselineKind::gnb:
      consider(fit_gnb(gather_rows(source, tr), detail::binary_targets(source, tr), grid.gnb_var_floor),
               {{"var_floor", grid.gnb_var_floor}});
      break;
    case BaselineKind::bdd: {
      if (!nominal) throw DataError("BDD baseline needs the nominal grid case");
      std::vector<std::int32_t> normals;
      for (auto r : tr)
        if (source.labels[r] == Label::normal && normals.size() < static_cast<std::size_t>(grid.bdd_calibration_rows))
          normals.push_back(r);
      if (normals.empty()) throw DataError("BDD calibration needs normal source samples");
      BddParams p{*nominal, calibrate_tau(bdd_residuals(*nominal, source, normals, grid.workers), grid.bdd_quantile)};
      consider(std::move(p), {{"quantile", grid.bdd_quantile}, {"calibration_rows", normals.size()}});
      break;
    }
    case BaselineKind::dnn_b: {
      auto cfg = nn_cfg;
      cfg.model.input_dim = source.feature_dim();
      const auto r = train_supervised(initial_model(cfg), source, cfg);
      consider(r.model, {{"iterations", r.trace.iterations_run}, {"best_iteration", r.trace.best_iteration}});
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Persistence: JSON for the classical models, the NN checkpoint format for DNN-B

namespace detail {

inline nlohmann::json dense(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

inline Matrix dense(const nlohmann::json& j) {
  const auto data = j.at("data").get<std::vector<double>>();
  const auto r = j.at("rows").get<Eigen::Index>(), c = j.at("cols").get<Eigen::Index>();
  if (static_cast<Eigen::Index>(data.size()) != r * c) throw DataError("corrupt baseline: matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), r, c);
}

inline nlohmann::json common_header(const BaselineModel& m) {
  return {{"format", "fdia-baseline-1"},
          {"kind", to_string(m.kind)},
          {"feature_dim", m.feature_dim},
          {"layout_hash", m.layout_hash},
          {"norm_min", m.norm_stats.min},
          {"norm_max", m.norm_stats.max},
          {"norm_constant", m.norm_stats.constant_features},
          {"selection", m.selection}};
}

}  // namespace detail

inline bool is_nn_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  char magic[8] = {};
  is.read(magic, 8);
  return is && std::string(magic, 8) == "FDIACK1\n";
}

inline void save_baseline(const BaselineModel& m, const std::string& path) {
  auto h = detail::common_header(m);
  if (m.kind == BaselineKind::dnn_b) {
    nn::save_checkpoint(std::get<Model>(m.params), h, path);
    return;
  }
  switch (m.kind) {
    case BaselineKind::lr: {
      const auto& p = std::get<LogisticParams>(m.params);
      h["w"] = std::vector<double>(p.w.data(), p.w.data() + p.w.size());
      h["b"] = p.b;
      h["penalty"] = p.penalty;
      break;
    }
    case BaselineKind::knn: {
      const auto& p = std::get<KnnParams>(m.params);
      h["k"] = p.k;
      h["refs"] = detail::dense(p.refs);
      std::vector<int> labels;
      for (auto l : p.labels) labels.push_back(static_cast<int>(l));
      h["labels"] = labels;
      break;
    }
    case BaselineKind::gnb: {
      const auto& p = std::get<GnbParams>(m.params);
      h["mean"] = detail::dense(p.mean);
      h["var"] = detail::dense(p.var);
      h["log_prior"] = {p.log_prior[0], p.log_prior[1]};
      break;
    }
    case BaselineKind::bdd: {
      const auto& p = std::get<BddParams>(m.params);
      h["tau"] = p.tau;
      h["case"] = case_to_json(p.nominal);
      break;
    }
    default: break;
  }
  std::ofstream os(path);
  if (!os) throw DataError("cannot write baseline '" + path + "'");
  os << h.dump();
  if (!os) throw DataError("failed writing baseline '" + path + "'");
}

inline BaselineModel baseline_from_header(const nlohmann::json& h) {
  BaselineModel m;
  m.kind = baseline_kind_from_string(h.at("kind").get<std::string>());
  m.feature_dim = h.at("feature_dim").get<int>();
  m.layout_hash = h.at("layout_hash").get<std::uint64_t>();
  m.norm_stats.min = h.at("norm_min").get<std::vector<float>>();
  m.norm_stats.max = h.at("norm_max").get<std::vector<float>>();
  m.norm_stats.constant_features = h.at("norm_constant").get<std::vector<int>>();
  m.selection = h.at("selection");
  return m;
}

inline BaselineModel load_baseline(const std::string& path) {
  try {
    if (is_nn_checkpoint(path)) {
      nlohmann::json extra;
      Model net = nn::load_checkpoint<double>(path, &extra);
      if (extra.value("format", "") != "fdia-baseline-1") throw DataError("'" + path + "' is not a baseline checkpoint");
      auto m = baseline_from_header(extra);
      m.params = std::move(net);
      return m;
    }
    std::ifstream is(path);
    if (!is) throw DataError("cannot open baseline '" + path + "'");
    const auto h = nlohmann::json::parse(is);
    if (h.value("format", "") != "fdia-baseline-1") throw DataError("'" + path + "' is not a baseline file");
    auto m = baseline_from_header(h);
    switch (m.kind) {
      case BaselineKind::lr: {
        const auto w = h.at("w").get<std::vector<double>>();
        m.params = LogisticParams{Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size())), h.at("b").get<double>(),
                                  h.at("penalty").get<double>()};
        break;
      }
      case BaselineKind::knn: {
        KnnParams p;
        p.k = h.at("k").get<int>();
        p.refs = detail::dense(h.at("refs"));
        for (int l : h.at("labels").get<std::vector<int>>()) p.labels.push_back(static_cast<Label>(l));
        if (p.labels.size() != static_cast<std::size_t>(p.refs.rows())) throw DataError("corrupt baseline: KNN labels");
        m.params = std::move(p);
        break;
      }
      case BaselineKind::gnb: {
        GnbParams p;
        p.mean = detail::dense(h.at("mean"));
        p.var = detail::dense(h.at("var"));
        const auto lp = h.at("log_prior").get<std::vector<double>>();
        p.log_prior[0] = lp.at(0);
        p.log_prior[1] = lp.at(1);
        m.params = std::move(p);
        break;
      }
      case BaselineKind::bdd:
        m.params = BddParams{case_from_json(h.at("case")), h.at("tau").get<double>()};
        break;
      default: throw DataError("corrupt baseline: DNN-B must be stored as a checkpoint");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt baseline '" + path + "': " + e.what());
  }
}

}  // namespace fdia

#endif  // FDIA_BASELINES_HPP
