#ifndef FDIA_NN_HPP
#define FDIA_NN_HPP

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fdia/common.hpp"

namespace fdia::nn {

// Output column 0 is the attack probability, column 1 the normal probability.
inline constexpr int kAttackClass = 0;
inline constexpr int kNormalClass = 1;

struct MlpConfig {
  int input_dim = 96;
  int hidden_layers = 3;
  int hidden_width = 200;
  /// Layer whose activation feeds the MMD term; also the number of weight
  /// matrices in the regularizer.
  int mmd_depth = 3;
  double leaky_slope = 0.01;
  double bn_momentum = 0.9;
  double bn_epsilon = 1e-5;

  void validate() const {
    if (input_dim < 1 || hidden_width < 1 || hidden_layers < 1)
      throw std::invalid_argument("network widths and depth must be at least 1");
    if (mmd_depth < 1 || mmd_depth > hidden_layers)
      throw std::invalid_argument("mmd_depth must lie in [1, hidden_layers]");
    if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) throw std::invalid_argument("bn_momentum must lie in [0, 1)");
    if (!(bn_epsilon > 0.0)) throw std::invalid_argument("bn_epsilon must be positive");
  }

  bool operator==(const MlpConfig&) const = default;
};

enum class Mode { train, eval };

template <typename S = double>
struct Layer {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  Mat W;  // in x out
  Mat b;  // 1 x out
  // batch normalization on the layer input; empty for the head
  bool bn = false;
  Mat gamma, beta;                  // 1 x in
  Mat running_mean, running_var;  // 1 x in
};

/// Dense network: hidden layers are BN -> affine -> Leaky ReLU, the head is affine -> softmax.
template <typename S = double>
class Mlp {
 public:
  using Scalar = S;
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

  MlpConfig config;
  std::vector<Layer<S>> layers;
  Mode mode = Mode::train;

  /// Trainable parameters in declared order: per hidden layer gamma, beta, W, b; then head W, b.
  std::vector<Mat*> parameters() {
    std::vector<Mat*> out;
    for (auto& l : layers) {
      if (l.bn) {
        out.push_back(&l.gamma);
        out.push_back(&l.beta);
      }
      out.push_back(&l.W);
      out.push_back(&l.b);
    }
    return out;
  }

  std::vector<const Mat*> parameters() const {
    std::vector<const Mat*> out;
    for (auto* p : const_cast<Mlp*>(this)->parameters()) out.push_back(p);
    return out;
  }

  std::vector<std::string> parameter_names() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto tag = std::to_string(i);
      if (layers[i].bn) {
        out.push_back("bn" + tag + ".gamma");
        out.push_back("bn" + tag + ".beta");
      }
      out.push_back("fc" + tag + ".W");
      out.push_back("fc" + tag + ".b");
    }
    return out;
  }

  /// Running statistics, saved alongside the parameters.
  std::vector<Mat*> buffers() {
    std::vector<Mat*> out;
    for (auto& l : layers)
      if (l.bn) {
        out.push_back(&l.running_mean);
        out.push_back(&l.running_var);
      }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto* p : parameters()) n += static_cast<std::size_t>(p->size());
    return n;
  }

  bool operator==(const Mlp& o) const {
    if (!(config == o.config) || layers.size() != o.layers.size() || mode != o.mode) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto &a = layers[i], &b = o.layers[i];
      if (a.bn != b.bn || a.W != b.W || a.b != b.b) return false;
      if (a.bn && (a.gamma != b.gamma || a.beta != b.beta || a.running_mean != b.running_mean ||
                   a.running_var != b.running_var))
        return false;
    }
    return true;
  }
};

template <typename S = double>
Mlp<S> init_model(const MlpConfig& cfg, std::uint64_t seed) {
  using Mat = typename Mlp<S>::Mat;
  cfg.validate();
  Mlp<S> m;
  m.config = cfg;
  Rng rng(seed);
  int in = cfg.input_dim;
  for (int l = 0; l <= cfg.hidden_layers; ++l) {
    const bool head = l == cfg.hidden_layers;
    const int out = head ? 2 : cfg.hidden_width;
    Layer<S> layer;
    const double sd = std::sqrt(2.0 / static_cast<double>(in + out));
    layer.W.resize(in, out);
    for (int j = 0; j < out; ++j)
      for (int i = 0; i < in; ++i) layer.W(i, j) = static_cast<S>(rng.normal(0.0, sd));
    layer.b = Mat::Zero(1, out);
    if (!head) {
      layer.bn = true;
      layer.gamma = Mat::Ones(1, in);
      layer.beta = Mat::Zero(1, in);
      layer.running_mean = Mat::Zero(1, in);
      layer.running_var = Mat::Ones(1, in);
    }
    m.layers.push_back(std::move(layer));
    in = out;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Forward pass

template <typename S>
struct LayerCache {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  Mat x;        // layer input
  Mat centered;  // x - mu
  Mat inv_std;  // 1 x in
  Mat u;        // affine input (BN output)
  Mat z;        // pre-activation
  Mat a;        // activation (hidden layers only)
};

template <typename S>
struct ForwardResult {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  Mat logits;
  Mat probabilities;
  /// Activation of hidden layer J.
  Mat features;
  std::vector<LayerCache<S>> cache;
  /// Rows that defined the batch statistics in train mode.
  Eigen::Index stat_rows = 0;
};

template <typename Mat>
Mat softmax_rows(const Mat& logits) {
  Mat p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto mx = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - mx).exp().matrix();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// Forward a batch. In train mode the batch statistics come from the first `stat_rows`
/// rows (all rows when negative) and are applied to every row; running statistics are
/// updated from the same rows when `update_running` is set.
template <typename S>
ForwardResult<S> forward(Mlp<S>& model, const typename Mlp<S>::Mat& X, Eigen::Index stat_rows = -1,
                         bool update_running = true) {
  using Mat = typename Mlp<S>::Mat;
  const auto& cfg = model.config;
  if (X.cols() != cfg.input_dim)
    throw DataError("batch width " + std::to_string(X.cols()) + " does not match input_dim " +
                    std::to_string(cfg.input_dim));
  if (stat_rows < 0) stat_rows = X.rows();
  const bool train = model.mode == Mode::train;
  if (train && stat_rows < 2) throw DataError("train-mode forward needs at least 2 samples for batch statistics");

  ForwardResult<S> res;
  res.stat_rows = stat_rows;
  res.cache.resize(model.layers.size());
  const S slope = static_cast<S>(cfg.leaky_slope);
  Mat h = X;
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    auto& c = res.cache[l];
    c.x = std::move(h);
    if (layer.bn) {
      Mat mu, var;
      if (train) {
        const auto top = c.x.topRows(stat_rows);
        mu = top.colwise().mean();
        var = (top.rowwise() - mu.row(0)).array().square().colwise().mean().matrix();
        if (update_running) {
          const S mom = static_cast<S>(cfg.bn_momentum);
          const S unbias = static_cast<S>(stat_rows) / static_cast<S>(stat_rows - 1);
          layer.running_mean = mom * layer.running_mean + (S(1) - mom) * mu;
          layer.running_var = mom * layer.running_var + (S(1) - mom) * unbias * var;
        }
      } else {
        mu = layer.running_mean;
        var = layer.running_var;
      }
      c.inv_std = (var.array() + static_cast<S>(cfg.bn_epsilon)).rsqrt().matrix();
      c.centered = c.x.rowwise() - mu.row(0);
      c.u = (c.centered.array().rowwise() * (c.inv_std.array() * layer.gamma.array()).row(0)).matrix();
      c.u.rowwise() += layer.beta.row(0);
    } else {
      c.u = c.x;
    }
    c.z = c.u * layer.W;
    c.z.rowwise() += layer.b.row(0);
    if (l + 1 < model.layers.size()) {
      c.a = c.z.unaryExpr([slope](S v) { return v > S(0) ? v : slope * v; });
      h = c.a;
      if (static_cast<int>(l) + 1 == cfg.mmd_depth) res.features = c.a;
    } else {
      res.logits = c.z;
    }
  }
  res.probabilities = softmax_rows(res.logits);
  return res;
}

// ---------------------------------------------------------------------------
// Losses

enum class MmdKernel { mean_difference, gaussian };

inline const char* to_string(MmdKernel k) { return k == MmdKernel::gaussian ? "gaussian" : "mean_difference"; }

inline MmdKernel mmd_kernel_from_string(const std::string& s) {
  if (s == "mean_difference") return MmdKernel::mean_difference;
  if (s == "gaussian") return MmdKernel::gaussian;
  throw std::invalid_argument("unknown mmd kernel '" + s + "'");
}

/// Class indices (0 attack, 1 normal) for a label vector where true means attack.
inline std::vector<int> class_indices(const std::vector<bool>& is_attack) {
  std::vector<int> out;
  out.reserve(is_attack.size());
  for (bool a : is_attack) out.push_back(a ? kAttackClass : kNormalClass);
  return out;
}

template <typename Mat>
double loss_cross_entropy(const Mat& probabilities, const std::vector<int>& classes) {
  if (static_cast<std::size_t>(probabilities.rows()) != classes.size())
    throw DataError("cross entropy: probability rows and labels differ in length");
  double sum = 0.0;
  for (std::size_t i = 0; i < classes.size(); ++i)
    sum -= std::log(std::max(static_cast<double>(probabilities(static_cast<Eigen::Index>(i), classes[i])), 1e-12));
  return sum / static_cast<double>(classes.size());
}

/// Squared distances between the rows of A and B.
template <typename Mat>
Mat pairwise_sq_dist(const Mat& A, const Mat& B) {
  Mat d = (-2 * A * B.transpose()).eval();
  d.colwise() += A.rowwise().squaredNorm();
  d.rowwise() += B.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0);
}

/// Median of pairwise squared distances over the pooled batches (off-diagonal).
template <typename Mat>
double median_bandwidth(const Mat& fs, const Mat& ft) {
  Mat pooled(fs.rows() + ft.rows(), fs.cols());
  pooled << fs, ft;
  const Mat d = pairwise_sq_dist(pooled, pooled);
  std::vector<double> v;
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    for (Eigen::Index j = i + 1; j < d.cols(); ++j) v.push_back(static_cast<double>(d(i, j)));
  if (v.empty()) return 1.0;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
  const double med = v[v.size() / 2];
  return med > 0.0 ? med : 1.0;
}

struct MmdOptions {
  MmdKernel kernel = MmdKernel::mean_difference;
  /// Gaussian bandwidth h in k = exp(-d^2 / h); 0 selects the median heuristic per batch.
  double bandwidth = 0.0;
};

/// Value and, when requested, gradients with respect to both feature batches.
template <typename Mat>
double mmd_with_grad(const Mat& fs, const Mat& ft, const MmdOptions& opt, Mat* gs = nullptr, Mat* gt = nullptr) {
  using S = typename Mat::Scalar;
  if (fs.rows() == 0 || ft.rows() == 0) throw DataError("mmd: empty batch");
  if (fs.cols() != ft.cols()) throw DataError("mmd: feature widths differ");
  const auto ns = static_cast<S>(fs.rows()), nt = static_cast<S>(ft.rows());
  if (opt.kernel == MmdKernel::mean_difference) {
    const Mat diff = fs.colwise().mean() - ft.colwise().mean();
    const S norm = diff.norm();
    if (gs) {
      *gs = Mat::Zero(fs.rows(), fs.cols());
      *gt = Mat::Zero(ft.rows(), ft.cols());
      if (norm > S(0)) {
        const Mat unit = diff / norm;
        gs->rowwise() = (unit / ns).row(0);
        gt->rowwise() = (-unit / nt).row(0);
      }
    }
    return static_cast<double>(norm);
  }

  // unbiased estimate of the squared kernel MMD
  if (fs.rows() < 2 || ft.rows() < 2) throw DataError("mmd: gaussian mode needs at least 2 samples per batch");
  const S h = static_cast<S>(opt.bandwidth > 0.0 ? opt.bandwidth : median_bandwidth(fs, ft));
  Mat kss = (-pairwise_sq_dist(fs, fs) / h).array().exp().matrix();
  Mat ktt = (-pairwise_sq_dist(ft, ft) / h).array().exp().matrix();
  const Mat kst = (-pairwise_sq_dist(fs, ft) / h).array().exp().matrix();
  kss.diagonal().setZero();
  ktt.diagonal().setZero();
  const S css = S(1) / (ns * (ns - 1)), ctt = S(1) / (nt * (nt - 1)), cst = S(2) / (ns * nt);
  const S value = css * kss.sum() + ctt * ktt.sum() - cst * kst.sum();
  if (gs) {
    // d/du_i exp(-|u_i - v|^2 / h) = -2/h (u_i - v) k
    const S f = S(-2) / h;
    auto grad_block = [f](const Mat& U, const Mat& V, const Mat& K, S coef) {
      // sum_j coef * K_ij * f * (u_i - v_j)
      Mat g = (U.array().colwise() * K.rowwise().sum().array()).matrix() - K * V;
      return (g * (coef * f)).eval();
    };
    // self terms count each pair twice (i,j) and (j,i)
    *gs = grad_block(fs, fs, kss, S(2) * css) - grad_block(fs, ft, kst, cst);
    *gt = grad_block(ft, ft, ktt, S(2) * ctt) - grad_block(ft, fs, Mat(kst.transpose()), cst);
  }
  return static_cast<double>(value);
}

template <typename Mat>
double loss_mmd(const Mat& fs, const Mat& ft, const MmdOptions& opt = {}) {
  return mmd_with_grad<Mat>(fs, ft, opt);
}

template <typename S>
double theta_j_norm(const Mlp<S>& model) {
  double sq = 0.0;
  for (int l = 0; l < model.config.mmd_depth; ++l) sq += static_cast<double>(model.layers[l].W.squaredNorm());
  return std::sqrt(sq);
}

/// exp(-||Theta_J||_F) over the first J weight matrices.
template <typename S>
double loss_weight_reg(const Mlp<S>& model) {
  return std::exp(-theta_j_norm(model));
}

inline double loss_combined(double ce, double mmd, double reg, double lambda, double mu) {
  if (lambda < 0.0 || mu < 0.0) throw std::invalid_argument("loss weights must be non-negative");
  return ce + lambda * mmd + mu * reg;
}

// ---------------------------------------------------------------------------
// Backward pass

struct LossWeights {
  double lambda = 1e-2;
  double mu = 5e2;
  MmdOptions mmd;
};

struct LossBreakdown {
  double ce = 0.0, mmd = 0.0, reg = 0.0, total = 0.0;
  /// Share of the source batch classified correctly.
  double batch_accuracy = 0.0;
};

template <typename S>
struct Gradients {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  /// Same order as Mlp::parameters().
  std::vector<Mat> g;
};

/// Argmax with ties going to normal.
template <typename Mat>
int predicted_class(const Mat& probabilities, Eigen::Index row) {
  return probabilities(row, kAttackClass) > probabilities(row, kNormalClass) ? kAttackClass : kNormalClass;
}

/// Gradients of the combined loss for a labeled source batch and an unlabeled target
/// batch. Both batches are normalized with the source batch statistics; with
/// lambda = 0 the target batch is not forwarded at all.
template <typename S>
LossBreakdown loss_and_gradients(Mlp<S>& model, const typename Mlp<S>::Mat& Xs, const std::vector<int>& classes,
                                 const typename Mlp<S>::Mat& Xt, const LossWeights& w, std::type_identity_t<Gradients<S>>* grads,
                                 bool update_running = true) {
  using Mat = typename Mlp<S>::Mat;
  if (model.mode != Mode::train) throw std::logic_error("backward requires train mode");
  if (static_cast<std::size_t>(Xs.rows()) != classes.size()) throw DataError("labels do not match source batch");
  const bool use_target = w.lambda > 0.0 && Xt.rows() > 0;
  const Eigen::Index ns = Xs.rows();
  Mat X;
  if (use_target) {
    X.resize(ns + Xt.rows(), Xs.cols());
    X << Xs, Xt;
  } else {
    X = Xs;
  }
  auto fw = forward(model, X, ns, update_running);

  LossBreakdown out;
  const Mat ps = fw.probabilities.topRows(ns);
  out.ce = loss_cross_entropy(ps, classes);
  int correct = 0;
  for (Eigen::Index i = 0; i < ns; ++i) correct += predicted_class(ps, i) == classes[i];
  out.batch_accuracy = static_cast<double>(correct) / static_cast<double>(ns);

  Mat g_feat_s, g_feat_t;
  if (use_target) {
    const Mat fs = fw.features.topRows(ns), ft = fw.features.bottomRows(Xt.rows());
    out.mmd = mmd_with_grad<Mat>(fs, ft, w.mmd, grads ? &g_feat_s : nullptr, grads ? &g_feat_t : nullptr);
  }
  const double theta_norm = theta_j_norm(model);
  out.reg = std::exp(-theta_norm);
  out.total = loss_combined(out.ce, out.mmd, out.reg, w.lambda, w.mu);
  if (!grads) return out;

  const auto n_layers = model.layers.size();
  std::vector<Mat> dW(n_layers), db(n_layers), dgamma(n_layers), dbeta(n_layers);

  // softmax + cross entropy on the source rows
  Mat G = Mat::Zero(X.rows(), 2);
  G.topRows(ns) = ps;
  for (Eigen::Index i = 0; i < ns; ++i) G(i, classes[i]) -= S(1);
  G /= static_cast<S>(ns);

  const S slope = static_cast<S>(model.config.leaky_slope);
  Mat dA;
  for (std::size_t li = n_layers; li-- > 0;) {
    auto& layer = model.layers[li];
    auto& c = fw.cache[li];
    Mat dZ;
    if (li + 1 == n_layers) {
      dZ = std::move(G);
    } else {
      if (static_cast<int>(li) + 1 == model.config.mmd_depth && use_target) {
        dA.topRows(ns) += static_cast<S>(w.lambda) * g_feat_s;
        dA.bottomRows(Xt.rows()) += static_cast<S>(w.lambda) * g_feat_t;
      }
      dZ = dA.cwiseProduct(c.z.unaryExpr([slope](S v) { return v > S(0) ? S(1) : slope; }));
    }
    dW[li] = c.u.transpose() * dZ;
    db[li] = dZ.colwise().sum();
    if (static_cast<int>(li) < model.config.mmd_depth && theta_norm > 0.0)
      dW[li] -= static_cast<S>(w.mu * out.reg / theta_norm) * layer.W;
    if (li == 0 && !layer.bn) break;
    Mat dU = dZ * layer.W.transpose();
    if (!layer.bn) {
      dA = std::move(dU);
      continue;
    }
    const Mat xhat = (c.centered.array().rowwise() * c.inv_std.array().row(0)).matrix();
    dgamma[li] = dU.cwiseProduct(xhat).colwise().sum();
    dbeta[li] = dU.colwise().sum();
    if (li == 0) break;
    const Mat dxhat = (dU.array().rowwise() * layer.gamma.array().row(0)).matrix();
    Mat dX = (dxhat.array().rowwise() * c.inv_std.array().row(0)).matrix();
    // batch statistics come from the first ns rows only
    const Mat dmu = -(dX.colwise().sum());
    const Mat inv3 = c.inv_std.array().cube().matrix();
    const Mat dvar = (dxhat.cwiseProduct(c.centered).colwise().sum().array() * inv3.array() * S(-0.5)).matrix();
    const S inv_n = S(1) / static_cast<S>(ns);
    dX.topRows(ns).rowwise() += (dmu * inv_n).row(0);
    dX.topRows(ns) += ((c.centered.topRows(ns).array().rowwise() * dvar.array().row(0)) * (S(2) * inv_n)).matrix();
    dA = std::move(dX);
  }

  grads->g.clear();
  for (std::size_t li = 0; li < n_layers; ++li) {
    if (model.layers[li].bn) {
      grads->g.push_back(std::move(dgamma[li]));
      grads->g.push_back(std::move(dbeta[li]));
    }
    grads->g.push_back(std::move(dW[li]));
    grads->g.push_back(std::move(db[li]));
  }
  return out;
}

/// Cross-entropy-only gradients (no target batch).
template <typename S>
LossBreakdown ce_and_gradients(Mlp<S>& model, const typename Mlp<S>::Mat& Xs, const std::vector<int>& classes,
                               std::type_identity_t<Gradients<S>>* grads, bool update_running = true) {
  return loss_and_gradients(model, Xs, classes, typename Mlp<S>::Mat(), LossWeights{0.0, 0.0, {}}, grads,
                            update_running);
}

// ---------------------------------------------------------------------------
// Optimizer

template <typename S = double>
struct Adam {
  using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Mat> m, v;
};

template <typename S>
void optimizer_step(Adam<S>& opt, std::vector<typename Adam<S>::Mat*> params, const Gradients<S>& grads) {
  using Mat = typename Adam<S>::Mat;
  if (params.size() != grads.g.size()) throw std::invalid_argument("optimizer: gradient count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->rows() != grads.g[i].rows() || params[i]->cols() != grads.g[i].cols())
      throw std::invalid_argument("optimizer: gradient shape mismatch at parameter " + std::to_string(i));
    if (!grads.g[i].allFinite()) throw NumericalError("non-finite gradient at parameter " + std::to_string(i));
  }
  if (opt.m.empty()) {
    for (auto* p : params) {
      opt.m.push_back(Mat::Zero(p->rows(), p->cols()));
      opt.v.push_back(Mat::Zero(p->rows(), p->cols()));
    }
  }
  ++opt.step;
  const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
  const S b1 = static_cast<S>(opt.beta1), b2 = static_cast<S>(opt.beta2);
  const S step_size = static_cast<S>(opt.learning_rate / bc1);
  const S sqrt_bc2 = static_cast<S>(std::sqrt(bc2));
  const S eps = static_cast<S>(opt.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& g = grads.g[i];
    opt.m[i] = b1 * opt.m[i] + (S(1) - b1) * g;
    opt.v[i] = b2 * opt.v[i] + (S(1) - b2) * g.cwiseProduct(g);
    // p -= lr * m_hat / (sqrt(v_hat) + eps)
    params[i]->array() -= step_size * opt.m[i].array() / (opt.v[i].array().sqrt() / sqrt_bc2 + eps);
  }
}

// ---------------------------------------------------------------------------
// Inference

/// Eval-mode probabilities, computed in chunks; does not touch running statistics.
template <typename S, typename Derived>
typename Mlp<S>::Mat predict_proba(const Mlp<S>& model, const Eigen::MatrixBase<Derived>& X,
                                   Eigen::Index chunk = 4096) {
  using Mat = typename Mlp<S>::Mat;
  Mlp<S> m = model;
  m.mode = Mode::eval;
  Mat out(X.rows(), 2);
  for (Eigen::Index start = 0; start < X.rows(); start += chunk) {
    const Eigen::Index n = std::min(chunk, X.rows() - start);
    const Mat block = X.middleRows(start, n).template cast<S>();
    out.middleRows(start, n) = forward(m, block, -1, false).probabilities;
  }
  return out;
}

/// Eval-mode layer-J features.
template <typename S, typename Derived>
typename Mlp<S>::Mat layer_j_features(const Mlp<S>& model, const Eigen::MatrixBase<Derived>& X) {
  using Mat = typename Mlp<S>::Mat;
  Mlp<S> m = model;
  m.mode = Mode::eval;
  const Mat block = X.template cast<S>();
  return forward(m, block, -1, false).features;
}

// ---------------------------------------------------------------------------
// Checkpoints
//
//   "FDIACK1\n", u64 header length, JSON header, then little-endian f64 blocks:
//   parameters in declared order followed by the running statistics.

namespace detail {

inline constexpr char kCheckpointMagic[] = "FDIACK1\n";

inline void put_u64(std::ostream& os, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::istream& is) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = is.get();
    if (c == EOF) throw DataError("corrupt file: truncated checkpoint");
    v |= static_cast<std::uint64_t>(c & 0xff) << (8 * i);
  }
  return v;
}

}  // namespace detail

inline nlohmann::json config_to_json(const MlpConfig& c) {
  return {{"input_dim", c.input_dim},     {"hidden_layers", c.hidden_layers}, {"hidden_width", c.hidden_width},
          {"mmd_depth", c.mmd_depth},     {"leaky_slope", c.leaky_slope},     {"bn_momentum", c.bn_momentum},
          {"bn_epsilon", c.bn_epsilon}};
}

inline MlpConfig config_from_json(const nlohmann::json& j) {
  MlpConfig c;
  c.input_dim = j.at("input_dim").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.hidden_width = j.at("hidden_width").get<int>();
  c.mmd_depth = j.at("mmd_depth").get<int>();
  c.leaky_slope = j.at("leaky_slope").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  return c;
}

/// `extra` carries caller metadata (step, metrics, normalization, layout).
template <typename S>
void save_checkpoint(const Mlp<S>& model, const nlohmann::json& extra, const std::string& path) {
  auto& m = const_cast<Mlp<S>&>(model);
  nlohmann::json h;
  h["format"] = "fdia-checkpoint";
  h["version"] = 1;
  h["config"] = config_to_json(model.config);
  h["parameters"] = nlohmann::json::array();
  const auto names = model.parameter_names();
  const auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    h["parameters"].push_back({{"name", names[i]}, {"rows", params[i]->rows()}, {"cols", params[i]->cols()}});
  h["extra"] = extra;
  const std::string header = h.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  os.write(detail::kCheckpointMagic, 8);
  detail::put_u64(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  auto write_block = [&](const typename Mlp<S>::Mat* p) {
    // column-major element order
    for (Eigen::Index k = 0; k < p->size(); ++k) detail::put_u64(os, std::bit_cast<std::uint64_t>(
                                                                          static_cast<double>(p->data()[k])));
  };
  for (auto* p : params) write_block(p);
  for (auto* p : m.buffers()) write_block(p);
  if (!os) throw DataError("write failed for '" + path + "'");
}

template <typename S = double>
Mlp<S> load_checkpoint(const std::string& path, nlohmann::json* extra = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open checkpoint '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw DataError("corrupt file: '" + path + "' is not a checkpoint");
  const auto len = detail::get_u64(is);
  if (len > (1ULL << 30)) throw DataError("corrupt file: implausible checkpoint header");
  std::string header(len, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(len))) throw DataError("corrupt file: truncated header");
  nlohmann::json h;
  MlpConfig cfg;
  try {
    h = nlohmann::json::parse(header);
    cfg = config_from_json(h.at("config"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: bad checkpoint header: ") + e.what());
  }
  auto model = init_model<S>(cfg, 0);
  auto params = model.parameters();
  const auto& declared = h.at("parameters");
  if (declared.size() != params.size()) throw DataError("corrupt file: parameter count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i)
    if (declared[i].at("rows").get<Eigen::Index>() != params[i]->rows() ||
        declared[i].at("cols").get<Eigen::Index>() != params[i]->cols())
      throw DataError("corrupt file: shape mismatch for " + declared[i].at("name").get<std::string>());
  auto read_block = [&](typename Mlp<S>::Mat* p) {
    for (Eigen::Index k = 0; k < p->size(); ++k)
      p->data()[k] = static_cast<S>(std::bit_cast<double>(detail::get_u64(is)));
  };
  for (auto* p : params) read_block(p);
  for (auto* p : model.buffers()) read_block(p);
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("corrupt file: trailing bytes in checkpoint");
  model.mode = Mode::eval;
  if (extra) *extra = h.value("extra", nlohmann::json::object());
  return model;
}

}  // namespace fdia::nn

#endif  // FDIA_NN_HPP
