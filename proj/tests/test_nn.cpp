#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>

#include "fdia/nn.hpp"
#include "gradcheck.hpp"

using Catch::Approx;
using namespace fdia;
using namespace fdia::nn;

namespace {

Matrix random_batch(int rows, int cols, std::uint64_t seed, double mean = 0.0, double sd = 1.0) {
  Rng rng(seed);
  Matrix X(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) X(i, j) = rng.normal(mean, sd);
  return X;
}

}  // namespace

TEST_CASE("initialization", "[nn]") {
  MlpConfig cfg;
  const auto a = init_model<double>(cfg, 5);
  CHECK(a == init_model<double>(cfg, 5));
  CHECK_FALSE(a == init_model<double>(cfg, 6));

  REQUIRE(a.layers.size() == 4);
  const int shapes[4][2] = {{96, 200}, {200, 200}, {200, 200}, {200, 2}};
  for (int l = 0; l < 4; ++l) {
    CHECK(a.layers[l].W.rows() == shapes[l][0]);
    CHECK(a.layers[l].W.cols() == shapes[l][1]);
    CHECK(a.layers[l].b.isZero());
    CHECK(a.layers[l].bn == (l < 3));
  }
  const auto& W = a.layers[1].W;
  const double mean = W.mean();
  const double sd = std::sqrt((W.array() - mean).square().mean());
  CHECK(std::abs(sd / std::sqrt(2.0 / 400.0) - 1.0) < 0.10);
  CHECK(a.layers[0].gamma.isOnes());
  CHECK(a.layers[0].beta.isZero());

  MlpConfig bad;
  bad.mmd_depth = 4;
  CHECK_THROWS(init_model<double>(bad, 1));
}

TEST_CASE("forward pass", "[nn]") {
  MlpConfig cfg;
  cfg.input_dim = 6;
  cfg.hidden_width = 12;
  auto m = init_model<double>(cfg, 2);
  const Matrix X = random_batch(32, 6, 9, 3.0, 2.0);

  SECTION("softmax rows") {
    const auto out = forward(m, X);
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      CHECK(out.probabilities.row(i).sum() == Approx(1.0).margin(1e-6));
      CHECK(out.probabilities.row(i).minCoeff() > 0.0);
      CHECK(out.probabilities.row(i).maxCoeff() < 1.0);
    }
    CHECK(out.features.cols() == 12);
  }
  SECTION("train-mode BN standardizes each feature") {
    const auto out = forward(m, X);
    for (const auto& c : out.cache) {
      if (c.centered.size() == 0) continue;
      const Matrix xhat = (c.centered.array().rowwise() * c.inv_std.array().row(0)).matrix();
      for (Eigen::Index j = 0; j < xhat.cols(); ++j) {
        const double mu = xhat.col(j).mean();
        const double var = (xhat.col(j).array() - mu).square().mean();
        CHECK(std::abs(mu) < 1e-3);
        // eps shrinks the variance of near-constant columns slightly
        CHECK(std::abs(var - 1.0) < 1e-3);
      }
      break;
    }
  }
  SECTION("eval mode is per-sample") {
    forward(m, X);
    const Matrix full = predict_proba(m, X);
    const Matrix part = predict_proba(m, Matrix(X.topRows(3)));
    CHECK((full.topRows(3) - part).cwiseAbs().maxCoeff() == 0.0);
    CHECK((predict_proba(m, X) - full).cwiseAbs().maxCoeff() == 0.0);
  }
  SECTION("batch of one in train mode") {
    CHECK_THROWS_AS(forward(m, Matrix(X.topRows(1))), DataError);
  }
  SECTION("wrong width") {
    CHECK_THROWS_AS(forward(m, random_batch(4, 5, 1)), DataError);
  }
}

TEST_CASE("running statistics track a stationary stream", "[nn]") {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_layers = 1;
  cfg.hidden_width = 4;
  cfg.mmd_depth = 1;
  auto m = init_model<double>(cfg, 1);
  for (int step = 0; step < 200; ++step) forward(m, random_batch(1024, 3, 100 + step, 2.0, 3.0));
  for (int j = 0; j < 3; ++j) {
    CHECK(m.layers[0].running_mean(0, j) == Approx(2.0).epsilon(0.05));
    CHECK(m.layers[0].running_var(0, j) == Approx(9.0).epsilon(0.05));
  }
}

TEST_CASE("cross entropy", "[nn]") {
  Matrix p(2, 2);
  p << 1.0, 0.0, 0.0, 1.0;
  CHECK(loss_cross_entropy(p, {0, 1}) <= 1e-10);
  p << 0.5, 0.5, 0.5, 0.5;
  CHECK(loss_cross_entropy(p, {0, 1}) == Approx(std::log(2.0)));
  p << 0.9, 0.1, 0.1, 0.9;
  CHECK(loss_cross_entropy(p, {0, 1}) == Approx(0.10536).margin(1e-5));
  p << 0.0, 1.0, 0.0, 1.0;
  CHECK(std::isfinite(loss_cross_entropy(p, {0, 0})));
}

TEST_CASE("MMD", "[nn]") {
  const Matrix A = random_batch(10, 3, 4);
  CHECK(loss_mmd(A, A) < 1e-10);

  Matrix s(4, 2), t(3, 2);
  s.col(0).setOnes();
  s.col(1).setZero();
  t.col(0).setZero();
  t.col(1).setOnes();
  CHECK(loss_mmd(s, t) == Approx(std::sqrt(2.0)));

  SECTION("gaussian mode against a brute-force double sum") {
    const Matrix fs = random_batch(6, 3, 11, 0.0, 0.5);
    const Matrix ft = random_batch(5, 3, 12, 3.0, 0.5);
    const double h = 2.5;
    auto k = [h](const Eigen::RowVectorXd& a, const Eigen::RowVectorXd& b) {
      return std::exp(-(a - b).squaredNorm() / h);
    };
    double ss = 0, tt = 0, st = 0;
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 6; ++j)
        if (i != j) ss += k(fs.row(i), fs.row(j));
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j)
        if (i != j) tt += k(ft.row(i), ft.row(j));
    for (int i = 0; i < 6; ++i)
      for (int j = 0; j < 5; ++j) st += k(fs.row(i), ft.row(j));
    const double brute = ss / 30.0 + tt / 20.0 - 2.0 * st / 30.0;
    CHECK(loss_mmd(fs, ft, {MmdKernel::gaussian, h}) == Approx(brute).margin(1e-8));
    CHECK(loss_mmd(fs, ft, {MmdKernel::gaussian, 0.0}) > 0.0);
  }
  SECTION("mean-difference is non-negative") {
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      CHECK(loss_mmd(random_batch(5, 4, seed), random_batch(7, 4, seed + 100)) >= 0.0);
  }
}

TEST_CASE("weight regularizer", "[nn]") {
  MlpConfig cfg;
  cfg.input_dim = 3;
  cfg.hidden_layers = 2;
  cfg.hidden_width = 4;
  cfg.mmd_depth = 2;
  auto m = init_model<double>(cfg, 1);
  for (auto& l : m.layers) l.W.setZero();
  m.layers[2].W.setConstant(7.0);  // head is outside Theta_J
  CHECK(loss_weight_reg(m) == 1.0);
  m.layers[1].W(0, 0) = std::log(4.0);
  CHECK(loss_weight_reg(m) == Approx(0.25));
  double last = loss_weight_reg(m);
  for (int i = 1; i <= 5; ++i) {
    m.layers[0].W(1, 1) = 0.3 * i;
    const double now = loss_weight_reg(m);
    CHECK(now < last);
    CHECK(now > 0.0);
    last = now;
  }
}

TEST_CASE("combined loss", "[nn]") {
  CHECK(loss_combined(0.3, 5.0, 0.7, 0.0, 0.0) == 0.3);
  CHECK(loss_combined(0.1, 2.0, 0.5, 1e-2, 5e2) == Approx(250.12));
  CHECK(loss_combined(0.2, 4.0, 1.0, 1e-2, 5e2) - loss_combined(0.1, 2.0, 0.5, 1e-2, 5e2) ==
        Approx(loss_combined(0.1, 2.0, 0.5, 1e-2, 5e2)));
}

TEST_CASE("gradients match central finite differences", "[nn][gradient]") {
  for (std::uint64_t seed : {1, 2, 3}) {
    auto t = testing::tiny_problem(seed);
    SECTION("paper weights, seed " + std::to_string(seed)) {
      const auto r = testing::gradient_check(t.model, t.Xs, t.classes, t.Xt, {1e-2, 5e2, {}});
      INFO("worst " << r.worst << " rel " << r.max_rel_error);
      CHECK(r.checked > 80);
      CHECK(r.max_rel_error < 1e-4);
    }
    SECTION("strong MMD weight, seed " + std::to_string(seed)) {
      const auto r = testing::gradient_check(t.model, t.Xs, t.classes, t.Xt, {1.0, 1.0, {}});
      INFO("worst " << r.worst << " rel " << r.max_rel_error);
      CHECK(r.max_rel_error < 1e-4);
    }
    SECTION("gaussian kernel with fixed bandwidth, seed " + std::to_string(seed)) {
      const auto r =
          testing::gradient_check(t.model, t.Xs, t.classes, t.Xt, {1.0, 1.0, {MmdKernel::gaussian, 3.0}});
      INFO("worst " << r.worst << " rel " << r.max_rel_error);
      CHECK(r.max_rel_error < 1e-4);
    }
  }
}

TEST_CASE("lambda zero decouples the target batch", "[nn]") {
  auto t = testing::tiny_problem(4);
  Gradients<double> with, without;
  auto m1 = t.model, m2 = t.model;
  loss_and_gradients(m1, t.Xs, t.classes, t.Xt, {0.0, 5e2, {}}, &with);
  loss_and_gradients(m2, t.Xs, t.classes, Matrix(), {0.0, 5e2, {}}, &without);
  REQUIRE(with.g.size() == without.g.size());
  for (std::size_t i = 0; i < with.g.size(); ++i) CHECK(with.g[i] == without.g[i]);
  CHECK(m1 == m2);
}

TEST_CASE("regularizer gradient has the closed form", "[nn]") {
  auto t = testing::tiny_problem(5);
  auto& m = t.model;
  for (auto& l : m.layers) l.W.setConstant(0.1);
  const double norm = theta_j_norm(m);
  Gradients<double> reg_only, ce_only;
  auto m1 = m, m2 = m;
  loss_and_gradients(m1, t.Xs, t.classes, t.Xt, {0.0, 1.0, {}}, &reg_only);
  loss_and_gradients(m2, t.Xs, t.classes, t.Xt, {0.0, 0.0, {}}, &ce_only);
  const auto names = m.parameter_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] != "fc0.W" && names[i] != "fc1.W") continue;
    const Matrix reg_grad = reg_only.g[i] - ce_only.g[i];
    const Matrix expected = -std::exp(-norm) * Matrix::Constant(reg_grad.rows(), reg_grad.cols(), 0.1) / norm;
    CHECK((reg_grad - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("Adam", "[nn]") {
  SECTION("zero gradient leaves parameters alone") {
    Adam<double> opt;
    Matrix p = Matrix::Constant(2, 2, 3.0);
    Gradients<double> g{{Matrix::Zero(2, 2)}};
    optimizer_step(opt, {&p}, g);
    CHECK(p == Matrix::Constant(2, 2, 3.0));
  }
  SECTION("first step with unit gradient") {
    Adam<double> opt;
    opt.learning_rate = 0.1;
    Matrix p = Matrix::Zero(1, 1);
    optimizer_step(opt, {&p}, Gradients<double>{{Matrix::Ones(1, 1)}});
    CHECK(p(0, 0) == Approx(-0.1).margin(1e-8));
  }
  SECTION("quadratic trajectory matches the reference implementation") {
    // tests/oracles/adam_reference.py
    const double expected[5][3] = {
        {0.90000000099999999, -1.9000000001666666, 0.4000000039999998},
        {0.80041222971233816, -1.800166485947237, 0.3011874278735871},
        {0.70158627450441502, -1.7006233917912488, 0.20487126209775369},
        {0.60393906268210795, -1.60150489494605, 0.1129154109393795},
        {0.50796366192722098, -1.5029557808623537, 0.027814466851013728},
    };
    Adam<double> opt;
    opt.learning_rate = 0.1;
    Matrix p(1, 3), a(1, 3);
    p << 1.0, -2.0, 0.5;
    a << 1.0, 3.0, 0.5;
    for (int t = 0; t < 5; ++t) {
      optimizer_step(opt, {&p}, Gradients<double>{{a.cwiseProduct(p)}});
      for (int i = 0; i < 3; ++i) CHECK(std::abs(p(0, i) - expected[t][i]) < 1e-10);
    }
  }
  SECTION("non-finite gradient aborts") {
    Adam<double> opt;
    Matrix p = Matrix::Zero(1, 1);
    Matrix g(1, 1);
    g << std::nan("");
    CHECK_THROWS_AS(optimizer_step(opt, {&p}, Gradients<double>{{g}}), NumericalError);
    CHECK(p(0, 0) == 0.0);
  }
}

TEST_CASE("checkpoint round-trip", "[nn]") {
  auto t = testing::tiny_problem(8);
  forward(t.model, t.Xs);
  const auto path = (std::filesystem::temp_directory_path() / "fdia_test_ckpt.bin").string();
  save_checkpoint(t.model, {{"step", 12}}, path);
  nlohmann::json extra;
  auto back = load_checkpoint<double>(path, &extra);
  CHECK(extra["step"] == 12);
  back.mode = Mode::train;
  CHECK(back == t.model);
  {
    std::ofstream(path, std::ios::app) << "x";
  }
  CHECK_THROWS_AS(load_checkpoint<double>(path), DataError);
  std::filesystem::remove(path);
}

TEST_CASE("float network agrees with double", "[nn]") {
  MlpConfig cfg;
  cfg.input_dim = 5;
  cfg.hidden_width = 8;
  auto md = init_model<double>(cfg, 3);
  auto mf = init_model<float>(cfg, 3);
  const Matrix X = random_batch(16, 5, 2);
  const auto pd = forward(md, X).probabilities;
  const auto pf = forward(mf, Eigen::MatrixXf(X.cast<float>())).probabilities;
  CHECK((pd - pf.cast<double>()).cwiseAbs().maxCoeff() < 1e-4);
}
