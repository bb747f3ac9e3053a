#include <catch_amalgamated.hpp>

#include <limits>
#include <sstream>

#include "fdia/cases.hpp"
#include "fdia/transfer.hpp"

using Catch::Approx;
using namespace fdia;

namespace {

struct Small {
  Dataset source, target, test;
};

Small small_scenario(double delta, std::uint64_t seed = 3, int per_base = 80, int n_base = 5) {
  const auto nominal = cases::ieee14();
  const auto real = perturb_case(nominal, {delta, seed});
  GenerationConfig g;
  g.n_base = n_base;
  g.n_per_base = per_base;
  g.seed = seed;
  Small s;
  s.source = normalize_and_split(generate_source_dataset(nominal, g), seed);
  g.seed = seed + 1;
  s.target = apply_normalization(generate_target_dataset(real, g), s.source.norm_stats, seed + 1);
  g.seed = seed + 2;
  g.n_per_base = 20;
  s.test = apply_normalization(generate_target_test_dataset(real, g), s.source.norm_stats, seed + 2);
  return s;
}

TrainConfig small_config() {
  TrainConfig c;
  c.model.input_dim = 96;
  c.model.hidden_width = 32;
  c.batch_source = 64;
  c.batch_target = 64;
  c.stage1_max_iters = 300;
  c.stage2_max_iters = 100;
  c.eval_every = 20;
  return c;
}

Model fresh(const TrainConfig& c, std::uint64_t seed = 7) { return nn::init_model<double>(c.model, seed); }

bool same_trace(const TrainTrace& a, const TrainTrace& b) {
  if (a.records.size() != b.records.size()) return false;
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    const auto &x = a.records[i], &y = b.records[i];
    if (x.iteration != y.iteration || x.loss_total != y.loss_total || x.acc_train != y.acc_train ||
        x.acc_val != y.acc_val)
      return false;
  }
  return a.best_iteration == b.best_iteration && a.iterations_run == b.iterations_run;
}

}  // namespace

TEST_CASE("configuration documents", "[transfer]") {
  const auto doc = ConfigDocument::parse_string(R"(
# comment
[train]
lambda = 0.5
stage2_replay = false
mmd_kernel = "gaussian"
[model]
hidden_width = 64
[baselines]
knn_k = [1, 5]
)");
  const auto c = train_config_from(doc);
  CHECK(c.lambda == 0.5);
  CHECK_FALSE(c.stage2_replay);
  CHECK(c.mmd.kernel == nn::MmdKernel::gaussian);
  CHECK(c.model.hidden_width == 64);
  CHECK(c.mu == 5e2);
  CHECK(doc.get_list<int>("baselines.knn_k", {}) == std::vector<int>{1, 5});
  doc.require_all_used();

  const auto typo = ConfigDocument::parse_string("[train]\nlamda = 1\n");
  train_config_from(typo);
  CHECK_THROWS_WITH(typo.require_all_used(), Catch::Matchers::ContainsSubstring("train.lamda"));
  CHECK_THROWS_AS(train_config_from(ConfigDocument::parse_string("[train]\nlambda = abc\n")), DataError);
}

TEST_CASE("batch size scaling", "[transfer]") {
  CHECK(scaled_batch(0, 1000000) == 1000);
  CHECK(scaled_batch(0, 20000) == 100);
  CHECK(scaled_batch(0, 500000) == 500);
  CHECK(scaled_batch(256, 20000) == 256);
}

TEST_CASE("classification rule", "[transfer]") {
  CHECK(decide(0.9, 0.1) == Label::attack);
  CHECK(decide(0.5, 0.5) == Label::normal);
  CHECK(decide(0.2, 0.8) == Label::normal);
  // argmax is unchanged by any strictly increasing remap of both logits
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    Matrix logits(1, 2);
    logits << rng.normal(), rng.normal();
    const Matrix p = nn::softmax_rows(logits);
    const Matrix remapped = (logits.array() * 3.0 + 1.0).exp().matrix();
    const Matrix q = nn::softmax_rows(remapped);
    CHECK(decide(p(0, 0), p(0, 1)) == decide(q(0, 0), q(0, 1)));
  }
}

TEST_CASE("stage 1 on identical domains", "[transfer]") {
  const auto s = small_scenario(0.0, 3, 200, 10);
  auto cfg = small_config();
  const auto r = pretrain(fresh(cfg), s.source, s.target, cfg, &s.test);
  CHECK(r.trace.best_val >= 0.99);
  CHECK(r.trace.iterations_run <= cfg.stage1_max_iters);
  CHECK(r.model.mode == nn::Mode::eval);
  CHECK(accuracy(r.model, s.test) >= 0.95);
  REQUIRE_FALSE(r.trace.records.empty());
  for (std::size_t i = 1; i < r.trace.records.size(); ++i)
    CHECK(r.trace.records[i].iteration > r.trace.records[i - 1].iteration);
}

TEST_CASE("lambda zero ignores the target", "[transfer]") {
  const auto s = small_scenario(0.3);
  auto cfg = small_config();
  cfg.lambda = 0.0;
  cfg.mu = 0.0;
  cfg.stage1_max_iters = 60;
  const auto other = small_scenario(0.5, 9);
  auto target2 = apply_normalization(
      [&] {
        Dataset raw = other.target;
        raw.norm_stats = {};
        raw.split = {};
        return raw;
      }(),
      s.source.norm_stats, 1);
  const auto a = pretrain(fresh(cfg), s.source, s.target, cfg);
  const auto b = pretrain(fresh(cfg), s.source, target2, cfg);
  const auto c = train_supervised(fresh(cfg), s.source, cfg);
  CHECK(a.model == b.model);
  CHECK(a.model == c.model);
  CHECK(same_trace(a.trace, c.trace));
}

TEST_CASE("training is reproducible", "[transfer]") {
  const auto s = small_scenario(0.5);
  auto cfg = small_config();
  cfg.stage1_max_iters = 60;
  const auto a = pretrain(fresh(cfg), s.source, s.target, cfg);
  const auto b = pretrain(fresh(cfg), s.source, s.target, cfg);
  CHECK(a.model == b.model);
  CHECK(same_trace(a.trace, b.trace));
  cfg.seed = 2;
  const auto c = pretrain(fresh(cfg), s.source, s.target, cfg);
  CHECK_FALSE(a.model == c.model);
}

TEST_CASE("stage-2 set composition", "[transfer]") {
  const auto s = small_scenario(0.5);
  auto cfg = small_config();
  const auto set = build_stage2_set(s.target, s.source, cfg);
  CHECK(set.count(Label::normal) == s.target.size());
  CHECK(set.count(Label::attack) == s.target.size());
  CHECK(set.split.train.size() + set.split.validation.size() == set.size());
  for (std::size_t i = 0; i < set.size(); ++i)
    CHECK(set.domains[i] == (set.labels[i] == Label::attack ? Domain::source : Domain::target));

  cfg.stage2_replay = false;
  const auto strict = build_stage2_set(s.target, s.source, cfg);
  CHECK(strict.count(Label::attack) == 0);
  CHECK(strict.size() == s.target.size());
}

TEST_CASE("fine-tuning", "[transfer]") {
  const auto s = small_scenario(0.5);
  auto cfg = small_config();
  const auto pre = pretrain(fresh(cfg), s.source, s.target, cfg);
  const auto set = build_stage2_set(s.target, s.source, cfg);

  SECTION("zero iterations leave the model unchanged") {
    cfg.stage2_max_iters = 0;
    CHECK(finetune(pre.model, set, cfg).model == pre.model);
  }
  SECTION("small learning rate keeps parameters close") {
    const auto fin = finetune(pre.model, set, cfg);
    auto a = pre.model, b = fin.model;
    double base = 0.0, diff = 0.0;
    const auto pa = a.parameters(), pb = b.parameters();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      base += pa[i]->squaredNorm();
      diff += (*pa[i] - *pb[i]).squaredNorm();
    }
    CHECK(std::sqrt(diff / base) < 0.05);
    CHECK(fin.trace.best_val >= 0.0);
  }
}

TEST_CASE("pipeline preconditions", "[transfer]") {
  const auto s = small_scenario(0.2);
  auto cfg = small_config();
  CHECK_THROWS_AS(pretrain(fresh(cfg), s.source, s.test, cfg), DataError);
  Dataset raw = s.target;
  raw.norm_stats = {};
  CHECK_THROWS_AS(pretrain(fresh(cfg), s.source, raw, cfg), DataError);
  auto wide = cfg;
  wide.model.input_dim = 10;
  CHECK_THROWS_AS(pretrain(fresh(wide), s.source, s.target, cfg), DataError);

  Dataset poisoned = s.source;
  poisoned.features.setConstant(std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_AS(train_supervised(fresh(cfg), poisoned, cfg), NumericalError);
}

TEST_CASE("trace CSV", "[transfer]") {
  TrainTrace t;
  t.records.push_back({25, 0.1, 0.2, 0.3, 0.6, 0.9, 0.8});
  std::ostringstream os;
  write_trace_csv(t, os);
  CHECK(os.str().rfind("iteration,loss_ce,loss_mmd,loss_reg,loss_total,acc_train,acc_val,acc_test,seconds\n", 0) == 0);
  CHECK(os.str().find("25,0.1,0.2,0.3,0.6,0.9,0.8,,0") != std::string::npos);
}

TEST_CASE("classify checks the layout", "[transfer]") {
  const auto s = small_scenario(0.0);
  auto cfg = small_config();
  const auto m = fresh(cfg);
  const auto c = classify(m, s.test);
  CHECK(c.verdicts.size() == s.test.size());
  for (Eigen::Index i = 0; i < c.probabilities.rows(); ++i)
    CHECK(c.probabilities.row(i).sum() == Approx(1.0).margin(1e-9));
  auto narrow = cfg;
  narrow.model.input_dim = 18;
  CHECK_THROWS_WITH(classify(fresh(narrow), s.test), Catch::Matchers::ContainsSubstring("layout mismatch"));
}
