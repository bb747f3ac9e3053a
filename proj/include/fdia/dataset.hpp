#ifndef FDIA_DATASET_HPP
#define FDIA_DATASET_HPP

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fdia/attack.hpp"
#include "fdia/common.hpp"
#include "fdia/grid.hpp"
#include "fdia/power_flow.hpp"

namespace fdia {

enum class Label : std::uint8_t { normal = 0, attack = 1 };
enum class Domain : std::uint8_t { source = 0, target = 1, target_test = 2 };

inline const char* to_string(Label l) { return l == Label::attack ? "attack" : "normal"; }

inline const char* to_string(Domain d) {
  switch (d) {
    case Domain::source: return "source";
    case Domain::target: return "target";
    case Domain::target_test: return "target_test";
  }
  return "source";
}

inline Domain domain_from_string(const std::string& s) {
  if (s == "source") return Domain::source;
  if (s == "target") return Domain::target;
  if (s == "target_test" || s == "target-test") return Domain::target_test;
  throw std::invalid_argument("unknown domain '" + s + "'");
}

/// Where a sample came from. attack_bus is the external bus id, 0 for normal samples.
struct Provenance {
  std::int32_t base_id = 0;
  std::int32_t draw_id = 0;
  std::int32_t attack_bus = 0;
  float gamma = 0.0f;

  bool operator==(const Provenance&) const = default;
};

struct LabeledSample {
  std::vector<float> features;
  Label label = Label::normal;
  Domain domain = Domain::source;
  Provenance provenance;
};

/// Per-feature min/max of the training rows. Constant columns map to 0.
struct NormStats {
  std::vector<float> min;
  std::vector<float> max;
  std::vector<int> constant_features;

  bool empty() const { return min.empty(); }
  bool operator==(const NormStats&) const = default;
};

struct Split {
  std::vector<std::int32_t> train;
  std::vector<std::int32_t> validation;

  bool empty() const { return train.empty() && validation.empty(); }
  bool operator==(const Split&) const = default;
};

using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Samples in row-major feature storage: Pd | Qd | P | Q | p | q.
struct Dataset {
  MeasurementLayout layout;
  std::string case_id;
  FeatureMatrix features;
  std::vector<Label> labels;
  std::vector<Domain> domains;
  std::vector<Provenance> provenance;
  /// Set once features have been normalized with these stats.
  NormStats norm_stats;
  Split split;
  std::uint64_t seed = 0;
  /// Power-flow profiles that had to be redrawn during generation.
  std::int64_t resampled = 0;

  std::size_t size() const { return labels.size(); }
  int feature_dim() const { return static_cast<int>(features.cols()); }

  LabeledSample sample(std::size_t i) const {
    LabeledSample s;
    s.features.assign(features.row(i).data(), features.row(i).data() + features.cols());
    s.label = labels[i];
    s.domain = domains[i];
    s.provenance = provenance[i];
    return s;
  }

  std::size_t count(Label l) const { return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), l)); }

  bool operator==(const Dataset& o) const {
    return layout == o.layout && case_id == o.case_id && features == o.features && labels == o.labels &&
           domains == o.domains && provenance == o.provenance && norm_stats == o.norm_stats && split == o.split &&
           seed == o.seed && resampled == o.resampled;
  }
};

inline int feature_dim(const MeasurementLayout& l) { return 4 * l.n_bus + 2 * l.n_branch; }

// ---------------------------------------------------------------------------
// Generation

struct GenerationConfig {
  int n_base = 10;
  int n_per_base = 1000;
  double load_low = 0.5;
  double load_high = 1.5;
  double sigma = 0.01;
  NoiseDistribution noise = NoiseDistribution::uniform_bounded;
  std::vector<int> attack_buses{2, 3, 9};
  std::vector<double> attack_intensities{0.1, 0.2, 0.3};
  AttackMode attack_mode = AttackMode::angle_only;
  std::uint64_t seed = 1;
  /// Worker threads; results do not depend on this.
  int workers = 1;

  void validate() const {
    if (n_base < 1 || n_per_base < 1) throw std::invalid_argument("generation counts must be at least 1");
    if (!(load_low <= load_high) || !(load_low >= 0.0)) throw std::invalid_argument("invalid load range");
    if (sigma < 0.0) throw std::invalid_argument("sigma must be non-negative");
    if (attack_buses.empty() || attack_intensities.empty())
      throw std::invalid_argument("attack bus and intensity sets must be nonempty");
  }
};

namespace detail {

enum : std::uint64_t {
  kTagBase = 0xba5e,
  kTagProfile = 0x9f0f,
  kTagNoiseNormal = 0x4e01,
  kTagNoiseAttack = 0x4e02,
  kTagAttack = 0xa77c,
  kTagSplit = 0x5b17,
};

template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
  const std::size_t w = std::max<std::size_t>(1, std::min<std::size_t>(workers, n));
  if (w == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(w);
  for (std::size_t t = 0; t < w; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += w) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// Base load conditions: the case loads scaled per bus by U[load_low, load_high].
inline std::vector<BusLoads> generate_base_conditions(const GridCase& c, const GenerationConfig& cfg) {
  cfg.validate();
  const BusLoads nominal = case_loads(c);
  std::vector<BusLoads> bases;
  for (int b = 0; b < cfg.n_base; ++b) {
    Rng rng(derive_seed(cfg.seed, detail::kTagBase, b));
    BusLoads l = nominal;
    for (int i = 0; i < c.n_bus(); ++i) {
      const double u = rng.uniform(cfg.load_low, cfg.load_high);
      l.p[i] *= u;
      l.q[i] *= u;
    }
    bases.push_back(std::move(l));
  }
  return bases;
}

/// One specific load condition drawn around a base condition. `attempt` > 0 redraws.
inline BusLoads draw_profile(const BusLoads& base, const GenerationConfig& cfg, std::uint64_t role, int base_id,
                             int draw_id, int attempt = 0) {
  Rng rng(derive_seed(cfg.seed, detail::kTagProfile, role, base_id, draw_id, attempt));
  BusLoads l = base;
  for (Eigen::Index i = 0; i < l.p.size(); ++i) {
    const double u = rng.uniform(cfg.load_low, cfg.load_high);
    l.p[i] *= u;
    l.q[i] *= u;
  }
  return l;
}

/// n_base * n_per_base load profiles (first attempt of each draw, no power-flow check).
inline std::vector<BusLoads> generate_load_profiles(const GridCase& c, const GenerationConfig& cfg,
                                                    std::uint64_t role = 0) {
  const auto bases = generate_base_conditions(c, cfg);
  std::vector<BusLoads> out;
  out.reserve(static_cast<std::size_t>(cfg.n_base) * cfg.n_per_base);
  for (int b = 0; b < cfg.n_base; ++b)
    for (int d = 0; d < cfg.n_per_base; ++d) out.push_back(draw_profile(bases[b], cfg, role, b, d));
  return out;
}

namespace detail {

inline void write_features(FeatureMatrix& f, std::size_t row, const BusLoads& loads, const Vector& z) {
  const Eigen::Index n = loads.p.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    f(row, i) = static_cast<float>(loads.p[i]);
    f(row, n + i) = static_cast<float>(loads.q[i]);
  }
  for (Eigen::Index k = 0; k < z.size(); ++k) f(row, 2 * n + k) = static_cast<float>(z[k]);
}

/// Shared recipe: per profile one normal sample and, when `with_attacks`, one attacked sample.
inline Dataset generate(const GridCase& c, const GenerationConfig& cfg, Domain domain, bool with_attacks) {
  cfg.validate();
  for (int bus : cfg.attack_buses) {
    if (c.internal_index(bus) == c.slack_bus())
      throw std::invalid_argument("attack bus " + std::to_string(bus) + " is the slack bus");
  }
  const auto role = static_cast<std::uint64_t>(domain);
  const auto bases = generate_base_conditions(c, cfg);
  const std::size_t n_profiles = static_cast<std::size_t>(cfg.n_base) * cfg.n_per_base;
  const std::size_t per = with_attacks ? 2 : 1;

  Dataset d;
  d.layout = measurement_layout(c);
  d.case_id = c.id();
  d.seed = cfg.seed;
  d.features.resize(static_cast<Eigen::Index>(n_profiles * per), feature_dim(d.layout));
  d.labels.resize(n_profiles * per);
  d.domains.assign(n_profiles * per, domain);
  d.provenance.resize(n_profiles * per);
  std::vector<std::int64_t> redraws(n_profiles, 0);

  detail::parallel_for(n_profiles, cfg.workers, [&](std::size_t p) {
    const int b = static_cast<int>(p / cfg.n_per_base);
    const int draw = static_cast<int>(p % cfg.n_per_base);
    BusLoads loads;
    StateVector x;
    for (int attempt = 0;; ++attempt) {
      if (attempt > 20) throw NumericalError("profile " + std::to_string(p) + ": power flow failed repeatedly");
      loads = draw_profile(bases[b], cfg, role, b, draw, attempt);
      try {
        x = solve_power_flow(c, loads);
        break;
      } catch (const NumericalError&) {
        ++redraws[p];
      }
    }
    const Vector h = measurement_function(c, x);

    Vector z = h;
    add_noise(z, {cfg.sigma, derive_seed(cfg.seed, kTagNoiseNormal, role, b, draw), cfg.noise});
    const std::size_t row = p * per;
    write_features(d.features, row, loads, z);
    d.labels[row] = Label::normal;
    d.provenance[row] = {b, draw, 0, 0.0f};

    if (with_attacks) {
      Rng pick(derive_seed(cfg.seed, kTagAttack, role, b, draw));
      const int bus = cfg.attack_buses[pick.index(cfg.attack_buses.size())];
      const double gamma = cfg.attack_intensities[pick.index(cfg.attack_intensities.size())];
      const auto atk = construct_attack(c, x, {{bus}, gamma, pick.next_u64(), cfg.attack_mode});
      Vector za = h + atk.a;
      add_noise(za, {cfg.sigma, derive_seed(cfg.seed, kTagNoiseAttack, role, b, draw), cfg.noise});
      write_features(d.features, row + 1, loads, za);
      d.labels[row + 1] = Label::attack;
      d.provenance[row + 1] = {b, draw, bus, static_cast<float>(gamma)};
    }
  });
  d.resampled = std::accumulate(redraws.begin(), redraws.end(), std::int64_t{0});
  if (static_cast<double>(d.resampled) > 0.01 * static_cast<double>(n_profiles))
    throw NumericalError("excessive power-flow resampling: " + std::to_string(d.resampled) + " of " +
                         std::to_string(n_profiles) + " profiles");
  return d;
}

}  // namespace detail

/// Labeled simulation data under the nominal parameters, balanced 1:1.
inline Dataset generate_source_dataset(const GridCase& nominal, const GenerationConfig& cfg) {
  return detail::generate(nominal, cfg, Domain::source, true);
}

/// Normal-only data from the real (perturbed) system.
inline Dataset generate_target_dataset(const GridCase& real, const GenerationConfig& cfg) {
  return detail::generate(real, cfg, Domain::target, false);
}

/// Held-out balanced test data from the real system.
inline Dataset generate_target_test_dataset(const GridCase& real, const GenerationConfig& cfg) {
  return detail::generate(real, cfg, Domain::target_test, true);
}

/// Measurement part (P, Q, p, q) of a sample row in the canonical measurement layout.
inline MeasurementVector measurement_part(const Dataset& d, std::size_t row) {
  MeasurementVector m;
  m.layout = d.layout;
  const int off = 2 * d.layout.n_bus;
  m.values = d.features.row(row).segment(off, d.layout.size()).cast<double>().transpose();
  return m;
}

// ---------------------------------------------------------------------------
// Normalization and splitting

/// Shuffled 7:3 split.
inline Split make_split(std::size_t n, std::uint64_t seed, double train_fraction = 0.7) {
  std::vector<std::int32_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(derive_seed(seed, detail::kTagSplit));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.index(i)]);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n)));
  Split s;
  s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train), idx.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  return s;
}

inline NormStats compute_norm_stats(const FeatureMatrix& f, const std::vector<std::int32_t>& rows) {
  if (rows.empty()) throw DataError("cannot compute normalization stats from zero rows");
  NormStats s;
  const auto d = f.cols();
  s.min.assign(d, std::numeric_limits<float>::infinity());
  s.max.assign(d, -std::numeric_limits<float>::infinity());
  for (auto r : rows)
    for (Eigen::Index j = 0; j < d; ++j) {
      s.min[j] = std::min(s.min[j], f(r, j));
      s.max[j] = std::max(s.max[j], f(r, j));
    }
  for (Eigen::Index j = 0; j < d; ++j)
    if (s.max[j] == s.min[j]) s.constant_features.push_back(static_cast<int>(j));
  return s;
}

/// Affine map [min, max] -> [-1, 1]; values outside the training range are not clipped.
inline void normalize_in_place(FeatureMatrix& f, const NormStats& s) {
  if (static_cast<std::size_t>(f.cols()) != s.min.size()) throw DataError("normalization stats width mismatch");
  for (Eigen::Index j = 0; j < f.cols(); ++j) {
    const double lo = s.min[j], hi = s.max[j];
    if (hi == lo) {
      f.col(j).setZero();
      continue;
    }
    const double scale = 2.0 / (hi - lo);
    for (Eigen::Index i = 0; i < f.rows(); ++i)
      f(i, j) = static_cast<float>((static_cast<double>(f(i, j)) - lo) * scale - 1.0);
  }
}

/// Split 7:3, compute stats on the training rows, normalize every row with them.
inline Dataset normalize_and_split(Dataset d, std::uint64_t seed) {
  if (d.size() == 0) throw DataError("cannot normalize an empty dataset");
  if (!d.norm_stats.empty()) throw DataError("dataset is already normalized");
  d.split = make_split(d.size(), seed);
  d.norm_stats = compute_norm_stats(d.features, d.split.train);
  normalize_in_place(d.features, d.norm_stats);
  return d;
}

/// Normalize with stats computed elsewhere (e.g. the source training rows) and split 7:3.
inline Dataset apply_normalization(Dataset d, const NormStats& stats, std::uint64_t seed) {
  if (d.size() == 0) throw DataError("cannot normalize an empty dataset");
  if (!d.norm_stats.empty()) throw DataError("dataset is already normalized");
  if (d.split.empty()) d.split = make_split(d.size(), seed);
  d.norm_stats = stats;
  normalize_in_place(d.features, stats);
  return d;
}

/// Rows selected by index, keeping layout and stats; the split is dropped.
inline Dataset subset(const Dataset& d, const std::vector<std::int32_t>& rows) {
  Dataset out;
  out.layout = d.layout;
  out.case_id = d.case_id;
  out.norm_stats = d.norm_stats;
  out.seed = d.seed;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), d.features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = d.features.row(rows[i]);
    out.labels.push_back(d.labels[rows[i]]);
    out.domains.push_back(d.domains[rows[i]]);
    out.provenance.push_back(d.provenance[rows[i]]);
  }
  return out;
}

/// Row-wise concatenation of datasets sharing a layout and normalization.
inline Dataset concatenate(const Dataset& a, const Dataset& b) {
  if (!(a.layout == b.layout)) throw DataError("cannot concatenate datasets with different layouts");
  if (!(a.norm_stats == b.norm_stats)) throw DataError("cannot concatenate datasets with different normalization");
  Dataset out = a;
  out.split = {};
  out.features.resize(static_cast<Eigen::Index>(a.size() + b.size()), a.features.cols());
  out.features.topRows(static_cast<Eigen::Index>(a.size())) = a.features;
  out.features.bottomRows(static_cast<Eigen::Index>(b.size())) = b.features;
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  out.domains.insert(out.domains.end(), b.domains.begin(), b.domains.end());
  out.provenance.insert(out.provenance.end(), b.provenance.begin(), b.provenance.end());
  return out;
}

// ---------------------------------------------------------------------------
// Persistence
//
// File layout (all binary values little-endian):
//   "FDIADS1\n"
//   u64 header length, then that many bytes of JSON header
//   n*d f32 feature rows
//   n bytes: bit 0 label, bits 1-2 domain
//   n * (i32 base_id, i32 draw_id, i32 attack_bus, f32 gamma)

namespace detail {

inline constexpr char kDatasetMagic[] = "FDIADS1\n";

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("corrupt file: unexpected end of data");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline nlohmann::json dataset_header(const Dataset& d) {
  nlohmann::json h;
  h["format"] = "fdia-dataset";
  h["version"] = 1;
  h["case_id"] = d.case_id;
  h["layout"] = {{"n_bus", d.layout.n_bus}, {"n_branch", d.layout.n_branch}, {"topology", d.layout.topology}};
  h["layout_hash"] = d.layout.fingerprint();
  h["n_samples"] = d.size();
  h["feature_dim"] = d.feature_dim();
  h["n_attack"] = d.count(Label::attack);
  h["seed"] = d.seed;
  h["resampled"] = d.resampled;
  h["norm_stats"] = {{"min", d.norm_stats.min}, {"max", d.norm_stats.max},
                     {"constant_features", d.norm_stats.constant_features}};
  h["split"] = {{"train", d.split.train}, {"validation", d.split.validation}};
  return h;
}

inline void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot write '" + path + "'");
  const std::string header = dataset_header(d).dump();
  os.write(detail::kDatasetMagic, 8);
  detail::write_le<std::uint64_t>(os, header.size());
  os.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (Eigen::Index i = 0; i < d.features.rows(); ++i)
    for (Eigen::Index j = 0; j < d.features.cols(); ++j) detail::write_le<float>(os, d.features(i, j));
  for (std::size_t i = 0; i < d.size(); ++i) {
    const auto byte = static_cast<std::uint8_t>(static_cast<unsigned>(d.labels[i]) |
                                                (static_cast<unsigned>(d.domains[i]) << 1));
    detail::write_le<std::uint8_t>(os, byte);
  }
  for (const auto& p : d.provenance) {
    detail::write_le<std::int32_t>(os, p.base_id);
    detail::write_le<std::int32_t>(os, p.draw_id);
    detail::write_le<std::int32_t>(os, p.attack_bus);
    detail::write_le<float>(os, p.gamma);
  }
  if (!os) throw DataError("write failed for '" + path + "'");
}

/// Load a dataset; when `expected` is given the stored layout must match it.
inline Dataset load_dataset(const std::string& path, const MeasurementLayout* expected = nullptr) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open dataset '" + path + "'");
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, detail::kDatasetMagic, 8) != 0)
    throw DataError("corrupt file: '" + path + "' is not a dataset file");
  const auto header_len = detail::read_le<std::uint64_t>(is);
  if (header_len > (1ULL << 34)) throw DataError("corrupt file: implausible header length");
  std::string header(header_len, '\0');
  if (!is.read(header.data(), static_cast<std::streamsize>(header_len)))
    throw DataError("corrupt file: truncated header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: bad header: ") + e.what());
  }

  Dataset d;
  try {
    d.case_id = h.at("case_id").get<std::string>();
    d.layout.n_bus = h.at("layout").at("n_bus").get<int>();
    d.layout.n_branch = h.at("layout").at("n_branch").get<int>();
    d.layout.topology = h.at("layout").at("topology").get<std::string>();
    if (h.at("layout_hash").get<std::uint64_t>() != d.layout.fingerprint())
      throw DataError("corrupt file: layout hash does not match layout");
    d.seed = h.at("seed").get<std::uint64_t>();
    d.resampled = h.at("resampled").get<std::int64_t>();
    d.norm_stats.min = h.at("norm_stats").at("min").get<std::vector<float>>();
    d.norm_stats.max = h.at("norm_stats").at("max").get<std::vector<float>>();
    d.norm_stats.constant_features = h.at("norm_stats").at("constant_features").get<std::vector<int>>();
    d.split.train = h.at("split").at("train").get<std::vector<std::int32_t>>();
    d.split.validation = h.at("split").at("validation").get<std::vector<std::int32_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt file: incomplete header: ") + e.what());
  }
  if (expected && !(d.layout == *expected))
    throw DataError("dataset layout mismatch: file has " + std::to_string(d.layout.n_bus) + " buses / " +
                    std::to_string(d.layout.n_branch) + " branches, expected " + std::to_string(expected->n_bus) +
                    " / " + std::to_string(expected->n_branch));
  const auto n = h.at("n_samples").get<std::size_t>();
  const auto dim = h.at("feature_dim").get<int>();
  if (dim != feature_dim(d.layout)) throw DataError("corrupt file: feature width does not match layout");

  d.features.resize(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i)
    for (int j = 0; j < dim; ++j) d.features(static_cast<Eigen::Index>(i), j) = detail::read_le<float>(is);
  d.labels.resize(n);
  d.domains.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto byte = detail::read_le<std::uint8_t>(is);
    if ((byte & 1u) > 1 || (byte >> 1) > 2) throw DataError("corrupt file: bad label byte");
    d.labels[i] = static_cast<Label>(byte & 1u);
    d.domains[i] = static_cast<Domain>(byte >> 1);
  }
  d.provenance.resize(n);
  for (auto& p : d.provenance) {
    p.base_id = detail::read_le<std::int32_t>(is);
    p.draw_id = detail::read_le<std::int32_t>(is);
    p.attack_bus = detail::read_le<std::int32_t>(is);
    p.gamma = detail::read_le<float>(is);
  }
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("corrupt file: trailing bytes");
  return d;
}

inline void export_csv(const Dataset& d, std::ostream& os) {
  for (int j = 0; j < d.feature_dim(); ++j) os << "feature_" << j << ',';
  os << "label,domain,base_id,draw_id,attack_bus,gamma\n";
  os.precision(9);
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (int j = 0; j < d.feature_dim(); ++j) os << d.features(static_cast<Eigen::Index>(i), j) << ',';
    const auto& p = d.provenance[i];
    os << to_string(d.labels[i]) << ',' << to_string(d.domains[i]) << ',' << p.base_id << ',' << p.draw_id << ','
       << p.attack_bus << ',' << p.gamma << '\n';
  }
}

}  // namespace fdia

#endif  // FDIA_DATASET_HPP
