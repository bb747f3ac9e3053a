#ifndef FDIA_GRID_HPP
#define FDIA_GRID_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <queue>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fdia/common.hpp"

namespace fdia {

enum class BusKind { slack, pv, pq };

inline std::string to_string(BusKind k) {
  switch (k) {
    case BusKind::slack: return "slack";
    case BusKind::pv: return "pv";
    case BusKind::pq: return "pq";
  }
  return "pq";
}

inline BusKind bus_kind_from_string(const std::string& s) {
  if (s == "slack" || s == "ref") return BusKind::slack;
  if (s == "pv") return BusKind::pv;
  if (s == "pq") return BusKind::pq;
  throw DataError("unknown bus kind '" + s + "'");
}

/// Bus data in per-unit. `index` is the external id as written in the case document.
struct BusRecord {
  int index = 0;
  double p_load = 0.0;
  double q_load = 0.0;
  double p_gen = 0.0;
  double v_setpoint = 1.0;
  BusKind kind = BusKind::pq;

  bool operator==(const BusRecord&) const = default;
};

/// Pi-model line. from_bus/to_bus are internal 0-based indices once inside a GridCase.
struct BranchRecord {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_shunt = 0.0;

  bool operator==(const BranchRecord&) const = default;
};

struct Admittance {
  double g = 0.0;
  double b = 0.0;
};

/// Series admittance g + jb = 1 / (r + jx).
inline Admittance series_admittance(const BranchRecord& br) {
  const double d = br.r * br.r + br.x * br.x;
  return {br.r / d, -br.x / d};
}

/// Validated, immutable grid description.
///
/// Buses are stored in document order and renumbered to contiguous 0-based
/// indices; `external_id(i)` recovers the id used in the document.
class GridCase {
 public:
  GridCase() = default;

  /// Buses carry external ids; branches reference external ids and are remapped.
  GridCase(std::string id, double base_mva, std::vector<BusRecord> buses,
           std::vector<BranchRecord> branches_external)
      : id_(std::move(id)), base_mva_(base_mva), buses_(std::move(buses)) {
    if (!(base_mva_ > 0.0)) throw DataError("base_mva must be positive");
    if (buses_.empty()) throw DataError("case has no buses");
    std::map<int, int> lookup;
    int slack_count = 0;
    for (std::size_t i = 0; i < buses_.size(); ++i) {
      const auto& b = buses_[i];
      if (!lookup.emplace(b.index, static_cast<int>(i)).second)
        throw DataError("bus " + std::to_string(b.index) + ": duplicate index");
      if (b.kind == BusKind::slack) {
        ++slack_count;
        slack_ = static_cast<int>(i);
      }
      if (b.kind != BusKind::pq && !(b.v_setpoint > 0.0))
        throw DataError("bus " + std::to_string(b.index) + ": v_setpoint must be positive");
      if (!std::isfinite(b.p_load) || !std::isfinite(b.q_load) || !std::isfinite(b.p_gen))
        throw DataError("bus " + std::to_string(b.index) + ": non-finite power value");
    }
    if (slack_count == 0) throw DataError("missing slack bus");
    if (slack_count > 1) throw DataError("more than one slack bus");

    branches_.reserve(branches_external.size());
    for (std::size_t k = 0; k < branches_external.size(); ++k) {
      BranchRecord br = branches_external[k];
      const std::string where = "branch " + std::to_string(k) + " (" +
                                std::to_string(br.from_bus) + "-" + std::to_string(br.to_bus) + ")";
      auto f = lookup.find(br.from_bus);
      auto t = lookup.find(br.to_bus);
      if (f == lookup.end())
        throw DataError(where + ": unknown bus " + std::to_string(br.from_bus));
      if (t == lookup.end())
        throw DataError(where + ": unknown bus " + std::to_string(br.to_bus));
      if (f->second == t->second) throw DataError(where + ": self loop");
      if (br.x == 0.0) throw DataError(where + ": zero reactance");
      if (!(br.r >= 0.0)) throw DataError(where + ": negative resistance");
      if (!std::isfinite(br.x) || !std::isfinite(br.r) || !std::isfinite(br.b_shunt))
        throw DataError(where + ": non-finite parameter");
      br.from_bus = f->second;
      br.to_bus = t->second;
      branches_.push_back(br);
    }
    check_connected();
  }

  const std::string& id() const { return id_; }
  double base_mva() const { return base_mva_; }
  const std::vector<BusRecord>& buses() const { return buses_; }
  /// Branches with internal bus indices.
  const std::vector<BranchRecord>& branches() const { return branches_; }
  int slack_bus() const { return slack_; }
  int n_bus() const { return static_cast<int>(buses_.size()); }
  int n_branch() const { return static_cast<int>(branches_.size()); }
  int external_id(int internal) const { return buses_.at(internal).index; }

  int internal_index(int external) const {
    for (std::size_t i = 0; i < buses_.size(); ++i)
      if (buses_[i].index == external) return static_cast<int>(i);
    throw DataError("unknown bus " + std::to_string(external));
  }

  /// Branches with external bus ids, as they would appear in a document.
  std::vector<BranchRecord> external_branches() const {
    std::vector<BranchRecord> out = branches_;
    for (auto& br : out) {
      br.from_bus = external_id(br.from_bus);
      br.to_bus = external_id(br.to_bus);
    }
    return out;
  }

  GridCase with_branch_parameters(const std::vector<BranchRecord>& internal_branches) const {
    GridCase copy = *this;
    copy.branches_ = internal_branches;
    for (std::size_t k = 0; k < copy.branches_.size(); ++k)
      if (copy.branches_[k].x == 0.0)
        throw DataError("branch " + std::to_string(k) + ": zero reactance");
    return copy;
  }

  bool operator==(const GridCase&) const = default;

 private:
  void check_connected() const {
    const int n = n_bus();
    std::vector<std::vector<int>> adj(n);
    for (const auto& br : branches_) {
      adj[br.from_bus].push_back(br.to_bus);
      adj[br.to_bus].push_back(br.from_bus);
    }
    std::vector<char> seen(n, 0);
    std::queue<int> q;
    q.push(0);
    seen[0] = 1;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          q.push(v);
        }
    }
    for (int i = 0; i < n; ++i)
      if (!seen[i])
        throw DataError("disconnected graph: bus " + std::to_string(buses_[i].index) +
                        " is not reachable");
  }

  std::string id_;
  double base_mva_ = 100.0;
  std::vector<BusRecord> buses_;
  std::vector<BranchRecord> branches_;
  int slack_ = 0;
};

// ---------------------------------------------------------------------------
// Case documents

namespace detail {

template <typename T>
T require(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key))
    throw DataError(where + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw DataError(where + ": key '" + std::string(key) + "' has the wrong type");
  }
}

template <typename T>
T optional(const nlohmann::json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  return require<T>(j, key, where);
}

}  // namespace detail

inline GridCase case_from_json(const nlohmann::json& doc, std::string fallback_id = "case") {
  if (!doc.is_object()) throw DataError("case document must be a JSON object");
  const double base = detail::require<double>(doc, "base_mva", "case");
  const std::string id = detail::optional<std::string>(doc, "id", fallback_id, "case");
  if (!doc.contains("buses") || !doc["buses"].is_array())
    throw DataError("case: 'buses' must be a list");
  if (!doc.contains("branches") || !doc["branches"].is_array())
    throw DataError("case: 'branches' must be a list");

  std::vector<BusRecord> buses;
  for (std::size_t i = 0; i < doc["buses"].size(); ++i) {
    const auto& jb = doc["buses"][i];
    const std::string where = "bus record " + std::to_string(i);
    BusRecord b;
    b.index = detail::require<int>(jb, "index", where);
    b.kind = bus_kind_from_string(detail::require<std::string>(jb, "kind", where));
    b.p_load = detail::optional<double>(jb, "p_load", 0.0, where);
    b.q_load = detail::optional<double>(jb, "q_load", 0.0, where);
    b.p_gen = detail::optional<double>(jb, "p_gen", 0.0, where);
    b.v_setpoint = detail::optional<double>(jb, "v_setpoint", 1.0, where);
    buses.push_back(b);
  }
  std::vector<BranchRecord> branches;
  for (std::size_t k = 0; k < doc["branches"].size(); ++k) {
    const auto& jr = doc["branches"][k];
    const std::string where = "branch record " + std::to_string(k);
    BranchRecord br;
    br.from_bus = detail::require<int>(jr, "from", where);
    br.to_bus = detail::require<int>(jr, "to", where);
    br.r = detail::require<double>(jr, "r", where);
    br.x = detail::require<double>(jr, "x", where);
    br.b_shunt = detail::optional<double>(jr, "b_shunt", 0.0, where);
    branches.push_back(br);
  }
  return GridCase(id, base, std::move(buses), std::move(branches));
}

inline GridCase load_case_string(const std::string& text, std::string fallback_id = "case") {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("case document is not valid JSON: ") + e.what());
  }
  return case_from_json(doc, std::move(fallback_id));
}

inline GridCase load_case(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open case file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return load_case_string(ss.str(), path);
}

inline nlohmann::json case_to_json(const GridCase& c) {
  nlohmann::json doc;
  doc["id"] = c.id();
  doc["base_mva"] = c.base_mva();
  doc["buses"] = nlohmann::json::array();
  for (const auto& b : c.buses())
    doc["buses"].push_back({{"index", b.index},
                            {"kind", to_string(b.kind)},
                            {"p_load", b.p_load},
                            {"q_load", b.q_load},
                            {"p_gen", b.p_gen},
                            {"v_setpoint", b.v_setpoint}});
  doc["branches"] = nlohmann::json::array();
  for (const auto& br : c.external_branches())
    doc["branches"].push_back({{"from", br.from_bus},
                               {"to", br.to_bus},
                               {"r", br.r},
                               {"x", br.x},
                               {"b_shunt", br.b_shunt}});
  return doc;
}

inline std::string serialize_case(const GridCase& c) { return case_to_json(c).dump(2); }

// ---------------------------------------------------------------------------
// Modeling-error perturbation

enum class PerturbScope { r_and_x, x_only };

struct PerturbSpec {
  double delta = 0.0;
  std::uint64_t seed = 0;
  PerturbScope scope = PerturbScope::r_and_x;
};

/// Scale every in-scope line parameter by (1 + u), u ~ U[-delta, +delta].
///
/// The underlying unit draws depend only on the seed, so a larger delta with the
/// same seed stretches the same relative deviations. Shunt susceptances are untouched.
inline GridCase perturb_case(const GridCase& c, const PerturbSpec& spec) {
  if (!(spec.delta >= 0.0 && spec.delta <= 1.0))
    throw std::invalid_argument("perturb_case: delta must lie in [0, 1]");
  if (spec.delta == 0.0) return c;
  Rng rng(derive_seed(spec.seed, 0x7065727475ULL));
  auto branches = c.branches();
  for (std::size_t k = 0; k < branches.size(); ++k) {
    auto& br = branches[k];
    const double ur = spec.delta * (2.0 * rng.uniform() - 1.0);
    double ux = spec.delta * (2.0 * rng.uniform() - 1.0);
    int tries = 0;
    while (br.x * (1.0 + ux) == 0.0) {
      if (++tries > 100)
        throw DataError("perturb_case: branch " + std::to_string(k) + " collapses to zero reactance");
      ux = spec.delta * (2.0 * rng.uniform() - 1.0);
    }
    if (spec.scope == PerturbScope::r_and_x) br.r *= (1.0 + ur);
    br.x *= (1.0 + ux);
  }
  GridCase out = c.with_branch_parameters(branches);
  return out;
}

inline std::vector<Admittance> branch_admittances(const GridCase& c) {
  std::vector<Admittance> out;
  out.reserve(c.branches().size());
  for (const auto& br : c.branches()) out.push_back(series_admittance(br));
  return out;
}

}  // namespace fdia

#endif  // FDIA_GRID_HPP
