#include "bellsim/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace bellsim {

Outcome outcome_from_int(int v) {
  if (v == 1) return Outcome::Up;
  if (v == -1) return Outcome::Down;
  throw ConfigError("outcome must be +1 or -1, got " + std::to_string(v));
}

// ---------------------------------------------------------------------------
// Directions

namespace {

double wrap_angle(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

bool valid_name(const std::string& s) {
  if (s.empty() || !std::isalpha(static_cast<unsigned char>(s.front()))) return false;
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '_';
  });
}

}  // namespace

Direction Direction::coplanar(double angle_rad) {
  Direction d;
  d.coplanar_ = true;
  d.angle_ = wrap_angle(angle_rad);
  d.v_ = {std::cos(d.angle_), std::sin(d.angle_), 0.0};
  return d;
}

Direction Direction::spatial(double x, double y, double z) {
  const double norm = std::sqrt(x * x + y * y + z * z);
  if (norm < 1e-12) throw ConfigError("direction vector must be nonzero");
  Direction d;
  d.coplanar_ = false;
  d.v_ = {x / norm, y / norm, z / norm};
  return d;
}

double Direction::angle() const {
  if (!coplanar_) throw std::logic_error("angle() on a non-coplanar direction");
  return angle_;
}

double relative_angle(const Direction& a, const Direction& b) {
  if (a.is_coplanar() && b.is_coplanar()) {
    double d = std::fabs(a.angle() - b.angle());
    if (d > kPi) d = kTwoPi - d;
    return d;
  }
  const auto& u = a.vec();
  const auto& v = b.vec();
  const double dot = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
  return std::acos(std::clamp(dot, -1.0, 1.0));
}

DirectionSet::DirectionSet(std::vector<std::string> names, std::vector<Direction> dirs)
    : names_(std::move(names)), dirs_(std::move(dirs)) {
  if (names_.size() != dirs_.size())
    throw ConfigError("direction names and vectors differ in count");
}

std::optional<int> DirectionSet::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return std::nullopt;
}

bool DirectionSet::all_coplanar() const {
  return std::all_of(dirs_.begin(), dirs_.end(),
                     [](const Direction& d) { return d.is_coplanar(); });
}

DirectionSet default_triple(double step) {
  return DirectionSet({"A", "B", "C"},
                      {Direction::coplanar(0.0), Direction::coplanar(step),
                       Direction::coplanar(2.0 * step)});
}

// ---------------------------------------------------------------------------
// Schedules and sources

std::string schedule_kind(const ScheduleStrategy& s) {
  struct V {
    std::string operator()(const IidRandomSchedule&) const { return "iid_random"; }
    std::string operator()(const PeriodicSchedule&) const { return "periodic"; }
    std::string operator()(const PresetSchedule&) const { return "preset"; }
    std::string operator()(const DelayedChoiceSchedule&) const { return "delayed_choice"; }
  };
  return std::visit(V{}, s);
}

std::string source_kind(const SourceSpec& s) {
  struct V {
    std::string operator()(const QmSource&) const { return "qm"; }
    std::string operator()(const DeterministicUniformSource&) const {
      return "deterministic_uniform";
    }
    std::string operator()(const StochasticSource&) const { return "stochastic"; }
    std::string operator()(const SelectionCorrelatedSource&) const {
      return "selection_correlated";
    }
  };
  return std::visit(V{}, s);
}

DensitySpec DensitySpec::uniform() {
  DensitySpec d;
  d.kind = "uniform";
  return d;
}

// ---------------------------------------------------------------------------
// Count tables

namespace {

std::optional<double> freq(std::int64_t n, std::int64_t total) {
  if (total == 0) return std::nullopt;
  return static_cast<double>(n) / static_cast<double>(total);
}

}  // namespace

std::optional<double> PairCells::f_uu() const { return freq(uu, subtotal()); }
std::optional<double> PairCells::f_ud() const { return freq(ud, subtotal()); }
std::optional<double> PairCells::f_du() const { return freq(du, subtotal()); }
std::optional<double> PairCells::f_dd() const { return freq(dd, subtotal()); }

std::optional<double> PairCells::expectation() const {
  const std::int64_t total = subtotal();
  if (total == 0) return std::nullopt;
  return static_cast<double>(uu + dd - ud - du) / static_cast<double>(total);
}

void CountTable::add(PairKey key, Outcome at_lo, Outcome at_hi) {
  PairCells& c = cells_[key];
  if (at_lo == Outcome::Up)
    (at_hi == Outcome::Up ? c.uu : c.ud) += 1;
  else
    (at_hi == Outcome::Up ? c.du : c.dd) += 1;
}

const PairCells* CountTable::cells(PairKey key) const {
  auto it = cells_.find(key);
  return it == cells_.end() ? nullptr : &it->second;
}

CountTable tally(std::span<const PairRecord> records) {
  CountTable table(static_cast<std::int64_t>(records.size()));
  for (const PairRecord& r : records) {
    const PairKey key = PairKey::make(r.setting1, r.setting2);
    if (r.setting1 <= r.setting2)
      table.add(key, r.outcome1, r.outcome2);
    else
      table.add(key, r.outcome2, r.outcome1);
  }
  return table;
}

// ---------------------------------------------------------------------------
// Geometry helpers

double distance_from_origin(const std::array<double, 3>& p) {
  return std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
}

double distance_between(const std::array<double, 3>& a, const std::array<double, 3>& b) {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

// ---------------------------------------------------------------------------
// Config validation

namespace {

void validate_density_impl(const DensitySpec& d, bool coplanar, std::vector<std::string>& out,
                           const std::string& where) {
  const std::size_t point_dim = coplanar ? 1 : 3;
  if (d.kind == "uniform") {
    return;
  } else if (d.kind == "point_mass" || d.kind == "cap") {
    if (d.center.size() != point_dim)
      out.push_back(where + ": center needs " + std::to_string(point_dim) +
                    " component(s), got " + std::to_string(d.center.size()));
    if (!coplanar && d.center.size() == 3 &&
        distance_from_origin({d.center[0], d.center[1], d.center[2]}) < 1e-12)
      out.push_back(where + ": center vector must be nonzero");
    if (d.kind == "cap" && !(d.halfwidth > 0.0 && d.halfwidth <= kPi))
      out.push_back(where + ": cap halfwidth must be in (0, pi]");
  } else if (d.kind == "mixture") {
    if (d.components.empty() || d.weights.size() != d.components.size()) {
      out.push_back(where + ": mixture needs matching, nonempty weights and components");
      return;
    }
    double sum = 0.0;
    for (double w : d.weights) {
      if (!(w > 0.0)) out.push_back(where + ": mixture weights must be positive");
      sum += w;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      out.push_back(where + ": mixture weights must sum to 1 (got " + std::to_string(sum) + ")");
    for (std::size_t i = 0; i < d.components.size(); ++i)
      validate_density_impl(d.components[i], coplanar, out,
                            where + ".components[" + std::to_string(i) + "]");
  } else {
    out.push_back(where + ": unknown density kind '" + d.kind + "'");
  }
}

}  // namespace

std::vector<std::string> validate_density(const DensitySpec& d, bool coplanar) {
  std::vector<std::string> out;
  validate_density_impl(d, coplanar, out, "density");
  return out;
}

std::vector<std::string> ExperimentConfig::validate() const {
  std::vector<std::string> out;

  if (directions.size() < 2) out.push_back("need at least two directions");
  std::set<std::string> seen;
  for (int i = 0; i < directions.size(); ++i) {
    const std::string& n = directions.name(i);
    if (!valid_name(n))
      out.push_back("direction name '" + n + "' must be alphanumeric/underscore");
    if (!seen.insert(n).second) out.push_back("duplicate direction name '" + n + "'");
  }

  if (m_total < 1) out.push_back("m_total must be >= 1");
  if (!(t_start < t_end)) out.push_back("t_start must precede t_end");
  if (!(rate_hz > 0.0)) out.push_back("rate_hz must be positive");
  if (!(cadence_s > 0.0)) out.push_back("cadence_s must be positive");
  if (!poisson_emissions && m_total >= 1 && rate_hz > 0.0 && t_start < t_end) {
    const double last = t_start + static_cast<double>(m_total - 1) / rate_hz;
    if (last > t_end)
      out.push_back("emission schedule overruns t_end (last emission at " +
                    std::to_string(last) + ")");
  }

  if (distance_from_origin(geometry.detector1) < 1e-12 ||
      distance_from_origin(geometry.detector2) < 1e-12)
    out.push_back("detectors must be distinct from the source");
  if (distance_between(geometry.detector1, geometry.detector2) < 1e-12)
    out.push_back("detectors must be distinct from each other");

  const int n = directions.size();
  auto check_pairs = [&](const std::vector<std::pair<int, int>>& pairs, const std::string& what) {
    for (const auto& [i, j] : pairs)
      if (i < 0 || i >= n || j < 0 || j >= n)
        out.push_back(what + " references a setting index out of range");
  };
  if (const auto* p = std::get_if<PeriodicSchedule>(&schedule)) {
    if (p->pattern.empty()) out.push_back("periodic schedule needs a nonempty pattern");
    check_pairs(p->pattern, "periodic pattern");
  } else if (const auto* p2 = std::get_if<PresetSchedule>(&schedule)) {
    if (static_cast<std::int64_t>(p2->assignments.size()) < m_total)
      out.push_back("preset schedule has fewer assignments than m_total");
    check_pairs(p2->assignments, "preset assignment");
  } else if (const auto* d = std::get_if<DelayedChoiceSchedule>(&schedule)) {
    if (d->latency_s < 0.0) out.push_back("delayed-choice latency must be >= 0");
  }

  if (const auto* s = std::get_if<StochasticSource>(&source)) {
    for (auto& msg : validate_density(s->density, directions.all_coplanar()))
      out.push_back(std::move(msg));
  } else if (const auto* sc = std::get_if<SelectionCorrelatedSource>(&source)) {
    if (sc->target_kind != "qm" && sc->target_kind != "uniform_model" &&
        sc->target_kind != "custom")
      out.push_back("unknown selection-correlated target kind '" + sc->target_kind + "'");
    for (const auto& [key, cells] : sc->custom_targets) {
      if (key.first < 0 || key.first >= n || key.second < 0 || key.second >= n ||
          key.first > key.second) {
        out.push_back("custom target pair out of range or not canonical");
        continue;
      }
      double sum = 0.0;
      for (double p : cells) {
        if (p < -1e-12) out.push_back("custom target cell probability is negative");
        sum += p;
      }
      if (std::fabs(sum - 1.0) > 1e-9)
        out.push_back("custom target cells must sum to 1 (got " + std::to_string(sum) + ")");
    }
  }

  return out;
}

}  // namespace bellsim
