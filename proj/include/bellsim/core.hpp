#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

// Core vocabulary for paired spin measurements: detector directions, trial
// records, hidden-variable traces, selection schedules and count tables.

namespace bellsim {

inline constexpr double kPi = 3.141592653589793238462643383279502884;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;  // m/s, exact

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Outcomes and directions

enum class Outcome : int { Down = -1, Up = +1 };

inline int outcome_value(Outcome o) { return static_cast<int>(o); }
inline Outcome negate(Outcome o) { return o == Outcome::Up ? Outcome::Down : Outcome::Up; }
Outcome outcome_from_int(int v);  // accepts only +1 / -1

// A detector orientation: either an angle in a fixed plane or a full 3D unit
// vector. Coplanar directions also expose their embedding (cos a, sin a, 0).
class Direction {
 public:
  static Direction coplanar(double angle_rad);
  static Direction spatial(double x, double y, double z);

  bool is_coplanar() const { return coplanar_; }
  double angle() const;  // [0, 2pi); coplanar only
  const std::array<double, 3>& vec() const { return v_; }

 private:
  Direction() = default;
  bool coplanar_ = true;
  double angle_ = 0.0;
  std::array<double, 3> v_{1.0, 0.0, 0.0};
};

// Angle between two directions, in [0, pi].
double relative_angle(const Direction& a, const Direction& b);

// The experiment's named orientation list. Settings are indices into it.
class DirectionSet {
 public:
  DirectionSet() = default;
  DirectionSet(std::vector<std::string> names, std::vector<Direction> dirs);

  int size() const { return static_cast<int>(dirs_.size()); }
  const Direction& dir(int i) const { return dirs_.at(i); }
  const std::string& name(int i) const { return names_.at(i); }
  const std::vector<std::string>& names() const { return names_; }
  std::optional<int> index_of(const std::string& name) const;
  bool all_coplanar() const;

 private:
  std::vector<std::string> names_;
  std::vector<Direction> dirs_;
};

// Canonical three-direction defaults: equal half-angle steps produce the
// classic violation point n = (0.0732, 0.0732, 0.25).
DirectionSet default_triple(double step = kPi / 4.0);

// ---------------------------------------------------------------------------
// Trial records

// Hidden state attached to a trial by models that have one. `counterfactual`
// holds detector-1's would-be outcome at every direction in the set;
// detector-2's counterfactuals are the negations (perfect anti-correlation
// at equal settings). `family` is "uniform" for setting-independent sources
// or the setting-pair name for selection-correlated ones.
struct HiddenTrace {
  std::vector<double> lambda;
  std::string family;
  std::vector<Outcome> counterfactual;

  Outcome partner_counterfactual(int direction) const {
    return negate(counterfactual.at(direction));
  }
};

struct PairRecord {
  std::int64_t m = 0;  // 1-based trial index
  int setting1 = 0;
  int setting2 = 0;
  Outcome outcome1 = Outcome::Up;
  Outcome outcome2 = Outcome::Down;
  double t_emit = 0.0;
  double t_set1 = 0.0;
  double t_set2 = 0.0;
  std::optional<HiddenTrace> trace;
};

// Emission precedes the setting decisions only for causally ordered
// schedules; late choices are legal and merely flagged.
inline bool causal_ordered(const PairRecord& r) {
  return r.t_emit <= r.t_set1 && r.t_emit <= r.t_set2;
}

// ---------------------------------------------------------------------------
// Selection schedules

struct IidRandomSchedule {
  std::uint64_t seed = 0;
};

struct PeriodicSchedule {
  std::vector<std::pair<int, int>> pattern;  // cycled over trials
};

struct PresetSchedule {
  std::vector<std::pair<int, int>> assignments;  // one per trial
};

struct DelayedChoiceSchedule {
  double latency_s = 0.0;  // decision this long before the particle arrives
  std::uint64_t seed = 0;
};

using ScheduleStrategy =
    std::variant<IidRandomSchedule, PeriodicSchedule, PresetSchedule, DelayedChoiceSchedule>;

std::string schedule_kind(const ScheduleStrategy& s);

struct ScheduleEntry {
  int s1 = 0;
  int s2 = 0;
  double t_decide1 = 0.0;
  double t_decide2 = 0.0;
};

struct SelectionSchedule {
  std::string kind;
  std::vector<ScheduleEntry> entries;
};

// ---------------------------------------------------------------------------
// Count tables

// Unordered setting pair; lo <= hi. Outcome cells are attributed to the
// *directions*, not to which detector happened to report them.
struct PairKey {
  int lo = 0;
  int hi = 0;
  static PairKey make(int i, int j) { return i <= j ? PairKey{i, j} : PairKey{j, i}; }
  auto operator<=>(const PairKey&) const = default;
};

struct PairCells {
  std::int64_t uu = 0;  // + at lo, + at hi
  std::int64_t ud = 0;  // + at lo, - at hi
  std::int64_t du = 0;
  std::int64_t dd = 0;

  std::int64_t subtotal() const { return uu + ud + du + dd; }

  // Frequencies are per-pair (count / subtotal); empty pairs yield no data
  // rather than 0/0.
  std::optional<double> f_uu() const;
  std::optional<double> f_ud() const;
  std::optional<double> f_du() const;
  std::optional<double> f_dd() const;
  std::optional<double> expectation() const;  // E[o_lo * o_hi]
};

class CountTable {
 public:
  CountTable() = default;
  explicit CountTable(std::int64_t m_total) : m_total_(m_total) {}

  std::int64_t m_total() const { return m_total_; }
  void add(PairKey key, Outcome at_lo, Outcome at_hi);
  const PairCells* cells(PairKey key) const;  // nullptr when the pair never occurred
  const std::map<PairKey, PairCells>& all() const { return cells_; }

 private:
  std::int64_t m_total_ = 0;
  std::map<PairKey, PairCells> cells_;
};

CountTable tally(std::span<const PairRecord> records);

// ---------------------------------------------------------------------------
// Source models (construction specs; machinery lives in hv.hpp / qm.hpp)

struct DensitySpec {
  std::string kind;  // "uniform" | "point_mass" | "cap" | "mixture"
  std::vector<double> center;  // point_mass/cap: [angle] or [x, y, z]
  double halfwidth = 0.0;      // cap: angular radius, (0, pi]
  std::vector<double> weights;            // mixture
  std::vector<DensitySpec> components;    // mixture

  static DensitySpec uniform();
};

// One message per defect; empty means the density is well formed and
// normalizable for the given lambda space.
std::vector<std::string> validate_density(const DensitySpec& d, bool coplanar);

struct QmSource {};
struct DeterministicUniformSource {};
struct StochasticSource {
  DensitySpec density = DensitySpec::uniform();
};
struct SelectionCorrelatedSource {
  // Which per-pair outcome distribution the conspiracy reproduces.
  std::string target_kind = "qm";  // "qm" | "uniform_model" | "custom"
  // custom: cell probabilities (uu, ud, du, dd) per canonical pair.
  std::map<std::pair<int, int>, std::array<double, 4>> custom_targets;
};

using SourceSpec =
    std::variant<QmSource, DeterministicUniformSource, StochasticSource, SelectionCorrelatedSource>;

std::string source_kind(const SourceSpec& s);

// ---------------------------------------------------------------------------
// Experiment configuration

struct Geometry {
  std::array<double, 3> detector1{6.5, 0.0, 0.0};
  std::array<double, 3> detector2{-6.5, 0.0, 0.0};
  // Source sits at the origin.
};

double distance_from_origin(const std::array<double, 3>& p);
double distance_between(const std::array<double, 3>& a, const std::array<double, 3>& b);

struct ExperimentConfig {
  DirectionSet directions = default_triple();
  std::int64_t m_total = 0;
  SourceSpec source = QmSource{};
  ScheduleStrategy schedule = IidRandomSchedule{};
  Geometry geometry;
  double t_start = 0.0;
  double t_end = 1.0;
  double rate_hz = 1e6;  // emission rate
  bool poisson_emissions = false;
  double cadence_s = 0.2;      // sub-selection cadence for the spacetime audit
  bool natural_units = false;  // c = 1 in the spacetime audit
  std::uint64_t seed = 1;

  // Empty result means the config is usable; otherwise one message per defect.
  std::vector<std::string> validate() const;
};

}  // namespace bellsim
