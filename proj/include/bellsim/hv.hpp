#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bellsim/core.hpp"
#include "bellsim/rng.hpp"

// Hidden-variable sources. All of them share one fixed local rule: a
// detector's outcome depends only on its own direction and the emitted
// lambda, never on the remote setting. What distinguishes the models is how
// lambda is distributed, and for the selection-correlated one, on what the
// distribution is allowed to depend.

namespace bellsim {

// Detector-1 outcome: Up iff lambda lies in the closed half-space around the
// direction. Lambda is [angle] for coplanar models, [x, y, z] on the sphere.
// The argument list is the locality claim; keep it that way.
Outcome local_outcome(const Direction& d, std::span<const double> lambda);

// ---------------------------------------------------------------------------
// Circular arcs (used by the selection-correlated construction)

struct Arc {
  double start = 0.0;   // [0, 2pi)
  double length = 0.0;  // [0, 2pi]
};

using ArcSet = std::vector<Arc>;

ArcSet half_circle(double direction_angle, Outcome detector1_outcome);
ArcSet intersect(const ArcSet& a, const ArcSet& b);
double total_length(const ArcSet& s);
bool contains(const ArcSet& s, double angle);
double sample_point(const ArcSet& s, double u01);  // u in [0,1)

class HvModel {
 public:
  enum class Kind { DeterministicUniform, StochasticIndependent, SelectionCorrelated };

  static HvModel deterministic_uniform(const DirectionSet& dirs);
  static HvModel stochastic(const DirectionSet& dirs, const DensitySpec& density);
  // required_pairs: every canonical setting pair the schedule can produce.
  static HvModel selection_correlated(const DirectionSet& dirs,
                                      const SelectionCorrelatedSource& spec,
                                      const std::vector<PairKey>& required_pairs);
  // Dispatch from a config source spec. Throws on QmSource (no lambda there).
  static HvModel from_spec(const DirectionSet& dirs, const SourceSpec& spec,
                           const std::vector<PairKey>& schedule_pairs);

  Kind kind() const { return kind_; }
  bool setting_dependent() const { return kind_ == Kind::SelectionCorrelated; }

  // Setting-independent emission.
  HiddenTrace emit(Rng& rng) const;
  // Emission whose lambda density is conditioned on the selected pair.
  HiddenTrace emit_for(int s1, int s2, Rng& rng) const;

  // Target outcome-cell probabilities (uu, ud, du, dd) per canonical pair;
  // selection-correlated models only.
  const std::map<std::pair<int, int>, std::array<double, 4>>& targets() const {
    return targets_;
  }

 private:
  explicit HvModel(Kind kind, DirectionSet dirs) : kind_(kind), dirs_(std::move(dirs)) {}

  HiddenTrace trace_from_lambda(std::vector<double> lambda, std::string family) const;

  Kind kind_;
  DirectionSet dirs_;
  DensitySpec density_ = DensitySpec::uniform();
  // Per canonical pair: cell probabilities and the lambda arcs realizing
  // each cell under the local rule.
  std::map<std::pair<int, int>, std::array<double, 4>> targets_;
  std::map<std::pair<int, int>, std::array<ArcSet, 4>> regions_;
};

// Cell probabilities (uu, ud, du, dd) the *uniform* deterministic model
// produces at relative angle theta: same-sign cells theta/(2 pi) each.
std::array<double, 4> uniform_model_cells(double theta);

}  // namespace bellsim
