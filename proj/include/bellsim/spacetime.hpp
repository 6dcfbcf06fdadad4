#pragma once

#include <array>
#include <cstdint>
#include <span>

#include "bellsim/core.hpp"

// Special-relativistic bookkeeping for the selection events: which choices
// of when and where to decide the settings keep the decisions outside the
// light cones of the opposite measurements.

namespace bellsim {

struct SpacetimeEvent {
  double t = 0.0;
  std::array<double, 3> x{};
};

// Signed interval c^2 dt^2 - |dx|^2; negative means spacelike separation.
double interval(const SpacetimeEvent& a, const SpacetimeEvent& b, double c = kSpeedOfLight);
bool is_spacelike(const SpacetimeEvent& a, const SpacetimeEvent& b, double c = kSpeedOfLight);

// Boost along the x axis with velocity beta * c (|beta| < 1).
SpacetimeEvent boosted(const SpacetimeEvent& e, double beta, double c = kSpeedOfLight);

// Latest pre-arrival margin for choosing a setting so the choice stays
// spacelike from the opposite measurement: strictly less than 2|x|/c.
double delayed_choice_deadline(double source_detector_distance, double c = kSpeedOfLight);

// Detector separation 2|x| needed so selections fixed at the start of a run
// stay spacelike from every opposite measurement through the run: c * duration.
double preset_separation_bound(double duration_s, double c = kSpeedOfLight);

// Largest region and latest decision time compatible with choosing once,
// in advance, for a run on [t_start, t_end]: a decision at tau_max reaches
// at most l_max by the end of the run window it must miss.
struct LocalityWindow {
  double tau_max = 0.0;  // (3 t_end + t_start) / 4
  double l_max = 0.0;    // (3/4) c (t_end - t_start)
};
LocalityWindow qm_locality_window(double t_start, double t_end, double c = kSpeedOfLight);

struct GeometryReport {
  double c = kSpeedOfLight;
  double detector_separation_m = 0.0;
  double max_source_detector_distance_m = 0.0;
  double deadline_s = 0.0;                  // delayed_choice_deadline for this geometry
  double separation_required_m = 0.0;       // preset_separation_bound for this duration
  double cadence_separation_required_m = 0.0;
  LocalityWindow window;

  // Exact per-event verdicts (true = every pair spacelike) with the worst
  // (largest) interval encountered; the formula bounds above are reported
  // alongside, never substituted.
  bool last_instant_spacelike = false;   // scheduled decisions vs opposite measurements
  double worst_last_instant = 0.0;
  bool preset_spacelike = false;         // start-of-run decisions vs opposite measurements
  double worst_preset = 0.0;
  bool cadence_spacelike = false;        // block-start decisions vs opposite measurements
  double worst_cadence = 0.0;

  // Trials whose settings were already decided when the pair left the
  // source (flagged, not forbidden: this is the conspiracy window).
  std::int64_t settings_known_at_emission = 0;
};

GeometryReport audit_geometry(const ExperimentConfig& cfg, const SelectionSchedule& schedule,
                              std::span<const double> t_emit);

}  // namespace bellsim
