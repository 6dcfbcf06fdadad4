#include "bellsim/spacetime.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bellsim {

double interval(const SpacetimeEvent& a, const SpacetimeEvent& b, double c) {
  const double dt = a.t - b.t;
  const double dx = distance_between(a.x, b.x);
  return c * c * dt * dt - dx * dx;
}

bool is_spacelike(const SpacetimeEvent& a, const SpacetimeEvent& b, double c) {
  return interval(a, b, c) < 0.0;
}

SpacetimeEvent boosted(const SpacetimeEvent& e, double beta, double c) {
  const double gamma = 1.0 / std::sqrt(1.0 - beta * beta);
  SpacetimeEvent out = e;
  const double ct = c * e.t;
  out.t = gamma * (ct - beta * e.x[0]) / c;
  out.x[0] = gamma * (e.x[0] - beta * ct);
  return out;
}

double delayed_choice_deadline(double source_detector_distance, double c) {
  return 2.0 * source_detector_distance / c;
}

double preset_separation_bound(double duration_s, double c) { return c * duration_s; }

LocalityWindow qm_locality_window(double t_start, double t_end, double c) {
  LocalityWindow w;
  w.tau_max = (3.0 * t_end + t_start) / 4.0;
  w.l_max = 0.75 * c * (t_end - t_start);
  return w;
}

GeometryReport audit_geometry(const ExperimentConfig& cfg, const SelectionSchedule& schedule,
                              std::span<const double> t_emit) {
  GeometryReport rep;
  rep.c = cfg.natural_units ? 1.0 : kSpeedOfLight;
  const double c = rep.c;

  const auto& d1 = cfg.geometry.detector1;
  const auto& d2 = cfg.geometry.detector2;
  rep.detector_separation_m = distance_between(d1, d2);
  rep.max_source_detector_distance_m =
      std::max(distance_from_origin(d1), distance_from_origin(d2));
  rep.deadline_s = delayed_choice_deadline(rep.max_source_detector_distance_m, c);
  rep.separation_required_m = preset_separation_bound(cfg.t_end - cfg.t_start, c);
  rep.cadence_separation_required_m = preset_separation_bound(cfg.cadence_s, c);
  rep.window = qm_locality_window(cfg.t_start, cfg.t_end, c);

  const double flight1 = distance_from_origin(d1) / c;
  const double flight2 = distance_from_origin(d2) / c;

  double worst_last = -std::numeric_limits<double>::infinity();
  double worst_preset = worst_last;
  double worst_cadence = worst_last;

  for (std::size_t m = 0; m < schedule.entries.size(); ++m) {
    const ScheduleEntry& e = schedule.entries[m];
    const SpacetimeEvent meas1{t_emit[m] + flight1, d1};
    const SpacetimeEvent meas2{t_emit[m] + flight2, d2};

    // Scheduled decisions against the opposite measurements.
    worst_last = std::max({worst_last, interval({e.t_decide1, d1}, meas2, c),
                           interval({e.t_decide2, d2}, meas1, c)});

    // Had the selections been fixed at the start of the run.
    worst_preset = std::max({worst_preset, interval({cfg.t_start, d1}, meas2, c),
                             interval({cfg.t_start, d2}, meas1, c)});

    // Had they been re-drawn at the sub-selection cadence.
    const double block_start =
        cfg.t_start + std::floor((t_emit[m] - cfg.t_start) / cfg.cadence_s) * cfg.cadence_s;
    worst_cadence = std::max({worst_cadence, interval({block_start, d1}, meas2, c),
                              interval({block_start, d2}, meas1, c)});

    if (std::min(e.t_decide1, e.t_decide2) < t_emit[m]) ++rep.settings_known_at_emission;
  }

  rep.worst_last_instant = worst_last;
  rep.worst_preset = worst_preset;
  rep.worst_cadence = worst_cadence;
  rep.last_instant_spacelike = worst_last < 0.0;
  rep.preset_spacelike = worst_preset < 0.0;
  rep.cadence_spacelike = worst_cadence < 0.0;
  return rep;
}

}  // namespace bellsim
