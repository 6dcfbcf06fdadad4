#include "bellsim/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>
#include <thread>

#include "bellsim/hv.hpp"
#include "bellsim/qm.hpp"
#include "bellsim/rng.hpp"

namespace bellsim {

namespace {

// Default selection menu: the three cyclic pairs of the first three
// directions (all distinct pairs when there are exactly three).
std::vector<std::pair<int, int>> selection_menu(const DirectionSet& dirs) {
  if (dirs.size() >= 3) return {{0, 1}, {1, 2}, {0, 2}};
  return {{0, 1}};
}

std::uint64_t effective_seed(std::uint64_t strategy_seed, std::uint64_t config_seed) {
  return strategy_seed != 0 ? strategy_seed : config_seed;
}

}  // namespace

std::vector<double> emission_times(const ExperimentConfig& cfg) {
  std::vector<double> t(cfg.m_total);
  if (!cfg.poisson_emissions) {
    for (std::int64_t m = 0; m < cfg.m_total; ++m)
      t[m] = cfg.t_start + static_cast<double>(m) / cfg.rate_hz;
    return t;
  }
  Rng rng(derive_seed(cfg.seed, kStreamEmission, 0));
  double now = cfg.t_start;
  for (std::int64_t m = 0; m < cfg.m_total; ++m) {
    const double u = rng.next_unit();
    now += -std::log1p(-u) / cfg.rate_hz;
    t[m] = now;
  }
  return t;
}

SelectionSchedule generate_schedule(const ExperimentConfig& cfg,
                                    std::span<const double> t_emit) {
  SelectionSchedule out;
  out.kind = schedule_kind(cfg.schedule);
  out.entries.resize(cfg.m_total);

  const auto menu = selection_menu(cfg.directions);
  const double flight1 = distance_from_origin(cfg.geometry.detector1) / kSpeedOfLight;
  const double flight2 = distance_from_origin(cfg.geometry.detector2) / kSpeedOfLight;

  for (std::int64_t m = 0; m < cfg.m_total; ++m) {
    ScheduleEntry& e = out.entries[m];
    if (const auto* iid = std::get_if<IidRandomSchedule>(&cfg.schedule)) {
      Rng rng(derive_seed(effective_seed(iid->seed, cfg.seed), kStreamSchedule, m));
      const auto& p = menu[rng.next_below(menu.size())];
      e = {p.first, p.second, cfg.t_start, cfg.t_start};
    } else if (const auto* per = std::get_if<PeriodicSchedule>(&cfg.schedule)) {
      const auto& p = per->pattern[m % per->pattern.size()];
      e = {p.first, p.second, cfg.t_start, cfg.t_start};
    } else if (const auto* pre = std::get_if<PresetSchedule>(&cfg.schedule)) {
      const auto& p = pre->assignments[m];
      e = {p.first, p.second, cfg.t_start, cfg.t_start};
    } else {
      const auto& dc = std::get<DelayedChoiceSchedule>(cfg.schedule);
      Rng rng(derive_seed(effective_seed(dc.seed, cfg.seed), kStreamSchedule, m));
      const auto& p = menu[rng.next_below(menu.size())];
      e.s1 = p.first;
      e.s2 = p.second;
      e.t_decide1 = t_emit[m] + flight1 - dc.latency_s;
      e.t_decide2 = t_emit[m] + flight2 - dc.latency_s;
    }
  }
  return out;
}

SelectionSchedule generate_schedule(const ExperimentConfig& cfg) {
  const auto t = emission_times(cfg);
  return generate_schedule(cfg, t);
}

std::vector<PairKey> schedule_pairs(const ExperimentConfig& cfg) {
  std::set<PairKey> keys;
  if (const auto* per = std::get_if<PeriodicSchedule>(&cfg.schedule)) {
    for (const auto& [i, j] : per->pattern) keys.insert(PairKey::make(i, j));
  } else if (const auto* pre = std::get_if<PresetSchedule>(&cfg.schedule)) {
    for (const auto& [i, j] : pre->assignments) keys.insert(PairKey::make(i, j));
  } else {
    for (const auto& [i, j] : selection_menu(cfg.directions)) keys.insert(PairKey::make(i, j));
  }
  return {keys.begin(), keys.end()};
}

RunResult run(const ExperimentConfig& cfg, int threads) {
  const auto defects = cfg.validate();
  if (!defects.empty()) {
    std::string msg = "config rejected:";
    for (const auto& d : defects) msg += "\n  - " + d;
    throw ConfigError(msg);
  }
  if (threads < 1) threads = 1;

  const auto start = std::chrono::steady_clock::now();
  const auto t_emit = emission_times(cfg);
  SelectionSchedule schedule = generate_schedule(cfg, t_emit);

  const bool quantum = std::holds_alternative<QmSource>(cfg.source);
  std::optional<HvModel> model;
  if (!quantum) model.emplace(HvModel::from_spec(cfg.directions, cfg.source, schedule_pairs(cfg)));

  std::vector<PairRecord> records(cfg.m_total);
  auto worker = [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t m = lo; m < hi; ++m) {
      const ScheduleEntry& e = schedule.entries[m];
      Rng rng(derive_seed(cfg.seed, kStreamSource, m));
      PairRecord& r = records[m];
      r.m = m + 1;
      r.setting1 = e.s1;
      r.setting2 = e.s2;
      r.t_emit = t_emit[m];
      r.t_set1 = e.t_decide1;
      r.t_set2 = e.t_decide2;
      if (quantum) {
        const double theta =
            relative_angle(cfg.directions.dir(e.s1), cfg.directions.dir(e.s2));
        const auto [o1, o2] = singlet_sample(theta, rng);
        r.outcome1 = o1;
        r.outcome2 = o2;
      } else {
        HiddenTrace trace = model->setting_dependent() ? model->emit_for(e.s1, e.s2, rng)
                                                       : model->emit(rng);
        r.outcome1 = trace.counterfactual[e.s1];
        r.outcome2 = trace.partner_counterfactual(e.s2);
        r.trace = std::move(trace);
      }
    }
  };

  if (threads == 1) {
    worker(0, cfg.m_total);
  } else {
    std::vector<std::thread> pool;
    const std::int64_t chunk = (cfg.m_total + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const std::int64_t lo = t * chunk;
      const std::int64_t hi = std::min<std::int64_t>(cfg.m_total, lo + chunk);
      if (lo < hi) pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  RunResult result;
  result.records = std::move(records);
  result.schedule = std::move(schedule);
  result.threads = threads;
  result.wallclock_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace bellsim
