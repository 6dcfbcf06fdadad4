#pragma once

#include <span>
#include <vector>

#include "bellsim/core.hpp"

// Turns a config into trial records. Every per-trial random quantity is
// drawn from a stream derived from (config seed, stream tag, trial index),
// so the records are identical for any thread count.

namespace bellsim {

struct RunResult {
  std::vector<PairRecord> records;
  SelectionSchedule schedule;
  double wallclock_s = 0.0;
  int threads = 1;
};

// Emission times for trials 1..m_total. Uniform spacing at rate_hz from
// t_start, or cumulative exponential gaps when poisson_emissions is set.
std::vector<double> emission_times(const ExperimentConfig& cfg);

SelectionSchedule generate_schedule(const ExperimentConfig& cfg,
                                    std::span<const double> t_emit);
SelectionSchedule generate_schedule(const ExperimentConfig& cfg);

// Canonical setting pairs a schedule can produce.
std::vector<PairKey> schedule_pairs(const ExperimentConfig& cfg);

RunResult run(const ExperimentConfig& cfg, int threads = 1);

}  // namespace bellsim
