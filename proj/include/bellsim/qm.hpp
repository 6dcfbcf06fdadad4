#pragma once

#include <utility>

#include "bellsim/core.hpp"
#include "bellsim/rng.hpp"

// Quantum predictions for the spin-1/2 singlet pair. Angles follow the
// half-angle convention throughout: the joint ++ probability at relative
// detector angle theta is (1/2) sin^2(theta/2).

namespace bellsim {

struct SingletPrediction {
  double theta = 0.0;  // reduced to [0, pi]
  double p_uu = 0.0;
  double p_ud = 0.0;
  double p_du = 0.0;
  double p_dd = 0.0;
  double expectation = 0.0;  // -cos(theta)
};

SingletPrediction singlet_joint(double theta);

// One paired draw from the singlet joint distribution at relative angle
// theta. First element is the outcome at the first direction.
std::pair<Outcome, Outcome> singlet_sample(double theta, Rng& rng);

// Count-form inequality margin predicted by the singlet state:
//   sin^2(t_ab/2) + sin^2(t_bc/2) - sin^2(t_ac/2).
// Negative means the inequality is violated at those angles.
double qm_bi_margin(double theta_ab, double theta_bc, double theta_ac);

}  // namespace bellsim
