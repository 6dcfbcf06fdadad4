#include "bellsim/qm.hpp"

#include <cmath>

namespace bellsim {

namespace {

double reduce_angle(double theta) {
  theta = std::fmod(std::fabs(theta), kTwoPi);
  if (theta > kPi) theta = kTwoPi - theta;
  return theta;
}

}  // namespace

SingletPrediction singlet_joint(double theta) {
  SingletPrediction p;
  p.theta = reduce_angle(theta);
  const double s = std::sin(p.theta / 2.0);
  const double c = std::cos(p.theta / 2.0);
  p.p_uu = p.p_dd = 0.5 * s * s;
  p.p_ud = p.p_du = 0.5 * c * c;
  p.expectation = -std::cos(p.theta);
  return p;
}

std::pair<Outcome, Outcome> singlet_sample(double theta, Rng& rng) {
  const SingletPrediction p = singlet_joint(theta);
  const double u = rng.next_unit();
  if (u < p.p_uu) return {Outcome::Up, Outcome::Up};
  if (u < p.p_uu + p.p_ud) return {Outcome::Up, Outcome::Down};
  if (u < p.p_uu + p.p_ud + p.p_du) return {Outcome::Down, Outcome::Up};
  return {Outcome::Down, Outcome::Down};
}

double qm_bi_margin(double theta_ab, double theta_bc, double theta_ac) {
  const auto s2 = [](double t) {
    const double s = std::sin(reduce_angle(t) / 2.0);
    return s * s;
  };
  return s2(theta_ab) + s2(theta_bc) - s2(theta_ac);
}

}  // namespace bellsim
