#include "bellsim/hv.hpp"

#include <algorithm>
#include <cmath>

#include "bellsim/qm.hpp"

namespace bellsim {

namespace {

double wrap(double a) {
  a = std::fmod(a, kTwoPi);
  if (a < 0) a += kTwoPi;
  return a;
}

const char* kCellNames[4] = {"uu", "ud", "du", "dd"};

}  // namespace

Outcome local_outcome(const Direction& d, std::span<const double> lambda) {
  double dot;
  if (lambda.size() == 1) {
    dot = std::cos(d.angle() - lambda[0]);
  } else if (lambda.size() == 3) {
    const auto& v = d.vec();
    dot = v[0] * lambda[0] + v[1] * lambda[1] + v[2] * lambda[2];
  } else {
    throw std::logic_error("lambda must have 1 (angle) or 3 (vector) components");
  }
  return dot >= 0.0 ? Outcome::Up : Outcome::Down;
}

// ---------------------------------------------------------------------------
// Arcs

ArcSet half_circle(double direction_angle, Outcome detector1_outcome) {
  const double shift = detector1_outcome == Outcome::Up ? -kPi / 2.0 : kPi / 2.0;
  return {Arc{wrap(direction_angle + shift), kPi}};
}

ArcSet intersect(const ArcSet& a, const ArcSet& b) {
  ArcSet out;
  for (const Arc& x : a) {
    for (const Arc& y : b) {
      // Unroll y onto the line around x and clip.
      for (int k = -1; k <= 1; ++k) {
        const double lo = std::max(x.start, y.start + k * kTwoPi);
        const double hi = std::min(x.start + x.length, y.start + y.length + k * kTwoPi);
        if (hi - lo > 1e-15) out.push_back(Arc{wrap(lo), hi - lo});
      }
    }
  }
  return out;
}

double total_length(const ArcSet& s) {
  double sum = 0.0;
  for (const Arc& a : s) sum += a.length;
  return sum;
}

bool contains(const ArcSet& s, double angle) {
  for (const Arc& a : s)
    if (wrap(angle - a.start) <= a.length) return true;
  return false;
}

double sample_point(const ArcSet& s, double u01) {
  double remaining = u01 * total_length(s);
  for (const Arc& a : s) {
    if (remaining < a.length) return wrap(a.start + remaining);
    remaining -= a.length;
  }
  // u01 == 1 - epsilon rounding; land at the end of the last arc.
  const Arc& last = s.back();
  return wrap(last.start + last.length);
}

std::array<double, 4> uniform_model_cells(double theta) {
  const double same = theta / kTwoPi;
  const double mixed = (kPi - theta) / kTwoPi;
  return {same, mixed, mixed, same};
}

// ---------------------------------------------------------------------------
// Model construction

HvModel HvModel::deterministic_uniform(const DirectionSet& dirs) {
  return HvModel(Kind::DeterministicUniform, dirs);
}

HvModel HvModel::stochastic(const DirectionSet& dirs, const DensitySpec& density) {
  const auto defects = validate_density(density, dirs.all_coplanar());
  if (!defects.empty()) throw ConfigError("bad density: " + defects.front());
  HvModel m(Kind::StochasticIndependent, dirs);
  m.density_ = density;
  return m;
}

HvModel HvModel::selection_correlated(const DirectionSet& dirs,
                                      const SelectionCorrelatedSource& spec,
                                      const std::vector<PairKey>& required_pairs) {
  if (!dirs.all_coplanar())
    throw ConfigError("selection-correlated model requires coplanar directions");

  HvModel m(Kind::SelectionCorrelated, dirs);
  for (const PairKey& key : required_pairs) {
    const std::pair<int, int> k{key.lo, key.hi};
    if (m.targets_.count(k)) continue;

    std::array<double, 4> cells{};
    const double theta = relative_angle(dirs.dir(key.lo), dirs.dir(key.hi));
    if (spec.target_kind == "qm") {
      const SingletPrediction p = singlet_joint(theta);
      cells = {p.p_uu, p.p_ud, p.p_du, p.p_dd};
    } else if (spec.target_kind == "uniform_model") {
      cells = uniform_model_cells(theta);
    } else if (spec.target_kind == "custom") {
      auto it = spec.custom_targets.find(k);
      if (it == spec.custom_targets.end())
        throw ConfigError("custom targets missing pair " + dirs.name(key.lo) + "-" +
                          dirs.name(key.hi));
      cells = it->second;
    } else {
      throw ConfigError("unknown target kind '" + spec.target_kind + "'");
    }

    double sum = 0.0;
    for (double& p : cells) {
      if (p < -1e-12)
        throw ConfigError("negative target cell for pair " + dirs.name(key.lo) + "-" +
                          dirs.name(key.hi));
      p = std::max(p, 0.0);
      sum += p;
    }
    if (std::fabs(sum - 1.0) > 1e-9)
      throw ConfigError("target cells for pair " + dirs.name(key.lo) + "-" +
                        dirs.name(key.hi) + " sum to " + std::to_string(sum));

    // Outcome cell (o1, o2) happens exactly when detector-1's counterfactuals
    // are (v_lo, v_hi) = (o1, not o2); precompute the lambda arcs for each.
    const double a_lo = dirs.dir(key.lo).angle();
    const double a_hi = dirs.dir(key.hi).angle();
    const std::array<std::pair<Outcome, Outcome>, 4> patterns = {
        std::pair{Outcome::Up, Outcome::Down}, {Outcome::Up, Outcome::Up},
        std::pair{Outcome::Down, Outcome::Down}, {Outcome::Down, Outcome::Up}};
    std::array<ArcSet, 4> regions;
    for (int c = 0; c < 4; ++c) {
      regions[c] =
          intersect(half_circle(a_lo, patterns[c].first), half_circle(a_hi, patterns[c].second));
      if (cells[c] > 1e-12 && total_length(regions[c]) < 1e-9)
        throw ConfigError("target for pair " + dirs.name(key.lo) + "-" + dirs.name(key.hi) +
                          " puts weight " + std::to_string(cells[c]) + " on cell " +
                          kCellNames[c] + ", which no lambda reproduces under the local rule");
    }
    m.targets_[k] = cells;
    m.regions_[k] = regions;
  }
  return m;
}

HvModel HvModel::from_spec(const DirectionSet& dirs, const SourceSpec& spec,
                           const std::vector<PairKey>& schedule_pairs) {
  if (std::holds_alternative<QmSource>(spec))
    throw std::logic_error("qm source has no hidden-variable model");
  if (std::holds_alternative<DeterministicUniformSource>(spec))
    return deterministic_uniform(dirs);
  if (const auto* s = std::get_if<StochasticSource>(&spec)) return stochastic(dirs, s->density);
  return selection_correlated(dirs, std::get<SelectionCorrelatedSource>(spec), schedule_pairs);
}

// ---------------------------------------------------------------------------
// Emission

namespace {

double sample_circle_density(const DensitySpec& d, Rng& rng) {
  if (d.kind == "uniform") return rng.next_unit() * kTwoPi;
  if (d.kind == "point_mass") return wrap(d.center[0]);
  if (d.kind == "cap") return wrap(d.center[0] + (2.0 * rng.next_unit() - 1.0) * d.halfwidth);
  // mixture
  const double u = rng.next_unit();
  double acc = 0.0;
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    acc += d.weights[i];
    if (u < acc || i + 1 == d.weights.size()) return sample_circle_density(d.components[i], rng);
  }
  return sample_circle_density(d.components.back(), rng);
}

std::array<double, 3> rotate_z_to(const std::array<double, 3>& c,
                                  const std::array<double, 3>& v) {
  if (c[2] > 1.0 - 1e-12) return v;
  if (c[2] < -1.0 + 1e-12) return {v[0], -v[1], -v[2]};
  const double s = std::sqrt(c[0] * c[0] + c[1] * c[1]);
  const std::array<double, 3> k{-c[1] / s, c[0] / s, 0.0};
  const double cosA = c[2], sinA = s;
  const std::array<double, 3> kxv{k[1] * v[2] - k[2] * v[1], k[2] * v[0] - k[0] * v[2],
                                  k[0] * v[1] - k[1] * v[0]};
  const double kdv = k[0] * v[0] + k[1] * v[1] + k[2] * v[2];
  std::array<double, 3> out;
  for (int i = 0; i < 3; ++i)
    out[i] = v[i] * cosA + kxv[i] * sinA + k[i] * kdv * (1.0 - cosA);
  return out;
}

std::array<double, 3> uniform_sphere(Rng& rng) {
  const double z = 1.0 - 2.0 * rng.next_unit();
  const double az = rng.next_unit() * kTwoPi;
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(az), r * std::sin(az), z};
}

std::array<double, 3> sample_sphere_density(const DensitySpec& d, Rng& rng) {
  if (d.kind == "uniform") return uniform_sphere(rng);
  if (d.kind == "point_mass") {
    const double n =
        distance_from_origin({d.center[0], d.center[1], d.center[2]});
    return {d.center[0] / n, d.center[1] / n, d.center[2] / n};
  }
  if (d.kind == "cap") {
    // Area-uniform on the cap of angular radius halfwidth around center.
    const double z = 1.0 - rng.next_unit() * (1.0 - std::cos(d.halfwidth));
    const double az = rng.next_unit() * kTwoPi;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const std::array<double, 3> v{r * std::cos(az), r * std::sin(az), z};
    const double n = distance_from_origin({d.center[0], d.center[1], d.center[2]});
    return rotate_z_to({d.center[0] / n, d.center[1] / n, d.center[2] / n}, v);
  }
  const double u = rng.next_unit();
  double acc = 0.0;
  for (std::size_t i = 0; i < d.weights.size(); ++i) {
    acc += d.weights[i];
    if (u < acc || i + 1 == d.weights.size()) return sample_sphere_density(d.components[i], rng);
  }
  return sample_sphere_density(d.components.back(), rng);
}

}  // namespace

HiddenTrace HvModel::trace_from_lambda(std::vector<double> lambda, std::string family) const {
  HiddenTrace t;
  t.lambda = std::move(lambda);
  t.family = std::move(family);
  t.counterfactual.reserve(dirs_.size());
  for (int i = 0; i < dirs_.size(); ++i)
    t.counterfactual.push_back(local_outcome(dirs_.dir(i), t.lambda));
  return t;
}

HiddenTrace HvModel::emit(Rng& rng) const {
  if (kind_ == Kind::SelectionCorrelated)
    throw std::logic_error("selection-correlated source needs the selected pair");
  const bool coplanar = dirs_.all_coplanar();
  if (kind_ == Kind::DeterministicUniform) {
    if (coplanar) return trace_from_lambda({rng.next_unit() * kTwoPi}, "uniform");
    const auto v = uniform_sphere(rng);
    return trace_from_lambda({v[0], v[1], v[2]}, "uniform");
  }
  if (coplanar) return trace_from_lambda({sample_circle_density(density_, rng)}, "uniform");
  const auto v = sample_sphere_density(density_, rng);
  return trace_from_lambda({v[0], v[1], v[2]}, "uniform");
}

HiddenTrace HvModel::emit_for(int s1, int s2, Rng& rng) const {
  if (kind_ != Kind::SelectionCorrelated) return emit(rng);

  const PairKey key = PairKey::make(s1, s2);
  const auto t_it = targets_.find({key.lo, key.hi});
  if (t_it == targets_.end())
    throw std::logic_error("selection-correlated model was not prepared for this pair");
  const auto& cells = t_it->second;
  const auto& regions = regions_.at({key.lo, key.hi});

  const double u = rng.next_unit();
  int cell = 3;
  double acc = 0.0;
  for (int c = 0; c < 4; ++c) {
    acc += cells[c];
    if (u < acc) {
      cell = c;
      break;
    }
  }
  // Ties or rounding can select an unrealizable zero-probability cell; walk
  // to the nearest realizable one.
  while (total_length(regions[cell]) < 1e-9) cell = (cell + 1) % 4;

  const double phi = sample_point(regions[cell], rng.next_unit());
  return trace_from_lambda({phi}, dirs_.name(key.lo) + "-" + dirs_.name(key.hi));
}

}  // namespace bellsim
