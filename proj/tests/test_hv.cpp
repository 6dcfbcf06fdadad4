#include <doctest.h>

#include <cmath>
#include <map>

#include "bellsim/hv.hpp"
#include "bellsim/rng.hpp"

using namespace bellsim;

TEST_CASE("local rule: closed half-space around the direction") {
  const Direction d0 = Direction::coplanar(0.0);
  CHECK(local_outcome(d0, std::array{0.1}) == Outcome::Up);
  CHECK(local_outcome(d0, std::array{2.0}) == Outcome::Down);
  CHECK(local_outcome(d0, std::array{-0.4}) == Outcome::Up);

  const Direction ex = Direction::spatial(1, 0, 0);
  CHECK(local_outcome(ex, std::array{0.0, 1.0, 0.0}) == Outcome::Up);  // dot == 0: Up
  CHECK(local_outcome(ex, std::array{-1.0, 0.0, 0.0}) == Outcome::Down);
  CHECK_THROWS_AS(local_outcome(ex, std::array{1.0, 2.0}), std::logic_error);
}

TEST_CASE("half circles contain the direction and exclude its antipode") {
  const ArcSet up = half_circle(1.2, Outcome::Up);
  CHECK(total_length(up) == doctest::Approx(kPi));
  CHECK(contains(up, 1.2));
  CHECK_FALSE(contains(up, 1.2 + kPi + 0.01));
  CHECK(contains(up, 1.2 + kPi / 2));  // boundary is closed
  const ArcSet down = half_circle(1.2, Outcome::Down);
  CHECK(contains(down, 1.2 + kPi));
  CHECK_FALSE(contains(down, 1.2));
}

TEST_CASE("intersection lengths follow the relative angle") {
  // Same outcome: pi - theta. Opposite outcomes: theta.
  for (const double theta : {0.3, 0.7, 1.4, 2.8}) {
    CHECK(total_length(intersect(half_circle(0, Outcome::Up), half_circle(theta, Outcome::Up))) ==
          doctest::Approx(kPi - theta).epsilon(1e-12));
    CHECK(total_length(intersect(half_circle(0, Outcome::Up), half_circle(theta, Outcome::Down))) ==
          doctest::Approx(theta).epsilon(1e-12));
  }
  // Wrap-around: directions at 0.2 and 6.0 are 2 pi - 5.8 apart.
  const double gap = kTwoPi - 5.8;
  CHECK(total_length(intersect(half_circle(0.2, Outcome::Up), half_circle(6.0, Outcome::Up))) ==
        doctest::Approx(kPi - gap).epsilon(1e-12));
}

TEST_CASE("sampled points always land inside the region") {
  const ArcSet region = intersect(half_circle(1.3, Outcome::Up), half_circle(2.1, Outcome::Up));
  Rng rng(11);
  double lo = kTwoPi, hi = 0.0;
  for (int i = 0; i < 2000; ++i) {
    const double phi = sample_point(region, rng.next_unit());
    CHECK(contains(region, phi));
    lo = std::min(lo, phi);
    hi = std::max(hi, phi);
  }
  // Coverage: the draws spread over most of the pi - 0.8 wide region.
  CHECK(hi - lo > 0.9 * (kPi - 0.8));
  // u = 0 lands on the region's start: the Up half-circle edge of the later direction.
  CHECK(sample_point(region, 0.0) == doctest::Approx(2.1 - kPi / 2));
}

TEST_CASE("uniform model cell probabilities") {
  const auto c = uniform_model_cells(kPi / 4);
  CHECK(c[0] == doctest::Approx(0.125));
  CHECK(c[1] == doctest::Approx(0.375));
  CHECK(c[2] == doctest::Approx(0.375));
  CHECK(c[3] == doctest::Approx(0.125));
  const auto z = uniform_model_cells(0.0);
  CHECK(z[0] == 0.0);
  CHECK(z[1] == doctest::Approx(0.5));
}

TEST_CASE("deterministic uniform model reproduces theta / 2 pi coincidences") {
  const DirectionSet dirs = default_triple();  // 0, pi/4, pi/2
  const HvModel model = HvModel::deterministic_uniform(dirs);
  const int n = 100000;
  Rng rng(31);
  int ab = 0, ac = 0;
  for (int i = 0; i < n; ++i) {
    const HiddenTrace t = model.emit(rng);
    REQUIRE(t.lambda.size() == 1);
    CHECK(t.family == "uniform");
    // n(x+;y+): particle 1 passes at x, particle 2 passes at y (= cf_y Down).
    if (t.counterfactual[0] == Outcome::Up && t.counterfactual[1] == Outcome::Down) ++ab;
    if (t.counterfactual[0] == Outcome::Up && t.counterfactual[2] == Outcome::Down) ++ac;
  }
  const auto close = [&](int count, double prob) {
    return std::abs(static_cast<double>(count) / n - prob) <=
           4 * std::sqrt(prob * (1 - prob) / n);
  };
  CHECK(close(ab, (kPi / 4) / kTwoPi));
  CHECK(close(ac, (kPi / 2) / kTwoPi));
}

TEST_CASE("uniform model expectation matches midpoint quadrature of the local rule") {
  // Independent oracle: E(theta) = mean over lambda of o1(0) * o2(theta),
  // o2 = -o1(theta), integrated directly; closed form -1 + 2 theta / pi.
  for (const double theta : {0.4, 0.9, kPi / 2, 2.5}) {
    const Direction da = Direction::coplanar(0.0);
    const Direction db = Direction::coplanar(theta);
    const int n = 400000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double lambda = (i + 0.5) * kTwoPi / n;
      const int o1 = outcome_value(local_outcome(da, std::array{lambda}));
      const int o2 = -outcome_value(local_outcome(db, std::array{lambda}));
      sum += o1 * o2;
    }
    CHECK(sum / n == doctest::Approx(-1.0 + 2.0 * theta / kPi).epsilon(1e-4));
  }
}

TEST_CASE("uniform sphere density gives the same coincidence law as the circle") {
  const DirectionSet dirs({"A", "B"},
                          {Direction::spatial(1, 0, 0), Direction::spatial(0.5, std::sqrt(3) / 2, 0)});
  REQUIRE_FALSE(dirs.all_coplanar());  // spatial type forces 3D lambda
  const HvModel model = HvModel::stochastic(dirs, DensitySpec::uniform());
  const int n = 150000;
  Rng rng(47);
  int ab = 0;
  for (int i = 0; i < n; ++i) {
    const HiddenTrace t = model.emit(rng);
    REQUIRE(t.lambda.size() == 3);
    const double norm = std::hypot(t.lambda[0], t.lambda[1], t.lambda[2]);
    CHECK(norm == doctest::Approx(1.0).epsilon(1e-9));
    if (t.counterfactual[0] == Outcome::Up && t.counterfactual[1] == Outcome::Down) ++ab;
  }
  const double prob = (kPi / 3) / kTwoPi;  // theta / 2 pi again
  CHECK(std::abs(static_cast<double>(ab) / n - prob) <= 4 * std::sqrt(prob * (1 - prob) / n));
}

TEST_CASE("point mass and cap densities confine lambda") {
  const DirectionSet dirs = default_triple();

  DensitySpec pm;
  pm.kind = "point_mass";
  pm.center = {0.3};
  const HvModel mp = HvModel::stochastic(dirs, pm);
  Rng rng(3);
  for (int i = 0; i < 100; ++i) CHECK(mp.emit(rng).lambda[0] == doctest::Approx(0.3));

  DensitySpec cap;
  cap.kind = "cap";
  cap.center = {1.0};
  cap.halfwidth = 0.5;
  const HvModel mc = HvModel::stochastic(dirs, cap);
  double mean = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double l = mc.emit(rng).lambda[0];
    CHECK(l >= 0.5 - 1e-12);
    CHECK(l <= 1.5 + 1e-12);
    mean += l;
  }
  CHECK(mean / n == doctest::Approx(1.0).epsilon(0.01));
}

TEST_CASE("mixture densities split draws by weight") {
  const DirectionSet dirs = default_triple();
  DensitySpec low, high;
  low.kind = "cap";
  low.center = {0.0};
  low.halfwidth = 0.1;
  high.kind = "cap";
  high.center = {kPi};
  high.halfwidth = 0.1;
  DensitySpec mix;
  mix.kind = "mixture";
  mix.weights = {0.3, 0.7};
  mix.components = {low, high};
  const HvModel m = HvModel::stochastic(dirs, mix);
  Rng rng(13);
  const int n = 50000;
  int near_pi = 0;
  for (int i = 0; i < n; ++i) {
    const double l = m.emit(rng).lambda[0];
    const bool in_low = l <= 0.1 + 1e-12 || l >= kTwoPi - 0.1 - 1e-12;
    const bool in_high = std::abs(l - kPi) <= 0.1 + 1e-12;
    CHECK((in_low || in_high));
    if (in_high) ++near_pi;
  }
  CHECK(std::abs(near_pi / static_cast<double>(n) - 0.7) <= 4 * std::sqrt(0.7 * 0.3 / n));
}

TEST_CASE("sphere cap sampling stays inside the cap") {
  const DirectionSet dirs({"A", "B"},
                          {Direction::spatial(1, 0, 0), Direction::spatial(0, 1, 0)});
  DensitySpec cap;
  cap.kind = "cap";
  cap.center = {0.0, 0.0, 2.0};  // normalized internally
  cap.halfwidth = 0.3;
  const HvModel m = HvModel::stochastic(dirs, cap);
  Rng rng(17);
  for (int i = 0; i < 5000; ++i) {
    const auto l = m.emit(rng).lambda;
    CHECK(l[2] >= std::cos(0.3) - 1e-12);
    CHECK(std::hypot(l[0], l[1], l[2]) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

namespace {

std::vector<PairKey> menu3() { return {PairKey{0, 1}, PairKey{1, 2}, PairKey{0, 2}}; }

}  // namespace

TEST_CASE("selection-correlated model reproduces its target cells per pair") {
  const DirectionSet dirs = default_triple();
  SelectionCorrelatedSource spec;  // qm targets
  const HvModel m = HvModel::selection_correlated(dirs, spec, menu3());
  REQUIRE(m.targets().size() == 3);
  CHECK(m.setting_dependent());

  const auto& t01 = m.targets().at({0, 1});
  CHECK(t01[0] == doctest::Approx(0.07322330470336312).epsilon(1e-14));
  CHECK(t01[1] == doctest::Approx(0.42677669529663687).epsilon(1e-14));
  const auto& t02 = m.targets().at({0, 2});
  CHECK(t02[0] == doctest::Approx(0.25).epsilon(1e-14));

  Rng rng(101);
  for (const auto& [pair, cells] : m.targets()) {
    const int n = 200000;
    std::array<int, 4> got{};
    for (int i = 0; i < n; ++i) {
      const HiddenTrace t = m.emit_for(pair.first, pair.second, rng);
      const bool lo_up = t.counterfactual[pair.first] == Outcome::Up;
      const bool hi_plus = t.counterfactual[pair.second] == Outcome::Down;  // partner passes
      ++got[(lo_up ? 0 : 2) + (hi_plus ? 0 : 1)];
    }
    for (int c = 0; c < 4; ++c) {
      const double sigma = std::sqrt(cells[c] * (1 - cells[c]) / n);
      CHECK(std::abs(got[c] / static_cast<double>(n) - cells[c]) <= 4 * sigma + 1e-12);
    }
  }
}

TEST_CASE("selection-correlated emissions carry the pair family and a consistent trace") {
  const DirectionSet dirs = default_triple();
  const HvModel m = HvModel::selection_correlated(dirs, SelectionCorrelatedSource{}, menu3());
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const HiddenTrace t = m.emit_for(2, 0, rng);  // reversed order canonicalizes
    CHECK(t.family == "A-C");
    REQUIRE(t.lambda.size() == 1);
    for (int d = 0; d < 3; ++d)
      CHECK(t.counterfactual[d] == local_outcome(dirs.dir(d), t.lambda));
  }
}

TEST_CASE("equal-step geometry leaves the slack atoms structurally empty") {
  // At directions (0, pi/4, pi/2) the qm-target conspiracy never emits
  // (a+, b-, c+) under pair (a,b), nor (a-, b+, c-) under pair (b,c): that is
  // what pins its observed margin entirely on the cross-ensemble brackets.
  const DirectionSet dirs = default_triple();
  const HvModel m = HvModel::selection_correlated(dirs, SelectionCorrelatedSource{}, menu3());
  Rng rng(23);
  for (int i = 0; i < 50000; ++i) {
    const HiddenTrace ab = m.emit_for(0, 1, rng);
    CHECK_FALSE((ab.counterfactual[0] == Outcome::Up && ab.counterfactual[1] == Outcome::Down &&
                 ab.counterfactual[2] == Outcome::Up));
    const HiddenTrace bc = m.emit_for(1, 2, rng);
    CHECK_FALSE((bc.counterfactual[0] == Outcome::Down && bc.counterfactual[1] == Outcome::Up &&
                 bc.counterfactual[2] == Outcome::Down));
  }
}

TEST_CASE("uniform-model targets make the conspiracy mimic the honest source") {
  const DirectionSet dirs = default_triple();
  SelectionCorrelatedSource spec;
  spec.target_kind = "uniform_model";
  const HvModel m = HvModel::selection_correlated(dirs, spec, menu3());
  for (const auto& [pair, cells] : m.targets()) {
    const double theta = relative_angle(dirs.dir(pair.first), dirs.dir(pair.second));
    const auto want = uniform_model_cells(theta);
    for (int c = 0; c < 4; ++c) CHECK(cells[c] == doctest::Approx(want[c]).epsilon(1e-12));
  }
}

TEST_CASE("targets on unrealizable cells are rejected at construction") {
  const DirectionSet dirs({"A", "B"}, {Direction::coplanar(0), Direction::coplanar(kPi)});
  SelectionCorrelatedSource spec;
  spec.target_kind = "custom";
  // Opposite directions leave zero lambda measure for mixed cells.
  spec.custom_targets[{0, 1}] = {0.5, 0.5, 0.0, 0.0};
  CHECK_THROWS_WITH_AS(
      static_cast<void>(HvModel::selection_correlated(dirs, spec, {PairKey{0, 1}})),
      doctest::Contains("cell ud"), ConfigError);

  spec.custom_targets[{0, 1}] = {0.5, 0.0, 0.0, 0.5};  // realizable split
  const HvModel ok = HvModel::selection_correlated(dirs, spec, {PairKey{0, 1}});
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    const HiddenTrace t = ok.emit_for(0, 1, rng);
    CHECK(t.counterfactual[0] == negate(t.counterfactual[1]));
  }
}

TEST_CASE("construction guards") {
  SelectionCorrelatedSource spec;
  const DirectionSet spatial({"A", "B"},
                             {Direction::spatial(1, 0, 0), Direction::spatial(0, 1, 0)});
  CHECK_THROWS_AS(static_cast<void>(HvModel::selection_correlated(spatial, spec, {PairKey{0, 1}})),
                  ConfigError);

  const DirectionSet dirs = default_triple();
  spec.target_kind = "custom";  // no cells supplied for the menu
  CHECK_THROWS_AS(static_cast<void>(HvModel::selection_correlated(dirs, spec, menu3())),
                  ConfigError);
  spec.target_kind = "nonsense";
  CHECK_THROWS_AS(static_cast<void>(HvModel::selection_correlated(dirs, spec, menu3())),
                  ConfigError);

  CHECK_THROWS_AS(static_cast<void>(HvModel::from_spec(dirs, QmSource{}, menu3())),
                  std::logic_error);
  const HvModel cons = HvModel::selection_correlated(dirs, SelectionCorrelatedSource{}, menu3());
  Rng rng(1);
  CHECK_THROWS_AS(static_cast<void>(cons.emit(rng)), std::logic_error);  // pair required
  CHECK_THROWS_AS(static_cast<void>(cons.emit_for(0, 0, rng)), std::logic_error);  // unprepared
}

TEST_CASE("from_spec dispatches on the source variant") {
  const DirectionSet dirs = default_triple();
  CHECK(HvModel::from_spec(dirs, DeterministicUniformSource{}, menu3()).kind() ==
        HvModel::Kind::DeterministicUniform);
  CHECK(HvModel::from_spec(dirs, StochasticSource{}, menu3()).kind() ==
        HvModel::Kind::StochasticIndependent);
  CHECK(HvModel::from_spec(dirs, SelectionCorrelatedSource{}, menu3()).kind() ==
        HvModel::Kind::SelectionCorrelated);
  // Independent models answer emit_for by ignoring the pair.
  Rng a(9), b(9);
  const HvModel u = HvModel::deterministic_uniform(dirs);
  CHECK(u.emit_for(0, 2, a).lambda[0] == u.emit(b).lambda[0]);
}
