#include "bellsim/feasibility.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace bellsim {

double AtomDistribution::sum() const {
  double s = 0.0;
  for (double v : w) s += v;
  return s;
}

std::vector<std::string> AtomDistribution::validate(double tol) const {
  std::vector<std::string> out;
  for (int i = 0; i < 8; ++i)
    if (w[i] < -tol)
      out.push_back("atom " + std::to_string(i) + " has negative weight " +
                    std::to_string(w[i]));
  if (std::fabs(sum() - 1.0) > 1e-9)
    out.push_back("atom weights sum to " + std::to_string(sum()) + ", expected 1");
  return out;
}

PairwiseTargets implied_pairwise(const AtomDistribution& a) {
  // bit 2 = v_a Up, bit 1 = v_b Up, bit 0 = v_c Up
  PairwiseTargets t;
  t.ab = a.w[0b100] + a.w[0b101];  // v_a Up, v_b Down
  t.bc = a.w[0b010] + a.w[0b110];  // v_b Up, v_c Down
  t.ac = a.w[0b100] + a.w[0b110];  // v_a Up, v_c Down
  return t;
}

namespace {

InfeasibilityCertificate make_cert(std::array<double, 3> coeff, double constant,
                                   const PairwiseTargets& t, std::string name) {
  InfeasibilityCertificate c;
  c.coeff = coeff;
  c.constant = constant;
  c.value = coeff[0] * t.ab + coeff[1] * t.bc + coeff[2] * t.ac + constant;
  c.name = std::move(name);
  return c;
}

// Facets with their evaluation; the most violated one becomes the
// certificate. All functionals are >= 0 on the feasible region.
struct Facet {
  std::array<double, 3> coeff;
  double constant;
  const char* name;
};

FeasibilityResult check_facets(const PairwiseTargets& t, std::span<const Facet> facets,
                               double tol) {
  FeasibilityResult res;
  const Facet* worst = nullptr;
  double worst_value = 0.0;
  for (const Facet& f : facets) {
    const double value = f.coeff[0] * t.ab + f.coeff[1] * t.bc + f.coeff[2] * t.ac + f.constant;
    if (value < -tol && (!worst || value < worst_value)) {
      worst = &f;
      worst_value = value;
    }
  }
  if (worst) {
    res.feasible = false;
    res.certificate = make_cert(worst->coeff, worst->constant, t, worst->name);
  } else {
    res.feasible = true;
  }
  return res;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

bool count_form_family_holds(const PairwiseTargets& t, TargetSemantics semantics, double tol) {
  const bool cyclic = t.ab + t.bc - t.ac >= -tol && t.bc + t.ac - t.ab >= -tol &&
                      t.ab + t.ac - t.bc >= -tol;
  if (semantics == TargetSemantics::Ordered) return t.ab + t.bc - t.ac >= -tol;
  return cyclic && t.ab + t.bc + t.ac <= 1.0 + tol;
}

FeasibilityResult feasible(const PairwiseTargets& targets, double tol,
                           TargetSemantics semantics) {
  static constexpr Facet kBox[] = {
      {{1, 0, 0}, 0, "ab >= 0"},  {{-1, 0, 0}, 1, "ab <= 1"},
      {{0, 1, 0}, 0, "bc >= 0"},  {{0, -1, 0}, 1, "bc <= 1"},
      {{0, 0, 1}, 0, "ac >= 0"},  {{0, 0, -1}, 1, "ac <= 1"},
  };
  static constexpr Facet kOrdered[] = {
      {{1, 1, -1}, 0, "ab + bc >= ac"},
      {{-1, -1, 0}, 1, "ab + bc <= 1"},
  };
  static constexpr Facet kSymmetric[] = {
      {{1, 1, -1}, 0, "ab + bc >= ac"},
      {{-1, 1, 1}, 0, "bc + ac >= ab"},
      {{1, -1, 1}, 0, "ab + ac >= bc"},
      {{-1, -1, -1}, 1, "ab + bc + ac <= 1"},
  };

  std::vector<Facet> facets(std::begin(kBox), std::end(kBox));
  if (semantics == TargetSemantics::Ordered)
    facets.insert(facets.end(), std::begin(kOrdered), std::end(kOrdered));
  else
    facets.insert(facets.end(), std::begin(kSymmetric), std::end(kSymmetric));

  FeasibilityResult res = check_facets(targets, facets, tol);
  if (!res.feasible) return res;

  // Build a witness for the targets projected onto the region; with all
  // facet violations <= tol the projection moves each coordinate only a
  // little and the witness realizes it exactly.
  double x = clamp01(targets.ab), y = clamp01(targets.bc), z = clamp01(targets.ac);
  AtomDistribution w;

  if (semantics == TargetSemantics::Ordered) {
    if (x + y > 1.0) {
      const double excess = x + y - 1.0;
      x = clamp01(x - excess / 2.0);
      y = clamp01(y - excess / 2.0);
    }
    z = std::min(z, x + y);
    // v-pattern weights: s = w(+--) slides in [max(0, z - y), min(x, z)].
    const double s = std::max(0.0, z - y);
    w.w[0b100] = s;
    w.w[0b101] = x - s;
    w.w[0b110] = z - s;
    w.w[0b010] = y - (z - s);
    w.w[0b000] = 1.0 - x - y;
  } else {
    // Projected symmetric coordinates; negative simplex weights are clipped
    // and renormalized.
    std::array<double, 4> lam = {1.0 - x - y - z, y + z - x, x + y - z, x + z - y};
    double lsum = 0.0;
    for (double& l : lam) {
      l = std::max(l, 0.0);
      lsum += l;
    }
    for (double& l : lam) l /= lsum;
    w.w[0b110] = w.w[0b001] = lam[1] / 2.0;  // carries bc and ac
    w.w[0b101] = w.w[0b010] = lam[2] / 2.0;  // carries ab and bc
    w.w[0b100] = w.w[0b011] = lam[3] / 2.0;  // carries ab and ac
    w.w[0b111] = w.w[0b000] = lam[0] / 2.0;
  }

  for (double& v : w.w) v = std::max(v, 0.0);
  const PairwiseTargets achieved = implied_pairwise(w);
  const double miss = std::max({std::fabs(achieved.ab - targets.ab),
                                std::fabs(achieved.bc - targets.bc),
                                std::fabs(achieved.ac - targets.ac)});
  if (miss > 3.0 * tol + 1e-12) {
    res.feasible = false;
    res.note = "witness construction missed the targets by " + std::to_string(miss);
    return res;
  }
  res.witness = w;
  return res;
}

SetTripleCheck set_identity_check(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  SetTripleCheck out;
  const std::uint64_t ab = a & ~b;
  const std::uint64_t bc = b & ~c;
  const std::uint64_t ac = a & ~c;
  out.n_ab = std::popcount(ab);
  out.n_bc = std::popcount(bc);
  out.n_ac = std::popcount(ac);
  out.containment = (ac & ~(ab | bc)) == 0;
  out.inequality = out.n_ab + out.n_bc >= out.n_ac;
  return out;
}

SurveyReport survey_inequality(std::span<const SurveyRow> rows, double sigmas) {
  SurveyReport rep;
  if (rows.empty()) {
    rep.note = "no rows";
    return rep;
  }

  std::size_t complete = 0, two_answers = 0;
  for (const SurveyRow& r : rows) {
    const int answered = int(r.tall.has_value()) + int(r.blue.has_value()) + int(r.male.has_value());
    if (answered == 3) ++complete;
    if (answered == 2) ++two_answers;
  }

  if (complete == rows.size()) {
    rep.complete_mode = true;
    for (const SurveyRow& r : rows) {
      if (*r.tall && !*r.blue) ++rep.n_tall_notblue;
      if (*r.blue && !*r.male) ++rep.n_blue_notmale;
      if (*r.tall && !*r.male) ++rep.n_tall_notmale;
    }
    const auto m = static_cast<double>(rows.size());
    rep.m_tb = rep.m_bm = rep.m_tm = static_cast<std::int64_t>(rows.size());
    rep.lhs = (rep.n_tall_notblue + rep.n_blue_notmale) / m;
    rep.rhs = rep.n_tall_notmale / m;
    rep.margin = rep.lhs - rep.rhs;
    rep.se = 0.0;  // population identity, not an estimate
    rep.verdict = rep.margin >= 0.0 ? Verdict::Satisfied : Verdict::Violated;
    return rep;
  }

  if (two_answers != rows.size())
    throw AuditError("survey rows must answer either all three questions or exactly two");

  for (const SurveyRow& r : rows) {
    if (r.tall && r.blue) {
      ++rep.m_tb;
      if (*r.tall && !*r.blue) ++rep.n_tall_notblue;
    } else if (r.blue && r.male) {
      ++rep.m_bm;
      if (*r.blue && !*r.male) ++rep.n_blue_notmale;
    } else {
      ++rep.m_tm;
      if (*r.tall && !*r.male) ++rep.n_tall_notmale;
    }
  }
  if (rep.m_tb == 0 || rep.m_bm == 0 || rep.m_tm == 0) {
    rep.note = "at least one question pair has no respondents";
    return rep;
  }
  const double f_tb = static_cast<double>(rep.n_tall_notblue) / rep.m_tb;
  const double f_bm = static_cast<double>(rep.n_blue_notmale) / rep.m_bm;
  const double f_tm = static_cast<double>(rep.n_tall_notmale) / rep.m_tm;
  rep.lhs = f_tb + f_bm;
  rep.rhs = f_tm;
  rep.margin = rep.lhs - rep.rhs;
  const auto var = [](double p, std::int64_t n) {
    return std::max(0.0, p * (1.0 - p)) / static_cast<double>(n);
  };
  rep.se = std::sqrt(var(f_tb, rep.m_tb) + var(f_bm, rep.m_bm) + var(f_tm, rep.m_tm));
  if (rep.se == 0.0)
    rep.verdict = rep.margin >= 0.0 ? Verdict::Satisfied : Verdict::Violated;
  else if (rep.margin <= -sigmas * rep.se)
    rep.verdict = Verdict::Violated;
  else if (rep.margin >= sigmas * rep.se)
    rep.verdict = Verdict::Satisfied;
  else
    rep.verdict = Verdict::Inconclusive;
  return rep;
}

}  // namespace bellsim
