#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bellsim/stats.hpp"

// Can a single joint distribution over the eight counterfactual outcome
// triples reproduce three pairwise targets? Feasibility here is the whole
// content of the count-form inequality: the targets are feasible exactly
// when the inequality family holds.

namespace bellsim {

// Weights over the 8 atoms (v_a, v_b, v_c); index bit 2 = a Up, bit 1 = b Up,
// bit 0 = c Up. Detector-2 values are the negations throughout.
struct AtomDistribution {
  std::array<double, 8> w{};

  double sum() const;
  // Nonnegative within tol and summing to 1 within 1e-9.
  std::vector<std::string> validate(double tol = 1e-9) const;
};

// Pairwise coincidence targets n(x+;y+) = P(v_x = Up, v_y = Down).
struct PairwiseTargets {
  double ab = 0.0;
  double bc = 0.0;
  double ac = 0.0;
};

PairwiseTargets implied_pairwise(const AtomDistribution& atoms);

// Ordered: the atoms are an arbitrary distribution over the 8 triples.
// SingletSymmetric: additionally invariant under global spin flip
// (w[p] = w[~p]), the symmetry every singlet ensemble has.
enum class TargetSemantics { Ordered, SingletSymmetric };

// Affine functional coeff . (ab, bc, ac) + constant, nonnegative on every
// feasible target triple but negative (= value) on the rejected one.
struct InfeasibilityCertificate {
  std::array<double, 3> coeff{};
  double constant = 0.0;
  double value = 0.0;
  std::string name;
};

struct FeasibilityResult {
  bool feasible = false;
  std::optional<AtomDistribution> witness;
  std::optional<InfeasibilityCertificate> certificate;
  std::string note;
};

// Each facet inequality of the feasible region may be violated by at most
// tol; the witness realizes the targets projected onto the region.
FeasibilityResult feasible(const PairwiseTargets& targets, double tol = 1e-6,
                           TargetSemantics semantics = TargetSemantics::Ordered);

// The count-form inequality family, evaluated directly on targets:
// three cyclic triangle forms, plus (SingletSymmetric only) the complement
// form n(a+;b-) + n(b-;c+) >= n(a+;c+), i.e. ab + bc + ac <= 1.
bool count_form_family_holds(const PairwiseTargets& targets, TargetSemantics semantics,
                             double tol = 0.0);

// ---------------------------------------------------------------------------
// Exact set counting (membership bitmasks over a universe of <= 64 elements)

struct SetTripleCheck {
  std::int64_t n_ab = 0;  // |A and not B|
  std::int64_t n_bc = 0;  // |B and not C|
  std::int64_t n_ac = 0;  // |A and not C|
  bool containment = false;  // (A and not C) subset of (A and not B) union (B and not C)
  bool inequality = false;   // n_ab + n_bc >= n_ac
};

SetTripleCheck set_identity_check(std::uint64_t a, std::uint64_t b, std::uint64_t c);

// ---------------------------------------------------------------------------
// Survey form of the same counting inequality

struct SurveyRow {
  std::optional<bool> tall;
  std::optional<bool> blue;
  std::optional<bool> male;
};

struct SurveyReport {
  bool complete_mode = false;  // every respondent answered all three
  std::int64_t n_tall_notblue = 0;
  std::int64_t n_blue_notmale = 0;
  std::int64_t n_tall_notmale = 0;
  std::int64_t m_tb = 0;  // respondents asked (tall, blue), etc.
  std::int64_t m_bm = 0;
  std::int64_t m_tm = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;
  double se = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
};

// Complete mode (all rows full): exact population counting, the inequality
// cannot fail. Two-question mode (every row answers exactly two): subgroup
// frequencies, which a selection-correlated population can push past the
// bound. Mixed or empty rows are a data error.
SurveyReport survey_inequality(std::span<const SurveyRow> rows, double sigmas = 3.0);

}  // namespace bellsim
