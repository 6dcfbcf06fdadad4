#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bellsim/core.hpp"

// Inequality checks and decomposition audits over trial records. Comparisons
// across setting pairs always use per-sub-ensemble frequencies, so unequal
// pair sampling rates cancel; raw counts ride along in the reports.

namespace bellsim {

struct AuditError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class Verdict { Satisfied, Violated, Inconclusive };
std::string verdict_name(Verdict v);

// Which directions play the roles (a, b, c).
struct BellTriple {
  int a = 0;
  int b = 1;
  int c = 2;
};

// ---------------------------------------------------------------------------
// The two inequality forms on tallied counts

struct BiReport {
  std::string form;  // "count" | "expectation"
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // lhs - rhs; negative means violated
  double se = 0.0;      // standard error of the margin
  double sigmas = 3.0;  // decision threshold in units of se
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
};

// n(a+;b+) + n(b+;c+) >= n(a+;c+), per-pair frequencies.
BiReport bi_count_form(const CountTable& table, BellTriple t = {}, double sigmas = 3.0);

// P(a;b) + P(b;c) >= P(a;c) - 1.
BiReport bi_expectation_form(const CountTable& table, BellTriple t = {}, double sigmas = 3.0);

// Every equal-setting pair must show perfect anti-correlation (no ++ / --).
bool equal_setting_anticorrelation(const CountTable& table);

// ---------------------------------------------------------------------------
// Counterfactual bookkeeping

// Atom index: three bits (a, b, c), set = detector-1 counterfactual Up.
int atom_index(Outcome at_a, Outcome at_b, Outcome at_c);

struct GroupAtomCounts {
  PairKey pair;
  std::array<std::int64_t, 8> atoms{};
  std::int64_t subtotal = 0;
};

// Ensemble-level counterfactual counts: over *all* traced records,
// how many satisfy (detector-1 at x would be +, detector-2 at y would be +).
// This count-form inequality is a set identity and can never fail; the check
// reports the exact integers.
struct EnsembleCountReport {
  std::int64_t n_ab = 0;
  std::int64_t n_bc = 0;
  std::int64_t n_ac = 0;
  std::int64_t margin = 0;  // n_ab + n_bc - n_ac
  bool holds = false;
};
EnsembleCountReport ensemble_inequality_check(std::span<const PairRecord> records,
                                              BellTriple t = {});

// Decomposition of the observed count-form margin into the hypothetical
// cross-sub-ensemble brackets plus a nonnegative slack:
//   margin = residual + slack   (exactly)
// Residual zero (within sigmas) is the operational statement that the
// hidden-variable distribution does not depend on the selected settings.
// Counts here are particle-indexed: "a+;b+" means particle 1 passes at a and
// particle 2 passes at b, whichever detector measured which role.
struct DecompositionAudit {
  BellTriple triple;
  std::vector<GroupAtomCounts> groups;  // every observed setting pair

  std::int64_t observed_ab = 0;  // N(a+;b+) within its own sub-ensemble, etc.
  std::int64_t observed_bc = 0;
  std::int64_t observed_ac = 0;
  std::int64_t ensemble_ab = 0;  // over all traced records
  std::int64_t ensemble_bc = 0;
  std::int64_t ensemble_ac = 0;
  bool partition_identities_exact = false;  // ensemble = sum of group contributions

  // Named hypothetical counts (integer, within the stated sub-ensemble):
  std::int64_t hyp_ab_c_up = 0;    // N(a+;b+,c+)
  std::int64_t hyp_ac_b_up = 0;    // N(a+;c+,b+)
  std::int64_t hyp_bc_a_up = 0;    // N(b+,a+;c+) == N(b+;c+,a-)
  std::int64_t hyp_ac_b_down = 0;  // N(a+,b+;c+) == N(a+;c+,b-)
  bool alias_identities_exact = false;  // both readings counted, equal

  double margin = 0.0;    // frequency units
  double residual = 0.0;  // bracket terms
  double slack = 0.0;     // nonnegative remainder
  double residual_se = 0.0;
  bool decomposition_exact = false;  // |margin - residual - slack| ~ 0
  Verdict setting_independence = Verdict::Inconclusive;
  double sigmas = 3.0;
};

// Requires a trace on every record covering directions a, b, c, and outcomes
// consistent with the counterfactuals; throws AuditError otherwise.
DecompositionAudit decomposition_audit(std::span<const PairRecord> records, BellTriple t = {},
                                       double sigmas = 3.0);

// ---------------------------------------------------------------------------
// Place-selection invariance (chi-square homogeneity)

struct PartitionSpec {
  enum class Kind { EvenOdd, Blocks, SchedulePhase, Custom };
  Kind kind = Kind::EvenOdd;
  int count = 2;  // partitions for Blocks / SchedulePhase
  std::function<int(const PairRecord&)> classify;  // Custom: must return [0, count)

  int partitions() const;
  int of(const PairRecord& r, std::int64_t m_total) const;
};

struct PairInvariance {
  PairKey pair;
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
};

struct InvarianceReport {
  double alpha = 0.01;
  std::vector<PairInvariance> pairs;
  Verdict overall = Verdict::Inconclusive;
};

// For every setting pair: are the outcome-cell frequencies the same in every
// partition of the record stream? Pairs with fewer than min_count records in
// some partition come back Inconclusive.
InvarianceReport place_selection_invariance(std::span<const PairRecord> records,
                                            const PartitionSpec& spec, double alpha = 0.01,
                                            std::int64_t min_count = 100);

// Are the counterfactual-atom distributions identical across the three
// sub-ensembles of the triple? A selection-correlated source fails this.
struct HomogeneityReport {
  double chi2 = 0.0;
  int dof = 0;
  double p_value = 1.0;
  Verdict verdict = Verdict::Inconclusive;
  std::string note;
  std::vector<GroupAtomCounts> groups;
};
HomogeneityReport counterfactual_homogeneity(std::span<const PairRecord> records,
                                             BellTriple t = {}, double alpha = 0.01,
                                             std::int64_t min_count = 100);

}  // namespace bellsim
