#include "bellsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bellsim/numerics.hpp"

namespace bellsim {

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Satisfied: return "satisfied";
    case Verdict::Violated: return "violated";
    default: return "inconclusive";
  }
}

namespace {

Verdict judge(double margin, double se, double sigmas) {
  if (se == 0.0) return margin < 0.0 ? Verdict::Violated : Verdict::Satisfied;
  if (margin <= -sigmas * se) return Verdict::Violated;
  if (margin >= sigmas * se) return Verdict::Satisfied;
  return Verdict::Inconclusive;
}

double binom_var(double p, std::int64_t n) {
  return std::max(0.0, p * (1.0 - p)) / static_cast<double>(n);
}

// Pearson chi-square for homogeneity across rows; all-zero rows and columns
// are dropped before computing degrees of freedom.
struct TableTest {
  double chi2 = 0.0;
  int dof = 0;
  double p = 1.0;
  bool degenerate = false;
};

TableTest chi2_homogeneity(const std::vector<std::vector<std::int64_t>>& table) {
  std::vector<std::size_t> rows, cols;
  const std::size_t ncol = table.empty() ? 0 : table.front().size();
  std::vector<std::int64_t> col_sum(ncol, 0);
  std::int64_t total = 0;
  for (std::size_t r = 0; r < table.size(); ++r) {
    std::int64_t row_sum = 0;
    for (std::size_t c = 0; c < ncol; ++c) {
      row_sum += table[r][c];
      col_sum[c] += table[r][c];
      total += table[r][c];
    }
    if (row_sum > 0) rows.push_back(r);
  }
  for (std::size_t c = 0; c < ncol; ++c)
    if (col_sum[c] > 0) cols.push_back(c);

  TableTest out;
  if (rows.size() < 2 || cols.size() < 2) {
    out.degenerate = true;
    return out;
  }
  out.dof = static_cast<int>((rows.size() - 1) * (cols.size() - 1));
  for (std::size_t r : rows) {
    std::int64_t row_sum = 0;
    for (std::size_t c : cols) row_sum += table[r][c];
    for (std::size_t c : cols) {
      const double expected = static_cast<double>(row_sum) * static_cast<double>(col_sum[c]) /
                              static_cast<double>(total);
      const double diff = static_cast<double>(table[r][c]) - expected;
      out.chi2 += diff * diff / expected;
    }
  }
  out.p = chi2_survival(out.chi2, out.dof);
  return out;
}

struct PairFreq {
  double value = 0.0;
  std::int64_t n = 0;
  bool ok = false;
};

PairFreq uu_freq(const CountTable& table, int i, int j) {
  PairFreq out;
  const PairCells* cells = table.cells(PairKey::make(i, j));
  if (!cells || cells->subtotal() == 0) return out;
  out.value = *cells->f_uu();
  out.n = cells->subtotal();
  out.ok = true;
  return out;
}

PairFreq expectation_of(const CountTable& table, int i, int j) {
  PairFreq out;
  const PairCells* cells = table.cells(PairKey::make(i, j));
  if (!cells || cells->subtotal() == 0) return out;
  out.value = *cells->expectation();
  out.n = cells->subtotal();
  out.ok = true;
  return out;
}

}  // namespace

BiReport bi_count_form(const CountTable& table, BellTriple t, double sigmas) {
  BiReport r;
  r.form = "count";
  r.sigmas = sigmas;
  const PairFreq ab = uu_freq(table, t.a, t.b);
  const PairFreq bc = uu_freq(table, t.b, t.c);
  const PairFreq ac = uu_freq(table, t.a, t.c);
  if (!ab.ok || !bc.ok || !ac.ok) {
    r.note = "no data for at least one setting pair";
    return r;
  }
  r.lhs = ab.value + bc.value;
  r.rhs = ac.value;
  r.margin = r.lhs - r.rhs;
  r.se = std::sqrt(binom_var(ab.value, ab.n) + binom_var(bc.value, bc.n) +
                   binom_var(ac.value, ac.n));
  r.verdict = judge(r.margin, r.se, sigmas);
  return r;
}

BiReport bi_expectation_form(const CountTable& table, BellTriple t, double sigmas) {
  BiReport r;
  r.form = "expectation";
  r.sigmas = sigmas;
  const PairFreq ab = expectation_of(table, t.a, t.b);
  const PairFreq bc = expectation_of(table, t.b, t.c);
  const PairFreq ac = expectation_of(table, t.a, t.c);
  if (!ab.ok || !bc.ok || !ac.ok) {
    r.note = "no data for at least one setting pair";
    return r;
  }
  r.lhs = ab.value + bc.value;
  r.rhs = ac.value - 1.0;
  r.margin = r.lhs - r.rhs;
  const auto var_p = [](const PairFreq& p) {
    return std::max(0.0, 1.0 - p.value * p.value) / static_cast<double>(p.n);
  };
  r.se = std::sqrt(var_p(ab) + var_p(bc) + var_p(ac));
  r.verdict = judge(r.margin, r.se, sigmas);
  return r;
}

bool equal_setting_anticorrelation(const CountTable& table) {
  for (const auto& [key, cells] : table.all())
    if (key.lo == key.hi && (cells.uu != 0 || cells.dd != 0)) return false;
  return true;
}

int atom_index(Outcome at_a, Outcome at_b, Outcome at_c) {
  return ((at_a == Outcome::Up) << 2) | ((at_b == Outcome::Up) << 1) |
         (at_c == Outcome::Up);
}

namespace {

void require_traces(std::span<const PairRecord> records, BellTriple t) {
  const int needed = std::max({t.a, t.b, t.c});
  for (const PairRecord& r : records) {
    if (!r.trace)
      throw AuditError("trial " + std::to_string(r.m) +
                       " carries no hidden trace; counterfactual audits need traced runs");
    const auto& cf = r.trace->counterfactual;
    const int span = std::max({needed, r.setting1, r.setting2});
    if (static_cast<int>(cf.size()) <= span)
      throw AuditError("trial " + std::to_string(r.m) +
                       " trace does not cover every audited direction");
    if (r.outcome1 != cf[r.setting1] || r.outcome2 != negate(cf[r.setting2]))
      throw AuditError("trial " + std::to_string(r.m) +
                       " outcomes disagree with its counterfactuals");
  }
}

}  // namespace

EnsembleCountReport ensemble_inequality_check(std::span<const PairRecord> records,
                                              BellTriple t) {
  require_traces(records, t);
  EnsembleCountReport out;
  for (const PairRecord& r : records) {
    const auto& cf = r.trace->counterfactual;
    const bool a_up = cf[t.a] == Outcome::Up;
    const bool b_up = cf[t.b] == Outcome::Up;
    const bool c_up = cf[t.c] == Outcome::Up;
    // Partner at x is + exactly when detector-1's counterfactual at x is -.
    if (a_up && !b_up) ++out.n_ab;
    if (b_up && !c_up) ++out.n_bc;
    if (a_up && !c_up) ++out.n_ac;
  }
  out.margin = out.n_ab + out.n_bc - out.n_ac;
  out.holds = out.margin >= 0;
  return out;
}

DecompositionAudit decomposition_audit(std::span<const PairRecord> records, BellTriple t,
                                       double sigmas) {
  require_traces(records, t);

  DecompositionAudit audit;
  audit.triple = t;
  audit.sigmas = sigmas;

  const PairKey key_ab = PairKey::make(t.a, t.b);
  const PairKey key_bc = PairKey::make(t.b, t.c);
  const PairKey key_ac = PairKey::make(t.a, t.c);

  std::map<PairKey, GroupAtomCounts> groups;
  std::int64_t ensemble_ab_direct = 0, ensemble_bc_direct = 0, ensemble_ac_direct = 0;
  std::int64_t obs_ab_outcomes = 0, obs_bc_outcomes = 0, obs_ac_outcomes = 0;
  std::int64_t alias_bc_a_minus = 0, alias_ac_b_minus = 0;

  for (const PairRecord& r : records) {
    const auto& cf = r.trace->counterfactual;
    const PairKey key = PairKey::make(r.setting1, r.setting2);
    GroupAtomCounts& g = groups[key];
    g.pair = key;
    g.atoms[atom_index(cf[t.a], cf[t.b], cf[t.c])] += 1;
    g.subtotal += 1;

    const bool a_up = cf[t.a] == Outcome::Up;
    const bool b_up = cf[t.b] == Outcome::Up;
    const bool c_up = cf[t.c] == Outcome::Up;
    if (a_up && !b_up) ++ensemble_ab_direct;
    if (b_up && !c_up) ++ensemble_bc_direct;
    if (a_up && !c_up) ++ensemble_ac_direct;

    // Observed coincidences, particle-indexed: particle 1 + at x, particle 2
    // + at y. When the detectors measured the roles in reverse order the
    // same event surfaces as a -- coincidence (anti-correlation law).
    const auto observed_roles = [&](int x, int y, std::int64_t& counter) {
      if (r.setting1 == x && r.setting2 == y) {
        if (r.outcome1 == Outcome::Up && r.outcome2 == Outcome::Up) ++counter;
      } else if (r.setting1 == y && r.setting2 == x) {
        if (r.outcome1 == Outcome::Down && r.outcome2 == Outcome::Down) ++counter;
      }
    };
    if (key == key_ab) observed_roles(t.a, t.b, obs_ab_outcomes);
    if (key == key_bc) observed_roles(t.b, t.c, obs_bc_outcomes);
    if (key == key_ac) observed_roles(t.a, t.c, obs_ac_outcomes);

    // Alias readings through the partner's counterfactuals.
    if (key == key_bc && cf[t.b] == Outcome::Up &&
        negate(cf[t.c]) == Outcome::Up && negate(cf[t.a]) == Outcome::Down)
      ++alias_bc_a_minus;
    if (key == key_ac && cf[t.a] == Outcome::Up &&
        negate(cf[t.c]) == Outcome::Up && negate(cf[t.b]) == Outcome::Down)
      ++alias_ac_b_minus;
  }

  for (auto& [key, g] : groups) audit.groups.push_back(g);

  const auto find_group = [&](PairKey key) -> const GroupAtomCounts* {
    auto it = groups.find(key);
    return it == groups.end() ? nullptr : &it->second;
  };
  const GroupAtomCounts* g_ab = find_group(key_ab);
  const GroupAtomCounts* g_bc = find_group(key_bc);
  const GroupAtomCounts* g_ac = find_group(key_ac);

  // Atom patterns: bit2 = a, bit1 = b, bit0 = c; set = detector-1 Up.
  constexpr int kUDD = 0b100, kUDU = 0b101, kUUD = 0b110, kDUD = 0b010;

  audit.observed_ab = g_ab ? g_ab->atoms[kUDD] + g_ab->atoms[kUDU] : 0;
  audit.observed_bc = g_bc ? g_bc->atoms[kUUD] + g_bc->atoms[kDUD] : 0;
  audit.observed_ac = g_ac ? g_ac->atoms[kUDD] + g_ac->atoms[kUUD] : 0;

  // Ensemble counts two ways: direct scan vs sum of per-group atoms. The
  // per-group route is the complete partition identity, with the observed
  // sub-ensemble contributing its own observed count.
  std::int64_t ens_ab_groups = 0, ens_bc_groups = 0, ens_ac_groups = 0;
  for (const auto& [key, g] : groups) {
    ens_ab_groups += g.atoms[kUDD] + g.atoms[kUDU];
    ens_bc_groups += g.atoms[kUUD] + g.atoms[kDUD];
    ens_ac_groups += g.atoms[kUDD] + g.atoms[kUUD];
  }
  audit.ensemble_ab = ensemble_ab_direct;
  audit.ensemble_bc = ensemble_bc_direct;
  audit.ensemble_ac = ensemble_ac_direct;
  audit.partition_identities_exact =
      ens_ab_groups == ensemble_ab_direct && ens_bc_groups == ensemble_bc_direct &&
      ens_ac_groups == ensemble_ac_direct &&
      (!g_ab || audit.observed_ab == obs_ab_outcomes) &&
      (!g_bc || audit.observed_bc == obs_bc_outcomes) &&
      (!g_ac || audit.observed_ac == obs_ac_outcomes);

  audit.hyp_ab_c_up = g_ab ? g_ab->atoms[kUDD] : 0;
  audit.hyp_ac_b_up = g_ac ? g_ac->atoms[kUDD] : 0;
  audit.hyp_bc_a_up = g_bc ? g_bc->atoms[kUUD] : 0;
  audit.hyp_ac_b_down = g_ac ? g_ac->atoms[kUUD] : 0;
  audit.alias_identities_exact =
      audit.hyp_bc_a_up == alias_bc_a_minus && audit.hyp_ac_b_down == alias_ac_b_minus;

  if (!g_ab || !g_bc || !g_ac || g_ab->subtotal == 0 || g_bc->subtotal == 0 ||
      g_ac->subtotal == 0) {
    audit.setting_independence = Verdict::Inconclusive;
    return audit;
  }

  const double m_ab = static_cast<double>(g_ab->subtotal);
  const double m_bc = static_cast<double>(g_bc->subtotal);
  const double m_ac = static_cast<double>(g_ac->subtotal);

  audit.margin = audit.observed_ab / m_ab + audit.observed_bc / m_bc -
                 audit.observed_ac / m_ac;
  audit.residual = (audit.hyp_ab_c_up / m_ab - audit.hyp_ac_b_up / m_ac) +
                   (audit.hyp_bc_a_up / m_bc - audit.hyp_ac_b_down / m_ac);
  audit.slack = g_ab->atoms[kUDU] / m_ab + g_bc->atoms[kDUD] / m_bc;
  audit.decomposition_exact =
      std::fabs(audit.margin - (audit.residual + audit.slack)) <= 1e-12;

  const double p_x = audit.hyp_ab_c_up / m_ab;
  const double p_y = audit.hyp_bc_a_up / m_bc;
  const double p_z = (audit.hyp_ac_b_up + audit.hyp_ac_b_down) / m_ac;
  audit.residual_se = std::sqrt(binom_var(p_x, g_ab->subtotal) +
                                binom_var(p_y, g_bc->subtotal) +
                                binom_var(p_z, g_ac->subtotal));
  if (audit.residual_se == 0.0)
    audit.setting_independence =
        audit.residual == 0.0 ? Verdict::Satisfied : Verdict::Violated;
  else
    audit.setting_independence = std::fabs(audit.residual) <= sigmas * audit.residual_se
                                     ? Verdict::Satisfied
                                     : Verdict::Violated;
  return audit;
}

// ---------------------------------------------------------------------------
// Invariance checks

int PartitionSpec::partitions() const { return kind == Kind::EvenOdd ? 2 : count; }

int PartitionSpec::of(const PairRecord& r, std::int64_t m_total) const {
  switch (kind) {
    case Kind::EvenOdd:
      return static_cast<int>(r.m % 2);
    case Kind::Blocks: {
      const std::int64_t idx = (r.m - 1) * count / std::max<std::int64_t>(m_total, 1);
      return static_cast<int>(std::clamp<std::int64_t>(idx, 0, count - 1));
    }
    case Kind::SchedulePhase:
      return static_cast<int>((r.m - 1) % count);
    default:
      return classify(r);
  }
}

InvarianceReport place_selection_invariance(std::span<const PairRecord> records,
                                            const PartitionSpec& spec, double alpha,
                                            std::int64_t min_count) {
  InvarianceReport report;
  report.alpha = alpha;
  const int parts = spec.partitions();
  const std::int64_t m_total = static_cast<std::int64_t>(records.size());

  // pair -> partition -> outcome cells (uu, ud, du, dd at canonical order)
  std::map<PairKey, std::vector<std::vector<std::int64_t>>> tables;
  for (const PairRecord& r : records) {
    const PairKey key = PairKey::make(r.setting1, r.setting2);
    auto& table = tables[key];
    if (table.empty()) table.assign(parts, std::vector<std::int64_t>(4, 0));
    const Outcome at_lo = r.setting1 <= r.setting2 ? r.outcome1 : r.outcome2;
    const Outcome at_hi = r.setting1 <= r.setting2 ? r.outcome2 : r.outcome1;
    const int cell = (at_lo == Outcome::Up ? 0 : 2) + (at_hi == Outcome::Up ? 0 : 1);
    const int part = spec.of(r, m_total);
    if (part < 0 || part >= parts)
      throw AuditError("partition classifier returned an index out of range");
    table[part][cell] += 1;
  }

  for (const auto& [key, table] : tables) {
    PairInvariance pi;
    pi.pair = key;
    std::int64_t smallest = min_count;
    for (const auto& row : table) {
      std::int64_t row_sum = 0;
      for (std::int64_t v : row) row_sum += v;
      smallest = std::min(smallest, row_sum);
    }
    if (parts < 2 || smallest < min_count) {
      pi.verdict = Verdict::Inconclusive;
      pi.note = "fewer than " + std::to_string(min_count) + " records in some partition";
    } else {
      const TableTest tt = chi2_homogeneity(table);
      if (tt.degenerate) {
        pi.verdict = Verdict::Inconclusive;
        pi.note = "degenerate contingency table";
      } else {
        pi.chi2 = tt.chi2;
        pi.dof = tt.dof;
        pi.p_value = tt.p;
        pi.verdict = tt.p < alpha ? Verdict::Violated : Verdict::Satisfied;
      }
    }
    report.pairs.push_back(std::move(pi));
  }

  if (report.pairs.empty()) {
    report.overall = Verdict::Inconclusive;
    return report;
  }
  report.overall = Verdict::Satisfied;
  for (const auto& pi : report.pairs) {
    if (pi.verdict == Verdict::Violated) {
      report.overall = Verdict::Violated;
      return report;
    }
    if (pi.verdict == Verdict::Inconclusive) report.overall = Verdict::Inconclusive;
  }
  return report;
}

HomogeneityReport counterfactual_homogeneity(std::span<const PairRecord> records,
                                             BellTriple t, double alpha,
                                             std::int64_t min_count) {
  require_traces(records, t);
  HomogeneityReport report;

  const std::array<PairKey, 3> keys = {PairKey::make(t.a, t.b), PairKey::make(t.b, t.c),
                                       PairKey::make(t.a, t.c)};
  std::array<GroupAtomCounts, 3> groups;
  for (int i = 0; i < 3; ++i) groups[i].pair = keys[i];

  for (const PairRecord& r : records) {
    const PairKey key = PairKey::make(r.setting1, r.setting2);
    for (int i = 0; i < 3; ++i) {
      if (key == keys[i]) {
        const auto& cf = r.trace->counterfactual;
        groups[i].atoms[atom_index(cf[t.a], cf[t.b], cf[t.c])] += 1;
        groups[i].subtotal += 1;
        break;
      }
    }
  }
  report.groups.assign(groups.begin(), groups.end());

  std::int64_t smallest = groups[0].subtotal;
  for (const auto& g : groups) smallest = std::min(smallest, g.subtotal);
  if (smallest < min_count) {
    report.verdict = Verdict::Inconclusive;
    report.note = "fewer than " + std::to_string(min_count) + " records in some sub-ensemble";
    return report;
  }

  std::vector<std::vector<std::int64_t>> table(3, std::vector<std::int64_t>(8, 0));
  for (int i = 0; i < 3; ++i)
    for (int a = 0; a < 8; ++a) table[i][a] = groups[i].atoms[a];
  const TableTest tt = chi2_homogeneity(table);
  if (tt.degenerate) {
    report.verdict = Verdict::Inconclusive;
    report.note = "degenerate contingency table";
    return report;
  }
  report.chi2 = tt.chi2;
  report.dof = tt.dof;
  report.p_value = tt.p;
  report.verdict = tt.p < alpha ? Verdict::Violated : Verdict::Satisfied;
  return report;
}

}  // namespace bellsim
