#include "advalloc/lp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace advalloc::lp {

namespace {
constexpr double kPivotTol = 1e-9;
constexpr int kMaxIterations = 10000;
}  // namespace

LpSolution solve(const LpProblem& problem) {
  const int nv = problem.num_vars;
  const int nr = problem.num_rows();
  if (static_cast<int>(problem.c.size()) != nv)
    throw std::invalid_argument("lp: objective length mismatch");
  if (problem.A.size() != static_cast<size_t>(nr) * nv)
    throw std::invalid_argument("lp: constraint matrix shape mismatch");
  for (double v : problem.c)
    if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite objective");
  for (double v : problem.A)
    if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite constraint");
  for (double v : problem.b) {
    if (!std::isfinite(v)) throw std::invalid_argument("lp: non-finite rhs");
    if (v < 0.0)
      throw std::invalid_argument("lp: rhs must be nonnegative (slack basis)");
  }

  // Tableau rows 0..nr-1 are constraints, row nr is the objective.
  // Columns 0..nv-1 structural, nv..nv+nr-1 slack, last column rhs.
  const int ncols = nv + nr + 1;
  const int rhs = ncols - 1;
  std::vector<double> T(static_cast<size_t>(nr + 1) * ncols, 0.0);
  auto row = [&](int r) { return T.data() + static_cast<size_t>(r) * ncols; };
  for (int r = 0; r < nr; ++r) {
    double* tr = row(r);
    for (int j = 0; j < nv; ++j) tr[j] = problem.A[static_cast<size_t>(r) * nv + j];
    tr[nv + r] = 1.0;
    tr[rhs] = problem.b[r];
  }
  double* obj = row(nr);
  for (int j = 0; j < nv; ++j) obj[j] = -problem.c[j];

  std::vector<int> basis(nr);
  for (int r = 0; r < nr; ++r) basis[r] = nv + r;

  LpSolution sol;
  for (sol.iterations = 0;; ++sol.iterations) {
    if (sol.iterations >= kMaxIterations)
      throw std::runtime_error(
          "lp: iteration limit reached; numerical trouble suspected");

    // Bland: entering column is the lowest index with a negative reduced cost.
    int enter = -1;
    for (int j = 0; j < nv + nr; ++j) {
      if (obj[j] < -kPivotTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) break;  // optimal

    // Ratio test; ties broken by the lowest leaving basis index (Bland).
    int leave = -1;
    double best = 0.0;
    for (int r = 0; r < nr; ++r) {
      const double a = row(r)[enter];
      if (a > kPivotTol) {
        const double ratio = row(r)[rhs] / a;
        if (leave < 0 || ratio < best - kPivotTol ||
            (ratio < best + kPivotTol && basis[r] < basis[leave])) {
          leave = r;
          best = ratio;
        }
      }
    }
    if (leave < 0) {
      sol.status = LpStatus::unbounded;
      return sol;
    }

    double* pr = row(leave);
    const double piv = pr[enter];
    for (int j = 0; j < ncols; ++j) pr[j] /= piv;
    pr[enter] = 1.0;
    for (int r = 0; r <= nr; ++r) {
      if (r == leave) continue;
      double* tr = row(r);
      const double f = tr[enter];
      if (f == 0.0) continue;
      for (int j = 0; j < ncols; ++j) tr[j] -= f * pr[j];
      tr[enter] = 0.0;
    }
    basis[leave] = enter;
  }

  sol.status = LpStatus::optimal;
  sol.value = obj[rhs];
  sol.x.assign(nv, 0.0);
  sol.duals.assign(nr, 0.0);
  for (int r = 0; r < nr; ++r) {
    if (basis[r] < nv) sol.x[basis[r]] = row(r)[rhs];
    if (std::abs(row(r)[rhs]) <= kPivotTol) sol.degenerate = true;
  }
  for (int r = 0; r < nr; ++r) sol.duals[r] = obj[nv + r];
  // A nonbasic column with zero reduced cost means alternate optima.
  std::vector<char> in_basis(nv + nr, 0);
  for (int r = 0; r < nr; ++r) in_basis[basis[r]] = 1;
  for (int j = 0; j < nv + nr; ++j)
    if (!in_basis[j] && std::abs(obj[j]) <= kPivotTol) sol.degenerate = true;
  return sol;
}

OfflineOptimum offline_optimum(const AdWordsInstance& inst) {
  inst.validate();
  const int m = inst.m, n = inst.n;

  // Zero-bid variables are dropped: they earn nothing, never tighten a
  // budget row, and their envelope gradient is x*(1-lambda) = 0.
  std::vector<int> var_slot, var_adv;
  std::vector<char> slot_used(m, 0), adv_used(n, 0);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < n; ++i) {
      if (inst.bid(j, i) > 0.0) {
        var_slot.push_back(j);
        var_adv.push_back(i);
        slot_used[j] = 1;
        adv_used[i] = 1;
      }
    }
  }

  OfflineOptimum out;
  out.allocation.assign(static_cast<size_t>(m) * n, 0.0);
  out.budget_duals.assign(n, 0.0);
  if (var_slot.empty()) return out;  // all-zero bids: OPT = 0

  std::vector<int> slot_row(m, -1), adv_row(n, -1);
  LpProblem p;
  p.num_vars = static_cast<int>(var_slot.size());
  int nr = 0;
  for (int j = 0; j < m; ++j)
    if (slot_used[j]) slot_row[j] = nr++;
  for (int i = 0; i < n; ++i)
    if (adv_used[i]) adv_row[i] = nr++;
  p.b.assign(nr, 0.0);
  for (int j = 0; j < m; ++j)
    if (slot_row[j] >= 0) p.b[slot_row[j]] = 1.0;
  for (int i = 0; i < n; ++i)
    if (adv_row[i] >= 0) p.b[adv_row[i]] = inst.budgets[i];
  p.c.resize(p.num_vars);
  p.A.assign(static_cast<size_t>(nr) * p.num_vars, 0.0);
  for (int k = 0; k < p.num_vars; ++k) {
    const double v = inst.bid(var_slot[k], var_adv[k]);
    p.c[k] = v;
    p.A[static_cast<size_t>(slot_row[var_slot[k]]) * p.num_vars + k] = 1.0;
    p.A[static_cast<size_t>(adv_row[var_adv[k]]) * p.num_vars + k] = v;
  }

  LpSolution sol = solve(p);
  if (sol.status != LpStatus::optimal)
    throw std::runtime_error("lp: offline optimum not optimal");
  out.value = sol.value;
  out.degenerate = sol.degenerate;
  for (int k = 0; k < p.num_vars; ++k)
    out.allocation[static_cast<size_t>(var_slot[k]) * n + var_adv[k]] = sol.x[k];
  for (int i = 0; i < n; ++i)
    if (adv_row[i] >= 0) out.budget_duals[i] = sol.duals[adv_row[i]];
  return out;
}

std::vector<double> offline_optimum_grad(const AdWordsInstance& inst,
                                         const OfflineOptimum& opt) {
  std::vector<double> g(static_cast<size_t>(inst.m) * inst.n, 0.0);
  for (int j = 0; j < inst.m; ++j)
    for (int i = 0; i < inst.n; ++i)
      g[static_cast<size_t>(j) * inst.n + i] =
          opt.allocation[static_cast<size_t>(j) * inst.n + i] *
          (1.0 - opt.budget_duals[i]);
  return g;
}

std::vector<double> offline_optimum_grad(const AdWordsInstance& inst) {
  return offline_optimum_grad(inst, offline_optimum(inst));
}

}  // namespace advalloc::lp
