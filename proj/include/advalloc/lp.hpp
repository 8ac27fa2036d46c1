#pragma once
// Dense tableau simplex for small linear programs, and the AdWords offline
// optimum built on it: value, maximizing allocation, budget duals, and the
// envelope-theorem gradient of the optimum with respect to the bid matrix.

#include <vector>

#include "advalloc/instance.hpp"

namespace advalloc::lp {

enum class LpStatus { optimal, unbounded, infeasible };

// maximize c.x  subject to  A.x <= b, x >= 0, with b >= 0 so the slack basis
// is feasible and no phase-1 is needed.
struct LpProblem {
  int num_vars = 0;
  std::vector<double> c;  // num_vars
  std::vector<double> A;  // num_rows * num_vars, row-major
  std::vector<double> b;  // num_rows, entrywise >= 0
  int num_rows() const { return static_cast<int>(b.size()); }
};

struct LpSolution {
  LpStatus status = LpStatus::optimal;
  double value = 0.0;
  std::vector<double> x;      // primal optimum (num_vars)
  std::vector<double> duals;  // one multiplier per constraint row
  int iterations = 0;
  // Degenerate basis or alternate optimum: duals/allocation may be one of
  // several valid choices, so envelope gradients are subgradients.
  bool degenerate = false;
};

// Bland's rule (anti-cycling), pivot tolerance 1e-9, iteration cap 10,000
// (exceeding it throws: it signals numerical trouble on these tiny LPs).
LpSolution solve(const LpProblem& problem);

// maximize sum v[j,i]*x[j,i]
//   s.t.  sum_i x[j,i] <= 1          (each ad shown at most once)
//         sum_j v[j,i]*x[j,i] <= B_i (budget)
//         x >= 0
struct OfflineOptimum {
  double value = 0.0;
  std::vector<double> allocation;    // m*n row-major
  std::vector<double> budget_duals;  // n
  bool degenerate = false;
};

OfflineOptimum offline_optimum(const AdWordsInstance& inst);

// d OPT / d v[j,i] = x*[j,i] * (1 - lambda*_i): the bid enters the objective
// once and advertiser i's budget row once. Subgradient when `degenerate`.
std::vector<double> offline_optimum_grad(const AdWordsInstance& inst,
                                         const OfflineOptimum& opt);
std::vector<double> offline_optimum_grad(const AdWordsInstance& inst);

}  // namespace advalloc::lp
