#include "advalloc/env.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "advalloc/lp.hpp"

namespace advalloc {

namespace {
constexpr double kSimplexTol = 1e-9;

void check_allocation(std::span<const double> alloc, int n) {
  if (static_cast<int>(alloc.size()) != n)
    throw std::invalid_argument("env: allocation length mismatch");
  double total = 0.0;
  for (double a : alloc) {
    if (a < -1e-12)
      throw std::invalid_argument("env: negative allocation weight");
    total += a;
  }
  if (total > 1.0 + kSimplexTol)
    throw std::invalid_argument(
        "env: allocation is not a simplex vector (sum > 1)");
}
}  // namespace

std::string mode_name(Mode mode) {
  return mode == Mode::fractional ? "fractional" : "integral";
}

ad::Var SlotPolicy::allocate(ad::Tape& tape, ad::Var params,
                             const AdWordsInstance& inst, ad::Var remaining,
                             ad::Var bids_row, int slot) const {
  (void)params;
  (void)bids_row;
  std::vector<double> x = allocate(inst, tape.value(remaining), slot);
  return tape.leaf(std::span<const double>(x));
}

std::pair<MarketState, std::vector<double>> step(
    const MarketState& state, std::span<const double> bids_row,
    std::span<const double> allocation) {
  const int n = static_cast<int>(state.remaining.size());
  if (static_cast<int>(bids_row.size()) != n)
    throw std::invalid_argument("env: bid row length mismatch");
  check_allocation(allocation, n);
  MarketState next = state;
  std::vector<double> spend(n, 0.0);
  for (int i = 0; i < n; ++i) {
    spend[i] = std::min(allocation[i] * bids_row[i], state.remaining[i]);
    next.remaining[i] = state.remaining[i] - spend[i];
  }
  next.slot_index = state.slot_index + 1;
  return {std::move(next), std::move(spend)};
}

RolloutResult rollout(const SlotPolicy& policy, const AdWordsInstance& inst,
                      Mode mode, std::mt19937_64& rng) {
  inst.validate();
  const int m = inst.m, n = inst.n;
  RolloutResult out;
  out.per_slot_spend.assign(static_cast<size_t>(m) * n, 0.0);
  MarketState state;
  state.remaining = inst.budgets;
  state.slot_index = 0;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> one_hot(n, 0.0);

  for (int j = 0; j < m; ++j) {
    std::span<const double> row(inst.bids.data() + static_cast<size_t>(j) * n,
                                static_cast<size_t>(n));
    std::vector<double> alloc = policy.allocate(inst, state.remaining, j);
    check_allocation(alloc, n);
    const std::vector<double>* use = &alloc;
    if (mode == Mode::integral) {
      // Sample one advertiser; probability shortfall from 1 shows nothing.
      const double u = u01(rng);
      double acc = 0.0;
      int pick = -1;
      for (int i = 0; i < n; ++i) {
        acc += alloc[i];
        if (u < acc) {
          pick = i;
          break;
        }
      }
      std::fill(one_hot.begin(), one_hot.end(), 0.0);
      if (pick >= 0) one_hot[pick] = 1.0;
      use = &one_hot;
    }
    auto [next, spend] = step(state, row, *use);
    for (int i = 0; i < n; ++i) {
      out.per_slot_spend[static_cast<size_t>(j) * n + i] = spend[i];
      out.revenue += spend[i];
    }
    state = std::move(next);
  }

  // Budget conservation is structural; violation means an implementation bug.
  for (int i = 0; i < n; ++i) {
    double spent = 0.0;
    for (int j = 0; j < m; ++j)
      spent += out.per_slot_spend[static_cast<size_t>(j) * n + i];
    if (spent > inst.budgets[i] + 1e-9)
      throw std::logic_error("env: budget conservation violated");
  }
  out.final_state = std::move(state);
  return out;
}

std::string eval_record_csv_header() {
  return "algorithm,distribution,m,n,mode,mean_revenue,std,opt,cr";
}

std::string to_csv_row(const EvalRecord& rec) {
  std::ostringstream ss;
  ss << std::setprecision(10);
  ss << rec.algorithm << ',' << rec.distribution << ',' << rec.m << ','
     << rec.n << ',' << mode_name(rec.mode) << ',' << rec.mean_revenue << ','
     << rec.std_dev << ',' << rec.opt << ',' << rec.cr;
  return ss.str();
}

EvalRecord competitive_ratio(const SlotPolicy& policy,
                             const AdWordsInstance& inst, Mode mode, int runs,
                             std::mt19937_64& rng,
                             const std::string& distribution) {
  if (runs < 1) throw std::invalid_argument("env: runs must be >= 1");
  const double opt = lp::offline_optimum(inst).value;
  const int count = mode == Mode::fractional ? 1 : runs;

  double sum = 0.0, sumsq = 0.0;
  for (int r = 0; r < count; ++r) {
    const double rev = rollout(policy, inst, mode, rng).revenue;
    if (rev > opt + 1e-7 * (1.0 + std::abs(opt)))
      throw std::logic_error("env: rollout revenue exceeds offline optimum");
    sum += rev;
    sumsq += rev * rev;
  }

  EvalRecord rec;
  rec.algorithm = policy.name();
  rec.distribution = distribution;
  rec.m = inst.m;
  rec.n = inst.n;
  rec.mode = mode;
  rec.count = count;
  rec.mean_revenue = sum / count;
  rec.std_dev = count > 1 ? std::sqrt(std::max(
                                0.0, (sumsq - sum * sum / count) / (count - 1)))
                          : 0.0;
  rec.opt = opt;
  rec.cr = opt > 0.0 ? rec.mean_revenue / opt : 1.0;
  return rec;
}

ad::Var rollout_revenue(ad::Tape& tape, const SlotPolicy& policy,
                        ad::Var params, const AdWordsInstance& inst,
                        ad::Var bids_matrix) {
  const int m = inst.m, n = inst.n;
  if (tape.size(bids_matrix) != m * n)
    throw std::invalid_argument("env: bids matrix Var has wrong size");
  ad::Var remaining = tape.leaf(std::span<const double>(inst.budgets));
  std::vector<ad::Var> slot_revenue;
  slot_revenue.reserve(m);
  for (int j = 0; j < m; ++j) {
    ad::Var row = tape.slice(bids_matrix, j * n, n);
    ad::Var alloc = policy.allocate(tape, params, inst, remaining, row, j);
    check_allocation(tape.value(alloc), n);
    ad::Var spend = tape.minimum(tape.mul(alloc, row), remaining);
    remaining = tape.sub(remaining, spend);
    slot_revenue.push_back(tape.sum(spend));
  }
  return tape.sum(tape.concat(slot_revenue));
}

namespace {
CrGrad grad_common(const SlotPolicy& policy, const ad::ParamVector& params,
                   const AdWordsInstance& inst, double opt_value,
                   const std::vector<double>* opt_grad, bool wrt_instance,
                   bool degenerate) {
  CrGrad out;
  out.degenerate_opt = degenerate;
  if (opt_value <= 1e-12) {
    // All-zero optimum: cr = 1 by convention, locally flat.
    out.cr = 1.0;
    out.grad.assign(wrt_instance ? inst.bids.size() : params.values.size(),
                    0.0);
    return out;
  }
  ad::Tape tape;
  ad::Var p = tape.leaf(std::span<const double>(params.values));
  ad::Var bids = tape.leaf(std::span<const double>(inst.bids));
  ad::Var revenue = rollout_revenue(tape, policy, p, inst, bids);
  ad::Var opt_var = wrt_instance
                        ? tape.external_scalar(bids, opt_value, *opt_grad)
                        : tape.leaf(opt_value);
  ad::Var cr = tape.div(revenue, opt_var);
  out.cr = tape.scalar(cr);
  tape.backward(cr);
  auto g = tape.adjoint(wrt_instance ? bids : p);
  out.grad.assign(g.begin(), g.end());
  return out;
}
}  // namespace

CrGrad cr_grad_params(const SlotPolicy& policy, const ad::ParamVector& params,
                      const AdWordsInstance& inst, double opt_value) {
  return grad_common(policy, params, inst, opt_value, nullptr, false, false);
}

CrGrad cr_grad_params(const SlotPolicy& policy, const ad::ParamVector& params,
                      const AdWordsInstance& inst) {
  return cr_grad_params(policy, params, inst,
                        lp::offline_optimum(inst).value);
}

CrGrad cr_grad_instance(const SlotPolicy& policy,
                        const ad::ParamVector& params,
                        const AdWordsInstance& inst) {
  lp::OfflineOptimum opt = lp::offline_optimum(inst);
  std::vector<double> og = lp::offline_optimum_grad(inst, opt);
  return grad_common(policy, params, inst, opt.value, &og, true,
                     opt.degenerate);
}

}  // namespace advalloc
