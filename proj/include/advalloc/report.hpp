#pragma once
// Evaluation probes: benchmark tables, single-slot behavior sweeps, decision
// contours, spending trajectories, and experience-array CR traces, all with
// CSV emission for external plotting.

#include <random>
#include <string>
#include <vector>

#include "advalloc/distributions.hpp"
#include "advalloc/env.hpp"
#include "advalloc/instance.hpp"

namespace advalloc::report {

enum class ProbeKind {
  bid_sweep,     // two advertisers, sweep 0's bid, fix 1's bid
  budget_sweep,  // equal bids, sweep 0's remaining fraction
  contour,       // grid over (bid, remaining fraction) of advertiser 0
  spending,
  cr_trace,
  table,
};

std::string probe_kind_name(ProbeKind kind);
ProbeKind probe_kind_from_name(const std::string& name);

struct ProbeSpec {
  ProbeKind kind = ProbeKind::bid_sweep;
  double opponent_bid = 0.8;        // advertiser 1's fixed bid
  double opponent_remaining = 0.5;  // advertiser 1's remaining fraction
  double fixed_bid = 0.5;           // both bids in budget_sweep
  double budget = 5.0;              // uniform budget for both advertisers
  int grid = 100;                   // sweep points per axis
  int runs = 100;                   // integral rollouts (spending probe)

  // Throws std::invalid_argument: bids/fractions within [0,1], counts >= 1,
  // budget > 0.
  void validate() const;
};

// Cross product of policies and input families. Per instance the revenue is
// averaged over `runs` rollouts (integral mode) or taken from the single
// deterministic rollout (fractional mode); the row aggregates over `samples`
// instances: mean revenue, sample standard deviation, mean optimum, and the
// mean of per-instance revenue/OPT ratios. Every policy sees the same
// instances, and the output depends only on the incoming rng state.
std::vector<EvalRecord> eval_table(
    const std::vector<const SlotPolicy*>& policies,
    const std::vector<dist::DistributionSpec>& specs, int samples, int runs,
    Mode mode, std::mt19937_64& rng);

std::string eval_table_csv(const std::vector<EvalRecord>& records);

struct CurvePoint {
  double x = 0.0;  // sweep value
  double p = 0.0;  // allocation probability of advertiser 0
};

// One ad slot, two advertisers. bid_sweep: advertiser 0's bid runs over a
// grid of [0,1] while 1 bids opponent_bid and both have remaining fraction
// opponent_remaining. budget_sweep: both bid fixed_bid while 0's remaining
// fraction runs over the grid and 1's stays at opponent_remaining.
std::vector<CurvePoint> probe_single_slot(const SlotPolicy& policy,
                                          const ProbeSpec& spec);

std::string curve_csv(const std::vector<CurvePoint>& points);

struct ContourGrid {
  int grid = 0;
  std::vector<double> x;  // grid values (bid axis)
  std::vector<double> y;  // grid values (remaining-fraction axis)
  std::vector<double> z;  // grid*grid, z[iy*grid+ix] = P(advertiser 0 wins)
};

// Advertiser 0 at (bid x, remaining fraction y) against a fixed opponent.
ContourGrid contour_grid(const SlotPolicy& policy, const ProbeSpec& spec);

std::string contour_csv(const ContourGrid& g);

struct SpendCurves {
  int m = 0;
  int n = 0;
  // curves[i][j] = advertiser i's expected cumulative spend fraction after
  // the first j slots; m+1 points per curve, starting at 0.
  std::vector<std::vector<double>> curves;
  double mean_revenue = 0.0;  // over the same rollouts
};

SpendCurves spending_trajectories(const SlotPolicy& policy,
                                  const AdWordsInstance& inst, int runs,
                                  std::mt19937_64& rng);

std::string spending_csv(const SpendCurves& curves);

struct CrTrace {
  std::vector<std::string> names;             // one per policy
  std::vector<std::vector<double>> batch_min;  // [policy][batch]
  int group = 10;
};

// Deterministic fractional CR of each policy on each stored instance,
// grouped into consecutive batches of `group`; each batch reports its
// minimum. A trailing partial batch is kept.
CrTrace cr_trace(const std::vector<const SlotPolicy*>& policies,
                 const std::vector<AdWordsInstance>& experience,
                 int group = 10);

std::string cr_trace_csv(const CrTrace& trace);

}  // namespace advalloc::report
