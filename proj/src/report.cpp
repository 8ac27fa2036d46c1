#include "advalloc/report.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "advalloc/lp.hpp"

namespace advalloc::report {

namespace {

std::vector<double> linspace01(int count) {
  std::vector<double> xs(count);
  if (count == 1) {
    xs[0] = 0.0;
    return xs;
  }
  for (int i = 0; i < count; ++i)
    xs[i] = static_cast<double>(i) / (count - 1);
  return xs;
}

double allocate_first(const SlotPolicy& policy, double bid0, double bid1,
                      double rem0, double rem1, double budget) {
  AdWordsInstance inst;
  inst.m = 1;
  inst.n = 2;
  inst.bids = {bid0, bid1};
  inst.budgets = {budget, budget};
  const std::vector<double> remaining = {rem0, rem1};
  return policy.allocate(inst, remaining, 0)[0];
}

std::ostream& csv_stream(std::ostringstream& ss) {
  ss << std::setprecision(10);
  return ss;
}

}  // namespace

std::string probe_kind_name(ProbeKind kind) {
  switch (kind) {
    case ProbeKind::bid_sweep: return "bid_sweep";
    case ProbeKind::budget_sweep: return "budget_sweep";
    case ProbeKind::contour: return "contour";
    case ProbeKind::spending: return "spending";
    case ProbeKind::cr_trace: return "cr_trace";
    case ProbeKind::table: return "table";
  }
  return "?";
}

ProbeKind probe_kind_from_name(const std::string& name) {
  if (name == "bid_sweep") return ProbeKind::bid_sweep;
  if (name == "budget_sweep") return ProbeKind::budget_sweep;
  if (name == "contour") return ProbeKind::contour;
  if (name == "spending") return ProbeKind::spending;
  if (name == "cr_trace") return ProbeKind::cr_trace;
  if (name == "table") return ProbeKind::table;
  throw std::invalid_argument("unknown probe kind: " + name);
}

void ProbeSpec::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in01(opponent_bid) || !in01(opponent_remaining) || !in01(fixed_bid))
    throw std::invalid_argument("probe: bids and fractions must be in [0,1]");
  if (grid < 1 || runs < 1)
    throw std::invalid_argument("probe: counts must be >= 1");
  if (!(budget > 0.0)) throw std::invalid_argument("probe: budget must be > 0");
}

std::vector<EvalRecord> eval_table(
    const std::vector<const SlotPolicy*>& policies,
    const std::vector<dist::DistributionSpec>& specs, int samples, int runs,
    Mode mode, std::mt19937_64& rng) {
  if (policies.empty() || specs.empty())
    throw std::invalid_argument("eval_table: need at least one policy and one"
                                " distribution");
  if (samples < 1 || runs < 1)
    throw std::invalid_argument("eval_table: samples and runs must be >= 1");
  std::vector<EvalRecord> out;
  for (const auto& spec : specs) {
    spec.validate();
    std::mt19937_64 gen_rng(rng());
    std::vector<AdWordsInstance> instances;
    instances.reserve(samples);
    for (int s = 0; s < samples; ++s)
      instances.push_back(dist::sample(spec, gen_rng));
    const uint64_t eval_seed = rng();
    for (const SlotPolicy* policy : policies) {
      std::mt19937_64 eval_rng(eval_seed);
      double rev_sum = 0.0, rev_sq = 0.0, opt_sum = 0.0, cr_sum = 0.0;
      for (const auto& inst : instances) {
        const EvalRecord rec =
            competitive_ratio(*policy, inst, mode, runs, eval_rng, spec.name());
        rev_sum += rec.mean_revenue;
        rev_sq += rec.mean_revenue * rec.mean_revenue;
        opt_sum += rec.opt;
        cr_sum += rec.cr;
      }
      EvalRecord row;
      row.algorithm = policy->name();
      row.distribution = spec.name();
      row.m = instances.front().m;
      row.n = instances.front().n;
      row.mode = mode;
      row.count = samples;
      row.mean_revenue = rev_sum / samples;
      row.std_dev =
          samples > 1
              ? std::sqrt(std::max(
                    0.0, (rev_sq - rev_sum * rev_sum / samples) / (samples - 1)))
              : 0.0;
      row.opt = opt_sum / samples;
      row.cr = cr_sum / samples;
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::string eval_table_csv(const std::vector<EvalRecord>& records) {
  std::ostringstream ss;
  ss << eval_record_csv_header() << "\n";
  for (const auto& rec : records) ss << to_csv_row(rec) << "\n";
  return ss.str();
}

std::vector<CurvePoint> probe_single_slot(const SlotPolicy& policy,
                                          const ProbeSpec& spec) {
  spec.validate();
  if (spec.kind != ProbeKind::bid_sweep && spec.kind != ProbeKind::budget_sweep)
    throw std::invalid_argument("probe_single_slot: kind must be bid_sweep or"
                                " budget_sweep");
  const std::vector<double> xs = linspace01(spec.grid);
  std::vector<CurvePoint> points;
  points.reserve(xs.size());
  const double opp_rem = spec.opponent_remaining * spec.budget;
  for (double x : xs) {
    double p;
    if (spec.kind == ProbeKind::bid_sweep) {
      p = allocate_first(policy, x, spec.opponent_bid, opp_rem, opp_rem,
                         spec.budget);
    } else {
      p = allocate_first(policy, spec.fixed_bid, spec.fixed_bid,
                         x * spec.budget, opp_rem, spec.budget);
    }
    points.push_back({x, p});
  }
  return points;
}

std::string curve_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream ss;
  csv_stream(ss) << "sweep,alloc_prob\n";
  for (const auto& pt : points) ss << pt.x << "," << pt.p << "\n";
  return ss.str();
}

ContourGrid contour_grid(const SlotPolicy& policy, const ProbeSpec& spec) {
  spec.validate();
  ContourGrid g;
  g.grid = spec.grid;
  g.x = linspace01(spec.grid);
  g.y = g.x;
  g.z.resize(static_cast<size_t>(spec.grid) * spec.grid);
  const double opp_rem = spec.opponent_remaining * spec.budget;
  for (int iy = 0; iy < spec.grid; ++iy)
    for (int ix = 0; ix < spec.grid; ++ix)
      g.z[static_cast<size_t>(iy) * spec.grid + ix] =
          allocate_first(policy, g.x[ix], spec.opponent_bid,
                         g.y[iy] * spec.budget, opp_rem, spec.budget);
  return g;
}

std::string contour_csv(const ContourGrid& g) {
  std::ostringstream ss;
  csv_stream(ss) << "bid,remaining_frac,alloc_prob\n";
  for (int iy = 0; iy < g.grid; ++iy)
    for (int ix = 0; ix < g.grid; ++ix)
      ss << g.x[ix] << "," << g.y[iy] << ","
         << g.z[static_cast<size_t>(iy) * g.grid + ix] << "\n";
  return ss.str();
}

SpendCurves spending_trajectories(const SlotPolicy& policy,
                                  const AdWordsInstance& inst, int runs,
                                  std::mt19937_64& rng) {
  inst.validate();
  if (runs < 1)
    throw std::invalid_argument("spending_trajectories: runs must be >= 1");
  SpendCurves out;
  out.m = inst.m;
  out.n = inst.n;
  out.curves.assign(inst.n, std::vector<double>(inst.m + 1, 0.0));
  double revenue = 0.0;
  for (int r = 0; r < runs; ++r) {
    const RolloutResult res = rollout(policy, inst, Mode::integral, rng);
    revenue += res.revenue;
    for (int i = 0; i < inst.n; ++i) {
      double acc = 0.0;
      for (int j = 0; j < inst.m; ++j) {
        acc += res.per_slot_spend[static_cast<size_t>(j) * inst.n + i];
        out.curves[i][j + 1] += acc;
      }
    }
  }
  for (int i = 0; i < inst.n; ++i)
    for (int j = 1; j <= inst.m; ++j)
      out.curves[i][j] /= runs * inst.budgets[i];
  out.mean_revenue = revenue / runs;
  return out;
}

std::string spending_csv(const SpendCurves& curves) {
  std::ostringstream ss;
  csv_stream(ss) << "slot";
  for (int i = 0; i < curves.n; ++i) ss << ",adv" << i;
  ss << "\n";
  for (int j = 0; j <= curves.m; ++j) {
    ss << j;
    for (int i = 0; i < curves.n; ++i) ss << "," << curves.curves[i][j];
    ss << "\n";
  }
  return ss.str();
}

CrTrace cr_trace(const std::vector<const SlotPolicy*>& policies,
                 const std::vector<AdWordsInstance>& experience, int group) {
  if (policies.empty())
    throw std::invalid_argument("cr_trace: need at least one policy");
  if (experience.empty())
    throw std::invalid_argument("cr_trace: experience array is empty");
  if (group < 1) throw std::invalid_argument("cr_trace: group must be >= 1");
  CrTrace trace;
  trace.group = group;
  std::mt19937_64 unused_rng(0);  // fractional mode consumes no randomness
  for (const SlotPolicy* policy : policies) {
    trace.names.push_back(policy->name());
    std::vector<double> mins;
    double cur = 0.0;
    int in_batch = 0;
    for (const auto& inst : experience) {
      const EvalRecord rec =
          competitive_ratio(*policy, inst, Mode::fractional, 1, unused_rng);
      cur = in_batch == 0 ? rec.cr : std::min(cur, rec.cr);
      if (++in_batch == group) {
        mins.push_back(cur);
        in_batch = 0;
      }
    }
    if (in_batch > 0) mins.push_back(cur);
    trace.batch_min.push_back(std::move(mins));
  }
  return trace;
}

std::string cr_trace_csv(const CrTrace& trace) {
  std::ostringstream ss;
  csv_stream(ss) << "batch";
  for (const auto& name : trace.names) ss << "," << name;
  ss << "\n";
  const size_t batches =
      trace.batch_min.empty() ? 0 : trace.batch_min.front().size();
  for (size_t b = 0; b < batches; ++b) {
    ss << b;
    for (const auto& series : trace.batch_min) ss << "," << series[b];
    ss << "\n";
  }
  return ss.str();
}

}  // namespace advalloc::report
