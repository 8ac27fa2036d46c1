#include "advalloc/report.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "advalloc/baselines.hpp"
#include "advalloc/networks.hpp"
#include "doctest.h"

using advalloc::AdWordsInstance;
using advalloc::EvalRecord;
using advalloc::Mode;
using advalloc::SlotPolicy;
namespace dist = advalloc::dist;
namespace report = advalloc::report;

namespace {

// Canonical (unpermuted) triangular input: advertiser j bids 1 on the first
// (j+1)*B ads, budgets B.
AdWordsInstance canonical_triangular(int n, int B) {
  AdWordsInstance inst;
  inst.n = n;
  inst.m = n * B;
  inst.budgets.assign(n, static_cast<double>(B));
  inst.bids.assign(static_cast<size_t>(inst.m) * n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int row = 0; row < (j + 1) * B; ++row) inst.bid(row, j) = 1.0;
  return inst;
}

EvalRecord find_row(const std::vector<EvalRecord>& rows,
                    const std::string& algorithm,
                    const std::string& distribution) {
  for (const auto& r : rows)
    if (r.algorithm == algorithm && r.distribution == distribution) return r;
  REQUIRE(false);
  return {};
}

}  // namespace

TEST_CASE("eval_table reproduces the small benchmark revenues") {
  auto greedy = advalloc::make_baseline("greedy");
  auto msvv = advalloc::make_baseline("msvv");
  const std::vector<const SlotPolicy*> policies{greedy.get(), msvv.get()};
  const std::vector<dist::DistributionSpec> specs{
      dist::DistributionSpec::parse("triangular(5,5)"),
      dist::DistributionSpec::parse("thick_z(5,5)")};
  std::mt19937_64 rng(2024);
  const auto rows =
      report::eval_table(policies, specs, 100, 100, Mode::integral, rng);
  REQUIRE(rows.size() == 4);

  const auto m_tri = find_row(rows, "msvv", "triangular(5,5)");
  CHECK(std::abs(m_tri.mean_revenue - 17.16) <= 0.15);
  const auto g_tri = find_row(rows, "greedy", "triangular(5,5)");
  CHECK(std::abs(g_tri.mean_revenue - 17.12) <= 0.5);
  const auto m_z = find_row(rows, "msvv", "thick_z(5,5)");
  CHECK(std::abs(m_z.mean_revenue - 18.01) <= 0.2);
  const auto g_z = find_row(rows, "greedy", "thick_z(5,5)");
  CHECK(std::abs(g_z.mean_revenue - 15.9) <= 0.4);

  for (const auto& r : rows) {
    CHECK(r.m == 25);
    CHECK(r.n == 5);
    CHECK(r.opt == doctest::Approx(25.0).epsilon(1e-9));
    CHECK(r.cr >= 0.0);
    CHECK(r.cr <= 1.0 + 1e-9);
    CHECK(r.count == 100);
  }
}

TEST_CASE("eval_table on the 100x10 family matches the mid-scale benchmark") {
  auto greedy = advalloc::make_baseline("greedy");
  const std::vector<const SlotPolicy*> policies{greedy.get()};
  const std::vector<dist::DistributionSpec> specs{
      dist::DistributionSpec::parse("thick_z(10,10)")};
  std::mt19937_64 rng(5);
  const auto rows =
      report::eval_table(policies, specs, 100, 10, Mode::integral, rng);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].m == 100);
  CHECK(rows[0].n == 10);
  CHECK(std::abs(rows[0].mean_revenue - 58.54) <= 1.0);
}

TEST_CASE("eval_table is byte-reproducible and validates inputs") {
  auto greedy = advalloc::make_baseline("greedy");
  const std::vector<const SlotPolicy*> policies{greedy.get()};
  const std::vector<dist::DistributionSpec> specs{
      dist::DistributionSpec::parse("powerlaw(3)")};

  std::mt19937_64 rng_a(7), rng_b(7);
  const auto csv_a = report::eval_table_csv(
      report::eval_table(policies, specs, 10, 5, Mode::integral, rng_a));
  const auto csv_b = report::eval_table_csv(
      report::eval_table(policies, specs, 10, 5, Mode::integral, rng_b));
  CHECK(csv_a == csv_b);
  CHECK(csv_a.substr(0, csv_a.find('\n')) ==
        "algorithm,distribution,m,n,mode,mean_revenue,std,opt,cr");

  std::mt19937_64 rng(1);
  CHECK_THROWS_AS((void)report::eval_table({}, specs, 1, 1, Mode::integral, rng),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      (void)report::eval_table(policies, specs, 0, 1, Mode::integral, rng),
      std::invalid_argument);
  dist::DistributionSpec bad;
  bad.family = dist::Family::uniform_random;
  bad.m = 0;
  CHECK_THROWS_AS(
      (void)report::eval_table(policies, {bad}, 1, 1, Mode::integral, rng),
      std::invalid_argument);
}

TEST_CASE("single-slot sweeps show the scaled-bid switching point") {
  auto msvv = advalloc::make_baseline("msvv");
  auto greedy = advalloc::make_baseline("greedy");

  SUBCASE("bid sweep flips exactly at the opponent's bid") {
    report::ProbeSpec spec;
    spec.kind = report::ProbeKind::bid_sweep;
    spec.opponent_bid = 0.8;
    spec.opponent_remaining = 0.5;
    spec.grid = 101;
    for (const SlotPolicy* policy :
         {static_cast<const SlotPolicy*>(msvv.get()),
          static_cast<const SlotPolicy*>(greedy.get())}) {
      const auto curve = report::probe_single_slot(*policy, spec);
      REQUIRE(curve.size() == 101);
      for (const auto& pt : curve) {
        if (pt.x < 0.8 - 1e-12) CHECK(pt.p == 0.0);
        if (pt.x > 0.8 + 1e-12) CHECK(pt.p == 1.0);
        if (std::abs(pt.x - 0.8) <= 1e-12) CHECK(pt.p == 0.5);  // exact tie
      }
    }
  }

  SUBCASE("remaining-fraction sweep flips at the opponent's fraction") {
    report::ProbeSpec spec;
    spec.kind = report::ProbeKind::budget_sweep;
    spec.fixed_bid = 0.5;
    spec.opponent_remaining = 0.5;
    spec.grid = 101;
    const auto curve = report::probe_single_slot(*msvv, spec);
    for (const auto& pt : curve) {
      if (pt.x < 0.5 - 1e-12) CHECK(pt.p == 0.0);
      if (pt.x > 0.5 + 1e-12) CHECK(pt.p == 1.0);
      if (std::abs(pt.x - 0.5) <= 1e-12) CHECK(pt.p == 0.5);
    }
  }

  SUBCASE("a network policy produces a continuous curve") {
    std::mt19937_64 rng(3);
    advalloc::net::AlgNetConfig cfg;
    advalloc::net::LearnedPolicy policy(cfg,
                                        advalloc::net::alg_init(cfg, rng));
    report::ProbeSpec spec;
    spec.kind = report::ProbeKind::bid_sweep;
    spec.grid = 200;
    const auto curve = report::probe_single_slot(policy, spec);
    for (size_t k = 1; k < curve.size(); ++k)
      CHECK(std::abs(curve[k].p - curve[k - 1].p) < 0.5);
    for (const auto& pt : curve) {
      CHECK(pt.p >= 0.0);
      CHECK(pt.p <= 1.0);
    }
  }

  SUBCASE("probe validation") {
    report::ProbeSpec spec;
    spec.kind = report::ProbeKind::contour;
    CHECK_THROWS_AS((void)report::probe_single_slot(*msvv, spec),
                    std::invalid_argument);
    spec.kind = report::ProbeKind::bid_sweep;
    spec.opponent_bid = 1.5;
    CHECK_THROWS_AS((void)report::probe_single_slot(*msvv, spec),
                    std::invalid_argument);
    spec.opponent_bid = 0.8;
    spec.grid = 0;
    CHECK_THROWS_AS((void)report::probe_single_slot(*msvv, spec),
                    std::invalid_argument);
  }
}

TEST_CASE("contour grids match the closed-form level sets") {
  report::ProbeSpec spec;
  spec.kind = report::ProbeKind::contour;
  spec.grid = 100;

  SUBCASE("scaled-bid policy: winner set is x(1-e^-y) vs the opponent") {
    auto msvv = advalloc::make_baseline("msvv");
    const auto g = report::contour_grid(*msvv, spec);
    REQUIRE(g.grid == 100);
    REQUIRE(g.z.size() == 100 * 100);
    const double c = 0.8 * (1.0 - std::exp(-0.5));
    int checked = 0;
    for (int iy = 0; iy < 100; ++iy) {
      for (int ix = 0; ix < 100; ++ix) {
        const double score = g.x[ix] * (1.0 - std::exp(-g.y[iy]));
        const double z = g.z[static_cast<size_t>(iy) * 100 + ix];
        if (std::abs(score - c) < 1e-9) continue;  // knife edge, tie-dependent
        CHECK(z == (score > c ? 1.0 : 0.0));
        ++checked;
      }
    }
    CHECK(checked >= 99 * 99);
  }

  SUBCASE("greedy: vertical level lines once remaining exceeds the bid") {
    auto greedy = advalloc::make_baseline("greedy");
    const auto g = report::contour_grid(*greedy, spec);
    for (int ix = 0; ix < 100; ++ix) {
      double ref = -1.0;
      for (int iy = 0; iy < 100; ++iy) {
        if (g.y[iy] * 5.0 <= g.x[ix]) continue;  // truncated corner
        const double z = g.z[static_cast<size_t>(iy) * 100 + ix];
        if (ref < 0.0) ref = z;
        CHECK(z == ref);
        if (g.x[ix] < 0.8 - 1e-12) CHECK(z == 0.0);
        if (g.x[ix] > 0.8 + 1e-12) CHECK(z == 1.0);
      }
    }
  }

  SUBCASE("grid values stay within probability range") {
    std::mt19937_64 rng(4);
    advalloc::net::AlgNetConfig cfg;
    cfg.hidden = {8};
    advalloc::net::LearnedPolicy policy(cfg,
                                        advalloc::net::alg_init(cfg, rng));
    spec.grid = 20;
    const auto g = report::contour_grid(policy, spec);
    for (double z : g.z) {
      CHECK(z >= 0.0);
      CHECK(z <= 1.0);
    }
  }
}

TEST_CASE("spending trajectories: monotone, bounded, and consistent") {
  auto msvv = advalloc::make_baseline("msvv");
  const AdWordsInstance inst = canonical_triangular(10, 10);
  std::mt19937_64 rng(17);
  const auto curves = report::spending_trajectories(*msvv, inst, 100, rng);
  REQUIRE(curves.n == 10);
  REQUIRE(curves.m == 100);
  double final_total = 0.0;
  for (int i = 0; i < curves.n; ++i) {
    REQUIRE(curves.curves[i].size() == 101);
    CHECK(curves.curves[i][0] == 0.0);
    for (int j = 1; j <= curves.m; ++j) {
      CHECK(curves.curves[i][j] >= curves.curves[i][j - 1] - 1e-12);
      CHECK(curves.curves[i][j] <= 1.0 + 1e-9);
    }
    final_total += curves.curves[i][curves.m] * inst.budgets[i];
  }
  // Re-accumulated spend equals the averaged rollout revenue.
  CHECK(final_total == doctest::Approx(curves.mean_revenue).epsilon(1e-9));
  // The advertiser bidding on every ad ends almost fully spent.
  CHECK(curves.curves[9][curves.m] >= 0.9);

  CHECK_THROWS_AS(
      (void)report::spending_trajectories(*msvv, inst, 0, rng),
      std::invalid_argument);
}

TEST_CASE("cr_trace groups experience instances by batch minimum") {
  auto msvv = advalloc::make_baseline("msvv");
  auto greedy = advalloc::make_baseline("greedy");
  std::mt19937_64 rng(23);
  std::vector<AdWordsInstance> experience;
  for (int k = 0; k < 25; ++k)
    experience.push_back(dist::triangular(5, 5, rng));

  SUBCASE("single instance, single policy equals its deterministic CR") {
    std::mt19937_64 tmp(0);
    const auto trace = report::cr_trace({msvv.get()}, {experience[0]}, 10);
    REQUIRE(trace.batch_min.size() == 1);
    REQUIRE(trace.batch_min[0].size() == 1);
    const EvalRecord rec = advalloc::competitive_ratio(
        *msvv, experience[0], Mode::fractional, 1, tmp);
    CHECK(trace.batch_min[0][0] == doctest::Approx(rec.cr).epsilon(1e-12));
  }

  SUBCASE("batch minima bound the batch means") {
    const auto trace =
        report::cr_trace({msvv.get(), greedy.get()}, experience, 10);
    REQUIRE(trace.names == std::vector<std::string>{"msvv", "greedy"});
    REQUIRE(trace.batch_min[0].size() == 3);  // 10 + 10 + trailing 5
    std::mt19937_64 tmp(0);
    for (size_t p = 0; p < 2; ++p) {
      const SlotPolicy& policy = p == 0 ? *msvv : *greedy;
      for (size_t b = 0; b < 3; ++b) {
        const size_t lo = b * 10;
        const size_t hi = std::min<size_t>(lo + 10, experience.size());
        double mn = 2.0, mean = 0.0;
        for (size_t k = lo; k < hi; ++k) {
          const double cr =
              advalloc::competitive_ratio(policy, experience[k],
                                          Mode::fractional, 1, tmp)
                  .cr;
          mn = std::min(mn, cr);
          mean += cr;
        }
        mean /= static_cast<double>(hi - lo);
        CHECK(trace.batch_min[p][b] == doctest::Approx(mn).epsilon(1e-12));
        CHECK(trace.batch_min[p][b] <= mean + 1e-12);
        CHECK(trace.batch_min[p][b] >= 0.0);
        CHECK(trace.batch_min[p][b] <= 1.0 + 1e-9);
      }
    }
  }

  SUBCASE("errors") {
    CHECK_THROWS_AS((void)report::cr_trace({}, experience, 10),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)report::cr_trace({msvv.get()}, {}, 10),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)report::cr_trace({msvv.get()}, experience, 0),
                    std::invalid_argument);
  }
}

TEST_CASE("csv emitters have stable headers and shapes") {
  CHECK(report::curve_csv({{0.0, 0.5}, {1.0, 1.0}}) ==
        "sweep,alloc_prob\n0,0.5\n1,1\n");

  report::ContourGrid g;
  g.grid = 2;
  g.x = {0.0, 1.0};
  g.y = {0.0, 1.0};
  g.z = {0.0, 0.25, 0.5, 1.0};
  CHECK(report::contour_csv(g) ==
        "bid,remaining_frac,alloc_prob\n0,0,0\n1,0,0.25\n0,1,0.5\n1,1,1\n");

  report::SpendCurves sc;
  sc.m = 1;
  sc.n = 2;
  sc.curves = {{0.0, 0.5}, {0.0, 1.0}};
  CHECK(report::spending_csv(sc) == "slot,adv0,adv1\n0,0,0\n1,0.5,1\n");

  report::CrTrace trace;
  trace.names = {"a", "b"};
  trace.batch_min = {{0.5, 0.6}, {0.7, 0.8}};
  CHECK(report::cr_trace_csv(trace) == "batch,a,b\n0,0.5,0.7\n1,0.6,0.8\n");

  CHECK(report::probe_kind_from_name("contour") == report::ProbeKind::contour);
  CHECK(report::probe_kind_name(report::ProbeKind::budget_sweep) ==
        "budget_sweep");
  CHECK_THROWS_AS((void)report::probe_kind_from_name("nope"),
                  std::invalid_argument);
}
