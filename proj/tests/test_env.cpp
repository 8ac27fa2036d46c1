#include "doctest.h"

#include <cmath>
#include <random>
#include <vector>

#include "advalloc/env.hpp"
#include "advalloc/lp.hpp"

using namespace advalloc;

namespace {

struct UniformPolicy : SlotPolicy {
  std::string name() const override { return "uniform"; }
  std::vector<double> allocate(const AdWordsInstance& inst,
                               std::span<const double>, int) const override {
    return std::vector<double>(inst.n, 1.0 / inst.n);
  }
};

// Two-weight linear-softmax policy over (bid, remaining-budget fraction);
// differentiable on the tape path, used as the gradient-check subject.
struct TinySoftmaxPolicy : SlotPolicy {
  std::string name() const override { return "tiny_softmax"; }

  std::vector<double> allocate(const AdWordsInstance& inst,
                               std::span<const double> remaining,
                               int slot) const override {
    std::vector<double> scores(inst.n);
    for (int i = 0; i < inst.n; ++i)
      scores[i] = w[0] * inst.bid(slot, i) +
                  w[1] * remaining[i] / inst.budgets[i];
    double mx = *std::max_element(scores.begin(), scores.end());
    double denom = 0.0;
    for (double& s : scores) {
      s = std::exp(s - mx);
      denom += s;
    }
    for (double& s : scores) s /= denom;
    return scores;
  }

  ad::Var allocate(ad::Tape& t, ad::Var params, const AdWordsInstance& inst,
                   ad::Var remaining, ad::Var bids_row, int) const override {
    ad::Var w0 = t.index(params, 0);
    ad::Var w1 = t.index(params, 1);
    std::vector<ad::Var> scores;
    for (int i = 0; i < inst.n; ++i) {
      ad::Var term = t.add(t.mul(w0, t.index(bids_row, i)),
                           t.scale(t.mul(w1, t.index(remaining, i)),
                                   1.0 / inst.budgets[i]));
      scores.push_back(term);
    }
    return t.softmax(t.concat(scores));
  }

  double w[2] = {1.0, 0.5};
};

AdWordsInstance random_instance(int m, int n, std::mt19937_64& rng) {
  AdWordsInstance inst;
  inst.m = m;
  inst.n = n;
  std::uniform_real_distribution<double> ub(0.05, 1.0);
  std::uniform_real_distribution<double> uB(0.4, 1.5);
  inst.bids.resize(static_cast<size_t>(m) * n);
  for (double& v : inst.bids) v = ub(rng);
  inst.budgets.resize(n);
  for (double& v : inst.budgets) v = uB(rng);
  return inst;
}

}  // namespace

TEST_CASE("step applies the truncated spend rule") {
  MarketState s;
  s.remaining = {5.0, 2.0, 1.0};
  std::vector<double> bids = {0.4, 0.9, 0.2};

  SUBCASE("one-hot with ample budget") {
    std::vector<double> alloc = {1.0, 0.0, 0.0};
    auto [next, spend] = step(s, bids, alloc);
    CHECK(spend == std::vector<double>{0.4, 0.0, 0.0});
    CHECK(next.remaining[0] == doctest::Approx(4.6));
    CHECK(next.slot_index == 1);
  }
  SUBCASE("one-hot truncated by a nearly spent budget") {
    s.remaining = {0.1, 2.0, 1.0};
    std::vector<double> alloc = {1.0, 0.0, 0.0};
    auto [next, spend] = step(s, bids, alloc);
    CHECK(spend[0] == doctest::Approx(0.1));
    CHECK(next.remaining[0] == doctest::Approx(0.0));
  }
  SUBCASE("uniform split with equal bids") {
    s.remaining = {9.0, 9.0, 9.0};
    std::vector<double> eq = {0.6, 0.6, 0.6};
    std::vector<double> alloc(3, 1.0 / 3.0);
    auto [next, spend] = step(s, eq, alloc);
    for (double sp : spend) CHECK(sp == doctest::Approx(0.2));
  }
  SUBCASE("negative and oversized allocations are rejected") {
    std::vector<double> neg = {-0.1, 0.5, 0.5};
    CHECK_THROWS_AS(step(s, bids, neg), std::invalid_argument);
    std::vector<double> big = {0.8, 0.8, 0.8};
    CHECK_THROWS_AS(step(s, bids, big), std::invalid_argument);
  }
}

TEST_CASE("rollout honors budget caps and zero instances") {
  std::mt19937_64 rng(3);
  SUBCASE("single advertiser with a binding budget") {
    AdWordsInstance inst;
    inst.m = 5;
    inst.n = 1;
    inst.bids.assign(5, 1.0);
    inst.budgets = {3.0};
    UniformPolicy pol;
    for (Mode mode : {Mode::fractional, Mode::integral}) {
      RolloutResult r = rollout(pol, inst, mode, rng);
      CHECK(r.revenue == doctest::Approx(3.0));
      CHECK(r.final_state.remaining[0] == doctest::Approx(0.0));
    }
  }
  SUBCASE("zero bids earn nothing") {
    AdWordsInstance inst;
    inst.m = 4;
    inst.n = 3;
    inst.bids.assign(12, 0.0);
    inst.budgets = {1.0, 1.0, 1.0};
    UniformPolicy pol;
    CHECK(rollout(pol, inst, Mode::fractional, rng).revenue == 0.0);
    CHECK(rollout(pol, inst, Mode::integral, rng).revenue == 0.0);
  }
}

TEST_CASE("fractional rollouts are deterministic, budgets conserved") {
  std::mt19937_64 rng(5);
  TinySoftmaxPolicy pol;
  for (int trial = 0; trial < 10; ++trial) {
    AdWordsInstance inst = random_instance(12, 4, rng);
    std::mt19937_64 r1(1), r2(99);
    RolloutResult a = rollout(pol, inst, Mode::fractional, r1);
    RolloutResult b = rollout(pol, inst, Mode::fractional, r2);
    CHECK(a.revenue == b.revenue);  // bitwise: pure function of inputs
    double total = 0.0;
    for (int i = 0; i < inst.n; ++i) {
      double spent = 0.0;
      for (int j = 0; j < inst.m; ++j)
        spent += a.per_slot_spend[static_cast<size_t>(j) * inst.n + i];
      CHECK(spent <= inst.budgets[i] + 1e-9);
      CHECK(a.final_state.remaining[i] ==
            doctest::Approx(inst.budgets[i] - spent).epsilon(1e-12));
      total += spent;
    }
    CHECK(a.revenue == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("integral sampling matches the fractional mean in the small-bids regime") {
  AdWordsInstance inst;
  inst.m = 8;
  inst.n = 3;
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> ub(0.01, 0.05);
  inst.bids.resize(24);
  for (double& v : inst.bids) v = ub(rng);
  inst.budgets = {1.0, 1.0, 1.0};
  TinySoftmaxPolicy pol;

  std::mt19937_64 r0(1);
  const double frac = rollout(pol, inst, Mode::fractional, r0).revenue;
  const int samples = 10000;
  double sum = 0.0, sumsq = 0.0;
  for (int s = 0; s < samples; ++s) {
    const double rev = rollout(pol, inst, Mode::integral, rng).revenue;
    sum += rev;
    sumsq += rev * rev;
  }
  const double mean = sum / samples;
  const double var = (sumsq - sum * sum / samples) / (samples - 1);
  const double se = std::sqrt(var / samples);
  CHECK(std::abs(mean - frac) <= 3.0 * se + 1e-12);
}

TEST_CASE("competitive ratio lies in [0,1], with the zero-opt convention") {
  std::mt19937_64 rng(23);
  UniformPolicy pol;
  SUBCASE("zero instance has cr 1 by convention") {
    AdWordsInstance inst;
    inst.m = 3;
    inst.n = 2;
    inst.bids.assign(6, 0.0);
    inst.budgets = {1.0, 1.0};
    EvalRecord rec = competitive_ratio(pol, inst, Mode::fractional, 1, rng);
    CHECK(rec.cr == 1.0);
    CHECK(rec.opt == 0.0);
  }
  SUBCASE("random instances stay dominated by the optimum") {
    for (int t = 0; t < 8; ++t) {
      AdWordsInstance inst = random_instance(10, 3, rng);
      EvalRecord rec =
          competitive_ratio(pol, inst, Mode::integral, 20, rng, "rand");
      CHECK(rec.cr >= 0.0);
      CHECK(rec.cr <= 1.0 + 1e-9);
      CHECK(rec.count == 20);
      CHECK(rec.distribution == "rand");
    }
  }
}

TEST_CASE("eval records render as csv rows") {
  EvalRecord rec;
  rec.algorithm = "uniform";
  rec.distribution = "triangular";
  rec.m = 25;
  rec.n = 5;
  rec.mode = Mode::integral;
  rec.mean_revenue = 17.25;
  rec.std_dev = 0.5;
  rec.opt = 25.0;
  rec.cr = 0.69;
  CHECK(eval_record_csv_header() ==
        "algorithm,distribution,m,n,mode,mean_revenue,std,opt,cr");
  CHECK(to_csv_row(rec) == "uniform,triangular,25,5,integral,17.25,0.5,25,0.69");
}

TEST_CASE("parameter-free policies have all-zero parameter gradients") {
  std::mt19937_64 rng(29);
  AdWordsInstance inst = random_instance(6, 3, rng);
  UniformPolicy pol;
  ad::ParamVector params;
  params.add("unused", {4});
  CrGrad g = cr_grad_params(pol, params, inst);
  CHECK(g.cr > 0.0);
  for (double v : g.grad) CHECK(v == 0.0);
}

TEST_CASE("tape rollout value equals the double-path fractional rollout") {
  std::mt19937_64 rng(31);
  TinySoftmaxPolicy pol;
  ad::ParamVector params;
  params.add("w", {2});
  params.view("w")[0] = pol.w[0];
  params.view("w")[1] = pol.w[1];
  for (int t = 0; t < 5; ++t) {
    AdWordsInstance inst = random_instance(9, 3, rng);
    std::mt19937_64 r0(1);
    const double direct = rollout(pol, inst, Mode::fractional, r0).revenue;
    ad::Tape tape;
    ad::Var p = tape.leaf(std::span<const double>(params.values));
    ad::Var bids = tape.leaf(std::span<const double>(inst.bids));
    const double taped = tape.scalar(rollout_revenue(tape, pol, p, inst, bids));
    CHECK(taped == doctest::Approx(direct).epsilon(1e-12));
  }
}

TEST_CASE("competitive-ratio gradients match finite differences") {
  std::mt19937_64 rng(331);

  SUBCASE("with respect to policy parameters") {
    for (int t = 0; t < 5; ++t) {
      AdWordsInstance inst = random_instance(6, 3, rng);
      TinySoftmaxPolicy pol;
      ad::ParamVector params;
      params.add("w", {2});
      params.view("w")[0] = pol.w[0];
      params.view("w")[1] = pol.w[1];
      CrGrad got = cr_grad_params(pol, params, inst);
      const double opt = lp::offline_optimum(inst).value;
      for (int k = 0; k < 2; ++k) {
        const double h = 1e-6;
        TinySoftmaxPolicy up = pol, dn = pol;
        up.w[k] += h;
        dn.w[k] -= h;
        std::mt19937_64 r0(1);
        const double fp = rollout(up, inst, Mode::fractional, r0).revenue / opt;
        const double fm = rollout(dn, inst, Mode::fractional, r0).revenue / opt;
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(std::abs(got.grad[k] - fd) <= 1e-3);
      }
    }
  }

  SUBCASE("with respect to the bid matrix") {
    int done = 0;
    while (done < 5) {
      AdWordsInstance inst = random_instance(6, 3, rng);
      TinySoftmaxPolicy pol;
      ad::ParamVector params;
      params.add("w", {2});
      params.view("w")[0] = pol.w[0];
      params.view("w")[1] = pol.w[1];
      CrGrad got = cr_grad_instance(pol, params, inst);
      if (got.degenerate_opt) continue;  // subgradient only; skip FD check
      ++done;
      std::mt19937_64 r0(1);
      for (size_t k = 0; k < inst.bids.size(); ++k) {
        const double h = 1e-5;
        AdWordsInstance up = inst, dn = inst;
        up.bids[k] = std::min(1.0, inst.bids[k] + h);
        dn.bids[k] = std::max(0.0, inst.bids[k] - h);
        const double span = up.bids[k] - dn.bids[k];
        const double fp = rollout(pol, up, Mode::fractional, r0).revenue /
                          lp::offline_optimum(up).value;
        const double fm = rollout(pol, dn, Mode::fractional, r0).revenue /
                          lp::offline_optimum(dn).value;
        const double fd = (fp - fm) / span;
        CHECK(std::abs(got.grad[k] - fd) <= 1e-3);
      }
    }
  }
}
