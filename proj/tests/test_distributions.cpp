#include "advalloc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "advalloc/lp.hpp"
#include "doctest.h"

using advalloc::AdWordsInstance;
namespace dist = advalloc::dist;

namespace {

// Column k as a 0/1 ones-count plus a prefix check: the unpermuted families
// place every column's ones in rows [0, count) or in contiguous blocks, so
// structure is checked per family below via these helpers.
int ones_count(const AdWordsInstance& inst, int col) {
  int c = 0;
  for (int j = 0; j < inst.m; ++j)
    if (inst.bid(j, col) == 1.0) ++c;
  return c;
}

bool column_is_prefix_of_ones(const AdWordsInstance& inst, int col) {
  const int c = ones_count(inst, col);
  for (int j = 0; j < inst.m; ++j) {
    const double want = j < c ? 1.0 : 0.0;
    if (inst.bid(j, col) != want) return false;
  }
  return true;
}

std::multiset<int> sorted_ones_counts(const AdWordsInstance& inst) {
  std::multiset<int> counts;
  for (int i = 0; i < inst.n; ++i) counts.insert(ones_count(inst, i));
  return counts;
}

// Independent replay oracle: Greedy on truncated bids, ties to the lowest
// index, returning total revenue. Used to confirm the greedy_budgets
// construction admits an allocation spending every budget exactly.
double greedy_replay_revenue(const AdWordsInstance& inst) {
  std::vector<double> remaining = inst.budgets;
  double revenue = 0.0;
  for (int j = 0; j < inst.m; ++j) {
    int best = -1;
    double best_v = 0.0;
    for (int i = 0; i < inst.n; ++i) {
      const double v = std::min(inst.bid(j, i), remaining[i]);
      if (v > best_v) {
        best_v = v;
        best = i;
      }
    }
    if (best < 0) continue;
    revenue += best_v;
    remaining[best] -= best_v;
  }
  return revenue;
}

double budget_sum(const AdWordsInstance& inst) {
  double s = 0.0;
  for (double b : inst.budgets) s += b;
  return s;
}

}  // namespace

TEST_CASE("triangular: permuted prefix columns, unit bids, budgets B") {
  std::mt19937_64 rng(11);
  SUBCASE("n=2 B=1 matches the two-column pattern") {
    for (int trial = 0; trial < 8; ++trial) {
      AdWordsInstance inst = dist::triangular(2, 1, rng);
      REQUIRE(inst.m == 2);
      REQUIRE(inst.n == 2);
      inst.validate();
      CHECK(sorted_ones_counts(inst) == std::multiset<int>{1, 2});
      CHECK(column_is_prefix_of_ones(inst, 0));
      CHECK(column_is_prefix_of_ones(inst, 1));
      CHECK(inst.budgets == std::vector<double>{1.0, 1.0});
    }
  }
  SUBCASE("n=4 B=3 column sums are (j+1)B in some order") {
    AdWordsInstance inst = dist::triangular(4, 3, rng);
    REQUIRE(inst.m == 12);
    CHECK(sorted_ones_counts(inst) == std::multiset<int>{3, 6, 9, 12});
    for (int i = 0; i < 4; ++i) {
      CHECK(column_is_prefix_of_ones(inst, i));
      CHECK(inst.budgets[i] == 3.0);
    }
  }
  SUBCASE("all column permutations appear across seeds") {
    std::set<std::vector<int>> seen;
    for (int trial = 0; trial < 200; ++trial) {
      AdWordsInstance inst = dist::triangular(3, 1, rng);
      std::vector<int> counts;
      for (int i = 0; i < 3; ++i) counts.push_back(ones_count(inst, i));
      seen.insert(counts);
    }
    CHECK(seen.size() == 6);
  }
  SUBCASE("offline optimum equals m") {
    AdWordsInstance inst = dist::triangular(5, 5, rng);
    const auto opt = advalloc::lp::offline_optimum(inst);
    CHECK(opt.value == doctest::Approx(25.0).epsilon(1e-9));
  }
}

TEST_CASE("thick_z: block plus heavy-prefix structure, budgets B") {
  std::mt19937_64 rng(12);
  SUBCASE("n=2 B=1 matches the two-column pattern") {
    AdWordsInstance inst = dist::thick_z(2, 1, rng);
    REQUIRE(inst.m == 2);
    CHECK(sorted_ones_counts(inst) == std::multiset<int>{1, 2});
  }
  SUBCASE("n=4 B=2: light columns own a block, heavy add the shared prefix") {
    AdWordsInstance inst = dist::thick_z(4, 2, rng);
    REQUIRE(inst.m == 8);
    CHECK(sorted_ones_counts(inst) == std::multiset<int>{2, 2, 6, 6});
    for (int i = 0; i < 4; ++i) {
      const int c = ones_count(inst, i);
      if (c == 2) continue;
      // Heavy columns cover the whole shared prefix [0, 4).
      for (int j = 0; j < 4; ++j) CHECK(inst.bid(j, i) == 1.0);
    }
  }
  SUBCASE("odd n=5 B=1: two heavy columns with prefix [0,3)") {
    AdWordsInstance inst = dist::thick_z(5, 1, rng);
    REQUIRE(inst.m == 5);
    CHECK(sorted_ones_counts(inst) == std::multiset<int>{1, 1, 1, 4, 4});
    for (int i = 0; i < 5; ++i) {
      if (ones_count(inst, i) != 4) continue;
      for (int j = 0; j < 3; ++j) CHECK(inst.bid(j, i) == 1.0);
    }
  }
  SUBCASE("offline optimum equals m for n=4 and n=5") {
    const auto opt4 = advalloc::lp::offline_optimum(dist::thick_z(4, 4, rng));
    CHECK(opt4.value == doctest::Approx(16.0).epsilon(1e-9));
    const auto opt5 = advalloc::lp::offline_optimum(dist::thick_z(5, 5, rng));
    CHECK(opt5.value == doctest::Approx(25.0).epsilon(1e-9));
  }
  SUBCASE("n=1 rejected") {
    CHECK_THROWS_AS((void)dist::thick_z(1, 1, rng), std::invalid_argument);
  }
}

TEST_CASE("greedy_budgets: per-ad winner spend with epsilon floor") {
  SUBCASE("single column collects every bid") {
    const std::vector<double> bids{0.9, 0.2};
    const auto b = dist::greedy_budgets(bids, 2, 1);
    CHECK(b == std::vector<double>{1.1});
  }
  SUBCASE("each ad goes to its highest bidder") {
    const std::vector<double> bids{0.9, 0.1, 0.2, 0.8};
    const auto b = dist::greedy_budgets(bids, 2, 2);
    CHECK(b == std::vector<double>{0.9, 0.8});
  }
  SUBCASE("losers get the positivity floor") {
    const std::vector<double> bids{0.5, 0.0, 0.5, 0.0};
    const auto b = dist::greedy_budgets(bids, 2, 2);
    CHECK(b == std::vector<double>{1.0, 1e-6});
  }
  SUBCASE("ties go to the lowest index") {
    const std::vector<double> bids{0.5, 0.5};
    const auto b = dist::greedy_budgets(bids, 1, 2);
    CHECK(b == std::vector<double>{0.5, 1e-6});
  }
  SUBCASE("all-zero rows are skipped") {
    const std::vector<double> bids{0.0, 0.0};
    const auto b = dist::greedy_budgets(bids, 1, 2);
    CHECK(b == std::vector<double>{1e-6, 1e-6});
  }
  SUBCASE("shape mismatch rejected") {
    CHECK_THROWS_AS((void)dist::greedy_budgets({0.1, 0.2, 0.3}, 2, 2),
                    std::invalid_argument);
  }
}

TEST_CASE("powerlaw: shape, ranges, and budgets that saturate the optimum") {
  std::mt19937_64 rng(21);
  bool saw_multi_bidder_ad = false;
  for (int trial = 0; trial < 5; ++trial) {
    AdWordsInstance inst = dist::powerlaw(4, rng);
    REQUIRE(inst.m == 16);
    REQUIRE(inst.n == 4);
    inst.validate();
    for (double v : inst.bids) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (int j = 0; j < inst.m; ++j) {
      int nonzero = 0;
      for (int i = 0; i < inst.n; ++i)
        if (inst.bid(j, i) > 0.0) ++nonzero;
      if (nonzero > 1) saw_multi_bidder_ad = true;
    }
    // The winner-spend budgets admit a feasible allocation spending every
    // budget fully, so OPT = sum of budgets up to the n*eps positivity floors.
    const double total = budget_sum(inst);
    const auto opt = advalloc::lp::offline_optimum(inst);
    CHECK(std::abs(opt.value - total) <= 4 * 1e-6 + 1e-9);
    CHECK(greedy_replay_revenue(inst) >= total - 4 * 1e-6 - 1e-9);
  }
  CHECK(saw_multi_bidder_ad);
}

TEST_CASE("triangular_g: weighted triangular support with winner budgets") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    AdWordsInstance inst = dist::triangular_g(3, rng);
    REQUIRE(inst.m == 9);
    REQUIRE(inst.n == 3);
    inst.validate();
    std::multiset<int> support_counts;
    for (int i = 0; i < 3; ++i) {
      int c = 0;
      for (int j = 0; j < inst.m; ++j) {
        const double v = inst.bid(j, i);
        if (v == 0.0) continue;
        CHECK(v >= 0.5);
        CHECK(v <= 1.0);
        CHECK(j < 9);
        ++c;
      }
      // Support is a prefix of rows.
      for (int j = 0; j < c; ++j) CHECK(inst.bid(j, i) > 0.0);
      support_counts.insert(c);
    }
    CHECK(support_counts == std::multiset<int>{3, 6, 9});
    const double total = budget_sum(inst);
    const auto opt = advalloc::lp::offline_optimum(inst);
    CHECK(std::abs(opt.value - total) <= 3 * 1e-6 + 1e-9);
  }
}

TEST_CASE("uniform_random: iid bids with budgets m/n") {
  std::mt19937_64 rng(7);
  AdWordsInstance inst = dist::uniform_random(25, 5, rng);
  REQUIRE(inst.m == 25);
  REQUIRE(inst.n == 5);
  inst.validate();
  double mean = 0.0;
  for (double v : inst.bids) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    mean += v;
  }
  mean /= static_cast<double>(inst.bids.size());
  CHECK(mean == doctest::Approx(0.5).epsilon(0.1));
  for (double b : inst.budgets) CHECK(b == 5.0);

  std::mt19937_64 rng_a(7), rng_b(7), rng_c(8);
  CHECK(dist::uniform_random(25, 5, rng_a).bids ==
        dist::uniform_random(25, 5, rng_b).bids);
  CHECK(dist::uniform_random(25, 5, rng_a).bids !=
        dist::uniform_random(25, 5, rng_c).bids);
}

TEST_CASE("spec parsing, naming, and JSON round trips") {
  SUBCASE("compact forms") {
    auto t = dist::DistributionSpec::parse("triangular(5,5)");
    CHECK(t.family == dist::Family::triangular);
    CHECK(t.n == 5);
    CHECK(t.B == 5);
    CHECK(t.name() == "triangular(5,5)");

    auto z = dist::DistributionSpec::parse("thick_z(20,20)");
    CHECK(z.n == 20);
    CHECK(z.B == 20);

    auto p = dist::DistributionSpec::parse("powerlaw(5)");
    CHECK(p.n == 5);
    CHECK(p.name() == "powerlaw(5)");

    auto g = dist::DistributionSpec::parse("triangular_g(5)");
    CHECK(g.n == 5);

    auto u = dist::DistributionSpec::parse("uniform(25,5)");
    CHECK(u.family == dist::Family::uniform_random);
    CHECK(u.m == 25);
    CHECK(u.n == 5);
    CHECK(u.name() == "uniform(25,5)");
  }
  SUBCASE("parse errors") {
    CHECK_THROWS_AS((void)dist::DistributionSpec::parse("foo(3)"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)dist::DistributionSpec::parse("triangular"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)dist::DistributionSpec::parse("triangular(5)"),
                    std::invalid_argument);
    CHECK_THROWS_AS((void)dist::DistributionSpec::parse("powerlaw(1)"),
                    std::invalid_argument);
  }
  SUBCASE("JSON round trip, including mixtures") {
    auto t = dist::DistributionSpec::parse("thick_z(5,5)");
    auto t2 = dist::DistributionSpec::from_json(t.to_json());
    CHECK(t2.name() == t.name());

    dist::DistributionSpec mix;
    mix.family = dist::Family::mixture;
    mix.weights = {0.25, 0.75};
    mix.components = {dist::DistributionSpec::parse("thick_z(5,5)"),
                      dist::DistributionSpec::parse("powerlaw(5)")};
    mix.validate();
    auto mix2 = dist::DistributionSpec::from_json(mix.to_json());
    CHECK(mix2.name() == mix.name());
    REQUIRE(mix2.components.size() == 2);
    CHECK(mix2.weights == mix.weights);
  }
  SUBCASE("JSON errors") {
    CHECK_THROWS_AS((void)dist::DistributionSpec::from_json("{]"),
                    std::runtime_error);
    CHECK_THROWS_AS(
        (void)dist::DistributionSpec::from_json("{\"family\":\"nope\"}"),
        std::invalid_argument);
  }
  SUBCASE("mixture validation errors") {
    dist::DistributionSpec mix;
    mix.family = dist::Family::mixture;
    mix.weights = {1.0};
    CHECK_THROWS_AS(mix.validate(), std::invalid_argument);  // no components
    mix.components = {dist::DistributionSpec::parse("powerlaw(5)")};
    mix.weights = {-1.0};
    CHECK_THROWS_AS(mix.validate(), std::invalid_argument);
    mix.weights = {0.0};
    CHECK_THROWS_AS(mix.validate(), std::invalid_argument);
  }
}

TEST_CASE("sample dispatches by family and honors mixture weights") {
  std::mt19937_64 rng(99);
  auto inst = dist::sample(dist::DistributionSpec::parse("triangular(5,5)"), rng);
  CHECK(inst.m == 25);
  CHECK(inst.n == 5);

  dist::DistributionSpec mix;
  mix.family = dist::Family::mixture;
  mix.weights = {1.0, 0.0};
  mix.components = {dist::DistributionSpec::parse("uniform(3,2)"),
                    dist::DistributionSpec::parse("uniform(50,7)")};
  for (int k = 0; k < 20; ++k) {
    auto s = dist::sample(mix, rng);
    CHECK(s.m == 3);
    CHECK(s.n == 2);
  }

  mix.weights = {0.5, 0.5};
  bool saw_small = false, saw_large = false;
  for (int k = 0; k < 200; ++k) {
    auto s = dist::sample(mix, rng);
    if (s.m == 3) saw_small = true;
    if (s.m == 50) saw_large = true;
  }
  CHECK(saw_small);
  CHECK(saw_large);
}
