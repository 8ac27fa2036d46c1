#pragma once
// Benchmark input families: triangular, thick-z, powerlaw, triangular-g,
// uniform-random, and weighted mixtures, plus the Greedy-derived budget
// construction used by the powerlaw and triangular-g families.

#include <random>
#include <string>
#include <vector>

#include "advalloc/instance.hpp"

namespace advalloc::dist {

// Advertiser j (pre-permutation) bids 1 on the first (j+1)*B ads; budgets B;
// columns uniformly permuted. OPT = m = B*n.
AdWordsInstance triangular(int n, int B, std::mt19937_64& rng);

// Advertiser i bids 1 on ads [iB, (i+1)B); advertisers i >= ceil(n/2) (the
// floor(n/2) highest indices) also bid on ads [0, B*ceil(n/2)). For even n
// this is exactly the classic z-shape with heavy half [0, Bn/2); the odd-n
// extension keeps the shared prefix equal to the light advertisers' span.
// Budgets B, columns permuted. OPT = m.
AdWordsInstance thick_z(int n, int B, std::mt19937_64& rng);

// Preferential-attachment bipartite graph: m = n*n ads; ad degree
// d = clamp(round(exp(g)), 1, n) with g ~ N(1,1); neighbors sampled without
// replacement proportional to attachment counts (initialized to 1, updated
// after each ad); bids N(base, 0.1) clipped to [0,1] around a shared
// base ~ U(0,1); budgets from greedy_budgets. Not permuted.
AdWordsInstance powerlaw(int n, std::mt19937_64& rng);

// Triangular support (B = n, so m = n*n) with i.i.d. Uniform(0.5,1) weights
// instead of ones; columns permuted; budgets from greedy_budgets.
AdWordsInstance triangular_g(int n, std::mt19937_64& rng);

// Bids i.i.d. Uniform(0,1); budgets all m/n.
AdWordsInstance uniform_random(int m, int n, std::mt19937_64& rng);

// Runs Greedy with unlimited budgets (each ad to its highest bidder, ties to
// the lowest index) and returns each advertiser's total spend as its budget.
// Zero-spend advertisers get epsilon = 1e-6 to keep budgets positive. By
// construction Greedy replayed with these budgets collects exactly their sum,
// which therefore equals the offline optimum.
std::vector<double> greedy_budgets(const std::vector<double>& bids, int m,
                                   int n);

enum class Family {
  triangular,
  thick_z,
  powerlaw,
  triangular_g,
  uniform_random,
  mixture,
};

struct DistributionSpec {
  Family family = Family::triangular;
  int n = 5;
  int B = 5;   // triangular / thick_z
  int m = 25;  // uniform_random
  uint64_t seed = 0;
  std::vector<double> weights;                // mixture only
  std::vector<DistributionSpec> components;   // mixture only

  // Canonical display name, e.g. "triangular(5,5)", "powerlaw(5)".
  std::string name() const;
  void validate() const;
  std::string to_json() const;
  static DistributionSpec from_json(const std::string& text);
  // Compact CLI form: triangular(n,B), thick_z(n,B), powerlaw(n),
  // triangular_g(n), uniform(m,n).
  static DistributionSpec parse(const std::string& text);
};

AdWordsInstance sample(const DistributionSpec& spec, std::mt19937_64& rng);

}  // namespace advalloc::dist
