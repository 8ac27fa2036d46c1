#include "advalloc/baselines.hpp"

#include <cmath>
#include <stdexcept>

namespace advalloc {

namespace {
// Uniform weight over the exact-argmax set of positive scores.
std::vector<double> argmax_simplex(const std::vector<double>& scores) {
  const int n = static_cast<int>(scores.size());
  std::vector<double> alloc(n, 0.0);
  double mx = 0.0;
  for (double s : scores) mx = std::max(mx, s);
  if (mx <= 0.0) return alloc;  // skip the slot
  int ties = 0;
  for (double s : scores)
    if (s == mx) ++ties;
  for (int i = 0; i < n; ++i)
    if (scores[i] == mx) alloc[i] = 1.0 / ties;
  return alloc;
}
}  // namespace

std::vector<double> GreedyPolicy::allocate(const AdWordsInstance& inst,
                                           std::span<const double> remaining,
                                           int slot) const {
  std::vector<double> scores(inst.n);
  for (int i = 0; i < inst.n; ++i)
    scores[i] = std::min(inst.bid(slot, i), remaining[i]);
  return argmax_simplex(scores);
}

std::vector<double> MsvvPolicy::allocate(const AdWordsInstance& inst,
                                         std::span<const double> remaining,
                                         int slot) const {
  std::vector<double> scores(inst.n);
  for (int i = 0; i < inst.n; ++i) {
    const double q =
        inst.bid(slot, i) * (1.0 - std::exp(-remaining[i] / inst.budgets[i]));
    scores[i] = std::min(q, remaining[i]);
  }
  return argmax_simplex(scores);
}

std::vector<double> BalancePolicy::allocate(const AdWordsInstance& inst,
                                            std::span<const double> remaining,
                                            int slot) const {
  const int n = inst.n;
  std::vector<double> alloc(n, 0.0);
  double best = 0.0;
  int ties = 0;
  for (int i = 0; i < n; ++i) {
    const double v = inst.bid(slot, i);
    if (v != 0.0 && v != 1.0)
      throw std::invalid_argument("balance: bids must be 0 or 1");
    if (v == 1.0 && remaining[i] > 0.0) {
      if (remaining[i] > best) {
        best = remaining[i];
        ties = 1;
      } else if (remaining[i] == best) {
        ++ties;
      }
    }
  }
  if (ties == 0) return alloc;
  for (int i = 0; i < n; ++i)
    if (inst.bid(slot, i) == 1.0 && remaining[i] == best)
      alloc[i] = 1.0 / ties;
  return alloc;
}

std::unique_ptr<SlotPolicy> make_baseline(const std::string& name) {
  if (name == "greedy") return std::make_unique<GreedyPolicy>();
  if (name == "msvv") return std::make_unique<MsvvPolicy>();
  if (name == "balance") return std::make_unique<BalancePolicy>();
  throw std::invalid_argument("unknown baseline policy: " + name);
}

}  // namespace advalloc
