#pragma once
// Reference allocation policies behind the same per-slot interface as the
// learned network. Fractional output is the expected allocation (uniform
// over the argmax set); integral evaluation samples from it.

#include <memory>
#include <string>

#include "advalloc/env.hpp"

namespace advalloc {

// Scores t_i = min(v_i, r_i); all-zero scores skip the slot.
class GreedyPolicy : public SlotPolicy {
 public:
  std::string name() const override { return "greedy"; }
  std::vector<double> allocate(const AdWordsInstance& inst,
                               std::span<const double> remaining,
                               int slot) const override;
};

// Greedy on the scaled bids q_i = v_i * (1 - exp(-r_i/B_i)).
class MsvvPolicy : public SlotPolicy {
 public:
  std::string name() const override { return "msvv"; }
  std::vector<double> allocate(const AdWordsInstance& inst,
                               std::span<const double> remaining,
                               int slot) const override;
};

// For 0/1 bids only: among advertisers bidding 1 with budget left, pick the
// one with the most remaining balance.
class BalancePolicy : public SlotPolicy {
 public:
  std::string name() const override { return "balance"; }
  std::vector<double> allocate(const AdWordsInstance& inst,
                               std::span<const double> remaining,
                               int slot) const override;
};

// "greedy" | "msvv" | "balance"; throws on unknown names.
std::unique_ptr<SlotPolicy> make_baseline(const std::string& name);

}  // namespace advalloc
