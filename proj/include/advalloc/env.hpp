#pragma once
// Online evaluation environment: feeds ad slots one at a time, tracks
// remaining budgets, executes fractional (differentiable) or sampled-integral
// allocations, and reports revenue / competitive ratio / gradients.

#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advalloc/autodiff.hpp"
#include "advalloc/instance.hpp"

namespace advalloc {

struct MarketState {
  std::vector<double> remaining;  // r_i, entrywise nonincreasing over slots
  int slot_index = 0;
};

struct RolloutResult {
  double revenue = 0.0;
  std::vector<double> per_slot_spend;  // m*n row-major
  MarketState final_state;
};

enum class Mode { fractional, integral };
std::string mode_name(Mode mode);

// A per-slot allocation rule. The double path is the source of truth; the
// tape path defaults to freezing the double-path decision as a constant, so
// gradients flow through the spend arithmetic only (exact for the learned
// policy's competitors, whose decisions are piecewise constant).
class SlotPolicy {
 public:
  virtual ~SlotPolicy() = default;
  virtual std::string name() const = 0;

  // Returns an n-vector, entrywise >= 0, summing to at most 1.
  virtual std::vector<double> allocate(const AdWordsInstance& inst,
                                       std::span<const double> remaining,
                                       int slot) const = 0;

  // params is the flat parameter leaf (invalid Var for parameter-free
  // policies); remaining and bids_row live on the tape.
  virtual ad::Var allocate(ad::Tape& tape, ad::Var params,
                           const AdWordsInstance& inst, ad::Var remaining,
                           ad::Var bids_row, int slot) const;
};

// One arrival: spend_i = min(allocation_i * bid_i, remaining_i).
// With a one-hot allocation this is exactly the min(r, v) posted-budget rule.
std::pair<MarketState, std::vector<double>> step(
    const MarketState& state, std::span<const double> bids_row,
    std::span<const double> allocation);

// Slots processed in order. Fractional mode uses the policy vector as given;
// integral mode samples one advertiser from it (shortfall from 1 means "show
// nothing"). rng is only consumed in integral mode.
RolloutResult rollout(const SlotPolicy& policy, const AdWordsInstance& inst,
                      Mode mode, std::mt19937_64& rng);

struct EvalRecord {
  std::string algorithm;
  std::string distribution;
  int m = 0;
  int n = 0;
  Mode mode = Mode::fractional;
  double mean_revenue = 0.0;
  double std_dev = 0.0;
  double opt = 0.0;
  double cr = 0.0;
  int count = 0;
};

std::string eval_record_csv_header();
std::string to_csv_row(const EvalRecord& rec);

// Runs the policy (integral mode: `runs` times), solves the offline optimum,
// checks dominance (revenue <= OPT) on every run, and reports cr = mean/OPT.
// OPT = 0 is defined as cr = 1 so degenerate instances reward no one.
EvalRecord competitive_ratio(const SlotPolicy& policy,
                             const AdWordsInstance& inst, Mode mode, int runs,
                             std::mt19937_64& rng,
                             const std::string& distribution = "");

// Differentiable fractional rollout emitted onto an existing tape.
// bids_matrix must be an m*n Var (leaf or derived); returns total revenue.
ad::Var rollout_revenue(ad::Tape& tape, const SlotPolicy& policy,
                        ad::Var params, const AdWordsInstance& inst,
                        ad::Var bids_matrix);

struct CrGrad {
  double cr = 0.0;
  std::vector<double> grad;
  bool degenerate_opt = false;  // envelope gradient is a subgradient
};

// d CR / d params with the offline optimum held constant.
CrGrad cr_grad_params(const SlotPolicy& policy, const ad::ParamVector& params,
                      const AdWordsInstance& inst, double opt_value);
CrGrad cr_grad_params(const SlotPolicy& policy, const ad::ParamVector& params,
                      const AdWordsInstance& inst);

// d CR / d bids by the quotient rule; the optimum's bid-gradient enters
// through the envelope theorem.
CrGrad cr_grad_instance(const SlotPolicy& policy, const ad::ParamVector& params,
                        const AdWordsInstance& inst);

}  // namespace advalloc
