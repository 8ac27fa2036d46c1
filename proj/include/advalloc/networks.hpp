#pragma once
// The two players: a permutation-equivariant allocation network scoring a
// generic advertiser (so one parameter set works for any m and n), and an
// adversary network mapping Gaussian noise to complete instances.

#include <random>
#include <string>

#include "advalloc/autodiff.hpp"
#include "advalloc/env.hpp"
#include "advalloc/instance.hpp"

namespace advalloc::net {

// --- allocation (algorithm) player -----------------------------------------

constexpr int kSlotFeatureDim = 6;

struct AlgNetConfig {
  std::vector<int> hidden = {32, 32};  // 6 -> hidden... -> 1, ReLU, linear head
};

ad::MlpSpec alg_spec(const AlgNetConfig& cfg);
ad::ParamVector alg_init(const AlgNetConfig& cfg, std::mt19937_64& rng);

// Row i: (v_i, r_i/B_i, B_i, sum_k v_k, sum_k r_k/B_k, sum_k B_k), row-major
// n x 6. The sums are accumulated in value order so every advertiser
// permutation produces bit-identical rows.
std::vector<double> build_features(std::span<const double> bids_row,
                                   std::span<const double> remaining,
                                   std::span<const double> budgets);

// Shared single-agent net per feature row, softmax across the n scores.
// Bit-exact permutation equivariance (the softmax denominator is accumulated
// in value order too).
std::vector<double> alg_forward(const ad::MlpSpec& spec,
                                const ad::ParamVector& params,
                                std::span<const double> features, int n);

// SlotPolicy adapter; the tape path is fully differentiable in both the
// parameters and the bid row.
class LearnedPolicy : public SlotPolicy {
 public:
  LearnedPolicy(AlgNetConfig cfg, ad::ParamVector params,
                std::string name = "learned");

  std::string name() const override { return name_; }
  std::vector<double> allocate(const AdWordsInstance& inst,
                               std::span<const double> remaining,
                               int slot) const override;
  ad::Var allocate(ad::Tape& tape, ad::Var params, const AdWordsInstance& inst,
                   ad::Var remaining, ad::Var bids_row,
                   int slot) const override;

  const ad::ParamVector& params() const { return params_; }
  ad::ParamVector& params() { return params_; }
  const AlgNetConfig& config() const { return cfg_; }
  const ad::MlpSpec& spec() const { return spec_; }

 private:
  AlgNetConfig cfg_;
  ad::MlpSpec spec_;
  ad::ParamVector params_;
  std::string name_;
};

// --- adversary player -------------------------------------------------------

struct AdvNetConfig {
  int noise_dim = 100;
  std::vector<int> hidden = {256, 256};
  int m = 25;
  int n = 5;
  bool with_budgets = false;  // default: every budget fixed to m/n
};

// Linear head of m*n bid logits (+ n budget logits when enabled); the
// sigmoid / budget range map is applied by adv_generate.
ad::MlpSpec adv_spec(const AdvNetConfig& cfg);
ad::ParamVector adv_init(const AdvNetConfig& cfg, std::mt19937_64& rng);

// Fresh initialization in place (the restart move of the search loop).
void reinit(ad::ParamVector& params, const ad::MlpSpec& spec,
            std::mt19937_64& rng);

// bids = sigmoid(logits) in (0,1); budgets = m/n each, or 1+(m-1)*sigmoid
// per advertiser when the budget head is enabled.
AdWordsInstance adv_generate(const AdvNetConfig& cfg,
                             const ad::ParamVector& params,
                             std::span<const double> noise);

std::vector<double> sample_noise(int dim, std::mt19937_64& rng);

// Tape-path bid matrix (m*n Var) for adversary updates; budgets are treated
// as constants even when the budget head is on (decision gradients only flow
// through bids).
ad::Var adv_bids(ad::Tape& tape, const AdvNetConfig& cfg, ad::Var params,
                 ad::Var noise);

// --- checkpoint plumbing ----------------------------------------------------

std::string params_to_json(const ad::ParamVector& params);
ad::ParamVector params_from_json(const std::string& text);

}  // namespace advalloc::net
