#pragma once
// Continuous ski rental: rent at unit rate until buying (one-off cost beta)
// or until the season ends at alpha; the offline optimum pays min(alpha,
// beta). A randomized strategy is a CDF over buy times, realized here as a
// softmax-weighted mixture of fixed Gaussian kernels whose weights come from
// a small MLP. Includes the closed-form optimal discrete strategy and a
// best-response training loop against a sampled (alpha, beta) net.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "advalloc/autodiff.hpp"

namespace advalloc::ski {

struct SkiScenario {
  double alpha = 1.0;  // season end, in (0, 1]
  double beta = 1.0;   // buy cost, in (0, 1]

  void validate() const;  // throws std::invalid_argument
};

// ---------------------------------------------------------------------------
// Closed-form discrete strategy.

// Marginal buying-day probabilities for the N-day game with buy cost B.
struct DiscreteStrategy {
  int B = 1;
  int N = 1;
  std::vector<double> probs;  // probs[i] = chance of buying on morning i+1

  void validate() const;
  std::vector<double> cumulative() const;  // running sums, length N
};

// The equalizing randomized strategy: p_i = ((B-1)/B)^(B-i) * c/B for i <= B
// with c = 1/(1 - (1 - 1/B)^B), zero afterwards. Its ratio is exactly c for
// every season length.
DiscreteStrategy ski_optimal_strategy(int B, int N);

// Worst ratio of expected cost to min(k, B) over season lengths k = 1..N.
// Buying on morning x during a k-day season costs x-1+B; never buying costs k.
double strategy_cr(const DiscreteStrategy& s);

// ---------------------------------------------------------------------------
// Continuous-strategy competitive ratio.

// Expected-cost ratio of the buy-time law P against min(alpha, beta), with a
// g-bucket step approximation of the cost integral: mass P(0) buys at time 0
// (cost beta), mass landing in ((k-1)/g, k/g] is charged beta plus the bucket
// midpoint, and mass beyond alpha rents to the end (cost alpha). P must be
// nondecreasing on the evaluated points (tolerance 1e-9).
double ski_cr(const std::function<double(double)>& cdf, const SkiScenario& sc,
              int grid = 100);

// ---------------------------------------------------------------------------
// Kernel CDF network.

// Whether the weight head sees (alpha, beta) or beta alone.
enum class CdfInput { alpha_beta, beta_only };

struct KernelCdfConfig {
  int kernels = 50;
  double sigma = 2.0 / 50.0;
  std::vector<int> hidden = {256, 256, 256, 256};
  CdfInput input = CdfInput::alpha_beta;

  void validate() const;
  int input_dim() const { return input == CdfInput::alpha_beta ? 2 : 1; }
  std::vector<double> means() const;  // kernel centers equally spaced on [0,1]
};

// Weight-head MLP: input_dim -> hidden (ReLU) -> kernels, linear head; the
// softmax lives in the forward pass.
ad::MlpSpec cdf_spec(const KernelCdfConfig& cfg);
ad::ParamVector cdf_init(const KernelCdfConfig& cfg, std::mt19937_64& rng);

// CDF at alpha of the mixture Sum_i w_i * N(means_i, sigma^2).
double kernel_mixture_cdf(std::span<const double> weights,
                          std::span<const double> means, double sigma,
                          double alpha);

// Network CDF value at alpha: softmax head weights into the kernel mixture.
double kernel_cdf(const KernelCdfConfig& cfg, const ad::ParamVector& params,
                  double beta, double alpha);

// Tape-path twin (scalar Var) for gradient work; params is the flat leaf.
ad::Var kernel_cdf(ad::Tape& tape, const KernelCdfConfig& cfg, ad::Var params,
                   double beta, double alpha);

// Scalar tape node for the step-approximated ratio of the network CDF on one
// scenario; same charging scheme as ski_cr, no monotonicity gate (transient
// wiggles of an (alpha, beta)-fed head must stay differentiable).
ad::Var ski_cr_loss(ad::Tape& tape, const KernelCdfConfig& cfg, ad::Var params,
                    const SkiScenario& sc, int grid);

// Network CDF sampled at alpha = i/N for i = 1..N with beta = B/N: the
// discrete strategy the network induces for the N-day game with buy cost B.
std::vector<double> instantiate_cdf(const KernelCdfConfig& cfg,
                                    const ad::ParamVector& params, int B,
                                    int N);

// Sup distance between the instantiated network CDF and the cumulative
// optimal strategy at (B, N).
double strategy_sup_distance(const KernelCdfConfig& cfg,
                             const ad::ParamVector& params, int B, int N);

// ---------------------------------------------------------------------------
// Best-response training.

struct SkiTrainConfig {
  int iterations = 10000;  // ~8.5 minutes on one desktop core
  int betas_per_iter = 4;
  double epsilon = 0.01;  // alpha net spacing: alpha = eps, 2*eps, ..., 1
  int grid = 100;         // cost-approximation buckets
  double lr = 1e-3;
  // Cosine-decay the step size from lr down to lr_final over the run; any
  // nonpositive value keeps lr constant. Best-response targets keep moving,
  // so a constant step leaves the net orbiting the equalizer instead of
  // settling onto it.
  double lr_final = 2e-5;
  // Tiny beta is unrepresentable at the fixed kernel width, and below ~0.057
  // even a fresh random net measures past the divergence gate, so the
  // sampler floors at 0.1 (the instantiation checks sit exactly there).
  double beta_min = 0.1;
  double beta_max = 1.0;
  double divergence_cr = 10.0;
  uint64_t seed = 0;
  KernelCdfConfig net;

  void validate() const;  // throws std::invalid_argument
  std::string to_json() const;
  static SkiTrainConfig from_json(const std::string& text);
};

struct SkiIterRow {
  int step = 0;  // 1-based iteration
  double worst_cr = 0.0;
  double worst_alpha = 0.0;
  double worst_beta = 0.0;
};

struct SkiTrainHooks {
  // Called with the final parameters, and with the last finite ones on abort.
  std::function<void(int step, const ad::ParamVector& params)> on_checkpoint;
  // Called after every completed iteration with the current parameters.
  std::function<void(int step, const SkiIterRow& row,
                     const ad::ParamVector& params)>
      on_step;
};

struct SkiTrainResult {
  ad::ParamVector params;
  KernelCdfConfig net;
  std::vector<SkiIterRow> history;
  int steps_completed = 0;
  bool aborted = false;
  std::string abort_reason;
};

// Per iteration: sample betas_per_iter buy costs, sweep the alpha epsilon-net
// for each, and take one Adam step down the ratio at the worst (alpha, beta)
// pair found. A worst ratio above divergence_cr (or a numeric fault) aborts
// after checkpointing.
SkiTrainResult ski_train(const SkiTrainConfig& cfg, SkiTrainHooks hooks = {});

// "step,worst_cr,worst_alpha,worst_beta" rows.
std::string ski_history_csv(std::span<const SkiIterRow> rows);

}  // namespace advalloc::ski
