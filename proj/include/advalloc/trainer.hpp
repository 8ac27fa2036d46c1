#pragma once
// Adversarial co-training: the allocation network ascends the competitive
// ratio while an adversary network descends it, with an append-only
// experience array of historical worst cases, periodic adversary restarts,
// and an optional probability-alpha mix of distributional training for the
// robust-stochastic variant. Also the fixed-target adversary searches.

#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "advalloc/autodiff.hpp"
#include "advalloc/distributions.hpp"
#include "advalloc/env.hpp"
#include "advalloc/networks.hpp"

namespace advalloc::train {

struct TrainConfig {
  int T = 25000;       // outer iterations
  int T_alg = 4;       // algorithm updates per outer iteration
  int T_adv = 4;       // adversary updates per outer iteration
  int T_add = 100;     // append an instance to E every T_add iterations
  int T_restart = 100; // reinitialize the adversary every T_restart iterations
  int n_batch = 100;   // experience / distribution batch size
  int n_noise = 100;   // adversary batch size (noise draws per update)
  int m = 25;
  int n = 5;
  double alpha = 0.0;  // probability of a distributional algorithm update
  std::optional<dist::DistributionSpec> D;  // required when alpha > 0
  double lr_alg = 1e-3;
  double lr_adv = 1e-3;
  bool with_budgets = false;      // adversary budget head
  bool freeze_adversary = false;  // sanity mode: no adversary updates/restarts
  int checkpoint_every = 1000;
  uint64_t seed = 0;
  std::vector<int> alg_hidden = {32, 32};
  std::vector<int> adv_hidden = {256, 256};
  int noise_dim = 100;

  net::AlgNetConfig alg_config() const { return {alg_hidden}; }
  net::AdvNetConfig adv_config() const {
    return {noise_dim, adv_hidden, m, n, with_budgets};
  }

  void validate() const;  // throws std::invalid_argument
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct ExperienceEntry {
  AdWordsInstance instance;
  double opt = 0.0;  // cached offline optimum (never changes: append-only)
  int step = 0;      // outer iteration that created it (0 = initial fill)
  double cr = 1.0;   // the algorithm's fractional CR when it was appended
};

struct ExperienceArray {
  std::vector<ExperienceEntry> entries;

  // One augmented instance object per line:
  // {"m":..,"n":..,"bids":[[..]],"budgets":[..],"step":..,"cr":..,"opt":..}
  std::string to_jsonl() const;
  static ExperienceArray from_jsonl(const std::string& text);
  void save(const std::string& path) const;
  static ExperienceArray load(const std::string& path);
};

struct HistoryRow {
  int step = 0;
  double worst_batch_cr = 0.0;  // min CR across this step's algorithm batches
  double adv_cr = 0.0;          // min CR across this step's adversary batches
};

struct TrainHistory {
  std::vector<HistoryRow> rows;
  std::string to_csv() const;  // header: step,worst_batch_cr,adv_cr
};

struct TrainHooks {
  // Called every cfg.checkpoint_every steps and once on abort.
  std::function<void(int step, const ad::ParamVector& alg_params,
                     const ad::ParamVector& adv_params)>
      on_checkpoint;
  std::function<void(int step, const TrainHistory& history)> on_step;
};

struct TrainResult {
  ad::ParamVector alg_params;
  ad::ParamVector adv_params;
  ExperienceArray experience;
  TrainHistory history;
  int steps_completed = 0;
  bool aborted = false;        // non-finite value or LP failure mid-update
  std::string abort_reason;
};

// Per outer iteration: T_alg algorithm updates (each one either ascends the
// mean CR over an n_batch draw from D, with probability alpha, or ascends the
// CR of the worst instance in an n_batch sample of E), then T_adv adversary
// updates (descend the mean CR of n_noise generated instances), then every
// T_add iterations the argmin-CR instance among n_batch fresh adversary
// outputs plus n_batch sampled from E joins E, then every T_restart
// iterations the adversary reinitializes. E starts with n_batch uniform
// random instances. Equal (config, seed) gives an identical history.
TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {});

// Fractional-CR argmin over the batch, ties to the first occurrence.
// opts[k] is instance k's cached offline optimum.
std::pair<size_t, double> select_worst(const SlotPolicy& policy,
                                       std::span<const AdWordsInstance> batch,
                                       std::span<const double> opts);
// Convenience overload that solves the offline optima itself.
std::pair<size_t, double> select_worst(const SlotPolicy& policy,
                                       std::span<const AdWordsInstance> batch);

struct AdvSearchConfig {
  int steps = 5000;
  int restart_every = 500;
  int batch = 100;  // noise draws per step
  int m = 25;
  int n = 5;
  double lr = 1e-3;
  std::vector<int> hidden = {256, 256};
  int noise_dim = 100;

  net::AdvNetConfig adv_config() const {
    return {noise_dim, hidden, m, n, false};
  }
  void validate() const;
};

struct AdvSearchResult {
  AdWordsInstance best_instance;
  double best_objective = 0.0;  // min CR (fixed) or max CR gap (diff)
  std::vector<double> trace;    // per-step batch extreme of the objective
};

// Gradient descent on CR(target, generated instance), restarting every
// restart_every steps; returns the lowest-CR instance ever generated.
AdvSearchResult adv_search_fixed(const SlotPolicy& target,
                                 const AdvSearchConfig& cfg,
                                 std::mt19937_64& rng);

// Gradient ascent on CR(a) - CR(b); returns the largest-gap instance.
AdvSearchResult adv_search_diff(const SlotPolicy& a, const SlotPolicy& b,
                                const AdvSearchConfig& cfg,
                                std::mt19937_64& rng);

}  // namespace advalloc::train
