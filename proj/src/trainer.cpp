#include "advalloc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "advalloc/lp.hpp"
#include "json.hpp"

namespace advalloc::train {

namespace {

constexpr double kOptTol = 1e-12;

double fractional_cr(const SlotPolicy& policy, const AdWordsInstance& inst,
                     double opt) {
  std::mt19937_64 unused(0);  // fractional rollouts consume no randomness
  const double rev = rollout(policy, inst, Mode::fractional, unused).revenue;
  return opt > kOptTol ? rev / opt : 1.0;
}

// The learned policy's tape path needs its parameter leaf; parameter-free
// policies take an invalid Var.
ad::Var policy_param_leaf(ad::Tape& tape, const SlotPolicy& policy) {
  if (const auto* learned = dynamic_cast<const net::LearnedPolicy*>(&policy))
    return tape.leaf(std::span<const double>(learned->params().values));
  return {};
}

struct AdvBatchEval {
  double mean_obj = 0.0;
  double extreme_obj = 0.0;       // batch min (CR) or max (gap)
  AdWordsInstance extreme_instance;
  std::vector<double> grad;       // d mean_obj / d adversary params
};

// Shared core of the adversary update: differentiate the batch-mean
// objective through the generator, the spend arithmetic, and the envelope
// term of the offline optimum. Objective is CR(a, inst), or
// CR(a, inst) - CR(b, inst) when b is given.
AdvBatchEval adv_batch_grad(const net::AdvNetConfig& adv_cfg,
                            const ad::ParamVector& adv_params,
                            const SlotPolicy& a, const SlotPolicy* b,
                            bool track_max, int batch,
                            std::mt19937_64& noise_rng) {
  AdvBatchEval out;
  out.grad.assign(adv_params.values.size(), 0.0);
  out.extreme_obj = track_max ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
  ad::Tape tape;
  for (int k = 0; k < batch; ++k) {
    const std::vector<double> noise =
        net::sample_noise(adv_cfg.noise_dim, noise_rng);
    const AdWordsInstance inst = net::adv_generate(adv_cfg, adv_params, noise);
    const lp::OfflineOptimum opt = lp::offline_optimum(inst);
    const std::vector<double> opt_grad = lp::offline_optimum_grad(inst, opt);

    tape.clear();
    const ad::Var adv_leaf =
        tape.leaf(std::span<const double>(adv_params.values));
    const ad::Var noise_leaf = tape.leaf(std::span<const double>(noise));
    const ad::Var bids = net::adv_bids(tape, adv_cfg, adv_leaf, noise_leaf);
    const ad::Var opt_var = tape.external_scalar(bids, opt.value, opt_grad);
    const ad::Var rev_a =
        rollout_revenue(tape, a, policy_param_leaf(tape, a), inst, bids);
    ad::Var obj;
    if (b == nullptr) {
      obj = tape.div(rev_a, opt_var);
    } else {
      const ad::Var rev_b =
          rollout_revenue(tape, *b, policy_param_leaf(tape, *b), inst, bids);
      obj = tape.div(tape.sub(rev_a, rev_b), opt_var);
    }
    tape.backward(obj);
    const double value = tape.scalar(obj);
    out.mean_obj += value;
    const auto adj = tape.adjoint(adv_leaf);
    for (size_t i = 0; i < out.grad.size(); ++i) out.grad[i] += adj[i];
    const bool better =
        track_max ? value > out.extreme_obj : value < out.extreme_obj;
    if (better) {
      out.extreme_obj = value;
      out.extreme_instance = inst;
    }
  }
  out.mean_obj /= batch;
  for (double& g : out.grad) g /= batch;
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (T < 1 || T_alg < 1 || T_adv < 1 || T_add < 1 || T_restart < 1 ||
      n_batch < 1 || n_noise < 1)
    throw std::invalid_argument("train config: counters must be >= 1");
  if (m < 1 || n < 1 || noise_dim < 1)
    throw std::invalid_argument("train config: bad shape");
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("train config: alpha must be in [0,1]");
  if (alpha > 0.0 && !D.has_value())
    throw std::invalid_argument("train config: alpha > 0 requires D");
  if (D.has_value()) D->validate();
  if (!(lr_alg > 0.0) || !(lr_adv > 0.0))
    throw std::invalid_argument("train config: learning rates must be > 0");
  if (checkpoint_every < 0)
    throw std::invalid_argument("train config: checkpoint_every must be >= 0");
  for (const auto& hs : {alg_hidden, adv_hidden}) {
    if (hs.empty())
      throw std::invalid_argument("train config: hidden layers required");
    for (int h : hs)
      if (h < 1) throw std::invalid_argument("train config: bad hidden width");
  }
}

std::string TrainConfig::to_json() const {
  nlohmann::json j;
  j["T"] = T;
  j["T_alg"] = T_alg;
  j["T_adv"] = T_adv;
  j["T_add"] = T_add;
  j["T_restart"] = T_restart;
  j["n_batch"] = n_batch;
  j["n_noise"] = n_noise;
  j["m"] = m;
  j["n"] = n;
  j["alpha"] = alpha;
  j["D"] = D.has_value() ? nlohmann::json::parse(D->to_json())
                         : nlohmann::json(nullptr);
  j["lr_alg"] = lr_alg;
  j["lr_adv"] = lr_adv;
  j["with_budgets"] = with_budgets;
  j["freeze_adversary"] = freeze_adversary;
  j["checkpoint_every"] = checkpoint_every;
  j["seed"] = seed;
  j["alg_hidden"] = alg_hidden;
  j["adv_hidden"] = adv_hidden;
  j["noise_dim"] = noise_dim;
  return j.dump(2);
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("train config: bad JSON: ") +
                             e.what());
  }
  TrainConfig cfg;
  try {
    cfg.T = j.value("T", cfg.T);
    cfg.T_alg = j.value("T_alg", cfg.T_alg);
    cfg.T_adv = j.value("T_adv", cfg.T_adv);
    cfg.T_add = j.value("T_add", cfg.T_add);
    cfg.T_restart = j.value("T_restart", cfg.T_restart);
    cfg.n_batch = j.value("n_batch", cfg.n_batch);
    cfg.n_noise = j.value("n_noise", cfg.n_noise);
    cfg.m = j.value("m", cfg.m);
    cfg.n = j.value("n", cfg.n);
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("D") && !j["D"].is_null())
      cfg.D = dist::DistributionSpec::from_json(j["D"].dump());
    cfg.lr_alg = j.value("lr_alg", cfg.lr_alg);
    cfg.lr_adv = j.value("lr_adv", cfg.lr_adv);
    cfg.with_budgets = j.value("with_budgets", cfg.with_budgets);
    cfg.freeze_adversary = j.value("freeze_adversary", cfg.freeze_adversary);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.alg_hidden = j.value("alg_hidden", cfg.alg_hidden);
    cfg.adv_hidden = j.value("adv_hidden", cfg.adv_hidden);
    cfg.noise_dim = j.value("noise_dim", cfg.noise_dim);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("train config: bad JSON shape: ") +
                             e.what());
  }
  cfg.validate();
  return cfg;
}

std::string ExperienceArray::to_jsonl() const {
  std::ostringstream ss;
  for (const auto& entry : entries) {
    nlohmann::json j = nlohmann::json::parse(entry.instance.to_json());
    j["step"] = entry.step;
    j["cr"] = entry.cr;
    j["opt"] = entry.opt;
    ss << j.dump() << "\n";
  }
  return ss.str();
}

ExperienceArray ExperienceArray::from_jsonl(const std::string& text) {
  ExperienceArray out;
  std::istringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (line.empty()) continue;
    ExperienceEntry entry;
    entry.instance = AdWordsInstance::from_json(line);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("experience line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    entry.step = j.value("step", 0);
    entry.cr = j.value("cr", 1.0);
    entry.opt = j.contains("opt") ? j["opt"].get<double>()
                                  : lp::offline_optimum(entry.instance).value;
    out.entries.push_back(std::move(entry));
  }
  return out;
}

void ExperienceArray::save(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write " + path);
  f << to_jsonl();
  if (!f.good()) throw std::runtime_error("short write to " + path);
}

ExperienceArray ExperienceArray::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return from_jsonl(ss.str());
}

std::string TrainHistory::to_csv() const {
  std::ostringstream ss;
  ss << std::setprecision(10) << "step,worst_batch_cr,adv_cr\n";
  for (const auto& row : rows)
    ss << row.step << "," << row.worst_batch_cr << "," << row.adv_cr << "\n";
  return ss.str();
}

std::pair<size_t, double> select_worst(const SlotPolicy& policy,
                                       std::span<const AdWordsInstance> batch,
                                       std::span<const double> opts) {
  if (batch.empty())
    throw std::invalid_argument("select_worst: empty batch");
  if (opts.size() != batch.size())
    throw std::invalid_argument("select_worst: opts/batch size mismatch");
  size_t best = 0;
  double best_cr = std::numeric_limits<double>::infinity();
  for (size_t k = 0; k < batch.size(); ++k) {
    const double cr = fractional_cr(policy, batch[k], opts[k]);
    if (cr < best_cr) {  // strict: ties keep the first occurrence
      best_cr = cr;
      best = k;
    }
  }
  return {best, best_cr};
}

std::pair<size_t, double> select_worst(const SlotPolicy& policy,
                                       std::span<const AdWordsInstance> batch) {
  std::vector<double> opts;
  opts.reserve(batch.size());
  for (const auto& inst : batch)
    opts.push_back(lp::offline_optimum(inst).value);
  return select_worst(policy, batch, opts);
}

TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks) {
  cfg.validate();
  // Independent per-purpose rng streams, all derived once from the seed, so
  // the trajectory is a pure function of (config, seed).
  std::mt19937_64 master(cfg.seed);
  std::mt19937_64 rng_alg_init(master());
  std::mt19937_64 rng_adv_init(master());
  std::mt19937_64 rng_e_init(master());
  std::mt19937_64 rng_e_sample(master());
  std::mt19937_64 rng_coin(master());
  std::mt19937_64 rng_d(master());
  std::mt19937_64 rng_noise(master());
  std::mt19937_64 rng_append(master());

  const net::AlgNetConfig alg_cfg = cfg.alg_config();
  const net::AdvNetConfig adv_cfg = cfg.adv_config();
  const ad::MlpSpec adv_net_spec = net::adv_spec(adv_cfg);

  net::LearnedPolicy policy(alg_cfg, net::alg_init(alg_cfg, rng_alg_init));
  ad::ParamVector adv_params = net::adv_init(adv_cfg, rng_adv_init);
  ad::AdamState adam_alg(static_cast<int>(policy.params().values.size()),
                         cfg.lr_alg);
  ad::AdamState adam_adv(static_cast<int>(adv_params.values.size()),
                         cfg.lr_adv);

  TrainResult result;
  for (int k = 0; k < cfg.n_batch; ++k) {
    ExperienceEntry entry;
    entry.instance = dist::uniform_random(cfg.m, cfg.n, rng_e_init);
    entry.opt = lp::offline_optimum(entry.instance).value;
    entry.step = 0;
    entry.cr = fractional_cr(policy, entry.instance, entry.opt);
    result.experience.entries.push_back(std::move(entry));
  }

  std::uniform_real_distribution<double> coin(0.0, 1.0);
  auto sample_from_e = [&](int count, std::vector<AdWordsInstance>& batch,
                           std::vector<double>& opts) {
    std::uniform_int_distribution<size_t> pick(
        0, result.experience.entries.size() - 1);
    batch.clear();
    opts.clear();
    for (int k = 0; k < count; ++k) {
      const auto& entry = result.experience.entries[pick(rng_e_sample)];
      batch.push_back(entry.instance);
      opts.push_back(entry.opt);
    }
  };

  std::vector<AdWordsInstance> batch;
  std::vector<double> opts;
  for (int t = 1; t <= cfg.T; ++t) {
    try {
      double step_worst = std::numeric_limits<double>::infinity();
      for (int u = 0; u < cfg.T_alg; ++u) {
        const bool use_d = cfg.alpha > 0.0 && coin(rng_coin) < cfg.alpha;
        if (use_d) {
          std::vector<double> grad(policy.params().values.size(), 0.0);
          for (int k = 0; k < cfg.n_batch; ++k) {
            const AdWordsInstance inst = dist::sample(*cfg.D, rng_d);
            const CrGrad g = cr_grad_params(policy, policy.params(), inst);
            step_worst = std::min(step_worst, g.cr);
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += g.grad[i];
          }
          for (double& g : grad) g /= cfg.n_batch;
          adam_alg.step(policy.params().values, grad, /*ascend=*/true);
        } else {
          sample_from_e(cfg.n_batch, batch, opts);
          const auto [idx, cr] = select_worst(policy, batch, opts);
          step_worst = std::min(step_worst, cr);
          const CrGrad g =
              cr_grad_params(policy, policy.params(), batch[idx], opts[idx]);
          adam_alg.step(policy.params().values, g.grad, /*ascend=*/true);
        }
      }

      double step_adv = std::numeric_limits<double>::quiet_NaN();
      if (!cfg.freeze_adversary) {
        for (int u = 0; u < cfg.T_adv; ++u) {
          AdvBatchEval eval =
              adv_batch_grad(adv_cfg, adv_params, policy, nullptr,
                             /*track_max=*/false, cfg.n_noise, rng_noise);
          adam_adv.step(adv_params.values, eval.grad, /*ascend=*/false);
          step_adv = std::isnan(step_adv)
                         ? eval.extreme_obj
                         : std::min(step_adv, eval.extreme_obj);
        }
      }

      if (t % cfg.T_add == 0) {
        // Candidates: fresh adversary outputs plus a resample of E; the
        // hardest one (argmin CR, first occurrence) joins E.
        sample_from_e(cfg.n_batch, batch, opts);
        for (int k = 0; k < cfg.n_batch; ++k) {
          const std::vector<double> noise =
              net::sample_noise(adv_cfg.noise_dim, rng_append);
          AdWordsInstance inst = net::adv_generate(adv_cfg, adv_params, noise);
          opts.push_back(lp::offline_optimum(inst).value);
          batch.push_back(std::move(inst));
        }
        const auto [idx, cr] = select_worst(policy, batch, opts);
        ExperienceEntry entry;
        entry.instance = batch[idx];
        entry.opt = opts[idx];
        entry.step = t;
        entry.cr = cr;
        result.experience.entries.push_back(std::move(entry));
      }

      if (!cfg.freeze_adversary && t % cfg.T_restart == 0) {
        net::reinit(adv_params, adv_net_spec, rng_adv_init);
        adam_adv = ad::AdamState(static_cast<int>(adv_params.values.size()),
                                 cfg.lr_adv);
      }

      result.history.rows.push_back({t, step_worst, step_adv});
      result.steps_completed = t;
      if (hooks.on_step) hooks.on_step(t, result.history);
      if (cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0 &&
          hooks.on_checkpoint)
        hooks.on_checkpoint(t, policy.params(), adv_params);
    } catch (const std::runtime_error& e) {
      // Non-finite values or LP breakdown: stop and hand back a checkpoint.
      result.aborted = true;
      result.abort_reason = e.what();
      if (hooks.on_checkpoint)
        hooks.on_checkpoint(t, policy.params(), adv_params);
      break;
    }
  }

  result.alg_params = policy.params();
  result.adv_params = std::move(adv_params);
  return result;
}

void AdvSearchConfig::validate() const {
  if (steps < 1 || restart_every < 1 || batch < 1)
    throw std::invalid_argument("adv search: counters must be >= 1");
  if (m < 1 || n < 1 || noise_dim < 1)
    throw std::invalid_argument("adv search: bad shape");
  if (!(lr > 0.0))
    throw std::invalid_argument("adv search: learning rate must be > 0");
}

namespace {

AdvSearchResult adv_search(const SlotPolicy& a, const SlotPolicy* b,
                           const AdvSearchConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const bool track_max = b != nullptr;  // gap search maximizes
  const net::AdvNetConfig adv_cfg = cfg.adv_config();
  const ad::MlpSpec spec = net::adv_spec(adv_cfg);
  ad::ParamVector params = net::adv_init(adv_cfg, rng);
  ad::AdamState adam(static_cast<int>(params.values.size()), cfg.lr);

  AdvSearchResult result;
  result.best_objective = track_max
                              ? -std::numeric_limits<double>::infinity()
                              : std::numeric_limits<double>::infinity();
  for (int step = 1; step <= cfg.steps; ++step) {
    AdvBatchEval eval =
        adv_batch_grad(adv_cfg, params, a, b, track_max, cfg.batch, rng);
    result.trace.push_back(eval.extreme_obj);
    const bool better = track_max ? eval.extreme_obj > result.best_objective
                                  : eval.extreme_obj < result.best_objective;
    if (better) {
      result.best_objective = eval.extreme_obj;
      result.best_instance = std::move(eval.extreme_instance);
    }
    adam.step(params.values, eval.grad, /*ascend=*/track_max);
    if (step % cfg.restart_every == 0) {
      net::reinit(params, spec, rng);
      adam = ad::AdamState(static_cast<int>(params.values.size()), cfg.lr);
    }
  }
  return result;
}

}  // namespace

AdvSearchResult adv_search_fixed(const SlotPolicy& target,
                                 const AdvSearchConfig& cfg,
                                 std::mt19937_64& rng) {
  return adv_search(target, nullptr, cfg, rng);
}

AdvSearchResult adv_search_diff(const SlotPolicy& a, const SlotPolicy& b,
                                const AdvSearchConfig& cfg,
                                std::mt19937_64& rng) {
  return adv_search(a, &b, cfg, rng);
}

}  // namespace advalloc::train
