#include "advalloc/skirental.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace advalloc::ski {
namespace {

constexpr double kMonotoneTol = 1e-9;

double gauss_phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void check_unit(double x, const char* name) {
  if (!std::isfinite(x) || x <= 0.0 || x > 1.0) {
    throw std::invalid_argument(std::string(name) + " must lie in (0, 1]");
  }
}

// The g-bucket step approximation of the expected cost as a linear form over
// CDF samples: cost = constant + sum_k coeff[k] * P(ts[k]). Mass P(0) buys at
// time 0 (cost beta); mass in ((k-1)/g, k/g] is charged beta plus the bucket
// midpoint; an off-grid alpha gets a final partial bucket charged at its own
// midpoint; mass beyond alpha rents to the end (cost alpha).
struct StepCharge {
  std::vector<double> ts;     // CDF sample points, ascending, ts[0] = 0
  std::vector<double> coeff;  // same length as ts
  double constant = 0.0;
  double opt = 0.0;
};

StepCharge step_charge(const SkiScenario& sc, int g) {
  sc.validate();
  if (g < 1) throw std::invalid_argument("grid must be at least 1");
  const double h = 1.0 / g;
  const int full = static_cast<int>(std::floor(sc.alpha * g + 1e-9));
  const bool partial = sc.alpha > (full + 1e-9) * h;

  StepCharge out;
  out.opt = std::min(sc.alpha, sc.beta);
  out.ts.resize(full + 1);
  for (int k = 0; k <= full; ++k) out.ts[k] = k * h;
  if (partial) out.ts.push_back(sc.alpha);
  out.coeff.assign(out.ts.size(), 0.0);

  out.coeff[0] += sc.beta;
  for (int k = 1; k <= full; ++k) {
    const double charge = sc.beta + (2 * k - 1) * h / 2.0;
    out.coeff[k] += charge;
    out.coeff[k - 1] -= charge;
  }
  if (partial) {
    const double charge = sc.beta + (full * h + sc.alpha) / 2.0;
    out.coeff[out.ts.size() - 1] += charge;
    out.coeff[full] -= charge;
  }
  out.constant = sc.alpha;
  out.coeff[out.ts.size() - 1] -= sc.alpha;
  return out;
}

std::vector<double> softmax_values(std::span<const double> logits) {
  double mx = logits[0];
  for (double v : logits) mx = std::max(mx, v);
  std::vector<double> w(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    w[i] = std::exp(logits[i] - mx);
    total += w[i];
  }
  for (double& v : w) v /= total;
  return w;
}

std::vector<double> head_input(const KernelCdfConfig& cfg, double beta,
                               double alpha) {
  if (cfg.input == CdfInput::alpha_beta) return {alpha, beta};
  return {beta};
}

// CDF values at many query times for one beta, batched into a single forward
// per layer. Each row reproduces kernel_cdf at that query point.
std::vector<double> mixture_at(const KernelCdfConfig& cfg,
                               const ad::ParamVector& params, double beta,
                               std::span<const double> ts) {
  const std::vector<double> means = cfg.means();
  std::vector<double> out(ts.size());
  if (cfg.input == CdfInput::beta_only) {
    const std::vector<double> logits =
        ad::mlp_apply(cdf_spec(cfg), params, head_input(cfg, beta, 0.0));
    const std::vector<double> w = softmax_values(logits);
    for (std::size_t k = 0; k < ts.size(); ++k) {
      out[k] = kernel_mixture_cdf(w, means, cfg.sigma, ts[k]);
    }
    return out;
  }
  std::vector<double> xs(2 * ts.size());
  for (std::size_t k = 0; k < ts.size(); ++k) {
    xs[2 * k] = ts[k];
    xs[2 * k + 1] = beta;
  }
  const std::vector<double> logits =
      ad::mlp_apply_batch(cdf_spec(cfg), params, xs);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const std::vector<double> w = softmax_values(
        std::span<const double>(logits.data() + k * means.size(),
                                means.size()));
    out[k] = kernel_mixture_cdf(w, means, cfg.sigma, ts[k]);
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Scenario and discrete strategies.

void SkiScenario::validate() const {
  check_unit(alpha, "alpha");
  check_unit(beta, "beta");
}

void DiscreteStrategy::validate() const {
  if (B < 1) throw std::invalid_argument("B must be at least 1");
  if (N < B) throw std::invalid_argument("N must be at least B");
  if (static_cast<int>(probs.size()) != N) {
    throw std::invalid_argument("probs must have one entry per day");
  }
  double total = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < -1e-12) {
      throw std::invalid_argument("probs must be nonnegative");
    }
    total += p;
  }
  if (total > 1.0 + 1e-9) {
    throw std::invalid_argument("probs must sum to at most 1");
  }
}

std::vector<double> DiscreteStrategy::cumulative() const {
  std::vector<double> out(probs.size());
  double run = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    run += probs[i];
    out[i] = run;
  }
  return out;
}

DiscreteStrategy ski_optimal_strategy(int B, int N) {
  if (B < 1) throw std::invalid_argument("B must be at least 1");
  if (N < B) throw std::invalid_argument("N must be at least B");
  DiscreteStrategy s;
  s.B = B;
  s.N = N;
  s.probs.assign(N, 0.0);
  const double q = (B - 1.0) / B;
  const double c = 1.0 / (1.0 - std::pow(q, B));
  for (int i = 1; i <= B; ++i) {
    s.probs[i - 1] = std::pow(q, B - i) * c / B;
  }
  return s;
}

double strategy_cr(const DiscreteStrategy& s) {
  s.validate();
  double worst = 0.0;
  double bought = 0.0;  // mass that has bought so far
  double spent = 0.0;   // expected cost of that mass
  for (int k = 1; k <= s.N; ++k) {
    bought += s.probs[k - 1];
    spent += s.probs[k - 1] * (k - 1 + s.B);
    const double cost = spent + (1.0 - bought) * k;
    worst = std::max(worst, cost / std::min(k, s.B));
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Continuous competitive ratio.

double ski_cr(const std::function<double(double)>& cdf, const SkiScenario& sc,
              int grid) {
  const StepCharge charge = step_charge(sc, grid);
  std::vector<double> p(charge.ts.size());
  for (std::size_t k = 0; k < charge.ts.size(); ++k) {
    p[k] = cdf(charge.ts[k]);
    if (!std::isfinite(p[k])) throw std::invalid_argument("cdf is not finite");
  }
  if (p.front() < -kMonotoneTol || p.back() > 1.0 + kMonotoneTol) {
    throw std::invalid_argument("cdf leaves [0, 1]");
  }
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] < p[k - 1] - kMonotoneTol) {
      throw std::invalid_argument("cdf is not monotone on the grid");
    }
  }
  double cost = charge.constant;
  for (std::size_t k = 0; k < p.size(); ++k) cost += charge.coeff[k] * p[k];
  return cost / charge.opt;
}

// ---------------------------------------------------------------------------
// Kernel CDF network.

void KernelCdfConfig::validate() const {
  if (kernels < 1) throw std::invalid_argument("kernels must be at least 1");
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  for (int h : hidden) {
    if (h < 1) throw std::invalid_argument("hidden widths must be positive");
  }
}

std::vector<double> KernelCdfConfig::means() const {
  std::vector<double> xs(kernels);
  if (kernels == 1) {
    xs[0] = 0.5;
    return xs;
  }
  for (int i = 0; i < kernels; ++i) xs[i] = double(i) / (kernels - 1);
  return xs;
}

ad::MlpSpec cdf_spec(const KernelCdfConfig& cfg) {
  cfg.validate();
  std::vector<int> dims;
  dims.push_back(cfg.input_dim());
  for (int h : cfg.hidden) dims.push_back(h);
  dims.push_back(cfg.kernels);
  return ad::MlpSpec::dense(dims, ad::Act::relu, ad::Act::linear);
}

ad::ParamVector cdf_init(const KernelCdfConfig& cfg, std::mt19937_64& rng) {
  return ad::mlp_init(cdf_spec(cfg), rng);
}

double kernel_mixture_cdf(std::span<const double> weights,
                          std::span<const double> means, double sigma,
                          double alpha) {
  if (weights.size() != means.size()) {
    throw std::invalid_argument("weights and means must have equal length");
  }
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    total += weights[i] * gauss_phi((alpha - means[i]) / sigma);
  }
  return total;
}

double kernel_cdf(const KernelCdfConfig& cfg, const ad::ParamVector& params,
                  double beta, double alpha) {
  const std::vector<double> logits =
      ad::mlp_apply(cdf_spec(cfg), params, head_input(cfg, beta, alpha));
  return kernel_mixture_cdf(softmax_values(logits), cfg.means(), cfg.sigma,
                            alpha);
}

ad::Var kernel_cdf(ad::Tape& tape, const KernelCdfConfig& cfg, ad::Var params,
                   double beta, double alpha) {
  const ad::MlpSpec spec = cdf_spec(cfg);
  const ad::Var x = tape.leaf(head_input(cfg, beta, alpha));
  const ad::Var w = tape.softmax(ad::mlp_apply(tape, spec, params, x));
  const std::vector<double> means = cfg.means();
  std::vector<double> phis(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    phis[i] = gauss_phi((alpha - means[i]) / cfg.sigma);
  }
  return tape.dot(w, tape.leaf(phis));
}

ad::Var ski_cr_loss(ad::Tape& tape, const KernelCdfConfig& cfg, ad::Var params,
                    const SkiScenario& sc, int grid) {
  const StepCharge charge = step_charge(sc, grid);
  if (cfg.input == CdfInput::beta_only) {
    // The weight head never sees alpha, so one forward pass serves the whole
    // grid: P(t) = w . phi(t).
    std::vector<ad::Var> p(charge.ts.size());
    const ad::MlpSpec spec = cdf_spec(cfg);
    const ad::Var x = tape.leaf(head_input(cfg, sc.beta, 0.0));
    const ad::Var w = tape.softmax(ad::mlp_apply(tape, spec, params, x));
    const std::vector<double> means = cfg.means();
    std::vector<double> phis(means.size());
    for (std::size_t k = 0; k < charge.ts.size(); ++k) {
      for (std::size_t i = 0; i < means.size(); ++i) {
        phis[i] = gauss_phi((charge.ts[k] - means[i]) / cfg.sigma);
      }
      p[k] = tape.dot(w, tape.leaf(phis));
    }
    const ad::Var pvec = tape.concat(p);
    const ad::Var cost = tape.add_const(tape.dot(pvec, tape.leaf(charge.coeff)),
                                        charge.constant);
    return tape.scale(cost, 1.0 / charge.opt);
  }
  // One batched forward: row k carries (ts[k], beta), and the per-row kernel
  // sums P(ts[k]) = w_k . phi_k collapse the grid into three wide nodes.
  const std::size_t batch = charge.ts.size();
  const std::vector<double> means = cfg.means();
  std::vector<double> xs(2 * batch);
  std::vector<double> phis(batch * means.size());
  for (std::size_t k = 0; k < batch; ++k) {
    xs[2 * k] = charge.ts[k];
    xs[2 * k + 1] = sc.beta;
    for (std::size_t i = 0; i < means.size(); ++i) {
      phis[k * means.size() + i] =
          gauss_phi((charge.ts[k] - means[i]) / cfg.sigma);
    }
  }
  const ad::Var logits =
      ad::mlp_apply_rows(tape, cdf_spec(cfg), params, tape.leaf(xs));
  const ad::Var w = tape.softmax_rows(logits, cfg.kernels);
  const ad::Var pvec =
      tape.row_sums(tape.mul(w, tape.leaf(phis)), cfg.kernels);
  const ad::Var cost = tape.add_const(tape.dot(pvec, tape.leaf(charge.coeff)),
                                      charge.constant);
  return tape.scale(cost, 1.0 / charge.opt);
}

std::vector<double> instantiate_cdf(const KernelCdfConfig& cfg,
                                    const ad::ParamVector& params, int B,
                                    int N) {
  if (B < 1) throw std::invalid_argument("B must be at least 1");
  if (N < B) throw std::invalid_argument("N must be at least B");
  const double beta = double(B) / N;
  std::vector<double> out(N);
  for (int i = 1; i <= N; ++i) {
    out[i - 1] = kernel_cdf(cfg, params, beta, double(i) / N);
  }
  return out;
}

double strategy_sup_distance(const KernelCdfConfig& cfg,
                             const ad::ParamVector& params, int B, int N) {
  const std::vector<double> got = instantiate_cdf(cfg, params, B, N);
  const std::vector<double> want = ski_optimal_strategy(B, N).cumulative();
  double sup = 0.0;
  for (int i = 0; i < N; ++i) sup = std::max(sup, std::abs(got[i] - want[i]));
  return sup;
}

// ---------------------------------------------------------------------------
// Training.

void SkiTrainConfig::validate() const {
  if (iterations < 0) throw std::invalid_argument("iterations must be >= 0");
  if (betas_per_iter < 1) {
    throw std::invalid_argument("betas_per_iter must be at least 1");
  }
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw std::invalid_argument("epsilon must lie in (0, 1]");
  }
  if (grid < 1) throw std::invalid_argument("grid must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be positive");
  if (lr_final > lr) {
    throw std::invalid_argument("lr_final must not exceed lr");
  }
  if (!(beta_min > 0.0) || beta_min > beta_max || beta_max > 1.0) {
    throw std::invalid_argument("need 0 < beta_min <= beta_max <= 1");
  }
  if (!(divergence_cr > 1.0)) {
    throw std::invalid_argument("divergence_cr must exceed 1");
  }
  net.validate();
}

std::string SkiTrainConfig::to_json() const {
  nlohmann::json j;
  j["iterations"] = iterations;
  j["betas_per_iter"] = betas_per_iter;
  j["epsilon"] = epsilon;
  j["grid"] = grid;
  j["lr"] = lr;
  j["lr_final"] = lr_final;
  j["beta_min"] = beta_min;
  j["beta_max"] = beta_max;
  j["divergence_cr"] = divergence_cr;
  j["seed"] = seed;
  j["net"] = {{"kernels", net.kernels},
              {"sigma", net.sigma},
              {"hidden", net.hidden},
              {"input", net.input == CdfInput::alpha_beta ? "alpha_beta"
                                                          : "beta_only"}};
  return j.dump(2);
}

SkiTrainConfig SkiTrainConfig::from_json(const std::string& text) {
  SkiTrainConfig cfg;
  try {
    const nlohmann::json j = nlohmann::json::parse(text);
    cfg.iterations = j.value("iterations", cfg.iterations);
    cfg.betas_per_iter = j.value("betas_per_iter", cfg.betas_per_iter);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    cfg.grid = j.value("grid", cfg.grid);
    cfg.lr = j.value("lr", cfg.lr);
    cfg.lr_final = j.value("lr_final", cfg.lr_final);
    cfg.beta_min = j.value("beta_min", cfg.beta_min);
    cfg.beta_max = j.value("beta_max", cfg.beta_max);
    cfg.divergence_cr = j.value("divergence_cr", cfg.divergence_cr);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("net")) {
      const nlohmann::json& n = j.at("net");
      cfg.net.kernels = n.value("kernels", cfg.net.kernels);
      cfg.net.sigma = n.value("sigma", cfg.net.sigma);
      cfg.net.hidden = n.value("hidden", cfg.net.hidden);
      const std::string input = n.value("input", std::string("alpha_beta"));
      if (input == "alpha_beta") {
        cfg.net.input = CdfInput::alpha_beta;
      } else if (input == "beta_only") {
        cfg.net.input = CdfInput::beta_only;
      } else {
        throw std::invalid_argument("unknown cdf input mode: " + input);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("bad ski train config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SkiTrainResult ski_train(const SkiTrainConfig& cfg, SkiTrainHooks hooks) {
  cfg.validate();
  std::mt19937_64 master(cfg.seed);
  std::mt19937_64 rng_init(master());
  std::mt19937_64 rng_beta(master());

  SkiTrainResult out;
  out.net = cfg.net;
  out.params = cdf_init(cfg.net, rng_init);
  ad::AdamState adam(out.params.size(), cfg.lr);

  const int alphas = static_cast<int>(std::floor(1.0 / cfg.epsilon + 1e-9));
  std::vector<double> alpha_net(alphas);
  for (int k = 1; k <= alphas; ++k) {
    alpha_net[k - 1] = std::min(1.0, k * cfg.epsilon);
  }
  std::uniform_real_distribution<double> beta_dist(cfg.beta_min, cfg.beta_max);

  ad::Tape tape;
  for (int step = 1; step <= cfg.iterations; ++step) {
    try {
      SkiIterRow row;
      row.step = step;
      row.worst_cr = -1.0;
      for (int b = 0; b < cfg.betas_per_iter; ++b) {
        const double beta = beta_dist(rng_beta);
        // One batched pass over the grid per beta; every alpha on the net
        // reuses it.
        std::vector<double> grid_ts(cfg.grid + 1);
        for (int k = 0; k <= cfg.grid; ++k) grid_ts[k] = double(k) / cfg.grid;
        const std::vector<double> pg =
            mixture_at(cfg.net, out.params, beta, grid_ts);
        const auto cdf = [&](double t) {
          const double scaled = t * cfg.grid;
          const int k = static_cast<int>(std::llround(scaled));
          if (std::abs(scaled - k) < 1e-9) return pg[k];
          return kernel_cdf(cfg.net, out.params, beta, t);
        };
        for (double alpha : alpha_net) {
          const StepCharge charge = step_charge({alpha, beta}, cfg.grid);
          double cost = charge.constant;
          for (std::size_t k = 0; k < charge.ts.size(); ++k) {
            cost += charge.coeff[k] * cdf(charge.ts[k]);
          }
          const double cr = cost / charge.opt;
          // Non-finite ratios stick so the divergence gate below sees them.
          if (!std::isfinite(cr) || cr > row.worst_cr) {
            row.worst_cr = cr;
            row.worst_alpha = alpha;
            row.worst_beta = beta;
          }
        }
      }
      out.history.push_back(row);
      if (!std::isfinite(row.worst_cr) || row.worst_cr > cfg.divergence_cr) {
        out.aborted = true;
        std::ostringstream reason;
        reason << "diverged at step " << step << ": worst ratio "
               << row.worst_cr << " exceeds " << cfg.divergence_cr;
        out.abort_reason = reason.str();
        break;
      }

      if (cfg.lr_final > 0.0 && cfg.iterations > 1) {
        const double phase = double(step - 1) / (cfg.iterations - 1);
        adam.lr = cfg.lr_final +
                  0.5 * (cfg.lr - cfg.lr_final) *
                      (1.0 + std::cos(std::numbers::pi * phase));
      }
      tape.clear();
      const ad::Var leaf = tape.leaf(out.params.values);
      const ad::Var loss = ski_cr_loss(tape, cfg.net, leaf,
                                       {row.worst_alpha, row.worst_beta},
                                       cfg.grid);
      tape.backward(loss);
      const auto grad = tape.adjoint(leaf);
      const std::vector<double> before = out.params.values;
      adam.step(out.params.values, grad, /*ascend=*/false);
      for (double v : out.params.values) {
        if (!std::isfinite(v)) {
          out.params.values = before;  // checkpoint the last finite state
          throw ad::NumericError("parameters turned non-finite");
        }
      }
      out.steps_completed = step;
      if (hooks.on_step) hooks.on_step(step, row, out.params);
    } catch (const std::runtime_error& e) {
      out.aborted = true;
      if (out.abort_reason.empty()) {
        out.abort_reason = std::string("step ") + std::to_string(step) + ": " +
                           e.what();
      }
      break;
    }
  }
  if (hooks.on_checkpoint) hooks.on_checkpoint(out.steps_completed, out.params);
  return out;
}

std::string ski_history_csv(std::span<const SkiIterRow> rows) {
  std::ostringstream os;
  os << std::setprecision(10);
  os << "step,worst_cr,worst_alpha,worst_beta\n";
  for (const SkiIterRow& r : rows) {
    os << r.step << ',' << r.worst_cr << ',' << r.worst_alpha << ','
       << r.worst_beta << '\n';
  }
  return os.str();
}

}  // namespace advalloc::ski
