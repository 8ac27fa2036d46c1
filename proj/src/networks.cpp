#include "advalloc/networks.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace advalloc::net {

ad::MlpSpec alg_spec(const AlgNetConfig& cfg) {
  std::vector<int> dims = {kSlotFeatureDim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(1);
  return ad::MlpSpec::dense(dims, ad::Act::relu, ad::Act::linear);
}

ad::ParamVector alg_init(const AlgNetConfig& cfg, std::mt19937_64& rng) {
  return ad::mlp_init(alg_spec(cfg), rng);
}

std::vector<double> build_features(std::span<const double> bids_row,
                                   std::span<const double> remaining,
                                   std::span<const double> budgets) {
  const int n = static_cast<int>(bids_row.size());
  if (static_cast<int>(remaining.size()) != n ||
      static_cast<int>(budgets.size()) != n)
    throw std::invalid_argument("features: length mismatch");
  std::vector<double> frac(n);
  for (int i = 0; i < n; ++i) frac[i] = remaining[i] / budgets[i];
  const double sum_v = ad::stable_sum(bids_row);
  const double sum_frac = ad::stable_sum(frac);
  const double sum_b = ad::stable_sum(budgets);
  std::vector<double> rows(static_cast<size_t>(n) * kSlotFeatureDim);
  for (int i = 0; i < n; ++i) {
    double* r = rows.data() + static_cast<size_t>(i) * kSlotFeatureDim;
    r[0] = bids_row[i];
    r[1] = frac[i];
    r[2] = budgets[i];
    r[3] = sum_v;
    r[4] = sum_frac;
    r[5] = sum_b;
  }
  return rows;
}

std::vector<double> alg_forward(const ad::MlpSpec& spec,
                                const ad::ParamVector& params,
                                std::span<const double> features, int n) {
  if (n < 1) throw std::invalid_argument("alg_forward: n must be >= 1");
  if (static_cast<int>(features.size()) != n * kSlotFeatureDim)
    throw std::invalid_argument("alg_forward: features must be n x 6");
  std::vector<double> scores(n);
  for (int i = 0; i < n; ++i) {
    std::vector<double> out = ad::mlp_apply(
        spec, params,
        features.subspan(static_cast<size_t>(i) * kSlotFeatureDim,
                         kSlotFeatureDim));
    scores[i] = out[0];
  }
  double mx = scores[0];
  for (double s : scores) mx = std::max(mx, s);
  std::vector<double> ex(n);
  for (int i = 0; i < n; ++i) ex[i] = std::exp(scores[i] - mx);
  // Value-ordered accumulation keeps the softmax bit-exactly equivariant.
  const double denom = ad::stable_sum(ex);
  for (int i = 0; i < n; ++i) ex[i] /= denom;
  return ex;
}

LearnedPolicy::LearnedPolicy(AlgNetConfig cfg, ad::ParamVector params,
                             std::string name)
    : cfg_(std::move(cfg)),
      spec_(alg_spec(cfg_)),
      params_(std::move(params)),
      name_(std::move(name)) {
  if (params_.size() != spec_.param_count())
    throw std::invalid_argument("learned policy: parameter count mismatch");
}

std::vector<double> LearnedPolicy::allocate(const AdWordsInstance& inst,
                                            std::span<const double> remaining,
                                            int slot) const {
  std::span<const double> row(inst.bids.data() +
                                  static_cast<size_t>(slot) * inst.n,
                              static_cast<size_t>(inst.n));
  std::vector<double> feats = build_features(row, remaining, inst.budgets);
  return alg_forward(spec_, params_, feats, inst.n);
}

ad::Var LearnedPolicy::allocate(ad::Tape& t, ad::Var params,
                                const AdWordsInstance& inst, ad::Var remaining,
                                ad::Var bids_row, int) const {
  const int n = inst.n;
  ad::Var budgets = t.leaf(std::span<const double>(inst.budgets));
  std::vector<ad::Var> frac_parts;
  frac_parts.reserve(n);
  for (int i = 0; i < n; ++i)
    frac_parts.push_back(
        t.scale(t.index(remaining, i), 1.0 / inst.budgets[i]));
  ad::Var frac = t.concat(frac_parts);
  ad::Var sum_v = t.sum(bids_row);
  ad::Var sum_frac = t.sum(frac);
  ad::Var sum_b = t.sum(budgets);

  std::vector<ad::Var> scores;
  scores.reserve(n);
  for (int i = 0; i < n; ++i) {
    std::vector<ad::Var> cells = {t.index(bids_row, i), t.index(frac, i),
                                  t.index(budgets, i),  sum_v,
                                  sum_frac,             sum_b};
    ad::Var row = t.concat(cells);
    scores.push_back(ad::mlp_apply(t, spec_, params, row));
  }
  return t.softmax(t.concat(scores));
}

// --- adversary ---------------------------------------------------------------

ad::MlpSpec adv_spec(const AdvNetConfig& cfg) {
  std::vector<int> dims = {cfg.noise_dim};
  dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
  dims.push_back(cfg.m * cfg.n + (cfg.with_budgets ? cfg.n : 0));
  return ad::MlpSpec::dense(dims, ad::Act::relu, ad::Act::linear);
}

ad::ParamVector adv_init(const AdvNetConfig& cfg, std::mt19937_64& rng) {
  return ad::mlp_init(adv_spec(cfg), rng);
}

void reinit(ad::ParamVector& params, const ad::MlpSpec& spec,
            std::mt19937_64& rng) {
  params = ad::mlp_init(spec, rng);
}

AdWordsInstance adv_generate(const AdvNetConfig& cfg,
                             const ad::ParamVector& params,
                             std::span<const double> noise) {
  if (static_cast<int>(noise.size()) != cfg.noise_dim)
    throw std::invalid_argument("adversary: noise dimension mismatch");
  const ad::MlpSpec spec = adv_spec(cfg);
  std::vector<double> out = ad::mlp_apply(spec, params, noise);
  AdWordsInstance inst;
  inst.m = cfg.m;
  inst.n = cfg.n;
  inst.bids.resize(static_cast<size_t>(cfg.m) * cfg.n);
  for (size_t k = 0; k < inst.bids.size(); ++k)
    inst.bids[k] = 1.0 / (1.0 + std::exp(-out[k]));
  inst.budgets.assign(cfg.n, static_cast<double>(cfg.m) / cfg.n);
  if (cfg.with_budgets) {
    for (int i = 0; i < cfg.n; ++i) {
      const double s =
          1.0 / (1.0 + std::exp(-out[static_cast<size_t>(cfg.m) * cfg.n + i]));
      inst.budgets[i] = 1.0 + (cfg.m - 1) * s;
    }
  }
  return inst;
}

std::vector<double> sample_noise(int dim, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<double> z(dim);
  for (double& v : z) v = gauss(rng);
  return z;
}

ad::Var adv_bids(ad::Tape& tape, const AdvNetConfig& cfg, ad::Var params,
                 ad::Var noise) {
  const ad::MlpSpec spec = adv_spec(cfg);
  ad::Var out = ad::mlp_apply(tape, spec, params, noise);
  return tape.sigmoid(tape.slice(out, 0, cfg.m * cfg.n));
}

// --- checkpoints -------------------------------------------------------------

std::string params_to_json(const ad::ParamVector& params) {
  nlohmann::json j;
  j["segments"] = nlohmann::json::array();
  for (const auto& seg : params.segments) {
    nlohmann::json s;
    s["name"] = seg.name;
    s["shape"] = seg.shape;
    s["offset"] = seg.offset;
    j["segments"].push_back(std::move(s));
  }
  j["values"] = params.values;
  return j.dump();
}

ad::ParamVector params_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad JSON: ") + e.what());
  }
  ad::ParamVector p;
  try {
    for (const auto& s : j.at("segments")) {
      const int offset =
          p.add(s.at("name").get<std::string>(),
                s.at("shape").get<std::vector<int>>());
      if (offset != s.at("offset").get<int>())
        throw std::runtime_error("checkpoint: segment offsets do not chain");
    }
    std::vector<double> values = j.at("values").get<std::vector<double>>();
    if (values.size() != p.values.size())
      throw std::runtime_error("checkpoint: value count mismatch");
    p.values = std::move(values);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: bad JSON shape: ") +
                             e.what());
  }
  return p;
}

}  // namespace advalloc::net
