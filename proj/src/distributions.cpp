#include "advalloc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace advalloc::dist {

namespace {
constexpr double kBudgetFloor = 1e-6;

// In-place uniform column permutation (advertisers plus their budgets).
void permute_columns(AdWordsInstance& inst, std::mt19937_64& rng) {
  const int n = inst.n;
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  AdWordsInstance out = inst;
  for (int j = 0; j < inst.m; ++j)
    for (int k = 0; k < n; ++k) out.bid(j, k) = inst.bid(j, perm[k]);
  for (int k = 0; k < n; ++k) out.budgets[k] = inst.budgets[perm[k]];
  inst = std::move(out);
}
}  // namespace

AdWordsInstance triangular(int n, int B, std::mt19937_64& rng) {
  if (n < 1 || B < 1)
    throw std::invalid_argument("triangular: n and B must be >= 1");
  AdWordsInstance inst;
  inst.n = n;
  inst.m = n * B;
  inst.budgets.assign(n, static_cast<double>(B));
  inst.bids.assign(static_cast<size_t>(inst.m) * n, 0.0);
  for (int j = 0; j < n; ++j)
    for (int row = 0; row < (j + 1) * B; ++row) inst.bid(row, j) = 1.0;
  permute_columns(inst, rng);
  return inst;
}

AdWordsInstance thick_z(int n, int B, std::mt19937_64& rng) {
  if (n < 2 || B < 1)
    throw std::invalid_argument("thick_z: need n >= 2 and B >= 1");
  const int heavy_lo = (n + 1) / 2;       // heavy advertisers: i >= ceil(n/2)
  const int heavy_rows = B * heavy_lo;    // shared prefix [0, B*ceil(n/2))
  AdWordsInstance inst;
  inst.n = n;
  inst.m = n * B;
  inst.budgets.assign(n, static_cast<double>(B));
  inst.bids.assign(static_cast<size_t>(inst.m) * n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int row = i * B; row < (i + 1) * B; ++row) inst.bid(row, i) = 1.0;
    if (i >= heavy_lo)
      for (int row = 0; row < heavy_rows; ++row) inst.bid(row, i) = 1.0;
  }
  permute_columns(inst, rng);
  return inst;
}

std::vector<double> greedy_budgets(const std::vector<double>& bids, int m,
                                   int n) {
  if (bids.size() != static_cast<size_t>(m) * n)
    throw std::invalid_argument("greedy_budgets: shape mismatch");
  std::vector<double> spend(n, 0.0);
  for (int j = 0; j < m; ++j) {
    const double* row = bids.data() + static_cast<size_t>(j) * n;
    int best = 0;
    for (int i = 1; i < n; ++i)
      if (row[i] > row[best]) best = i;  // ties stay at the lowest index
    if (row[best] > 0.0) spend[best] += row[best];
  }
  for (double& s : spend) s = std::max(s, kBudgetFloor);
  return spend;
}

AdWordsInstance powerlaw(int n, std::mt19937_64& rng) {
  if (n < 2) throw std::invalid_argument("powerlaw: n must be >= 2");
  const int m = n * n;
  AdWordsInstance inst;
  inst.n = n;
  inst.m = m;
  inst.bids.assign(static_cast<size_t>(m) * n, 0.0);
  std::normal_distribution<double> deg_gauss(1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::vector<double> counts(n, 1.0);
  std::vector<double> avail(n);
  std::vector<int> chosen;
  for (int j = 0; j < m; ++j) {
    const long raw = std::lround(std::exp(deg_gauss(rng)));
    const int d = static_cast<int>(std::clamp<long>(raw, 1, n));
    avail = counts;
    chosen.clear();
    for (int t = 0; t < d; ++t) {
      double total = 0.0;
      for (double c : avail) total += c;
      double u = u01(rng) * total;
      int pick = n - 1;
      for (int i = 0; i < n; ++i) {
        u -= avail[i];
        if (u < 0.0) {
          pick = i;
          break;
        }
      }
      chosen.push_back(pick);
      avail[pick] = 0.0;
    }
    const double base = u01(rng);
    std::normal_distribution<double> bid_gauss(base, 0.1);
    for (int k : chosen)
      inst.bid(j, k) = std::clamp(bid_gauss(rng), 0.0, 1.0);
    for (int k : chosen) counts[k] += 1.0;  // attach after the whole ad
  }
  inst.budgets = greedy_budgets(inst.bids, m, n);
  return inst;
}

AdWordsInstance triangular_g(int n, std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("triangular_g: n must be >= 1");
  const int B = n;
  AdWordsInstance inst;
  inst.n = n;
  inst.m = n * B;
  inst.budgets.assign(n, 1.0);  // replaced below
  inst.bids.assign(static_cast<size_t>(inst.m) * n, 0.0);
  std::uniform_real_distribution<double> u(0.5, 1.0);
  for (int j = 0; j < n; ++j)
    for (int row = 0; row < (j + 1) * B; ++row) inst.bid(row, j) = u(rng);
  permute_columns(inst, rng);
  inst.budgets = greedy_budgets(inst.bids, inst.m, n);
  return inst;
}

AdWordsInstance uniform_random(int m, int n, std::mt19937_64& rng) {
  if (m < 1 || n < 1)
    throw std::invalid_argument("uniform_random: m and n must be >= 1");
  AdWordsInstance inst;
  inst.m = m;
  inst.n = n;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  inst.bids.resize(static_cast<size_t>(m) * n);
  for (double& v : inst.bids) v = u01(rng);
  inst.budgets.assign(n, static_cast<double>(m) / n);
  return inst;
}

namespace {

const char* family_name(Family f) {
  switch (f) {
    case Family::triangular: return "triangular";
    case Family::thick_z: return "thick_z";
    case Family::powerlaw: return "powerlaw";
    case Family::triangular_g: return "triangular_g";
    case Family::uniform_random: return "uniform_random";
    case Family::mixture: return "mixture";
  }
  return "?";
}

Family family_from_name(const std::string& s) {
  if (s == "triangular") return Family::triangular;
  if (s == "thick_z") return Family::thick_z;
  if (s == "powerlaw") return Family::powerlaw;
  if (s == "triangular_g") return Family::triangular_g;
  if (s == "uniform_random" || s == "uniform") return Family::uniform_random;
  if (s == "mixture") return Family::mixture;
  throw std::invalid_argument("unknown distribution family: " + s);
}

void spec_to_json(const DistributionSpec& spec, nlohmann::json& j) {
  j["family"] = family_name(spec.family);
  switch (spec.family) {
    case Family::triangular:
    case Family::thick_z:
      j["n"] = spec.n;
      j["B"] = spec.B;
      break;
    case Family::powerlaw:
    case Family::triangular_g:
      j["n"] = spec.n;
      break;
    case Family::uniform_random:
      j["m"] = spec.m;
      j["n"] = spec.n;
      break;
    case Family::mixture: {
      j["weights"] = spec.weights;
      nlohmann::json comps = nlohmann::json::array();
      for (const auto& c : spec.components) {
        nlohmann::json cj;
        spec_to_json(c, cj);
        comps.push_back(std::move(cj));
      }
      j["components"] = std::move(comps);
      break;
    }
  }
  if (spec.seed != 0) j["seed"] = spec.seed;
}

DistributionSpec spec_from_json(const nlohmann::json& j) {
  DistributionSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  if (j.contains("n")) spec.n = j["n"].get<int>();
  if (j.contains("B")) spec.B = j["B"].get<int>();
  if (j.contains("m")) spec.m = j["m"].get<int>();
  if (j.contains("seed")) spec.seed = j["seed"].get<uint64_t>();
  if (spec.family == Family::mixture) {
    spec.weights = j.at("weights").get<std::vector<double>>();
    for (const auto& cj : j.at("components"))
      spec.components.push_back(spec_from_json(cj));
  }
  spec.validate();
  return spec;
}

}  // namespace

std::string DistributionSpec::name() const {
  std::ostringstream ss;
  switch (family) {
    case Family::triangular:
      ss << "triangular(" << n << "," << B << ")";
      break;
    case Family::thick_z:
      ss << "thick_z(" << n << "," << B << ")";
      break;
    case Family::powerlaw:
      ss << "powerlaw(" << n << ")";
      break;
    case Family::triangular_g:
      ss << "triangular_g(" << n << ")";
      break;
    case Family::uniform_random:
      ss << "uniform(" << m << "," << n << ")";
      break;
    case Family::mixture: {
      ss << "mixture[";
      for (size_t k = 0; k < components.size(); ++k) {
        if (k) ss << ";";
        ss << components[k].name() << ":" << weights[k];
      }
      ss << "]";
      break;
    }
  }
  return ss.str();
}

void DistributionSpec::validate() const {
  switch (family) {
    case Family::triangular:
    case Family::thick_z:
      if (n < (family == Family::thick_z ? 2 : 1) || B < 1)
        throw std::invalid_argument("distribution: bad n or B");
      break;
    case Family::powerlaw:
      if (n < 2) throw std::invalid_argument("distribution: powerlaw needs n >= 2");
      break;
    case Family::triangular_g:
      if (n < 1) throw std::invalid_argument("distribution: bad n");
      break;
    case Family::uniform_random:
      if (m < 1 || n < 1) throw std::invalid_argument("distribution: bad m or n");
      break;
    case Family::mixture: {
      if (components.empty() || components.size() != weights.size())
        throw std::invalid_argument(
            "distribution: mixture weights/components mismatch");
      double total = 0.0;
      for (double w : weights) {
        if (w < 0.0)
          throw std::invalid_argument("distribution: negative mixture weight");
        total += w;
      }
      if (total <= 0.0)
        throw std::invalid_argument("distribution: mixture weights sum to 0");
      for (const auto& c : components) c.validate();
      break;
    }
  }
}

std::string DistributionSpec::to_json() const {
  nlohmann::json j;
  spec_to_json(*this, j);
  return j.dump();
}

DistributionSpec DistributionSpec::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("distribution: bad JSON: ") +
                             e.what());
  }
  try {
    return spec_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("distribution: bad JSON shape: ") +
                             e.what());
  }
}

DistributionSpec DistributionSpec::parse(const std::string& text) {
  const size_t open = text.find('(');
  const size_t close = text.rfind(')');
  if (open == std::string::npos || close == std::string::npos || close < open)
    throw std::invalid_argument("distribution: expected family(args): " + text);
  DistributionSpec spec;
  spec.family = family_from_name(text.substr(0, open));
  std::vector<int> args;
  std::stringstream ss(text.substr(open + 1, close - open - 1));
  std::string tok;
  while (std::getline(ss, tok, ','))
    args.push_back(std::stoi(tok));
  switch (spec.family) {
    case Family::triangular:
    case Family::thick_z:
      if (args.size() != 2)
        throw std::invalid_argument("distribution: expected (n,B): " + text);
      spec.n = args[0];
      spec.B = args[1];
      break;
    case Family::powerlaw:
    case Family::triangular_g:
      if (args.size() != 1)
        throw std::invalid_argument("distribution: expected (n): " + text);
      spec.n = args[0];
      break;
    case Family::uniform_random:
      if (args.size() != 2)
        throw std::invalid_argument("distribution: expected (m,n): " + text);
      spec.m = args[0];
      spec.n = args[1];
      break;
    case Family::mixture:
      throw std::invalid_argument(
          "distribution: mixtures are JSON-only, not parseable: " + text);
  }
  spec.validate();
  return spec;
}

AdWordsInstance sample(const DistributionSpec& spec, std::mt19937_64& rng) {
  switch (spec.family) {
    case Family::triangular:
      return triangular(spec.n, spec.B, rng);
    case Family::thick_z:
      return thick_z(spec.n, spec.B, rng);
    case Family::powerlaw:
      return powerlaw(spec.n, rng);
    case Family::triangular_g:
      return triangular_g(spec.n, rng);
    case Family::uniform_random:
      return uniform_random(spec.m, spec.n, rng);
    case Family::mixture: {
      double total = 0.0;
      for (double w : spec.weights) total += w;
      std::uniform_real_distribution<double> u(0.0, total);
      double x = u(rng);
      for (size_t k = 0; k < spec.components.size(); ++k) {
        x -= spec.weights[k];
        if (x < 0.0) return sample(spec.components[k], rng);
      }
      return sample(spec.components.back(), rng);
    }
  }
  throw std::logic_error("distribution: unreachable family");
}

}  // namespace advalloc::dist
