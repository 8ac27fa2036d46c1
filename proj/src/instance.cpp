#include "advalloc/instance.hpp"

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace advalloc {

void AdWordsInstance::validate() const {
  if (m < 1 || n < 1)
    throw std::invalid_argument("instance: m and n must be >= 1");
  if (bids.size() != static_cast<size_t>(m) * n)
    throw std::invalid_argument("instance: bids must have m*n entries");
  if (budgets.size() != static_cast<size_t>(n))
    throw std::invalid_argument("instance: budgets must have n entries");
  for (double v : bids)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("instance: bids must lie in [0,1]");
  for (double b : budgets)
    if (!(b > 0.0))
      throw std::invalid_argument("instance: budgets must be positive");
}

std::string AdWordsInstance::to_json() const {
  nlohmann::json j;
  j["m"] = m;
  j["n"] = n;
  nlohmann::json rows = nlohmann::json::array();
  for (int r = 0; r < m; ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (int i = 0; i < n; ++i) row.push_back(bid(r, i));
    rows.push_back(std::move(row));
  }
  j["bids"] = std::move(rows);
  j["budgets"] = budgets;
  return j.dump();
}

AdWordsInstance AdWordsInstance::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("instance: bad JSON: ") + e.what());
  }
  AdWordsInstance inst;
  try {
    inst.m = j.at("m").get<int>();
    inst.n = j.at("n").get<int>();
    inst.budgets = j.at("budgets").get<std::vector<double>>();
    const auto& rows = j.at("bids");
    if (!rows.is_array() || static_cast<int>(rows.size()) != inst.m)
      throw std::runtime_error("instance: bids must have m rows");
    inst.bids.reserve(static_cast<size_t>(inst.m) * inst.n);
    for (const auto& row : rows) {
      if (!row.is_array() || static_cast<int>(row.size()) != inst.n)
        throw std::runtime_error("instance: each bid row must have n entries");
      for (const auto& v : row) inst.bids.push_back(v.get<double>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("instance: bad JSON shape: ") +
                             e.what());
  }
  inst.validate();
  return inst;
}

void AdWordsInstance::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("instance: cannot open " + path);
  out << to_json() << "\n";
}

AdWordsInstance AdWordsInstance::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("instance: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace advalloc
