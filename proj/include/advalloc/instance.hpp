#pragma once
// AdWords problem instance: m ad slots arriving online, n advertisers with
// daily budgets, bid matrix in [0,1].

#include <string>
#include <vector>

namespace advalloc {

struct AdWordsInstance {
  int m = 0;                    // ad slots (arrival order = row order)
  int n = 0;                    // advertisers
  std::vector<double> bids;     // m*n row-major; bids[j*n+i] = advertiser i's
                                // bid on slot j, in [0,1]
  std::vector<double> budgets;  // n positive floats

  double bid(int j, int i) const { return bids[static_cast<size_t>(j) * n + i]; }
  double& bid(int j, int i) { return bids[static_cast<size_t>(j) * n + i]; }

  // Throws std::invalid_argument describing the first violated invariant.
  void validate() const;

  std::string to_json() const;
  static AdWordsInstance from_json(const std::string& text);
  void save(const std::string& path) const;
  static AdWordsInstance load(const std::string& path);
};

}  // namespace advalloc
