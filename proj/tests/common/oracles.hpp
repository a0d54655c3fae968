#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace mmal::oracle {

/// Vote count first; among tied classes the most confident supporter wins;
/// equal confidence falls back to the smaller class index.
inline std::size_t majority_vote(const std::vector<std::size_t>& votes, const std::vector<double>& confidence,
                                 std::size_t classes = 3) {
  std::vector<std::size_t> count(classes, 0);
  for (auto v : votes) ++count[v];
  std::size_t top = 0;
  for (auto c : count) top = c > top ? c : top;
  std::vector<double> best(classes, -1.0);
  std::size_t tied = 0;
  for (std::size_t k = 0; k < classes; ++k) tied += count[k] == top;
  for (std::size_t m = 0; m < votes.size(); ++m)
    if (count[votes[m]] == top && confidence[m] > best[votes[m]]) best[votes[m]] = confidence[m];
  if (tied == 1)
    for (std::size_t k = 0; k < classes; ++k)
      if (count[k] == top) return k;
  std::size_t winner = classes;
  for (std::size_t k = 0; k < classes; ++k) {
    if (count[k] != top) continue;
    if (winner == classes || best[k] > best[winner]) winner = k;
  }
  return winner;
}

/// Query cost when asking; otherwise +1 for a correct and -1 for a wrong prediction.
inline double reward(bool ask, std::size_t predicted, std::size_t truth) {
  if (ask) return -0.05;
  return predicted == truth ? 1.0 : -1.0;
}

}  // namespace mmal::oracle
