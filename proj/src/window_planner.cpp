#include "ctxforge/window_planner.hpp"

#include <algorithm>
#include <string>

namespace ctxforge {

WindowPlan plan_windows(int n_turns, int max_window, int stride) {
  if (n_turns < 1) throw ParameterError("plan_windows: n_turns must be >= 1, got " + std::to_string(n_turns));
  if (max_window < 1) throw ParameterError("plan_windows: max_window must be >= 1");
  if (stride < 1) throw ParameterError("plan_windows: stride must be >= 1");
  if (stride >= max_window) {
    throw ParameterError("plan_windows: stride " + std::to_string(stride) + " >= max_window " +
                         std::to_string(max_window) + " leaves no overlap");
  }

  WindowPlan plan;
  if (n_turns <= max_window) {
    plan.windows.push_back({1, n_turns});
    return plan;
  }
  for (int start = 1;; start += stride) {
    const int untruncated_end = start + max_window - 1;
    plan.windows.push_back({start, std::min(untruncated_end, n_turns)});
    if (untruncated_end >= n_turns) break;
  }
  return plan;
}

}  // namespace ctxforge
