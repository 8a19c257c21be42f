#pragma once

#include <stdexcept>
#include <vector>

#include "ctxforge/core_model.hpp"

namespace ctxforge {

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct WindowPlan {
  std::vector<TurnWindow> windows;

  friend bool operator==(const WindowPlan&, const WindowPlan&) = default;
};

inline constexpr int kDefaultMaxWindow = 5;
inline constexpr int kDefaultStride = 2;

/// Overlapping query windows over turns 1..n_turns. Window i starts at
/// 1 + i*stride and spans up to max_window turns; planning stops at the first
/// window whose untruncated end reaches n_turns. A dialogue that fits one
/// window gets (1, n_turns).
///
/// Throws ParameterError for n_turns < 1, max_window < 1, stride < 1 or
/// stride >= max_window (consecutive windows would not overlap).
WindowPlan plan_windows(int n_turns, int max_window = kDefaultMaxWindow, int stride = kDefaultStride);

}  // namespace ctxforge
