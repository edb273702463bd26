#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "sirnet/tensor.hpp"

namespace sirnet {

struct GradCheckOptions {
  double step = 1e-5;
  double tolerance = 1e-4;
  // 0 checks every coordinate; otherwise a seeded random subset per input.
  std::size_t max_coords_per_input = 0;
  std::uint64_t seed = 0;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double denominator_floor = 1e-6;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t coords_checked = 0;
  // Smallest distance of any piecewise op input to its kink at the base point.
  double min_kink_gap = std::numeric_limits<double>::infinity();
  bool passed = false;
};

using TensorFunction = std::function<Tensor(const std::vector<Tensor>&)>;

/// Compares the tape gradient of a scalar `f` at `inputs` against central
/// differences (f(x+h) - f(x-h)) / 2h, coordinate by coordinate. Inputs must
/// be leaves that require grad; their values are restored afterwards.
GradCheckReport grad_check(const TensorFunction& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options = {});

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                           double step, double tolerance);

}  // namespace sirnet
