#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sirnet/tensor.hpp"

namespace sirnet {

struct AdamSettings {
  double learning_rate = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  bool operator==(const AdamSettings&) const = default;
};

/// Moment buffers are allocated lazily on the first step, one pair per
/// parameter in the order the parameters are passed.
struct AdamState {
  AdamSettings settings;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
};

/// One bias-corrected Adam update over `params`, then zeroes their grads.
/// Throws ContractError if a parameter has no populated gradient or the state
/// was built for a different parameter list.
void adam_step(std::span<Tensor> params, AdamState& state);

}  // namespace sirnet
