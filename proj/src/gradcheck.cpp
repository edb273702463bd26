#include "sirnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace sirnet {

GradCheckReport grad_check(const TensorFunction& f, std::vector<Tensor> inputs,
                           const GradCheckOptions& options) {
  if (options.step <= 0.0) throw ContractError("grad_check: step must be positive");
  for (const auto& x : inputs) {
    if (!x.is_leaf() || !x.requires_grad()) {
      throw ContractError("grad_check: inputs must be leaves that require grad");
    }
  }
  for (auto& x : inputs) x.clear_grad();

  GradCheckReport report;
  const Tensor loss = f(inputs);
  if (loss.numel() != 1) {
    throw ContractError("grad_check: function must be scalar-valued, got shape " +
                        shape_to_string(loss.shape()));
  }
  std::vector<std::vector<double>> analytic;
  if (loss.requires_grad()) {
    auto tape = Tape::record(loss);
    report.min_kink_gap = tape.min_kink_gap();
    tape.backward();
  }
  for (auto& x : inputs) {
    if (x.has_grad()) {
      analytic.emplace_back(x.grad().begin(), x.grad().end());
    } else {
      analytic.emplace_back(x.numel(), 0.0);
    }
    x.clear_grad();
  }

  std::mt19937_64 rng(options.seed);
  const auto eval = [&] {
    NoGradGuard no_grad;
    return f(inputs).item();
  };
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto values = inputs[t].mutable_data();
    std::vector<std::size_t> coords(values.size());
    std::iota(coords.begin(), coords.end(), 0);
    if (options.max_coords_per_input > 0 && coords.size() > options.max_coords_per_input) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_input);
      std::sort(coords.begin(), coords.end());
    }
    for (auto c : coords) {
      const double original = values[c];
      values[c] = original + options.step;
      const double up = eval();
      values[c] = original - options.step;
      const double down = eval();
      values[c] = original;
      const double numeric = (up - down) / (2.0 * options.step);
      const double a = analytic[t][c];
      const double abs_err = std::abs(a - numeric);
      const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      report.max_rel_error = std::max(report.max_rel_error, abs_err / denom);
      ++report.coords_checked;
    }
  }
  for (auto& x : inputs) x.clear_grad();
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error <= options.tolerance;
  return report;
}

GradCheckReport grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x,
                           double step, double tolerance) {
  GradCheckOptions options;
  options.step = step;
  options.tolerance = tolerance;
  return grad_check([&f](const std::vector<Tensor>& in) { return f(in[0]); }, {std::move(x)},
                    options);
}

}  // namespace sirnet
