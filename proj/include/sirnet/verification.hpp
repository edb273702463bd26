#pragma once

#include <functional>
#include <string>
#include <vector>

#include "sirnet/gradcheck.hpp"
#include "sirnet/model.hpp"
#include "sirnet/random.hpp"

namespace sirnet {

/// Random inputs for one loss kernel plus the scalar function to check.
/// `inputs` are leaves requiring grad; some may be parameters of a network
/// the function closes over.
struct ProbeInstance {
  std::vector<Tensor> inputs;
  TensorFunction loss;
};

struct LossProbe {
  std::string name;
  std::function<ProbeInstance(Rng&)> setup;
};

/// One probe per training loss: tri, sim, cls, cam, aug_pos, aug_neg. Each
/// differentiates through the network stage that feeds the loss.
std::vector<LossProbe> loss_probes(const NetworkConfig& network = {});

struct GradCheckSuiteOptions {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
  double step = 1e-5;
  std::size_t max_coords_per_input = 64;
  // Instances with a piecewise op within kink_margin * step of its kink are
  // redrawn, at most max_draws times per probe.
  double kink_margin = 10.0;
  std::size_t max_draws = 100;
};

struct ProbeResult {
  std::string name;
  GradCheckReport report;
  std::size_t draws = 0;
  bool away_from_kinks = false;
  bool passed() const { return away_from_kinks && report.passed; }
};

std::vector<ProbeResult> run_gradcheck_suite(const GradCheckSuiteOptions& options,
                                             const std::vector<LossProbe>& probes);
inline std::vector<ProbeResult> run_gradcheck_suite(const GradCheckSuiteOptions& options = {}) {
  return run_gradcheck_suite(options, loss_probes());
}

}  // namespace sirnet
