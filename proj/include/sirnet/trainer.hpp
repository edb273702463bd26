#pragma once

#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "sirnet/cluster_registry.hpp"
#include "sirnet/config.hpp"
#include "sirnet/data_synth.hpp"
#include "sirnet/model.hpp"
#include "sirnet/optim.hpp"
#include "sirnet/random.hpp"

namespace sirnet {

struct StepRecord {
  std::size_t step = 0;  // 1-based index of the completed step
  std::size_t epoch = 0;
  double tri = 0.0;
  double sim = 0.0;
  double cls = 0.0;
  double cam = 0.0;
  double aug_pos = 0.0;
  double aug_neg = 0.0;
  double total = 0.0;
  bool operator==(const StepRecord&) const = default;
};

/// CSV header and rows for the loss log. Values are written in shortest
/// round-trip form, so equal logs mean bit-equal losses.
std::string loss_log_header();
std::string loss_log_row(const StepRecord& record);

/// Synthesizes `config.data` or loads `config.data_path`.
Dataset resolve_dataset(const RunConfig& config);

class Trainer {
 public:
  Trainer(RunConfig config, Dataset data);

  /// Restores model, optimizer, registry, step counter and RNG from a
  /// checkpoint written by `save`. The dataset comes from the stored config.
  static Trainer resume(const std::filesystem::path& checkpoint);
  static Trainer resume(const std::filesystem::path& checkpoint, Dataset data);

  StepRecord step();
  /// Runs until `total_steps()`, calling `on_step` after every step.
  void run(const std::function<void(const StepRecord&)>& on_step = {});

  void save(const std::filesystem::path& checkpoint) const;

  const RunConfig& config() const { return config_; }
  const Dataset& data() const { return data_; }
  const SirNet& model() const { return model_; }
  const ClusterRegistry& registry() const { return registry_; }
  const AdamState& optimizer() const { return adam_; }
  std::size_t steps_done() const { return step_; }
  std::size_t total_steps() const { return config_.train.total_steps(); }

 private:
  RunConfig config_;
  Dataset data_;
  SirNet model_;
  std::vector<Tensor> params_;
  AdamState adam_;
  ClusterRegistry registry_;
  TripletSampler sampler_;
  Rng rng_;
  std::size_t step_ = 0;
};

/// Model and config of a checkpoint, for evaluation and export.
struct LoadedModel {
  RunConfig config;
  SirNet model;
};
LoadedModel load_model(const std::filesystem::path& checkpoint);

}  // namespace sirnet
