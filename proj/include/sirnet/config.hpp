#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sirnet/cam_augment.hpp"
#include "sirnet/data_synth.hpp"
#include "sirnet/kv_io.hpp"
#include "sirnet/losses.hpp"
#include "sirnet/model.hpp"
#include "sirnet/optim.hpp"

namespace sirnet {

struct TrainSettings {
  std::size_t batch_size = 8;
  std::size_t epochs = 100;
  std::size_t steps_per_epoch = 20;  // an "epoch" is this many triplet batches
  std::size_t refresh_period = 1;    // epochs between cluster center refreshes
  std::size_t checkpoint_every = 0;  // steps; 0 writes only the final checkpoint
  double grayscale_prob = 0.1;
  std::uint64_t seed = 1;
  NegativeAttrSource negative_attr = NegativeAttrSource::query;

  std::size_t total_steps() const { return epochs * steps_per_epoch; }
  bool operator==(const TrainSettings&) const = default;
};

struct EvalSettings {
  double alpha = 0.55;
  bool flip = true;
  bool operator==(const EvalSettings&) const = default;
};

/// Everything a run needs. Defaults reproduce the published settings where
/// they exist and the desk-scale choices elsewhere. The dataset image shape
/// always follows `network.image`.
struct RunConfig {
  NetworkConfig network;
  LossWeights loss;
  AdamSettings optim;
  TrainSettings train;
  EvalSettings eval;
  DatasetManifest data;
  std::string data_path;  // empty: synthesize from `data`
  std::string output_dir = "run";

  /// Throws ConfigError on any violated invariant.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

/// Flat `section.key=value` form. Unknown keys are ConfigErrors; keys not
/// mentioned keep their defaults.
RunConfig parse_config(const KeyValueFile& file);
RunConfig load_config(const std::filesystem::path& path);
KeyValueFile serialize_config(const RunConfig& config);

/// Every recognised key, in serialization order.
std::vector<std::string> config_keys();

}  // namespace sirnet
