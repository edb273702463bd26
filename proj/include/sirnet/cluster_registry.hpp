#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "sirnet/tensor.hpp"

namespace sirnet {

class SirNet;
struct Dataset;

using CenterMap = std::map<std::size_t, std::vector<double>>;

/// Mean of each label's rows of `embeddings` (N x d).
CenterMap compute_centers(const Tensor& embeddings, std::span<const std::size_t> labels);

/// Mean Euclidean distance of each eval-mode id-relevant embedding of
/// `indices` to the mean of its identity's embeddings over `indices`.
double mean_center_distance(const SirNet& model, const Dataset& data,
                            std::span<const std::size_t> indices);

/// Per-identity centers of the id-relevant embedding over the training set,
/// recomputed offline on a fixed epoch schedule. Losses read the centers as
/// constants.
class ClusterRegistry {
 public:
  explicit ClusterRegistry(std::size_t refresh_period_epochs = 1);

  bool empty() const { return centers_.empty(); }
  std::size_t size() const { return centers_.size(); }
  std::size_t refresh_period() const { return refresh_period_; }
  std::size_t last_refresh_epoch() const { return last_refresh_epoch_; }
  std::size_t dim() const;

  /// True iff the registry is empty or `epoch - last_refresh >= period`.
  bool should_refresh(std::size_t epoch) const;

  /// Recomputes every center from the model in eval mode over `indices` of
  /// `data`. Throws ConfigError if any identity in [0, num_identities) has
  /// no sample.
  void refresh(const SirNet& model, const Dataset& data, std::span<const std::size_t> indices,
               std::size_t epoch);

  void assign(CenterMap centers, std::size_t epoch);

  bool contains(std::size_t label) const { return centers_.count(label) != 0; }
  /// Throws ContractError for an unknown label.
  const std::vector<double>& center(std::size_t label) const;
  const CenterMap& centers() const { return centers_; }

 private:
  std::size_t refresh_period_;
  std::size_t last_refresh_epoch_ = 0;
  CenterMap centers_;
};

}  // namespace sirnet
