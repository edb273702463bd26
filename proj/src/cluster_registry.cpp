#include "sirnet/cluster_registry.hpp"

#include <cmath>
#include <string>

#include "sirnet/data_synth.hpp"
#include "sirnet/model.hpp"

namespace sirnet {

CenterMap compute_centers(const Tensor& embeddings, std::span<const std::size_t> labels) {
  if (embeddings.rank() != 2 || embeddings.dim(0) != labels.size()) {
    throw DimensionError("compute_centers: embeddings " + shape_to_string(embeddings.shape()) +
                         " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t d = embeddings.dim(1);
  const auto x = embeddings.data();
  CenterMap sums;
  std::map<std::size_t, std::size_t> counts;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& s = sums[labels[i]];
    s.resize(d, 0.0);
    for (std::size_t k = 0; k < d; ++k) s[k] += x[i * d + k];
    ++counts[labels[i]];
  }
  for (auto& [label, s] : sums) {
    for (auto& v : s) v /= static_cast<double>(counts[label]);
  }
  return sums;
}

ClusterRegistry::ClusterRegistry(std::size_t refresh_period_epochs)
    : refresh_period_(refresh_period_epochs) {
  if (refresh_period_ < 1) throw ConfigError("cluster registry: refresh period must be >= 1 epoch");
}

std::size_t ClusterRegistry::dim() const {
  return centers_.empty() ? 0 : centers_.begin()->second.size();
}

bool ClusterRegistry::should_refresh(std::size_t epoch) const {
  if (centers_.empty()) return true;
  return epoch >= last_refresh_epoch_ && epoch - last_refresh_epoch_ >= refresh_period_;
}

void ClusterRegistry::refresh(const SirNet& model, const Dataset& data,
                              std::span<const std::size_t> indices, std::size_t epoch) {
  const auto labels = data.labels_of(indices);
  const auto num_ids = model.config().num_identities;
  std::vector<bool> seen(num_ids, false);
  for (auto label : labels) {
    if (label >= num_ids) {
      throw ConfigError("cluster registry: label " + std::to_string(label) +
                        " exceeds the model's " + std::to_string(num_ids) + " identities");
    }
    seen[label] = true;
  }
  for (std::size_t id = 0; id < num_ids; ++id) {
    if (!seen[id]) {
      throw ConfigError("cluster registry: identity " + std::to_string(id) +
                        " has no training samples");
    }
  }
  NoGradGuard no_grad;
  const auto embedding = model.separate(model.backbone(data.batch(indices)));
  assign(compute_centers(embedding.id.detach(), labels), epoch);
}

double mean_center_distance(const SirNet& model, const Dataset& data,
                            std::span<const std::size_t> indices) {
  if (indices.empty()) throw ContractError("mean_center_distance: no samples");
  const auto labels = data.labels_of(indices);
  NoGradGuard no_grad;
  const auto ids = model.separate(model.backbone(data.batch(indices))).id;
  const auto centers = compute_centers(ids, labels);
  const auto d = ids.dim(1);
  double total = 0.0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const auto& c = centers.at(labels[r]);
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
      const double diff = ids.data()[r * d + k] - c[k];
      acc += diff * diff;
    }
    total += std::sqrt(acc);
  }
  return total / static_cast<double>(labels.size());
}

void ClusterRegistry::assign(CenterMap centers, std::size_t epoch) {
  std::size_t d = 0;
  for (const auto& [label, c] : centers) {
    if (d == 0) d = c.size();
    if (c.size() != d || d == 0) throw DimensionError("cluster registry: inconsistent center dims");
  }
  centers_ = std::move(centers);
  last_refresh_epoch_ = epoch;
}

const std::vector<double>& ClusterRegistry::center(std::size_t label) const {
  auto it = centers_.find(label);
  if (it == centers_.end()) {
    throw ContractError("cluster registry: no center for identity " + std::to_string(label));
  }
  return it->second;
}

}  // namespace sirnet
