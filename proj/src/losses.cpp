#include "sirnet/losses.hpp"

#include <string>

#include "sirnet/ops.hpp"

namespace sirnet {
namespace {

void require_rows(const char* what, const Tensor& t, std::size_t rows) {
  if (t.rank() != 2 || t.dim(0) != rows) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(rows) +
                         " rows, got shape " + shape_to_string(t.shape()));
  }
}

}  // namespace

void LossWeights::validate() const {
  const std::pair<const char*, double> fields[] = {
      {"id", id},           {"rec", rec},         {"cls", cls},
      {"tri", tri},         {"sim", sim},         {"aug_pos", aug_pos},
      {"aug_neg", aug_neg}, {"cam", cam},         {"margin", margin}};
  for (const auto& [name, value] : fields) {
    if (!(value >= 0.0)) {
      throw ConfigError(std::string("loss weight ") + name + " must be >= 0, got " +
                        std::to_string(value));
    }
  }
}

void TripletBatch::validate() const {
  const std::size_t n = query_labels.size();
  if (n == 0) throw ContractError("triplet batch is empty");
  if (negative_labels.size() != n) {
    throw ContractError("triplet batch: " + std::to_string(n) + " query labels vs " +
                        std::to_string(negative_labels.size()) + " negative labels");
  }
  for (const auto* e : {&query, &positive, &negative}) {
    require_rows("triplet batch", e->id, n);
    if (e->id.shape() != query.id.shape()) {
      throw DimensionError("triplet batch: embedding shape mismatch " +
                           shape_to_string(query.id.shape()) + " vs " +
                           shape_to_string(e->id.shape()));
    }
  }
  for (std::size_t j = 0; j < n; ++j) {
    if (query_labels[j] == negative_labels[j]) {
      throw ContractError("triplet batch entry " + std::to_string(j) +
                          " has a negative with the query's label");
    }
  }
}

Tensor triplet_loss(const TripletBatch& batch, double margin) {
  batch.validate();
  const auto d_pos = sum_axis(square(sub(batch.query.id, batch.positive.id)), 1);
  const auto d_neg = sum_axis(square(sub(batch.query.id, batch.negative.id)), 1);
  return mean(relu(add_scalar(sub(d_pos, d_neg), margin)));
}

Tensor sim_loss(const Tensor& query_ids, std::span<const std::size_t> labels,
                const ClusterRegistry& registry) {
  if (labels.empty()) throw ContractError("sim_loss: empty batch");
  require_rows("sim_loss", query_ids, labels.size());
  if (registry.empty()) throw ContractError("sim_loss: cluster registry holds no centers");
  if (registry.dim() != query_ids.dim(1)) {
    throw DimensionError("sim_loss: embeddings " + shape_to_string(query_ids.shape()) +
                         " vs centers of dim " + std::to_string(registry.dim()));
  }
  const auto& centers = registry.centers();
  std::vector<double> table;
  table.reserve(centers.size() * registry.dim());
  std::vector<std::size_t> row_of_label;
  std::map<std::size_t, std::size_t> row_index;
  for (const auto& [label, center] : centers) {
    row_index.emplace(label, row_index.size());
    table.insert(table.end(), center.begin(), center.end());
  }
  for (auto label : labels) {
    auto it = row_index.find(label);
    if (it == row_index.end()) {
      throw ContractError("sim_loss: no center for label " + std::to_string(label));
    }
    row_of_label.push_back(it->second);
  }
  const auto center_table = Tensor::matrix(centers.size(), registry.dim(), std::move(table));
  // log-softmax applies the max shift, so large distances cannot underflow.
  const auto log_p = log_softmax(scale(pairwise_sq_dist(query_ids, center_table), -1.0), 1);
  return scale(mean(select_per_row(log_p, row_of_label)), -1.0);
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels) {
  if (labels.empty()) throw ContractError("cross_entropy: empty batch");
  require_rows("cross_entropy", logits, labels.size());
  for (auto label : labels) {
    if (label >= logits.dim(1)) {
      throw ContractError("cross_entropy: label " + std::to_string(label) +
                          " out of range for logits " + shape_to_string(logits.shape()));
    }
  }
  return scale(mean(select_per_row(log_softmax(logits, 1), labels)), -1.0);
}

Tensor mean_abs_error(const Tensor& output, const Tensor& target) {
  if (output.shape() != target.shape()) {
    throw DimensionError("reconstruction: output " + shape_to_string(output.shape()) +
                         " vs target " + shape_to_string(target.shape()));
  }
  return mean(abs(sub(output, target.detach())));
}

Tensor pos_aug_loss(const PositiveAugmentation& images, const Tensor& query_gray,
                    const Tensor& positive_gray) {
  return add(add(mean_abs_error(images.positive_id_query_attr, query_gray),
                 mean_abs_error(images.query_id_positive_attr, positive_gray)),
             mean_abs_error(images.reconstruction, query_gray));
}

Tensor neg_aug_loss(const NegativeAugmentation& taps, const Tensor& query_pseudo_gt,
                    const Tensor& negative_pseudo_gt) {
  return add(mean_abs_error(taps.query_id_negative_attr, query_pseudo_gt),
             mean_abs_error(taps.negative_id_query_attr, negative_pseudo_gt));
}

Tensor total_loss(const LossTerms& terms, const LossWeights& w) {
  const auto identity =
      add(add(scale(terms.cls, w.cls), scale(terms.tri, w.tri)), scale(terms.sim, w.sim));
  const auto reconstruction = add(add(scale(terms.aug_pos, w.aug_pos),
                                      scale(terms.aug_neg, w.aug_neg)),
                                  scale(terms.cam, w.cam));
  return add(scale(identity, w.id), scale(reconstruction, w.rec));
}

}  // namespace sirnet
