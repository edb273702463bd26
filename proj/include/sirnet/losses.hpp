#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sirnet/cluster_registry.hpp"
#include "sirnet/model.hpp"
#include "sirnet/tensor.hpp"

namespace sirnet {

/// Weights of the identity and reconstruction objectives plus the triplet
/// margin. Defaults are the published training settings.
struct LossWeights {
  double id = 1.0;
  double rec = 1.0;
  double cls = 0.05;
  double tri = 1.0;
  double sim = 0.5;
  double aug_pos = 0.0001;
  double aug_neg = 0.0001;
  double cam = 1.0;
  double margin = 0.9;

  /// Throws ConfigError if any weight or the margin is negative.
  void validate() const;
  bool operator==(const LossWeights&) const = default;
};

/// N_b triplets, one row per triplet in each embedding. y_q = y_p by
/// construction, so only query and negative labels are stored.
struct TripletBatch {
  DisentangledEmbedding query;
  DisentangledEmbedding positive;
  DisentangledEmbedding negative;
  std::vector<std::size_t> query_labels;
  std::vector<std::size_t> negative_labels;

  std::size_t size() const { return query_labels.size(); }
  /// Throws ContractError on an empty batch, mismatched rows, or y_q == y_n.
  void validate() const;
};

/// Generator images for the positive pair, in the order
/// G(e_I,p, e_A,q), G(e_I,q, e_A,p), G(e_I,q, e_A,q).
struct PositiveAugmentation {
  Tensor positive_id_query_attr;
  Tensor query_id_positive_attr;
  Tensor reconstruction;
};

/// Generator feature taps for the negative pair: G~(e_I,q, e_A,n) and
/// G~(e_I,n, e_A,q) (or e_A,p under the as-printed reading).
struct NegativeAugmentation {
  Tensor query_id_negative_attr;
  Tensor negative_id_query_attr;
};

/// mean_j max(|q_j - p_j|^2 - |q_j - n_j|^2 + margin, 0) on the id-relevant
/// embeddings.
Tensor triplet_loss(const TripletBatch& batch, double margin);

/// Softmax over negative squared distances to every identity center, scored
/// at the query's own center, averaged over the batch. Centers are constants.
Tensor sim_loss(const Tensor& query_ids, std::span<const std::size_t> labels,
                const ClusterRegistry& registry);

/// Mean negative log-softmax probability of the true label.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> labels);
inline Tensor cls_loss(const Tensor& logits, std::span<const std::size_t> labels) {
  return cross_entropy(logits, labels);
}
inline Tensor cam_loss(const Tensor& cam_logits, std::span<const std::size_t> labels) {
  return cross_entropy(cam_logits, labels);
}

/// Mean |output - target| with the target detached.
Tensor mean_abs_error(const Tensor& output, const Tensor& target);

/// Sum of the three L1 means against grayscale targets x_q*, x_p*, x_q*.
Tensor pos_aug_loss(const PositiveAugmentation& images, const Tensor& query_gray,
                    const Tensor& positive_gray);

/// Sum of the two L1 means of the feature taps against the pseudo ground
/// truths x~_n^q and x~_q^n.
Tensor neg_aug_loss(const NegativeAugmentation& taps, const Tensor& query_pseudo_gt,
                    const Tensor& negative_pseudo_gt);

struct LossTerms {
  Tensor tri;
  Tensor sim;
  Tensor cls;
  Tensor cam;
  Tensor aug_pos;
  Tensor aug_neg;
};

/// id * (cls*L_cls + tri*L_tri + sim*L_sim)
///   + rec * (aug_pos*L_aug_p + aug_neg*L_aug_n + cam*L_cam)
Tensor total_loss(const LossTerms& terms, const LossWeights& weights);

}  // namespace sirnet
