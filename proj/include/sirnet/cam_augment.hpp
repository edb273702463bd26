#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sirnet/losses.hpp"
#include "sirnet/model.hpp"

namespace sirnet {

using Mask = std::vector<std::uint8_t>;

/// Class activation map of one sample with its threshold and the two
/// indicator masks. The masks partition the grid: a cell whose activation
/// equals the threshold belongs to `id_mask`.
struct CamArtifacts {
  Tensor cam;  // (H_b, W_b)
  double threshold = 0.0;
  Mask id_mask;
  Mask attr_mask;
};

CamArtifacts build_cam_artifacts(const Tensor& cam);
CamArtifacts build_cam_artifacts(std::span<const double> feature_map, std::size_t label,
                                 const SirNet& model);

/// Re-entangled targets for one (query, negative) pair, channel-major like
/// the backbone features:
///   query_target    = m_I^q * f_q + (m_A^q & m_A^n) * f_n
///   negative_target = m_I^n * f_n + (m_A^n & m_A^q) * f_q
struct PseudoGroundTruth {
  std::vector<double> query_target;
  std::vector<double> negative_target;
  Mask shared_attr_mask;  // m_A^q & m_A^n
};

PseudoGroundTruth build_pseudo_gt(std::span<const double> query_features,
                                  std::span<const double> negative_features,
                                  const CamArtifacts& query, const CamArtifacts& negative,
                                  const ImageShape& feature_shape);

/// Generator images for {e_I,p, e_A,q}, {e_I,q, e_A,p}, {e_I,q, e_A,q}.
PositiveAugmentation augment_positive(const DisentangledEmbedding& query,
                                      const DisentangledEmbedding& positive, const SirNet& model);

/// Which id-irrelevant embedding feeds the second negative augmentation.
enum class NegativeAttrSource {
  query,     // G~(e_I,n, e_A,q): mirrors the pseudo ground truth construction
  positive,  // G~(e_I,n, e_A,p): the loss as typeset
};

/// Feature taps for G~(e_I,q, e_A,n) and G~(e_I,n, e_A,q|p).
NegativeAugmentation augment_negative(const DisentangledEmbedding& query,
                                      const DisentangledEmbedding& positive,
                                      const DisentangledEmbedding& negative, const SirNet& model,
                                      NegativeAttrSource source = NegativeAttrSource::query);

/// Writes one CSV grid per panel (cams, masks, pseudo ground truth per
/// channel) into `dir` for visual inspection.
void dump_cam_debug(const std::filesystem::path& dir, const CamArtifacts& query,
                    const CamArtifacts& negative, const PseudoGroundTruth& pseudo,
                    const ImageShape& feature_shape);

}  // namespace sirnet
