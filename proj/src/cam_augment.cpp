#include "sirnet/cam_augment.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "sirnet/kv_io.hpp"
#include "sirnet/ops.hpp"

namespace sirnet {

CamArtifacts build_cam_artifacts(const Tensor& cam) {
  if (cam.rank() != 2 || cam.numel() == 0) {
    throw DimensionError("class activation map must be a non-empty (H, W) grid, got " +
                         shape_to_string(cam.shape()));
  }
  CamArtifacts art;
  art.cam = cam.detach();
  const auto values = cam.data();
  double total = 0.0;
  for (double v : values) total += v;
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  // rounding can push the mean of a near-constant map past its extremes
  art.threshold = std::clamp(total / static_cast<double>(values.size()), *lo, *hi);
  art.id_mask.resize(values.size());
  art.attr_mask.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const bool relevant = values[i] >= art.threshold;
    art.id_mask[i] = relevant ? 1 : 0;
    art.attr_mask[i] = relevant ? 0 : 1;
  }
  return art;
}

CamArtifacts build_cam_artifacts(std::span<const double> feature_map, std::size_t label,
                                 const SirNet& model) {
  return build_cam_artifacts(model.cam_for_label(feature_map, label));
}

PseudoGroundTruth build_pseudo_gt(std::span<const double> query_features,
                                  std::span<const double> negative_features,
                                  const CamArtifacts& query, const CamArtifacts& negative,
                                  const ImageShape& feature_shape) {
  const auto cells = feature_shape.spatial();
  if (query_features.size() != feature_shape.numel() ||
      negative_features.size() != feature_shape.numel()) {
    throw DimensionError("pseudo ground truth: feature maps of " +
                         std::to_string(query_features.size()) + " and " +
                         std::to_string(negative_features.size()) + " values vs shape " +
                         to_string(feature_shape));
  }
  if (query.id_mask.size() != cells || negative.id_mask.size() != cells ||
      query.attr_mask.size() != cells || negative.attr_mask.size() != cells) {
    throw DimensionError("pseudo ground truth: mask sizes do not match the " +
                         std::to_string(feature_shape.height) + "x" +
                         std::to_string(feature_shape.width) + " grid");
  }
  PseudoGroundTruth out;
  out.shared_attr_mask.resize(cells);
  for (std::size_t s = 0; s < cells; ++s) {
    out.shared_attr_mask[s] = query.attr_mask[s] & negative.attr_mask[s];
  }
  out.query_target.resize(feature_shape.numel());
  out.negative_target.resize(feature_shape.numel());
  for (std::size_t c = 0; c < feature_shape.channels; ++c) {
    for (std::size_t s = 0; s < cells; ++s) {
      const auto i = c * cells + s;
      const double shared = out.shared_attr_mask[s];
      out.query_target[i] = query.id_mask[s] * query_features[i] + shared * negative_features[i];
      out.negative_target[i] = negative.id_mask[s] * negative_features[i] + shared * query_features[i];
    }
  }
  return out;
}

PositiveAugmentation augment_positive(const DisentangledEmbedding& query,
                                      const DisentangledEmbedding& positive, const SirNet& model) {
  const std::size_t n = query.id.dim(0);
  const auto out = model.generate(concat({positive.id, query.id, query.id}, 0),
                                  concat({query.attr, positive.attr, query.attr}, 0));
  return {slice(out.image, 0, 0, n), slice(out.image, 0, n, 2 * n),
          slice(out.image, 0, 2 * n, 3 * n)};
}

NegativeAugmentation augment_negative(const DisentangledEmbedding& query,
                                      const DisentangledEmbedding& positive,
                                      const DisentangledEmbedding& negative, const SirNet& model,
                                      NegativeAttrSource source) {
  const std::size_t n = query.id.dim(0);
  const auto& second_attr = source == NegativeAttrSource::query ? query.attr : positive.attr;
  const auto out = model.generate(concat({query.id, negative.id}, 0),
                                  concat({negative.attr, second_attr}, 0));
  return {slice(out.feature_tap, 0, 0, n), slice(out.feature_tap, 0, n, 2 * n)};
}

namespace {

template <class T>
void write_grid(const std::filesystem::path& path, std::span<const T> values, std::size_t rows,
                std::size_t cols) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (c > 0) out << ',';
      out << format_double(static_cast<double>(values[r * cols + c]));
    }
    out << '\n';
  }
}

}  // namespace

void dump_cam_debug(const std::filesystem::path& dir, const CamArtifacts& query,
                    const CamArtifacts& negative, const PseudoGroundTruth& pseudo,
                    const ImageShape& feature_shape) {
  std::filesystem::create_directories(dir);
  const auto h = feature_shape.height;
  const auto w = feature_shape.width;
  write_grid<double>(dir / "cam_query.csv", query.cam.data(), h, w);
  write_grid<double>(dir / "cam_negative.csv", negative.cam.data(), h, w);
  write_grid<std::uint8_t>(dir / "mask_id_query.csv", query.id_mask, h, w);
  write_grid<std::uint8_t>(dir / "mask_attr_query.csv", query.attr_mask, h, w);
  write_grid<std::uint8_t>(dir / "mask_id_negative.csv", negative.id_mask, h, w);
  write_grid<std::uint8_t>(dir / "mask_attr_negative.csv", negative.attr_mask, h, w);
  const auto cells = feature_shape.spatial();
  for (std::size_t c = 0; c < feature_shape.channels; ++c) {
    const auto suffix = "_c" + std::to_string(c) + ".csv";
    write_grid<double>(dir / ("pseudo_gt_query" + suffix),
                       std::span<const double>(pseudo.query_target).subspan(c * cells, cells), h, w);
    write_grid<double>(dir / ("pseudo_gt_negative" + suffix),
                       std::span<const double>(pseudo.negative_target).subspan(c * cells, cells),
                       h, w);
  }
}

}  // namespace sirnet
