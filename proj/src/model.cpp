#include "sirnet/model.hpp"

#include <cmath>
#include <sstream>

#include "sirnet/ops.hpp"

namespace sirnet {

std::string to_string(const ImageShape& shape) {
  std::ostringstream out;
  out << shape.channels << 'x' << shape.height << 'x' << shape.width;
  return out.str();
}

void NetworkConfig::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError("network config: " + what); };
  if (image.numel() == 0) fail("image shape must be non-empty");
  if (features.numel() == 0) fail("feature shape must be non-empty");
  if (image.height % features.height != 0 || image.width % features.width != 0) {
    fail("backbone spatial dims " + to_string(features) + " must divide image dims " +
         to_string(image));
  }
  if (id_dim < 1) fail("id_dim must be >= 1");
  if (attr_dim < 1) fail("attr_dim must be >= 1");
  if (num_identities < 2) fail("num_identities must be >= 2");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must lie in [0, 1)");
  if (backbone_hidden == 0 || separator_hidden == 0 || generator_hidden == 0) {
    fail("hidden widths must be positive");
  }
}

Dense::Dense(std::string name, std::size_t in, std::size_t out, Rng& rng)
    : name_(std::move(name)) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = uniform(rng, -bound, bound);
  weight_ = Tensor::matrix(in, out, std::move(w), true);
  bias_ = Tensor::zeros(Shape{out}, true);
}

Tensor Dense::operator()(const Tensor& x) const { return add(matmul(x, weight_), bias_); }

void Dense::collect(std::vector<NamedParameter>& out) const {
  out.push_back({name_ + ".weight", weight_});
  out.push_back({name_ + ".bias", bias_});
}

Tensor global_average_pool(const Tensor& features, const ImageShape& shape) {
  if (features.rank() != 2 || features.dim(1) != shape.numel()) {
    throw DimensionError("global_average_pool: features " + shape_to_string(features.shape()) +
                         " do not match map shape " + to_string(shape));
  }
  const std::size_t cells = shape.spatial();
  std::vector<double> pool(shape.numel() * shape.channels, 0.0);
  for (std::size_t c = 0; c < shape.channels; ++c) {
    for (std::size_t s = 0; s < cells; ++s) {
      pool[(c * cells + s) * shape.channels + c] = 1.0 / static_cast<double>(cells);
    }
  }
  return matmul(features, Tensor::matrix(shape.numel(), shape.channels, std::move(pool)));
}

SirNet::SirNet(const NetworkConfig& config) : config_(config) {
  config_.validate();
  Rng rng(config_.init_seed);
  const auto f = config_.features.numel();
  const auto d = config_.embedding_dim();
  backbone_fc1_ = Dense("backbone.fc1", config_.image.numel(), config_.backbone_hidden, rng);
  backbone_fc2_ = Dense("backbone.fc2", config_.backbone_hidden, f, rng);
  separator_fc_ = Dense("separator.fc", f, config_.separator_hidden, rng);
  separator_id_ = Dense("separator.id_head", config_.separator_hidden, config_.id_dim, rng);
  separator_attr_ = Dense("separator.attr_head", config_.separator_hidden, config_.attr_dim, rng);
  generator_fc1_ = Dense("generator.fc1", d, config_.generator_hidden, rng);
  generator_fc2_ = Dense("generator.feature_tap", config_.generator_hidden, f, rng);
  generator_image_ = Dense("generator.image", f, config_.image.spatial(), rng);
  cam_fc_ = Dense("cam_head.fc", config_.features.channels, config_.num_identities, rng);
  classifier_fc_ = Dense("classifier.fc", d, config_.num_identities, rng);
}

Tensor SirNet::backbone(const Tensor& images) const {
  if (images.rank() != 2 || images.dim(1) != config_.image.numel()) {
    throw DimensionError("backbone: images " + shape_to_string(images.shape()) +
                         " do not match configured image " + to_string(config_.image));
  }
  return relu(backbone_fc2_(relu(backbone_fc1_(images))));
}

DisentangledEmbedding SirNet::separate(const Tensor& features) const {
  return separate_impl(features, nullptr);
}

DisentangledEmbedding SirNet::separate(const Tensor& features, Rng& rng) const {
  return separate_impl(features, &rng);
}

DisentangledEmbedding SirNet::separate_impl(const Tensor& features, Rng* rng) const {
  if (features.rank() != 2 || features.dim(1) != config_.features.numel()) {
    throw DimensionError("separator: features " + shape_to_string(features.shape()) +
                         " do not match backbone shape " + to_string(config_.features));
  }
  const auto hidden = relu(separator_fc_(features));
  auto id_pre = separator_id_(hidden);
  if (rng != nullptr && config_.dropout > 0.0) {
    // Inverted dropout ahead of the squash keeps the output norm below 1.
    const double keep = 1.0 - config_.dropout;
    std::vector<double> mask(id_pre.numel());
    for (auto& m : mask) m = bernoulli(*rng, keep) ? 1.0 / keep : 0.0;
    id_pre = mask_mul(id_pre, mask);
  }
  return {squash(id_pre), squash(separator_attr_(hidden))};
}

GeneratorOutput SirNet::generate(const Tensor& id, const Tensor& attr) const {
  if (id.rank() != 2 || attr.rank() != 2 || id.dim(1) != config_.id_dim ||
      attr.dim(1) != config_.attr_dim || id.dim(0) != attr.dim(0)) {
    throw DimensionError("generator: inputs " + shape_to_string(id.shape()) + " and " +
                         shape_to_string(attr.shape()) + " do not match (B, " +
                         std::to_string(config_.id_dim) + ") and (B, " +
                         std::to_string(config_.attr_dim) + ")");
  }
  const auto hidden = relu(generator_fc1_(concat({id, attr}, 1)));
  auto tap = relu(generator_fc2_(hidden));
  auto image = sigmoid(generator_image_(tap));
  return {std::move(tap), std::move(image)};
}

Tensor SirNet::cam_logits(const Tensor& features) const {
  return cam_fc_(global_average_pool(features, config_.features));
}

Tensor SirNet::cam_for_label(std::span<const double> feature_map, std::size_t label) const {
  const auto& fs = config_.features;
  if (feature_map.size() != fs.numel()) {
    throw DimensionError("cam_for_label: feature map of " + std::to_string(feature_map.size()) +
                         " values does not match backbone shape " + to_string(fs));
  }
  if (label >= config_.num_identities) {
    throw ContractError("cam_for_label: label " + std::to_string(label) + " out of range [0, " +
                        std::to_string(config_.num_identities) + ")");
  }
  const auto w = cam_fc_.weight().data();
  const std::size_t cells = fs.spatial();
  std::vector<double> cam(cells, 0.0);
  for (std::size_t c = 0; c < fs.channels; ++c) {
    const double weight = w[c * config_.num_identities + label];
    for (std::size_t s = 0; s < cells; ++s) cam[s] += weight * feature_map[c * cells + s];
  }
  return Tensor::matrix(fs.height, fs.width, std::move(cam));
}

Tensor SirNet::classify(const Tensor& embedding) const {
  if (embedding.rank() != 2 || embedding.dim(1) != config_.embedding_dim()) {
    throw DimensionError("classifier: embedding " + shape_to_string(embedding.shape()) +
                         " does not match (B, " + std::to_string(config_.embedding_dim()) + ")");
  }
  return classifier_fc_(embedding);
}

std::vector<NamedParameter> SirNet::named_parameters() const {
  std::vector<NamedParameter> out;
  for (const Dense* layer :
       {&backbone_fc1_, &backbone_fc2_, &separator_fc_, &separator_id_, &separator_attr_,
        &generator_fc1_, &generator_fc2_, &generator_image_, &cam_fc_, &classifier_fc_}) {
    layer->collect(out);
  }
  return out;
}

std::vector<Tensor> SirNet::parameters() const {
  std::vector<Tensor> out;
  for (auto& p : named_parameters()) out.push_back(p.tensor);
  return out;
}

}  // namespace sirnet
