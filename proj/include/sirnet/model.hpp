#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sirnet/random.hpp"
#include "sirnet/tensor.hpp"

namespace sirnet {

struct ImageShape {
  std::size_t channels = 1;
  std::size_t height = 16;
  std::size_t width = 8;

  std::size_t numel() const { return channels * height * width; }
  std::size_t spatial() const { return height * width; }
  bool operator==(const ImageShape&) const = default;
};

std::string to_string(const ImageShape& shape);

struct NetworkConfig {
  ImageShape image{1, 16, 8};
  ImageShape features{8, 4, 2};  // backbone output C_b x H_b x W_b
  std::size_t id_dim = 16;
  std::size_t attr_dim = 4;
  std::size_t num_identities = 10;
  double dropout = 0.1;  // on the id-relevant capsule during training
  std::size_t backbone_hidden = 64;
  std::size_t separator_hidden = 64;
  std::size_t generator_hidden = 64;
  std::uint64_t init_seed = 7;

  std::size_t embedding_dim() const { return id_dim + attr_dim; }
  /// Throws ConfigError when an invariant does not hold.
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

/// Batched embeddings: one row per sample. Rows of `id` and `attr` are
/// squash outputs, so every row has norm < 1.
struct DisentangledEmbedding {
  Tensor id;
  Tensor attr;
};

struct GeneratorOutput {
  Tensor feature_tap;  // (B, C_b*H_b*W_b), compared against pseudo ground truth
  Tensor image;        // (B, H*W), single channel in [0, 1]
};

struct NamedParameter {
  std::string name;
  Tensor tensor;
};

/// Fully connected layer y = x W + b with W stored (in x out).
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng);

  Tensor operator()(const Tensor& x) const;
  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  void collect(std::vector<NamedParameter>& out) const;

 private:
  std::string name_;
  Tensor weight_;
  Tensor bias_;
};

/// Spatial global average pooling of channel-major feature rows:
/// (B, C*H*W) -> (B, C).
Tensor global_average_pool(const Tensor& features, const ImageShape& shape);

/// Desk-scale stand-ins for the four networks: backbone, separator,
/// generator (feature tap + image head), CAM head, plus the identity
/// classifier on the separator output. Every branch of a triplet runs
/// through the same parameter tensors.
class SirNet {
 public:
  explicit SirNet(const NetworkConfig& config);

  const NetworkConfig& config() const { return config_; }

  /// (B, C*H*W) images -> (B, C_b*H_b*W_b) non-negative feature maps.
  Tensor backbone(const Tensor& images) const;

  /// Evaluation mode: no dropout, deterministic.
  DisentangledEmbedding separate(const Tensor& features) const;
  /// Training mode: dropout on the id-relevant capsule drawn from `rng`.
  DisentangledEmbedding separate(const Tensor& features, Rng& rng) const;

  GeneratorOutput generate(const Tensor& id, const Tensor& attr) const;

  /// logits = W * GAP(f) + b, shape (B, N_c).
  Tensor cam_logits(const Tensor& features) const;
  /// Class activation map sum_c W[y, c] * f[c, :, :] of one feature map, as an
  /// (H_b, W_b) tensor outside the tape.
  Tensor cam_for_label(std::span<const double> feature_map, std::size_t label) const;

  /// Identity logits from the concatenated [e_I | e_A] embedding, (B, N_c).
  Tensor classify(const Tensor& embedding) const;

  std::vector<NamedParameter> named_parameters() const;
  std::vector<Tensor> parameters() const;

 private:
  DisentangledEmbedding separate_impl(const Tensor& features, Rng* rng) const;

  NetworkConfig config_;
  Dense backbone_fc1_;
  Dense backbone_fc2_;
  Dense separator_fc_;
  Dense separator_id_;
  Dense separator_attr_;
  Dense generator_fc1_;
  Dense generator_fc2_;
  Dense generator_image_;
  Dense cam_fc_;
  Dense classifier_fc_;
};

}  // namespace sirnet
