#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sirnet/model.hpp"
#include "sirnet/random.hpp"
#include "sirnet/tensor.hpp"

namespace sirnet {

/// Parameters of a synthetic long-term re-identification set. Each identity
/// owns a fixed "face" signature in the top quarter of the image; the rest
/// of the image is an appearance (clothes/background) drawn per sample from
/// a pool of prototypes shared by all identities.
struct DatasetManifest {
  std::size_t num_identities = 10;
  std::size_t samples_per_identity = 20;
  std::size_t query_per_identity = 2;
  std::size_t gallery_per_identity = 6;
  ImageShape image{1, 16, 8};
  std::size_t appearance_prototypes = 8;
  double signature_contrast = 0.3;  // half-range of face pixels around 0.5
  double appearance_jitter = 0.1;
  std::uint64_t seed = 1;

  std::size_t train_per_identity() const {
    return samples_per_identity - query_per_identity - gallery_per_identity;
  }
  /// Throws ConfigError when the split cannot be honored.
  void validate() const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Per-identity generation record.
struct SyntheticPerson {
  std::size_t identity = 0;
  std::vector<double> signature;            // face-band pixels, channel-major
  std::vector<std::size_t> appearance_ids;  // prototype used by each sample
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<double> pixels;  // size() rows of image.numel() values
  std::vector<std::size_t> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> query;
  std::vector<std::size_t> gallery;
  std::vector<SyntheticPerson> people;

  const ImageShape& image_shape() const { return manifest.image; }
  std::size_t size() const { return labels.size(); }
  std::span<const double> image(std::size_t index) const;
  /// Rows `indices` stacked into a (B, C*H*W) tensor outside the tape.
  Tensor batch(std::span<const std::size_t> indices) const;
  std::vector<std::size_t> labels_of(std::span<const std::size_t> indices) const;
};

/// Number of image rows forming the identity ("face") band.
std::size_t identity_band_rows(const ImageShape& shape);

Dataset generate(const DatasetManifest& manifest);

/// Writes `dataset.manifest` (text key/value) and `images.bin` (flat
/// little-endian f64) under `dir`.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
/// Accepts the directory or the manifest file path.
Dataset load_dataset(const std::filesystem::path& path);

struct Triplet {
  std::size_t query = 0;
  std::size_t positive = 0;
  std::size_t negative = 0;
};

/// Random triplets without hard mining: a uniform query among identities
/// with at least two samples, a uniform positive among its other samples,
/// and a negative drawn uniformly over the other identities and then over
/// that identity's samples.
class TripletSampler {
 public:
  TripletSampler(const Dataset& data, std::span<const std::size_t> pool);

  Triplet sample(Rng& rng) const;

 private:
  std::vector<std::size_t> labels_;
  std::vector<std::vector<std::size_t>> by_label_;  // indices grouped by identity
  std::vector<std::size_t> identities_;             // labels present in the pool
  std::vector<std::size_t> query_candidates_;       // pool entries whose identity has >= 2
};

/// Y = 0.299 R + 0.587 G + 0.114 B per pixel; identity for one channel.
std::vector<double> to_grayscale(std::span<const double> image, const ImageShape& shape);
/// Reverses the width axis of every channel.
std::vector<double> horizontal_flip(std::span<const double> image, const ImageShape& shape);

/// Replaces each image row of a batch by its grayscale version (replicated
/// across channels) with probability `probability`.
struct GrayscaleAugmentation {
  std::vector<double> pixels;
  std::vector<bool> applied;
};
GrayscaleAugmentation random_grayscale(std::span<const double> pixels, const ImageShape& shape,
                                       double probability, Rng& rng);

}  // namespace sirnet
