#include "sirnet/data_synth.hpp"

#include <algorithm>
#include <string>

#include "sirnet/kv_io.hpp"

namespace sirnet {
namespace {

constexpr const char* kDatasetFormat = "sir-dataset/1";
constexpr const char* kManifestName = "dataset.manifest";
constexpr const char* kBlobName = "images.bin";

}  // namespace

void DatasetManifest::validate() const {
  const auto fail = [](const std::string& what) { throw ConfigError("dataset manifest: " + what); };
  if (num_identities < 2) fail("need at least 2 identities");
  if (query_per_identity < 1 || gallery_per_identity < 1) {
    fail("need at least one query and one gallery sample per identity");
  }
  if (samples_per_identity < query_per_identity + gallery_per_identity + 2) {
    fail("samples_per_identity=" + std::to_string(samples_per_identity) +
         " leaves fewer than 2 training samples per identity");
  }
  if (image.numel() == 0 || image.height < 2) fail("image must have at least 2 rows");
  if (image.channels != 1 && image.channels != 3) fail("image channels must be 1 or 3");
  if (appearance_prototypes < 2) fail("need at least 2 appearance prototypes");
  if (!(signature_contrast >= 0.0 && signature_contrast <= 0.5)) {
    fail("signature_contrast must lie in [0, 0.5]");
  }
  if (!(appearance_jitter >= 0.0)) fail("appearance_jitter must be >= 0");
}

std::size_t identity_band_rows(const ImageShape& shape) {
  return std::max<std::size_t>(1, shape.height / 4);
}

std::span<const double> Dataset::image(std::size_t index) const {
  const auto n = manifest.image.numel();
  if (index >= size()) {
    throw ContractError("dataset index " + std::to_string(index) + " out of range");
  }
  return std::span<const double>(pixels).subspan(index * n, n);
}

Tensor Dataset::batch(std::span<const std::size_t> indices) const {
  const auto n = manifest.image.numel();
  std::vector<double> out;
  out.reserve(indices.size() * n);
  for (auto i : indices) {
    const auto img = image(i);
    out.insert(out.end(), img.begin(), img.end());
  }
  return Tensor::matrix(indices.size(), n, std::move(out));
}

std::vector<std::size_t> Dataset::labels_of(std::span<const std::size_t> indices) const {
  std::vector<std::size_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(labels.at(i));
  return out;
}

Dataset generate(const DatasetManifest& manifest) {
  manifest.validate();
  const auto& shape = manifest.image;
  const std::size_t band = identity_band_rows(shape);
  const std::size_t body_rows = shape.height - band;
  const std::size_t half_width = (shape.width + 1) / 2;
  Rng rng(manifest.seed);

  std::vector<std::vector<double>> prototypes(manifest.appearance_prototypes);
  for (auto& proto : prototypes) {
    proto.resize(shape.channels * body_rows * shape.width);
    for (auto& v : proto) v = uniform01(rng);
  }

  Dataset data;
  data.manifest = manifest;
  data.pixels.reserve(manifest.num_identities * manifest.samples_per_identity * shape.numel());
  const std::size_t half = manifest.appearance_prototypes / 2;
  for (std::size_t id = 0; id < manifest.num_identities; ++id) {
    SyntheticPerson person;
    person.identity = id;
    // Faces are left-right symmetric: draw half the columns and mirror.
    person.signature.resize(shape.channels * band * shape.width);
    for (std::size_t c = 0; c < shape.channels; ++c) {
      for (std::size_t r = 0; r < band; ++r) {
        for (std::size_t x = 0; x < half_width; ++x) {
          const double v = 0.5 + manifest.signature_contrast * uniform(rng, -1.0, 1.0);
          person.signature[(c * band + r) * shape.width + x] = v;
          person.signature[(c * band + r) * shape.width + (shape.width - 1 - x)] = v;
        }
      }
    }
    for (std::size_t k = 0; k < manifest.samples_per_identity; ++k) {
      const std::size_t index = data.labels.size();
      std::size_t proto = 0;
      if (k < manifest.train_per_identity()) {
        proto = uniform_index(rng, manifest.appearance_prototypes);
        data.train.push_back(index);
      } else if (k < manifest.train_per_identity() + manifest.query_per_identity) {
        proto = uniform_index(rng, half);
        data.query.push_back(index);
      } else {
        proto = half + uniform_index(rng, manifest.appearance_prototypes - half);
        data.gallery.push_back(index);
      }
      person.appearance_ids.push_back(proto);
      for (std::size_t c = 0; c < shape.channels; ++c) {
        for (std::size_t r = 0; r < shape.height; ++r) {
          for (std::size_t x = 0; x < shape.width; ++x) {
            double v = 0.0;
            if (r < band) {
              v = person.signature[(c * band + r) * shape.width + x];
            } else {
              const double base = prototypes[proto][(c * body_rows + (r - band)) * shape.width + x];
              v = std::clamp(base + manifest.appearance_jitter * uniform(rng, -1.0, 1.0), 0.0, 1.0);
            }
            data.pixels.push_back(v);
          }
        }
      }
      data.labels.push_back(id);
    }
    data.people.push_back(std::move(person));
  }
  return data;
}

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& m = data.manifest;
  KeyValueFile kv;
  kv.set("format", kDatasetFormat);
  kv.set_uint("ids", m.num_identities);
  kv.set_uint("per_id", m.samples_per_identity);
  kv.set_uint("query_per_id", m.query_per_identity);
  kv.set_uint("gallery_per_id", m.gallery_per_identity);
  kv.set_uint("image.channels", m.image.channels);
  kv.set_uint("image.height", m.image.height);
  kv.set_uint("image.width", m.image.width);
  kv.set_uint("appearance_prototypes", m.appearance_prototypes);
  kv.set_double("signature_contrast", m.signature_contrast);
  kv.set_double("appearance_jitter", m.appearance_jitter);
  kv.set_uint("seed", m.seed);
  kv.set_uint("count", data.size());
  kv.set("blob", kBlobName);
  kv.set("labels", join_indices(data.labels));
  kv.set("split.train", join_indices(data.train));
  kv.set("split.query", join_indices(data.query));
  kv.set("split.gallery", join_indices(data.gallery));
  std::vector<std::size_t> appearance;
  for (const auto& p : data.people) {
    appearance.insert(appearance.end(), p.appearance_ids.begin(), p.appearance_ids.end());
  }
  kv.set("appearance", join_indices(appearance));
  kv.write(dir / kManifestName);
  write_f64_blob(dir / kBlobName, data.pixels);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const auto manifest_path =
      std::filesystem::is_directory(path) ? path / kManifestName : path;
  const auto kv = KeyValueFile::read(manifest_path);
  if (kv.get("format") != kDatasetFormat) {
    throw ConfigError(manifest_path.string() + ": unsupported format '" + kv.get("format") + "'");
  }
  Dataset data;
  auto& m = data.manifest;
  m.num_identities = kv.get_uint("ids");
  m.samples_per_identity = kv.get_uint("per_id");
  m.query_per_identity = kv.get_uint("query_per_id");
  m.gallery_per_identity = kv.get_uint("gallery_per_id");
  m.image = {kv.get_uint("image.channels"), kv.get_uint("image.height"), kv.get_uint("image.width")};
  m.appearance_prototypes = kv.get_uint("appearance_prototypes");
  m.signature_contrast = kv.get_double("signature_contrast");
  m.appearance_jitter = kv.get_double("appearance_jitter");
  m.seed = kv.get_uint("seed");
  m.validate();
  const auto count = kv.get_uint("count");
  data.labels = kv.get_indices("labels");
  data.train = kv.get_indices("split.train");
  data.query = kv.get_indices("split.query");
  data.gallery = kv.get_indices("split.gallery");
  data.pixels = read_f64_blob(manifest_path.parent_path() / kv.get("blob"));
  if (data.labels.size() != count || data.pixels.size() != count * m.image.numel()) {
    throw ConfigError(manifest_path.string() + ": blob/labels do not match count " +
                      std::to_string(count));
  }
  for (const auto* split : {&data.train, &data.query, &data.gallery}) {
    for (auto i : *split) {
      if (i >= count) throw ConfigError(manifest_path.string() + ": split index out of range");
    }
  }
  const auto appearance = kv.get_indices("appearance");
  if (appearance.size() != count) {
    throw ConfigError(manifest_path.string() + ": appearance list does not match count");
  }
  const std::size_t band_values = identity_band_rows(m.image) * m.image.width;
  for (std::size_t id = 0; id < m.num_identities; ++id) {
    SyntheticPerson person;
    person.identity = id;
    for (std::size_t i = 0; i < count; ++i) {
      if (data.labels[i] != id) continue;
      if (person.signature.empty()) {
        const auto img = data.image(i);
        for (std::size_t c = 0; c < m.image.channels; ++c) {
          const auto channel = img.subspan(c * m.image.spatial(), band_values);
          person.signature.insert(person.signature.end(), channel.begin(), channel.end());
        }
      }
      person.appearance_ids.push_back(appearance[i]);
    }
    data.people.push_back(std::move(person));
  }
  return data;
}

TripletSampler::TripletSampler(const Dataset& data, std::span<const std::size_t> pool)
    : labels_(data.labels) {
  std::size_t max_label = 0;
  for (auto i : pool) max_label = std::max(max_label, data.labels.at(i));
  by_label_.resize(max_label + 1);
  for (auto i : pool) by_label_[data.labels[i]].push_back(i);
  for (std::size_t label = 0; label < by_label_.size(); ++label) {
    if (!by_label_[label].empty()) identities_.push_back(label);
  }
  for (auto i : pool) {
    if (by_label_[data.labels[i]].size() >= 2) query_candidates_.push_back(i);
  }
  if (identities_.size() < 2) throw ContractError("triplet sampler: need at least 2 identities");
  if (query_candidates_.empty()) {
    throw ContractError("triplet sampler: no identity has 2 samples to serve as a query");
  }
}

Triplet TripletSampler::sample(Rng& rng) const {
  Triplet t;
  t.query = query_candidates_[uniform_index(rng, query_candidates_.size())];
  const auto label = labels_[t.query];
  const auto& same = by_label_[label];
  const auto q_pos = static_cast<std::size_t>(std::find(same.begin(), same.end(), t.query) - same.begin());
  std::size_t k = uniform_index(rng, same.size() - 1);
  if (k >= q_pos) ++k;
  t.positive = same[k];

  const auto label_pos = static_cast<std::size_t>(
      std::find(identities_.begin(), identities_.end(), label) - identities_.begin());
  std::size_t j = uniform_index(rng, identities_.size() - 1);
  if (j >= label_pos) ++j;
  const auto& other = by_label_[identities_[j]];
  t.negative = other[uniform_index(rng, other.size())];
  return t;
}

std::vector<double> to_grayscale(std::span<const double> image, const ImageShape& shape) {
  if (image.size() != shape.numel()) {
    throw DimensionError("to_grayscale: " + std::to_string(image.size()) +
                         " values for image " + to_string(shape));
  }
  const auto cells = shape.spatial();
  if (shape.channels == 1) return {image.begin(), image.end()};
  if (shape.channels != 3) {
    throw DimensionError("to_grayscale: expects 1 or 3 channels, got " + to_string(shape));
  }
  std::vector<double> out(cells);
  for (std::size_t s = 0; s < cells; ++s) {
    out[s] = 0.299 * image[s] + 0.587 * image[cells + s] + 0.114 * image[2 * cells + s];
  }
  return out;
}

std::vector<double> horizontal_flip(std::span<const double> image, const ImageShape& shape) {
  if (image.size() != shape.numel()) {
    throw DimensionError("horizontal_flip: " + std::to_string(image.size()) +
                         " values for image " + to_string(shape));
  }
  std::vector<double> out(image.size());
  for (std::size_t row = 0; row < shape.channels * shape.height; ++row) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      out[row * shape.width + x] = image[row * shape.width + (shape.width - 1 - x)];
    }
  }
  return out;
}

GrayscaleAugmentation random_grayscale(std::span<const double> pixels, const ImageShape& shape,
                                       double probability, Rng& rng) {
  const auto n = shape.numel();
  if (pixels.size() % n != 0) {
    throw DimensionError("random_grayscale: " + std::to_string(pixels.size()) +
                         " values is not a whole number of " + to_string(shape) + " images");
  }
  GrayscaleAugmentation out{{pixels.begin(), pixels.end()}, {}};
  const auto rows = pixels.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    const bool apply = bernoulli(rng, probability);
    out.applied.push_back(apply);
    if (!apply) continue;
    const auto gray = to_grayscale(pixels.subspan(r * n, n), shape);
    for (std::size_t c = 0; c < shape.channels; ++c) {
      std::copy(gray.begin(), gray.end(), out.pixels.begin() + static_cast<std::ptrdiff_t>(r * n + c * shape.spatial()));
    }
  }
  return out;
}

}  // namespace sirnet
