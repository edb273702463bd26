#include "sirnet/config.hpp"

#include <functional>
#include <string_view>

namespace sirnet {
namespace {

struct Field {
  const char* key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, std::string_view, std::string_view)> set;
};

template <class T>
Field uint_field(const char* key, T RunConfig::*section, std::size_t T::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, std::string_view v, std::string_view ctx) {
            c.*section.*member = static_cast<std::size_t>(parse_uint(v, ctx));
          }};
}

template <class T>
Field seed_field(const char* key, T RunConfig::*section, std::uint64_t T::*member) {
  return {key, [=](const RunConfig& c) { return std::to_string(c.*section.*member); },
          [=](RunConfig& c, std::string_view v, std::string_view ctx) {
            c.*section.*member = parse_uint(v, ctx);
          }};
}

template <class T>
Field double_field(const char* key, T RunConfig::*section, double T::*member) {
  return {key, [=](const RunConfig& c) { return format_double(c.*section.*member); },
          [=](RunConfig& c, std::string_view v, std::string_view ctx) {
            c.*section.*member = parse_double(v, ctx);
          }};
}

Field image_field(const char* key, std::size_t ImageShape::*member, bool features) {
  return {key,
          [=](const RunConfig& c) {
            const auto& s = features ? c.network.features : c.network.image;
            return std::to_string(s.*member);
          },
          [=](RunConfig& c, std::string_view v, std::string_view ctx) {
            auto& s = features ? c.network.features : c.network.image;
            s.*member = static_cast<std::size_t>(parse_uint(v, ctx));
          }};
}

const std::vector<Field>& fields() {
  using R = RunConfig;
  static const std::vector<Field> table = {
      image_field("network.image_channels", &ImageShape::channels, false),
      image_field("network.image_height", &ImageShape::height, false),
      image_field("network.image_width", &ImageShape::width, false),
      image_field("network.feature_channels", &ImageShape::channels, true),
      image_field("network.feature_height", &ImageShape::height, true),
      image_field("network.feature_width", &ImageShape::width, true),
      uint_field("network.id_dim", &R::network, &NetworkConfig::id_dim),
      uint_field("network.attr_dim", &R::network, &NetworkConfig::attr_dim),
      uint_field("network.num_identities", &R::network, &NetworkConfig::num_identities),
      double_field("network.dropout", &R::network, &NetworkConfig::dropout),
      uint_field("network.backbone_hidden", &R::network, &NetworkConfig::backbone_hidden),
      uint_field("network.separator_hidden", &R::network, &NetworkConfig::separator_hidden),
      uint_field("network.generator_hidden", &R::network, &NetworkConfig::generator_hidden),
      seed_field("network.init_seed", &R::network, &NetworkConfig::init_seed),

      double_field("loss.lambda_id", &R::loss, &LossWeights::id),
      double_field("loss.lambda_rec", &R::loss, &LossWeights::rec),
      double_field("loss.lambda_cls", &R::loss, &LossWeights::cls),
      double_field("loss.lambda_tri", &R::loss, &LossWeights::tri),
      double_field("loss.lambda_sim", &R::loss, &LossWeights::sim),
      double_field("loss.lambda_aug_pos", &R::loss, &LossWeights::aug_pos),
      double_field("loss.lambda_aug_neg", &R::loss, &LossWeights::aug_neg),
      double_field("loss.lambda_cam", &R::loss, &LossWeights::cam),
      double_field("loss.margin", &R::loss, &LossWeights::margin),

      double_field("optim.lr", &R::optim, &AdamSettings::learning_rate),
      double_field("optim.beta1", &R::optim, &AdamSettings::beta1),
      double_field("optim.beta2", &R::optim, &AdamSettings::beta2),
      double_field("optim.epsilon", &R::optim, &AdamSettings::epsilon),

      uint_field("train.batch_size", &R::train, &TrainSettings::batch_size),
      uint_field("train.epochs", &R::train, &TrainSettings::epochs),
      uint_field("train.steps_per_epoch", &R::train, &TrainSettings::steps_per_epoch),
      uint_field("train.refresh_period", &R::train, &TrainSettings::refresh_period),
      uint_field("train.checkpoint_every", &R::train, &TrainSettings::checkpoint_every),
      double_field("train.grayscale_prob", &R::train, &TrainSettings::grayscale_prob),
      seed_field("train.seed", &R::train, &TrainSettings::seed),
      {"train.negative_attr",
       [](const RunConfig& c) {
         return std::string(c.train.negative_attr == NegativeAttrSource::query ? "query" : "positive");
       },
       [](RunConfig& c, std::string_view v, std::string_view ctx) {
         if (v == "query") {
           c.train.negative_attr = NegativeAttrSource::query;
         } else if (v == "positive") {
           c.train.negative_attr = NegativeAttrSource::positive;
         } else {
           throw ConfigError(std::string(ctx) + ": expected query|positive, got '" + std::string(v) + "'");
         }
       }},

      double_field("eval.alpha", &R::eval, &EvalSettings::alpha),
      {"eval.flip", [](const RunConfig& c) { return std::string(c.eval.flip ? "true" : "false"); },
       [](RunConfig& c, std::string_view v, std::string_view ctx) { c.eval.flip = parse_bool(v, ctx); }},

      {"data.path", [](const RunConfig& c) { return c.data_path; },
       [](RunConfig& c, std::string_view v, std::string_view) { c.data_path = std::string(v); }},
      uint_field("data.ids", &R::data, &DatasetManifest::num_identities),
      uint_field("data.per_id", &R::data, &DatasetManifest::samples_per_identity),
      uint_field("data.query_per_id", &R::data, &DatasetManifest::query_per_identity),
      uint_field("data.gallery_per_id", &R::data, &DatasetManifest::gallery_per_identity),
      uint_field("data.appearance_prototypes", &R::data, &DatasetManifest::appearance_prototypes),
      double_field("data.signature_contrast", &R::data, &DatasetManifest::signature_contrast),
      double_field("data.appearance_jitter", &R::data, &DatasetManifest::appearance_jitter),
      seed_field("data.seed", &R::data, &DatasetManifest::seed),

      {"output.dir", [](const RunConfig& c) { return c.output_dir; },
       [](RunConfig& c, std::string_view v, std::string_view) { c.output_dir = std::string(v); }},
  };
  return table;
}

}  // namespace

void RunConfig::validate() const {
  network.validate();
  loss.validate();
  if (!(optim.learning_rate > 0.0)) throw ConfigError("optim.lr must be > 0");
  if (!(optim.beta1 >= 0.0 && optim.beta1 < 1.0) || !(optim.beta2 >= 0.0 && optim.beta2 < 1.0)) {
    throw ConfigError("optim betas must lie in [0, 1)");
  }
  if (!(optim.epsilon > 0.0)) throw ConfigError("optim.epsilon must be > 0");
  if (train.batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
  if (train.steps_per_epoch < 1) throw ConfigError("train.steps_per_epoch must be >= 1");
  if (train.refresh_period < 1) throw ConfigError("train.refresh_period must be >= 1");
  if (!(train.grayscale_prob >= 0.0 && train.grayscale_prob <= 1.0)) {
    throw ConfigError("train.grayscale_prob must lie in [0, 1]");
  }
  if (!(eval.alpha >= 0.0)) throw ConfigError("eval.alpha must be >= 0");
  if (data_path.empty()) {
    data.validate();
    if (data.num_identities != network.num_identities) {
      throw ConfigError("data.ids (" + std::to_string(data.num_identities) +
                        ") must equal network.num_identities (" +
                        std::to_string(network.num_identities) + ")");
    }
  }
}

RunConfig parse_config(const KeyValueFile& file) {
  RunConfig config;
  const auto& table = fields();
  for (const auto& [key, value] : file.entries()) {
    const Field* field = nullptr;
    for (const auto& f : table) {
      if (key == f.key) field = &f;
    }
    if (field == nullptr) throw ConfigError(file.source() + ": unknown config key '" + key + "'");
    field->set(config, value, file.source() + ": " + key);
  }
  config.data.image = config.network.image;
  config.validate();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  return parse_config(KeyValueFile::read(path));
}

KeyValueFile serialize_config(const RunConfig& config) {
  KeyValueFile file;
  for (const auto& f : fields()) file.set(f.key, f.get(config));
  return file;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

}  // namespace sirnet
