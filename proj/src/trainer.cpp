#include "sirnet/trainer.hpp"

#include <sstream>

#include "sirnet/cam_augment.hpp"
#include "sirnet/checkpoint.hpp"
#include "sirnet/losses.hpp"
#include "sirnet/ops.hpp"

namespace sirnet {
namespace {

Tensor rows_tensor(std::vector<double> values, std::size_t rows) {
  const auto cols = rows == 0 ? 0 : values.size() / rows;
  return Tensor({rows, cols}, std::move(values));
}

std::vector<double> grayscale_rows(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<double> out;
  for (auto i : indices) {
    const auto gray = to_grayscale(data.image(i), data.image_shape());
    out.insert(out.end(), gray.begin(), gray.end());
  }
  return out;
}

void restore_values(Tensor param, const ArchiveEntry& entry) {
  if (param.shape() != entry.shape) {
    throw ConfigError("checkpoint tensor " + entry.name + " has shape " +
                      shape_to_string(entry.shape) + ", model expects " +
                      shape_to_string(param.shape()));
  }
  auto dst = param.mutable_data();
  std::copy(entry.values.begin(), entry.values.end(), dst.begin());
}

RunConfig config_from_meta(const KeyValueFile& meta) {
  KeyValueFile file;
  const std::string_view prefix = "config.";
  for (const auto& [key, value] : meta.entries()) {
    if (std::string_view(key).starts_with(prefix)) file.set(key.substr(prefix.size()), value);
  }
  return parse_config(file);
}

}  // namespace

std::string loss_log_header() { return "step,epoch,tri,sim,cls,cam,aug_pos,aug_neg,total"; }

std::string loss_log_row(const StepRecord& r) {
  std::string out = std::to_string(r.step) + ',' + std::to_string(r.epoch);
  for (double v : {r.tri, r.sim, r.cls, r.cam, r.aug_pos, r.aug_neg, r.total}) {
    out += ',';
    out += format_double(v);
  }
  return out;
}

Dataset resolve_dataset(const RunConfig& config) {
  if (config.data_path.empty()) return generate(config.data);
  return load_dataset(config.data_path);
}

Trainer::Trainer(RunConfig config, Dataset data)
    : config_(std::move(config)),
      data_(std::move(data)),
      model_((config_.validate(), config_.network)),
      params_(model_.parameters()),
      registry_(config_.train.refresh_period),
      sampler_(data_, data_.train),
      rng_(config_.train.seed) {
  adam_.settings = config_.optim;
  if (data_.image_shape() != config_.network.image) {
    throw ConfigError("dataset images are " + to_string(data_.image_shape()) +
                      " but the network expects " + to_string(config_.network.image));
  }
  for (auto label : data_.labels) {
    if (label >= config_.network.num_identities) {
      throw ConfigError("dataset label " + std::to_string(label) + " exceeds network.num_identities=" +
                        std::to_string(config_.network.num_identities));
    }
  }
}

StepRecord Trainer::step() {
  const auto& cfg = config_;
  const auto n = cfg.train.batch_size;
  const auto epoch = step_ / cfg.train.steps_per_epoch;
  if (registry_.should_refresh(epoch)) registry_.refresh(model_, data_, data_.train, epoch);

  std::vector<std::size_t> q(n), p(n), neg(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto t = sampler_.sample(rng_);
    q[j] = t.query;
    p[j] = t.positive;
    neg[j] = t.negative;
  }
  std::vector<std::size_t> all;
  all.reserve(3 * n);
  all.insert(all.end(), q.begin(), q.end());
  all.insert(all.end(), p.begin(), p.end());
  all.insert(all.end(), neg.begin(), neg.end());

  const auto raw = data_.batch(all);
  auto augmented = random_grayscale(raw.data(), data_.image_shape(), cfg.train.grayscale_prob, rng_);
  const Tensor images({3 * n, data_.image_shape().numel()}, std::move(augmented.pixels));

  const auto features = model_.backbone(images);
  const auto emb = model_.separate(features, rng_);
  auto rows = [&](const Tensor& t, std::size_t block) { return slice(t, 0, block * n, (block + 1) * n); };

  TripletBatch batch;
  batch.query = {rows(emb.id, 0), rows(emb.attr, 0)};
  batch.positive = {rows(emb.id, 1), rows(emb.attr, 1)};
  batch.negative = {rows(emb.id, 2), rows(emb.attr, 2)};
  batch.query_labels = data_.labels_of(q);
  batch.negative_labels = data_.labels_of(neg);
  batch.validate();

  const auto query_features = rows(features, 0);
  LossTerms terms;
  terms.tri = triplet_loss(batch, cfg.loss.margin);
  terms.sim = sim_loss(batch.query.id, batch.query_labels, registry_);
  terms.cls = cls_loss(model_.classify(concat({batch.query.id, batch.query.attr}, 1)),
                       batch.query_labels);
  terms.cam = cam_loss(model_.cam_logits(query_features), batch.query_labels);

  const auto pos = augment_positive(batch.query, batch.positive, model_);
  terms.aug_pos = pos_aug_loss(pos, rows_tensor(grayscale_rows(data_, q), n),
                               rows_tensor(grayscale_rows(data_, p), n));

  const auto& fshape = cfg.network.features;
  const auto fdim = fshape.numel();
  const auto fvalues = features.data();
  std::vector<double> query_gt, negative_gt;
  query_gt.reserve(n * fdim);
  negative_gt.reserve(n * fdim);
  for (std::size_t j = 0; j < n; ++j) {
    const auto fq = fvalues.subspan(j * fdim, fdim);
    const auto fn = fvalues.subspan((2 * n + j) * fdim, fdim);
    const auto art_q = build_cam_artifacts(fq, batch.query_labels[j], model_);
    const auto art_n = build_cam_artifacts(fn, batch.negative_labels[j], model_);
    const auto gt = build_pseudo_gt(fq, fn, art_q, art_n, fshape);
    query_gt.insert(query_gt.end(), gt.query_target.begin(), gt.query_target.end());
    negative_gt.insert(negative_gt.end(), gt.negative_target.begin(), gt.negative_target.end());
  }
  const auto taps = augment_negative(batch.query, batch.positive, batch.negative, model_,
                                     cfg.train.negative_attr);
  terms.aug_neg = neg_aug_loss(taps, rows_tensor(std::move(query_gt), n),
                               rows_tensor(std::move(negative_gt), n));

  const auto total = total_loss(terms, cfg.loss);
  StepRecord record{step_ + 1,         epoch,
                    terms.tri.item(),  terms.sim.item(),
                    terms.cls.item(),  terms.cam.item(),
                    terms.aug_pos.item(), terms.aug_neg.item(),
                    total.item()};
  backward(total);
  adam_step(params_, adam_);
  ++step_;
  return record;
}

void Trainer::run(const std::function<void(const StepRecord&)>& on_step) {
  while (step_ < total_steps()) {
    const auto record = step();
    if (on_step) on_step(record);
  }
}

void Trainer::save(const std::filesystem::path& checkpoint) const {
  TensorArchive archive;
  const auto config_file = serialize_config(config_);
  for (const auto& [key, value] : config_file.entries()) {
    archive.meta.set("config." + key, value);
  }
  archive.meta.set_uint("train.step", step_);
  std::ostringstream rng_text;
  rng_text << rng_;
  archive.meta.set("train.rng", rng_text.str());
  archive.meta.set_uint("adam.step", adam_.step);
  archive.meta.set_uint("registry.last_refresh_epoch", registry_.last_refresh_epoch());
  std::vector<std::size_t> labels;
  for (const auto& [label, center] : registry_.centers()) {
    labels.push_back(label);
    archive.add("registry.center." + std::to_string(label), {center.size()}, center);
  }
  archive.meta.set("registry.labels", join_indices(labels));

  const auto named = model_.named_parameters();
  const bool has_moments = adam_.first_moment.size() == named.size();
  for (std::size_t i = 0; i < named.size(); ++i) {
    const auto& [name, tensor] = named[i];
    const auto values = tensor.data();
    archive.add("param." + name, tensor.shape(), {values.begin(), values.end()});
    if (has_moments) {
      archive.add("adam.m." + name, tensor.shape(), adam_.first_moment[i]);
      archive.add("adam.v." + name, tensor.shape(), adam_.second_moment[i]);
    }
  }
  write_archive(archive, checkpoint);
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint) {
  const auto config = config_from_meta(read_archive(checkpoint).meta);
  return resume(checkpoint, resolve_dataset(config));
}

Trainer Trainer::resume(const std::filesystem::path& checkpoint, Dataset data) {
  const auto archive = read_archive(checkpoint);
  Trainer trainer(config_from_meta(archive.meta), std::move(data));
  trainer.step_ = static_cast<std::size_t>(archive.meta.get_uint("train.step"));
  std::istringstream rng_text(archive.meta.get("train.rng"));
  rng_text >> trainer.rng_;
  if (!rng_text) throw ConfigError(checkpoint.string() + ": unreadable train.rng state");

  const auto named = trainer.model_.named_parameters();
  for (const auto& [name, tensor] : named) restore_values(tensor, archive.get("param." + name));
  trainer.adam_.step = archive.meta.get_uint("adam.step");
  if (!named.empty() && archive.contains("adam.m." + named.front().name)) {
    for (const auto& [name, tensor] : named) {
      trainer.adam_.first_moment.push_back(archive.get("adam.m." + name).values);
      trainer.adam_.second_moment.push_back(archive.get("adam.v." + name).values);
    }
  }
  CenterMap centers;
  for (auto label : archive.meta.get_indices("registry.labels")) {
    centers[label] = archive.get("registry.center." + std::to_string(label)).values;
  }
  if (!centers.empty()) {
    trainer.registry_.assign(std::move(centers),
                             archive.meta.get_uint("registry.last_refresh_epoch"));
  }
  return trainer;
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  const auto archive = read_archive(checkpoint);
  auto config = config_from_meta(archive.meta);
  SirNet model(config.network);
  for (const auto& [name, tensor] : model.named_parameters()) {
    restore_values(tensor, archive.get("param." + name));
  }
  return {std::move(config), std::move(model)};
}

}  // namespace sirnet
