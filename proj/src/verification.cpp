#include "sirnet/verification.hpp"

#include "sirnet/cam_augment.hpp"
#include "sirnet/cluster_registry.hpp"
#include "sirnet/losses.hpp"
#include "sirnet/ops.hpp"

namespace sirnet {
namespace {

constexpr std::size_t kBatch = 4;

Tensor random_leaf(std::size_t rows, std::size_t cols, double lo, double hi, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return Tensor({rows, cols}, std::move(v), true);
}

Tensor parameter(const SirNet& model, const std::string& name) {
  for (auto& p : model.named_parameters()) {
    if (p.name == name) return p.tensor;
  }
  throw ContractError("no parameter named " + name);
}

std::shared_ptr<SirNet> probe_model(const NetworkConfig& base, Rng& rng) {
  auto config = base;
  config.init_seed = rng();
  return std::make_shared<SirNet>(config);
}

std::vector<std::size_t> random_labels(std::size_t n, std::size_t classes, Rng& rng) {
  std::vector<std::size_t> labels(n);
  for (auto& y : labels) y = uniform_index(rng, classes);
  return labels;
}

ProbeInstance triplet_probe(const NetworkConfig& net, Rng& rng) {
  auto model = probe_model(net, rng);
  const auto f = random_leaf(3 * kBatch, net.features.numel(), 0.0, 1.0, rng);
  std::vector<std::size_t> yq(kBatch), yn(kBatch);
  for (std::size_t j = 0; j < kBatch; ++j) {
    yq[j] = uniform_index(rng, net.num_identities);
    yn[j] = (yq[j] + 1 + uniform_index(rng, net.num_identities - 1)) % net.num_identities;
  }
  const double margin = LossWeights{}.margin;
  return {{f, parameter(*model, "separator.id_head.weight")},
          [model, yq, yn, margin](const std::vector<Tensor>& in) {
            const auto emb = model->separate(in[0]);
            auto block = [&](const Tensor& t, std::size_t b) {
              return slice(t, 0, b * kBatch, (b + 1) * kBatch);
            };
            TripletBatch batch{{block(emb.id, 0), block(emb.attr, 0)},
                               {block(emb.id, 1), block(emb.attr, 1)},
                               {block(emb.id, 2), block(emb.attr, 2)},
                               yq,
                               yn};
            return triplet_loss(batch, margin);
          }};
}

ProbeInstance sim_probe(const NetworkConfig& net, Rng& rng) {
  auto model = probe_model(net, rng);
  const auto f = random_leaf(kBatch, net.features.numel(), 0.0, 1.0, rng);
  auto registry = std::make_shared<ClusterRegistry>();
  CenterMap centers;
  const double spread = 1.0 / std::sqrt(static_cast<double>(net.id_dim));
  for (std::size_t c = 0; c < net.num_identities; ++c) {
    auto& center = centers[c];
    for (std::size_t k = 0; k < net.id_dim; ++k) center.push_back(uniform(rng, -spread, spread));
  }
  registry->assign(std::move(centers), 0);
  const auto labels = random_labels(kBatch, net.num_identities, rng);
  return {{f, parameter(*model, "separator.fc.weight")},
          [model, registry, labels](const std::vector<Tensor>& in) {
            return sim_loss(model->separate(in[0]).id, labels, *registry);
          }};
}

ProbeInstance cls_probe(const NetworkConfig& net, Rng& rng) {
  auto model = probe_model(net, rng);
  const auto f = random_leaf(kBatch, net.features.numel(), 0.0, 1.0, rng);
  const auto labels = random_labels(kBatch, net.num_identities, rng);
  return {{f, parameter(*model, "classifier.fc.weight")},
          [model, labels](const std::vector<Tensor>& in) {
            const auto emb = model->separate(in[0]);
            return cls_loss(model->classify(concat({emb.id, emb.attr}, 1)), labels);
          }};
}

ProbeInstance cam_probe(const NetworkConfig& net, Rng& rng) {
  auto model = probe_model(net, rng);
  const auto f = random_leaf(kBatch, net.features.numel(), 0.0, 1.0, rng);
  const auto labels = random_labels(kBatch, net.num_identities, rng);
  return {{f, parameter(*model, "cam_head.fc.weight")},
          [model, labels](const std::vector<Tensor>& in) {
            return cam_loss(model->cam_logits(in[0]), labels);
          }};
}

ProbeInstance pos_aug_probe(const NetworkConfig& net, Rng& rng) {
  auto model = probe_model(net, rng);
  const auto qi = random_leaf(kBatch, net.id_dim, -0.3, 0.3, rng);
  const auto qa = random_leaf(kBatch, net.attr_dim, -0.3, 0.3, rng);
  const auto pi = random_leaf(kBatch, net.id_dim, -0.3, 0.3, rng);
  const auto pa = random_leaf(kBatch, net.attr_dim, -0.3, 0.3, rng);
  const auto q_gray = random_leaf(kBatch, net.image.spatial(), 0.0, 1.0, rng).detach();
  const auto p_gray = random_leaf(kBatch, net.image.spatial(), 0.0, 1.0, rng).detach();
  return {{qi, qa, pi, pa, parameter(*model, "generator.image.weight")},
          [model, q_gray, p_gray](const std::vector<Tensor>& in) {
            const auto images = augment_positive({in[0], in[1]}, {in[2], in[3]}, *model);
            return pos_aug_loss(images, q_gray, p_gray);
          }};
}

ProbeInstance neg_aug_probe(const NetworkConfig& net, Rng& rng) {
  auto model = probe_model(net, rng);
  // Lift the feature-tap bias so the relu outputs stay off zero, where the
  // masked-out pseudo ground truth cells would sit exactly on the L1 kink.
  auto tap_bias = parameter(*model, "generator.feature_tap.bias");
  for (auto& b : tap_bias.mutable_data()) b = uniform(rng, 1.5, 2.0);

  const auto qi = random_leaf(kBatch, net.id_dim, -0.3, 0.3, rng);
  const auto qa = random_leaf(kBatch, net.attr_dim, -0.3, 0.3, rng);
  const auto ni = random_leaf(kBatch, net.id_dim, -0.3, 0.3, rng);
  const auto na = random_leaf(kBatch, net.attr_dim, -0.3, 0.3, rng);
  const auto fdim = net.features.numel();
  std::vector<double> gt_q, gt_n;
  for (std::size_t j = 0; j < kBatch; ++j) {
    std::vector<double> fq(fdim), fn(fdim);
    for (auto& x : fq) x = uniform(rng, 0.0, 1.0);
    for (auto& x : fn) x = uniform(rng, 0.0, 1.0);
    const auto yq = uniform_index(rng, net.num_identities);
    const auto yn = (yq + 1 + uniform_index(rng, net.num_identities - 1)) % net.num_identities;
    const auto gt = build_pseudo_gt(fq, fn, build_cam_artifacts(fq, yq, *model),
                                    build_cam_artifacts(fn, yn, *model), net.features);
    gt_q.insert(gt_q.end(), gt.query_target.begin(), gt.query_target.end());
    gt_n.insert(gt_n.end(), gt.negative_target.begin(), gt.negative_target.end());
  }
  const Tensor target_q({kBatch, fdim}, std::move(gt_q));
  const Tensor target_n({kBatch, fdim}, std::move(gt_n));
  return {{qi, qa, ni, na, parameter(*model, "generator.feature_tap.weight")},
          [model, target_q, target_n](const std::vector<Tensor>& in) {
            const DisentangledEmbedding q{in[0], in[1]};
            const auto taps = augment_negative(q, q, {in[2], in[3]}, *model);
            return neg_aug_loss(taps, target_q, target_n);
          }};
}

}  // namespace

std::vector<LossProbe> loss_probes(const NetworkConfig& network) {
  network.validate();
  auto bind = [network](ProbeInstance (*make)(const NetworkConfig&, Rng&)) {
    return [network, make](Rng& rng) { return make(network, rng); };
  };
  return {{"tri", bind(triplet_probe)},   {"sim", bind(sim_probe)},
          {"cls", bind(cls_probe)},       {"cam", bind(cam_probe)},
          {"aug_pos", bind(pos_aug_probe)}, {"aug_neg", bind(neg_aug_probe)}};
}

std::vector<ProbeResult> run_gradcheck_suite(const GradCheckSuiteOptions& options,
                                             const std::vector<LossProbe>& probes) {
  GradCheckOptions check;
  check.step = options.step;
  check.tolerance = options.tolerance;
  check.max_coords_per_input = options.max_coords_per_input;

  std::vector<ProbeResult> results;
  for (std::size_t i = 0; i < probes.size(); ++i) {
    Rng rng(derive_seed(options.seed, i));
    ProbeResult result{probes[i].name, {}, 0, false};
    while (result.draws < options.max_draws && !result.away_from_kinks) {
      const auto instance = probes[i].setup(rng);
      check.seed = rng();
      result.report = grad_check(instance.loss, instance.inputs, check);
      result.away_from_kinks = result.report.min_kink_gap > options.kink_margin * options.step;
      ++result.draws;
    }
    results.push_back(std::move(result));
  }
  return results;
}

}  // namespace sirnet
