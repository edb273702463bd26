#include <filesystem>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "sirnet/cam_augment.hpp"
#include "sirnet/ops.hpp"

using namespace sirnet;

namespace {

CamArtifacts artifacts_from(const Mask& id, const Mask& attr) {
  CamArtifacts a;
  a.id_mask = id;
  a.attr_mask = attr;
  return a;
}

bool same_values(const Tensor& a, const Tensor& b) {
  return std::equal(a.data().begin(), a.data().end(), b.data().begin(), b.data().end());
}

DisentangledEmbedding random_embedding(const NetworkConfig& c, std::size_t n, Rng& rng) {
  auto rand = [&](std::size_t d) {
    std::vector<double> v(n * d);
    for (auto& x : v) x = uniform(rng, -0.5, 0.5);
    return Tensor::matrix(n, d, std::move(v));
  };
  return {rand(c.id_dim), rand(c.attr_dim)};
}

}  // namespace

TEST_CASE("cam threshold and masks: hand example") {
  const auto art = build_cam_artifacts(Tensor::matrix(2, 2, {1, 3, 5, 7}));
  CHECK(art.threshold == 4.0);
  CHECK(art.id_mask == Mask{0, 0, 1, 1});
  CHECK(art.attr_mask == Mask{1, 1, 0, 0});
}

TEST_CASE("constant cam puts every cell in the id-relevant mask") {
  const auto art = build_cam_artifacts(Tensor::full({3, 2}, 0.7));
  CHECK(art.threshold == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(art.id_mask == Mask(6, 1));
  CHECK(art.attr_mask == Mask(6, 0));
}

TEST_CASE("masks partition the grid and ignore positive scaling") {
  Rng rng(44);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 1 + uniform_index(rng, 5), w = 1 + uniform_index(rng, 5);
    std::vector<double> v(h * w);
    for (auto& x : v) x = static_cast<double>(uniform_index(rng, 8));  // exact in binary
    const auto art = build_cam_artifacts(Tensor::matrix(h, w, v));
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(art.id_mask[i] + art.attr_mask[i] == 1);
    const double alpha = std::ldexp(1.0, static_cast<int>(uniform_index(rng, 10)) - 5);
    for (auto& x : v) x *= alpha;
    const auto scaled = build_cam_artifacts(Tensor::matrix(h, w, v));
    CHECK(scaled.id_mask == art.id_mask);
    CHECK(scaled.attr_mask == art.attr_mask);
  }
}

TEST_CASE("pseudo ground truth: hand example") {
  const ImageShape shape{1, 2, 2};
  const std::vector<double> fq{1, 2, 3, 4};  // a b c d
  const std::vector<double> fn{5, 6, 7, 8};  // e f g h
  const auto q = artifacts_from({1, 0, 0, 0}, {0, 1, 1, 1});
  const auto n = artifacts_from({0, 1, 0, 0}, {1, 0, 1, 1});
  const auto gt = build_pseudo_gt(fq, fn, q, n, shape);
  CHECK(gt.shared_attr_mask == Mask{0, 0, 1, 1});
  CHECK(gt.query_target == std::vector<double>{1, 0, 7, 8});  // [[a,0],[g,h]]
  CHECK(gt.negative_target == std::vector<double>{0, 6, 3, 4});
}

TEST_CASE("pseudo ground truth without shared irrelevant cells keeps only the id part") {
  const ImageShape shape{2, 1, 3};
  const std::vector<double> fq{1, 2, 3, 4, 5, 6};
  const std::vector<double> fn{9, 9, 9, 9, 9, 9};
  const auto q = artifacts_from({1, 0, 1}, {0, 1, 0});
  const auto n = artifacts_from({1, 1, 0}, {0, 0, 1});
  const auto gt = build_pseudo_gt(fq, fn, q, n, shape);
  CHECK(gt.query_target == std::vector<double>{1, 0, 3, 4, 0, 6});
}

TEST_CASE("pseudo ground truth equals the per-cell oracle and swaps roles symmetrically") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageShape shape{1 + uniform_index(rng, 3), 1 + uniform_index(rng, 4),
                           1 + uniform_index(rng, 4)};
    auto cam = [&] {
      std::vector<double> v(shape.spatial());
      for (auto& x : v) x = uniform(rng, -1, 1);
      return build_cam_artifacts(Tensor::matrix(shape.height, shape.width, std::move(v)));
    };
    const auto aq = cam();
    const auto an = cam();
    std::vector<double> fq(shape.numel()), fn(shape.numel());
    for (auto& x : fq) x = uniform01(rng);
    for (auto& x : fn) x = uniform01(rng);
    const auto gt = build_pseudo_gt(fq, fn, aq, an, shape);
    const auto want = oracle::pseudo_targets(fq, fn, aq.id_mask, aq.attr_mask, an.id_mask,
                                             an.attr_mask, shape.channels, shape.height, shape.width);
    CHECK(gt.query_target == want.query);
    CHECK(gt.negative_target == want.negative);
    const auto swapped = build_pseudo_gt(fn, fq, an, aq, shape);
    CHECK(swapped.query_target == gt.negative_target);
    CHECK(swapped.negative_target == gt.query_target);
  }
}

TEST_CASE("pseudo ground truth shape errors") {
  const ImageShape shape{1, 2, 2};
  const auto a = artifacts_from({1, 0, 0, 0}, {0, 1, 1, 1});
  CHECK_THROWS_AS(build_pseudo_gt(std::vector<double>(3), std::vector<double>(4), a, a, shape),
                  DimensionError);
  const auto small = artifacts_from({1}, {0});
  CHECK_THROWS_AS(build_pseudo_gt(std::vector<double>(4), std::vector<double>(4), small, a, shape),
                  DimensionError);
}

TEST_CASE("positive augmentation outputs") {
  const NetworkConfig config;
  const SirNet model(config);
  Rng rng(1);
  const auto q = random_embedding(config, 3, rng);
  const auto out = augment_positive(q, q, model);
  for (const auto* t : {&out.positive_id_query_attr, &out.query_id_positive_attr, &out.reconstruction}) {
    CHECK(t->shape() == Shape{3, config.image.spatial()});
  }
  CHECK(same_values(out.positive_id_query_attr, out.query_id_positive_attr));
  const auto p = random_embedding(config, 3, rng);
  const auto mixed = augment_positive(q, p, model);
  CHECK(same_values(mixed.reconstruction, out.reconstruction));
  CHECK_FALSE(same_values(mixed.positive_id_query_attr, mixed.query_id_positive_attr));
}

TEST_CASE("negative augmentation taps") {
  const NetworkConfig config;
  const SirNet model(config);
  Rng rng(2);
  const auto q = random_embedding(config, 2, rng);
  const auto p = random_embedding(config, 2, rng);
  const auto n = random_embedding(config, 2, rng);
  const auto taps = augment_negative(q, p, n, model, NegativeAttrSource::query);
  CHECK(taps.query_id_negative_attr.shape() == Shape{2, config.features.numel()});
  CHECK(taps.negative_id_query_attr.shape() == Shape{2, config.features.numel()});

  const auto same = augment_negative(q, q, q, model);
  CHECK(same_values(same.query_id_negative_attr, same.negative_id_query_attr));

  const auto flipped = augment_negative(q, p, n, model, NegativeAttrSource::positive);
  CHECK(same_values(flipped.query_id_negative_attr, taps.query_id_negative_attr));
  CHECK_FALSE(same_values(flipped.negative_id_query_attr, taps.negative_id_query_attr));
  const auto direct = model.generate(n.id, p.attr);
  CHECK(same_values(flipped.negative_id_query_attr, direct.feature_tap));
}

TEST_CASE("cam debug dump writes one grid per panel") {
  const ImageShape shape{2, 2, 2};
  const auto aq = build_cam_artifacts(Tensor::matrix(2, 2, {0, 1, 2, 3}));
  const auto an = build_cam_artifacts(Tensor::matrix(2, 2, {3, 2, 1, 0}));
  const std::vector<double> f(shape.numel(), 1.0);
  const auto gt = build_pseudo_gt(f, f, aq, an, shape);
  const auto dir = std::filesystem::temp_directory_path() / "sirnet_cam_dump_test";
  std::filesystem::remove_all(dir);
  dump_cam_debug(dir, aq, an, gt, shape);
  for (const char* name : {"cam_query.csv", "mask_id_query.csv", "mask_attr_negative.csv",
                           "pseudo_gt_query_c0.csv", "pseudo_gt_negative_c1.csv"}) {
    CHECK(std::filesystem::exists(dir / name));
  }
  std::filesystem::remove_all(dir);
}
