#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "sirnet/gradcheck.hpp"
#include "sirnet/losses.hpp"
#include "sirnet/ops.hpp"

using namespace sirnet;

namespace {

Tensor rows(std::size_t n, std::size_t d, std::vector<double> v, bool grad = false) {
  return Tensor({n, d}, std::move(v), grad);
}

Tensor random_rows(std::size_t n, std::size_t d, Rng& rng, double lo, double hi, bool grad = false) {
  std::vector<double> v(n * d);
  for (auto& x : v) x = uniform(rng, lo, hi);
  return rows(n, d, std::move(v), grad);
}

TripletBatch make_batch(Tensor q, Tensor p, Tensor n, std::vector<std::size_t> yq,
                        std::vector<std::size_t> yn) {
  const auto attr = Tensor::zeros({q.dim(0), 1});
  return {{std::move(q), attr}, {std::move(p), attr}, {std::move(n), attr}, std::move(yq),
          std::move(yn)};
}

Tensor permute_rows(const Tensor& t, const std::vector<std::size_t>& order) {
  const auto d = t.dim(1);
  std::vector<double> v;
  for (auto r : order) v.insert(v.end(), t.data().begin() + r * d, t.data().begin() + (r + 1) * d);
  return rows(t.dim(0), d, std::move(v));
}

}  // namespace

TEST_CASE("triplet loss examples") {
  Rng rng(21);
  const auto e = random_rows(3, 5, rng, -1, 1);
  CHECK(triplet_loss(make_batch(e, e, e, {0, 1, 2}, {1, 2, 0}), 0.9).item() ==
        doctest::Approx(0.9).epsilon(1e-15));
  const auto hand = make_batch(rows(1, 2, {1, 0}), rows(1, 2, {0, 1}), rows(1, 2, {1, 1}), {0}, {1});
  CHECK(triplet_loss(hand, 0.9).item() == doctest::Approx(1.9).epsilon(1e-15));
  // negative is far enough away: hinge inactive everywhere
  const auto easy = make_batch(rows(2, 2, {0, 0, 1, 1}), rows(2, 2, {0.1, 0, 1, 1.1}),
                               rows(2, 2, {3, 0, -2, 1}), {0, 1}, {1, 0});
  CHECK(triplet_loss(easy, 0.9).item() == 0.0);
}

TEST_CASE("triplet loss is non-negative and batch-order invariant") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + uniform_index(rng, 6);
    const auto q = random_rows(n, 4, rng, -1, 1);
    const auto p = random_rows(n, 4, rng, -1, 1);
    const auto neg = random_rows(n, 4, rng, -1, 1);
    std::vector<std::size_t> yq(n), yn(n);
    for (std::size_t j = 0; j < n; ++j) {
      yq[j] = j;
      yn[j] = j + 1;
    }
    const double loss = triplet_loss(make_batch(q, p, neg, yq, yn), 0.9).item();
    CHECK(loss >= 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::reverse(order.begin(), order.end());
    std::vector<std::size_t> ryq(yq.rbegin(), yq.rend()), ryn(yn.rbegin(), yn.rend());
    const double permuted = triplet_loss(make_batch(permute_rows(q, order), permute_rows(p, order),
                                                    permute_rows(neg, order), ryq, ryn),
                                         0.9)
                                .item();
    CHECK(permuted == doctest::Approx(loss).epsilon(1e-14));
  }
}

TEST_CASE("triplet batch contract") {
  const auto e = rows(1, 2, {0, 0});
  CHECK_THROWS_AS(triplet_loss(make_batch(e, e, e, {3}, {3}), 0.9), ContractError);
  CHECK_THROWS_AS(triplet_loss(make_batch(e, e, e, {}, {}), 0.9), ContractError);
  CHECK_THROWS_AS(triplet_loss(make_batch(e, rows(1, 3, {0, 0, 0}), e, {0}, {1}), 0.9),
                  DimensionError);
}

TEST_CASE("triplet loss gradcheck inside the active hinge region") {
  Rng rng(8);
  const auto q = random_rows(3, 4, rng, -0.15, 0.15, true);
  const auto p = random_rows(3, 4, rng, -0.15, 0.15, true);
  const auto n = random_rows(3, 4, rng, -0.15, 0.15, true);
  const TensorFunction f = [](const std::vector<Tensor>& in) {
    return triplet_loss(make_batch(in[0], in[1], in[2], {0, 1, 2}, {1, 2, 0}), 0.9);
  };
  const auto report = grad_check(f, {q, p, n});
  CHECK(report.passed);
  CHECK(report.min_kink_gap > 0.1);  // all hinges strictly active
}

TEST_CASE("sim loss examples") {
  SUBCASE("single center") {
    ClusterRegistry registry;
    registry.assign({{4, {0.3, -0.2}}}, 0);
    const std::vector<std::size_t> labels{4};
    CHECK(sim_loss(rows(1, 2, {0.9, 0.1}), labels, registry).item() == 0.0);
  }
  SUBCASE("equidistant centers and moving onto the own center") {
    ClusterRegistry registry;
    registry.assign({{0, {1.0, 0.0}}, {1, {-1.0, 0.0}}}, 0);
    const std::vector<std::size_t> labels{0};
    const double at_origin = sim_loss(rows(1, 2, {0, 0}), labels, registry).item();
    CHECK(std::abs(at_origin - std::log(2.0)) <= 1e-12);
    const double on_center = sim_loss(rows(1, 2, {1, 0}), labels, registry).item();
    CHECK(on_center < at_origin);
    CHECK(on_center == doctest::Approx(std::log1p(std::exp(-4.0))).epsilon(1e-14));
  }
}

TEST_CASE("sim loss matches a direct softmax over centers") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t classes = 2 + uniform_index(rng, 5);
    const std::size_t d = 1 + uniform_index(rng, 4);
    const std::size_t n = 1 + uniform_index(rng, 4);
    CenterMap centers;
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t k = 0; k < d; ++k) centers[c].push_back(uniform(rng, -1, 1));
    }
    ClusterRegistry registry;
    registry.assign(centers, 0);
    const auto e = random_rows(n, d, rng, -1, 1);
    std::vector<std::size_t> labels(n);
    for (auto& y : labels) y = uniform_index(rng, classes);

    double expected = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> dist(classes);
      for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t k = 0; k < d; ++k) {
          const double diff = e.at(j * d + k) - centers[c][k];
          dist[c] += diff * diff;
        }
      }
      double z = 0.0;
      for (double v : dist) z += std::exp(-v);
      expected += -std::log(std::exp(-dist[labels[j]]) / z);
    }
    expected /= static_cast<double>(n);
    CHECK(sim_loss(e, labels, registry).item() == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("sim loss treats centers as constants and rejects unknown labels") {
  ClusterRegistry registry;
  registry.assign({{0, {1.0}}, {1, {-1.0}}}, 0);
  const std::vector<std::size_t> unknown{7};
  CHECK_THROWS_AS(sim_loss(rows(1, 1, {0}), unknown, registry), ContractError);
  CHECK_THROWS_AS(sim_loss(rows(1, 1, {0}), std::vector<std::size_t>{0}, ClusterRegistry{}),
                  ContractError);
  const auto e = rows(1, 1, {0.2}, true);
  const std::vector<std::size_t> labels{0};
  backward(sim_loss(e, labels, registry));
  CHECK(e.has_grad());
  CHECK(registry.center(0)[0] == 1.0);
}

TEST_CASE("cross entropy examples") {
  const std::vector<std::size_t> labels{0, 4, 9};
  CHECK(std::abs(cross_entropy(Tensor::full({3, 10}, -3.5), labels).item() - std::log(10.0)) <=
        1e-12);
  std::vector<double> logits(10, 0.0);
  logits[6] = 20.0;
  const std::vector<std::size_t> six{6};
  CHECK(cls_loss(rows(1, 10, logits), six).item() < 1e-6);
  CHECK(cam_loss(rows(1, 10, logits), six).item() < 1e-6);
  CHECK_THROWS_AS(cross_entropy(rows(1, 10, logits), std::vector<std::size_t>{10}), ContractError);
}

TEST_CASE("cross entropy is batch-order invariant and stable for huge logits") {
  Rng rng(6);
  const auto logits = random_rows(4, 5, rng, -3, 3);
  const std::vector<std::size_t> labels{1, 0, 4, 2};
  const std::vector<std::size_t> order{2, 0, 3, 1};
  std::vector<std::size_t> permuted_labels;
  for (auto r : order) permuted_labels.push_back(labels[r]);
  CHECK(cross_entropy(permute_rows(logits, order), permuted_labels).item() ==
        doctest::Approx(cross_entropy(logits, labels).item()).epsilon(1e-14));
  const auto huge = cross_entropy(rows(1, 3, {1e6, -1e6, 0}), std::vector<std::size_t>{1}).item();
  CHECK(std::isfinite(huge));
  CHECK(huge == doctest::Approx(2e6));
}

TEST_CASE("positive augmentation loss examples") {
  const auto target = Tensor::full({2, 6}, 0.25);
  PositiveAugmentation exact{target, target, target};
  CHECK(pos_aug_loss(exact, target, target).item() == 0.0);
  const auto half = Tensor::full({2, 6}, 0.5);
  PositiveAugmentation constant{half, half, half};
  CHECK(pos_aug_loss(constant, target, target).item() == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(mean_abs_error(half, target).item() == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("reconstruction loss is invariant to a shared spatial permutation") {
  Rng rng(30);
  const auto out = random_rows(2, 8, rng, 0, 1);
  const auto target = random_rows(2, 8, rng, 0, 1);
  std::vector<std::size_t> perm(8);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t i = 8; i > 1; --i) std::swap(perm[i - 1], perm[uniform_index(rng, i)]);
  auto shuffle = [&](const Tensor& t) {
    std::vector<double> v(t.numel());
    for (std::size_t r = 0; r < 2; ++r) {
      for (std::size_t c = 0; c < 8; ++c) v[r * 8 + c] = t.at(r * 8 + perm[c]);
    }
    return rows(2, 8, std::move(v));
  };
  CHECK(mean_abs_error(shuffle(out), shuffle(target)).item() ==
        doctest::Approx(mean_abs_error(out, target).item()).epsilon(1e-14));
}

TEST_CASE("reconstruction targets receive no gradient") {
  const auto out = rows(1, 2, {0.5, 0.5}, true);
  const auto target = rows(1, 2, {0.0, 1.0}, true);
  backward(mean_abs_error(out, target));
  CHECK(out.has_grad());
  CHECK_FALSE(target.has_grad());
}

TEST_CASE("negative augmentation loss examples") {
  const auto gt = Tensor::full({1, 4}, 0.3);
  CHECK(neg_aug_loss({gt, gt}, gt, gt).item() == 0.0);
  // all-zero taps against all-ones on k of K cells
  const std::size_t k = 3, total = 8;
  std::vector<double> v(total, 0.0);
  for (std::size_t i = 0; i < k; ++i) v[i * 2] = 1.0;
  const auto target = rows(1, total, v);
  const auto zero = Tensor::zeros({1, total});
  CHECK(mean_abs_error(zero, target).item() == doctest::Approx(3.0 / 8.0).epsilon(1e-15));
  CHECK(neg_aug_loss({zero, zero}, target, target).item() == doctest::Approx(6.0 / 8.0).epsilon(1e-15));
}

TEST_CASE("total loss examples") {
  const LossWeights w;
  auto all = [](double v) {
    return LossTerms{Tensor::scalar(v), Tensor::scalar(v), Tensor::scalar(v),
                     Tensor::scalar(v), Tensor::scalar(v), Tensor::scalar(v)};
  };
  CHECK(total_loss(all(0.0), w).item() == 0.0);
  CHECK(std::abs(total_loss(all(1.0), w).item() - 2.5502) <= 1e-12);

  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    LossTerms terms{Tensor::scalar(uniform01(rng)), Tensor::scalar(uniform01(rng)),
                    Tensor::scalar(uniform01(rng)), Tensor::scalar(uniform01(rng)),
                    Tensor::scalar(uniform01(rng)), Tensor::scalar(uniform01(rng))};
    auto doubled = w;
    doubled.tri *= 2.0;
    CHECK(total_loss(terms, doubled).item() - total_loss(terms, w).item() ==
          doctest::Approx(terms.tri.item()).epsilon(1e-12));
  }
}

TEST_CASE("loss weight defaults and validation") {
  const LossWeights w;
  CHECK(w.id == 1.0);
  CHECK(w.rec == 1.0);
  CHECK(w.cls == 0.05);
  CHECK(w.tri == 1.0);
  CHECK(w.sim == 0.5);
  CHECK(w.aug_pos == 0.0001);
  CHECK(w.aug_neg == 0.0001);
  CHECK(w.cam == 1.0);
  CHECK(w.margin == 0.9);
  auto bad = w;
  bad.sim = -0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
