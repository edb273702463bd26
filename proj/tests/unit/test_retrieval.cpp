#include <algorithm>
#include <cmath>
#include <numeric>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "sirnet/data_synth.hpp"
#include "sirnet/retrieval.hpp"

using namespace sirnet;

namespace {

FusedEmbedding point(std::vector<double> v) { return FusedEmbedding{std::move(v), 0.55}; }

Tensor random_images(std::size_t rows, const ImageShape& s, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(rows * s.numel());
  for (auto& x : v) x = uniform01(rng);
  return Tensor::matrix(rows, s.numel(), std::move(v));
}

}  // namespace

TEST_CASE("fused embedding layout and alpha") {
  const NetworkConfig config;
  const SirNet model(config);
  const auto images = random_images(3, config.image, 1);
  const auto fused = embed_for_eval(model, images, 0.55, false);
  REQUIRE(fused.size() == 3);
  const auto d = config.id_dim + config.attr_dim;
  for (const auto& f : fused) CHECK(f.values.size() == d + config.features.channels);
  const auto plain = embed_for_eval(model, images, 0.0, false);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t k = d; k < plain[r].values.size(); ++k) CHECK(plain[r].values[k] == 0.0);
    for (std::size_t k = 0; k < d; ++k) CHECK(plain[r].values[k] == fused[r].values[k]);
  }
}

TEST_CASE("flip averaging is a no-op on mirror-symmetric images") {
  const NetworkConfig config;
  const SirNet model(config);
  const auto& s = config.image;
  Rng rng(4);
  std::vector<double> v(s.numel());
  for (std::size_t r = 0; r < s.height; ++r) {
    for (std::size_t x = 0; x <= s.width / 2; ++x) {
      const double p = uniform01(rng);
      v[r * s.width + x] = p;
      v[r * s.width + (s.width - 1 - x)] = p;
    }
  }
  const auto img = Tensor::matrix(1, s.numel(), v);
  const auto a = embed_for_eval(model, img, 0.55, false);
  const auto b = embed_for_eval(model, img, 0.55, true);
  for (std::size_t k = 0; k < a[0].values.size(); ++k) {
    CHECK(b[0].values[k] == doctest::Approx(a[0].values[k]).epsilon(1e-12));
  }
}

TEST_CASE("ranking examples") {
  const std::vector<FusedEmbedding> gallery{point({3}), point({1}), point({2})};
  const auto ranked = rank_gallery(point({0}), gallery);
  CHECK(ranked[0].gallery_index == 1);
  CHECK(ranked[1].gallery_index == 2);
  CHECK(ranked[2].gallery_index == 0);
  CHECK(ranked[2].distance == 3.0);

  const std::vector<FusedEmbedding> ties{point({1}), point({-1}), point({1})};
  const auto tied = rank_gallery(point({0}), ties);
  CHECK(tied[0].gallery_index == 0);
  CHECK(tied[1].gallery_index == 1);
  CHECK(tied[2].gallery_index == 2);

  CHECK_THROWS_AS(rank_gallery(point({0, 1}), gallery), DimensionError);
}

TEST_CASE("a query embedded in the gallery ranks itself first") {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<FusedEmbedding> gallery;
    for (int g = 0; g < 7; ++g) {
      std::vector<double> v(4);
      for (auto& x : v) x = uniform(rng, -1, 1);
      gallery.push_back(point(v));
    }
    const auto pick = uniform_index(rng, gallery.size());
    const auto ranked = rank_gallery(gallery[pick], gallery);
    CHECK(ranked[0].gallery_index == pick);
    CHECK(ranked[0].distance == 0.0);
  }
}

TEST_CASE("average precision examples") {
  const std::vector<std::size_t> q{1};
  const std::vector<std::size_t> g{1, 0, 1};
  auto r = cmc_and_map({{0, 1, 2}}, q, g);  // relevant at 1 and 3
  CHECK(r.map == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
  CHECK(r.rank(1) == 1.0);

  r = cmc_and_map({{1, 0, 2}}, q, g);  // relevant at 2 and 3
  CHECK(r.map == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0).epsilon(1e-15));
  CHECK(r.rank(1) == 0.0);
  CHECK(r.rank(2) == 1.0);

  r = cmc_and_map({{0, 2, 1}}, q, g);
  CHECK(r.map == 1.0);
}

TEST_CASE("queries without a relevant item count in cmc and are excluded from map") {
  const std::vector<std::size_t> q{1, 7};
  const std::vector<std::size_t> g{1, 0};
  const auto r = cmc_and_map({{0, 1}, {0, 1}}, q, g);
  CHECK(r.unmatched_queries == std::vector<std::size_t>{1});
  CHECK(r.map == 1.0);
  CHECK(r.rank(1) == 0.5);
  CHECK(r.num_queries == 2);
}

TEST_CASE("metrics agree with the brute-force oracle") {
  Rng rng(21);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t nq = 1 + uniform_index(rng, 4), ng = 1 + uniform_index(rng, 5);
    std::vector<std::size_t> ql(nq), gl(ng);
    for (auto& l : ql) l = uniform_index(rng, 3);
    for (auto& l : gl) l = uniform_index(rng, 3);
    std::vector<std::vector<std::size_t>> rankings(nq);
    for (auto& order : rankings) {
      order.resize(ng);
      std::iota(order.begin(), order.end(), 0);
      for (std::size_t i = ng; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    }
    const auto got = cmc_and_map(rankings, ql, gl);
    const auto want = oracle::retrieval(rankings, ql, gl);
    CHECK(got.map == doctest::Approx(want.map).epsilon(1e-12));
    REQUIRE(got.cmc.size() == want.cmc.size());
    for (std::size_t k = 0; k < got.cmc.size(); ++k) {
      CHECK(got.cmc[k] == doctest::Approx(want.cmc[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("evaluation with the query split as gallery matches itself") {
  const auto data = generate(DatasetManifest{});
  const SirNet model(NetworkConfig{});
  const auto r = evaluate_retrieval(model, data, 0.55, true, nullptr, true);
  CHECK(r.rank(1) == 1.0);
  CHECK(r.num_gallery == data.query.size());
}

TEST_CASE("metrics json carries the documented keys") {
  const auto r = cmc_and_map({{0}}, std::vector<std::size_t>{0}, std::vector<std::size_t>{0});
  const auto json = metrics_json(r, 0.55);
  for (const char* key : {"\"rank1\"", "\"rank5\"", "\"rank10\"", "\"map\"", "\"num_queries\"",
                          "\"num_gallery\"", "\"alpha\""}) {
    CHECK(json.find(key) != std::string::npos);
  }
}
