#include <filesystem>
#include <limits>

#include "doctest.h"
#include "sirnet/checkpoint.hpp"
#include "sirnet/config.hpp"
#include "sirnet/kv_io.hpp"

using namespace sirnet;

TEST_CASE("doubles round-trip through their text form") {
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::ldexp(uniform(rng, -1, 1), static_cast<int>(uniform_index(rng, 80)) - 40);
    CHECK(parse_double(format_double(v), "test") == v);
  }
  CHECK(parse_double(format_double(0.1), "test") == 0.1);
  CHECK_THROWS_AS(parse_double("1.5x", "test"), ConfigError);
  CHECK_THROWS_AS(parse_uint("-3", "test"), ConfigError);
  CHECK(parse_bool("true", "t"));
  CHECK_FALSE(parse_bool("false", "t"));
}

TEST_CASE("key value files") {
  const auto kv = KeyValueFile::parse("# comment\n\na = 1\nb=x y\n");
  CHECK(kv.get("a") == "1");
  CHECK(kv.get("b") == "x y");
  CHECK_FALSE(kv.contains("c"));
  CHECK_THROWS_AS(kv.get("c"), ConfigError);
  CHECK_THROWS_AS(KeyValueFile::parse("a=1\na=2\n"), ConfigError);
  CHECK_THROWS_AS(KeyValueFile::parse("novalue\n"), ConfigError);
  CHECK(KeyValueFile::parse(kv.serialize()).entries() == kv.entries());
  CHECK(parse_indices(join_indices(std::vector<std::size_t>{3, 0, 12}), "i") ==
        std::vector<std::size_t>{3, 0, 12});
}

TEST_CASE("default config matches the published settings") {
  const RunConfig c;
  CHECK(c.loss.id == 1.0);
  CHECK(c.loss.rec == 1.0);
  CHECK(c.loss.cls == 0.05);
  CHECK(c.loss.tri == 1.0);
  CHECK(c.loss.sim == 0.5);
  CHECK(c.loss.aug_pos == 1e-4);
  CHECK(c.loss.aug_neg == 1e-4);
  CHECK(c.loss.cam == 1.0);
  CHECK(c.loss.margin == 0.9);
  CHECK(c.optim.learning_rate == 2e-4);
  CHECK(c.optim.beta1 == 0.9);
  CHECK(c.optim.beta2 == 0.999);
  CHECK(c.eval.alpha == 0.55);
  CHECK(c.train.grayscale_prob == 0.1);
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("config round trip and overrides") {
  RunConfig c;
  c.loss.sim = 0.25;
  c.train.seed = 99;
  c.train.negative_attr = NegativeAttrSource::positive;
  c.eval.flip = false;
  c.output_dir = "somewhere";
  const auto back = parse_config(serialize_config(c));
  CHECK(back == c);

  const auto partial = parse_config(KeyValueFile::parse("loss.margin=0.5\n"));
  CHECK(partial.loss.margin == 0.5);
  CHECK(partial.loss.tri == 1.0);
  CHECK(config_keys().size() == serialize_config(c).entries().size());
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("loss.lambda_typo=1\n")), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("optim.lr=0\n")), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("optim.beta1=1\n")), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("loss.lambda_tri=-1\n")), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("train.batch_size=0\n")), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("train.negative_attr=other\n")), ConfigError);
  CHECK_THROWS_AS(parse_config(KeyValueFile::parse("data.ids=7\n")), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/run.conf"), ConfigError);
}

TEST_CASE("tensor archive round trip") {
  TensorArchive a;
  a.meta.set("note", "hello");
  a.add("w", {2, 3}, {1, 2, 3, 4, 5, 6});
  a.add("s", {}, {std::numeric_limits<double>::denorm_min()});
  a.add("v", {1}, {-0.1});
  const auto dir = std::filesystem::temp_directory_path() / "sirnet_archive_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  write_archive(a, dir / "ckpt.manifest");
  CHECK(std::filesystem::exists(dir / "ckpt.bin"));
  const auto b = read_archive(dir / "ckpt.manifest");
  CHECK(b.meta.get("note") == "hello");
  REQUIRE(b.entries.size() == 3);
  for (const auto& e : a.entries) {
    CHECK(b.get(e.name).shape == e.shape);
    CHECK(b.get(e.name).values == e.values);
  }
  CHECK_THROWS_AS(b.get("missing"), ConfigError);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(read_archive(dir / "ckpt.manifest"), ConfigError);
}
