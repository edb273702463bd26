// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "../support/oracles.hpp"
#include "sirnet/cam_augment.hpp"
#include "sirnet/cluster_registry.hpp"
#include "sirnet/kv_io.hpp"
#include "sirnet/losses.hpp"
#include "sirnet/retrieval.hpp"
#include "sirnet/trainer.hpp"
#include "sirnet/verification.hpp"

using namespace sirnet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(double v) { return format_double(v); }

Outcome gradient_integrity() {
  const auto start = Clock::now();
  const auto results = run_gradcheck_suite();
  const double elapsed = seconds_since(start);
  const std::set<std::string> expected{"tri", "sim", "cls", "cam", "aug_pos", "aug_neg"};
  std::set<std::string> seen;
  bool ok = elapsed < 60.0;
  std::string detail;
  for (const auto& r : results) {
    seen.insert(r.name);
    ok = ok && r.passed();
    detail += r.name + "=" + fmt(r.report.max_rel_error) + (r.passed() ? " " : "(FAIL) ");
  }
  ok = ok && seen == expected && results.size() == expected.size();
  return {ok, detail + "tol=1e-4 time=" + fmt(elapsed) + "s"};
}

Tensor rows(std::size_t n, std::size_t d, std::vector<double> v) { return Tensor({n, d}, std::move(v)); }

Outcome analytic_values() {
  std::vector<std::string> failures;
  auto expect = [&](const std::string& name, double got, double want, double tol) {
    if (!(std::abs(got - want) <= tol)) failures.push_back(name + " got " + fmt(got));
  };
  const LossWeights defaults;

  {
    Rng rng(11);
    std::vector<double> e(3 * 4);
    for (auto& x : e) x = uniform(rng, -0.5, 0.5);
    const auto id = rows(3, 4, e);
    const auto attr = Tensor::zeros({3, 2});
    TripletBatch batch{{id, attr}, {id, attr}, {id, attr}, {0, 1, 2}, {1, 2, 0}};
    expect("triplet degenerate", triplet_loss(batch, defaults.margin).item(), 0.9, 1e-12);
  }
  {
    const auto attr = Tensor::zeros({1, 1});
    TripletBatch batch{{rows(1, 2, {1, 0}), attr},
                       {rows(1, 2, {0, 1}), attr},
                       {rows(1, 2, {1, 1}), attr},
                       {0},
                       {1}};
    expect("triplet hand example", triplet_loss(batch, 0.9).item(), 1.9, 1e-12);
  }
  {
    ClusterRegistry registry;
    registry.assign({{0, {1.0, 0.0}}, {1, {-1.0, 0.0}}}, 0);
    const std::vector<std::size_t> labels{0};
    expect("sim equidistant", sim_loss(rows(1, 2, {0, 0}), labels, registry).item(), std::log(2.0),
           1e-12);
  }
  {
    const std::vector<std::size_t> labels{3, 7};
    expect("uniform cross-entropy", cross_entropy(Tensor::full({2, 10}, 0.25), labels).item(),
           std::log(10.0), 1e-12);
  }
  {
    const auto one = [] { return Tensor::scalar(1.0); };
    LossTerms terms{one(), one(), one(), one(), one(), one()};
    expect("unit total", total_loss(terms, defaults).item(), 2.5502, 1e-12);
  }
  std::string detail = failures.empty() ? "0.9, 1.9, ln2, ln10, 2.5502 reproduced" : "";
  for (const auto& f : failures) detail += f + "; ";
  return {failures.empty(), detail};
}

Outcome mask_oracle() {
  Rng rng(2024);
  std::size_t gt_mismatches = 0;
  std::size_t partition_violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const ImageShape shape{1 + uniform_index(rng, 4), 1 + uniform_index(rng, 5),
                           1 + uniform_index(rng, 5)};
    const auto cells = shape.spatial();
    // Small integer levels make ties with the mean common.
    auto random_cam = [&] {
      std::vector<double> v(cells);
      const bool integer = bernoulli(rng, 0.5);
      for (auto& x : v) x = integer ? static_cast<double>(uniform_index(rng, 4)) : uniform(rng, -2, 2);
      return Tensor::matrix(shape.height, shape.width, std::move(v));
    };
    const auto art_q = build_cam_artifacts(random_cam());
    const auto art_n = build_cam_artifacts(random_cam());
    std::vector<double> fq(shape.numel()), fn(shape.numel());
    for (auto& x : fq) x = uniform(rng, 0, 1);
    for (auto& x : fn) x = uniform(rng, 0, 1);
    const auto got = build_pseudo_gt(fq, fn, art_q, art_n, shape);
    const auto want = oracle::pseudo_targets(fq, fn, art_q.id_mask, art_q.attr_mask, art_n.id_mask,
                                             art_n.attr_mask, shape.channels, shape.height,
                                             shape.width);
    if (got.query_target != want.query || got.negative_target != want.negative) ++gt_mismatches;
  }
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t h = 1 + uniform_index(rng, 6);
    const std::size_t w = 1 + uniform_index(rng, 6);
    std::vector<double> v(h * w);
    for (auto& x : v) x = uniform(rng, -3, 3);
    const auto art = build_cam_artifacts(Tensor::matrix(h, w, v));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    bool ok = std::abs(art.threshold - mean) <= 1e-12;
    for (std::size_t i = 0; i < v.size(); ++i) {
      ok = ok && art.id_mask[i] + art.attr_mask[i] == 1 && (art.id_mask[i] == 1) == (v[i] >= art.threshold);
    }
    if (!ok) ++partition_violations;
  }
  return {gt_mismatches == 0 && partition_violations == 0,
          "pseudo-GT mismatches " + std::to_string(gt_mismatches) + "/1000, partition violations " +
              std::to_string(partition_violations) + "/1000"};
}

Outcome metric_oracle() {
  Rng rng(99);
  std::size_t mismatches = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t g = 1 + uniform_index(rng, 8);
    const std::size_t nq = 1 + uniform_index(rng, 4);
    const std::size_t classes = 1 + uniform_index(rng, 3);
    std::vector<std::size_t> gallery(g), queries(nq);
    for (auto& y : gallery) y = uniform_index(rng, classes);
    for (auto& y : queries) y = uniform_index(rng, classes + 1);
    std::vector<std::vector<std::size_t>> rankings(nq, std::vector<std::size_t>(g));
    for (auto& r : rankings) {
      std::iota(r.begin(), r.end(), 0);
      for (std::size_t i = g; i > 1; --i) std::swap(r[i - 1], r[uniform_index(rng, i)]);
    }
    const auto got = cmc_and_map(rankings, queries, gallery);
    const auto want = oracle::retrieval(rankings, queries, gallery);
    double err = std::abs(got.map - want.map);
    for (std::size_t k = 0; k < g; ++k) err = std::max(err, std::abs(got.cmc[k] - want.cmc[k]));
    worst = std::max(worst, err);
    if (!(err <= 1e-12) || got.cmc.size() != g) ++mismatches;
  }
  const std::vector<std::size_t> query_labels{0};
  const std::vector<std::size_t> gallery_labels{0, 1, 0};
  const auto example = cmc_and_map({{0, 1, 2}}, query_labels, gallery_labels);
  const bool example_ok = std::abs(example.map - 5.0 / 6.0) <= 1e-12;
  return {mismatches == 0 && example_ok,
          "mismatches " + std::to_string(mismatches) + "/1000 (max err " + fmt(worst) +
              "), AP example " + fmt(example.map)};
}

struct RunSummary {
  double rank1 = 0.0;
  double map = 0.0;
  double center_distance = 0.0;
  double seconds = 0.0;
};

RunSummary train_and_score(const RunConfig& config, const Dataset& data) {
  const auto start = Clock::now();
  Trainer trainer(config, data);
  trainer.run();
  RunSummary s;
  s.seconds = seconds_since(start);
  const auto result =
      evaluate_retrieval(trainer.model(), data, config.eval.alpha, config.eval.flip);
  s.rank1 = result.rank(1);
  s.map = result.map;
  std::vector<std::size_t> held_out = data.query;
  held_out.insert(held_out.end(), data.gallery.begin(), data.gallery.end());
  s.center_distance = mean_center_distance(trainer.model(), data, held_out);
  return s;
}

Outcome behavioral_reproduction() {
  const RunConfig config;
  const auto data = resolve_dataset(config);
  const auto s = train_and_score(config, data);
  const bool ok = config.train.total_steps() == 2000 && s.rank1 >= 0.90 && s.map >= 0.80 &&
                  s.seconds < 300.0;
  return {ok, "steps=" + std::to_string(config.train.total_steps()) + " rank1=" + fmt(s.rank1) +
                  " (>=0.90) mAP=" + fmt(s.map) + " (>=0.80) time=" + fmt(s.seconds) + "s"};
}

Outcome ablation_direction() {
  const RunConfig base;
  const auto data = resolve_dataset(base);
  struct Variant {
    const char* name;
    std::function<void(RunConfig&)> apply;
    double rank1 = 0.0;
    double center_distance = 0.0;
  };
  std::vector<Variant> variants{
      {"cls+tri", [](RunConfig& c) { c.loss.sim = 0.0; c.loss.rec = 0.0; }},
      {"cls+tri+sim", [](RunConfig& c) { c.loss.rec = 0.0; }},
      {"full", [](RunConfig&) {}},
  };
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  for (auto& v : variants) {
    for (auto seed : seeds) {
      auto config = base;
      config.train.seed = seed;
      config.network.init_seed = seed;
      v.apply(config);
      const auto s = train_and_score(config, data);
      v.rank1 += s.rank1 / static_cast<double>(seeds.size());
      v.center_distance += s.center_distance / static_cast<double>(seeds.size());
    }
  }
  const bool order = variants[0].rank1 <= variants[1].rank1 && variants[1].rank1 <= variants[2].rank1;
  const bool tighter = variants[1].center_distance < variants[0].center_distance &&
                       variants[2].center_distance < variants[0].center_distance;
  std::string detail;
  for (const auto& v : variants) {
    detail += std::string(v.name) + ": rank1=" + fmt(v.rank1) + " center_dist=" + fmt(v.center_distance) + "; ";
  }
  return {order && tighter, detail + "seeds 1-5"};
}

Outcome determinism_and_resume() {
  RunConfig config;
  config.train.epochs = 5;  // 100 steps, five center refreshes
  const auto data = resolve_dataset(config);

  auto log_of = [](Trainer& t, std::size_t steps) {
    std::vector<std::string> log;
    for (std::size_t i = 0; i < steps; ++i) log.push_back(loss_log_row(t.step()));
    return log;
  };
  Trainer a(config, data);
  Trainer b(config, data);
  const auto log_a = log_of(a, config.train.total_steps());
  const auto log_b = log_of(b, config.train.total_steps());
  const bool identical = log_a == log_b;

  const auto dir = std::filesystem::temp_directory_path() / "sirnet_acceptance_resume";
  std::filesystem::remove_all(dir);
  Trainer first(config, data);
  auto log_c = log_of(first, 47);
  first.save(dir / "checkpoint.manifest");
  auto resumed = Trainer::resume(dir / "checkpoint.manifest", data);
  const auto rest = log_of(resumed, config.train.total_steps() - 47);
  log_c.insert(log_c.end(), rest.begin(), rest.end());
  bool same_params = true;
  const auto pa = a.model().parameters();
  const auto pr = resumed.model().parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const auto x = pa[i].data();
    const auto y = pr[i].data();
    same_params = same_params && std::equal(x.begin(), x.end(), y.begin(), y.end());
  }
  std::filesystem::remove_all(dir);
  const bool resume_ok = log_c == log_a && same_params;
  return {identical && resume_ok,
          std::string("repeat run ") + (identical ? "bit-identical" : "DIFFERS") +
              ", resume at step 47 " + (resume_ok ? "bit-identical" : "DIFFERS") + " over " +
              std::to_string(log_a.size()) + " steps"};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient integrity", gradient_integrity},
      {"analytic loss values", analytic_values},
      {"mask / pseudo-GT oracle", mask_oracle},
      {"metric oracle", metric_oracle},
      {"behavioral reproduction", behavioral_reproduction},
      {"ablation direction", ablation_direction},
      {"determinism and resume", determinism_and_resume},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %zu [%s] %s: %s\n", i + 1, outcome.passed ? "PASS" : "FAIL",
                criteria[i].first, outcome.detail.c_str());
    std::fflush(stdout);
    if (!outcome.passed) ++failed;
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
