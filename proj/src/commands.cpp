#include "sirnet/commands.hpp"

#include <chrono>
#include <fstream>
#include <numeric>

#include "sirnet/config.hpp"
#include "sirnet/data_synth.hpp"
#include "sirnet/retrieval.hpp"
#include "sirnet/trainer.hpp"
#include "sirnet/verification.hpp"

namespace sirnet {
namespace {

std::ofstream open_output(const std::filesystem::path& path,
                          std::ios::openmode mode = std::ios::out) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, mode);
  if (!out) throw ConfigError("cannot write " + path.string());
  return out;
}

}  // namespace

int cmd_train(const TrainArgs& args, std::ostream& log) {
  const auto started = std::chrono::steady_clock::now();
  std::optional<Trainer> trainer;
  if (args.resume) {
    trainer.emplace(Trainer::resume(*args.resume));
  } else {
    auto config = load_config(args.config);
    if (args.seed) {
      config.train.seed = *args.seed;
      config.network.init_seed = *args.seed;
    }
    if (args.out) config.output_dir = args.out->string();
    trainer.emplace(config, resolve_dataset(config));
  }
  const std::filesystem::path out_dir =
      args.out ? *args.out : std::filesystem::path(trainer->config().output_dir);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw ConfigError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  serialize_config(trainer->config()).write(out_dir / "config.txt");
  const auto log_path = out_dir / "loss_log.csv";
  const bool append = args.resume.has_value() && std::filesystem::exists(log_path);
  auto loss_log = open_output(log_path, append ? std::ios::app : std::ios::out);
  if (!append) loss_log << loss_log_header() << '\n';

  const auto every = trainer->config().train.checkpoint_every;
  const auto per_epoch = trainer->config().train.steps_per_epoch;
  log << "training " << trainer->total_steps() << " steps from step " << trainer->steps_done()
      << " into " << out_dir.string() << '\n';
  trainer->run([&](const StepRecord& r) {
    loss_log << loss_log_row(r) << '\n';
    if (r.step % per_epoch == 0) {
      log << "epoch " << r.epoch + 1 << " step " << r.step << " total " << format_double(r.total)
          << '\n';
    }
    if (every > 0 && r.step % every == 0 && r.step < trainer->total_steps()) {
      trainer->save(out_dir / ("checkpoint_step" + std::to_string(r.step) + ".manifest"));
    }
  });
  loss_log.flush();
  trainer->save(out_dir / "checkpoint.manifest");
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  log << "done in " << format_double(elapsed.count()) << " s\n";
  return kExitOk;
}

int cmd_eval(const EvalArgs& args, std::ostream& out) {
  const auto loaded = load_model(args.checkpoint);
  const auto data = load_dataset(args.data);
  const double alpha = args.alpha.value_or(loaded.config.eval.alpha);
  const bool flip = args.flip.value_or(loaded.config.eval.flip);
  std::vector<std::vector<RankedItem>> rankings;
  const auto result =
      evaluate_retrieval(loaded.model, data, alpha, flip, &rankings, args.gallery_is_query);
  if (args.rankings) {
    auto csv = open_output(*args.rankings);
    write_rankings_csv(csv, rankings, data.query, args.gallery_is_query ? data.query : data.gallery);
  }
  out << metrics_json(result, alpha) << '\n';
  return kExitOk;
}

int cmd_gradcheck(const GradCheckArgs& args, std::ostream& out) {
  GradCheckSuiteOptions options;
  options.seed = args.seed;
  options.tolerance = args.tolerance;
  const auto results = run_gradcheck_suite(options);
  bool ok = true;
  for (const auto& r : results) {
    out << r.name << " max_rel_error=" << format_double(r.report.max_rel_error)
        << " coords=" << r.report.coords_checked << " draws=" << r.draws << ' '
        << (r.passed() ? "PASS" : (r.away_from_kinks ? "FAIL" : "FAIL (no draw away from kinks)"))
        << '\n';
    ok = ok && r.passed();
  }
  return ok ? kExitOk : kExitVerification;
}

int cmd_synth(const SynthArgs& args, std::ostream& log) {
  DatasetManifest manifest;
  manifest.num_identities = args.ids;
  manifest.samples_per_identity = args.per_id;
  manifest.seed = args.seed;
  const auto data = generate(manifest);
  save_dataset(data, args.out);
  log << "wrote " << data.size() << " images (" << data.train.size() << " train, "
      << data.query.size() << " query, " << data.gallery.size() << " gallery) to "
      << args.out.string() << '\n';
  return kExitOk;
}

int cmd_export_embeddings(const ExportArgs& args, std::ostream& log) {
  const auto loaded = load_model(args.checkpoint);
  const auto data = load_dataset(args.data);
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  DisentangledEmbedding emb;
  {
    NoGradGuard no_grad;
    emb = loaded.model.separate(loaded.model.backbone(data.batch(all)));
  }
  const auto d_id = emb.id.dim(1);
  const auto d_attr = emb.attr.dim(1);
  auto csv = open_output(args.out);
  csv << "sample_id,label";
  for (std::size_t k = 0; k < d_id; ++k) csv << ",eI_" << k;
  for (std::size_t k = 0; k < d_attr; ++k) csv << ",eA_" << k;
  csv << '\n';
  for (std::size_t i = 0; i < data.size(); ++i) {
    csv << i << ',' << data.labels[i];
    for (std::size_t k = 0; k < d_id; ++k) csv << ',' << format_double(emb.id.data()[i * d_id + k]);
    for (std::size_t k = 0; k < d_attr; ++k) {
      csv << ',' << format_double(emb.attr.data()[i * d_attr + k]);
    }
    csv << '\n';
  }
  log << "wrote " << data.size() << " embeddings to " << args.out.string() << '\n';
  return kExitOk;
}

}  // namespace sirnet
