#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sirnet/commands.hpp"
#include "sirnet/errors.hpp"

namespace {

template <class T>
std::optional<T> given(const CLI::Option* opt, const T& value) {
  return opt->count() > 0 ? std::optional<T>(value) : std::nullopt;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SirNet metric-learning engine"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "Train from a config file");
  std::string train_config;
  std::uint64_t train_seed = 0;
  std::string train_out, train_resume;
  auto* train_config_opt = train->add_option("--config", train_config, "Config file")->check(CLI::ExistingFile);
  auto* train_seed_opt = train->add_option("--seed", train_seed, "Overrides train.seed and network.init_seed");
  auto* train_out_opt = train->add_option("--out", train_out, "Output directory");
  auto* train_resume_opt =
      train->add_option("--resume", train_resume, "Continue from a checkpoint manifest")->check(CLI::ExistingFile);
  train_config_opt->excludes(train_resume_opt);
  train_seed_opt->excludes(train_resume_opt);

  auto* eval = app.add_subcommand("eval", "Score retrieval on a dataset");
  sirnet::EvalArgs eval_args;
  std::string eval_ckpt, eval_data, eval_rankings;
  double eval_alpha = 0.0;
  bool eval_flip = true;
  eval->add_option("--ckpt", eval_ckpt, "Checkpoint manifest")->required();
  eval->add_option("--data", eval_data, "Dataset directory or manifest")->required();
  auto* alpha_opt = eval->add_option("--alpha", eval_alpha, "Weight of pooled backbone features");
  auto* flip_opt = eval->add_option("--flip", eval_flip, "Average with mirrored images (true/false)");
  auto* rankings_opt = eval->add_option("--rankings", eval_rankings, "Write ranked lists as CSV");
  eval->add_flag("--gallery-query", eval_args.gallery_is_query, "Use the query split as gallery");

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every loss");
  sirnet::GradCheckArgs gc_args;
  gradcheck->add_option("--seed", gc_args.seed, "Probe seed");
  gradcheck->add_option("--tol", gc_args.tolerance, "Relative tolerance")->check(CLI::PositiveNumber);

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset");
  sirnet::SynthArgs synth_args;
  std::string synth_out;
  synth->add_option("--ids", synth_args.ids, "Identities");
  synth->add_option("--per-id", synth_args.per_id, "Samples per identity");
  synth->add_option("--seed", synth_args.seed, "Generator seed");
  synth->add_option("--out", synth_out, "Output directory")->required();

  auto* exporter = app.add_subcommand("export-embeddings", "Write e_I/e_A of every sample as CSV");
  std::string export_ckpt, export_data, export_out;
  exporter->add_option("--ckpt", export_ckpt, "Checkpoint manifest")->required();
  exporter->add_option("--data", export_data, "Dataset directory or manifest")->required();
  exporter->add_option("--out", export_out, "CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? sirnet::kExitOk : sirnet::kExitUsage;
  }

  try {
    if (*train) {
      if (train_config_opt->count() == 0 && train_resume_opt->count() == 0) {
        std::cerr << "train: one of --config or --resume is required\n";
        return sirnet::kExitUsage;
      }
      sirnet::TrainArgs args;
      args.config = train_config;
      args.seed = given(train_seed_opt, train_seed);
      if (train_out_opt->count() > 0) args.out = train_out;
      if (train_resume_opt->count() > 0) args.resume = train_resume;
      return sirnet::cmd_train(args, std::cerr);
    }
    if (*eval) {
      eval_args.checkpoint = eval_ckpt;
      eval_args.data = eval_data;
      eval_args.alpha = given(alpha_opt, eval_alpha);
      eval_args.flip = given(flip_opt, eval_flip);
      if (rankings_opt->count() > 0) eval_args.rankings = eval_rankings;
      return sirnet::cmd_eval(eval_args, std::cout);
    }
    if (*gradcheck) return sirnet::cmd_gradcheck(gc_args, std::cout);
    if (*synth) {
      synth_args.out = synth_out;
      return sirnet::cmd_synth(synth_args, std::cerr);
    }
    if (*exporter) {
      return sirnet::cmd_export_embeddings({export_ckpt, export_data, export_out}, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sirnet::kExitUsage;
  }
  return sirnet::kExitUsage;
}
