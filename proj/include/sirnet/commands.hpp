#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>

namespace sirnet {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitVerification = 2 };

struct TrainArgs {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::filesystem::path> resume;
};
/// Writes <out>/loss_log.csv, <out>/config.txt and <out>/checkpoint.manifest
/// (+ .bin), plus <out>/checkpoint_step<N>.manifest every checkpoint_every
/// steps.
int cmd_train(const TrainArgs& args, std::ostream& log);

struct EvalArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::optional<double> alpha;
  std::optional<bool> flip;
  std::optional<std::filesystem::path> rankings;
  bool gallery_is_query = false;
};
/// Prints the metrics JSON to `out`.
int cmd_eval(const EvalArgs& args, std::ostream& out);

struct GradCheckArgs {
  std::uint64_t seed = 0;
  double tolerance = 1e-4;
};
int cmd_gradcheck(const GradCheckArgs& args, std::ostream& out);

struct SynthArgs {
  std::size_t ids = 10;
  std::size_t per_id = 20;
  std::uint64_t seed = 1;
  std::filesystem::path out;
};
int cmd_synth(const SynthArgs& args, std::ostream& log);

struct ExportArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path data;
  std::filesystem::path out;
};
/// CSV columns: sample_id,label,eI_0..,eA_0.., one row per dataset sample.
int cmd_export_embeddings(const ExportArgs& args, std::ostream& log);

}  // namespace sirnet
