#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mspc/config.hpp"
#include "mspc/datasets.hpp"

namespace mspc {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2, kExitNumerical = 3 };

struct CommandOptions {
  std::string config;
  std::string out;         ///< overrides output.dir when non-empty
  std::string checkpoint;
  std::optional<uint64_t> seed;  ///< overrides train.seed
};

/// Loads the config and applies the command-line overrides.
ExperimentConfig resolve_config(const CommandOptions& opts);

TaskDataset make_task(const TaskConfig& task);

/// Final-state evaluation of one trained model set.
struct RunSummary {
  std::optional<GroundTruthError> gt;
  AlignmentTable table;
};

RunSummary summarize_run(const ModelSet<float>& models, const TaskDataset& data, const EvalConfig& eval);

struct CompareCell {
  std::string regularizer;
  uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunSummary summary;
};

/// Trains every (regularizer x seed) cell under out_dir/<reg>_seed<seed>/ with
/// up to `threads` cells in flight. Failures are recorded per cell.
std::vector<CompareCell> run_comparison(const ExperimentConfig& cfg, const std::string& out_dir, int threads);

/// Each command reports progress on `out` and problems on `err`, and returns
/// an ExitCode.
int cmd_train(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_warp(const std::string& image_path, const std::string& grid_path, const std::string& out_path,
             std::ostream& err);
int cmd_compare(const CommandOptions& opts, std::ostream& out, std::ostream& err);
int cmd_make_dataset(const CommandOptions& opts, std::ostream& out, std::ostream& err);

}  // namespace mspc
