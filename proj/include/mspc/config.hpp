#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mspc/constraints.hpp"
#include "mspc/metrics.hpp"
#include "mspc/networks.hpp"
#include "mspc/training.hpp"

namespace mspc {

// ---- raw document ---------------------------------------------------------------
//
// A strict subset of TOML:
//
//   # comment
//   [section]
//   key = "string" | 123 | -4.5e-3 | true | false | [1, 2] | ["a", "b"]
//
// Keys are bare words ([A-Za-z0-9_]). No nested tables, inline tables or
// multi-line values. Duplicate sections or keys are errors.

using ConfigScalar = std::variant<bool, int64_t, double, std::string>;

struct ConfigValue {
  std::variant<ConfigScalar, std::vector<ConfigScalar>> value;
  int line = 0;
};

struct ConfigDocument {
  std::string source;  ///< file name used in messages
  std::map<std::string, std::map<std::string, ConfigValue>> sections;
  std::map<std::string, int> section_lines;
};

/// Throws ConfigError("<source>:<line>: ...").
ConfigDocument parse_config_text(const std::string& text, const std::string& source = "<config>");

// ---- typed experiment config ------------------------------------------------------

struct TaskConfig {
  std::string name = "misaligned";  ///< shapes | misaligned | folder
  int n = 64;
  int size = 32;
  uint64_t seed = 0;
  double scale_gap = 1.5;
  double shift_gap = 0.1;
  std::string source_dir;
  std::string target_dir;
};

struct OutputConfig {
  std::string dir = "runs/default";
  int checkpoint_every = 0;
  int sample_every = 0;
};

struct EvalSection {
  EvalConfig metrics;
  int eval_every = 1;
};

struct CompareConfig {
  std::vector<std::string> regularizers;
  std::vector<uint64_t> seeds;
};

struct ExperimentConfig {
  TaskConfig task;
  NetworkConfig model;
  TrainConfig train;
  ConstraintConfig constraint;
  EvalSection eval;
  OutputConfig output;
  CompareConfig compare;

  /// Cross-field checks: every section's own validate(), model.image_size
  /// matches task.size, folder paths exist.
  void validate() const;
};

/// Parses, fills defaults, rejects unknown sections and keys, validates.
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& source = "<config>");
ExperimentConfig load_experiment_config(const std::string& path);

/// Canonical text of the sections that determine trained weights
/// (task, model, train, constraint); eval, output and compare are excluded.
std::string canonical_config(const ExperimentConfig& cfg);

/// FNV-1a 64 of canonical_config.
uint64_t config_digest(const ExperimentConfig& cfg);

std::string digest_hex(uint64_t digest);

}  // namespace mspc
