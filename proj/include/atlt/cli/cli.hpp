#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "atlt/data/dataset.hpp"
#include "atlt/eval/evalrig.hpp"
#include "atlt/train/trainer.hpp"

namespace atlt::cli {

// Exit codes. Every failure also prints one line to stderr of the form
//   atlt: error=<config|data|runtime> code=<n> msg=<text>
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitRuntime = 3;

/// Where the training and test splits come from.
///
///   synth  procedural data, long-tailed by `ir` (test split stays balanced)
///   idx    IDX image/label file pairs
///   cifar  CIFAR binary batch files
///   dir    the output directory of `make-dataset`
struct DataSource {
  std::string source = "synth";
  std::size_t num_classes = 10;
  std::size_t per_class = 500;
  std::size_t test_per_class = 100;
  std::size_t side = 16;
  std::size_t channels = 1;
  double ir = 1.0;
  std::filesystem::path train_images, train_labels, test_images, test_labels;
  std::vector<std::filesystem::path> train_files, test_files;
  std::filesystem::path path;
};

void to_json(nlohmann::json& j, const DataSource& d);
// Relative paths are resolved against `base`.
DataSource data_source_from_json(const nlohmann::json& j, const std::filesystem::path& base);

struct AblateBlock {
  std::vector<augment::SubsetSpec> subsets;
  std::size_t repeats = 5;
};

/// Everything one invocation needs. Top-level keys: "seed", "data", "train",
/// "eval", "ablate", "checkpoint", "out"; anything else is rejected.
struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataSource data;
  train::TrainConfig train;
  eval::SuiteConfig eval;
  AblateBlock ablate;
  std::filesystem::path checkpoint;
  std::filesystem::path out;

  nlohmann::json to_json() const;
  std::string digest() const;
};

ExperimentConfig load_experiment(const std::filesystem::path& path);
ExperimentConfig parse_experiment(const nlohmann::json& j, const std::filesystem::path& base);

// Applies a master seed: the trainer and evaluator take it directly, the
// dataset builder uses derive_seed(seed, "dataset").
void apply_seed(ExperimentConfig& config, std::uint64_t seed);

// Builds (train, test). Both splits are validated.
std::pair<data::ImageDataset, data::ImageDataset> load_data(const DataSource& source, std::uint64_t seed);

// Runs the command line and returns the exit code. Normal output goes to
// `out`, the one-line failure record to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace atlt::cli
