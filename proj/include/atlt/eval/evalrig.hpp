#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "atlt/augment/augment.hpp"
#include "atlt/data/dataset.hpp"
#include "atlt/eval/accuracy.hpp"
#include "atlt/nets/model.hpp"
#include "atlt/train/trainer.hpp"

namespace atlt::eval {

/// Attacks run by evaluate_suite. Rows are always named Clean, FGSM, PGD-20
/// and CW-20 (the step count follows `steps`).
struct SuiteConfig {
  double epsilon = 8.0 / 255.0;
  double step_size = 2.0 / 255.0;
  int steps = 20;
  double kappa = 0.0;
  bool fgsm = true;
  bool pgd = true;
  bool cw = true;
  std::uint64_t seed = 0;
  std::size_t batch_size = 256;

  void validate() const;
};

void to_json(nlohmann::json& j, const SuiteConfig& c);
void from_json(const nlohmann::json& j, SuiteConfig& c);

/// Generic report: a key column plus named numeric columns.
struct Report {
  nlohmann::json meta = nlohmann::json::object();
  std::string key_column;
  std::vector<std::string> columns;
  std::vector<std::string> keys;
  std::vector<std::vector<double>> values;  // one row per key

  friend bool operator==(const Report&, const Report&) = default;
};

enum class ReportFormat { Csv, Json };

// CSV: header plus one line per row, values with two decimals.
// JSON: {"meta", "key_column", "columns", "rows": [{"key", "values"}]} with
// full precision. Throws ConfigError for an empty report and DataError when
// the file cannot be written.
std::string render_report(const Report& report, ReportFormat format);
void emit_report(const Report& report, const std::filesystem::path& path, ReportFormat format);
Report report_from_json(const nlohmann::json& j);
Report read_report_json(const std::filesystem::path& path);

struct MetricsRow {
  std::string attack;
  double accuracy = 0.0;  // percent

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;
  std::string checkpoint_id;
  std::string dataset_digest;
  double epsilon = 0.0;

  double at(const std::string& attack) const;
  Report to_report() const;
  static MetricsTable from_report(const Report& report);

  friend bool operator==(const MetricsTable&, const MetricsTable&) = default;
};

MetricsTable evaluate_suite(const nets::Model<float>& model, const data::ImageDataset& test_set, const SuiteConfig& suite,
                            const std::string& checkpoint_id = "");

// Per-class accuracy in percent (NaN for classes absent from the test set).
// Weighting by class sizes recovers the aggregate accuracy.
std::vector<double> classwise_robustness(const nets::Model<float>& model, const data::ImageDataset& test_set,
                                         const std::optional<EvalAttack>& attack, std::uint64_t seed,
                                         std::size_t batch_size = 256);

// PGD attack matching the suite's PGD row.
EvalAttack suite_pgd(const SuiteConfig& suite);

struct AblationSpec {
  std::vector<augment::SubsetSpec> subsets;
  std::size_t repeats = 5;
  SuiteConfig suite;
};

struct AblationRow {
  std::string subset;
  std::vector<MetricsTable> runs;
  std::vector<double> mean;  // per attack column
  std::vector<double> sd;    // sample standard deviation, 0 for a single run
};

struct AblationTable {
  std::vector<std::string> attacks;
  std::vector<AblationRow> rows;

  Report to_report() const;
};

std::string subset_label(const augment::SubsetSpec& subset);

/// Trains one model per (subset, repeat) with seed base.seed + repeat and a
/// RandAugment policy restricted to the subset (num_ops and magnitude taken
/// from the base policy when it is RandAugment), then evaluates the best
/// checkpoint on the full test set. A random subset draws its ops with
/// random_seed + repeat, so every repeat sees a fresh selection.
AblationTable ablate_search_space(const train::TrainConfig& base, const data::ImageDataset& train_set,
                                  const data::ImageDataset& test_set, const AblationSpec& spec);

}  // namespace atlt::eval
