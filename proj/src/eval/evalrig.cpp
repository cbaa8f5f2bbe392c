#include "atlt/eval/evalrig.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

#include "atlt/core/errors.hpp"

namespace atlt::eval {

void SuiteConfig::validate() const {
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw ConfigError("suite epsilon must lie in [0,1]");
  if (!(step_size > 0.0)) throw ConfigError("suite step size must be positive");
  if (steps < 1) throw ConfigError("suite steps must be >= 1");
  if (!(kappa >= 0.0)) throw ConfigError("suite kappa must be >= 0");
  if (batch_size < 1) throw ConfigError("suite batch size must be >= 1");
}

void to_json(nlohmann::json& j, const SuiteConfig& c) {
  j = {{"epsilon", c.epsilon}, {"step_size", c.step_size}, {"steps", c.steps}, {"kappa", c.kappa}, {"fgsm", c.fgsm},
       {"pgd", c.pgd},         {"cw", c.cw},               {"seed", c.seed},   {"batch_size", c.batch_size}};
}

void from_json(const nlohmann::json& j, SuiteConfig& c) {
  if (!j.is_object()) throw ConfigError("evaluation block must be a JSON object");
  static const std::vector<std::string> keys = {"epsilon", "step_size", "steps", "kappa", "fgsm",
                                                "pgd",     "cw",        "seed",  "batch_size"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end()) throw ConfigError("unknown key '" + it.key() + "' in eval");
  }
  SuiteConfig d;
  try {
    d.epsilon = j.value("epsilon", d.epsilon);
    d.step_size = j.value("step_size", d.step_size);
    d.steps = j.value("steps", d.steps);
    d.kappa = j.value("kappa", d.kappa);
    d.fgsm = j.value("fgsm", d.fgsm);
    d.pgd = j.value("pgd", d.pgd);
    d.cw = j.value("cw", d.cw);
    d.seed = j.value("seed", d.seed);
    d.batch_size = j.value("batch_size", d.batch_size);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("eval config: ") + e.what());
  }
  d.validate();
  c = d;
}

namespace {

std::string two_decimals(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string render_report(const Report& report, ReportFormat format) {
  if (report.keys.empty()) throw ConfigError("cannot emit an empty report");
  if (report.values.size() != report.keys.size()) throw ConfigError("report rows and keys disagree");
  for (const auto& row : report.values) {
    if (row.size() != report.columns.size()) throw ConfigError("report row width does not match the header");
  }
  if (format == ReportFormat::Csv) {
    std::string out = report.key_column;
    for (const auto& c : report.columns) out += "," + c;
    out += "\n";
    for (std::size_t r = 0; r < report.keys.size(); ++r) {
      out += report.keys[r];
      for (double v : report.values[r]) out += "," + two_decimals(v);
      out += "\n";
    }
    return out;
  }
  nlohmann::json j;
  j["meta"] = report.meta;
  j["key_column"] = report.key_column;
  j["columns"] = report.columns;
  j["rows"] = nlohmann::json::array();
  for (std::size_t r = 0; r < report.keys.size(); ++r) {
    j["rows"].push_back({{"key", report.keys[r]}, {"values", report.values[r]}});
  }
  return j.dump(2) + "\n";
}

void emit_report(const Report& report, const std::filesystem::path& path, ReportFormat format) {
  const std::string text = render_report(report, format);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write report to " + path.string());
  out << text;
  if (!out) throw DataError("failed writing report to " + path.string());
}

Report report_from_json(const nlohmann::json& j) {
  Report r;
  try {
    r.meta = j.at("meta");
    j.at("key_column").get_to(r.key_column);
    j.at("columns").get_to(r.columns);
    for (const auto& row : j.at("rows")) {
      r.keys.push_back(row.at("key").get<std::string>());
      r.values.push_back(row.at("values").get<std::vector<double>>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return r;
}

Report read_report_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read report " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("report " + path.string() + " is not valid JSON: " + e.what());
  }
  return report_from_json(j);
}

double MetricsTable::at(const std::string& attack) const {
  for (const auto& r : rows)
    if (r.attack == attack) return r.accuracy;
  throw ConfigError("metrics table has no row '" + attack + "'");
}

Report MetricsTable::to_report() const {
  Report r;
  r.meta = {{"checkpoint_id", checkpoint_id}, {"dataset_digest", dataset_digest}, {"epsilon", epsilon}};
  r.key_column = "attack";
  r.columns = {"accuracy"};
  for (const auto& row : rows) {
    r.keys.push_back(row.attack);
    r.values.push_back({row.accuracy});
  }
  return r;
}

MetricsTable MetricsTable::from_report(const Report& report) {
  MetricsTable t;
  if (report.columns != std::vector<std::string>{"accuracy"}) throw DataError("report is not a metrics table");
  t.checkpoint_id = report.meta.value("checkpoint_id", std::string());
  t.dataset_digest = report.meta.value("dataset_digest", std::string());
  t.epsilon = report.meta.value("epsilon", 0.0);
  for (std::size_t i = 0; i < report.keys.size(); ++i) t.rows.push_back({report.keys[i], report.values[i].at(0)});
  return t;
}

EvalAttack suite_pgd(const SuiteConfig& suite) {
  EvalAttack a;
  a.kind = AttackKind::Pgd;
  a.spec.epsilon = suite.epsilon;
  a.spec.step_size = suite.step_size;
  a.spec.steps = suite.steps;
  a.spec.random_start = true;
  a.spec.loss = attacks::AttackLoss::CrossEntropy;
  return a;
}

MetricsTable evaluate_suite(const nets::Model<float>& model, const data::ImageDataset& test_set, const SuiteConfig& suite,
                            const std::string& checkpoint_id) {
  suite.validate();
  if (test_set.empty()) throw DataError("test set is empty");
  if (test_set.num_classes != model.num_classes()) {
    throw DataError("model has " + std::to_string(model.num_classes()) + " classes but the test set has " +
                    std::to_string(test_set.num_classes));
  }
  std::vector<std::size_t> ids(test_set.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});

  MetricsTable table;
  table.checkpoint_id = checkpoint_id;
  table.dataset_digest = test_set.digest();
  table.epsilon = suite.epsilon;
  const auto run = [&](const std::optional<EvalAttack>& attack, const char* stream) {
    return percent(correctness(model, test_set, ids, attack, derive_seed(suite.seed, stream), suite.batch_size));
  };
  table.rows.push_back({"Clean", run(std::nullopt, "clean")});
  if (suite.fgsm) {
    EvalAttack a = suite_pgd(suite);
    a.kind = AttackKind::Fgsm;
    table.rows.push_back({"FGSM", run(a, "fgsm")});
  }
  const std::string steps = std::to_string(suite.steps);
  if (suite.pgd) table.rows.push_back({"PGD-" + steps, run(suite_pgd(suite), "pgd")});
  if (suite.cw) {
    EvalAttack a = suite_pgd(suite);
    a.spec.loss = attacks::AttackLoss::CwMargin;
    a.spec.kappa = suite.kappa;
    table.rows.push_back({"CW-" + steps, run(a, "cw")});
  }
  return table;
}

std::vector<double> classwise_robustness(const nets::Model<float>& model, const data::ImageDataset& test_set,
                                         const std::optional<EvalAttack>& attack, std::uint64_t seed,
                                         std::size_t batch_size) {
  std::vector<std::size_t> ids(test_set.size());
  std::iota(ids.begin(), ids.end(), std::size_t{0});
  const auto correct = correctness(model, test_set, ids, attack, seed, batch_size);
  std::vector<double> hits(test_set.num_classes, 0.0), totals(test_set.num_classes, 0.0);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    totals[test_set.labels[i]] += 1.0;
    if (correct[i]) hits[test_set.labels[i]] += 1.0;
  }
  std::vector<double> out(test_set.num_classes);
  for (std::size_t c = 0; c < out.size(); ++c) {
    out[c] = totals[c] > 0.0 ? 100.0 * hits[c] / totals[c] : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

std::string subset_label(const augment::SubsetSpec& subset) {
  if (subset.names.empty()) {
    return "random(" + std::to_string(subset.random_count) + ",seed=" + std::to_string(subset.random_seed) + ")";
  }
  std::string out;
  for (const auto& n : subset.names) out += (out.empty() ? "" : "+") + n;
  return out;
}

AblationTable ablate_search_space(const train::TrainConfig& base, const data::ImageDataset& train_set,
                                  const data::ImageDataset& test_set, const AblationSpec& spec) {
  if (spec.repeats < 1) throw ConfigError("ablation needs repeats >= 1");
  if (spec.subsets.empty()) throw ConfigError("ablation needs at least one subset");
  const bool base_ra = base.policy.kind == augment::AugPolicy::Kind::RandAugment;
  const std::size_t num_ops = base_ra ? base.policy.num_ops : 2;
  const double magnitude = base_ra ? base.policy.magnitude : 8.0;

  AblationTable table;
  for (const auto& subset : spec.subsets) {
    AblationRow row;
    row.subset = subset_label(subset);
    for (std::size_t r = 0; r < spec.repeats; ++r) {
      augment::SubsetSpec s = subset;
      if (s.names.empty()) s.random_seed += r;
      train::TrainConfig cfg = base;
      cfg.seed = base.seed + r;
      cfg.policy = augment::restrict_space(s, num_ops, magnitude);
      const auto result = train::adversarial_train(cfg, train_set, test_set);
      SuiteConfig suite = spec.suite;
      suite.seed = cfg.seed;
      row.runs.push_back(evaluate_suite(result.best, test_set, suite, cfg.digest()));
    }
    if (table.attacks.empty()) {
      for (const auto& m : row.runs.front().rows) table.attacks.push_back(m.attack);
    }
    for (std::size_t a = 0; a < table.attacks.size(); ++a) {
      double sum = 0.0;
      for (const auto& run : row.runs) sum += run.rows.at(a).accuracy;
      const double mean = sum / static_cast<double>(row.runs.size());
      double ss = 0.0;
      for (const auto& run : row.runs) ss += (run.rows.at(a).accuracy - mean) * (run.rows.at(a).accuracy - mean);
      row.mean.push_back(mean);
      row.sd.push_back(row.runs.size() > 1 ? std::sqrt(ss / static_cast<double>(row.runs.size() - 1)) : 0.0);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

Report AblationTable::to_report() const {
  Report r;
  r.key_column = "subset";
  r.columns.push_back("runs");
  for (const auto& a : attacks) {
    r.columns.push_back(a + "_mean");
    r.columns.push_back(a + "_sd");
  }
  for (const auto& row : rows) {
    r.keys.push_back(row.subset);
    std::vector<double> v{static_cast<double>(row.runs.size())};
    for (std::size_t a = 0; a < attacks.size(); ++a) {
      v.push_back(row.mean[a]);
      v.push_back(row.sd[a]);
    }
    r.values.push_back(std::move(v));
  }
  return r;
}

}  // namespace atlt::eval
