#include "atlt/cli/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "atlt/core/digest.hpp"
#include "atlt/core/errors.hpp"
#include "atlt/core/rng.hpp"
#include "atlt/data/formats.hpp"
#include "atlt/data/longtail.hpp"
#include "atlt/data/synth.hpp"
#include "atlt/nets/checkpoint.hpp"

namespace atlt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

std::string file_digest(const fs::path& path) { return hex64(fnv1a64(read_text(path))); }

}  // namespace

void to_json(json& j, const DataSource& d) {
  j = {{"source", d.source}, {"num_classes", d.num_classes}, {"ir", d.ir}};
  if (d.source == "synth") {
    j["per_class"] = d.per_class;
    j["test_per_class"] = d.test_per_class;
    j["side"] = d.side;
    j["channels"] = d.channels;
  } else if (d.source == "idx") {
    j["train_images"] = d.train_images.string();
    j["train_labels"] = d.train_labels.string();
    j["test_images"] = d.test_images.string();
    j["test_labels"] = d.test_labels.string();
  } else if (d.source == "cifar") {
    std::vector<std::string> tr, te;
    for (const auto& p : d.train_files) tr.push_back(p.string());
    for (const auto& p : d.test_files) te.push_back(p.string());
    j["train_files"] = tr;
    j["test_files"] = te;
  } else {
    j["path"] = d.path.string();
  }
}

DataSource data_source_from_json(const json& j, const fs::path& base) {
  DataSource d;
  if (!j.is_object()) throw ConfigError("data block must be a JSON object");
  d.source = j.value("source", std::string("synth"));
  try {
    if (d.source == "synth") {
      check_keys(j, {"source", "num_classes", "per_class", "test_per_class", "side", "channels", "ir"}, "data");
      d.per_class = j.value("per_class", d.per_class);
      d.test_per_class = j.value("test_per_class", d.test_per_class);
      d.side = j.value("side", d.side);
      d.channels = j.value("channels", d.channels);
      if (d.per_class < 1 || d.test_per_class < 1) throw ConfigError("per_class and test_per_class must be >= 1");
      if (d.side < 4) throw ConfigError("synthetic side must be >= 4");
      if (d.channels != 1 && d.channels != 3) throw ConfigError("synthetic channels must be 1 or 3");
    } else if (d.source == "idx") {
      check_keys(j, {"source", "num_classes", "ir", "train_images", "train_labels", "test_images", "test_labels"}, "data");
      d.train_images = resolve(base, j.at("train_images").get<std::string>());
      d.train_labels = resolve(base, j.at("train_labels").get<std::string>());
      d.test_images = resolve(base, j.at("test_images").get<std::string>());
      d.test_labels = resolve(base, j.at("test_labels").get<std::string>());
    } else if (d.source == "cifar") {
      check_keys(j, {"source", "num_classes", "ir", "train_files", "test_files"}, "data");
      for (const auto& p : j.at("train_files")) d.train_files.push_back(resolve(base, p.get<std::string>()));
      for (const auto& p : j.at("test_files")) d.test_files.push_back(resolve(base, p.get<std::string>()));
      if (d.train_files.empty() || d.test_files.empty()) throw ConfigError("cifar source needs train_files and test_files");
    } else if (d.source == "dir") {
      check_keys(j, {"source", "path"}, "data");
      d.path = resolve(base, j.at("path").get<std::string>());
    } else {
      throw ConfigError("unknown data source '" + d.source + "' (expected synth, idx, cifar or dir)");
    }
    d.num_classes = j.value("num_classes", d.num_classes);
    d.ir = j.value("ir", d.ir);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("data block: ") + e.what());
  }
  if (d.num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (!(d.ir >= 1.0)) throw ConfigError("imbalance ratio must be >= 1");
  return d;
}

json ExperimentConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["data"] = data;
  j["train"] = train;
  j["eval"] = eval;
  json subsets = json::array();
  for (const auto& s : ablate.subsets) {
    if (s.names.empty()) {
      subsets.push_back({{"random", s.random_count}, {"seed", s.random_seed}});
    } else {
      subsets.push_back(s.names);
    }
  }
  j["ablate"] = {{"subsets", subsets}, {"repeats", ablate.repeats}};
  j["checkpoint"] = checkpoint.string();
  return j;
}

std::string ExperimentConfig::digest() const { return hex64(fnv1a64(to_json().dump())); }

ExperimentConfig parse_experiment(const json& j, const fs::path& base) {
  check_keys(j, {"seed", "data", "train", "eval", "ablate", "checkpoint", "out"}, "config");
  ExperimentConfig c;
  try {
    c.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("data")) c.data = data_source_from_json(j.at("data"), base);
    if (j.contains("train")) j.at("train").get_to(c.train);
    if (j.contains("eval")) j.at("eval").get_to(c.eval);
    if (j.contains("ablate")) {
      const auto& a = j.at("ablate");
      check_keys(a, {"subsets", "repeats"}, "ablate");
      c.ablate.repeats = a.value("repeats", c.ablate.repeats);
      if (c.ablate.repeats < 1) throw ConfigError("ablate repeats must be >= 1");
      for (const auto& s : a.value("subsets", json::array())) {
        augment::SubsetSpec spec;
        if (s.is_string() && s.get<std::string>() == "full") {
          for (auto op : augment::kAllOps) spec.names.push_back(augment::aug_op_name(op));
        } else if (s.is_array()) {
          spec.names = s.get<std::vector<std::string>>();
          if (spec.names.empty()) throw ConfigError("ablate subset must name at least one op");
          for (const auto& n : spec.names) augment::parse_aug_op(n);
        } else if (s.is_object()) {
          check_keys(s, {"random", "seed"}, "ablate subset");
          spec.random_count = s.at("random").get<std::size_t>();
          spec.random_seed = s.value("seed", std::uint64_t{0});
          if (spec.random_count < 1 || spec.random_count > augment::kAllOps.size()) {
            throw ConfigError("random subset size must lie in [1,14]");
          }
        } else {
          throw ConfigError("ablate subsets are \"full\", a list of op names or {\"random\": n, \"seed\": s}");
        }
        c.ablate.subsets.push_back(spec);
      }
    }
    if (j.contains("checkpoint")) c.checkpoint = resolve(base, j.at("checkpoint").get<std::string>());
    if (j.contains("out")) c.out = resolve(base, j.at("out").get<std::string>());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  apply_seed(c, c.seed);
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment(j, path.parent_path());
}

void apply_seed(ExperimentConfig& config, std::uint64_t seed) {
  config.seed = seed;
  config.train.seed = seed;
  config.eval.seed = seed;
}

namespace {

data::ImageDataset concat(std::vector<data::ImageDataset> parts) {
  data::ImageDataset out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) {
    out.pixels.insert(out.pixels.end(), parts[i].pixels.begin(), parts[i].pixels.end());
    out.labels.insert(out.labels.end(), parts[i].labels.begin(), parts[i].labels.end());
  }
  return out;
}

}  // namespace

std::pair<data::ImageDataset, data::ImageDataset> load_data(const DataSource& source, std::uint64_t seed) {
  const std::uint64_t data_seed = derive_seed(seed, "dataset");
  data::ImageDataset train, test;
  if (source.source == "synth") {
    data::SynthOptions opt;
    opt.channels = source.channels;
    opt.template_seed = derive_seed(data_seed, "templates");
    opt.split = data::Split::Train;
    train = data::synth_dataset(derive_seed(data_seed, "train"), source.num_classes, source.per_class, source.side, opt);
    opt.split = data::Split::Test;
    test = data::synth_dataset(derive_seed(data_seed, "test"), source.num_classes, source.test_per_class, source.side, opt);
  } else if (source.source == "idx") {
    train = data::load_idx(source.train_images, source.train_labels, source.num_classes, data::Split::Train);
    test = data::load_idx(source.test_images, source.test_labels, source.num_classes, data::Split::Test);
  } else if (source.source == "cifar") {
    std::vector<data::ImageDataset> tr, te;
    for (const auto& p : source.train_files) tr.push_back(data::load_cifar_binary(p, source.num_classes, data::Split::Train));
    for (const auto& p : source.test_files) te.push_back(data::load_cifar_binary(p, source.num_classes, data::Split::Test));
    train = concat(std::move(tr));
    test = concat(std::move(te));
  } else {
    const auto manifest = data::read_manifest(source.path / "dataset.json");
    const std::size_t classes = manifest.counts.size();
    if (fs::exists(source.path / "train-images.idx")) {
      train = data::load_idx(source.path / "train-images.idx", source.path / "train-labels.idx", classes, data::Split::Train);
      test = data::load_idx(source.path / "test-images.idx", source.path / "test-labels.idx", classes, data::Split::Test);
    } else {
      train = data::load_cifar_binary(source.path / "train.bin", classes, data::Split::Train);
      test = data::load_cifar_binary(source.path / "test.bin", classes, data::Split::Test);
    }
    train.manifest = manifest;
    train.validate();
    test.validate();
    // Already long-tailed by make-dataset.
    return {std::move(train), std::move(test)};
  }
  train.validate();
  test.validate();
  if (source.ir > 1.0) {
    auto [lt, counts] = data::make_longtail(train, source.ir, derive_seed(data_seed, "longtail"));
    train = std::move(lt);
  }
  train.manifest.source = source.source;
  train.manifest.seed = data_seed;
  train.manifest.ir = source.ir;
  train.manifest.counts = data::class_histogram(train);
  return {std::move(train), std::move(test)};
}

namespace {

// Output directory guard. An existing directory whose manifest records the
// same config digest and intact artifacts is reused; anything else requires
// --overwrite, which deletes only the files the old manifest lists.
class OutDir {
 public:
  OutDir(fs::path dir, std::string digest, std::string command, bool overwrite)
      : dir_(std::move(dir)), digest_(std::move(digest)), command_(std::move(command)), overwrite_(overwrite) {}

  // True when the directory already holds a complete run for this digest.
  bool prepare() {
    if (dir_.empty()) throw ConfigError("--out is required");
    if (fs::exists(dir_) && !fs::is_directory(dir_)) throw ConfigError(dir_.string() + " exists and is not a directory");
    fs::create_directories(dir_);
    const auto manifest_path = dir_ / "manifest.json";
    const bool has_manifest = fs::exists(manifest_path);
    json old;
    if (has_manifest) {
      try {
        old = json::parse(read_text(manifest_path));
      } catch (const json::exception&) {
        old = json::object();
      }
    }
    if (!overwrite_ && has_manifest && old.value("config_digest", std::string()) == digest_ &&
        old.value("command", std::string()) == command_ && intact(old)) {
      return true;
    }
    const bool empty = fs::is_empty(dir_);
    if (!empty && !overwrite_) {
      throw ConfigError("output directory " + dir_.string() +
                        " holds other artifacts; pass --overwrite to replace them");
    }
    if (has_manifest && old.contains("artifacts") && old["artifacts"].is_object()) {
      for (auto it = old["artifacts"].begin(); it != old["artifacts"].end(); ++it) fs::remove(dir_ / it.key());
    }
    fs::remove(manifest_path);
    return false;
  }

  fs::path path(const std::string& name) {
    names_.push_back(name);
    return dir_ / name;
  }

  void finish() {
    json m;
    m["config_digest"] = digest_;
    m["command"] = command_;
    m["artifacts"] = json::object();
    for (const auto& n : names_) m["artifacts"][n] = file_digest(dir_ / n);
    write_text(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  bool intact(const json& m) const {
    if (!m.contains("artifacts") || !m["artifacts"].is_object() || m["artifacts"].empty()) return false;
    for (auto it = m["artifacts"].begin(); it != m["artifacts"].end(); ++it) {
      const auto p = dir_ / it.key();
      if (!fs::exists(p) || file_digest(p) != it.value().get<std::string>()) return false;
    }
    return true;
  }

  fs::path dir_;
  std::string digest_;
  std::string command_;
  bool overwrite_;
  std::vector<std::string> names_;
};

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool overwrite = false;
};

ExperimentConfig resolve_config(const Common& c) {
  if (c.config.empty()) throw ConfigError("--config is required");
  auto cfg = load_experiment(c.config);
  if (c.seed) apply_seed(cfg, *c.seed);
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

void cmd_make_dataset(const Common& common, std::ostream& out) {
  const auto cfg = resolve_config(common);
  if (cfg.data.source == "dir") throw ConfigError("make-dataset needs a synth, idx or cifar source");
  json digest_input = {{"data", cfg.data}, {"seed", cfg.seed}};
  OutDir dir(cfg.out, hex64(fnv1a64(digest_input.dump())), "make-dataset", common.overwrite);
  if (dir.prepare()) {
    out << "reused " << cfg.out.string() << "\n";
    return;
  }
  const auto [train, test] = load_data(cfg.data, cfg.seed);
  if (train.channels == 1) {
    data::write_idx(train, dir.path("train-images.idx"), dir.path("train-labels.idx"));
    data::write_idx(test, dir.path("test-images.idx"), dir.path("test-labels.idx"));
  } else if (train.channels == 3 && train.height == 32 && train.width == 32) {
    data::write_cifar_binary(train, dir.path("train.bin"));
    data::write_cifar_binary(test, dir.path("test.bin"));
  } else {
    throw ConfigError("make-dataset can only store 1-channel (IDX) or 3x32x32 (CIFAR) data");
  }
  data::write_manifest(train.manifest, dir.path("dataset.json"));
  dir.finish();
  out << "wrote " << train.size() << " train / " << test.size() << " test examples to " << cfg.out.string() << "\n";
}

void cmd_train(const Common& common, std::ostream& out) {
  const auto cfg = resolve_config(common);
  const std::string digest = cfg.digest();
  OutDir dir(cfg.out, digest, "train", common.overwrite);
  if (dir.prepare()) {
    out << "reused " << cfg.out.string() << "\n";
    return;
  }
  const auto [train, test] = load_data(cfg.data, cfg.seed);
  const auto result = train::adversarial_train(cfg.train, train, test);
  const json meta_base = {{"config_digest", digest}, {"dataset_digest", train.digest()}};
  json best_meta = meta_base, last_meta = meta_base;
  best_meta["checkpoint"] = "best";
  best_meta["epoch"] = result.log.best().epoch;
  last_meta["checkpoint"] = "last";
  last_meta["epoch"] = result.log.last().epoch;
  nets::save_checkpoint(dir.path("best.ckpt"), result.best, best_meta);
  nets::save_checkpoint(dir.path("last.ckpt"), result.last, last_meta);
  write_text(dir.path("runlog.csv"), result.log.csv());
  json log = result.log.json();
  log["config_digest"] = digest;
  log["train_config_digest"] = cfg.train.digest();
  write_text(dir.path("runlog.json"), log.dump(2) + "\n");
  json resolved = cfg.to_json();
  resolved["config_digest"] = digest;
  write_text(dir.path("config.json"), resolved.dump(2) + "\n");
  dir.finish();
  const auto& b = result.log.best();
  const auto& l = result.log.last();
  out << "best epoch " << b.epoch << " pgd20 " << b.pgd20 << " | last epoch " << l.epoch << " pgd20 " << l.pgd20 << "\n";
}

void cmd_eval(const Common& common, const std::string& checkpoint_flag, std::ostream& out) {
  auto cfg = resolve_config(common);
  if (!checkpoint_flag.empty()) cfg.checkpoint = checkpoint_flag;
  if (cfg.checkpoint.empty()) throw ConfigError("eval needs a checkpoint (--checkpoint or \"checkpoint\" in the config)");
  const auto ckpt = nets::load_checkpoint(cfg.checkpoint);
  json digest_input = cfg.to_json();
  digest_input["checkpoint_digest"] = nets::checkpoint_digest(ckpt.model, ckpt.meta);
  OutDir dir(cfg.out, hex64(fnv1a64(digest_input.dump())), "eval", common.overwrite);
  if (dir.prepare()) {
    out << "reused " << cfg.out.string() << "\n";
    return;
  }
  const auto [train, test] = load_data(cfg.data, cfg.seed);
  (void)train;
  const std::string ckpt_id = nets::checkpoint_digest(ckpt.model, ckpt.meta);
  const auto table = eval::evaluate_suite(ckpt.model, test, cfg.eval, ckpt_id);
  auto report = table.to_report();
  report.meta["config_digest"] = hex64(fnv1a64(digest_input.dump()));
  eval::emit_report(report, dir.path("metrics.csv"), eval::ReportFormat::Csv);
  eval::emit_report(report, dir.path("metrics.json"), eval::ReportFormat::Json);

  const auto hist = data::class_histogram(test);
  const auto clean = eval::classwise_robustness(ckpt.model, test, std::nullopt, derive_seed(cfg.eval.seed, "clean"), cfg.eval.batch_size);
  const auto robust = eval::classwise_robustness(ckpt.model, test, eval::suite_pgd(cfg.eval), derive_seed(cfg.eval.seed, "pgd"),
                                                 cfg.eval.batch_size);
  eval::Report cls;
  cls.meta = report.meta;
  cls.key_column = "class";
  cls.columns = {"count", "clean", "pgd" + std::to_string(cfg.eval.steps)};
  for (std::size_t c = 0; c < hist.size(); ++c) {
    if (hist[c] == 0) continue;
    cls.keys.push_back(std::to_string(c));
    cls.values.push_back({static_cast<double>(hist[c]), clean[c], robust[c]});
  }
  eval::emit_report(cls, dir.path("classwise.csv"), eval::ReportFormat::Csv);
  dir.finish();
  for (const auto& r : table.rows) out << r.attack << " " << r.accuracy << "\n";
}

void cmd_ablate(const Common& common, std::ostream& out) {
  const auto cfg = resolve_config(common);
  if (cfg.ablate.subsets.empty()) throw ConfigError("ablate needs \"ablate\": {\"subsets\": [...]} in the config");
  const std::string digest = cfg.digest();
  OutDir dir(cfg.out, digest, "ablate", common.overwrite);
  if (dir.prepare()) {
    out << "reused " << cfg.out.string() << "\n";
    return;
  }
  const auto [train, test] = load_data(cfg.data, cfg.seed);
  eval::AblationSpec spec;
  spec.subsets = cfg.ablate.subsets;
  spec.repeats = cfg.ablate.repeats;
  spec.suite = cfg.eval;
  const auto table = eval::ablate_search_space(cfg.train, train, test, spec);
  auto report = table.to_report();
  report.meta = {{"config_digest", digest}, {"repeats", spec.repeats}};
  eval::emit_report(report, dir.path("ablation.csv"), eval::ReportFormat::Csv);
  eval::emit_report(report, dir.path("ablation.json"), eval::ReportFormat::Json);
  dir.finish();
  out << eval::render_report(report, eval::ReportFormat::Csv);
}

struct ProbeArgs {
  std::string schedule = "piecewise";
  int epochs = 100;
  double initial_lr = 0.1;
  std::vector<int> milestones = {75, 90};
  double factor = 0.1;
};

void cmd_schedule_probe(const ProbeArgs& args, const Common& common, std::ostream& out) {
  if (args.epochs < 1) throw ConfigError("--epochs must be >= 1");
  train::Schedule s;
  switch (train::parse_schedule_kind(args.schedule)) {
    case train::Schedule::Kind::Piecewise: s = train::Schedule::piecewise(args.milestones, args.factor, args.initial_lr); break;
    case train::Schedule::Kind::RobalPaper: s = train::Schedule::robal_paper(args.initial_lr); break;
    case train::Schedule::Kind::RobalCode: s = train::Schedule::robal_code(args.initial_lr); break;
    case train::Schedule::Kind::Constant: s = train::Schedule::constant(args.initial_lr); break;
  }
  s.validate();
  std::string csv = "epoch,lr\n";
  for (int e = 1; e <= args.epochs; ++e) csv += std::to_string(e) + "," + shortest(train::lr_at(s, e)) + "\n";
  if (common.out.empty()) {
    out << csv;
    return;
  }
  json digest_input = {{"schedule", s}, {"epochs", args.epochs}};
  OutDir dir(common.out, hex64(fnv1a64(digest_input.dump())), "schedule-probe", common.overwrite);
  if (dir.prepare()) {
    out << "reused " << common.out << "\n";
    return;
  }
  write_text(dir.path("schedule.csv"), csv);
  dir.finish();
  out << "wrote " << (fs::path(common.out) / "schedule.csv").string() << "\n";
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  std::replace(s.begin(), s.end(), '\r', ' ');
  return s;
}

int fail(std::ostream& err, const char* kind, int code, const std::string& msg) {
  err << "atlt: error=" << kind << " code=" << code << " msg=" << one_line(msg) << "\n";
  return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial training under long-tailed label distributions"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "atlt 1.0");

  Common common;
  const auto add_common = [&common](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", common.config, "Experiment config JSON");
    if (needs_config) opt->required();
    sub->add_option("--seed", common.seed, "Master seed; overrides the config");
    sub->add_option("--out", common.out, "Output directory");
    sub->add_flag("--overwrite", common.overwrite, "Replace artifacts of a different config in --out");
  };

  auto* make = app.add_subcommand("make-dataset", "Build and store the train/test splits");
  add_common(make, true);
  auto* trn = app.add_subcommand("train", "Adversarially train a model");
  add_common(trn, true);
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint under the attack suite");
  add_common(evl, true);
  std::string checkpoint;
  evl->add_option("--checkpoint", checkpoint, "Checkpoint file; overrides the config");
  auto* abl = app.add_subcommand("ablate", "Augmentation search-space ablation");
  add_common(abl, true);
  auto* probe = app.add_subcommand("schedule-probe", "Print the learning rate of every epoch as CSV");
  add_common(probe, false);
  ProbeArgs pa;
  probe->add_option("--schedule", pa.schedule, "piecewise, robal_paper, robal_code or constant");
  probe->add_option("--epochs", pa.epochs, "Number of epochs");
  probe->add_option("--initial-lr", pa.initial_lr, "Initial learning rate");
  probe->add_option("--milestones", pa.milestones, "Piecewise milestones")->delimiter(',');
  probe->add_option("--factor", pa.factor, "Piecewise decay factor");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return fail(err, "config", kExitConfig, e.what());
  }

  try {
    if (*make) cmd_make_dataset(common, out);
    if (*trn) cmd_train(common, out);
    if (*evl) cmd_eval(common, checkpoint, out);
    if (*abl) cmd_ablate(common, out);
    if (*probe) cmd_schedule_probe(pa, common, out);
  } catch (const ConfigError& e) {
    return fail(err, "config", kExitConfig, e.what());
  } catch (const DataError& e) {
    return fail(err, "data", kExitData, e.what());
  } catch (const ShapeError& e) {
    return fail(err, "data", kExitData, e.what());
  } catch (const fs::filesystem_error& e) {
    return fail(err, "data", kExitData, e.what());
  } catch (const std::exception& e) {
    return fail(err, "runtime", kExitRuntime, e.what());
  }
  return kExitOk;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace atlt::cli
