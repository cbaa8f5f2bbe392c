// Acceptance gate: one PASS/FAIL line per criterion.
//
//   acceptance --workdir DIR [--only 2,5,9] [--reuse]
//
// The same lines are written to DIR/acceptance_report.txt.
// Exit status is 0 when every criterion outside kKnownRed passes. Known-red
// criteria still print their real verdict.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include "atlt/cli/cli.hpp"
#include "atlt/core/digest.hpp"
#include "atlt/data/longtail.hpp"
#include "atlt/nets/checkpoint.hpp"
#include "atlt/train/schedule.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace atlt;

namespace {

// Tolerances and budgets.
constexpr double kUniformTol = 1e-10;
constexpr double kZeroMarginTol = 1e-10;
constexpr double kGradTol = 1e-5;
constexpr double kBoxSlack = 1e-7;
constexpr double kScheduleRelTol = 1e-9;
constexpr int kAlgebraDraws = 1000;
constexpr int kGradSeeds = 100;
constexpr int kFeasibilityTrials = 5000;  // an FGSM and a PGD output each
constexpr double kAlgebraBudget = 5.0;
constexpr double kGradBudget = 120.0;
constexpr double kFeasibilityBudget = 60.0;
constexpr double kDirectionBudget = 15.0 * 60.0;
constexpr int kDirectionWinsNeeded = 2;
const std::vector<std::uint64_t> kSeeds = {0, 1, 2};

// Criterion 8 does not hold at desk scale; README "Known red" has the numbers.
const std::set<int> kKnownRed = {8};

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path workdir;
  fs::path source_dir;
  bool reuse = false;
};

std::string fmt(double v, int digits = 2) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string sci(double v) {
  std::ostringstream ss;
  ss << std::scientific << std::setprecision(3) << v;
  return ss.str();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  for (std::string line; std::getline(in, line);) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void run_cli_or_throw(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  if (code != 0) throw std::runtime_error("atlt " + args.front() + " failed: " + err.str());
}

// Trains with `config` and `seed`, then evaluates the best checkpoint on the
// full test split. Returns the evaluation directory.
fs::path train_and_eval(const Context& ctx, const std::string& config, std::uint64_t seed) {
  const auto cfg = (ctx.source_dir / "configs" / (config + ".json")).string();
  const auto tag = config + "-s" + std::to_string(seed);
  const auto run_dir = ctx.workdir / ("train-" + tag);
  const auto eval_dir = ctx.workdir / ("eval-" + tag);
  std::vector<std::string> train = {"train", "--config", cfg, "--seed", std::to_string(seed), "--out", run_dir.string()};
  std::vector<std::string> eval = {"eval",  "--config", cfg, "--seed", std::to_string(seed), "--checkpoint",
                                   (run_dir / "best.ckpt").string(), "--out", eval_dir.string()};
  if (!ctx.reuse) {
    train.push_back("--overwrite");
    eval.push_back("--overwrite");
  }
  run_cli_or_throw(train);
  run_cli_or_throw(eval);
  return eval_dir;
}

double tail_half_pgd20(const fs::path& eval_dir) {
  const auto rows = read_csv(eval_dir / "classwise.csv");
  if (rows.empty() || rows[0] != std::vector<std::string>{"class", "count", "clean", "pgd20"})
    throw std::runtime_error("unexpected classwise.csv header");
  double sum = 0.0;
  int n = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (std::stoi(rows[r][0]) >= 5) {
      sum += std::stod(rows[r][3]);
      ++n;
    }
  }
  if (n != 5) throw std::runtime_error("expected five tail classes");
  return sum / n;
}

double overall_pgd20(const fs::path& eval_dir) {
  for (const auto& row : read_csv(eval_dir / "metrics.csv"))
    if (row.size() == 2 && row[0] == "PGD-20") return std::stod(row[1]);
  throw std::runtime_error("no PGD-20 row in metrics.csv");
}

Verdict c1_statement(const Context& ctx) {
  // The substitution has to be stated where users read it.
  const auto readme = slurp(ctx.source_dir / "README.md");
  const bool stated = readme.find("not reproducible at desk scale") != std::string::npos;
  return {stated, stated ? "published-scale numbers are not reproduced; README states the substitution by criteria 2-10"
                         : "README lacks the desk-scale statement"};
}

Verdict c2_algebra(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = testing::loss_algebra(kAlgebraDraws, 20241);
  const double secs = seconds_since(t0);
  const bool pass = r.draws == kAlgebraDraws && r.bsl0_mismatches == 0 && r.uniform_worst <= kUniformTol &&
                    r.zero_margin_worst <= kZeroMarginTol && secs < kAlgebraBudget;
  return {pass, std::to_string(r.draws) + " draws, bsl0!=ce " + std::to_string(r.bsl0_mismatches) + ", uniform " +
                    sci(r.uniform_worst) + ", zero-margin " + sci(r.zero_margin_worst) + ", " + fmt(secs) + " s"};
}

Verdict c3_gradients(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  auto results = testing::primitive_gradchecks(kGradSeeds);
  const auto losses = testing::loss_gradchecks(kGradSeeds);
  results.insert(results.end(), losses.begin(), losses.end());
  const double secs = seconds_since(t0);
  double worst = 0.0;
  std::string worst_name;
  bool pass = secs < kGradBudget && losses.size() == 6;
  for (const auto& r : results) {
    pass = pass && r.worst <= kGradTol && r.seeds >= kGradSeeds;
    if (r.worst >= worst) {
      worst = r.worst;
      worst_name = r.name;
    }
  }
  return {pass, std::to_string(results.size()) + " ops x " + std::to_string(kGradSeeds) + " seeds, worst rel " +
                    sci(worst) + " (" + worst_name + "), " + fmt(secs) + " s"};
}

Verdict c4_feasibility(const Context&) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = testing::attack_feasibility(kFeasibilityTrials, 4242);
  const double secs = seconds_since(t0);
  const bool pass = r.outputs >= 10000 && r.worst_excess <= kBoxSlack && r.in_unit_box && r.pgd1_mismatches == 0 &&
                    secs < kFeasibilityBudget;
  return {pass, std::to_string(r.outputs) + " outputs, max |x'-x|-eps " + sci(r.worst_excess) +
                    (r.in_unit_box ? ", in [0,1]" : ", OUTSIDE [0,1]") + ", pgd1!=fgsm " +
                    std::to_string(r.pgd1_mismatches) + "/" + std::to_string(r.pgd1_checks) + ", " + fmt(secs) + " s"};
}

Verdict c5_schedules(const Context&) {
  const double code80 = train::lr_at(train::Schedule::robal_code(0.1), 80);
  const double pw76 = train::lr_at(train::Schedule::piecewise({75, 90}, 0.1, 0.1), 76);
  const double rel = std::abs(code80 - 1e-26) / 1e-26;
  const bool pass = rel <= kScheduleRelTol && pw76 == 0.01;
  std::ostringstream d;
  d << "robal_code(80) = " << std::setprecision(17) << code80 << " (rel " << sci(rel) << "), piecewise(76) = " << pw76;
  return {pass, d.str()};
}

Verdict c6_longtail(const Context&) {
  const std::vector<std::pair<double, std::vector<std::int64_t>>> tables = {
      {10, {5000, 3871, 2997, 2321, 1797, 1391, 1077, 834, 646, 500}},
      {20, {5000, 3584, 2570, 1842, 1320, 947, 679, 486, 349, 250}},
      {50, {5000, 3237, 2096, 1357, 879, 569, 368, 239, 154, 100}},
      {100, {5000, 2997, 1797, 1077, 646, 387, 232, 139, 83, 50}},
  };
  bool pass = true;
  std::string detail;
  for (const auto& [ir, want] : tables) {
    const auto p = data::longtail_profile(5000, 10, ir);
    bool closed_form = true;
    for (std::size_t i = 0; i < 10; ++i)
      closed_form = closed_form && p.counts[i] == std::llround(5000.0 * std::pow(ir, -static_cast<double>(i) / 9.0));
    const bool ok = p.counts == want && closed_form &&
                    static_cast<double>(p.counts.front()) / static_cast<double>(p.counts.back()) == ir;
    pass = pass && ok;
    detail += "IR" + fmt(ir, 0) + (ok ? " ok " : " MISMATCH ");
  }
  return {pass, detail};
}

Verdict c7_direction(const Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  std::string detail = "tail-half PGD-20 at vs at_bsl:";
  for (auto seed : kSeeds) {
    const double at = tail_half_pgd20(train_and_eval(ctx, "desk_at", seed));
    const double bsl = tail_half_pgd20(train_and_eval(ctx, "desk_at_bsl", seed));
    wins += bsl > at;
    detail += " s" + std::to_string(seed) + " " + fmt(at) + "/" + fmt(bsl);
  }
  const double secs = seconds_since(t0);
  detail += ", wins " + std::to_string(wins) + "/3, " + fmt(secs) + " s";
  return {wins >= kDirectionWinsNeeded && (ctx.reuse || secs < kDirectionBudget), detail};
}

Verdict c8_diversity(const Context& ctx) {
  double full = 0.0, ident = 0.0;
  std::string detail = "best-ckpt PGD-20 ra-full vs identity:";
  for (auto seed : kSeeds) {
    const double f = overall_pgd20(train_and_eval(ctx, "desk_ra_full", seed));
    const double i = overall_pgd20(train_and_eval(ctx, "desk_ra_identity", seed));
    full += f / static_cast<double>(kSeeds.size());
    ident += i / static_cast<double>(kSeeds.size());
    detail += " s" + std::to_string(seed) + " " + fmt(f) + "/" + fmt(i);
  }
  detail += ", mean " + fmt(full) + " vs " + fmt(ident);
  return {full >= ident, detail};
}

Verdict c9_determinism(const Context& ctx) {
  const auto cfg = (ctx.source_dir / "configs" / "smoke.json").string();
  std::vector<fs::path> dirs = {ctx.workdir / "determinism-a", ctx.workdir / "determinism-b"};
  for (const auto& d : dirs) {
    fs::remove_all(d);
    const std::string cmd = std::string(ATLT_CLI_PATH) + " train --config '" + cfg + "' --seed 7 --out '" + d.string() +
                            "' > /dev/null";
    if (std::system(cmd.c_str()) != 0) return {false, "train invocation failed: " + cmd};
  }
  const bool same_log = slurp(dirs[0] / "runlog.csv") == slurp(dirs[1] / "runlog.csv");
  bool same_ckpt = true;
  std::string digest;
  for (const char* name : {"best.ckpt", "last.ckpt"}) {
    const auto a = nets::load_checkpoint(dirs[0] / name);
    const auto b = nets::load_checkpoint(dirs[1] / name);
    const auto da = nets::checkpoint_digest(a.model, a.meta);
    same_ckpt = same_ckpt && da == nets::checkpoint_digest(b.model, b.meta) &&
                slurp(dirs[0] / name) == slurp(dirs[1] / name);
    if (digest.empty()) digest = da;
  }
  return {same_log && same_ckpt, std::string("runlog.csv ") + (same_log ? "identical" : "DIFFERS") + ", checkpoints " +
                                     (same_ckpt ? "identical" : "DIFFER") + " (best " + digest + ")"};
}

Verdict c10_overfit_gap(const Context& ctx) {
  const auto cfg = (ctx.source_dir / "configs" / "desk_constant30.json").string();
  const auto dir = ctx.workdir / "constant30";
  std::vector<std::string> args = {"train", "--config", cfg, "--seed", "0", "--out", dir.string()};
  if (!ctx.reuse) args.push_back("--overwrite");
  run_cli_or_throw(args);
  const auto j = json::parse(slurp(dir / "runlog.json"));
  const auto log = train::run_log_from_json(j);
  const double gap = train::overfit_gap(log);
  bool schema = j.contains("best") && j.contains("last") && j.contains("records") && j["records"].size() == 30;
  for (const char* key : {"epoch", "lr", "train_loss", "clean_acc", "pgd20"})
    schema = schema && j["best"].contains(key) && j["last"].contains(key);
  bool constant_lr = true;
  double peak = 0.0;
  for (const auto& r : log.records) {
    constant_lr = constant_lr && r.lr == log.records.front().lr;
    peak = std::max(peak, r.pgd20);
  }
  const bool best_is_peak = log.best().pgd20 == peak;
  return {gap >= 0.0 && schema && constant_lr && best_is_peak,
          "best epoch " + std::to_string(log.best().epoch) + " pgd20 " + fmt(log.best().pgd20) + ", last " +
              fmt(log.last().pgd20) + ", gap " + fmt(gap) + (schema ? ", best/last in runlog.json" : ", SCHEMA MISSING")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  Context ctx;
  std::string workdir = "acceptance_work";
  std::vector<int> only;
  app.add_option("--workdir", workdir, "Scratch directory for training runs");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_flag("--reuse", ctx.reuse, "Reuse finished runs whose config digest matches");
  CLI11_PARSE(app, argc, argv);
  ctx.workdir = fs::absolute(workdir);
  ctx.source_dir = ATLT_SOURCE_DIR;
  fs::create_directories(ctx.workdir);

  const std::vector<std::pair<std::string, std::function<Verdict(const Context&)>>> criteria = {
      {"desk-scale statement", c1_statement},
      {"loss algebra", c2_algebra},
      {"gradient oracle", c3_gradients},
      {"attack feasibility", c4_feasibility},
      {"schedule forensics", c5_schedules},
      {"long-tail construction", c6_longtail},
      {"AT-BSL direction", c7_direction},
      {"augmentation diversity trend", c8_diversity},
      {"determinism", c9_determinism},
      {"overfit gap", c10_overfit_gap},
  };

  int failed = 0, passed = 0;
  std::vector<int> red;
  std::ofstream report(ctx.workdir / "acceptance_report.txt", std::ios::trunc);
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    Verdict v;
    try {
      v = criteria[i].second(ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    std::string note;
    if (kKnownRed.count(id)) note = v.pass ? " [known red, passed this time]" : " [known red]";
    std::ostringstream line;
    line << "criterion " << std::setw(2) << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << criteria[i].first << " | "
         << v.detail << note;
    std::cout << line.str() << std::endl;
    report << line.str() << "\n";
    if (v.pass) {
      ++passed;
    } else if (kKnownRed.count(id)) {
      red.push_back(id);
    } else {
      ++failed;
    }
  }
  std::ostringstream summary;
  summary << "summary: " << passed << " passed, " << failed << " failed, " << red.size() << " known red";
  std::cout << summary.str() << std::endl;
  report << summary.str() << "\n";
  return failed == 0 ? 0 : 1;
}
