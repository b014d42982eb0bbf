// Acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// when any fails.
//
//   acceptance <path-to-iadcps-cli> [criterion ...]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "iadcps/eval.hpp"
#include "iadcps/log.hpp"
#include "iadcps/mixup.hpp"
#include "iadcps/pipeline.hpp"
#include "iadcps/rng.hpp"
#include "iadcps/simulator.hpp"
#include "iadcps/ssm.hpp"
#include "iadcps/threshold.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace iadcps;
using nlohmann::json;

namespace {

constexpr std::uint64_t kRunSeed = 7;
constexpr std::uint64_t kSimSeed = 11;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string cli_path;
fs::path work_dir;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Full default-size run of all three modes on the drifting schedule, through the CLI.
struct CliRun {
  fs::path dir;
  int status = -1;
  double seconds = 0.0;
};

CliRun cli_run(const std::string& name) {
  CliRun r;
  r.dir = work_dir / name;
  fs::remove_all(r.dir);
  const std::string cmd = "\"" + cli_path + "\" run --mode all --set seed=" + std::to_string(kRunSeed) +
                          " --set sim.seed=" + std::to_string(kSimSeed) + " -o \"" + r.dir.string() + "\" > \"" +
                          (work_dir / (name + ".log")).string() + "\" 2>&1";
  const auto start = std::chrono::steady_clock::now();
  r.status = std::system(cmd.c_str());
  r.seconds = seconds_since(start);
  return r;
}

std::map<std::string, CliRun> runs;

const CliRun& cached_run(const std::string& name) {
  auto it = runs.find(name);
  if (it == runs.end()) it = runs.emplace(name, cli_run(name)).first;
  return it->second;
}

Outcome ordering() {
  const auto& r = cached_run("run_a");
  if (r.status != 0) return {false, "cli run failed, see " + (work_dir / "run_a.log").string()};
  const json report = json::parse(read_file(r.dir / "report.json"));
  std::map<std::string, double> auc;
  for (const auto& m : report["modes"]) {
    if (m["mean_auc"].is_null()) return {false, "undefined AUC for " + m["mode"].get<std::string>()};
    auc[m["mode"].get<std::string>()] = m["mean_auc"].get<double>();
  }
  const double s = auc["static"], i = auc["it"], a = auc["iadcps"];
  std::ostringstream d;
  d << "static=" << s << " it=" << i << " iadcps=" << a << " margin=" << a - s << " runtime=" << r.seconds << "s";
  return {a > i && i > s && a - s >= 0.05 && r.seconds < 600.0, d.str()};
}

Outcome contrast() {
  pipeline::RunConfig cfg;
  cfg.seed = kRunSeed;
  sim::SimConfig base;
  base.seed = kSimSeed;
  const auto start = std::chrono::steady_clock::now();
  const auto initial = sim::simulate(base);
  const auto tasks = sim::make_tasks(base, std::vector<double>{1.0}, std::vector<double>{1.0});
  const std::vector<pipeline::Mode> modes{pipeline::Mode::Iadcps};
  const auto result = pipeline::run_experiment(cfg, initial, tasks, modes);
  const double secs = seconds_since(start);
  const auto& t = result.modes[0].tasks[0];
  if (t.error) return {false, "task failed: " + *t.error};
  double in = 0.0, out = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < t.scores.size(); ++i) {
    if (t.labels[i] == ts::Label::Anomalous) {
      in += t.scores[i];
      ++n_in;
    } else if (t.labels[i] == ts::Label::Normal) {
      out += t.scores[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0) return {false, "query lacks one class"};
  const double ratio = (in / n_in) / (out / n_out);
  std::ostringstream d;
  d << "inside/outside=" << ratio << " runtime=" << secs << "s";
  return {ratio >= 2.0 && secs < 120.0, d.str()};
}

Outcome gradients() {
  Rng rng(101);
  double worst = 0.0;
  std::size_t largest = 0;
  int tried = 0;
  while (tried < 100) {
    const std::size_t w = 1 + rng.below(6), m = 1 + rng.below(3), k = rng.below(3);
    const std::size_t z = 1 + rng.below(6);
    std::vector<std::size_t> hidden;
    for (std::size_t l = rng.below(3); l > 0; --l) hidden.push_back(2 + rng.below(12));
    auto model = ssm::SsmModel::create({w, m, k, z, hidden}, rng);
    if (model.parameter_count() > 1000) continue;
    ++tried;
    largest = std::max(largest, model.parameter_count());
    for (auto* net : {&model.encoder, &model.transition, &model.emission})
      for (auto& v : net->params()) v += 0.05 * rng.gaussian();
    const auto pairs = oracle::random_pairs(rng, 1 + rng.below(6), w, m, k);
    const ssm::LossWeights weights{rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)};
    const auto lg = ssm::loss_and_grad(model, pairs, weights);
    worst = std::max(worst, oracle::max_rel_err(oracle::flatten(lg.grad), oracle::fd_gradient(model, pairs, weights)));
  }
  std::ostringstream d;
  d << "100 nets up to " << largest << " params, max rel err=" << worst;
  return {worst < 1e-4, d.str()};
}

std::vector<double> random_scores(Rng& rng, std::size_t n) {
  std::vector<double> s(n);
  const double scale = rng.uniform(0.05, 5.0), shift = rng.uniform(0.0, 10.0);
  const bool heavy = rng.uniform() < 0.5;
  for (auto& v : s) v = shift + scale * (heavy ? std::exp(rng.gaussian()) : rng.gaussian());
  return s;
}

Outcome kde() {
  Rng rng(102);
  double worst = 0.0, lo = 1e9, hi = -1e9;
  for (int trial = 0; trial < 50; ++trial) {
    const auto scores = random_scores(rng, 30 + rng.below(1500));
    const auto grid = threshold::query_grid(scores, 1000);
    const double h = threshold::bandwidth(scores);
    const auto pdf = threshold::kde_pdf(scores, grid, h);
    const auto ref = oracle::kde(scores, grid, h);
    for (std::size_t i = 0; i < pdf.size(); ++i) worst = std::max(worst, std::abs(pdf[i] - ref[i]));
    const double mass = oracle::trapezoid(grid, pdf);
    lo = std::min(lo, mass);
    hi = std::max(hi, mass);
  }
  std::ostringstream d;
  d << "max abs diff=" << worst << " mass in [" << lo << ", " << hi << "]";
  return {worst <= 1e-12 && lo >= 0.97 && hi <= 1.001, d.str()};
}

Outcome bandwidth() {
  Rng rng(103);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(5000);
    const double sigma = std::exp(rng.uniform(-6.0, 6.0));
    std::vector<double> scores(n);
    for (auto& v : scores) v = sigma * rng.gaussian();
    long double mean = 0.0L;
    for (double v : scores) mean += v;
    mean /= static_cast<long double>(n);
    long double ss = 0.0L;
    for (double v : scores) ss += (v - mean) * (v - mean);
    const long double sd = std::sqrt(ss / static_cast<long double>(n));
    const long double ref = std::pow(4.0L / (3.0L * static_cast<long double>(n)), 0.2L) * sd;
    const double got = threshold::bandwidth(scores);
    worst = std::max(worst, static_cast<double>(std::abs(static_cast<long double>(got) - ref) / ref));
  }
  std::ostringstream d;
  d << "max rel err=" << worst;
  return {worst <= 1e-12, d.str()};
}

Outcome threshold_properties() {
  Rng rng(104);
  const std::vector<double> deltas{1e-6, 1e-4, 1e-3, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5};
  int monotone_fail = 0, max_fail = 0, closure_fail = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto scores = random_scores(rng, 30 + rng.below(1000));
    threshold::ThresholdConfig cfg;
    double prev = std::numeric_limits<double>::infinity();
    std::vector<double> taus;
    for (double d : deltas) {
      cfg.delta = d;
      const double tau = threshold::compute(scores, cfg).threshold;
      if (tau > prev) ++monotone_fail;
      prev = tau;
      taus.push_back(tau);
    }
    cfg.delta = 1e-300;
    const auto tiny = threshold::compute(scores, cfg);
    if (tiny.threshold != tiny.grid.back()) ++max_fail;
    taus.push_back(tiny.threshold);

    std::vector<double> sorted = scores;
    std::sort(sorted.begin(), sorted.end());
    for (double tau : taus) {
      bool seen = false;
      for (double s : sorted) {
        const bool flagged = threshold::is_anomalous(s, tau);
        if (seen && !flagged) ++closure_fail;
        seen = seen || flagged;
      }
    }
  }
  std::ostringstream d;
  d << "monotone violations=" << monotone_fail << " grid-max misses=" << max_fail
    << " closure violations=" << closure_fail;
  return {monotone_fail == 0 && max_fail == 0 && closure_fail == 0, d.str()};
}

Eigen::MatrixXd random_block(Rng& rng, long rows, long cols) {
  Eigen::MatrixXd b(rows, cols);
  for (auto& v : b.reshaped()) v = rng.gaussian();
  return b;
}

Outcome mixup_properties() {
  Rng rng(105);
  double id = 0.0, avg = 0.0, aff = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const long rows = 2 + static_cast<long>(rng.below(60)), cols = 1 + static_cast<long>(rng.below(4));
    mixup::MixupConfig cfg;
    cfg.window = 2 * (1 + rng.below(10));
    const auto h = random_block(rng, rows, cols), h2 = random_block(rng, rows, cols), m = random_block(rng, rows, cols);
    cfg.lambda = 1.0;
    id = std::max(id, (mixup::temporal_mixup(h, m, cfg) - h).cwiseAbs().maxCoeff());
    cfg.lambda = 0.0;
    avg = std::max(avg, (mixup::temporal_mixup(h, m, cfg) - oracle::moving_average(m, cfg.window)).cwiseAbs().maxCoeff());
    cfg.lambda = rng.uniform();
    const Eigen::MatrixXd diff = mixup::temporal_mixup(h, m, cfg) - mixup::temporal_mixup(h2, m, cfg);
    aff = std::max(aff, (diff - cfg.lambda * (h - h2)).cwiseAbs().maxCoeff());
  }
  std::ostringstream d;
  d << "identity err=" << id << " moving-average err=" << avg << " affine err=" << aff;
  return {id == 0.0 && avg <= 1e-12 && aff <= 1e-12, d.str()};
}

Outcome lattice() {
  sim::SimConfig base;
  base.seed = kSimSeed;
  const auto initial = sim::simulate(base);
  const auto tasks = sim::make_tasks(base, sim::kDriftAmps, sim::kDriftFreqs);
  pipeline::RunConfig cfg;
  cfg.seed = kRunSeed;
  cfg.train.epochs = 2;
  cfg.mixup.lambda = 1.0;
  cfg.train.meta_learning_rate = 0.0;
  const std::vector<pipeline::Mode> modes{pipeline::Mode::Static, pipeline::Mode::It, pipeline::Mode::Iadcps};

  const auto a = pipeline::run_experiment(cfg, initial, tasks, modes).modes;
  cfg.train.epochs = 0;
  const auto b = pipeline::run_experiment(cfg, initial, tasks, modes).modes;
  int same_it = 0, same_static = 0, moved = 0;
  for (std::size_t k = 0; k < tasks.size(); ++k) {
    same_it += a[2].tasks[k].model.same_parameters(a[1].tasks[k].model);
    moved += !a[1].tasks[k].model.same_parameters(a[0].tasks[k].model);
    same_static += b[2].tasks[k].model.same_parameters(b[1].tasks[k].model) &&
                   b[1].tasks[k].model.same_parameters(b[0].tasks[k].model);
  }
  const int n = static_cast<int>(tasks.size());
  std::ostringstream d;
  d << "iadcps==it on " << same_it << "/" << n << " tasks, all==static with epochs=0 on " << same_static << "/" << n
    << ", it moved on " << moved << "/" << n;
  return {same_it == n && same_static == n && moved == n, d.str()};
}

Outcome f1_spot() {
  const double f1 = eval::f1_score(1.000, 0.981);
  std::ostringstream d;
  d << "F1=" << f1;
  return {std::abs(f1 - 0.990) <= 5e-4, d.str()};
}

Outcome determinism() {
  const auto& a = cached_run("run_a");
  const auto& b = cached_run("run_b");
  if (a.status != 0 || b.status != 0) return {false, "cli run failed"};
  std::size_t files = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::directory_iterator(a.dir)) {
    ++files;
    const fs::path other = b.dir / entry.path().filename();
    if (!fs::exists(other) || read_file(entry.path()) != read_file(other))
      differing.push_back(entry.path().filename().string());
  }
  for (const auto& entry : fs::directory_iterator(b.dir))
    if (!fs::exists(a.dir / entry.path().filename())) differing.push_back(entry.path().filename().string());
  std::ostringstream d;
  d << files << " files compared";
  for (const auto& f : differing) d << ", differs: " << f;
  return {files > 0 && differing.empty(), d.str()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << "usage: acceptance <iadcps-cli> [criterion ...]\n";
    return 2;
  }
  cli_path = argv[1];
  work_dir = fs::temp_directory_path() / ("iadcps_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(work_dir);
  log::set_warning_sink([](const std::string&) {});

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, ordering},  {2, contrast},         {3, gradients}, {4, kde},     {5, bandwidth},
      {6, threshold_properties}, {7, mixup_properties}, {8, lattice}, {9, f1_spot}, {10, determinism}};

  std::vector<int> selected;
  for (int i = 2; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& [id, check] : criteria) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), id) == selected.end()) continue;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << o.detail << std::endl;
  }
  fs::remove_all(work_dir);
  return failures == 0 ? 0 : 1;
}
