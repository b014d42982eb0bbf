#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "config.hpp"
#include "iadcps/csv.hpp"
#include "iadcps/error.hpp"
#include "iadcps/eval.hpp"
#include "iadcps/pipeline.hpp"
#include "iadcps/simulator.hpp"
#include "iadcps/threshold.hpp"

namespace fs = std::filesystem;
using namespace iadcps;
using nlohmann::json;

namespace {

constexpr const char* kConfigEnv = "IADCPS_CONFIG";

// Writes to `path`, or to stdout when path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::string series_text(const ts::TimeSeries& s) {
  std::ostringstream out;
  ts::write_csv(s, out);
  return out.str();
}

struct ConfigSource {
  std::string path;
  std::vector<std::string> sets;

  cli::Config resolve() const {
    std::string file = path;
    if (file.empty())
      if (const char* env = std::getenv(kConfigEnv)) file = env;
    cli::Config cfg = file.empty() ? cli::Config{} : cli::load(file);
    for (const auto& s : sets) cli::set_key(cfg, s);
    return cfg;
  }
};

void add_config_options(CLI::App* cmd, ConfigSource& src) {
  cmd->add_option("--config", src.path, std::string("JSON config (default: $") + kConfigEnv + ")");
  cmd->add_option("--set", src.sets, "override a config key, e.g. --set train.epochs=5")->take_all();
}

// scores as t,score,label
std::string scores_text(const std::vector<std::int64_t>& ticks, const std::vector<double>& scores,
                        const std::vector<ts::Label>& labels) {
  std::ostringstream out;
  out << "t,score,label\n";
  for (std::size_t i = 0; i < scores.size(); ++i)
    out << ticks[i] << ',' << csv::format(scores[i]) << ',' << static_cast<int>(labels[i]) << '\n';
  return out.str();
}

std::string pdf_text(const threshold::KdeResult& kde) {
  std::ostringstream out;
  out << "grid,density\n";
  for (std::size_t i = 0; i < kde.grid.size(); ++i)
    out << csv::format(kde.grid[i]) << ',' << csv::format(kde.density[i]) << '\n';
  return out.str();
}

std::string roc_text(const std::vector<double>& scores, const std::vector<ts::Label>& labels) {
  std::ostringstream out;
  out << "fpr,tpr,score\n";
  for (const auto& p : eval::roc(scores, labels).points)
    out << csv::format(p.fpr) << ',' << csv::format(p.tpr) << ',' << csv::format(p.score) << '\n';
  return out.str();
}

bool has_both_classes(const std::vector<ts::Label>& labels) {
  bool normal = false, anomalous = false;
  for (auto l : labels) {
    normal |= l == ts::Label::Normal;
    anomalous |= l == ts::Label::Anomalous;
  }
  return normal && anomalous;
}

// Scores CSV -> (ticks, scores, labels). Missing label column means unknown labels.
void read_scores(const std::string& path, std::vector<std::int64_t>& ticks, std::vector<double>& scores,
                 std::vector<ts::Label>& labels) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + " is empty");
  const auto header = csv::split(line);
  if (header.size() < 2 || header[0] != "t" || header[1] != "score")
    throw DataError(path + ":1: expected header t,score[,label]");
  const bool labelled = header.size() > 2;
  for (std::size_t row = 2; std::getline(in, line); ++row) {
    if (line.empty() || line == "\r") continue;
    const auto f = csv::split(line);
    long long t = 0, label = -1;
    double s = 0.0;
    if (f.size() != header.size() || !csv::parse(f[0], t) || !csv::parse(f[1], s) ||
        (labelled && !csv::parse(f[2], label)))
      throw DataError(path + ":" + std::to_string(row) + ": malformed row");
    if (label < -1 || label > 1) throw DataError(path + ":" + std::to_string(row) + ": label must be -1, 0 or 1");
    ticks.push_back(t);
    scores.push_back(s);
    labels.push_back(static_cast<ts::Label>(label));
  }
  if (scores.empty()) throw DataError(path + " holds no scores");
}

int cmd_simulate(const sim::SimConfig& cfg, const std::string& out) {
  emit(out, series_text(sim::simulate(cfg)));
  return 0;
}

int cmd_evolve(const std::string& input, const sim::EvolveSpec& spec, const std::string& out) {
  emit(out, series_text(sim::evolve(ts::load_csv(input), spec)));
  return 0;
}

ts::TimeSeries initial_series(const cli::Config& cfg, const std::string& path) {
  return path.empty() ? sim::simulate(cfg.sim.base) : ts::load_csv(path);
}

int cmd_train(const ConfigSource& src, const std::string& initial, const std::string& out) {
  const cli::Config cfg = src.resolve();
  const auto pre = pipeline::pretrain(cfg.run, initial_series(cfg, initial));
  ssm::save_checkpoint(pre.model, out);
  json summary{{"checkpoint", out},
               {"parameters", pre.model.parameter_count()},
               {"initial_loss", pre.loss_trajectory.front()},
               {"final_loss", pre.loss_trajectory.back()},
               {"validation", eval::to_json(pre.report)}};
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_run(const ConfigSource& src, const std::string& mode, const std::string& initial,
            const std::vector<std::string>& task_files, const std::string& out_dir) {
  cli::Config cfg = src.resolve();
  if (!mode.empty() && mode != "all") cfg.run.mode = pipeline::parse_mode(mode);
  cfg.run.validate();

  std::vector<sim::Task> tasks;
  if (task_files.empty()) {
    tasks = sim::make_tasks(cfg.sim.base, cfg.sim.amps, cfg.sim.freqs, cfg.sim.train_len, cfg.sim.test_len);
  } else {
    for (const auto& f : task_files) tasks.push_back(pipeline::split_task(ts::load_csv(f), cfg.run.task_train_len));
  }
  std::vector<pipeline::Mode> modes{cfg.run.mode};
  if (mode == "all") modes = {pipeline::Mode::Static, pipeline::Mode::It, pipeline::Mode::Iadcps};

  const auto result = pipeline::run_experiment(cfg.run, initial_series(cfg, initial), tasks, modes);

  fs::create_directories(out_dir);
  json artifacts = json::array();
  auto write = [&](const std::string& name, const std::string& text) {
    emit((fs::path(out_dir) / name).string(), text);
    artifacts.push_back(name);
  };
  write("report.json", pipeline::to_json(result).dump(2) + "\n");
  write("scores_pretrain.csv", scores_text(result.pretrained.ticks, result.pretrained.scores, result.pretrained.labels));
  write("pdf_pretrain.csv", pdf_text(result.pretrained.kde));
  for (const auto& summary : result.modes) {
    for (const auto& t : summary.tasks) {
      if (t.error) continue;
      const std::string stem = pipeline::to_string(summary.mode) + "_task" + std::to_string(t.index);
      write("scores_" + stem + ".csv", scores_text(t.ticks, t.scores, t.labels));
      write("pdf_" + stem + ".csv", pdf_text(t.kde));
      if (has_both_classes(t.labels)) write("roc_" + stem + ".csv", roc_text(t.scores, t.labels));
    }
  }
  json manifest{{"config", cli::to_json(cfg)},
                {"seed", cfg.run.seed},
                {"modes", mode == "all" ? json("all") : json(pipeline::to_string(cfg.run.mode))},
                {"initial", initial.empty() ? json("simulated") : json(initial)},
                {"tasks", task_files.empty() ? json("simulated") : json(task_files)},
                {"artifacts", artifacts}};
  emit((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");

  for (const auto& summary : result.modes) {
    std::cout << pipeline::to_string(summary.mode);
    for (const auto& t : summary.tasks) {
      if (t.error) std::cout << "  task" << t.index << " failed";
      else std::cout << "  task" << t.index << " f1=" << t.report.metrics.f1 << " auc=" << (t.report.auc ? *t.report.auc : -1.0);
    }
    std::cout << '\n';
  }
  return 0;
}

int cmd_eval(const std::string& scores_path, double delta, std::size_t grid_points) {
  std::vector<std::int64_t> ticks;
  std::vector<double> scores;
  std::vector<ts::Label> labels;
  read_scores(scores_path, ticks, scores, labels);
  threshold::ThresholdConfig tcfg;
  tcfg.delta = delta;
  tcfg.grid_points = grid_points;
  const auto kde = threshold::compute(scores, tcfg);
  json out = eval::to_json(eval::make_report(scores, labels, kde.threshold));
  out["bandwidth"] = kde.bandwidth;
  out["delta"] = delta;
  out["flagged"] = std::count_if(scores.begin(), scores.end(),
                                 [&](double s) { return threshold::is_anomalous(s, kde.threshold); });
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Incremental anomaly detection for evolving cyber-physical systems"};
  app.require_subcommand(1);
  const std::string keys_help = "Config keys (JSON file sections use the dotted prefixes):\n" + cli::describe_keys();
  app.footer(keys_help);

  sim::SimConfig sim_cfg;
  std::string sim_out;
  auto* simulate = app.add_subcommand("simulate", "write a simulated series as CSV");
  simulate->add_option("--T", sim_cfg.length, "number of points")->capture_default_str();
  simulate->add_option("--amp", sim_cfg.amp, "amplitude")->capture_default_str();
  simulate->add_option("--freq", sim_cfg.freq, "frequency divisor")->capture_default_str();
  simulate->add_option("--u0", sim_cfg.u0, "initial actuator value")->capture_default_str();
  simulate->add_option("--seed", sim_cfg.seed, "noise seed")->capture_default_str();
  simulate->add_option("--meas-noise", sim_cfg.meas_noise_std)->capture_default_str();
  simulate->add_option("--proc-noise", sim_cfg.proc_noise_std)->capture_default_str();
  simulate->add_option("--anomaly-noise", sim_cfg.anomaly_noise_std)->capture_default_str();
  simulate->add_option("--start-tick", sim_cfg.start_tick)->capture_default_str();
  simulate->add_flag("--anomalies", sim_cfg.inject_anomalies, "inject anomaly blocks");
  simulate->add_option("-o,--out", sim_out, "output CSV (default stdout)");

  std::string evolve_in, evolve_out, evolve_mode = "mix";
  sim::EvolveSpec spec;
  auto* evolve = app.add_subcommand("evolve", "remove or upgrade devices in a series");
  evolve->add_option("--input", evolve_in, "input CSV")->required();
  evolve->add_option("--mode", evolve_mode, "remove, upgrade or mix")->capture_default_str();
  evolve->add_option("--devices", spec.devices, "channels affected")->capture_default_str();
  evolve->add_option("--seed", spec.seed)->capture_default_str();
  evolve->add_option("--factor-lo", spec.factor_lo)->capture_default_str();
  evolve->add_option("--factor-hi", spec.factor_hi)->capture_default_str();
  evolve->add_option("-o,--out", evolve_out, "output CSV (default stdout)");

  ConfigSource train_src;
  std::string train_initial, checkpoint = "model.json";
  auto* train = app.add_subcommand("train", "pre-train a model and save a checkpoint");
  add_config_options(train, train_src);
  train->footer(keys_help);
  train->add_option("--initial", train_initial, "initial series CSV (default: simulated from sim.*)");
  train->add_option("-o,--out", checkpoint, "checkpoint path")->capture_default_str();

  ConfigSource run_src;
  std::string run_mode, run_initial, run_out = "run_out";
  std::vector<std::string> run_tasks;
  auto* run = app.add_subcommand("run", "pre-train, then adapt and score each task");
  add_config_options(run, run_src);
  run->footer(keys_help);
  run->add_option("--mode", run_mode, "static, it, iadcps or all (default: config mode)");
  run->add_option("--initial", run_initial, "initial series CSV (default: simulated from sim.*)");
  run->add_option("--tasks", run_tasks, "task CSVs; each splits into task_train_len normals and a test part")
      ->delimiter(',');
  run->add_option("-o,--out", run_out, "output directory")->capture_default_str();

  std::string eval_scores;
  threshold::ThresholdConfig eval_cfg;
  auto* evaluate = app.add_subcommand("eval", "threshold a scores CSV and report metrics");
  evaluate->add_option("--scores", eval_scores, "CSV with t,score[,label]")->required();
  evaluate->add_option("--delta", eval_cfg.delta, "density cutoff")->capture_default_str();
  evaluate->add_option("--grid-points", eval_cfg.grid_points, "KDE query points")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) return cmd_simulate(sim_cfg, sim_out);
    if (evolve->parsed()) {
      spec.mode = sim::parse_evolve_mode(evolve_mode);
      return cmd_evolve(evolve_in, spec, evolve_out);
    }
    if (train->parsed()) return cmd_train(train_src, train_initial, checkpoint);
    if (run->parsed()) return cmd_run(run_src, run_mode, run_initial, run_tasks, run_out);
    if (evaluate->parsed()) return cmd_eval(eval_scores, eval_cfg.delta, eval_cfg.grid_points);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
