#include "iadcps/pipeline.hpp"

#include <algorithm>
#include <cstring>
#include <functional>
#include <unordered_set>

#include "iadcps/error.hpp"
#include "iadcps/log.hpp"

namespace iadcps::pipeline {

Mode parse_mode(const std::string& name) {
  if (name == "static") return Mode::Static;
  if (name == "it") return Mode::It;
  if (name == "iadcps") return Mode::Iadcps;
  throw ConfigError("unknown mode '" + name + "' (expected static, it or iadcps)");
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Static: return "static";
    case Mode::It: return "it";
    case Mode::Iadcps: return "iadcps";
  }
  return "?";
}

void RunConfig::validate() const {
  if (window == 0) throw ConfigError("window length must be positive");
  if (latent == 0) throw ConfigError("latent size must be positive");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden layer widths must be positive");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ConfigError("validation fraction must lie in [0, 1)");
  if (task_train_len == 0) throw ConfigError("task train length must be positive");
  mixup.validate();
  train.validate();
  threshold.validate();
}

namespace {

// Runs one stage, prefixing any error with the stage name while keeping its type.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string("[") + name + "] ";
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  } catch (const DataError& e) {
    throw DataError(prefix + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

std::vector<ts::WindowPair> normal_pairs(const ts::TimeSeries& series, const ts::NormStats& stats, std::size_t w) {
  auto pairs = ts::sliding_pairs(ts::apply_norm(series, stats), w);
  std::erase_if(pairs, [](const ts::WindowPair& p) { return p.label == ts::Label::Anomalous; });
  return pairs;
}

struct PairHash {
  std::size_t operator()(const ts::WindowPair* p) const {
    std::size_t h = 1469598103934665603ULL;
    auto mix = [&h](const Eigen::VectorXd& v) {
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        std::uint64_t bits = 0;
        const double d = v[i];
        std::memcpy(&bits, &d, sizeof bits);
        h = (h ^ bits) * 1099511628211ULL;
      }
    };
    mix(p->x);
    mix(p->u);
    mix(p->y);
    return h;
  }
};

struct PairEq {
  bool operator()(const ts::WindowPair* a, const ts::WindowPair* b) const {
    auto same = [](const Eigen::VectorXd& l, const Eigen::VectorXd& r) {
      return l.size() == r.size() && std::memcmp(l.data(), r.data(), sizeof(double) * l.size()) == 0;
    };
    return same(a->x, b->x) && same(a->u, b->u) && same(a->y, b->y);
  }
};

}  // namespace

std::vector<ts::WindowPair> merge_sets(std::initializer_list<std::span<const ts::WindowPair>> sets) {
  std::unordered_set<const ts::WindowPair*, PairHash, PairEq> seen;
  std::vector<ts::WindowPair> merged;
  for (const auto& set : sets)
    for (const auto& pair : set)
      if (seen.insert(&pair).second) merged.push_back(pair);
  return merged;
}

// ---------------------------------------------------------------------------

Pretrained pretrain(const RunConfig& cfg, const ts::TimeSeries& initial) {
  cfg.validate();
  const std::size_t w = cfg.window;
  const auto held_out = static_cast<std::size_t>(static_cast<double>(initial.size()) * cfg.validation_fraction);
  const bool separate_validation = held_out >= w + 10 && initial.size() - held_out > w;

  Pretrained pre;
  pre.train_part = separate_validation ? initial.slice(0, initial.size() - held_out) : initial;
  const ts::TimeSeries validation =
      separate_validation ? initial.slice(initial.size() - held_out, held_out) : *pre.train_part;

  pre.stats = ts::fit_norm(*pre.train_part);
  const auto train_pairs = stage("pretrain", [&] { return normal_pairs(*pre.train_part, pre.stats, w); });
  const auto val_pairs = stage("pretrain", [&] { return ts::sliding_pairs(ts::apply_norm(validation, pre.stats), w); });

  Rng init_rng(Rng::derive(cfg.seed, 1));
  ssm::Architecture arch{w, initial.sensors(), initial.actuators(), cfg.latent, cfg.hidden};
  pre.model = ssm::SsmModel::create(arch, init_rng, cfg.train.learning_rate);

  ssm::TrainConfig train = cfg.train;
  train.seed = Rng::derive(cfg.seed, 2);
  pre.model = stage("pretrain", [&] { return ssm::train_standard(pre.model, train_pairs, train, &pre.loss_trajectory); });
  pre.model.stage = ssm::Stage::Previous;

  std::vector<ts::WindowPair> calib = val_pairs;
  std::erase_if(calib, [](const ts::WindowPair& p) { return p.label == ts::Label::Anomalous; });
  pre.noise = stage("calibrate", [&] { return scoring::estimate_noise(pre.model, calib); });
  pre.scores = stage("score", [&] { return scoring::score_stream(pre.model, val_pairs, pre.noise, cfg.scorer, cfg.filter); });
  for (const auto& p : val_pairs) {
    pre.labels.push_back(p.label);
    pre.ticks.push_back(p.t);
  }
  pre.kde = stage("threshold", [&] { return threshold::compute(pre.scores, cfg.threshold); });
  pre.report = eval::make_report(pre.scores, pre.labels, pre.kde.threshold);
  return pre;
}

PipelineState initial_state(const RunConfig& cfg, const Pretrained& pre, std::size_t first_train_len) {
  PipelineState state{pre.model, pre.stats, pre.noise, threshold::ScoreMemory(cfg.threshold.memory),
                      pre.kde.threshold, {}};
  const ts::TimeSeries& source = *pre.train_part;
  const std::size_t keep = std::min(source.size(), std::max(first_train_len, cfg.window + 1));
  state.history.push_back(source.slice(source.size() - keep, keep));
  return state;
}

TaskOutcome run_task(PipelineState& state, const sim::Task& task, std::size_t index, const RunConfig& cfg) {
  cfg.validate();
  const std::size_t w = cfg.window;
  const std::size_t m = state.model.sensors;
  const std::size_t k = state.model.actuators;
  if (task.train.sensors() != m || task.train.actuators() != k || task.test.sensors() != m ||
      task.test.actuators() != k)
    throw DataError("[prepare] task " + std::to_string(index) + " channels do not match the model");

  TaskOutcome out;
  out.index = index;
  out.mode = cfg.mode;
  const bool adapts = cfg.mode != Mode::Static;

  // normalization: refit on retained history plus the evolving normals
  ts::NormStats stats = state.stats;
  if (adapts) {
    stats = ts::fit_norm(task.train);
    for (const auto& seg : state.history) stats = ts::merge(stats, ts::fit_norm(seg));
  }

  TaskDataset data;
  stage("prepare", [&] {
    data.d_meta = normal_pairs(task.train, stats, w);
    for (const auto& seg : state.history) {
      auto pairs = normal_pairs(seg, stats, w);
      data.d_train.insert(data.d_train.end(), pairs.begin(), pairs.end());
    }
    data.d_query = ts::sliding_pairs(ts::apply_norm(task.test, stats), w);
  });

  ssm::SsmModel model = state.model;
  model.stage = ssm::Stage::Previous;
  if (cfg.mode == Mode::Iadcps) {
    mixup::MixupConfig mix = cfg.mixup;
    mix.seed = Rng::derive(cfg.mixup.seed ^ cfg.seed, 1000 + index);
    data.d_mix = stage("mixup", [&] { return mixup::build_mixed_dataset(data.d_train, data.d_meta, mix, m, k); });
  }

  if (adapts) {
    const std::vector<ts::WindowPair> merge =
        cfg.mode == Mode::Iadcps
            ? (cfg.merge_includes_meta ? merge_sets({data.d_train, data.d_mix, data.d_meta})
                                       : merge_sets({data.d_train, data.d_mix}))
            : merge_sets({data.d_train, data.d_meta});
    ssm::TrainConfig train = cfg.train;
    train.seed = Rng::derive(cfg.seed, 2000 + index);
    model = stage("train", [&] { return ssm::train_standard(model, merge, train, &out.loss_trajectory); });
  }
  if (cfg.mode == Mode::Iadcps && cfg.train.episodes > 0)
    model = stage("meta", [&] { return ssm::meta_finetune(model, data.d_meta, cfg.train); });

  const scoring::NoiseModel noise =
      adapts ? stage("calibrate", [&] { return scoring::estimate_noise(model, data.d_meta); }) : state.noise;
  out.scores = stage("score", [&] { return scoring::score_stream(model, data.d_query, noise, cfg.scorer, cfg.filter); });
  for (const auto& p : data.d_query) {
    out.labels.push_back(p.label);
    out.ticks.push_back(p.t);
  }

  threshold::ScoreMemory memory = state.memory;
  memory.push(out.scores);
  out.kde = stage("threshold", [&] { return threshold::compute(memory.snapshot(), cfg.threshold); });
  if (!adapts) out.kde.threshold = state.frozen_threshold;
  out.report = eval::make_report(out.scores, out.labels, out.kde.threshold);
  out.model = model;

  state.model = std::move(model);
  state.stats = stats;
  state.noise = noise;
  state.memory = std::move(memory);
  state.history = {task.train};
  return out;
}

sim::Task split_task(const ts::TimeSeries& series, std::size_t train_len) {
  if (train_len >= series.size())
    throw DataError("task of length " + std::to_string(series.size()) + " cannot hold " + std::to_string(train_len) +
                    " evolving normal points plus a test split");
  return {series.slice(0, train_len), series.slice(train_len, series.size() - train_len)};
}

ExperimentResult run_experiment(const RunConfig& cfg, const ts::TimeSeries& initial, std::span<const sim::Task> tasks,
                                std::span<const Mode> modes) {
  ExperimentResult result{pretrain(cfg, initial), {}};
  for (Mode mode : modes) {
    RunConfig mode_cfg = cfg;
    mode_cfg.mode = mode;
    ModeSummary summary;
    summary.mode = mode;
    if (tasks.empty()) {
      result.modes.push_back(std::move(summary));
      continue;
    }
    PipelineState state = initial_state(mode_cfg, result.pretrained, tasks.front().train.size());
    double auc_sum = 0.0;
    std::size_t auc_count = 0;
    double f1_sum = 0.0;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      try {
        summary.tasks.push_back(run_task(state, tasks[i], i + 1, mode_cfg));
      } catch (const Error& e) {
        if (!cfg.continue_on_error) throw;
        log::warn(to_string(mode) + " task " + std::to_string(i + 1) + " failed: " + e.what());
        TaskOutcome failed;
        failed.index = i + 1;
        failed.mode = mode;
        failed.error = e.what();
        failed.model = state.model;
        summary.tasks.push_back(std::move(failed));
        continue;
      }
      const auto& report = summary.tasks.back().report;
      f1_sum += report.metrics.f1;
      if (report.auc) {
        auc_sum += *report.auc;
        ++auc_count;
      }
    }
    summary.mean_f1 = f1_sum / static_cast<double>(tasks.size());
    if (auc_count > 0) summary.mean_auc = auc_sum / static_cast<double>(auc_count);
    result.modes.push_back(std::move(summary));
  }
  return result;
}

nlohmann::json to_json(const ExperimentResult& result) {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& summary : result.modes) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& t : summary.tasks) {
      nlohmann::json entry{{"task", t.index}, {"error", nullptr}};
      if (t.error) {
        entry["error"] = *t.error;
      } else {
        entry["report"] = eval::to_json(t.report);
        entry["stage"] = ssm::to_string(t.model.stage);
        entry["bandwidth"] = t.kde.bandwidth;
        entry["query_points"] = t.scores.size();
      }
      tasks.push_back(std::move(entry));
    }
    nlohmann::json s{{"mode", to_string(summary.mode)}, {"tasks", std::move(tasks)}, {"mean_f1", summary.mean_f1},
                     {"mean_auc", nullptr}};
    if (summary.mean_auc) s["mean_auc"] = *summary.mean_auc;
    modes.push_back(std::move(s));
  }
  return {{"pretrain",
           {{"report", eval::to_json(result.pretrained.report)},
            {"validation_points", result.pretrained.scores.size()},
            {"final_loss", result.pretrained.loss_trajectory.empty() ? nlohmann::json(nullptr)
                                                                      : nlohmann::json(result.pretrained.loss_trajectory.back())}}},
          {"modes", std::move(modes)}};
}

}  // namespace iadcps::pipeline
