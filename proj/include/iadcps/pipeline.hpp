#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "iadcps/eval.hpp"
#include "iadcps/mixup.hpp"
#include "iadcps/scoring.hpp"
#include "iadcps/simulator.hpp"
#include "iadcps/ssm.hpp"
#include "iadcps/threshold.hpp"
#include "iadcps/timeseries.hpp"

namespace iadcps::pipeline {

enum class Mode {
  Static,  ///< pre-trained model and threshold, no updates
  It,      ///< standard training on retained and evolving normals
  Iadcps,  ///< mixup + standard training + meta fine-tuning, dynamic threshold
};

Mode parse_mode(const std::string& name);
std::string to_string(Mode mode);

struct RunConfig {
  Mode mode = Mode::Iadcps;
  std::size_t window = 31;
  std::size_t latent = 8;
  std::vector<std::size_t> hidden = {64};
  mixup::MixupConfig mixup;
  ssm::TrainConfig train;
  threshold::ThresholdConfig threshold;
  scoring::ScorerKind scorer = scoring::ScorerKind::Filter;
  scoring::FilterConfig filter;
  std::uint64_t seed = 0;
  /// Whether the evolving normals join the standard-training merge set in iADCPS mode.
  bool merge_includes_meta = true;
  /// Keep going with the previous model when a task fails.
  bool continue_on_error = false;
  /// Tail share of the initial series held out to calibrate noise and the static threshold.
  double validation_fraction = 0.2;
  /// Leading points of each task series used as evolving normals when a task arrives unsplit.
  std::size_t task_train_len = 1000;

  void validate() const;
};

/// Model and calibration produced by pre-training on the initial series.
struct Pretrained {
  ssm::SsmModel model;
  ts::NormStats stats;
  scoring::NoiseModel noise;
  threshold::KdeResult kde;
  eval::Report report;
  std::vector<double> scores;
  std::vector<ts::Label> labels;
  std::vector<std::int64_t> ticks;
  /// Normalization-free training part of the initial series.
  std::optional<ts::TimeSeries> train_part;
  std::vector<double> loss_trajectory;
};

Pretrained pretrain(const RunConfig& cfg, const ts::TimeSeries& initial);

/// State threaded from one task to the next within a mode.
struct PipelineState {
  ssm::SsmModel model;
  ts::NormStats stats;
  scoring::NoiseModel noise;
  threshold::ScoreMemory memory;
  double frozen_threshold = 0.0;
  /// Raw normal segments retained from the preceding task.
  std::vector<ts::TimeSeries> history;
};

PipelineState initial_state(const RunConfig& cfg, const Pretrained& pre, std::size_t first_train_len);

/// Window pairs entering each stage of one task.
struct TaskDataset {
  std::vector<ts::WindowPair> d_train;
  std::vector<ts::WindowPair> d_meta;
  std::vector<ts::WindowPair> d_mix;
  std::vector<ts::WindowPair> d_query;
};

struct TaskOutcome {
  std::size_t index = 0;
  Mode mode = Mode::Iadcps;
  std::optional<std::string> error;
  ssm::SsmModel model;
  std::vector<double> scores;
  std::vector<ts::Label> labels;
  std::vector<std::int64_t> ticks;
  threshold::KdeResult kde;
  eval::Report report;
  std::vector<double> loss_trajectory;
};

/// One incremental task: adapt state.model to the task and score its query split.
/// On success state holds model K, the refreshed memory and the retained history.
TaskOutcome run_task(PipelineState& state, const sim::Task& task, std::size_t index, const RunConfig& cfg);

/// Set union of pair collections in order of first appearance; exact duplicates are dropped.
std::vector<ts::WindowPair> merge_sets(std::initializer_list<std::span<const ts::WindowPair>> sets);

struct ModeSummary {
  Mode mode = Mode::Iadcps;
  std::vector<TaskOutcome> tasks;
  std::optional<double> mean_auc;
  double mean_f1 = 0.0;
};

struct ExperimentResult {
  Pretrained pretrained;
  std::vector<ModeSummary> modes;
};

/// Pre-trains once, then folds run_task over the tasks independently for each mode.
ExperimentResult run_experiment(const RunConfig& cfg, const ts::TimeSeries& initial, std::span<const sim::Task> tasks,
                                std::span<const Mode> modes);

/// Splits a task series into its leading evolving-normal part and the remaining test part.
sim::Task split_task(const ts::TimeSeries& series, std::size_t train_len);

nlohmann::json to_json(const ExperimentResult& result);

}  // namespace iadcps::pipeline
