#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "iadcps/pipeline.hpp"
#include "iadcps/simulator.hpp"

namespace iadcps::cli {

/// Simulated schedule used when `run` gets no task files.
struct Schedule {
  sim::SimConfig base;
  std::vector<double> amps{std::begin(sim::kDriftAmps), std::end(sim::kDriftAmps)};
  std::vector<double> freqs{std::begin(sim::kDriftFreqs), std::end(sim::kDriftFreqs)};
  std::size_t train_len = 500;
  std::size_t test_len = 2000;
};

struct Config {
  pipeline::RunConfig run;
  Schedule sim;
};

/// Every key as "section.name = default  description", one per line.
std::string describe_keys();

/// Applies a JSON object on top of cfg. Unknown keys and wrong types are ConfigErrors.
void apply_json(Config& cfg, const nlohmann::json& j);
/// Sets one dotted key from text; the text is read as JSON, falling back to a plain string.
void set_key(Config& cfg, const std::string& assignment);
Config load(const std::string& path);
nlohmann::json to_json(const Config& cfg);

}  // namespace iadcps::cli
