#ifndef GROUNDHOG_RUN_CONFIG_H_
#define GROUNDHOG_RUN_CONFIG_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "groundhog/model.h"
#include "groundhog/synth.h"
#include "groundhog/trainer.h"
#include "json.hpp"

namespace groundhog {

// One JSON document configuring generation, training and evaluation. Every
// field is optional; see README for the layout.
struct RunConfig {
  std::uint64_t seed = 0;
  ModelConfig model;  // vocab_size is taken from the corpus vocabulary
  TrainOptions train;
  int epochs = 160;
  // Loss log cadence in steps; 0 logs once per epoch.
  int log_every = 0;
  GenConfig data;
  // Sampling ratio per conversation source; missing sources use 1.0.
  std::map<std::string, double> sampler_ratios;
  std::vector<std::filesystem::path> corpus_paths;
  std::filesystem::path out;
};

void to_json(nlohmann::json& j, const PerturbSpec& p);
void from_json(const nlohmann::json& j, PerturbSpec& p);
void to_json(nlohmann::json& j, const GenConfig& g);
void from_json(const nlohmann::json& j, GenConfig& g);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

// Throws InvalidArgument on unknown keys or bad values.
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace groundhog

#endif  // GROUNDHOG_RUN_CONFIG_H_
