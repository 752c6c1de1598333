#ifndef GROUNDHOG_COMMANDS_H_
#define GROUNDHOG_COMMANDS_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "groundhog/checkpoint.h"
#include "groundhog/losses.h"
#include "groundhog/metrics.h"
#include "groundhog/model.h"
#include "groundhog/run_config.h"
#include "json.hpp"

namespace groundhog {

using std::filesystem::path;

struct GenDataOptions {
  std::optional<path> config;
  path out;
  std::optional<std::uint64_t> seed;
  int n = 100;
};

struct GenDataStats {
  int total = 0;
  std::map<std::string, int> per_task;
};

void to_json(nlohmann::json& j, const GenDataStats& s);

GenDataStats cmd_gen_data(const GenDataOptions& opts);

struct TrainCmdOptions {
  std::vector<path> corpus;  // appended to the config's corpus list
  std::optional<path> config;
  path out_ckpt;
  std::optional<path> resume;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> threads;
};

struct TrainSummary {
  LossBundle first;
  LossBundle last;
  std::int64_t steps = 0;
  std::int64_t epochs = 0;
};

// Writes <out_ckpt>/{manifest.json, weights.ght1, optimizer.ght1,
// train_log.jsonl}. Throws NumericError on a non-finite loss.
TrainSummary cmd_train(const TrainCmdOptions& opts);

// Training on in-memory data; cmd_train is a thin wrapper around it.
TrainSummary train_model(Checkpoint& ckpt, const RunConfig& config,
                         std::span<const GroundedConversation> corpus,
                         std::ostream* log);

struct DecodeOptions {
  int max_new_tokens = 48;
};

// One prediction record of the JSONL prediction file.
struct PhrasePrediction {
  int phrase_id = 0;
  std::string text;
  BinaryMask mask;
  std::vector<Box> selected_boxes;
  std::vector<double> score_vector;
};

struct SamplePrediction {
  std::int64_t sample_id = 0;
  std::string response;
  std::vector<PhrasePrediction> phrases;
  std::vector<std::string> warnings;
};

nlohmann::json prediction_to_json(const SamplePrediction& p);
SamplePrediction prediction_from_json(const nlohmann::json& j);

// Decodes the reply to the first user turn of `c`.
SamplePrediction predict(const Model& model, const GroundedConversation& c,
                         const DecodeOptions& opts = {});

inline constexpr std::string_view kAllMetrics = "ciou,miou,f1,anyiou,pope,recall@1";

// Routes predictions against gt conversations (matched by sample id).
// Throws InvalidArgument on an unknown metric name.
std::vector<MetricReport> evaluate(std::span<const GroundedConversation> gt,
                                   std::span<const SamplePrediction> preds,
                                   const std::vector<std::string>& metrics);

struct EvalOptions {
  path ckpt;
  path corpus;
  std::vector<std::string> metrics;
  std::optional<path> predictions_in;   // skip decoding, score this file
  std::optional<path> predictions_out;  // write decoded predictions
  DecodeOptions decode;
};

nlohmann::json cmd_eval(const EvalOptions& opts);

// Scene file: {"scene": ..., "proposals": [...]?, "pointers": [...]?,
// "targets": [RLE, ...]?}. Without proposals the scene's oracle masks are
// used.
struct SceneFile {
  Scene scene;
  ProposalSet proposals;
  std::vector<Pointer> pointers;
  std::vector<BinaryMask> targets;
};

SceneFile read_scene_file(const path& p);
nlohmann::json scene_file_to_json(const SceneFile& s);

struct GroundOptions {
  path ckpt;
  path scene;
  std::string text;
  DecodeOptions decode;
};

nlohmann::json cmd_ground(const GroundOptions& opts);
nlohmann::json ground_scene(const Model& model, const SceneFile& scene, std::string_view text,
                            const DecodeOptions& decode = {});

struct DiagnoseOptions {
  path ckpt;
  path scene;
  std::string text;
  int topk = 5;
  std::optional<path> ppm_dir;
  DecodeOptions decode;
};

nlohmann::json cmd_diagnose(const DiagnoseOptions& opts);
nlohmann::json diagnose_scene(const Model& model, const SceneFile& scene, std::string_view text,
                              int topk, const std::optional<path>& ppm_dir,
                              const DecodeOptions& decode = {});

// Binary P6 image, 8-bit RGB.
void write_ppm(const path& p, int width, int height, const std::vector<std::uint8_t>& rgb);

}  // namespace groundhog

#endif  // GROUNDHOG_COMMANDS_H_
