#ifndef GROUNDHOG_SYNTH_H_
#define GROUNDHOG_SYNTH_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "groundhog/features.h"
#include "groundhog/mask.h"
#include "groundhog/vocab.h"

namespace groundhog {

inline constexpr int kSceneSize = 32;
inline constexpr int kFeatureGrid = 8;
inline constexpr int kHorizonRow = 16;
inline constexpr int kNumColors = 8;
inline constexpr int kBackboneADim = kNumColors;
inline constexpr int kBackboneBDim = 4;

inline constexpr std::array<std::string_view, kNumColors> kColorNames = {
    "red", "green", "blue", "yellow", "purple", "orange", "white", "pink"};

enum class Shape { kSquare, kDisc, kTriangle };
enum class Region { kSky, kGround };

inline constexpr std::array<Shape, 3> kAllShapes = {Shape::kSquare, Shape::kDisc,
                                                    Shape::kTriangle};

std::string_view to_string(Shape s);
std::string_view plural(Shape s);
std::string_view to_string(Region r);
// "in the sky" / "on the ground"
std::string_view region_phrase(Region r);
Shape shape_from_string(std::string_view s);
Region region_from_string(std::string_view s);
int color_from_string(std::string_view s);

struct Part {
  std::string name;
  BinaryMask mask;
};

struct Entity {
  BinaryMask mask;
  int color = 0;  // index into kColorNames
  Shape shape = Shape::kSquare;
  Region region = Region::kSky;
  std::vector<Part> parts;
};

// 32x32 scene. `colors` holds 0 for background and 1 + color index for
// entity pixels; rows above `horizon` are sky, the rest ground.
struct Scene {
  int height = kSceneSize;
  int width = kSceneSize;
  int horizon = kHorizonRow;
  std::vector<std::uint8_t> colors;
  std::vector<Entity> entities;

  Region region_at(int row) const {
    return row < horizon ? Region::kSky : Region::kGround;
  }
  // 0 for background, 1 + entity index otherwise.
  std::vector<int> labels() const;
};

// Partial attribute request for a generated entity.
struct EntitySpec {
  std::optional<int> color;
  std::optional<Shape> shape;
  std::optional<Region> region;
};

struct SceneConfig {
  int n_entities = 3;
  bool allow_parts = false;
  bool allow_negatives = true;
  // Every entity gets a distinct (color, shape, region) combination.
  bool unique_attributes = true;
  std::vector<EntitySpec> required;
  int max_retries = 400;
};

Scene gen_scene(std::uint64_t seed, const SceneConfig& config);

struct PerturbSpec {
  int shift_px = 2;
  bool dilate = true;
  bool erode = true;
  bool split = true;
  int n_distractors = 4;
  bool shuffle = true;

  bool enabled() const {
    return n_distractors > 0 && (shift_px > 0 || dilate || erode || split);
  }
  static PerturbSpec disabled() { return {0, false, false, false, 0, false}; }
  // Only distractors that extend past their parent entity.
  static PerturbSpec outside_only() { return {2, true, false, false, 4, true}; }
};

// Oracle masks (entities then parts) plus seeded distractors; optionally
// shuffled.
ProposalSet gen_proposals(const Scene& scene, const PerturbSpec& perturb,
                          std::uint64_t seed);

// Backbone A: per-block color fractions (8 channels). Backbone B: occupancy,
// horizontal-edge density, vertical-edge density, ground fraction; all in [0, 1].
std::pair<FeatureMap, FeatureMap> encode_backbones(const Scene& scene);

enum class Task { kGcap, kRes, kGvqa, kRd };
enum class Role { kSystem, kUser, kAssistant };
enum class Supervision { kNone, kMask, kBox };

std::string_view to_string(Task t);
Task task_from_string(std::string_view s);
std::string_view to_string(Role r);
Role role_from_string(std::string_view s);
std::string_view to_string(Supervision s);
Supervision supervision_from_string(std::string_view s);

// A grounded phrase inside an assistant turn. `grd_start`/`grd_end` index the
// <GRD> and </GRD> tokens of the turn's token sequence.
struct GroundedSpan {
  int grd_start = 0;
  int grd_end = 0;
  Supervision supervision = Supervision::kNone;
  std::vector<BinaryMask> masks;
  std::vector<Box> boxes;
};

struct Turn {
  Role role = Role::kUser;
  std::string text;
  std::vector<GroundedSpan> spans;
  std::vector<Pointer> pointers;
};

inline constexpr std::string_view kCorpusSchema = "m3g2-toy/1";

struct GroundedConversation {
  std::int64_t id = 0;
  Task task = Task::kRes;
  std::string source;
  Scene scene;
  ProposalSet proposals;
  std::vector<Turn> turns;
};

// "<s> USER: ... ASSISTANT: ... </s>" with an optional leading system turn.
std::string serialize_conversation(const GroundedConversation& c);

// Throws DataError describing the first violation.
void validate(const GroundedConversation& c, const Vocabulary& vocab);

enum class ResKind { kSingle, kMulti, kNegative, kPart };
enum class VqaKind { kPresence, kCount };

struct TaskOptions {
  Supervision supervision = Supervision::kMask;
  std::optional<ResKind> res_kind;
  std::optional<VqaKind> vqa_kind;
  // Presence questions: answer yes (true) or no (false); unset = either.
  std::optional<bool> vqa_positive;
  double p_mask_pointer = 0.5;
  bool system_message = false;
};

GroundedConversation make_conversation(const Scene& scene,
                                       const ProposalSet& proposals, Task task,
                                       std::uint64_t template_seed,
                                       const TaskOptions& options = {});

// Every word any template or response can produce.
Vocabulary corpus_vocabulary();

struct SamplerSpec {
  std::map<std::string, double> ratios;  // missing source -> 1.0
  std::uint64_t seed = 0;
};

struct SampleRef {
  std::string source;
  std::size_t index = 0;
  bool operator==(const SampleRef&) const = default;
};

struct BalancedStream {
  std::vector<SampleRef> order;
  std::map<std::string, std::size_t> contributed;
  std::vector<std::string> warnings;
};

BalancedStream balance_sample(const std::map<std::string, std::size_t>& sizes,
                              const SamplerSpec& spec);

template <typename T>
BalancedStream balance_sample(const std::map<std::string, std::vector<T>>& corpora,
                              const SamplerSpec& spec) {
  std::map<std::string, std::size_t> sizes;
  for (const auto& [k, v] : corpora) sizes[k] = v.size();
  return balance_sample(sizes, spec);
}

// Corpus-level generation settings.
struct GenConfig {
  std::map<Task, double> task_mix = {{Task::kRes, 0.4},
                                     {Task::kGcap, 0.2},
                                     {Task::kGvqa, 0.2},
                                     {Task::kRd, 0.2}};
  int min_entities = 2;
  int max_entities = 4;
  bool allow_parts = true;
  double p_multi = 0.15;
  double p_negative = 0.15;
  double p_part = 0.1;
  double box_fraction = 0.0;
  double p_mask_pointer = 0.5;
  PerturbSpec perturb;
};

// Sample `index` of a corpus: uses seed derive_seed(seed, index) only.
GroundedConversation generate_sample(std::uint64_t seed, std::int64_t index,
                                     Task task, const GenConfig& config);
// A sample with an explicit RES kind (used for held-out probes).
GroundedConversation generate_res_sample(std::uint64_t seed, std::int64_t index,
                                         ResKind kind, const GenConfig& config);

std::vector<GroundedConversation> generate_corpus(std::uint64_t seed, int n,
                                                  const GenConfig& config);

}  // namespace groundhog

#endif  // GROUNDHOG_SYNTH_H_
