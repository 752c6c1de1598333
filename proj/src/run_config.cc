#include "groundhog/run_config.h"

#include <fstream>
#include <set>

#include "groundhog/errors.h"

namespace groundhog {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw InvalidArgument(std::string(where) + " must be an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items()) {
    if (!known.contains(k)) throw InvalidArgument(std::string("unknown key in ") + where + ": " + k);
  }
}

}  // namespace

void to_json(json& j, const PerturbSpec& p) {
  j = {{"shift_px", p.shift_px}, {"dilate", p.dilate},   {"erode", p.erode},
       {"split", p.split},       {"n_distractors", p.n_distractors},
       {"shuffle", p.shuffle}};
}

void from_json(const json& j, PerturbSpec& p) {
  reject_unknown(j, {"shift_px", "dilate", "erode", "split", "n_distractors", "shuffle"},
                 "perturb");
  PerturbSpec d;
  p.shift_px = j.value("shift_px", d.shift_px);
  p.dilate = j.value("dilate", d.dilate);
  p.erode = j.value("erode", d.erode);
  p.split = j.value("split", d.split);
  p.n_distractors = j.value("n_distractors", d.n_distractors);
  p.shuffle = j.value("shuffle", d.shuffle);
  if (p.shift_px < 0 || p.n_distractors < 0)
    throw InvalidArgument("perturb values must be non-negative");
}

void to_json(json& j, const GenConfig& g) {
  json mix = json::object();
  for (const auto& [t, r] : g.task_mix) mix[std::string(to_string(t))] = r;
  j = {{"task_mix", mix},
       {"min_entities", g.min_entities},
       {"max_entities", g.max_entities},
       {"allow_parts", g.allow_parts},
       {"p_multi", g.p_multi},
       {"p_negative", g.p_negative},
       {"p_part", g.p_part},
       {"box_fraction", g.box_fraction},
       {"p_mask_pointer", g.p_mask_pointer},
       {"perturb", g.perturb}};
}

void from_json(const json& j, GenConfig& g) {
  reject_unknown(j,
                 {"task_mix", "min_entities", "max_entities", "allow_parts", "p_multi",
                  "p_negative", "p_part", "box_fraction", "p_mask_pointer", "perturb"},
                 "data");
  GenConfig d;
  if (j.contains("task_mix")) {
    g.task_mix.clear();
    for (const auto& [k, v] : j.at("task_mix").items()) {
      const double r = v.get<double>();
      if (r < 0.0) throw InvalidArgument("task_mix ratios must be non-negative");
      g.task_mix[task_from_string(k)] = r;
    }
  } else {
    g.task_mix = d.task_mix;
  }
  g.min_entities = j.value("min_entities", d.min_entities);
  g.max_entities = j.value("max_entities", d.max_entities);
  g.allow_parts = j.value("allow_parts", d.allow_parts);
  g.p_multi = j.value("p_multi", d.p_multi);
  g.p_negative = j.value("p_negative", d.p_negative);
  g.p_part = j.value("p_part", d.p_part);
  g.box_fraction = j.value("box_fraction", d.box_fraction);
  g.p_mask_pointer = j.value("p_mask_pointer", d.p_mask_pointer);
  g.perturb = j.contains("perturb") ? j.at("perturb").get<PerturbSpec>() : d.perturb;
  if (g.min_entities < 1 || g.max_entities < g.min_entities)
    throw InvalidArgument("need 1 <= min_entities <= max_entities");
  for (double p : {g.p_multi, g.p_negative, g.p_part, g.box_fraction, g.p_mask_pointer})
    if (p < 0.0 || p > 1.0) throw InvalidArgument("probabilities must lie in [0, 1]");
}

void to_json(json& j, const RunConfig& c) {
  json model = c.model;
  model.erase("vocab_size");
  std::vector<std::string> paths;
  for (const auto& p : c.corpus_paths) paths.push_back(p.string());
  j = {{"seed", c.seed},
       {"model", model},
       {"train", c.train},
       {"epochs", c.epochs},
       {"log_every", c.log_every},
       {"data", c.data},
       {"sampler_ratios", c.sampler_ratios},
       {"corpus", paths},
       {"out", c.out.string()}};
}

void from_json(const json& j, RunConfig& c) {
  reject_unknown(j,
                 {"seed", "model", "train", "epochs", "log_every", "data", "sampler_ratios",
                  "corpus", "out"},
                 "config");
  RunConfig d;
  c.seed = j.value("seed", d.seed);
  if (j.contains("model")) {
    reject_unknown(j.at("model"),
                   {"d_model", "layers", "heads", "max_seq", "ffn_mult", "feat_a_dim",
                    "feat_b_dim", "query_mode", "feature_source"},
                   "model");
    c.model = j.at("model").get<ModelConfig>();
  } else {
    c.model = d.model;
  }
  if (j.contains("train")) {
    const json& t = j.at("train");
    reject_unknown(t,
                   {"batch_size", "lr", "beta1", "beta2", "adam_eps", "weight_decay",
                    "total_steps", "loss_weights", "threads"},
                   "train");
    if (t.contains("loss_weights"))
      reject_unknown(t.at("loss_weights"), {"lm", "dice", "bce", "proj"}, "loss_weights");
    c.train = t.get<TrainOptions>();
  } else {
    c.train = d.train;
  }
  c.epochs = j.value("epochs", d.epochs);
  c.log_every = j.value("log_every", d.log_every);
  c.data = j.contains("data") ? j.at("data").get<GenConfig>() : d.data;
  c.sampler_ratios = j.value("sampler_ratios", d.sampler_ratios);
  c.corpus_paths.clear();
  if (j.contains("corpus"))
    for (const auto& p : j.at("corpus")) c.corpus_paths.emplace_back(p.get<std::string>());
  c.out = j.value("out", std::string());
  if (c.epochs <= 0) throw InvalidArgument("epochs must be positive");
  if (c.log_every < 0) throw InvalidArgument("log_every must be non-negative");
  for (const auto& [k, r] : c.sampler_ratios)
    if (!(r > 0.0)) throw InvalidArgument("sampler ratio for " + k + " must be positive");
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config " + path.string());
  try {
    return json::parse(in).get<RunConfig>();
  } catch (const json::exception& e) {
    throw InvalidArgument("invalid config " + path.string() + ": " + e.what());
  }
}

}  // namespace groundhog
