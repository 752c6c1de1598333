#include "groundhog/checkpoint.h"

#include <fstream>

#include "groundhog/errors.h"
#include "json.hpp"

namespace groundhog {

using nlohmann::json;

std::vector<Ght1Tensor> params_to_tensors(const ModelParams& p, const std::string& prefix) {
  std::vector<Ght1Tensor> out;
  p.for_each([&](const std::string& name, const Mat& m) {
    Ght1Tensor t;
    t.name = prefix + name;
    if (m.rows() == 1) {
      t.dims = {static_cast<std::uint64_t>(m.cols())};
    } else {
      t.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    }
    t.data.resize(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) t.data[i] = static_cast<float>(m.data()[i]);
    out.push_back(std::move(t));
  });
  return out;
}

void tensors_to_params(const std::vector<Ght1Tensor>& tensors, ModelParams& p,
                       const std::string& prefix) {
  std::map<std::string, const Ght1Tensor*> by_name;
  for (const auto& t : tensors) by_name[t.name] = &t;
  p.for_each([&](const std::string& name, Mat& m) {
    const auto it = by_name.find(prefix + name);
    if (it == by_name.end()) throw DataError("checkpoint is missing tensor " + prefix + name);
    const Ght1Tensor& t = *it->second;
    if (t.data.size() != static_cast<std::size_t>(m.size()))
      throw DataError("checkpoint tensor " + t.name + " has the wrong shape");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = t.data[i];
  });
}

namespace {

json manifest_json(const Checkpoint& c) {
  json train = c.train;
  train.erase("threads");
  return {{"format", kCheckpointFormat},
          {"config", c.model.config},
          {"train", train},
          {"vocabulary", c.model.vocab.tokens()},
          {"parameters", c.model.params.names()},
          {"seed", c.seed},
          {"step", c.optimizer.step},
          {"epoch", c.epoch}};
}

struct Manifest {
  ModelConfig config;
  TrainOptions train;
  Vocabulary vocab;
  std::uint64_t seed = 0;
  std::int64_t step = 0;
  std::int64_t epoch = 0;
};

Manifest read_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw DataError("no manifest.json in " + dir.string());
  try {
    const json j = json::parse(in);
    if (j.at("format").get<std::string>() != kCheckpointFormat)
      throw DataError("unsupported checkpoint format");
    Manifest m;
    m.config = j.at("config").get<ModelConfig>();
    m.train = j.at("train").get<TrainOptions>();
    m.vocab = Vocabulary::from_words(j.at("vocabulary").get<std::vector<std::string>>());
    if (static_cast<int>(m.vocab.size()) != m.config.vocab_size)
      throw DataError("vocabulary size differs from config");
    m.seed = j.at("seed").get<std::uint64_t>();
    m.step = j.at("step").get<std::int64_t>();
    m.epoch = j.at("epoch").get<std::int64_t>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& dir, const Checkpoint& ckpt) {
  std::filesystem::create_directories(dir);
  save_ght1(dir / "weights.ght1", params_to_tensors(ckpt.model.params));
  auto opt = params_to_tensors(ckpt.optimizer.m, "m/");
  auto v = params_to_tensors(ckpt.optimizer.v, "v/");
  opt.insert(opt.end(), std::make_move_iterator(v.begin()), std::make_move_iterator(v.end()));
  save_ght1(dir / "optimizer.ght1", opt);
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  out << manifest_json(ckpt).dump(2) << '\n';
  if (!out) throw Error("failed writing manifest in " + dir.string());
}

Model load_model(const std::filesystem::path& dir) {
  const Manifest m = read_manifest(dir);
  Model model{m.config, m.vocab, ModelParams::zeros(m.config)};
  tensors_to_params(load_ght1(dir / "weights.ght1"), model.params);
  return model;
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const Manifest m = read_manifest(dir);
  Checkpoint c;
  c.model = Model{m.config, m.vocab, ModelParams::zeros(m.config)};
  tensors_to_params(load_ght1(dir / "weights.ght1"), c.model.params);
  c.optimizer = AdamState::zeros(m.config);
  const auto opt = load_ght1(dir / "optimizer.ght1");
  tensors_to_params(opt, c.optimizer.m, "m/");
  tensors_to_params(opt, c.optimizer.v, "v/");
  c.optimizer.step = m.step;
  c.train = m.train;
  c.seed = m.seed;
  c.epoch = m.epoch;
  return c;
}

}  // namespace groundhog
