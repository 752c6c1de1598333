#include "groundhog/commands.h"

#include <algorithm>
#include <array>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "groundhog/checkpoint.h"
#include "groundhog/corpus.h"
#include "groundhog/errors.h"
#include "groundhog/rng.h"

namespace groundhog {

using nlohmann::json;

// ---------------------------------------------------------------------------
// gen-data

void to_json(json& j, const GenDataStats& s) {
  j = {{"total", s.total}, {"per_task", s.per_task}};
}

GenDataStats cmd_gen_data(const GenDataOptions& opts) {
  if (opts.n <= 0) throw InvalidArgument("--n must be positive");
  RunConfig cfg = opts.config ? load_run_config(*opts.config) : RunConfig{};
  const std::uint64_t seed = opts.seed.value_or(cfg.seed);
  const auto corpus = generate_corpus(seed, opts.n, cfg.data);
  write_corpus(opts.out, corpus);
  GenDataStats stats;
  stats.total = static_cast<int>(corpus.size());
  for (const auto& [task, ratio] : cfg.data.task_mix) stats.per_task[std::string(to_string(task))] = 0;
  for (const auto& c : corpus) ++stats.per_task[std::string(to_string(c.task))];
  return stats;
}

// ---------------------------------------------------------------------------
// train

namespace {

json loss_record(const LossBundle& b) {
  return {{"lm", b.lm}, {"dice", b.dice}, {"bce", b.bce}, {"proj", b.proj}, {"total", b.total}};
}

void accumulate(LossBundle& acc, const LossBundle& b, double w) {
  acc.lm += w * b.lm;
  acc.dice += w * b.dice;
  acc.bce += w * b.bce;
  acc.proj += w * b.proj;
  acc.total += w * b.total;
}

}  // namespace

TrainSummary train_model(Checkpoint& ckpt, const RunConfig& config,
                         std::span<const GroundedConversation> corpus, std::ostream* log) {
  if (corpus.empty()) throw DataError("training corpus is empty");
  Model& model = ckpt.model;
  std::vector<PreparedSample> prepared;
  prepared.reserve(corpus.size());
  std::map<std::string, std::vector<std::size_t>> by_source;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    prepared.push_back(prepare_sample(corpus[i], model.vocab));
    if (prepared.back().length() > model.config.max_seq)
      throw DataError("conversation " + std::to_string(corpus[i].id) + " has " +
                      std::to_string(prepared.back().length()) + " positions, over max_seq");
    by_source[corpus[i].source].push_back(i);
  }
  std::map<std::string, std::size_t> sizes;
  for (const auto& [k, v] : by_source) sizes[k] = v.size();

  TrainOptions opts = config.train;
  const int batch = opts.batch_size;
  auto epoch_stream = [&](std::int64_t epoch) {
    SamplerSpec spec{config.sampler_ratios,
                     derive_seed(derive_seed(config.seed, SeedStream::kSampler),
                                 static_cast<std::uint64_t>(epoch))};
    BalancedStream s = balance_sample(sizes, spec);
    if (epoch == ckpt.epoch)
      for (const auto& w : s.warnings) spdlog::warn("sampler: {}", w);
    std::vector<std::size_t> order;
    order.reserve(s.order.size());
    for (const SampleRef& r : s.order) order.push_back(by_source.at(r.source)[r.index]);
    return order;
  };
  const std::size_t stream_len = epoch_stream(0).size();
  if (stream_len == 0) throw DataError("sampler produced an empty stream");
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((stream_len + batch - 1) / batch);
  opts.total_steps = steps_per_epoch * config.epochs;
  ckpt.train = opts;
  ckpt.seed = config.seed;

  TrainSummary summary;
  GradWorkspace workspace;
  bool first = true;
  for (std::int64_t epoch = ckpt.epoch; epoch < config.epochs; ++epoch) {
    const auto order = epoch_stream(epoch);
    LossBundle epoch_loss;
    std::int64_t steps = 0;
    for (std::size_t at = 0; at < order.size(); at += batch) {
      std::vector<const PreparedSample*> b;
      for (std::size_t k = at; k < std::min(order.size(), at + batch); ++k)
        b.push_back(&prepared[order[k]]);
      const double lr = cosine_lr(opts.lr, ckpt.optimizer.step, opts.total_steps);
      const LossBundle loss = train_step(b, model, ckpt.optimizer, opts, &workspace);
      if (first) {
        summary.first = loss;
        first = false;
      }
      summary.last = loss;
      accumulate(epoch_loss, loss, 1.0);
      ++steps;
      ++summary.steps;
      if (log && config.log_every > 0 && ckpt.optimizer.step % config.log_every == 0) {
        json rec = loss_record(loss);
        rec["step"] = ckpt.optimizer.step;
        rec["lr"] = lr;
        *log << rec.dump() << '\n';
      }
    }
    LossBundle mean;
    accumulate(mean, epoch_loss, 1.0 / static_cast<double>(steps));
    ckpt.epoch = epoch + 1;
    ++summary.epochs;
    spdlog::info("epoch {}/{} step {} total {:.4f} lm {:.4f} dice {:.4f} bce {:.4f} proj {:.4f}",
                 ckpt.epoch, config.epochs, ckpt.optimizer.step, mean.total, mean.lm, mean.dice,
                 mean.bce, mean.proj);
    if (log) {
      json rec = loss_record(mean);
      rec["epoch"] = ckpt.epoch;
      rec["step"] = ckpt.optimizer.step;
      *log << rec.dump() << '\n';
    }
  }
  return summary;
}

TrainSummary cmd_train(const TrainCmdOptions& opts) {
  RunConfig cfg = opts.config ? load_run_config(*opts.config) : RunConfig{};
  if (opts.seed) cfg.seed = *opts.seed;
  if (opts.epochs) cfg.epochs = *opts.epochs;
  if (opts.threads) cfg.train.threads = *opts.threads;
  if (cfg.epochs <= 0) throw InvalidArgument("epochs must be positive");
  std::vector<path> paths = cfg.corpus_paths;
  paths.insert(paths.end(), opts.corpus.begin(), opts.corpus.end());
  if (paths.empty()) throw InvalidArgument("no training corpus given");
  for (const auto& p : paths)
    if (!std::filesystem::exists(p)) throw DataError("corpus not found: " + p.string());

  Checkpoint ckpt;
  if (opts.resume) {
    ckpt = load_checkpoint(*opts.resume);
    cfg.seed = ckpt.seed;
  } else {
    ModelConfig mc = cfg.model;
    const Vocabulary vocab = corpus_vocabulary();
    mc.vocab_size = static_cast<int>(vocab.size());
    ckpt.model = Model{mc, vocab, ModelParams::init(mc, cfg.seed)};
    ckpt.optimizer = AdamState::zeros(mc);
  }
  std::vector<GroundedConversation> corpus;
  for (const auto& p : paths) {
    auto part = read_corpus(p, ckpt.model.vocab);
    corpus.insert(corpus.end(), std::make_move_iterator(part.begin()),
                  std::make_move_iterator(part.end()));
  }

  std::filesystem::create_directories(opts.out_ckpt);
  const path log_path = opts.out_ckpt / "train_log.jsonl";
  if (opts.resume) {
    const path old_log = *opts.resume / "train_log.jsonl";
    if (std::filesystem::exists(old_log) &&
        !std::filesystem::equivalent(*opts.resume, opts.out_ckpt))
      std::filesystem::copy_file(old_log, log_path,
                                 std::filesystem::copy_options::overwrite_existing);
  }
  std::ofstream log(log_path, opts.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw Error("cannot write " + log_path.string());
  const TrainSummary summary = train_model(ckpt, cfg, corpus, &log);
  save_checkpoint(opts.out_ckpt, ckpt);
  return summary;
}

// ---------------------------------------------------------------------------
// predictions

json prediction_to_json(const SamplePrediction& p) {
  json phrases = json::array();
  for (const auto& ph : p.phrases) {
    phrases.push_back({{"phrase_id", ph.phrase_id},
                       {"text", ph.text},
                       {"mask", rle_encode(ph.mask)},
                       {"selected_boxes", ph.selected_boxes},
                       {"score_vector", ph.score_vector}});
  }
  json j = {{"sample_id", p.sample_id}, {"response", p.response}, {"phrases", phrases}};
  if (!p.warnings.empty()) j["warnings"] = p.warnings;
  return j;
}

SamplePrediction prediction_from_json(const json& j) {
  try {
    SamplePrediction p;
    p.sample_id = j.at("sample_id").get<std::int64_t>();
    p.response = j.value("response", std::string());
    for (const json& jp : j.at("phrases")) {
      PhrasePrediction ph;
      ph.phrase_id = jp.at("phrase_id").get<int>();
      ph.text = jp.at("text").get<std::string>();
      ph.mask = rle_decode(jp.at("mask").get<RleMask>());
      ph.selected_boxes = jp.at("selected_boxes").get<std::vector<Box>>();
      ph.score_vector = jp.value("score_vector", std::vector<double>{});
      p.phrases.push_back(std::move(ph));
    }
    p.warnings = j.value("warnings", std::vector<std::string>{});
    return p;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed prediction: ") + e.what());
  }
}

namespace {

struct Exchange {
  std::string system;
  const Turn* user = nullptr;
  const Turn* assistant = nullptr;
};

Exchange first_exchange(const GroundedConversation& c) {
  Exchange ex;
  for (std::size_t i = 0; i < c.turns.size(); ++i) {
    const Turn& t = c.turns[i];
    if (t.role == Role::kSystem) ex.system = t.text;
    if (t.role == Role::kUser && !ex.user) ex.user = &t;
    if (t.role == Role::kAssistant && ex.user) {
      ex.assistant = &t;
      break;
    }
  }
  if (!ex.user) throw DataError("conversation " + std::to_string(c.id) + " has no user turn");
  return ex;
}

PhrasePrediction phrase_prediction(const DecodedPhrase& ph, int id, const ProposalSet& proposals,
                                   int h, int w) {
  PhrasePrediction out;
  out.phrase_id = id;
  out.text = ph.text;
  out.mask = ph.grounding.merged.size() ? binarize(ph.grounding.merged) : BinaryMask(h, w);
  for (std::size_t q : ph.grounding.selected) {
    const BinaryMask b = binarize(proposals[q]);
    if (!b.empty()) out.selected_boxes.push_back(mask_to_box(b));
  }
  out.score_vector = ph.grounding.scores;
  return out;
}

}  // namespace

SamplePrediction predict(const Model& model, const GroundedConversation& c,
                         const DecodeOptions& opts) {
  const Exchange ex = first_exchange(c);
  PreparedSample prompt =
      prepare_prompt(c.scene, c.proposals, ex.user->text, ex.user->pointers, model.vocab);
  if (!ex.system.empty()) {
    // The system message precedes <s>.
    auto sys = model.vocab.tokenize(ex.system);
    for (auto& [i, e] : prompt.ptr_bindings) i += static_cast<int>(sys.size());
    prompt.tokens.insert(prompt.tokens.begin(), sys.begin(), sys.end());
    prompt.targets.insert(prompt.targets.begin(), sys.size(), 0);
  }
  const DecodeResult r = decode(model, prompt, opts.max_new_tokens);
  SamplePrediction p;
  p.sample_id = c.id;
  p.response = r.text;
  p.warnings = r.warnings;
  for (std::size_t k = 0; k < r.phrases.size(); ++k)
    p.phrases.push_back(phrase_prediction(r.phrases[k], static_cast<int>(k), c.proposals,
                                          c.scene.height, c.scene.width));
  return p;
}

// ---------------------------------------------------------------------------
// evaluation routing

namespace {

struct GtSpan {
  std::string text;
  Supervision supervision = Supervision::kNone;
  std::vector<BinaryMask> masks;
  std::vector<Box> boxes;  // given boxes, or boxes of non-empty masks
};

std::vector<GtSpan> gt_spans(const Turn& t) {
  const auto words = split_words(t.text);
  std::vector<GtSpan> out;
  for (const GroundedSpan& sp : t.spans) {
    GtSpan g;
    std::vector<std::string> inner(words.begin() + sp.grd_start + 1, words.begin() + sp.grd_end);
    g.text = join_words(inner);
    g.supervision = sp.supervision;
    g.masks = sp.masks;
    g.boxes = sp.boxes;
    for (const auto& m : sp.masks)
      if (!m.empty()) g.boxes.push_back(mask_to_box(m));
    out.push_back(std::move(g));
  }
  return out;
}

BinaryMask union_masks(std::span<const BinaryMask> masks, int h, int w) {
  BinaryMask out(h, w);
  for (const auto& m : masks)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (m.at(r, c)) out.set(r, c);
  return out;
}

std::string first_word(const std::string& text) {
  const auto words = split_words(text);
  return words.empty() ? std::string() : normalize_phrase(words[0]);
}

}  // namespace

std::vector<MetricReport> evaluate(std::span<const GroundedConversation> gt,
                                   std::span<const SamplePrediction> preds,
                                   const std::vector<std::string>& metrics) {
  static const std::vector<std::string> known = {"ciou", "miou", "f1", "anyiou", "pope",
                                                 "recall@1"};
  for (const auto& m : metrics)
    if (std::find(known.begin(), known.end(), m) == known.end())
      throw InvalidArgument("unknown metric: " + m);
  std::map<std::int64_t, const SamplePrediction*> by_id;
  for (const auto& p : preds) by_id[p.sample_id] = &p;
  const SamplePrediction empty_pred;

  std::vector<MaskPair> mask_pairs;
  std::vector<PredictedPhrase> f1_preds;
  std::vector<GtPhrase> f1_gts;
  std::vector<BinaryMask> r1_preds;
  std::vector<std::vector<Box>> r1_gts;
  double any_sum = 0.0;
  std::size_t any_count = 0;
  std::vector<bool> qa_pred, qa_gt;

  for (const GroundedConversation& c : gt) {
    const auto it = by_id.find(c.id);
    if (it == by_id.end()) spdlog::warn("no prediction for sample {}", c.id);
    const SamplePrediction& p = it == by_id.end() ? empty_pred : *it->second;
    const Exchange ex = first_exchange(c);
    if (!ex.assistant) continue;
    const auto spans = gt_spans(*ex.assistant);
    const int h = c.scene.height, w = c.scene.width;

    std::vector<BinaryMask> pred_masks;
    for (const auto& ph : p.phrases) pred_masks.push_back(ph.mask);

    if (c.task == Task::kRes && !spans.empty() &&
        std::all_of(spans.begin(), spans.end(),
                    [](const GtSpan& s) { return s.supervision == Supervision::kMask; })) {
      std::vector<BinaryMask> gm;
      for (const auto& s : spans) gm.insert(gm.end(), s.masks.begin(), s.masks.end());
      mask_pairs.emplace_back(union_masks(pred_masks, h, w), union_masks(gm, h, w));
    }

    bool has_boxed = false;
    std::vector<char> used(p.phrases.size(), 0);
    for (const auto& s : spans) {
      if (s.boxes.empty()) continue;
      has_boxed = true;
      f1_gts.push_back({c.id, s.text, s.boxes});
      // recall@1 pairs each gt phrase with the first unused prediction of
      // the same normalized text.
      BinaryMask pm(h, w);
      const std::string key = normalize_phrase(s.text);
      for (std::size_t k = 0; k < p.phrases.size(); ++k) {
        if (!used[k] && normalize_phrase(p.phrases[k].text) == key) {
          used[k] = 1;
          pm = p.phrases[k].mask;
          break;
        }
      }
      r1_preds.push_back(std::move(pm));
      r1_gts.push_back(s.boxes);
    }
    if (has_boxed)
      for (const auto& ph : p.phrases) f1_preds.push_back({c.id, ph.text, ph.selected_boxes});

    if (!c.proposals.empty()) {
      std::vector<BinaryMask> gm;
      for (const auto& s : spans)
        for (const auto& m : s.masks)
          if (!m.empty()) gm.push_back(m);
      if (!gm.empty()) {
        any_sum += any_iou(gm, c.proposals) * static_cast<double>(gm.size());
        any_count += gm.size();
      }
    }

    if (c.task == Task::kGvqa) {
      const std::string g = first_word(ex.assistant->text);
      if (g == "yes" || g == "no") {
        qa_gt.push_back(g == "yes");
        qa_pred.push_back(first_word(p.response) == "yes");
      }
    }
  }

  std::vector<MetricReport> out;
  for (const auto& name : metrics) {
    MetricReport r;
    r.name = name;
    if (name == "ciou" || name == "miou") {
      r.count = mask_pairs.size();
      if (r.count) r.values[name] = name == "ciou" ? ciou(mask_pairs) : miou(mask_pairs);
    } else if (name == "f1") {
      r.count = f1_gts.size();
      if (r.count) {
        const PrecisionRecall pr = grounding_f1(f1_preds, f1_gts);
        r.values = {{"precision", pr.precision}, {"recall", pr.recall}, {"f1", pr.f1}};
      }
    } else if (name == "anyiou") {
      r.count = any_count;
      if (any_count) r.values["any_iou"] = any_sum / static_cast<double>(any_count);
    } else if (name == "pope") {
      r.count = qa_gt.size();
      if (r.count) {
        const BinaryQaMetrics m = binary_qa_metrics(qa_pred, qa_gt);
        r.values = {{"accuracy", m.accuracy}, {"precision", m.precision},
                    {"recall", m.recall},     {"f1", m.f1},
                    {"yes_ratio", m.yes_ratio}};
      }
    } else if (name == "recall@1") {
      r.count = r1_preds.size();
      if (r.count) r.values["recall@1"] = box_recall_at1_merged(r1_preds, r1_gts);
    }
    out.push_back(std::move(r));
  }
  return out;
}

json cmd_eval(const EvalOptions& opts) {
  const std::vector<std::string> metrics =
      opts.metrics.empty() ? std::vector<std::string>{"ciou", "miou", "f1", "anyiou", "pope",
                                                      "recall@1"}
                           : opts.metrics;
  // Fail on unknown metric names before any decoding.
  evaluate({}, {}, metrics);
  std::vector<SamplePrediction> preds;
  std::vector<GroundedConversation> corpus;
  if (opts.predictions_in) {
    corpus = read_corpus(opts.corpus, corpus_vocabulary());
    std::ifstream in(*opts.predictions_in);
    if (!in) throw DataError("cannot open " + opts.predictions_in->string());
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) preds.push_back(prediction_from_json(json::parse(line)));
  } else {
    const Model model = load_model(opts.ckpt);
    corpus = read_corpus(opts.corpus, model.vocab);
    for (const auto& c : corpus) preds.push_back(predict(model, c, opts.decode));
  }
  if (opts.predictions_out) {
    std::ofstream out(*opts.predictions_out, std::ios::binary);
    if (!out) throw Error("cannot write " + opts.predictions_out->string());
    for (const auto& p : preds) out << prediction_to_json(p).dump() << '\n';
  }
  json reports = json::array();
  for (const auto& r : evaluate(corpus, preds, metrics)) reports.push_back(r);
  return {{"samples", corpus.size()}, {"reports", reports}};
}

// ---------------------------------------------------------------------------
// ground / diagnose

SceneFile read_scene_file(const path& p) {
  std::ifstream in(p);
  if (!in) throw DataError("cannot open scene file " + p.string());
  try {
    const json j = json::parse(in);
    SceneFile s;
    if (j.contains("turns")) {
      const GroundedConversation c = conversation_from_json(j);
      s.scene = c.scene;
      s.proposals = c.proposals;
      const Exchange ex = first_exchange(c);
      s.pointers = ex.user->pointers;
      if (ex.assistant)
        for (const auto& sp : ex.assistant->spans)
          s.targets.insert(s.targets.end(), sp.masks.begin(), sp.masks.end());
    } else {
      s.scene = scene_from_json(j.at("scene"));
      if (j.contains("proposals")) s.proposals = proposals_from_json(j.at("proposals"));
      if (j.contains("pointers"))
        for (const json& jp : j.at("pointers")) s.pointers.push_back(pointer_from_json(jp));
      if (j.contains("targets"))
        for (const json& jt : j.at("targets")) s.targets.push_back(rle_decode(jt.get<RleMask>()));
    }
    if (s.proposals.empty() && !s.scene.entities.empty())
      s.proposals = gen_proposals(s.scene, PerturbSpec::disabled(), 0);
    for (const auto& t : s.targets)
      if (t.height() != s.scene.height || t.width() != s.scene.width)
        throw DataError("target mask size differs from scene");
    return s;
  } catch (const json::exception& e) {
    throw DataError("malformed scene file " + p.string() + ": " + e.what());
  }
}

json scene_file_to_json(const SceneFile& s) {
  json j = {{"scene", scene_to_json(s.scene)}, {"proposals", proposals_to_json(s.proposals)}};
  if (!s.pointers.empty()) {
    json ptrs = json::array();
    for (const auto& p : s.pointers) ptrs.push_back(pointer_to_json(p));
    j["pointers"] = ptrs;
  }
  if (!s.targets.empty()) {
    json ts = json::array();
    for (const auto& t : s.targets) ts.push_back(rle_encode(t));
    j["targets"] = ts;
  }
  return j;
}

namespace {

SamplePrediction run_prompt(const Model& model, const SceneFile& scene, std::string_view text,
                            const DecodeOptions& decode_opts) {
  const PreparedSample prompt =
      prepare_prompt(scene.scene, scene.proposals, text, scene.pointers, model.vocab);
  const DecodeResult r = decode(model, prompt, decode_opts.max_new_tokens);
  SamplePrediction p;
  p.response = r.text;
  p.warnings = r.warnings;
  for (std::size_t k = 0; k < r.phrases.size(); ++k)
    p.phrases.push_back(phrase_prediction(r.phrases[k], static_cast<int>(k), scene.proposals,
                                          scene.scene.height, scene.scene.width));
  return p;
}

constexpr std::array<std::array<std::uint8_t, 3>, kNumColors> kPalette = {{
    {220, 40, 40},
    {40, 170, 60},
    {50, 80, 220},
    {230, 210, 40},
    {140, 60, 170},
    {240, 140, 30},
    {245, 245, 245},
    {240, 150, 190},
}};

constexpr int kPpmScale = 4;

std::vector<std::uint8_t> render_scene(const Scene& s) {
  std::vector<std::uint8_t> rgb(static_cast<std::size_t>(s.height) * s.width * 3);
  for (int r = 0; r < s.height; ++r) {
    for (int c = 0; c < s.width; ++c) {
      const int code = s.colors[static_cast<std::size_t>(r) * s.width + c];
      std::array<std::uint8_t, 3> px = s.region_at(r) == Region::kSky
                                           ? std::array<std::uint8_t, 3>{150, 190, 230}
                                           : std::array<std::uint8_t, 3>{120, 100, 70};
      if (code > 0) px = kPalette[code - 1];
      for (int k = 0; k < 3; ++k)
        rgb[(static_cast<std::size_t>(r) * s.width + c) * 3 + k] = static_cast<std::uint8_t>(px[k] / 2);
    }
  }
  return rgb;
}

void write_scaled(const path& p, int w, int h, const std::vector<std::uint8_t>& rgb) {
  std::vector<std::uint8_t> big(static_cast<std::size_t>(w) * h * kPpmScale * kPpmScale * 3);
  const int bw = w * kPpmScale;
  for (int r = 0; r < h * kPpmScale; ++r)
    for (int c = 0; c < bw; ++c)
      for (int k = 0; k < 3; ++k)
        big[(static_cast<std::size_t>(r) * bw + c) * 3 + k] =
            rgb[(static_cast<std::size_t>(r / kPpmScale) * w + c / kPpmScale) * 3 + k];
  write_ppm(p, bw, h * kPpmScale, big);
}

}  // namespace

void write_ppm(const path& p, int width, int height, const std::vector<std::uint8_t>& rgb) {
  if (rgb.size() != static_cast<std::size_t>(width) * height * 3)
    throw InvalidArgument("write_ppm: pixel buffer size mismatch");
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("cannot write " + p.string());
  out << "P6\n" << width << ' ' << height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
  if (!out) throw Error("failed writing " + p.string());
}

json ground_scene(const Model& model, const SceneFile& scene, std::string_view text,
                  const DecodeOptions& decode_opts) {
  return prediction_to_json(run_prompt(model, scene, text, decode_opts));
}

json cmd_ground(const GroundOptions& opts) {
  const Model model = load_model(opts.ckpt);
  return ground_scene(model, read_scene_file(opts.scene), opts.text, opts.decode);
}

json diagnose_scene(const Model& model, const SceneFile& scene, std::string_view text, int topk,
                    const std::optional<path>& ppm_dir, const DecodeOptions& decode_opts) {
  if (topk <= 0) throw InvalidArgument("--topk must be positive");
  const SamplePrediction pred = run_prompt(model, scene, text, decode_opts);
  const ProposalSet& props = scene.proposals;
  const int n = static_cast<int>(props.size());
  json notices = json::array();
  int k = topk;
  if (k > n) {
    const std::string msg = "topk " + std::to_string(topk) + " clamped to " + std::to_string(n) +
                            " proposals";
    spdlog::warn("{}", msg);
    notices.push_back(msg);
    k = n;
  }
  std::vector<BinaryMask> bins;
  for (const auto& m : props.masks()) bins.push_back(binarize(m));
  const bool have_target = !scene.targets.empty();
  const BinaryMask target =
      have_target ? union_masks(scene.targets, scene.scene.height, scene.scene.width) : BinaryMask();
  if (ppm_dir) std::filesystem::create_directories(*ppm_dir);
  const auto base = render_scene(scene.scene);
  const int h = scene.scene.height, w = scene.scene.width;

  json phrases = json::array();
  for (const auto& ph : pred.phrases) {
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return ph.score_vector[a] > ph.score_vector[b];
    });
    json entries = json::array();
    json images = json::array();
    for (int r = 0; r < k && r < static_cast<int>(ph.score_vector.size()); ++r) {
      const int q = order[r];
      const bool selected = ph.score_vector[q] > kSelectionThreshold;
      json e = {{"rank", r},
                {"proposal", q},
                {"score", ph.score_vector[q]},
                {"tag", to_string(props.tags()[q])},
                {"selected", selected}};
      if (have_target) e["iou_to_target"] = iou_mask(bins[q], target);
      entries.push_back(e);
      if (ppm_dir) {
        auto rgb = base;
        for (std::size_t i = 0; i < bins[q].size(); ++i) {
          if (!bins[q].bits()[i]) continue;
          rgb[i * 3 + 0] = selected ? 30 : 230;
          rgb[i * 3 + 1] = selected ? 220 : 30;
          rgb[i * 3 + 2] = 30;
        }
        const std::string name = "phrase" + std::to_string(ph.phrase_id) + "_rank" +
                                 std::to_string(r) + "_q" + std::to_string(q) + ".ppm";
        write_scaled(*ppm_dir / name, w, h, rgb);
        images.push_back(name);
      }
    }
    json jp = {{"phrase_id", ph.phrase_id},
               {"text", ph.text},
               {"selected", json::array()},
               {"topk", entries}};
    for (std::size_t q = 0; q < ph.score_vector.size(); ++q)
      if (ph.score_vector[q] > kSelectionThreshold) jp["selected"].push_back(q);
    if (have_target) {
      int best = 0;
      double best_iou = -1.0;
      for (int q = 0; q < n; ++q) {
        const double v = iou_mask(bins[q], target);
        if (v > best_iou) {
          best_iou = v;
          best = q;
        }
      }
      jp["iou_best_proposal"] = best;
      jp["iou_best_proposal_iou"] = best_iou;
      jp["iou_best_selected"] = n > 0 && ph.score_vector[best] > kSelectionThreshold;
      jp["merged_iou"] = iou_mask(ph.mask, target);
    }
    if (ppm_dir) {
      auto rgb = base;
      for (std::size_t i = 0; i < ph.mask.size(); ++i) {
        if (!ph.mask.bits()[i]) continue;
        rgb[i * 3 + 0] = 255;
        rgb[i * 3 + 1] = 255;
        rgb[i * 3 + 2] = 255;
      }
      const std::string name = "phrase" + std::to_string(ph.phrase_id) + "_merged.ppm";
      write_scaled(*ppm_dir / name, w, h, rgb);
      images.push_back(name);
      jp["images"] = images;
    }
    phrases.push_back(jp);
  }
  json out = {{"response", pred.response}, {"topk", k}, {"phrases", phrases}};
  if (!notices.empty()) out["notices"] = notices;
  if (!pred.warnings.empty()) out["warnings"] = pred.warnings;
  return out;
}

json cmd_diagnose(const DiagnoseOptions& opts) {
  const Model model = load_model(opts.ckpt);
  return diagnose_scene(model, read_scene_file(opts.scene), opts.text, opts.topk, opts.ppm_dir,
                        opts.decode);
}

}  // namespace groundhog
