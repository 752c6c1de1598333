#include "groundhog/model.h"

#include <algorithm>
#include <cmath>

#include "groundhog/errors.h"
#include "groundhog/rng.h"

namespace groundhog {

using nlohmann::json;

void ModelConfig::check() const {
  if (d_model <= 0 || layers <= 0 || heads <= 0 || max_seq <= 0 || ffn_mult <= 0)
    throw InvalidArgument("model dimensions must be positive");
  if (d_model % heads != 0) throw InvalidArgument("d_model must be divisible by heads");
  if (vocab_size <= kPtrId) throw InvalidArgument("vocab_size too small");
  if (feat_a_dim <= 0 || feat_b_dim <= 0) throw InvalidArgument("feature dims must be positive");
}

void to_json(json& j, const ModelConfig& c) {
  j = {{"d_model", c.d_model},
       {"layers", c.layers},
       {"heads", c.heads},
       {"max_seq", c.max_seq},
       {"ffn_mult", c.ffn_mult},
       {"vocab_size", c.vocab_size},
       {"feat_a_dim", c.feat_a_dim},
       {"feat_b_dim", c.feat_b_dim},
       {"query_mode", to_string(c.query_mode)},
       {"feature_source", to_string(c.feature_source)}};
}

void from_json(const json& j, ModelConfig& c) {
  ModelConfig d;
  c.d_model = j.value("d_model", d.d_model);
  c.layers = j.value("layers", d.layers);
  c.heads = j.value("heads", d.heads);
  c.max_seq = j.value("max_seq", d.max_seq);
  c.ffn_mult = j.value("ffn_mult", d.ffn_mult);
  c.vocab_size = j.value("vocab_size", d.vocab_size);
  c.feat_a_dim = j.value("feat_a_dim", d.feat_a_dim);
  c.feat_b_dim = j.value("feat_b_dim", d.feat_b_dim);
  c.query_mode = query_mode_from_string(
      j.value("query_mode", std::string(to_string(d.query_mode))));
  c.feature_source = feature_source_from_string(
      j.value("feature_source", std::string(to_string(d.feature_source))));
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  cfg.check();
  const int d = cfg.d_model;
  const int f = cfg.ffn_mult * d;
  ModelParams p;
  p.tok_emb = Mat::Zero(cfg.vocab_size, d);
  p.pos_emb = Mat::Zero(cfg.max_seq, d);
  for (int l = 0; l < cfg.layers; ++l) {
    BlockParams b;
    b.ln1_gain = Mat::Zero(1, d);
    b.ln1_bias = Mat::Zero(1, d);
    b.wqkv = Mat::Zero(d, 3 * d);
    b.bqkv = Mat::Zero(1, 3 * d);
    b.wo = Mat::Zero(d, d);
    b.bo = Mat::Zero(1, d);
    b.ln2_gain = Mat::Zero(1, d);
    b.ln2_bias = Mat::Zero(1, d);
    b.w1 = Mat::Zero(d, f);
    b.b1 = Mat::Zero(1, f);
    b.w2 = Mat::Zero(f, d);
    b.b2 = Mat::Zero(1, d);
    p.blocks.push_back(std::move(b));
  }
  p.lnf_gain = Mat::Zero(1, d);
  p.lnf_bias = Mat::Zero(1, d);
  p.lm_w = Mat::Zero(d, cfg.vocab_size);
  p.lm_b = Mat::Zero(1, cfg.vocab_size);
  p.proj_a = MlpParams::zeros(cfg.feat_a_dim, 2 * d, d);
  p.proj_b = MlpParams::zeros(cfg.feat_b_dim, 2 * d, d);
  p.head = MlpParams::zeros(2 * d, 2 * d, 1);
  return p;
}

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  ModelParams p = zeros(cfg);
  Rng rng(derive_seed(seed, SeedStream::kInit));
  p.for_each([&](const std::string& name, Mat& m) {
    const bool gain = name.ends_with(".gain");
    if (gain) {
      m.setOnes();
      return;
    }
    if (m.rows() == 1) return;  // biases
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.d_model));
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-bound, bound);
  });
  p.round_to_f32();
  return p;
}

std::vector<std::string> ModelParams::names() const {
  std::vector<std::string> out;
  for_each([&](const std::string& name, const Mat&) { out.push_back(name); });
  return out;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Mat& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

void ModelParams::round_to_f32() {
  for_each([](const std::string&, Mat& m) {
    for (Eigen::Index i = 0; i < m.size(); ++i)
      m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  });
}

bool ModelParams::all_finite() const {
  bool ok = true;
  for_each([&](const std::string&, const Mat& m) { ok = ok && m.allFinite(); });
  return ok;
}

void ModelParams::set_zero() {
  for_each([](const std::string&, Mat& m) { m.setZero(); });
}

// ---------------------------------------------------------------------------
// Sample preparation

namespace {

void append(std::vector<int>& dst, const std::vector<int>& src) {
  dst.insert(dst.end(), src.begin(), src.end());
}

void load_features(PreparedSample& s, const Scene& scene, const ProposalSet& proposals) {
  s.proposals = proposals;
  s.mask_h = scene.height;
  s.mask_w = scene.width;
  if (proposals.empty()) {
    s.pooled_a = Mat::Zero(0, kBackboneADim);
    s.pooled_b = Mat::Zero(0, kBackboneBDim);
    return;
  }
  const auto [fa, fb] = encode_backbones(scene);
  s.pooled_a = pool_proposals(fa, proposals);
  s.pooled_b = pool_proposals(fb, proposals);
}

BinaryMask mask_union(std::span<const BinaryMask> masks, int h, int w) {
  BinaryMask out(h, w);
  for (const auto& m : masks)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        if (m.at(r, c)) out.set(r, c);
  return out;
}

}  // namespace

void replace_ptr(PreparedSample& sample, std::span<const Pointer> pointers) {
  sample.ptr_bindings.clear();
  std::size_t k = 0;
  for (int i = 0; i < static_cast<int>(sample.tokens.size()); ++i) {
    if (sample.tokens[i] != kPtrId) continue;
    if (k >= pointers.size()) throw DataError("more <PTR> tokens than pointers");
    if (sample.proposals.empty()) throw DataError("<PTR> without proposals");
    sample.ptr_bindings.emplace_back(
        i, static_cast<int>(best_match(pointers[k++], sample.proposals)));
  }
  if (k != pointers.size()) throw DataError("more pointers than <PTR> tokens");
}

PreparedSample prepare_sample(const GroundedConversation& c, const Vocabulary& vocab) {
  PreparedSample s;
  s.id = c.id;
  s.task = c.task;
  load_features(s, c.scene, c.proposals);

  const auto user_tag = vocab.tokenize("USER:");
  const auto asst_tag = vocab.tokenize("ASSISTANT:");
  std::vector<Pointer> pointers;
  bool opened = false;
  for (const Turn& t : c.turns) {
    const auto ids = vocab.tokenize(t.text);
    if (t.role == Role::kSystem) {
      append(s.tokens, ids);
      continue;
    }
    if (!opened) {
      s.tokens.push_back(kBosId);
      opened = true;
    }
    if (t.role == Role::kUser) {
      append(s.tokens, user_tag);
      append(s.tokens, ids);
      pointers.insert(pointers.end(), t.pointers.begin(), t.pointers.end());
      continue;
    }
    append(s.tokens, asst_tag);
    const int offset = static_cast<int>(s.tokens.size());
    append(s.tokens, ids);
    s.tokens.push_back(kEosId);
    for (const GroundedSpan& sp : t.spans) {
      PhraseTarget pt;
      pt.start_pos = s.num_entities() + offset + sp.grd_start;
      pt.end_pos = s.num_entities() + offset + sp.grd_end;
      pt.supervision = sp.supervision;
      pt.text = vocab.detokenize(
          std::span(ids).subspan(sp.grd_start + 1, sp.grd_end - sp.grd_start - 1));
      if (sp.supervision == Supervision::kMask) {
        pt.gt_mask = mask_union(sp.masks, c.scene.height, c.scene.width);
        for (const auto& m : sp.masks)
          if (!m.empty()) pt.gt_boxes.push_back(mask_to_box(m));
      } else if (sp.supervision == Supervision::kBox) {
        pt.gt_boxes = sp.boxes;
      }
      s.phrases.push_back(std::move(pt));
    }
  }
  s.targets.assign(s.tokens.size(), 0);
  {
    // Assistant tokens: everything after an "ASSISTANT :" tag up to and
    // including the closing </s>.
    bool in_reply = false;
    for (std::size_t i = 0; i < s.tokens.size(); ++i) {
      if (in_reply) {
        s.targets[i] = 1;
        if (s.tokens[i] == kEosId) in_reply = false;
        continue;
      }
      if (i + 1 >= asst_tag.size() &&
          std::equal(asst_tag.begin(), asst_tag.end(),
                     s.tokens.begin() + static_cast<std::ptrdiff_t>(i + 1 - asst_tag.size()))) {
        in_reply = true;
      }
    }
  }
  replace_ptr(s, pointers);
  return s;
}

PreparedSample prepare_prompt(const Scene& scene, const ProposalSet& proposals,
                              std::string_view user_text,
                              std::span<const Pointer> pointers,
                              const Vocabulary& vocab) {
  PreparedSample s;
  load_features(s, scene, proposals);
  s.tokens.push_back(kBosId);
  append(s.tokens, vocab.tokenize("USER:"));
  const auto ids = vocab.tokenize(user_text);
  for (int id : ids) {
    if (id == kGrdId || id == kGrdEndId || id == kEosId || id == kBosId)
      throw InvalidArgument("prompt text may not contain special tokens other than <PTR>");
  }
  append(s.tokens, ids);
  append(s.tokens, vocab.tokenize("ASSISTANT:"));
  s.targets.assign(s.tokens.size(), 0);
  replace_ptr(s, pointers);
  return s;
}

// ---------------------------------------------------------------------------
// Forward / backward

Mat compute_entity_tokens(const ModelParams& p, const ModelConfig& cfg,
                          const Mat& pooled_a, const Mat& pooled_b,
                          ForwardCache* cache) {
  const Eigen::Index q = pooled_a.rows();
  if (pooled_b.rows() != q) throw DimensionError("pooled feature rows differ");
  Mat ent = Mat::Zero(q, cfg.d_model);
  if (q == 0) return ent;
  if (uses_backbone(cfg.feature_source, 0))
    ent += mlp_forward(p.proj_a, pooled_a, cache ? &cache->proj_a : nullptr);
  if (uses_backbone(cfg.feature_source, 1))
    ent += mlp_forward(p.proj_b, pooled_b, cache ? &cache->proj_b : nullptr);
  return ent;
}

namespace {

void row_softmax_causal(Mat& s, int row) {
  double mx = s(row, 0);
  for (int j = 1; j <= row; ++j) mx = std::max(mx, s(row, j));
  double z = 0.0;
  for (int j = 0; j <= row; ++j) {
    s(row, j) = std::exp(s(row, j) - mx);
    z += s(row, j);
  }
  for (int j = 0; j <= row; ++j) s(row, j) /= z;
  for (int j = row + 1; j < s.cols(); ++j) s(row, j) = 0.0;
}

}  // namespace

ForwardOutput forward(const ModelParams& p, const ModelConfig& cfg,
                      const Mat& entity_tokens, std::span<const int> tokens,
                      std::span<const std::pair<int, int>> ptr_bindings,
                      ForwardCache* cache) {
  const int d = cfg.d_model;
  const int q = static_cast<int>(entity_tokens.rows());
  const int t = q + static_cast<int>(tokens.size());
  if (t > cfg.max_seq)
    throw InvalidArgument("sequence of length " + std::to_string(t) +
                          " exceeds max_seq " + std::to_string(cfg.max_seq));
  if (t == 0) throw InvalidArgument("empty sequence");
  if (entity_tokens.cols() != d) throw DimensionError("entity token width != d_model");

  Mat x(t, d);
  if (q > 0) x.topRows(q) = entity_tokens;
  for (int i = 0; i < static_cast<int>(tokens.size()); ++i) {
    const int id = tokens[i];
    if (id < 0 || id >= cfg.vocab_size) throw InvalidArgument("token id out of range");
    x.row(q + i) = p.tok_emb.row(id);
  }
  for (const auto& [i, e] : ptr_bindings) {
    if (e < 0 || e >= q) throw InvalidArgument("<PTR> bound to a missing entity");
    x.row(q + i) = entity_tokens.row(e);
  }
  // Entities form an unordered set; positions count text tokens only.
  x.bottomRows(t - q) += p.pos_emb.topRows(t - q);

  const int hd = d / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  if (cache) {
    cache->entities = entity_tokens;
    cache->blocks.assign(p.blocks.size(), {});
  }
  for (std::size_t l = 0; l < p.blocks.size(); ++l) {
    const BlockParams& b = p.blocks[l];
    BlockCache local;
    BlockCache& bc = cache ? cache->blocks[l] : local;
    bc.x_in = x;
    bc.a = layer_norm_forward(x, b.ln1_gain, b.ln1_bias, &bc.ln1);
    bc.qkv = bc.a * b.wqkv;
    bc.qkv.rowwise() += b.bqkv.row(0);
    bc.attn.resize(t, d);
    bc.probs.resize(cfg.heads);
    for (int h = 0; h < cfg.heads; ++h) {
      const auto qh = bc.qkv.middleCols(h * hd, hd);
      const auto kh = bc.qkv.middleCols(d + h * hd, hd);
      const auto vh = bc.qkv.middleCols(2 * d + h * hd, hd);
      Mat s = (qh * kh.transpose()) * scale;
      for (int r = 0; r < t; ++r) row_softmax_causal(s, r);
      bc.attn.middleCols(h * hd, hd) = s * vh;
      bc.probs[h] = std::move(s);
    }
    x += bc.attn * b.wo;
    x.rowwise() += b.bo.row(0);
    bc.x_mid = x;
    bc.c = layer_norm_forward(x, b.ln2_gain, b.ln2_bias, &bc.ln2);
    bc.pre = bc.c * b.w1;
    bc.pre.rowwise() += b.b1.row(0);
    bc.h = bc.pre.unaryExpr([](double v) { return gelu(v); });
    x += bc.h * b.w2;
    x.rowwise() += b.b2.row(0);
  }
  ForwardOutput out;
  LayerNormCache lnf;
  out.hidden = layer_norm_forward(x, p.lnf_gain, p.lnf_bias, &lnf);
  out.logits = out.hidden * p.lm_w;
  out.logits.rowwise() += p.lm_b.row(0);
  if (cache) {
    cache->lnf = std::move(lnf);
    cache->hidden = out.hidden;
  }
  return out;
}

ForwardOutput forward(const ModelParams& p, const ModelConfig& cfg,
                      const PreparedSample& s, ForwardCache* cache) {
  const Mat ent = compute_entity_tokens(p, cfg, s.pooled_a, s.pooled_b, cache);
  return forward(p, cfg, ent, s.tokens, s.ptr_bindings, cache);
}

void backward(const ModelParams& p, const ModelConfig& cfg, const PreparedSample& s,
              const ForwardCache& cache, Mat dhidden, const Mat& dlogits,
              ModelParams& grads) {
  const int d = cfg.d_model;
  const int q = s.num_entities();
  const int t = s.length();
  const int hd = d / cfg.heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

  grads.lm_w.noalias() += cache.hidden.transpose() * dlogits;
  grads.lm_b += dlogits.colwise().sum();
  dhidden.noalias() += dlogits * p.lm_w.transpose();
  Mat dx = layer_norm_backward(cache.lnf, p.lnf_gain, dhidden, grads.lnf_gain, grads.lnf_bias);

  for (std::size_t li = p.blocks.size(); li-- > 0;) {
    const BlockParams& b = p.blocks[li];
    const BlockCache& bc = cache.blocks[li];
    BlockParams& g = grads.blocks[li];

    g.w2.noalias() += bc.h.transpose() * dx;
    g.b2 += dx.colwise().sum();
    Mat dpre = dx * b.w2.transpose();
    for (Eigen::Index i = 0; i < dpre.size(); ++i) dpre.data()[i] *= gelu_grad(bc.pre.data()[i]);
    g.w1.noalias() += bc.c.transpose() * dpre;
    g.b1 += dpre.colwise().sum();
    const Mat dc = dpre * b.w1.transpose();
    dx += layer_norm_backward(bc.ln2, b.ln2_gain, dc, g.ln2_gain, g.ln2_bias);

    g.wo.noalias() += bc.attn.transpose() * dx;
    g.bo += dx.colwise().sum();
    const Mat dattn = dx * b.wo.transpose();
    Mat dqkv = Mat::Zero(t, 3 * d);
    for (int h = 0; h < cfg.heads; ++h) {
      const Mat& pr = bc.probs[h];
      const auto qh = bc.qkv.middleCols(h * hd, hd);
      const auto kh = bc.qkv.middleCols(d + h * hd, hd);
      const auto vh = bc.qkv.middleCols(2 * d + h * hd, hd);
      const auto doh = dattn.middleCols(h * hd, hd);
      const Mat dp = doh * vh.transpose();
      dqkv.middleCols(2 * d + h * hd, hd).noalias() += pr.transpose() * doh;
      Mat ds = pr.cwiseProduct(dp);
      const Eigen::VectorXd rs = ds.rowwise().sum();
      ds -= pr.cwiseProduct(rs.replicate(1, t));
      ds *= scale;
      dqkv.middleCols(h * hd, hd).noalias() += ds * kh;
      dqkv.middleCols(d + h * hd, hd).noalias() += ds.transpose() * qh;
    }
    g.wqkv.noalias() += bc.a.transpose() * dqkv;
    g.bqkv += dqkv.colwise().sum();
    const Mat da = dqkv * b.wqkv.transpose();
    dx += layer_norm_backward(bc.ln1, b.ln1_gain, da, g.ln1_gain, g.ln1_bias);
  }

  grads.pos_emb.topRows(t - q) += dx.bottomRows(t - q);
  Mat dent = dx.topRows(q);
  std::vector<char> is_ptr(s.tokens.size(), 0);
  for (const auto& [i, e] : s.ptr_bindings) {
    dent.row(e) += dx.row(q + i);
    is_ptr[i] = 1;
  }
  for (int i = 0; i < static_cast<int>(s.tokens.size()); ++i) {
    if (!is_ptr[i]) grads.tok_emb.row(s.tokens[i]) += dx.row(q + i);
  }
  if (q == 0) return;
  if (uses_backbone(cfg.feature_source, 0))
    mlp_backward(p.proj_a, cache.proj_a, dent, grads.proj_a);
  if (uses_backbone(cfg.feature_source, 1))
    mlp_backward(p.proj_b, cache.proj_b, dent, grads.proj_b);
}

// ---------------------------------------------------------------------------
// Loss

LossBundle sample_loss(const ModelParams& p, const ModelConfig& cfg,
                       const PreparedSample& s, const LossWeights& weights,
                       ModelParams* grads, double grad_scale) {
  ForwardCache cache;
  const ForwardOutput out = forward(p, cfg, s, grads ? &cache : nullptr);
  const int q = s.num_entities();
  const int t = s.length();
  const int v = cfg.vocab_size;

  Mat dlogits;
  Mat dhidden;
  if (grads) {
    dlogits = Mat::Zero(t, v);
    dhidden = Mat::Zero(t, cfg.d_model);
  }

  // Next-token cross-entropy over assistant tokens.
  int n_targets = 0;
  for (auto f : s.targets) n_targets += f ? 1 : 0;
  double lm = 0.0;
  for (int i = 0; i < static_cast<int>(s.tokens.size()); ++i) {
    if (!s.targets[i]) continue;
    if (i == 0 && q == 0) throw InvalidArgument("first token cannot be a target");
    const int row = q + i - 1;
    const auto logits = out.logits.row(row);
    const double mx = logits.maxCoeff();
    const double z = (logits.array() - mx).exp().sum();
    lm += std::log(z) + mx - logits(s.tokens[i]);
    if (grads) {
      const double w = grad_scale * weights.lm / n_targets;
      dlogits.row(row) = (logits.array() - mx).exp() / z * w;
      dlogits(row, s.tokens[i]) -= w;
    }
  }
  if (n_targets > 0) lm /= n_targets;

  // Grounding losses on the teacher-forced spans.
  std::vector<PhraseLoss> phrase_losses;
  int n_mask = 0, n_box = 0;
  for (const PhraseTarget& pt : s.phrases) {
    if (pt.supervision == Supervision::kMask) ++n_mask;
    if (pt.supervision == Supervision::kBox) ++n_box;
  }
  const Mat ent_hidden = out.hidden.topRows(q);
  for (const PhraseTarget& pt : s.phrases) {
    if (pt.supervision == Supervision::kNone) continue;
    if (q == 0) throw DataError("supervised phrase without proposals");
    const GroundingQuery query =
        grounding_query(out.hidden.row(pt.start_pos), out.hidden.row(pt.end_pos), cfg.query_mode);
    ScoreCache sc;
    const auto scores = score_entities(query, ent_hidden, p.head, &sc);
    const MergeResult mr = merge_proposals_traced(scores, s.proposals);
    PhraseLoss pl;
    std::vector<double> dmerged(mr.merged.size(), 0.0);
    if (pt.supervision == Supervision::kMask) {
      const LossValue dice = dice_loss(mr.merged, pt.gt_mask);
      const LossValue bce = bce_loss(mr.merged, pt.gt_mask);
      pl.dice = dice.value;
      pl.bce = bce.value;
      for (std::size_t i = 0; i < dmerged.size(); ++i)
        dmerged[i] = weights.dice / n_mask * dice.grad[i] + weights.bce / n_mask * bce.grad[i];
    } else {
      const LossValue proj = projection_loss(mr.merged, std::span<const Box>(pt.gt_boxes));
      pl.proj = proj.value;
      for (std::size_t i = 0; i < dmerged.size(); ++i)
        dmerged[i] = weights.proj / n_box * proj.grad[i];
    }
    phrase_losses.push_back(pl);
    if (!grads) continue;

    std::vector<double> dscores(scores.size(), 0.0);
    for (std::size_t i = 0; i < dmerged.size(); ++i) {
      if (dmerged[i] == 0.0) continue;
      const int a = mr.argmax[i];
      dscores[a] += dmerged[i] * s.proposals[a].probs()[i];
    }
    for (auto& g : dscores) g *= grad_scale;
    const ScoreBackward sb = score_entities_backward(p.head, sc, dscores, grads->head);
    dhidden.topRows(q) += sb.dentity;
    if (cfg.query_mode != QueryMode::kEndOnly) dhidden.row(pt.start_pos) += sb.dquery;
    if (cfg.query_mode != QueryMode::kStartOnly) dhidden.row(pt.end_pos) += sb.dquery;
  }

  const LossBundle bundle = total_loss(lm, phrase_losses, weights);
  if (grads) backward(p, cfg, s, cache, std::move(dhidden), dlogits, *grads);
  return bundle;
}

// ---------------------------------------------------------------------------
// Decoding

DecodeResult ground_tokens(const Model& model, const PreparedSample& prompt,
                           std::span<const int> generated) {
  DecodeResult res;
  res.tokens.assign(generated.begin(), generated.end());
  std::vector<int> reply = res.tokens;
  if (!reply.empty() && reply.back() == kEosId) {
    res.reached_eos = true;
    reply.pop_back();
  }
  res.text = model.vocab.detokenize(reply);

  std::vector<int> all = prompt.tokens;
  all.insert(all.end(), generated.begin(), generated.end());
  const int q = prompt.num_entities();
  const Mat ent = compute_entity_tokens(model.params, model.config, prompt.pooled_a,
                                        prompt.pooled_b);
  const ForwardOutput out = forward(model.params, model.config, ent, all, prompt.ptr_bindings);
  const Mat ent_hidden = out.hidden.topRows(q);

  const int base = q + static_cast<int>(prompt.tokens.size());
  std::vector<int> open;
  for (int i = 0; i < static_cast<int>(generated.size()); ++i) {
    const int pos = base + i;
    if (generated[i] == kGrdId) {
      open.push_back(pos);
    } else if (generated[i] == kGrdEndId) {
      if (open.empty()) {
        res.warnings.push_back("unmatched </GRD> at position " + std::to_string(pos) +
                               " ignored");
        continue;
      }
      DecodedPhrase ph;
      ph.start_pos = open.back();
      ph.end_pos = pos;
      open.pop_back();
      const int a = ph.start_pos - base + 1;
      ph.text = model.vocab.detokenize(generated.subspan(a, i - a));
      if (q == 0) {
        ph.grounding.merged = SoftMask(prompt.mask_h, prompt.mask_w);
        res.warnings.push_back("no proposals; phrase \"" + ph.text + "\" left ungrounded");
      } else {
        const GroundingQuery query = grounding_query(
            out.hidden.row(ph.start_pos), out.hidden.row(ph.end_pos), model.config.query_mode);
        ph.grounding = ground_phrase(query, ent_hidden, model.params.head, prompt.proposals);
      }
      res.phrases.push_back(std::move(ph));
    }
  }
  for (int pos : open)
    res.warnings.push_back("unclosed <GRD> at position " + std::to_string(pos) + " discarded");
  return res;
}

DecodeResult decode(const Model& model, const PreparedSample& prompt, int max_new_tokens) {
  const Mat ent = compute_entity_tokens(model.params, model.config, prompt.pooled_a,
                                        prompt.pooled_b);
  std::vector<int> seq = prompt.tokens;
  std::vector<int> generated;
  const int q = prompt.num_entities();
  for (int step = 0; step < max_new_tokens; ++step) {
    if (q + static_cast<int>(seq.size()) >= model.config.max_seq) break;
    const ForwardOutput out = forward(model.params, model.config, ent, seq, prompt.ptr_bindings);
    const auto last = out.logits.row(out.logits.rows() - 1);
    int best = 0;
    for (int j = 1; j < last.size(); ++j)
      if (last(j) > last(best)) best = j;
    seq.push_back(best);
    generated.push_back(best);
    if (best == kEosId) break;
  }
  return ground_tokens(model, prompt, generated);
}

}  // namespace groundhog
