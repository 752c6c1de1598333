#ifndef GROUNDHOG_MODEL_H_
#define GROUNDHOG_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "groundhog/features.h"
#include "groundhog/grounding.h"
#include "groundhog/losses.h"
#include "groundhog/nn.h"
#include "groundhog/synth.h"
#include "groundhog/vocab.h"
#include "json.hpp"

namespace groundhog {

struct ModelConfig {
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int max_seq = 128;
  int ffn_mult = 4;
  int vocab_size = 0;
  int feat_a_dim = kBackboneADim;
  int feat_b_dim = kBackboneBDim;
  QueryMode query_mode = QueryMode::kSum;
  FeatureSource feature_source = FeatureSource::kAB;

  void check() const;
  bool operator==(const ModelConfig&) const = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

struct BlockParams {
  Mat ln1_gain, ln1_bias;
  Mat wqkv, bqkv;
  Mat wo, bo;
  Mat ln2_gain, ln2_bias;
  Mat w1, b1;
  Mat w2, b2;
};

// Every trainable tensor. Values are always f32-representable; math runs in
// f64. for_each visits tensors in the fixed checkpoint order:
//   tok_emb, pos_emb,
//   blocks.<l>.{ln1.gain, ln1.bias, attn.wqkv, attn.bqkv, attn.wo, attn.bo,
//               ln2.gain, ln2.bias, ffn.w1, ffn.b1, ffn.w2, ffn.b2},
//   ln_f.gain, ln_f.bias, lm_head.w, lm_head.b,
//   proj_a.{w1,b1,w2,b2}, proj_b.{w1,b1,w2,b2}, head.{w1,b1,w2,b2}
struct ModelParams {
  Mat tok_emb;
  Mat pos_emb;
  std::vector<BlockParams> blocks;
  Mat lnf_gain, lnf_bias;
  Mat lm_w, lm_b;
  MlpParams proj_a;
  MlpParams proj_b;
  MlpParams head;

  static ModelParams zeros(const ModelConfig& cfg);
  // Matrices ~ U(-1/sqrt(d_model), 1/sqrt(d_model)); biases and norm offsets
  // zero; norm gains one.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

  template <typename F>
  void for_each(F&& f) {
    for_each_impl(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    for_each_impl(*this, f);
  }

  std::vector<std::string> names() const;
  std::size_t parameter_count() const;
  void round_to_f32();
  bool all_finite() const;
  void set_zero();

 private:
  template <typename Self, typename F>
  static void for_each_impl(Self& p, F& f) {
    f("tok_emb", p.tok_emb);
    f("pos_emb", p.pos_emb);
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
      auto& b = p.blocks[l];
      const std::string pre = "blocks." + std::to_string(l) + ".";
      f(pre + "ln1.gain", b.ln1_gain);
      f(pre + "ln1.bias", b.ln1_bias);
      f(pre + "attn.wqkv", b.wqkv);
      f(pre + "attn.bqkv", b.bqkv);
      f(pre + "attn.wo", b.wo);
      f(pre + "attn.bo", b.bo);
      f(pre + "ln2.gain", b.ln2_gain);
      f(pre + "ln2.bias", b.ln2_bias);
      f(pre + "ffn.w1", b.w1);
      f(pre + "ffn.b1", b.b1);
      f(pre + "ffn.w2", b.w2);
      f(pre + "ffn.b2", b.b2);
    }
    f("ln_f.gain", p.lnf_gain);
    f("ln_f.bias", p.lnf_bias);
    f("lm_head.w", p.lm_w);
    f("lm_head.b", p.lm_b);
    for (auto [name, mlp] : {std::pair{"proj_a", &p.proj_a},
                             std::pair{"proj_b", &p.proj_b},
                             std::pair{"head", &p.head}}) {
      const std::string pre = std::string(name) + ".";
      f(pre + "w1", mlp->w1);
      f(pre + "b1", mlp->b1);
      f(pre + "w2", mlp->w2);
      f(pre + "b2", mlp->b2);
    }
  }
};

struct Model {
  ModelConfig config;
  Vocabulary vocab;
  ModelParams params;
};

// Supervision for one grounded phrase at absolute sequence positions.
struct PhraseTarget {
  int start_pos = 0;  // <GRD>
  int end_pos = 0;    // </GRD>
  Supervision supervision = Supervision::kNone;
  BinaryMask gt_mask;       // union of target masks (mask supervision)
  std::vector<Box> gt_boxes;  // box supervision, or boxes of gt_mask parts
  std::string text;
};

// A tokenized conversation laid out as
//   [entity tokens 0..Q) | text tokens Q..T)
// with pooled backbone features per proposal and <PTR> slots bound to
// proposals.
struct PreparedSample {
  std::int64_t id = 0;
  Task task = Task::kRes;
  Mat pooled_a;  // Q x 8
  Mat pooled_b;  // Q x 4
  ProposalSet proposals;
  std::vector<int> tokens;
  // text index -> proposal index for each <PTR>.
  std::vector<std::pair<int, int>> ptr_bindings;
  // targets[i] != 0 when tokens[i] is an assistant token (LM target).
  std::vector<std::uint8_t> targets;
  std::vector<PhraseTarget> phrases;
  int mask_h = kSceneSize;
  int mask_w = kSceneSize;

  int num_entities() const { return static_cast<int>(proposals.size()); }
  int length() const { return num_entities() + static_cast<int>(tokens.size()); }
};

PreparedSample prepare_sample(const GroundedConversation& c, const Vocabulary& vocab);

// Prompt ending in "ASSISTANT:" for decoding a reply to `user_text`.
PreparedSample prepare_prompt(const Scene& scene, const ProposalSet& proposals,
                              std::string_view user_text,
                              std::span<const Pointer> pointers,
                              const Vocabulary& vocab);

// Binds every <PTR> in sample.tokens to best_match(pointer, proposals).
void replace_ptr(PreparedSample& sample, std::span<const Pointer> pointers);

struct BlockCache {
  Mat x_in;
  LayerNormCache ln1;
  Mat a;
  Mat qkv;
  std::vector<Mat> probs;
  Mat attn;
  Mat x_mid;
  LayerNormCache ln2;
  Mat c;
  Mat pre;
  Mat h;
};

struct ForwardCache {
  MlpCache proj_a;
  MlpCache proj_b;
  Mat entities;
  std::vector<BlockCache> blocks;
  LayerNormCache lnf;
  Mat hidden;
};

struct ForwardOutput {
  Mat hidden;  // T x d, final-norm output
  Mat logits;  // T x V
};

// Entity tokens (Q x d) from pooled features via the enabled projections.
Mat compute_entity_tokens(const ModelParams& p, const ModelConfig& cfg,
                          const Mat& pooled_a, const Mat& pooled_b,
                          ForwardCache* cache = nullptr);

// Causal transformer over [entity_tokens | tokens]; <PTR> slots take the
// bound entity token.
ForwardOutput forward(const ModelParams& p, const ModelConfig& cfg,
                      const Mat& entity_tokens, std::span<const int> tokens,
                      std::span<const std::pair<int, int>> ptr_bindings,
                      ForwardCache* cache = nullptr);

ForwardOutput forward(const ModelParams& p, const ModelConfig& cfg,
                      const PreparedSample& s, ForwardCache* cache = nullptr);

// Accumulates parameter gradients given d/d hidden and d/d logits.
void backward(const ModelParams& p, const ModelConfig& cfg, const PreparedSample& s,
              const ForwardCache& cache, Mat dhidden, const Mat& dlogits,
              ModelParams& grads);

// Total loss of one sample; when `grads` is non-null, also accumulates
// d total / d params scaled by `grad_scale`.
LossBundle sample_loss(const ModelParams& p, const ModelConfig& cfg,
                       const PreparedSample& s, const LossWeights& weights,
                       ModelParams* grads = nullptr, double grad_scale = 1.0);

struct DecodedPhrase {
  std::string text;
  int start_pos = 0;
  int end_pos = 0;
  GroundingResult grounding;
};

struct DecodeResult {
  std::vector<int> tokens;  // generated ids
  std::string text;         // detokenized reply without </s>
  bool reached_eos = false;
  std::vector<DecodedPhrase> phrases;
  std::vector<std::string> warnings;
};

// Greedy decoding; phrases are grounded when their </GRD> pairs with the
// most recent open <GRD>.
DecodeResult decode(const Model& model, const PreparedSample& prompt,
                    int max_new_tokens);

// Grounds a fixed continuation of `prompt` exactly as decode would.
DecodeResult ground_tokens(const Model& model, const PreparedSample& prompt,
                           std::span<const int> generated);

}  // namespace groundhog

#endif  // GROUNDHOG_MODEL_H_
