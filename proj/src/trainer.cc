#include "groundhog/trainer.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <numbers>
#include <thread>

#include "groundhog/errors.h"

namespace groundhog {

using nlohmann::json;

void to_json(json& j, const TrainOptions& o) {
  j = {{"batch_size", o.batch_size},     {"lr", o.lr},
       {"beta1", o.beta1},               {"beta2", o.beta2},
       {"adam_eps", o.adam_eps},         {"weight_decay", o.weight_decay},
       {"total_steps", o.total_steps},   {"loss_weights", o.weights},
       {"threads", o.threads}};
}

void from_json(const json& j, TrainOptions& o) {
  TrainOptions d;
  o.batch_size = j.value("batch_size", d.batch_size);
  o.lr = j.value("lr", d.lr);
  o.beta1 = j.value("beta1", d.beta1);
  o.beta2 = j.value("beta2", d.beta2);
  o.adam_eps = j.value("adam_eps", d.adam_eps);
  o.weight_decay = j.value("weight_decay", d.weight_decay);
  o.total_steps = j.value("total_steps", d.total_steps);
  o.weights = j.value("loss_weights", d.weights);
  o.threads = j.value("threads", d.threads);
  if (o.batch_size <= 0) throw InvalidArgument("batch_size must be positive");
  if (o.total_steps <= 0) throw InvalidArgument("total_steps must be positive");
  if (o.threads < 0) throw InvalidArgument("threads must be non-negative");
}

double cosine_lr(double lr, std::int64_t step, std::int64_t total) {
  if (total <= 0) return lr;
  const double frac = std::min(1.0, static_cast<double>(step) / static_cast<double>(total));
  return lr * 0.5 * (1.0 + std::cos(std::numbers::pi * frac));
}

AdamState AdamState::zeros(const ModelConfig& cfg) {
  return {ModelParams::zeros(cfg), ModelParams::zeros(cfg), 0};
}

std::vector<ModelParams>& GradWorkspace::buffers(const ModelConfig& cfg, std::size_t n) {
  while (buffers_.size() < n) buffers_.push_back(ModelParams::zeros(cfg));
  for (std::size_t i = 0; i < n; ++i) buffers_[i].set_zero();
  return buffers_;
}

namespace {

void add_into(ModelParams& dst, const ModelParams& src) {
  std::vector<const Mat*> s;
  src.for_each([&](const std::string&, const Mat& m) { s.push_back(&m); });
  std::size_t k = 0;
  dst.for_each([&](const std::string&, Mat& m) { m += *s[k++]; });
}

}  // namespace

LossBundle batch_gradient(const Model& model, std::span<const PreparedSample* const> batch,
                          const TrainOptions& opts, ModelParams& grads,
                          GradWorkspace* workspace) {
  if (batch.empty()) throw InvalidArgument("empty batch");
  GradWorkspace local;
  GradWorkspace& ws = workspace ? *workspace : local;
  auto& bufs = ws.buffers(model.config, batch.size());
  std::vector<LossBundle> losses(batch.size());
  const double scale = 1.0 / static_cast<double>(batch.size());

  auto work = [&](std::size_t i) {
    losses[i] = sample_loss(model.params, model.config, *batch[i], opts.weights, &bufs[i], scale);
  };
  std::size_t n_threads = static_cast<std::size_t>(opts.threads);
  if (n_threads == 0) n_threads = std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 4);
  n_threads = std::min(n_threads, batch.size());
  if (n_threads <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errors(n_threads);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < n_threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += n_threads) work(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  grads.set_zero();
  LossBundle mean;
  mean.weights = opts.weights;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    add_into(grads, bufs[i]);
    mean.lm += losses[i].lm * scale;
    mean.dice += losses[i].dice * scale;
    mean.bce += losses[i].bce * scale;
    mean.proj += losses[i].proj * scale;
    mean.total += losses[i].total * scale;
  }
  return mean;
}

LossBundle train_step(std::span<const PreparedSample* const> batch, Model& model,
                      AdamState& state, const TrainOptions& opts, GradWorkspace* workspace) {
  ModelParams grads = ModelParams::zeros(model.config);
  const LossBundle loss = batch_gradient(model, batch, opts, grads, workspace);
  if (!std::isfinite(loss.total))
    throw NumericError("non-finite loss at step " + std::to_string(state.step));
  if (!grads.all_finite())
    throw NumericError("non-finite gradient at step " + std::to_string(state.step));

  const double lr = cosine_lr(opts.lr, state.step, opts.total_steps);
  const std::int64_t t = state.step + 1;
  const double bc1 = 1.0 - std::pow(opts.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(opts.beta2, static_cast<double>(t));

  std::vector<Mat*> g, m, v;
  grads.for_each([&](const std::string&, Mat& x) { g.push_back(&x); });
  state.m.for_each([&](const std::string&, Mat& x) { m.push_back(&x); });
  state.v.for_each([&](const std::string&, Mat& x) { v.push_back(&x); });
  std::size_t k = 0;
  model.params.for_each([&](const std::string&, Mat& w) {
    const Mat& gk = *g[k];
    Mat& mk = *m[k];
    Mat& vk = *v[k];
    ++k;
    const bool decay = w.rows() > 1;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double gi = gk.data()[i];
      double& mi = mk.data()[i];
      double& vi = vk.data()[i];
      mi = opts.beta1 * mi + (1.0 - opts.beta1) * gi;
      vi = opts.beta2 * vi + (1.0 - opts.beta2) * gi * gi;
      // Moments are stored in f32 so a resumed run matches a straight one.
      mi = static_cast<float>(mi);
      vi = static_cast<float>(vi);
      double& wi = w.data()[i];
      if (decay) wi -= lr * opts.weight_decay * wi;
      wi -= lr * (mi / bc1) / (std::sqrt(vi / bc2) + opts.adam_eps);
    }
  });
  model.params.round_to_f32();
  state.step = t;
  return loss;
}

}  // namespace groundhog
