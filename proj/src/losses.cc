#include "groundhog/losses.h"

#include <cmath>

#include "groundhog/errors.h"

namespace groundhog {
namespace {

void check_same(const SoftMask& pred, const BinaryMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw DimensionError("loss: prediction and target dimensions differ");
  }
}

}  // namespace

LossValue dice_loss_1d(std::span<const double> pred,
                       std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw DimensionError("dice: prediction and target lengths differ");
  }
  double inter = 0.0, psum = 0.0, gsum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    inter += pred[i] * target[i];
    psum += pred[i];
    gsum += target[i];
  }
  const double num = 2.0 * inter + kDiceEps;
  const double den = psum + gsum + kDiceEps;
  LossValue out;
  out.value = 1.0 - num / den;
  out.grad.resize(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    out.grad[i] = -(2.0 * target[i] * den - num) / (den * den);
  }
  return out;
}

LossValue dice_loss(const SoftMask& pred, const BinaryMask& gt) {
  check_same(pred, gt);
  const std::vector<double> target(gt.bits().begin(), gt.bits().end());
  return dice_loss_1d(pred.probs(), target);
}

LossValue bce_loss(const SoftMask& pred, const BinaryMask& gt) {
  check_same(pred, gt);
  const auto& p = pred.probs();
  const auto& g = gt.bits();
  const double n = static_cast<double>(p.size());
  LossValue out;
  out.grad.assign(p.size(), 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pc = std::clamp(p[i], kBceClamp, 1.0 - kBceClamp);
    if (g[i]) {
      sum -= std::log(pc);
    } else {
      sum -= std::log1p(-pc);
    }
    if (p[i] > kBceClamp && p[i] < 1.0 - kBceClamp) {
      out.grad[i] = (g[i] ? -1.0 / pc : 1.0 / (1.0 - pc)) / n;
    }
  }
  out.value = sum / n;
  return out;
}

LossValue projection_loss(const SoftMask& pred, std::span<const Box> gt) {
  const int h = pred.height();
  const int w = pred.width();
  std::vector<double> tx(w, 0.0), ty(h, 0.0);
  for (const Box& b : gt) {
    if (b.x1 > w || b.y1 > h) {
      throw InvalidArgument("projection_loss: box outside the raster");
    }
    for (int x = b.x0; x < b.x1; ++x) tx[x] = 1.0;
    for (int y = b.y0; y < b.y1; ++y) ty[y] = 1.0;
  }
  std::vector<double> px(w, -1.0), py(h, -1.0);
  std::vector<int> arg_x(w, 0), arg_y(h, 0);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = pred.at(y, x);
      if (v > px[x]) {
        px[x] = v;
        arg_x[x] = y;
      }
      if (v > py[y]) {
        py[y] = v;
        arg_y[y] = x;
      }
    }
  }
  const LossValue lx = dice_loss_1d(px, tx);
  const LossValue ly = dice_loss_1d(py, ty);
  LossValue out;
  out.value = 0.5 * (lx.value + ly.value);
  out.grad.assign(pred.size(), 0.0);
  for (int x = 0; x < w; ++x) {
    out.grad[static_cast<std::size_t>(arg_x[x]) * w + x] += 0.5 * lx.grad[x];
  }
  for (int y = 0; y < h; ++y) {
    out.grad[static_cast<std::size_t>(y) * w + arg_y[y]] += 0.5 * ly.grad[y];
  }
  return out;
}

LossValue projection_loss(const SoftMask& pred, const Box& gt) {
  return projection_loss(pred, std::span<const Box>(&gt, 1));
}

LossBundle total_loss(double lm, std::span<const PhraseLoss> phrases,
                      const LossWeights& weights) {
  LossBundle out;
  out.weights = weights;
  out.lm = lm;
  int n_dice = 0, n_bce = 0, n_proj = 0;
  for (const PhraseLoss& p : phrases) {
    if ((p.dice || p.bce) && p.proj) {
      throw InvalidArgument(
          "phrase carries both mask and box supervision");
    }
    if (p.dice) {
      out.dice += *p.dice;
      ++n_dice;
    }
    if (p.bce) {
      out.bce += *p.bce;
      ++n_bce;
    }
    if (p.proj) {
      out.proj += *p.proj;
      ++n_proj;
    }
  }
  if (n_dice) out.dice /= n_dice;
  if (n_bce) out.bce /= n_bce;
  if (n_proj) out.proj /= n_proj;
  out.total = weights.lm * out.lm + weights.dice * out.dice +
              weights.bce * out.bce + weights.proj * out.proj;
  return out;
}

void to_json(nlohmann::json& j, const LossWeights& w) {
  j = nlohmann::json{{"lm", w.lm}, {"dice", w.dice}, {"bce", w.bce},
                     {"proj", w.proj}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
  w.lm = j.value("lm", 1.0);
  w.dice = j.value("dice", 1.0);
  w.bce = j.value("bce", 0.1);
  w.proj = j.value("proj", 1.0);
}

void to_json(nlohmann::json& j, const LossBundle& b) {
  j = nlohmann::json{{"lm", b.lm},     {"dice", b.dice},   {"bce", b.bce},
                     {"proj", b.proj}, {"total", b.total}, {"weights", b.weights}};
}

}  // namespace groundhog
