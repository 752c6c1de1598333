#include "groundhog/nn.h"

#include <cmath>
#include <numbers>

#include "groundhog/errors.h"

namespace groundhog {

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
}

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
  const double pdf =
      std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

MlpParams MlpParams::zeros(int in, int hidden, int out) {
  return {Mat::Zero(in, hidden), Mat::Zero(1, hidden), Mat::Zero(hidden, out),
          Mat::Zero(1, out)};
}

Mat mlp_forward(const MlpParams& p, const Mat& x, MlpCache* cache) {
  if (x.cols() != p.w1.rows()) {
    throw DimensionError("perceptron input has " + std::to_string(x.cols()) +
                         " features, expected " + std::to_string(p.w1.rows()));
  }
  Mat pre = x * p.w1;
  pre.rowwise() += p.b1.row(0);
  Mat hidden = pre.unaryExpr([](double v) { return gelu(v); });
  Mat y = hidden * p.w2;
  y.rowwise() += p.b2.row(0);
  if (cache != nullptr) {
    cache->x = x;
    cache->pre = std::move(pre);
    cache->hidden = std::move(hidden);
  }
  return y;
}

Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& dy,
                 MlpParams& grads) {
  grads.w2.noalias() += cache.hidden.transpose() * dy;
  grads.b2 += dy.colwise().sum();
  Mat dhidden = dy * p.w2.transpose();
  Mat dpre = dhidden.cwiseProduct(
      cache.pre.unaryExpr([](double v) { return gelu_grad(v); }));
  grads.w1.noalias() += cache.x.transpose() * dpre;
  grads.b1 += dpre.colwise().sum();
  return dpre * p.w1.transpose();
}

Mat layer_norm_forward(const Mat& x, const Mat& gain, const Mat& bias,
                       LayerNormCache* cache) {
  const Eigen::Index n = x.cols();
  Mat xhat(x.rows(), n);
  Eigen::VectorXd inv_std(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).mean();
    const double var = (x.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Mat y = xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  if (cache != nullptr) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat layer_norm_backward(const LayerNormCache& cache, const Mat& gain,
                        const Mat& dy, Mat& dgain, Mat& dbias) {
  const auto& xhat = cache.xhat;
  dgain += dy.cwiseProduct(xhat).colwise().sum();
  dbias += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * gain.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
    dx.row(r) = (dxhat.row(r).array() - mean_d - xhat.row(r).array() * mean_dx) *
                cache.inv_std(r);
  }
  return dx;
}

}  // namespace groundhog
