#ifndef GROUNDHOG_NN_H_
#define GROUNDHOG_NN_H_

#include <Eigen/Core>

namespace groundhog {

// Row-major dense matrix; one row per position / entity.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

double gelu(double x);
double gelu_grad(double x);
double sigmoid(double x);

// Two-layer perceptron y = gelu(x W1 + b1) W2 + b2 applied row-wise.
// Biases are stored as 1 x n matrices.
struct MlpParams {
  Mat w1;
  Mat b1;
  Mat w2;
  Mat b2;

  int in_dim() const { return static_cast<int>(w1.rows()); }
  int hidden_dim() const { return static_cast<int>(w1.cols()); }
  int out_dim() const { return static_cast<int>(w2.cols()); }
  static MlpParams zeros(int in, int hidden, int out);
};

struct MlpCache {
  Mat x;
  Mat pre;
  Mat hidden;
};

Mat mlp_forward(const MlpParams& p, const Mat& x, MlpCache* cache = nullptr);

// Accumulates parameter gradients into `grads` and returns d/dx.
Mat mlp_backward(const MlpParams& p, const MlpCache& cache, const Mat& dy,
                 MlpParams& grads);

struct LayerNormCache {
  Mat xhat;
  Eigen::VectorXd inv_std;
};

inline constexpr double kLayerNormEps = 1e-5;

Mat layer_norm_forward(const Mat& x, const Mat& gain, const Mat& bias,
                       LayerNormCache* cache);
Mat layer_norm_backward(const LayerNormCache& cache, const Mat& gain,
                        const Mat& dy, Mat& dgain, Mat& dbias);

}  // namespace groundhog

#endif  // GROUNDHOG_NN_H_
