#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace thermograph {

enum class OutputTransform : std::uint8_t { softplus, identity };

std::string_view to_string(OutputTransform t);
OutputTransform output_transform_from_string(std::string_view s);

inline constexpr int kHiddenWidth = 256;

/// y = transform(w2 . tanh(W1 x + b1) + b2)
struct MlpParams {
  Eigen::MatrixXd W1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2{0};
  OutputTransform transform{OutputTransform::identity};

  int input_dim() const { return static_cast<int>(W1.cols()); }
  int hidden_width() const { return static_cast<int>(W1.rows()); }
  std::size_t num_params() const;

  static MlpParams zeros(int input_dim, int hidden, OutputTransform t);
  /// Uniform in +-sqrt(6 / (fan_in + fan_out)) per layer, zero biases.
  static MlpParams xavier(int input_dim, int hidden, OutputTransform t, std::uint64_t seed);

  /// Flat order: W1 row-major, b1, w2, b2.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
};

double softplus(double z);
double sigmoid(double z);
double apply_transform(OutputTransform t, double z);
double transform_derivative(OutputTransform t, double z);

struct MlpCache {
  Eigen::VectorXd x;
  Eigen::VectorXd h;  // tanh activations
  double z{0};        // pre-transform output
};

std::pair<double, MlpCache> mlp_forward(const MlpParams& p, std::span<const double> x);

struct MlpGrads {
  Eigen::MatrixXd W1;
  Eigen::VectorXd b1;
  Eigen::VectorXd w2;
  double b2{0};

  static MlpGrads zeros_like(const MlpParams& p);
  std::vector<double> flatten() const;
  MlpGrads& operator+=(const MlpGrads& o);
};

struct MlpBackward {
  MlpGrads grads;
  Eigen::VectorXd dx;
};

MlpBackward mlp_backward(const MlpParams& p, const MlpCache& cache, double dy);

/// Column-batched forms: X is input x B.
struct MlpBatchCache {
  Eigen::MatrixXd X;
  Eigen::MatrixXd H;  // hidden x B
  Eigen::VectorXd z;  // B
};

Eigen::VectorXd mlp_forward_batch(const MlpParams& p, const Eigen::MatrixXd& X,
                                  MlpBatchCache* cache = nullptr);

/// Accumulates parameter gradients of sum_b dy[b] * y[b] into `grads`;
/// writes input gradients (input x B) to `dX` when non-null.
void mlp_backward_batch(const MlpParams& p, const MlpBatchCache& cache, const Eigen::VectorXd& dy,
                        MlpGrads& grads, Eigen::MatrixXd* dX = nullptr);

}  // namespace thermograph
