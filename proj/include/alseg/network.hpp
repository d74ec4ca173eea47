#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace alseg {

enum class Activation { relu, identity };

/// Channel widths of the encoder-decoder. `activation` is ReLU for real
/// models; identity gives a piecewise-linear toy net for gradient checks.
struct NetworkShape {
  int c1 = 8;
  int c2 = 16;
  int bottleneck = 32;
  Activation activation = Activation::relu;

  bool operator==(const NetworkShape&) const = default;
};

/// Miniature encoder-decoder:
///
///   conv3x3(c1) -> pool2 -> conv3x3(c2) -> pool2 -> conv3x3(bottleneck)
///   -> up2 -> conv3x3(c2) -> up2 -> conv3x3(c1) -> conv1x1(1) -> sigmoid
///
/// Every conv except the head is followed by the activation. Max-pooling
/// downsamples; bilinear interpolation (half-pixel centers) upsamples. The
/// flattened bottleneck activation is the feature vector.
///
/// All parameters live in one flat vector; layers view slices of it.
template <typename T>
class Network {
 public:
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  static constexpr int kLayers = 6;

  struct LayerInfo {
    int in_channels;
    int out_channels;
    int kernel;
    Eigen::Index weight_offset;
    Eigen::Index bias_offset;
  };

  /// Activations retained for the backward pass.
  struct Cache {
    int height = 0;
    int width = 0;
    std::array<Mat, kLayers> cols;       // im2col input of each conv
    std::array<Mat, kLayers> outputs;    // post-activation output of each conv
    std::array<std::vector<int>, 2> pool_argmax;
    Mat logits;
    Mat probs;
  };

  Network() : Network(NetworkShape{}) {}
  explicit Network(const NetworkShape& shape);

  const NetworkShape& shape() const { return shape_; }
  const std::array<LayerInfo, kLayers>& layers() const { return layers_; }

  Vec& parameters() { return params_; }
  const Vec& parameters() const { return params_; }
  Eigen::Index parameter_count() const { return params_.size(); }

  /// He-normal weights, zero biases.
  void initialize(std::uint64_t seed);

  /// Length of the bottleneck feature vector for an h x w input.
  Eigen::Index feature_length(int height, int width) const;

  /// `image` is h x w with h, w divisible by 4 (ShapeError otherwise).
  void forward(const Mat& image, Cache& cache) const;

  /// Accumulates dLoss/dparams into `grad` given dLoss/dlogits (h x w).
  void backward(const Cache& cache, const Mat& dlogits, Vec& grad) const;

  /// Flattened bottleneck activation from a completed forward pass.
  Vec features(const Cache& cache) const;

  template <typename U>
  Network<U> cast() const {
    Network<U> out(shape_);
    out.parameters() = params_.template cast<U>();
    return out;
  }

 private:
  NetworkShape shape_;
  std::array<LayerInfo, kLayers> layers_{};
  Vec params_;
};

extern template class Network<float>;
extern template class Network<double>;

}  // namespace alseg
