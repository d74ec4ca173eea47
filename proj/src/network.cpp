#include "alseg/network.hpp"

#include <cmath>
#include <string>

#include "alseg/error.hpp"
#include "alseg/random.hpp"

namespace alseg {

namespace {

enum LayerId { kEnc1 = 0, kEnc2, kBottleneck, kDec2, kDec1, kHead };

template <typename Mat>
void im2col3x3(const Mat& in, int h, int w, Mat& col) {
  const auto channels = in.rows();
  col.setZero(channels * 9, static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    const auto* src = in.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        auto* dst = col.row(c * 9 + ky * 3 + kx).data();
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const int x0 = kx == 0 ? 1 : 0;
          const int x1 = kx == 2 ? w - 1 : w;
          for (int x = x0; x < x1; ++x) dst[y * w + x] = src[sy * w + x + kx - 1];
        }
      }
    }
  }
}

template <typename Mat>
void col2im3x3(const Mat& col, int h, int w, Mat& out) {
  const auto channels = col.rows() / 9;
  out.setZero(channels, static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < channels; ++c) {
    auto* dst = out.row(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const auto* src = col.row(c * 9 + ky * 3 + kx).data();
        for (int y = 0; y < h; ++y) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          const int x0 = kx == 0 ? 1 : 0;
          const int x1 = kx == 2 ? w - 1 : w;
          for (int x = x0; x < x1; ++x) dst[sy * w + x + kx - 1] += src[y * w + x];
        }
      }
    }
  }
}

template <typename Mat>
void maxpool2(const Mat& in, int h, int w, Mat& out, std::vector<int>& argmax) {
  const int oh = h / 2, ow = w / 2;
  out.resize(in.rows(), static_cast<Eigen::Index>(oh) * ow);
  argmax.resize(static_cast<std::size_t>(out.size()));
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const auto* src = in.row(c).data();
    auto* dst = out.row(c).data();
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (2 * y) * w + 2 * x;
        for (int idx : {best + 1, best + w, best + w + 1}) {
          if (src[idx] > src[best]) best = idx;
        }
        dst[y * ow + x] = src[best];
        argmax[static_cast<std::size_t>(c * oh * ow + y * ow + x)] = best;
      }
    }
  }
}

template <typename Mat>
void maxpool2_backward(const Mat& dout, const std::vector<int>& argmax, int h, int w, Mat& din) {
  din.setZero(dout.rows(), static_cast<Eigen::Index>(h) * w);
  const auto per_channel = dout.cols();
  for (Eigen::Index c = 0; c < dout.rows(); ++c) {
    for (Eigen::Index i = 0; i < per_channel; ++i) {
      din(c, argmax[static_cast<std::size_t>(c * per_channel + i)]) += dout(c, i);
    }
  }
}

// Half-pixel bilinear weights for doubling an axis of length n.
struct Tap {
  int i0, i1;
  double w0, w1;
};

std::vector<Tap> upsample_taps(int n) {
  std::vector<Tap> taps(static_cast<std::size_t>(2 * n));
  for (int o = 0; o < 2 * n; ++o) {
    double src = (o + 0.5) / 2.0 - 0.5;
    if (src < 0.0) src = 0.0;
    const int i0 = std::min(static_cast<int>(src), n - 1);
    const int i1 = std::min(i0 + 1, n - 1);
    const double f = src - i0;
    taps[static_cast<std::size_t>(o)] = {i0, i1, 1.0 - f, f};
  }
  return taps;
}

template <typename Mat>
void upsample2(const Mat& in, int h, int w, Mat& out) {
  using T = typename Mat::Scalar;
  const auto ty = upsample_taps(h), tx = upsample_taps(w);
  const int oh = 2 * h, ow = 2 * w;
  out.resize(in.rows(), static_cast<Eigen::Index>(oh) * ow);
  for (Eigen::Index c = 0; c < in.rows(); ++c) {
    const auto* src = in.row(c).data();
    auto* dst = out.row(c).data();
    for (int y = 0; y < oh; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      const T* r0 = src + a.i0 * w;
      const T* r1 = src + a.i1 * w;
      for (int x = 0; x < ow; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        dst[y * ow + x] = static_cast<T>(a.w0) * (static_cast<T>(b.w0) * r0[b.i0] + static_cast<T>(b.w1) * r0[b.i1]) +
                          static_cast<T>(a.w1) * (static_cast<T>(b.w0) * r1[b.i0] + static_cast<T>(b.w1) * r1[b.i1]);
      }
    }
  }
}

template <typename Mat>
void upsample2_backward(const Mat& dout, int h, int w, Mat& din) {
  using T = typename Mat::Scalar;
  const auto ty = upsample_taps(h), tx = upsample_taps(w);
  const int oh = 2 * h, ow = 2 * w;
  din.setZero(dout.rows(), static_cast<Eigen::Index>(h) * w);
  for (Eigen::Index c = 0; c < dout.rows(); ++c) {
    const auto* src = dout.row(c).data();
    auto* dst = din.row(c).data();
    for (int y = 0; y < oh; ++y) {
      const auto& a = ty[static_cast<std::size_t>(y)];
      T* r0 = dst + a.i0 * w;
      T* r1 = dst + a.i1 * w;
      for (int x = 0; x < ow; ++x) {
        const auto& b = tx[static_cast<std::size_t>(x)];
        const T g = src[y * ow + x];
        r0[b.i0] += static_cast<T>(a.w0 * b.w0) * g;
        r0[b.i1] += static_cast<T>(a.w0 * b.w1) * g;
        r1[b.i0] += static_cast<T>(a.w1 * b.w0) * g;
        r1[b.i1] += static_cast<T>(a.w1 * b.w1) * g;
      }
    }
  }
}

}  // namespace

template <typename T>
Network<T>::Network(const NetworkShape& shape) : shape_(shape) {
  if (shape.c1 <= 0 || shape.c2 <= 0 || shape.bottleneck <= 0) {
    throw std::invalid_argument("Network: channel counts must be positive");
  }
  const std::array<std::array<int, 3>, kLayers> spec = {{{1, shape.c1, 3},
                                                         {shape.c1, shape.c2, 3},
                                                         {shape.c2, shape.bottleneck, 3},
                                                         {shape.bottleneck, shape.c2, 3},
                                                         {shape.c2, shape.c1, 3},
                                                         {shape.c1, 1, 1}}};
  Eigen::Index offset = 0;
  for (int l = 0; l < kLayers; ++l) {
    auto& L = layers_[static_cast<std::size_t>(l)];
    L.in_channels = spec[l][0];
    L.out_channels = spec[l][1];
    L.kernel = spec[l][2];
    L.weight_offset = offset;
    offset += static_cast<Eigen::Index>(L.out_channels) * L.in_channels * L.kernel * L.kernel;
    L.bias_offset = offset;
    offset += L.out_channels;
  }
  params_ = Vec::Zero(offset);
}

template <typename T>
void Network<T>::initialize(std::uint64_t seed) {
  Rng rng(seed);
  params_.setZero();
  for (const auto& L : layers_) {
    const int fan_in = L.in_channels * L.kernel * L.kernel;
    const double sd = std::sqrt(2.0 / fan_in);
    const auto n = static_cast<Eigen::Index>(L.out_channels) * fan_in;
    for (Eigen::Index i = 0; i < n; ++i) params_[L.weight_offset + i] = static_cast<T>(rng.normal(0.0, sd));
  }
}

template <typename T>
Eigen::Index Network<T>::feature_length(int height, int width) const {
  return static_cast<Eigen::Index>(shape_.bottleneck) * (height / 4) * (width / 4);
}

template <typename T>
void Network<T>::forward(const Mat& image, Cache& cache) const {
  const auto h = static_cast<int>(image.rows());
  const auto w = static_cast<int>(image.cols());
  if (h % 4 != 0 || w % 4 != 0 || h < 4 || w < 4) {
    throw ShapeError("forward: image is " + std::to_string(h) + "x" + std::to_string(w) +
                     ", dimensions must be positive multiples of 4");
  }
  cache.height = h;
  cache.width = w;
  const bool relu = shape_.activation == Activation::relu;

  auto conv = [&](int l, const Mat& in, int ch, int cw, bool activate) {
    const auto& L = layers_[static_cast<std::size_t>(l)];
    auto& col = cache.cols[static_cast<std::size_t>(l)];
    auto& out = cache.outputs[static_cast<std::size_t>(l)];
    if (L.kernel == 3) {
      im2col3x3(in, ch, cw, col);
    } else {
      col = in;
    }
    Eigen::Map<const Mat> W(params_.data() + L.weight_offset, L.out_channels, col.rows());
    Eigen::Map<const Vec> b(params_.data() + L.bias_offset, L.out_channels);
    out.noalias() = W * col;
    out.colwise() += b;
    if (activate && relu) out = out.cwiseMax(T(0));
  };

  Mat input = Eigen::Map<const Mat>(image.data(), 1, static_cast<Eigen::Index>(h) * w);
  Mat pooled1, pooled2, up3, up4;

  conv(kEnc1, input, h, w, true);
  maxpool2(cache.outputs[kEnc1], h, w, pooled1, cache.pool_argmax[0]);
  conv(kEnc2, pooled1, h / 2, w / 2, true);
  maxpool2(cache.outputs[kEnc2], h / 2, w / 2, pooled2, cache.pool_argmax[1]);
  conv(kBottleneck, pooled2, h / 4, w / 4, true);
  upsample2(cache.outputs[kBottleneck], h / 4, w / 4, up3);
  conv(kDec2, up3, h / 2, w / 2, true);
  upsample2(cache.outputs[kDec2], h / 2, w / 2, up4);
  conv(kDec1, up4, h, w, true);
  conv(kHead, cache.outputs[kDec1], h, w, false);

  cache.logits = cache.outputs[kHead];
  cache.probs.resize(1, cache.logits.cols());
  for (Eigen::Index i = 0; i < cache.logits.cols(); ++i) {
    const T z = cache.logits(0, i);
    // Branches keep exp() from overflowing for large |z|.
    cache.probs(0, i) = z >= 0 ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
  }
}

template <typename T>
void Network<T>::backward(const Cache& cache, const Mat& dlogits, Vec& grad) const {
  const int h = cache.height, w = cache.width;
  if (grad.size() != params_.size()) grad = Vec::Zero(params_.size());
  const bool relu = shape_.activation == Activation::relu;

  // Returns dLoss/d(conv input) in column (im2col) form.
  auto conv_back = [&](int l, Mat dout, bool activated) -> Mat {
    const auto& L = layers_[static_cast<std::size_t>(l)];
    const auto& out = cache.outputs[static_cast<std::size_t>(l)];
    const auto& col = cache.cols[static_cast<std::size_t>(l)];
    if (activated && relu) {
      dout = dout.cwiseProduct((out.array() > T(0)).template cast<T>().matrix());
    }
    Eigen::Map<Mat> gW(grad.data() + L.weight_offset, L.out_channels, col.rows());
    Eigen::Map<Vec> gb(grad.data() + L.bias_offset, L.out_channels);
    gW.noalias() += dout * col.transpose();
    gb += dout.rowwise().sum();
    Eigen::Map<const Mat> W(params_.data() + L.weight_offset, L.out_channels, col.rows());
    return W.transpose() * dout;
  };

  Mat g = Eigen::Map<const Mat>(dlogits.data(), 1, static_cast<Eigen::Index>(h) * w);
  Mat d_dec1 = conv_back(kHead, g, false);  // 1x1 conv: column form is the input itself

  Mat d_up4;
  col2im3x3(conv_back(kDec1, d_dec1, true), h, w, d_up4);
  Mat d_dec2;
  upsample2_backward(d_up4, h / 2, w / 2, d_dec2);

  Mat d_up3;
  col2im3x3(conv_back(kDec2, d_dec2, true), h / 2, w / 2, d_up3);
  Mat d_bott;
  upsample2_backward(d_up3, h / 4, w / 4, d_bott);

  Mat d_pool2;
  col2im3x3(conv_back(kBottleneck, d_bott, true), h / 4, w / 4, d_pool2);
  Mat d_enc2;
  maxpool2_backward(d_pool2, cache.pool_argmax[1], h / 2, w / 2, d_enc2);

  Mat d_pool1;
  col2im3x3(conv_back(kEnc2, d_enc2, true), h / 2, w / 2, d_pool1);
  Mat d_enc1;
  maxpool2_backward(d_pool1, cache.pool_argmax[0], h, w, d_enc1);

  conv_back(kEnc1, d_enc1, true);
}

template <typename T>
typename Network<T>::Vec Network<T>::features(const Cache& cache) const {
  const auto& b = cache.outputs[kBottleneck];
  return Eigen::Map<const Vec>(b.data(), b.size());
}

template class Network<float>;
template class Network<double>;

}  // namespace alseg
