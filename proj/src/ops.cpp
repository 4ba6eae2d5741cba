#include "srforge/ops.hpp"

#include <algorithm>
#include <cmath>

#include "srforge/parallel.hpp"

namespace srforge {
namespace {

template <typename Scalar>
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowMap = Eigen::Map<RowMatrix<Scalar>>;
template <typename Scalar>
using ConstRowMap = Eigen::Map<const RowMatrix<Scalar>>;

void require(bool ok, const std::string& message) {
  if (!ok) throw InvalidArgument(message);
}

struct ConvDims {
  int c_in, c_out, kh, kw, h_out, w_out;
  bool pointwise;  // 1x1, stride 1, no padding: the input plane is already the column matrix
};

template <typename Scalar>
ConvDims conv_dims(const Shape& in, const Shape& wshape, const ConvGeometry& g) {
  require(g.stride >= 1, "conv2d: stride must be positive");
  require(g.padding >= 0, "conv2d: padding must be nonnegative");
  require(in.c == wshape.c,
          "conv2d: input channels " + std::to_string(in.c) + " != weight C_in " +
              std::to_string(wshape.c));
  ConvDims d{};
  d.c_in = wshape.c;
  d.c_out = wshape.n;
  d.kh = wshape.h;
  d.kw = wshape.w;
  d.h_out = conv_output_extent(in.h, d.kh, g);
  d.w_out = conv_output_extent(in.w, d.kw, g);
  d.pointwise = d.kh == 1 && d.kw == 1 && g.stride == 1 && g.padding == 0;
  return d;
}

// Column matrix of shape (C_in*kh*kw) x (h_out*w_out).
template <typename Scalar>
void im2col(const Scalar* image, int h, int w, const ConvDims& d, const ConvGeometry& g,
            Scalar* col) {
  const Eigen::Index cols = static_cast<Eigen::Index>(d.h_out) * d.w_out;
  for (int c = 0; c < d.c_in; ++c) {
    const Scalar* plane = image + static_cast<Eigen::Index>(c) * h * w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        Scalar* row = col + ((static_cast<Eigen::Index>(c) * d.kh + ky) * d.kw + kx) * cols;
        for (int oy = 0; oy < d.h_out; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          Scalar* dst = row + static_cast<Eigen::Index>(oy) * d.w_out;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + d.w_out, Scalar(0));
            continue;
          }
          const Scalar* src = plane + static_cast<Eigen::Index>(iy) * w;
          for (int ox = 0; ox < d.w_out; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            dst[ox] = (ix >= 0 && ix < w) ? src[ix] : Scalar(0);
          }
        }
      }
    }
  }
}

template <typename Scalar>
void col2im_add(const Scalar* col, int h, int w, const ConvDims& d, const ConvGeometry& g,
                Scalar* image) {
  const Eigen::Index cols = static_cast<Eigen::Index>(d.h_out) * d.w_out;
  for (int c = 0; c < d.c_in; ++c) {
    Scalar* plane = image + static_cast<Eigen::Index>(c) * h * w;
    for (int ky = 0; ky < d.kh; ++ky) {
      for (int kx = 0; kx < d.kw; ++kx) {
        const Scalar* row = col + ((static_cast<Eigen::Index>(c) * d.kh + ky) * d.kw + kx) * cols;
        for (int oy = 0; oy < d.h_out; ++oy) {
          const int iy = oy * g.stride - g.padding + ky;
          if (iy < 0 || iy >= h) continue;
          const Scalar* src = row + static_cast<Eigen::Index>(oy) * d.w_out;
          Scalar* dst = plane + static_cast<Eigen::Index>(iy) * w;
          for (int ox = 0; ox < d.w_out; ++ox) {
            const int ix = ox * g.stride - g.padding + kx;
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

struct AxisTaps {
  int taps = 0;
  std::vector<int> index;        // out * taps, clamped source indices
  std::vector<double> weight;    // out * taps, normalised per output
};

AxisTaps bicubic_taps(int in, int out, double scale) {
  AxisTaps t;
  const double stretch = scale < 1.0 ? scale : 1.0;
  const double support = 2.0 / stretch;
  t.taps = static_cast<int>(std::ceil(2.0 * support)) + 2;
  t.index.resize(static_cast<std::size_t>(out) * t.taps);
  t.weight.resize(static_cast<std::size_t>(out) * t.taps);
  for (int i = 0; i < out; ++i) {
    const double center = (i + 0.5) / scale - 0.5;
    const int first = static_cast<int>(std::floor(center - support));
    double total = 0.0;
    for (int k = 0; k < t.taps; ++k) {
      const int j = first + k;
      const double wgt = stretch * cubic_kernel(stretch * (center - j));
      t.index[static_cast<std::size_t>(i) * t.taps + k] = std::clamp(j, 0, in - 1);
      t.weight[static_cast<std::size_t>(i) * t.taps + k] = wgt;
      total += wgt;
    }
    for (int k = 0; k < t.taps; ++k) t.weight[static_cast<std::size_t>(i) * t.taps + k] /= total;
  }
  return t;
}

}  // namespace

int conv_output_extent(int extent, int kernel, const ConvGeometry& geom) {
  const int span = extent + 2 * geom.padding - kernel;
  if (span < 0 || span % geom.stride != 0) {
    throw InvalidArgument("conv2d: non-integral output extent for input " + std::to_string(extent) +
                          ", kernel " + std::to_string(kernel));
  }
  return span / geom.stride + 1;
}

template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, const ConvGeometry& geom) {
  const ConvDims d = conv_dims<Scalar>(input.shape(), weight.shape(), geom);
  require(bias.size() == 0 || bias.size() == d.c_out, "conv2d: bias length != C_out");
  const Shape in = input.shape();
  Tensor<Scalar> out({in.n, d.c_out, d.h_out, d.w_out});
  const Eigen::Index k = static_cast<Eigen::Index>(d.c_in) * d.kh * d.kw;
  const Eigen::Index p = static_cast<Eigen::Index>(d.h_out) * d.w_out;
  const ConstRowMap<Scalar> wmat(weight.data(), d.c_out, k);

  parallel_for(static_cast<std::size_t>(in.n), [&](std::size_t n) {
    const Scalar* image = input.plane_data(static_cast<int>(n), 0);
    RowMap<Scalar> result(out.plane_data(static_cast<int>(n), 0), d.c_out, p);
    if (d.pointwise) {
      result.noalias() = wmat * ConstRowMap<Scalar>(image, k, p);
    } else {
      RowMatrix<Scalar> col(k, p);
      im2col(image, in.h, in.w, d, geom, col.data());
      result.noalias() = wmat * col;
    }
    if (bias.size() != 0) result.colwise() += bias.values();
  });
  return out;
}

template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input,
                               Parameter<Scalar>& weight, std::type_identity_t<Parameter<Scalar>>* bias,
                               const ConvGeometry& geom) {
  const ConvDims d = conv_dims<Scalar>(saved_input.shape(), weight.value.shape(), geom);
  const Shape in = saved_input.shape();
  require(grad_out.shape() == Shape{in.n, d.c_out, d.h_out, d.w_out},
          "conv2d_backward: grad_out shape " + to_string(grad_out.shape()) +
              " does not match forward output");
  require(weight.grad.shape() == weight.value.shape(), "conv2d_backward: weight grad shape");
  const Eigen::Index k = static_cast<Eigen::Index>(d.c_in) * d.kh * d.kw;
  const Eigen::Index p = static_cast<Eigen::Index>(d.h_out) * d.w_out;
  const ConstRowMap<Scalar> wmat(weight.value.data(), d.c_out, k);

  Tensor<Scalar> grad_in(in);
  // Per-sample partial gradients, reduced in sample order below.
  std::vector<RowMatrix<Scalar>> partial_w(static_cast<std::size_t>(in.n));
  std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> partial_b(static_cast<std::size_t>(in.n));

  parallel_for(static_cast<std::size_t>(in.n), [&](std::size_t n) {
    const int ni = static_cast<int>(n);
    const ConstRowMap<Scalar> g(grad_out.plane_data(ni, 0), d.c_out, p);
    const Scalar* image = saved_input.plane_data(ni, 0);
    if (d.pointwise) {
      partial_w[n].noalias() = g * ConstRowMap<Scalar>(image, k, p).transpose();
      RowMap<Scalar>(grad_in.plane_data(ni, 0), k, p).noalias() = wmat.transpose() * g;
    } else {
      RowMatrix<Scalar> col(k, p);
      im2col(image, in.h, in.w, d, geom, col.data());
      partial_w[n].noalias() = g * col.transpose();
      col.noalias() = wmat.transpose() * g;
      col2im_add(col.data(), in.h, in.w, d, geom, grad_in.plane_data(ni, 0));
    }
    partial_b[n] = g.rowwise().sum();
  });

  RowMap<Scalar> gw(weight.grad.data(), d.c_out, k);
  for (int n = 0; n < in.n; ++n) {
    gw += partial_w[static_cast<std::size_t>(n)];
    if (bias != nullptr) bias->grad.values() += partial_b[static_cast<std::size_t>(n)];
  }
  return grad_in;
}

namespace {
thread_local ReluActivityProbe* t_relu_probe = nullptr;
}

ReluActivityProbe::ReluActivityProbe() : outer_(t_relu_probe) { t_relu_probe = this; }
ReluActivityProbe::~ReluActivityProbe() { t_relu_probe = outer_; }

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input) {
  if (t_relu_probe != nullptr) {
    for (Eigen::Index i = 0; i < input.size(); ++i) t_relu_probe->pattern_.push_back(input.values()[i] > Scalar(0));
  }
  return Tensor<Scalar>(input.shape(), input.values().cwiseMax(Scalar(0)));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input) {
  require(grad_out.shape() == saved_input.shape(), "relu_backward: shape mismatch");
  return Tensor<Scalar>(
      grad_out.shape(),
      (saved_input.values().array() > Scalar(0)).select(grad_out.values(), Scalar(0)).matrix());
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input) {
  Tensor<Scalar> out(input.shape());
  for (Eigen::Index i = 0; i < input.size(); ++i) {
    const Scalar x = input.values()[i];
    // Evaluate on the side where exp cannot overflow.
    if (x >= Scalar(0)) {
      out.values()[i] = Scalar(1) / (Scalar(1) + std::exp(-x));
    } else {
      const Scalar e = std::exp(x);
      out.values()[i] = e / (Scalar(1) + e);
    }
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& grad_out,
                                const Tensor<Scalar>& saved_output) {
  require(grad_out.shape() == saved_output.shape(), "sigmoid_backward: shape mismatch");
  const auto s = saved_output.values().array();
  return Tensor<Scalar>(grad_out.shape(),
                        (grad_out.values().array() * s * (Scalar(1) - s)).matrix());
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& input) {
  const Shape s = input.shape();
  require(s.h >= 1 && s.w >= 1, "global_avg_pool: zero spatial extent");
  Tensor<Scalar> out({s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) out(n, c, 0, 0) = input.plane(n, c).mean();
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Tensor<Scalar>& grad_out, const Shape& input_shape) {
  require(grad_out.shape() == Shape{input_shape.n, input_shape.c, 1, 1},
          "global_avg_pool_backward: shape mismatch");
  require(input_shape.h >= 1 && input_shape.w >= 1, "global_avg_pool: zero spatial extent");
  Tensor<Scalar> grad(input_shape);
  const Scalar inv = Scalar(1) / static_cast<Scalar>(input_shape.plane());
  for (int n = 0; n < input_shape.n; ++n) {
    for (int c = 0; c < input_shape.c; ++c) grad.plane(n, c).setConstant(grad_out(n, c, 0, 0) * inv);
  }
  return grad;
}

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> inputs) {
  require(!inputs.empty(), "concat_channels: no inputs");
  const Shape first = inputs.front().shape();
  int channels = 0;
  for (const auto& t : inputs) {
    const Shape s = t.shape();
    require(s.n == first.n && s.h == first.h && s.w == first.w,
            "concat_channels: batch/spatial mismatch " + to_string(s) + " vs " + to_string(first));
    channels += s.c;
  }
  Tensor<Scalar> out({first.n, channels, first.h, first.w});
  for (int n = 0; n < first.n; ++n) {
    Scalar* dst = out.plane_data(n, 0);
    for (const auto& t : inputs) {
      const Eigen::Index len = static_cast<Eigen::Index>(t.c()) * first.plane();
      std::copy_n(t.plane_data(n, 0), len, dst);
      dst += len;
    }
  }
  return out;
}

template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& input,
                                           std::span<const int> channels) {
  const Shape s = input.shape();
  int total = 0;
  for (int c : channels) total += c;
  require(total == s.c, "split_channels: channel counts do not sum to input channels");
  std::vector<Tensor<Scalar>> parts;
  parts.reserve(channels.size());
  int start = 0;
  for (int c : channels) {
    Tensor<Scalar> part({s.n, c, s.h, s.w});
    for (int n = 0; n < s.n; ++n) {
      std::copy_n(input.plane_data(n, start), static_cast<Eigen::Index>(c) * s.plane(),
                  part.plane_data(n, 0));
    }
    parts.push_back(std::move(part));
    start += c;
  }
  return parts;
}

template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, int scale) {
  const Shape s = input.shape();
  require(scale >= 1, "pixel_shuffle: scale must be positive");
  require(s.c % (scale * scale) == 0, "pixel_shuffle: channels not divisible by scale^2");
  const int oc = s.c / (scale * scale);
  Tensor<Scalar> out({s.n, oc, s.h * scale, s.w * scale});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < oc; ++c)
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) {
          const int ic = c * scale * scale + dy * scale + dx;
          for (int y = 0; y < s.h; ++y)
            for (int x = 0; x < s.w; ++x) out(n, c, y * scale + dy, x * scale + dx) = input(n, ic, y, x);
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, int scale) {
  const Shape s = input.shape();
  require(scale >= 1, "pixel_unshuffle: scale must be positive");
  require(s.h % scale == 0 && s.w % scale == 0, "pixel_unshuffle: extent not divisible by scale");
  const int h = s.h / scale;
  const int w = s.w / scale;
  Tensor<Scalar> out({s.n, s.c * scale * scale, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int dy = 0; dy < scale; ++dy)
        for (int dx = 0; dx < scale; ++dx) {
          const int oc = c * scale * scale + dy * scale + dx;
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) out(n, oc, y, x) = input(n, c, y * scale + dy, x * scale + dx);
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> scale_channels(const Tensor<Scalar>& input, const Tensor<Scalar>& gate) {
  const Shape s = input.shape();
  require(gate.shape() == Shape{s.n, s.c, 1, 1}, "scale_channels: gate must be (N,C,1,1)");
  Tensor<Scalar> out(s);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) out.plane(n, c) = input.plane(n, c) * gate(n, c, 0, 0);
  return out;
}

template <typename Scalar>
void scale_channels_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input,
                             const Tensor<Scalar>& saved_gate, Tensor<Scalar>& grad_input,
                             Tensor<Scalar>& grad_gate) {
  const Shape s = saved_input.shape();
  require(grad_out.shape() == s, "scale_channels_backward: shape mismatch");
  grad_input = Tensor<Scalar>(s);
  grad_gate = Tensor<Scalar>({s.n, s.c, 1, 1});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      grad_input.plane(n, c) = grad_out.plane(n, c) * saved_gate(n, c, 0, 0);
      grad_gate(n, c, 0, 0) = grad_out.plane(n, c).cwiseProduct(saved_input.plane(n, c)).sum();
    }
}

template <typename Scalar>
Tensor<Scalar> avg_pool2(const Tensor<Scalar>& input) {
  const Shape s = input.shape();
  const int h = s.h / 2;
  const int w = s.w / 2;
  require(h >= 1 && w >= 1, "avg_pool2: input smaller than 2x2");
  Tensor<Scalar> out({s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          out(n, c, y, x) = Scalar(0.25) * (input(n, c, 2 * y, 2 * x) + input(n, c, 2 * y, 2 * x + 1) +
                                            input(n, c, 2 * y + 1, 2 * x) +
                                            input(n, c, 2 * y + 1, 2 * x + 1));
        }
  return out;
}

template <typename Scalar>
Tensor<Scalar> avg_pool2_backward(const Tensor<Scalar>& grad_out, const Shape& input_shape) {
  require(grad_out.shape() == Shape{input_shape.n, input_shape.c, input_shape.h / 2, input_shape.w / 2},
          "avg_pool2_backward: shape mismatch");
  Tensor<Scalar> grad(input_shape);
  const Shape g = grad_out.shape();
  for (int n = 0; n < g.n; ++n)
    for (int c = 0; c < g.c; ++c)
      for (int y = 0; y < g.h; ++y)
        for (int x = 0; x < g.w; ++x) {
          const Scalar v = Scalar(0.25) * grad_out(n, c, y, x);
          grad(n, c, 2 * y, 2 * x) = v;
          grad(n, c, 2 * y, 2 * x + 1) = v;
          grad(n, c, 2 * y + 1, 2 * x) = v;
          grad(n, c, 2 * y + 1, 2 * x + 1) = v;
        }
  return grad;
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  require(a.shape() == b.shape(),
          "add: shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  return Tensor<Scalar>(a.shape(), a.values() + b.values());
}

double cubic_kernel(double x) {
  constexpr double a = -0.5;
  const double ax = std::abs(x);
  if (ax <= 1.0) return ((a + 2.0) * ax - (a + 3.0)) * ax * ax + 1.0;
  if (ax < 2.0) return ((a * ax - 5.0 * a) * ax + 8.0 * a) * ax - 4.0 * a;
  return 0.0;
}

namespace {
template <typename Scalar>
Tensor<Scalar> bicubic_impl(const Tensor<Scalar>& input, int out_h, int out_w, double scale_y,
                            double scale_x) {
  const Shape s = input.shape();
  require(s.h >= 1 && s.w >= 1, "bicubic_resize: empty input");
  require(out_h >= 1 && out_w >= 1, "bicubic_resize: empty output");
  const AxisTaps ty = bicubic_taps(s.h, out_h, scale_y);
  const AxisTaps tx = bicubic_taps(s.w, out_w, scale_x);
  Tensor<Scalar> out({s.n, s.c, out_h, out_w});
  std::vector<double> rows(static_cast<std::size_t>(s.h) * out_w);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      const Scalar* src = input.plane_data(n, c);
      for (int y = 0; y < s.h; ++y)
        for (int x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (int k = 0; k < tx.taps; ++k) {
            const std::size_t t = static_cast<std::size_t>(x) * tx.taps + k;
            acc += tx.weight[t] * static_cast<double>(src[static_cast<Eigen::Index>(y) * s.w + tx.index[t]]);
          }
          rows[static_cast<std::size_t>(y) * out_w + x] = acc;
        }
      Scalar* dst = out.plane_data(n, c);
      for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
          double acc = 0.0;
          for (int k = 0; k < ty.taps; ++k) {
            const std::size_t t = static_cast<std::size_t>(y) * ty.taps + k;
            acc += ty.weight[t] * rows[static_cast<std::size_t>(ty.index[t]) * out_w + x];
          }
          dst[static_cast<Eigen::Index>(y) * out_w + x] = static_cast<Scalar>(acc);
        }
    }
  return out;
}
}  // namespace

template <typename Scalar>
Tensor<Scalar> bicubic_resize(const Tensor<Scalar>& input, int out_h, int out_w) {
  return bicubic_impl(input, out_h, out_w, static_cast<double>(out_h) / input.h(),
                      static_cast<double>(out_w) / input.w());
}

template <typename Scalar>
Tensor<Scalar> bicubic_resize(const Tensor<Scalar>& input, Ratio scale) {
  require(scale.num > 0 && scale.den > 0, "bicubic_resize: scale must be positive");
  const auto extent = [&](int e) {
    return std::max(1, static_cast<int>(std::lround(static_cast<double>(e) * scale.num / scale.den)));
  };
  return bicubic_impl(input, extent(input.h()), extent(input.w()), scale.value(), scale.value());
}

template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& input, int y, int x, int h, int w) {
  const Shape s = input.shape();
  require(y >= 0 && x >= 0 && h >= 0 && w >= 0 && y + h <= s.h && x + w <= s.w,
          "crop: window outside image");
  Tensor<Scalar> out({s.n, s.c, h, w});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) out.plane(n, c) = input.plane(n, c).block(y, x, h, w);
  return out;
}

template <typename Scalar>
Tensor<Scalar> dihedral(const Tensor<Scalar>& input, int d) {
  require(d >= 0 && d < 8, "dihedral: index must be in [0, 8)");
  const Shape s = input.shape();
  const bool transpose = (d & 4) != 0;
  const bool flip_x = (d & 1) != 0;
  const bool flip_y = (d & 2) != 0;
  const int oh = transpose ? s.w : s.h;
  const int ow = transpose ? s.h : s.w;
  Tensor<Scalar> out({s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
          const int yy = flip_y ? oh - 1 - y : y;
          const int xx = flip_x ? ow - 1 - x : x;
          out(n, c, y, x) = transpose ? input(n, c, xx, yy) : input(n, c, yy, xx);
        }
  return out;
}

int dihedral_inverse(int d) {
  require(d >= 0 && d < 8, "dihedral: index must be in [0, 8)");
  if ((d & 4) == 0) return d;
  // flip ∘ transpose is undone by transpose ∘ flip, i.e. the mirrored axes swap.
  return 4 | ((d & 1) << 1) | ((d & 2) >> 1);
}

#define SRFORGE_INSTANTIATE(S)                                                                     \
  template Tensor<S> conv2d(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,                 \
                            const ConvGeometry&);                                                  \
  template Tensor<S> conv2d_backward(const Tensor<S>&, const Tensor<S>&, Parameter<S>&,            \
                                     Parameter<S>*, const ConvGeometry&);                          \
  template Tensor<S> relu(const Tensor<S>&);                                                       \
  template Tensor<S> relu_backward(const Tensor<S>&, const Tensor<S>&);                            \
  template Tensor<S> sigmoid(const Tensor<S>&);                                                    \
  template Tensor<S> sigmoid_backward(const Tensor<S>&, const Tensor<S>&);                         \
  template Tensor<S> global_avg_pool(const Tensor<S>&);                                            \
  template Tensor<S> global_avg_pool_backward(const Tensor<S>&, const Shape&);                     \
  template Tensor<S> concat_channels(std::span<const Tensor<S>>);                                  \
  template std::vector<Tensor<S>> split_channels(const Tensor<S>&, std::span<const int>);          \
  template Tensor<S> pixel_shuffle(const Tensor<S>&, int);                                         \
  template Tensor<S> pixel_unshuffle(const Tensor<S>&, int);                                       \
  template Tensor<S> scale_channels(const Tensor<S>&, const Tensor<S>&);                           \
  template void scale_channels_backward(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&,      \
                                        Tensor<S>&, Tensor<S>&);                                   \
  template Tensor<S> avg_pool2(const Tensor<S>&);                                                  \
  template Tensor<S> avg_pool2_backward(const Tensor<S>&, const Shape&);                           \
  template Tensor<S> add(const Tensor<S>&, const Tensor<S>&);                                      \
  template Tensor<S> bicubic_resize(const Tensor<S>&, int, int);                                   \
  template Tensor<S> bicubic_resize(const Tensor<S>&, Ratio);                                      \
  template Tensor<S> crop(const Tensor<S>&, int, int, int, int);                                   \
  template Tensor<S> dihedral(const Tensor<S>&, int);

SRFORGE_INSTANTIATE(float)
SRFORGE_INSTANTIATE(double)

#undef SRFORGE_INSTANTIATE

}  // namespace srforge
