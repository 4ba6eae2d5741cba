#pragma once

#include <span>
#include <type_traits>
#include <vector>

#include "srforge/tensor.hpp"

namespace srforge {

/// Differentiable primitives. Every forward op is a pure function; each
/// `*_backward` returns the gradient w.r.t. the op's input and, for ops with
/// parameters, accumulates (+=) into the parameter gradients.
///
/// All ops are instantiated for float (training / inference) and double
/// (gradient checking).

struct ConvGeometry {
  int stride = 1;
  int padding = 0;
};

/// Output spatial extent of a convolution; throws when it is not integral.
int conv_output_extent(int extent, int kernel, const ConvGeometry& geom);

/// Cross-correlation with zero padding. `bias` may be empty (size 0).
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                      const Tensor<Scalar>& bias, const ConvGeometry& geom = {});

template <typename Scalar>
Tensor<Scalar> conv2d_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input,
                               Parameter<Scalar>& weight, std::type_identity_t<Parameter<Scalar>>* bias,
                               const ConvGeometry& geom = {});

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& input);

/// While alive, appends the active set (x > 0) of every relu() evaluated on
/// the constructing thread. Gradient checks use it to spot finite-difference
/// steps that cross a kink.
class ReluActivityProbe {
 public:
  ReluActivityProbe();
  ~ReluActivityProbe();
  ReluActivityProbe(const ReluActivityProbe&) = delete;
  ReluActivityProbe& operator=(const ReluActivityProbe&) = delete;

  const std::vector<bool>& pattern() const noexcept { return pattern_; }
  void clear() noexcept { pattern_.clear(); }

 private:
  template <typename Scalar>
  friend Tensor<Scalar> relu(const Tensor<Scalar>& input);
  std::vector<bool> pattern_;
  ReluActivityProbe* outer_;
};
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input);

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& input);
/// Takes the forward *output* s; gradient is g * s * (1 - s).
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_output);

template <typename Scalar>
Tensor<Scalar> global_avg_pool(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> global_avg_pool_backward(const Tensor<Scalar>& grad_out, const Shape& input_shape);

template <typename Scalar>
Tensor<Scalar> concat_channels(std::span<const Tensor<Scalar>> inputs);
/// Splits along channels into pieces of the given channel counts.
template <typename Scalar>
std::vector<Tensor<Scalar>> split_channels(const Tensor<Scalar>& input, std::span<const int> channels);

/// output(n, c, y*s+dy, x*s+dx) = input(n, c*s*s + dy*s + dx, y, x)
template <typename Scalar>
Tensor<Scalar> pixel_shuffle(const Tensor<Scalar>& input, int scale);
/// Exact inverse of pixel_shuffle; also its backward.
template <typename Scalar>
Tensor<Scalar> pixel_unshuffle(const Tensor<Scalar>& input, int scale);

/// Multiplies every (n, c) plane by gate(n, c, 0, 0).
template <typename Scalar>
Tensor<Scalar> scale_channels(const Tensor<Scalar>& input, const Tensor<Scalar>& gate);
template <typename Scalar>
void scale_channels_backward(const Tensor<Scalar>& grad_out, const Tensor<Scalar>& saved_input,
                             const Tensor<Scalar>& saved_gate, Tensor<Scalar>& grad_input,
                             Tensor<Scalar>& grad_gate);

/// 2x2 average pooling with stride 2; trailing odd row/column is dropped.
template <typename Scalar>
Tensor<Scalar> avg_pool2(const Tensor<Scalar>& input);
template <typename Scalar>
Tensor<Scalar> avg_pool2_backward(const Tensor<Scalar>& grad_out, const Shape& input_shape);

/// Elementwise sum of two tensors of identical shape.
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Positive rational resize factor num/den.
struct Ratio {
  int num = 1;
  int den = 1;
  double value() const { return static_cast<double>(num) / den; }
};

/// Catmull-Rom bicubic kernel with a = -0.5.
double cubic_kernel(double x);

/// Separable bicubic resize with clamp-to-edge sampling. When shrinking, the
/// kernel is stretched by 1/scale (antialiased) and taps are renormalised.
template <typename Scalar>
Tensor<Scalar> bicubic_resize(const Tensor<Scalar>& input, int out_h, int out_w);
template <typename Scalar>
Tensor<Scalar> bicubic_resize(const Tensor<Scalar>& input, Ratio scale);

/// Spatial crop of every (n, c) plane.
template <typename Scalar>
Tensor<Scalar> crop(const Tensor<Scalar>& input, int y, int x, int h, int w);

/// Dihedral transform d in [0, 8). Bit 2 transposes H and W first, then bit 0
/// mirrors columns and bit 1 mirrors rows. d = 0 is the identity.
template <typename Scalar>
Tensor<Scalar> dihedral(const Tensor<Scalar>& input, int d);
int dihedral_inverse(int d);

}  // namespace srforge
