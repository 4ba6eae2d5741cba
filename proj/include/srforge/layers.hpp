#pragma once

#include <string>
#include <vector>

#include "srforge/ops.hpp"
#include "srforge/random.hpp"

namespace srforge::layers {

/// Building blocks of the SR networks. Each layer's forward is const and,
/// when handed a cache, records what its backward needs; backward reads that
/// cache and accumulates parameter gradients. A layer can therefore serve
/// concurrent inference while one training pass owns its own cache.

template <typename Scalar>
using ParamList = std::vector<Parameter<Scalar>*>;

template <typename Scalar>
struct Conv {
  Parameter<Scalar> weight;
  Parameter<Scalar> bias;
  ConvGeometry geom;

  Conv() = default;
  /// Square kernel with "same" padding; uniform fan-in init, zero bias.
  Conv(const std::string& name, int c_in, int c_out, int kernel, Rng& rng);

  Tensor<Scalar> forward(const Tensor<Scalar>& x) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Tensor<Scalar>& input);
  void collect(ParamList<Scalar>& out);
};

/// global pool -> 1x1 down -> ReLU -> 1x1 up -> sigmoid -> channel scaling
template <typename Scalar>
struct ChannelAttention {
  struct Cache {
    Tensor<Scalar> input, pooled, hidden, gate;
  };

  Conv<Scalar> down;
  Conv<Scalar> up;

  ChannelAttention() = default;
  ChannelAttention(const std::string& name, int features, int reduction, Rng& rng);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Cache& cache);
  void collect(ParamList<Scalar>& out);
};

/// Dense residual block. L stages of conv-ReLU-conv-ReLU; the first two
/// stage inputs also receive the previous block's input (inter-block skip);
/// stage outputs are concatenated, fused 1x1 back to F channels, gated by
/// channel attention and added to the block input (block skip).
template <typename Scalar>
struct DenseResidualBlock {
  struct StageCache {
    Tensor<Scalar> input, pre1, act1, pre2;
  };
  struct Cache {
    std::vector<StageCache> stages;
    std::vector<Tensor<Scalar>> outputs;
    Tensor<Scalar> concat;
    typename ChannelAttention<Scalar>::Cache attention;
  };
  struct Grads {
    Tensor<Scalar> input;
    Tensor<Scalar> previous;
  };

  std::vector<Conv<Scalar>> first;
  std::vector<Conv<Scalar>> second;
  Conv<Scalar> fuse;
  ChannelAttention<Scalar> attention;

  DenseResidualBlock() = default;
  DenseResidualBlock(const std::string& name, int features, int stages, int reduction, Rng& rng);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, const Tensor<Scalar>& previous, Cache* cache) const;
  Grads backward(const Tensor<Scalar>& grad, const Cache& cache);
  void collect(ParamList<Scalar>& out);
};

/// conv-ReLU-conv, channel attention, identity skip.
template <typename Scalar>
struct ResidualAttentionBlock {
  struct Cache {
    Tensor<Scalar> input, pre1, act1;
    typename ChannelAttention<Scalar>::Cache attention;
  };

  Conv<Scalar> conv1;
  Conv<Scalar> conv2;
  ChannelAttention<Scalar> attention;

  ResidualAttentionBlock() = default;
  ResidualAttentionBlock(const std::string& name, int features, int reduction, Rng& rng);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Cache& cache);
  void collect(ParamList<Scalar>& out);
};

/// Residual blocks followed by a 3x3 conv, wrapped in a group skip.
template <typename Scalar>
struct ResidualGroup {
  struct Cache {
    std::vector<typename ResidualAttentionBlock<Scalar>::Cache> blocks;
    Tensor<Scalar> tail_input;
  };

  std::vector<ResidualAttentionBlock<Scalar>> blocks;
  Conv<Scalar> tail;

  ResidualGroup() = default;
  ResidualGroup(const std::string& name, int features, int count, int reduction, Rng& rng);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Cache& cache);
  void collect(ParamList<Scalar>& out);
};

/// conv F -> F*s^2, pixel shuffle s (two x2 stages for s = 4), then ReLU.
template <typename Scalar>
struct Upsampler {
  struct Cache {
    std::vector<Tensor<Scalar>> inputs;
    Tensor<Scalar> shuffled;
  };

  std::vector<Conv<Scalar>> convs;
  std::vector<int> factors;

  Upsampler() = default;
  Upsampler(const std::string& name, int features, int scale, Rng& rng);

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const;
  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Cache& cache);
  void collect(ParamList<Scalar>& out);
};

}  // namespace srforge::layers
