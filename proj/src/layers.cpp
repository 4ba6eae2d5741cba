#include "srforge/layers.hpp"

#include <cmath>

namespace srforge::layers {

template <typename Scalar>
Conv<Scalar>::Conv(const std::string& name, int c_in, int c_out, int kernel, Rng& rng)
    : geom{1, kernel / 2} {
  Tensor<Scalar> w({c_out, c_in, kernel, kernel});
  const double bound = 1.0 / std::sqrt(static_cast<double>(c_in) * kernel * kernel);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.values()[i] = static_cast<Scalar>(rng.uniform(-bound, bound));
  weight = Parameter<Scalar>(name + ".weight", std::move(w));
  bias = Parameter<Scalar>(name + ".bias", Tensor<Scalar>({1, c_out, 1, 1}));
}

template <typename Scalar>
Tensor<Scalar> Conv<Scalar>::forward(const Tensor<Scalar>& x) const {
  return conv2d(x, weight.value, bias.value, geom);
}

template <typename Scalar>
Tensor<Scalar> Conv<Scalar>::backward(const Tensor<Scalar>& grad, const Tensor<Scalar>& input) {
  return conv2d_backward(grad, input, weight, &bias, geom);
}

template <typename Scalar>
void Conv<Scalar>::collect(ParamList<Scalar>& out) {
  out.push_back(&weight);
  out.push_back(&bias);
}

template <typename Scalar>
ChannelAttention<Scalar>::ChannelAttention(const std::string& name, int features, int reduction,
                                           Rng& rng)
    : down(name + ".down", features, features / reduction, 1, rng),
      up(name + ".up", features / reduction, features, 1, rng) {}

template <typename Scalar>
Tensor<Scalar> ChannelAttention<Scalar>::forward(const Tensor<Scalar>& x, Cache* cache) const {
  Tensor<Scalar> pooled = global_avg_pool(x);
  Tensor<Scalar> hidden = down.forward(pooled);
  Tensor<Scalar> gate = sigmoid(up.forward(relu(hidden)));
  Tensor<Scalar> out = scale_channels(x, gate);
  if (cache != nullptr) {
    cache->input = x;
    cache->pooled = std::move(pooled);
    cache->hidden = std::move(hidden);
    cache->gate = std::move(gate);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> ChannelAttention<Scalar>::backward(const Tensor<Scalar>& grad, const Cache& cache) {
  Tensor<Scalar> grad_input;
  Tensor<Scalar> grad_gate;
  scale_channels_backward(grad, cache.input, cache.gate, grad_input, grad_gate);
  Tensor<Scalar> g = sigmoid_backward(grad_gate, cache.gate);
  g = up.backward(g, relu(cache.hidden));
  g = relu_backward(g, cache.hidden);
  g = down.backward(g, cache.pooled);
  grad_input.values() += global_avg_pool_backward(g, cache.input.shape()).values();
  return grad_input;
}

template <typename Scalar>
void ChannelAttention<Scalar>::collect(ParamList<Scalar>& out) {
  down.collect(out);
  up.collect(out);
}

template <typename Scalar>
DenseResidualBlock<Scalar>::DenseResidualBlock(const std::string& name, int features, int stages,
                                               int reduction, Rng& rng) {
  for (int s = 0; s < stages; ++s) {
    const std::string stage = name + ".stages." + std::to_string(s);
    first.emplace_back(stage + ".conv1", features, features, 3, rng);
    second.emplace_back(stage + ".conv2", features, features, 3, rng);
  }
  fuse = Conv<Scalar>(name + ".fuse", features * stages, features, 1, rng);
  attention = ChannelAttention<Scalar>(name + ".attention", features, reduction, rng);
}

namespace {
// Stages that receive the inter-block shortcut.
constexpr std::size_t kSkipStages = 2;
}  // namespace

template <typename Scalar>
Tensor<Scalar> DenseResidualBlock<Scalar>::forward(const Tensor<Scalar>& x,
                                                   const Tensor<Scalar>& previous,
                                                   Cache* cache) const {
  const std::size_t stages = first.size();
  std::vector<Tensor<Scalar>> outputs;
  outputs.reserve(stages);
  if (cache != nullptr) cache->stages.assign(stages, {});
  for (std::size_t s = 0; s < stages; ++s) {
    Tensor<Scalar> input = s == 0 ? x : outputs.back();
    if (s < kSkipStages) input.values() += previous.values();
    Tensor<Scalar> pre1 = first[s].forward(input);
    Tensor<Scalar> act1 = relu(pre1);
    Tensor<Scalar> pre2 = second[s].forward(act1);
    outputs.push_back(relu(pre2));
    if (cache != nullptr) {
      cache->stages[s] = {std::move(input), std::move(pre1), std::move(act1), std::move(pre2)};
    }
  }
  Tensor<Scalar> concat = concat_channels<Scalar>(outputs);
  Tensor<Scalar> fused = fuse.forward(concat);
  Tensor<Scalar> out = attention.forward(fused, cache != nullptr ? &cache->attention : nullptr);
  out.values() += x.values();
  if (cache != nullptr) {
    cache->outputs = std::move(outputs);
    cache->concat = std::move(concat);
  }
  return out;
}

template <typename Scalar>
typename DenseResidualBlock<Scalar>::Grads DenseResidualBlock<Scalar>::backward(
    const Tensor<Scalar>& grad, const Cache& cache) {
  const std::size_t stages = first.size();
  Grads grads{grad, Tensor<Scalar>(grad.shape())};
  Tensor<Scalar> g = attention.backward(grad, cache.attention);
  g = fuse.backward(g, cache.concat);
  const std::vector<int> widths(stages, grad.c());
  std::vector<Tensor<Scalar>> grad_outputs = split_channels<Scalar>(g, widths);
  for (std::size_t s = stages; s-- > 0;) {
    const StageCache& sc = cache.stages[s];
    Tensor<Scalar> gs = relu_backward(grad_outputs[s], sc.pre2);
    gs = second[s].backward(gs, sc.act1);
    gs = relu_backward(gs, sc.pre1);
    gs = first[s].backward(gs, sc.input);
    if (s < kSkipStages) grads.previous.values() += gs.values();
    if (s == 0) {
      grads.input.values() += gs.values();
    } else {
      grad_outputs[s - 1].values() += gs.values();
    }
  }
  return grads;
}

template <typename Scalar>
void DenseResidualBlock<Scalar>::collect(ParamList<Scalar>& out) {
  for (std::size_t s = 0; s < first.size(); ++s) {
    first[s].collect(out);
    second[s].collect(out);
  }
  fuse.collect(out);
  attention.collect(out);
}

template <typename Scalar>
ResidualAttentionBlock<Scalar>::ResidualAttentionBlock(const std::string& name, int features,
                                                       int reduction, Rng& rng)
    : conv1(name + ".conv1", features, features, 3, rng),
      conv2(name + ".conv2", features, features, 3, rng),
      attention(name + ".attention", features, reduction, rng) {}

template <typename Scalar>
Tensor<Scalar> ResidualAttentionBlock<Scalar>::forward(const Tensor<Scalar>& x, Cache* cache) const {
  Tensor<Scalar> pre1 = conv1.forward(x);
  Tensor<Scalar> act1 = relu(pre1);
  Tensor<Scalar> out =
      attention.forward(conv2.forward(act1), cache != nullptr ? &cache->attention : nullptr);
  out.values() += x.values();
  if (cache != nullptr) {
    cache->input = x;
    cache->pre1 = std::move(pre1);
    cache->act1 = std::move(act1);
  }
  return out;
}

template <typename Scalar>
Tensor<Scalar> ResidualAttentionBlock<Scalar>::backward(const Tensor<Scalar>& grad,
                                                        const Cache& cache) {
  Tensor<Scalar> g = attention.backward(grad, cache.attention);
  g = conv2.backward(g, cache.act1);
  g = relu_backward(g, cache.pre1);
  g = conv1.backward(g, cache.input);
  g.values() += grad.values();
  return g;
}

template <typename Scalar>
void ResidualAttentionBlock<Scalar>::collect(ParamList<Scalar>& out) {
  conv1.collect(out);
  conv2.collect(out);
  attention.collect(out);
}

template <typename Scalar>
ResidualGroup<Scalar>::ResidualGroup(const std::string& name, int features, int count,
                                     int reduction, Rng& rng) {
  for (int b = 0; b < count; ++b) {
    blocks.emplace_back(name + ".blocks." + std::to_string(b), features, reduction, rng);
  }
  tail = Conv<Scalar>(name + ".tail", features, features, 3, rng);
}

template <typename Scalar>
Tensor<Scalar> ResidualGroup<Scalar>::forward(const Tensor<Scalar>& x, Cache* cache) const {
  if (cache != nullptr) cache->blocks.assign(blocks.size(), {});
  Tensor<Scalar> h = x;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    h = blocks[b].forward(h, cache != nullptr ? &cache->blocks[b] : nullptr);
  }
  Tensor<Scalar> out = tail.forward(h);
  out.values() += x.values();
  if (cache != nullptr) cache->tail_input = std::move(h);
  return out;
}

template <typename Scalar>
Tensor<Scalar> ResidualGroup<Scalar>::backward(const Tensor<Scalar>& grad, const Cache& cache) {
  Tensor<Scalar> g = tail.backward(grad, cache.tail_input);
  for (std::size_t b = blocks.size(); b-- > 0;) g = blocks[b].backward(g, cache.blocks[b]);
  g.values() += grad.values();
  return g;
}

template <typename Scalar>
void ResidualGroup<Scalar>::collect(ParamList<Scalar>& out) {
  for (auto& b : blocks) b.collect(out);
  tail.collect(out);
}

template <typename Scalar>
Upsampler<Scalar>::Upsampler(const std::string& name, int features, int scale, Rng& rng) {
  factors = scale == 4 ? std::vector<int>{2, 2} : std::vector<int>{scale};
  for (std::size_t i = 0; i < factors.size(); ++i) {
    const int f = factors[i];
    convs.emplace_back(name + "." + std::to_string(i), features, features * f * f, 3, rng);
  }
}

template <typename Scalar>
Tensor<Scalar> Upsampler<Scalar>::forward(const Tensor<Scalar>& x, Cache* cache) const {
  if (cache != nullptr) cache->inputs.clear();
  Tensor<Scalar> h = x;
  for (std::size_t i = 0; i < convs.size(); ++i) {
    if (cache != nullptr) cache->inputs.push_back(h);
    h = pixel_shuffle(convs[i].forward(h), factors[i]);
  }
  Tensor<Scalar> out = relu(h);
  if (cache != nullptr) cache->shuffled = std::move(h);
  return out;
}

template <typename Scalar>
Tensor<Scalar> Upsampler<Scalar>::backward(const Tensor<Scalar>& grad, const Cache& cache) {
  Tensor<Scalar> g = relu_backward(grad, cache.shuffled);
  for (std::size_t i = convs.size(); i-- > 0;) {
    g = convs[i].backward(pixel_unshuffle(g, factors[i]), cache.inputs[i]);
  }
  return g;
}

template <typename Scalar>
void Upsampler<Scalar>::collect(ParamList<Scalar>& out) {
  for (auto& c : convs) c.collect(out);
}

template struct Conv<float>;
template struct Conv<double>;
template struct ChannelAttention<float>;
template struct ChannelAttention<double>;
template struct DenseResidualBlock<float>;
template struct DenseResidualBlock<double>;
template struct ResidualAttentionBlock<float>;
template struct ResidualAttentionBlock<double>;
template struct ResidualGroup<float>;
template struct ResidualGroup<double>;
template struct Upsampler<float>;
template struct Upsampler<double>;

}  // namespace srforge::layers
