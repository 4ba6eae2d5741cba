#include "srforge/models.hpp"

#include <algorithm>
#include <map>

namespace srforge {

void DrnConfig::validate() const {
  if (features < 1 || depth < 1 || block_size < 1 || attention_reduction < 1) {
    throw InvalidArgument("DRN config: features, depth, block_size and reduction must be positive");
  }
  if (scale < 2 || scale > 4) throw InvalidArgument("DRN config: scale must be one of {2,3,4}");
  if (features < attention_reduction || features % attention_reduction != 0) {
    throw InvalidArgument("DRN config: attention reduction must divide features");
  }
}

void RcanConfig::validate() const {
  if (features < 1 || groups < 1 || blocks_per_group < 1 || attention_reduction < 1) {
    throw InvalidArgument("RCAN config: all sizes must be positive");
  }
  if (scale < 2 || scale > 4) throw InvalidArgument("RCAN config: scale must be one of {2,3,4}");
  if (features < attention_reduction || features % attention_reduction != 0) {
    throw InvalidArgument("RCAN config: attention reduction must divide features");
  }
}

ModelKind kind_of(const ModelConfig& config) {
  return std::holds_alternative<DrnConfig>(config) ? ModelKind::Drn : ModelKind::Rcan;
}

int scale_of(const ModelConfig& config) {
  return std::visit([](const auto& c) { return c.scale; }, config);
}

void validate(const ModelConfig& config) {
  std::visit([](const auto& c) { c.validate(); }, config);
}

nlohmann::json config_to_json(const ModelConfig& config) {
  if (const auto* d = std::get_if<DrnConfig>(&config)) {
    return {{"features", d->features},
            {"depth", d->depth},
            {"block_size", d->block_size},
            {"scale", d->scale},
            {"attention_reduction", d->attention_reduction}};
  }
  const auto& r = std::get<RcanConfig>(config);
  return {{"features", r.features},
          {"groups", r.groups},
          {"blocks_per_group", r.blocks_per_group},
          {"scale", r.scale},
          {"attention_reduction", r.attention_reduction}};
}

ModelConfig config_from_json(ModelKind kind, const nlohmann::json& j) {
  if (kind == ModelKind::Drn) {
    DrnConfig c;
    c.features = j.at("features").get<int>();
    c.depth = j.at("depth").get<int>();
    c.block_size = j.at("block_size").get<int>();
    c.scale = j.at("scale").get<int>();
    c.attention_reduction = j.at("attention_reduction").get<int>();
    return c;
  }
  RcanConfig c;
  c.features = j.at("features").get<int>();
  c.groups = j.at("groups").get<int>();
  c.blocks_per_group = j.at("blocks_per_group").get<int>();
  c.scale = j.at("scale").get<int>();
  c.attention_reduction = j.at("attention_reduction").get<int>();
  return c;
}

ModelConfig preset(const std::string& name, int scale) {
  ModelConfig config;
  if (name == "drn-star") {
    config = DrnConfig{128, 18, 3, scale, 16};
  } else if (name == "drn-tiny") {
    config = DrnConfig{16, 2, 2, scale, 4};
  } else if (name == "rcan-star") {
    config = RcanConfig{128, 5, 10, 16, scale};
  } else if (name == "rcan") {
    config = RcanConfig{64, 10, 20, 16, scale};
  } else if (name == "rcan-tiny") {
    config = RcanConfig{16, 2, 2, 4, scale};
  } else {
    throw InvalidArgument("unknown preset '" + name + "'");
  }
  validate(config);
  return config;
}

std::vector<std::string> preset_names() {
  return {"drn-star", "drn-tiny", "rcan-star", "rcan", "rcan-tiny"};
}

namespace detail {

using layers::Conv;
using layers::DenseResidualBlock;
using layers::ParamList;
using layers::ResidualGroup;
using layers::Upsampler;

template <typename Scalar>
struct DrnNet {
  struct Cache {
    Tensor<Scalar> input;
    std::vector<Tensor<Scalar>> block_inputs;  // D + 1 entries; the last feeds the upsampler
    std::vector<typename DenseResidualBlock<Scalar>::Cache> blocks;
    typename Upsampler<Scalar>::Cache up;
    Tensor<Scalar> tail_input;
  };

  Conv<Scalar> head;
  std::vector<DenseResidualBlock<Scalar>> blocks;
  Upsampler<Scalar> up;
  Conv<Scalar> tail;

  DrnNet(const DrnConfig& c, Rng& rng)
      : head("input", 3, c.features, 3, rng), up("upsampler", c.features, c.scale, rng) {
    for (int i = 0; i < c.depth; ++i) {
      blocks.emplace_back("blocks." + std::to_string(i), c.features, c.block_size,
                          c.attention_reduction, rng);
    }
    tail = Conv<Scalar>("output", c.features, 3, 3, rng);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const {
    std::vector<Tensor<Scalar>> h;
    h.reserve(blocks.size() + 1);
    h.push_back(head.forward(x));
    if (cache != nullptr) cache->blocks.assign(blocks.size(), {});
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      // The first block's missing predecessor is the shallow feature map.
      const Tensor<Scalar>& previous = h[i == 0 ? 0 : i - 1];
      h.push_back(blocks[i].forward(h[i], previous, cache != nullptr ? &cache->blocks[i] : nullptr));
    }
    Tensor<Scalar> upsampled = up.forward(h.back(), cache != nullptr ? &cache->up : nullptr);
    Tensor<Scalar> out = tail.forward(upsampled);
    if (cache != nullptr) {
      cache->input = x;
      cache->block_inputs = std::move(h);
      cache->tail_input = std::move(upsampled);
    }
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Cache& cache) {
    Tensor<Scalar> g = tail.backward(grad, cache.tail_input);
    g = up.backward(g, cache.up);
    std::vector<Tensor<Scalar>> grad_h;
    grad_h.reserve(blocks.size() + 1);
    for (const auto& t : cache.block_inputs) grad_h.emplace_back(t.shape());
    grad_h.back() = std::move(g);
    for (std::size_t i = blocks.size(); i-- > 0;) {
      auto grads = blocks[i].backward(grad_h[i + 1], cache.blocks[i]);
      grad_h[i].values() += grads.input.values();
      grad_h[i == 0 ? 0 : i - 1].values() += grads.previous.values();
    }
    return head.backward(grad_h[0], cache.input);
  }

  void collect(ParamList<Scalar>& out) {
    head.collect(out);
    for (auto& b : blocks) b.collect(out);
    up.collect(out);
    tail.collect(out);
  }
};

template <typename Scalar>
struct RcanNet {
  struct Cache {
    Tensor<Scalar> input;
    std::vector<Tensor<Scalar>> group_inputs;
    std::vector<typename ResidualGroup<Scalar>::Cache> groups;
    Tensor<Scalar> body_tail_input;
    typename Upsampler<Scalar>::Cache up;
    Tensor<Scalar> tail_input;
  };

  Conv<Scalar> head;
  std::vector<ResidualGroup<Scalar>> groups;
  Conv<Scalar> body_tail;
  Upsampler<Scalar> up;
  Conv<Scalar> tail;

  RcanNet(const RcanConfig& c, Rng& rng) : head("input", 3, c.features, 3, rng) {
    for (int g = 0; g < c.groups; ++g) {
      groups.emplace_back("groups." + std::to_string(g), c.features, c.blocks_per_group,
                          c.attention_reduction, rng);
    }
    body_tail = Conv<Scalar>("body_tail", c.features, c.features, 3, rng);
    up = Upsampler<Scalar>("upsampler", c.features, c.scale, rng);
    tail = Conv<Scalar>("output", c.features, 3, 3, rng);
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Cache* cache) const {
    const Tensor<Scalar> shallow = head.forward(x);
    if (cache != nullptr) {
      cache->groups.assign(groups.size(), {});
      cache->group_inputs.clear();
    }
    Tensor<Scalar> h = shallow;
    for (std::size_t g = 0; g < groups.size(); ++g) {
      if (cache != nullptr) cache->group_inputs.push_back(h);
      h = groups[g].forward(h, cache != nullptr ? &cache->groups[g] : nullptr);
    }
    Tensor<Scalar> body = body_tail.forward(h);
    body.values() += shallow.values();  // long skip
    Tensor<Scalar> upsampled = up.forward(body, cache != nullptr ? &cache->up : nullptr);
    Tensor<Scalar> out = tail.forward(upsampled);
    if (cache != nullptr) {
      cache->input = x;
      cache->body_tail_input = std::move(h);
      cache->tail_input = std::move(upsampled);
    }
    return out;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& grad, const Cache& cache) {
    Tensor<Scalar> g = tail.backward(grad, cache.tail_input);
    g = up.backward(g, cache.up);
    const Tensor<Scalar> grad_shallow = g;
    g = body_tail.backward(g, cache.body_tail_input);
    for (std::size_t i = groups.size(); i-- > 0;) g = groups[i].backward(g, cache.groups[i]);
    g.values() += grad_shallow.values();
    return head.backward(g, cache.input);
  }

  void collect(ParamList<Scalar>& out) {
    head.collect(out);
    for (auto& g : groups) g.collect(out);
    body_tail.collect(out);
    up.collect(out);
    tail.collect(out);
  }
};

}  // namespace detail

template <typename Scalar>
struct Model<Scalar>::Impl {
  using Net = std::variant<detail::DrnNet<Scalar>, detail::RcanNet<Scalar>>;
  using Cache = std::variant<typename detail::DrnNet<Scalar>::Cache,
                             typename detail::RcanNet<Scalar>::Cache>;

  Net net;
  std::optional<Cache> cache;

  static Net make(const ModelConfig& config, std::uint64_t seed) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(kind_of(config))));
    if (const auto* d = std::get_if<DrnConfig>(&config)) return Net{std::in_place_index<0>, *d, rng};
    return Net{std::in_place_index<1>, std::get<RcanConfig>(config), rng};
  }
};

template <typename Scalar>
Model<Scalar>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  validate(config_);
  impl_ = std::make_unique<Impl>(Impl{Impl::make(config_, seed), std::nullopt});
}

template <typename Scalar>
Model<Scalar>::~Model() = default;
template <typename Scalar>
Model<Scalar>::Model(Model&&) noexcept = default;
template <typename Scalar>
Model<Scalar>& Model<Scalar>::operator=(Model&&) noexcept = default;

template <typename Scalar>
Model<Scalar>::Model(const Model& other)
    : config_(other.config_), impl_(std::make_unique<Impl>(Impl{other.impl_->net, std::nullopt})) {}

template <typename Scalar>
Model<Scalar>& Model<Scalar>::operator=(const Model& other) {
  if (this != &other) {
    config_ = other.config_;
    impl_ = std::make_unique<Impl>(Impl{other.impl_->net, std::nullopt});
  }
  return *this;
}

namespace {
template <typename Scalar>
void check_input(const Tensor<Scalar>& input) {
  if (input.c() != 3) {
    throw InvalidArgument("model input must have 3 channels, got shape " + to_string(input.shape()));
  }
}
}  // namespace

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::forward(const Tensor<Scalar>& input) const {
  check_input(input);
  return std::visit([&](const auto& net) { return net.forward(input, nullptr); }, impl_->net);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::infer(const Tensor<Scalar>& input) const {
  Tensor<Scalar> out = forward(input);
  out.values() = out.values().cwiseMax(Scalar(0)).cwiseMin(Scalar(1));
  return out;
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::forward_train(const Tensor<Scalar>& input) {
  check_input(input);
  return std::visit(
      [&](auto& net) {
        typename std::decay_t<decltype(net)>::Cache cache;
        Tensor<Scalar> out = net.forward(input, &cache);
        impl_->cache.emplace(std::move(cache));
        return out;
      },
      impl_->net);
}

template <typename Scalar>
Tensor<Scalar> Model<Scalar>::backward(const Tensor<Scalar>& grad_output) {
  if (!impl_->cache) throw InvalidArgument("backward called without a preceding forward_train");
  return std::visit(
      [&](auto& net) {
        using Cache = typename std::decay_t<decltype(net)>::Cache;
        return net.backward(grad_output, std::get<Cache>(*impl_->cache));
      },
      impl_->net);
}

template <typename Scalar>
std::vector<Parameter<Scalar>*> Model<Scalar>::parameters() {
  std::vector<Parameter<Scalar>*> out;
  std::visit([&](auto& net) { net.collect(out); }, impl_->net);
  return out;
}

template <typename Scalar>
std::vector<const Parameter<Scalar>*> Model<Scalar>::parameters() const {
  std::vector<Parameter<Scalar>*> all;
  std::visit([&](auto& net) { net.collect(all); }, impl_->net);
  return {all.begin(), all.end()};
}

template <typename Scalar>
Parameter<Scalar>& Model<Scalar>::parameter(const std::string& name) {
  for (auto* p : parameters()) {
    if (p->name == name) return *p;
  }
  throw InvalidArgument("no parameter named '" + name + "'");
}

template <typename Scalar>
std::size_t Model<Scalar>::parameter_count() const {
  std::size_t total = 0;
  for (const auto* p : parameters()) total += static_cast<std::size_t>(p->value.size());
  return total;
}

template <typename Scalar>
void Model<Scalar>::zero_grads() {
  for (auto* p : parameters()) p->zero_grad();
}

template <typename Scalar>
template <typename Other>
Model<Other> Model<Scalar>::cast() const {
  Model<Other> out(config_, 0);
  auto dst = out.parameters();
  const auto src = parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<Other>();
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;

}  // namespace srforge
