#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "srforge/layers.hpp"

namespace srforge {

/// Dense residual network hyperparameters: features F, depth D (blocks),
/// block size L (stages per block).
struct DrnConfig {
  int features = 64;
  int depth = 4;
  int block_size = 3;
  int scale = 2;
  int attention_reduction = 16;

  void validate() const;
  friend bool operator==(const DrnConfig&, const DrnConfig&) = default;
};

struct RcanConfig {
  int features = 64;
  int groups = 10;
  int blocks_per_group = 20;
  int attention_reduction = 16;
  int scale = 2;

  void validate() const;
  friend bool operator==(const RcanConfig&, const RcanConfig&) = default;
};

using ModelConfig = std::variant<DrnConfig, RcanConfig>;

enum class ModelKind : std::uint8_t { Drn = 0, Rcan = 1 };

ModelKind kind_of(const ModelConfig& config);
int scale_of(const ModelConfig& config);
void validate(const ModelConfig& config);

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(ModelKind kind, const nlohmann::json& j);

/// Named architectures: drn-star (F=128, D=18, L=3), drn-tiny, rcan-star
/// (128 features, 5x10), rcan (64 features, 10x20), rcan-tiny.
ModelConfig preset(const std::string& name, int scale);
std::vector<std::string> preset_names();

namespace detail {
template <typename Scalar>
struct DrnNet;
template <typename Scalar>
struct RcanNet;
}  // namespace detail

/// A super-resolution network instantiated from a config.
///
/// forward() maps (N, 3, H, W) to (N, 3, sH, sW) without clamping and keeps
/// no state, so a built model can be shared across threads for inference.
/// forward_train() records activations for a subsequent backward().
template <typename Scalar>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);
  ~Model();
  Model(Model&&) noexcept;
  Model& operator=(Model&&) noexcept;
  Model(const Model& other);
  Model& operator=(const Model& other);

  const ModelConfig& config() const noexcept { return config_; }
  int scale() const noexcept { return scale_of(config_); }

  Tensor<Scalar> forward(const Tensor<Scalar>& input) const;
  /// forward() followed by a clamp to [0, 1].
  Tensor<Scalar> infer(const Tensor<Scalar>& input) const;

  Tensor<Scalar> forward_train(const Tensor<Scalar>& input);
  /// Gradient w.r.t. the last forward_train input; accumulates parameter grads.
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_output);

  std::vector<Parameter<Scalar>*> parameters();
  std::vector<const Parameter<Scalar>*> parameters() const;
  Parameter<Scalar>& parameter(const std::string& name);
  std::size_t parameter_count() const;
  void zero_grads();

  /// Same architecture and weights in another precision.
  template <typename Other>
  Model<Other> cast() const;

 private:
  struct Impl;
  ModelConfig config_;
  std::unique_ptr<Impl> impl_;
};

using Modelf = Model<float>;
using Modeld = Model<double>;

/// Binary weights file ("SRFW" v1). See README for the layout.
void save_weights(const Modelf& model, const std::filesystem::path& path);
Modelf load_weights(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_weights(const Modelf& model);
Modelf decode_weights(const std::vector<std::uint8_t>& bytes);

}  // namespace srforge
