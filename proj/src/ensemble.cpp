#include "srforge/ensemble.hpp"

#include <algorithm>
#include <cmath>

#include "srforge/error.hpp"
#include "srforge/ops.hpp"
#include "srforge/parallel.hpp"

namespace srforge {

PatchFn as_patch_fn(const Modelf& model) {
  return [&model](const Tensorf& x) { return model.forward(x); };
}

std::vector<int> tile_origins(int extent, int patch, int stride) {
  if (patch < 1 || patch > extent) {
    throw InvalidArgument("plan_tiles: patch " + std::to_string(patch) + " does not fit extent " +
                          std::to_string(extent));
  }
  if (stride < 1 || stride > patch) throw InvalidArgument("plan_tiles: stride must lie in [1, patch]");
  std::vector<int> origins;
  for (int o = 0; o + patch <= extent; o += stride) origins.push_back(o);
  if (origins.back() + patch < extent) origins.push_back(extent - patch);
  return origins;
}

TilePlan plan_tiles(int height, int width, int patch, int stride) {
  TilePlan plan{height, width, patch, stride, {}};
  const std::vector<int> ys = tile_origins(height, patch, stride);
  const std::vector<int> xs = tile_origins(width, patch, stride);
  for (int y : ys)
    for (int x : xs) plan.tiles.push_back({y, x});
  return plan;
}

Eigen::MatrixXd make_weight_map(int patch, int scale) {
  if (patch < 1 || scale < 1) throw InvalidArgument("make_weight_map: patch and scale must be positive");
  const int n = patch * scale;
  const double center = (n - 1) / 2.0;
  const double half = n / 2.0;
  const double nearest = (n % 2 == 0) ? 0.5 : 0.0;
  Eigen::VectorXd axis(n);
  for (int i = 0; i < n; ++i) {
    axis[i] = std::max(kWeightFloor, 1.0 - (std::abs(i - center) - nearest) / (half + 1.0));
  }
  return axis * axis.transpose();
}

Tensorf self_ensemble_forward(const PatchFn& fn, const Tensorf& lr) {
  std::vector<Tensorf> branches(8);
  parallel_for(8, [&](std::size_t d) {
    const int t = static_cast<int>(d);
    branches[d] = dihedral(fn(dihedral(lr, t)), dihedral_inverse(t));
  });
  Eigen::VectorXd sum = branches[0].values().cast<double>();
  for (int d = 1; d < 8; ++d) {
    if (branches[d].shape() != branches[0].shape()) {
      throw InvalidArgument("self-ensemble: restoration output is not dihedral-covariant in shape");
    }
    sum += branches[d].values().cast<double>();
  }
  return Tensorf(branches[0].shape(), (sum / 8.0).cast<float>());
}

Tensor<double> blend_tiles(std::span<const Tensorf> patches, const TilePlan& plan, int scale,
                           const Eigen::MatrixXd& weights) {
  const int hp = plan.patch * scale;
  if (weights.rows() != hp || weights.cols() != hp) {
    throw InvalidArgument("blend_tiles: weight map does not match patch * scale");
  }
  if (patches.size() != plan.tiles.size()) throw InvalidArgument("blend_tiles: one patch per tile required");
  if (patches.empty()) throw InvariantViolation("blend_tiles: empty tile plan");
  const Shape out_shape{patches[0].n(), patches[0].c(), plan.height * scale, plan.width * scale};
  Tensor<double> numerator(out_shape);
  Eigen::MatrixXd denominator = Eigen::MatrixXd::Zero(out_shape.h, out_shape.w);
  for (std::size_t i = 0; i < plan.tiles.size(); ++i) {
    const Tensorf& patch = patches[i];
    if (patch.shape() != Shape{out_shape.n, out_shape.c, hp, hp}) {
      throw InvalidArgument("blend_tiles: restoration returned " + to_string(patch.shape()) + " for a " +
                            std::to_string(plan.patch) + "px tile at scale " + std::to_string(scale));
    }
    const int y0 = plan.tiles[i].y * scale;
    const int x0 = plan.tiles[i].x * scale;
    if (y0 < 0 || x0 < 0 || y0 + hp > out_shape.h || x0 + hp > out_shape.w) {
      throw InvalidArgument("blend_tiles: tile outside the image");
    }
    denominator.block(y0, x0, hp, hp) += weights;
    for (int n = 0; n < out_shape.n; ++n)
      for (int c = 0; c < out_shape.c; ++c) {
        numerator.plane(n, c).block(y0, x0, hp, hp) += patch.plane(n, c).cast<double>().cwiseProduct(weights);
      }
  }
  if (!(denominator.array() > 0.0).all()) throw InvariantViolation("blend_tiles: tile plan leaves pixels uncovered");
  for (int n = 0; n < out_shape.n; ++n)
    for (int c = 0; c < out_shape.c; ++c) numerator.plane(n, c).array() /= denominator.array();
  return numerator;
}

Tensorf tiled_forward(const PatchFn& fn, const Tensorf& lr, int scale, const TilePlan& plan,
                      const Eigen::MatrixXd& weights) {
  if (plan.height != lr.h() || plan.width != lr.w()) {
    throw InvalidArgument("tiled_forward: plan is for " + std::to_string(plan.height) + "x" +
                          std::to_string(plan.width) + " but image is " + to_string(lr.shape()));
  }
  std::vector<Tensorf> outputs(plan.tiles.size());
  parallel_for(plan.tiles.size(), [&](std::size_t i) {
    const Tile& t = plan.tiles[i];
    outputs[i] = fn(crop(lr, t.y, t.x, plan.patch, plan.patch));
  });
  return blend_tiles(outputs, plan, scale, weights).cast<float>();
}

Tensorf member_forward(const EnsembleMember& member, const Tensorf& lr, const EnsembleOptions& options) {
  const PatchFn restore = options.self_ensemble
                              ? PatchFn([&member](const Tensorf& x) { return self_ensemble_forward(member.fn, x); })
                              : member.fn;
  if (options.patch <= 0 || options.patch > std::min(lr.h(), lr.w())) return restore(lr);
  const TilePlan plan = plan_tiles(lr.h(), lr.w(), options.patch, options.stride);
  return tiled_forward(restore, lr, member.scale, plan, make_weight_map(options.patch, member.scale));
}

Tensorf model_ensemble(std::span<const EnsembleMember> members, const Tensorf& lr, const EnsembleOptions& options) {
  if (members.empty()) throw InvalidArgument("model_ensemble: no models");
  double total_weight = 0.0;
  for (const auto& m : members) {
    if (m.scale != members[0].scale) throw InvalidArgument("model_ensemble: members disagree on scale");
    if (!(m.weight > 0.0)) throw InvalidArgument("model_ensemble: member weights must be positive");
    total_weight += m.weight;
  }
  std::vector<Tensorf> outputs(members.size());
  parallel_for(members.size(), [&](std::size_t i) { outputs[i] = member_forward(members[i], lr, options); });
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(outputs[0].size());
  for (std::size_t i = 0; i < members.size(); ++i) {
    if (outputs[i].shape() != outputs[0].shape()) throw InvalidArgument("model_ensemble: member output shapes differ");
    sum += (members[i].weight / total_weight) * outputs[i].values().cast<double>();
  }
  return Tensorf(outputs[0].shape(), sum.cwiseMax(0.0).cwiseMin(1.0).cast<float>());
}

}  // namespace srforge
