#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "srforge/models.hpp"
#include "srforge/tensor.hpp"

namespace srforge {

/// Any restoration function from an LR patch (N, C, h, w) to its HR estimate
/// (N, C', s*h, s*w). Must be safe to call concurrently.
using PatchFn = std::function<Tensorf(const Tensorf&)>;

/// Unclamped Model::forward as a PatchFn. The model must outlive the result.
PatchFn as_patch_fn(const Modelf& model);

struct Tile {
  int y = 0;
  int x = 0;
  friend bool operator==(const Tile&, const Tile&) = default;
};

struct TilePlan {
  int height = 0;
  int width = 0;
  int patch = 0;  // tiles are patch x patch LR pixels
  int stride = 0;
  std::vector<Tile> tiles;  // row-major over the per-axis origins
};

/// Origins 0, stride, 2*stride, ... below extent - patch, plus a final origin
/// clamped to extent - patch when the strided ones leave a gap.
std::vector<int> tile_origins(int extent, int patch, int stride);

/// Requires 1 <= patch <= min(h, w) and 1 <= stride <= patch.
TilePlan plan_tiles(int height, int width, int patch, int stride);

/// Separable triangular blend window of (patch*scale)^2 HR pixels. Along an
/// axis of P pixels with centre c = (P-1)/2 and half = P/2,
///   w(i) = max(1e-3, 1 - (|i - c| - d0) / (half + 1)),
/// where d0 is the distance of the pixel nearest the centre, so the peak is
/// exactly 1 for odd and even P alike.
Eigen::MatrixXd make_weight_map(int patch, int scale);

inline constexpr double kWeightFloor = 1e-3;

/// Mean over the 8 dihedral transforms T of T^-1(fn(T(lr))).
Tensorf self_ensemble_forward(const PatchFn& fn, const Tensorf& lr);

/// Blends restored tiles (patches[i] belongs to plan.tiles[i]) into 64-bit
/// numerator/denominator canvases in plan order and returns their ratio.
Tensor<double> blend_tiles(std::span<const Tensorf> patches, const TilePlan& plan, int scale,
                           const Eigen::MatrixXd& weights);

/// Runs fn on every tile (in parallel) and blends the HR patches with
/// blend_tiles.
Tensorf tiled_forward(const PatchFn& fn, const Tensorf& lr, int scale, const TilePlan& plan,
                      const Eigen::MatrixXd& weights);

struct EnsembleMember {
  PatchFn fn;
  int scale = 2;
  double weight = 1.0;
};

struct EnsembleOptions {
  bool self_ensemble = true;
  int patch = 120;  // 0 or larger than the image: whole-image processing
  int stride = 60;
};

/// One member's output for the full image: optional self-ensemble inside an
/// optional patch-ensemble. No clamping.
Tensorf member_forward(const EnsembleMember& member, const Tensorf& lr, const EnsembleOptions& options);

/// Weighted mean of member_forward over all members (uniform by default),
/// clamped to [0, 1] once at the end. Members must share one scale.
Tensorf model_ensemble(std::span<const EnsembleMember> members, const Tensorf& lr,
                       const EnsembleOptions& options = {});

}  // namespace srforge
