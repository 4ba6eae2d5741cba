#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "srforge/random.hpp"
#include "srforge/tensor.hpp"

namespace srforge {

/// Blur kernel, scale, and noise of the synthetic degradation
/// lr = clamp(bicubic_down_s(hr (*) kernel) + noise).
struct DegradeSpec {
  Eigen::MatrixXd kernel = Eigen::MatrixXd::Ones(1, 1);
  int scale = 2;
  double noise_sigma = 0.0;
  std::uint64_t rng_seed = 0;

  /// Kernel non-empty with odd extents, entries >= 0 summing to 1 within
  /// 1e-9; scale in {2, 3, 4}; noise_sigma in [0, 1].
  void validate() const;
};

/// Normalised isotropic Gaussian, (2r+1)^2 taps with r = ceil(3 sigma).
/// sigma = 0 gives the 1x1 delta.
Eigen::MatrixXd gaussian_kernel(double sigma);

/// Blurs (reflect padding), downsamples with bicubic_resize at 1/s, adds
/// i.i.d. Gaussian noise drawn from spec.rng_seed, clamps to [0, 1].
Tensorf degrade(const Tensorf& hr, const DegradeSpec& spec);

/// 2-D convolution of every (n, c) plane with reflect padding (edge pixel not
/// repeated). Exposed for testing degrade().
Tensorf blur_reflect(const Tensorf& image, const Eigen::MatrixXd& kernel);

struct ImagePair {
  std::string id;
  Tensorf lr;  // (1, 3, h, w)
  Tensorf hr;  // (1, 3, h*s, w*s)
  double ncc_score = 0.0;

  /// Integer factor between hr and lr; throws unless hr is exactly s x lr.
  int scale() const;
};

struct NccRejection {
  ImagePair pair;
  std::string reason;
};

struct NccFilterResult {
  std::vector<ImagePair> kept;
  std::vector<NccRejection> rejected;
};

inline constexpr double kDefaultNccThreshold = 0.99;

/// Keeps a pair iff ncc(bicubic-upscaled lr, hr) >= threshold. Each pair's
/// ncc_score is filled in; degenerate or malformed pairs are rejected with a
/// reason instead of throwing.
NccFilterResult ncc_filter(std::vector<ImagePair> pairs, double threshold = kDefaultNccThreshold);

struct PatchPair {
  Tensorf lr;
  Tensorf hr;
};

/// Aligned crop at lr offset (y, x) and hr offset (s*y, s*x), then the same
/// dihedral transform on both.
PatchPair crop_pair(const ImagePair& pair, int lr_patch, int y, int x, int transform);

/// crop_pair with offset and transform drawn uniformly from `rng`.
PatchPair random_crop_aug(const ImagePair& pair, int lr_patch, Rng& rng);

/// Binary PPM (P6, maxval 255). Images are (1, 3, h, w) in [0, 1]; encoding
/// clamps and rounds half away from zero.
std::vector<std::uint8_t> encode_ppm(const Tensorf& image);
Tensorf decode_ppm(const std::vector<std::uint8_t>& bytes);
void save_ppm(const Tensorf& image, const std::filesystem::path& path);
Tensorf load_ppm(const std::filesystem::path& path);

struct ManifestEntry {
  std::string id;
  std::string lr_path;  // relative to the manifest's directory
  std::string hr_path;
  int scale = 2;
  std::string split;  // "train" or "val"
  double ncc = 0.0;
};

struct DatasetManifest {
  std::filesystem::path root;  // directory holding manifest.jsonl
  std::vector<ManifestEntry> entries;

  std::size_t count(const std::string& split) const;  // "" counts all
  /// Loads the pairs of one split ("" for all) in manifest order.
  std::vector<ImagePair> load_pairs(const std::string& split) const;
};

/// One JSON object per line: {id, lr_path, hr_path, scale, split, ncc}.
void save_manifest(const DatasetManifest& manifest);
DatasetManifest load_manifest(const std::filesystem::path& manifest_file);

struct SyntheticOptions {
  int count = 10;
  int hr_size = 96;
  DegradeSpec spec;  // rng_seed is ignored: each pair derives its own stream
  double val_fraction = 600.0 / 19000.0;
  std::uint64_t seed = 0;
};

/// Procedural HR image: gradient background, antialiased shapes and strokes,
/// glyph-like clusters and smooth value-noise texture. Deterministic in `seed`.
Tensorf procedural_image(int height, int width, std::uint64_t seed);

/// Writes `count` pairs as PPM files under out_dir/pairs plus
/// out_dir/manifest.jsonl. Pair i has id "pair_NNNN" and its own RNG stream
/// derived from (seed, id), so the output does not depend on thread count.
/// The round(count * val_fraction) ids with the smallest seeded hash form the
/// validation split.
DatasetManifest make_synthetic_dataset(const SyntheticOptions& options, const std::filesystem::path& out_dir);

}  // namespace srforge
