#pragma once

#include <limits>
#include <string>
#include <type_traits>
#include <vector>

#include "srforge/tensor.hpp"

namespace srforge {

/// Image losses and quality metrics on [0, 1] RGB tensors. Values are
/// accumulated in double regardless of the tensor scalar. Functions taking a
/// `grad` pointer write d(value)/d(first argument) there when it is non-null.

struct SsimConstants {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double range = 1.0;
};

/// Standard five-scale weights; fewer scales use the leading entries renormalised.
inline constexpr double kMsSsimWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
inline constexpr double kDefaultLossAlpha = 0.84;

template <typename Scalar>
double l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, std::type_identity_t<Tensor<Scalar>>* grad = nullptr);

/// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), valid region only,
/// averaged over every (n, c) plane.
template <typename Scalar>
double ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const SsimConstants& k = {});

/// Largest usable MS-SSIM scale count (<= 5) for an image of this size: the
/// coarsest level must still hold a full window.
int ms_ssim_max_scales(int height, int width, const SsimConstants& k = {});

/// Multi-scale SSIM with 2x2 average pooling between scales. `scales` = 0
/// picks ms_ssim_max_scales(); fewer than two usable scales is an error.
/// Per-scale terms are floored at a small positive value, so the result lies in (0, 1].
template <typename Scalar>
double ms_ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b, std::type_identity_t<Tensor<Scalar>>* grad = nullptr,
               int scales = 0, const SsimConstants& k = {});

/// alpha * (1 - ms_ssim) + (1 - alpha) * l1.
template <typename Scalar>
double mixed_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target,
                  double alpha = kDefaultLossAlpha, std::type_identity_t<Tensor<Scalar>>* grad = nullptr);

/// Peak signal-to-noise ratio in dB; +infinity when the images are identical.
template <typename Scalar>
double psnr(const Tensor<Scalar>& a, const Tensor<Scalar>& b, double peak = 1.0);

/// Zero-mean normalised cross-correlation over all pixels and channels. When
/// the shapes differ, `a` is first bicubically resized to `b`'s size.
template <typename Scalar>
double ncc(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

/// Per-image PSNR/SSIM with their aggregate means.
struct MetricReport {
  struct Entry {
    std::string id;
    double psnr = 0.0;
    double ssim = 0.0;
  };
  struct Failure {
    std::string id;
    std::string error;
  };

  std::vector<Entry> entries;
  std::vector<Failure> failures;

  void add(std::string id, double psnr_db, double ssim_value);
  void fail(std::string id, std::string error);
  double mean_psnr() const;
  double mean_ssim() const;
};

}  // namespace srforge
