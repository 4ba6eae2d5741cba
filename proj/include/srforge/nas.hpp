#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Cholesky>
#include <json.hpp>

#include "srforge/models.hpp"

namespace srforge {

/// A point of a discrete search space: one index into each dimension's value list.
using SearchPoint = std::vector<int>;

struct SearchDimension {
  std::string name;
  std::vector<int> values;  // distinct
};

/// Cartesian product of discrete architecture dimensions. DRN spaces use the
/// dimensions features/depth/block_size, RCAN spaces features/groups/blocks.
class SearchSpace {
 public:
  /// Validates that every enumerated point yields a valid model config.
  SearchSpace(ModelKind kind, std::vector<SearchDimension> dims, int scale = 2, int attention_reduction = 16);

  ModelKind kind() const noexcept { return kind_; }
  const std::vector<SearchDimension>& dims() const noexcept { return dims_; }
  std::size_t size() const noexcept;

  /// Mixed-radix decoding, last dimension fastest; index(point(i)) == i.
  SearchPoint point(std::size_t index) const;
  std::size_t index(const SearchPoint& p) const;
  std::vector<int> values(const SearchPoint& p) const;

  /// Each dimension's value min-max normalised to [0, 1] (0 for a single value).
  Eigen::VectorXd encode(const SearchPoint& p) const;

  ModelConfig config_at(const SearchPoint& p) const;

 private:
  ModelKind kind_;
  std::vector<SearchDimension> dims_;
  int scale_;
  int attention_reduction_;
};

/// F in {16,32,64,128}, D in 2..20 step 2, L in {2,3,4}.
SearchSpace default_drn_space(int scale = 2);

struct GpHyper {
  Eigen::VectorXd length_scales;
  double signal_var = 1.0;  // in standardised score units
  double noise_var = 1e-4;
};

/// RBF-kernel GP over encoded points with scores standardised to zero mean
/// and unit variance; the prior mean is the observed mean.
struct GpSurrogate {
  Eigen::MatrixXd x;  // n x d encoded observations
  Eigen::VectorXd y;  // raw scores
  double y_mean = 0.0;
  double y_scale = 1.0;
  GpHyper hyper;
  double jitter = 0.0;  // added to the diagonal beyond noise_var
  double log_marginal_likelihood = 0.0;
  Eigen::LLT<Eigen::MatrixXd> factor;
  Eigen::VectorXd alpha;  // (K + noise I)^-1 standardised y

  std::size_t count() const { return static_cast<std::size_t>(x.rows()); }
  double prior_mean() const { return y_mean; }
  double signal_std() const;  // in raw score units
};

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyper& h);

/// Exact GP conditioning with fixed hyperparameters. Zero observations give
/// the prior. If K + noise I is not numerically positive definite, jitter
/// 1e-12, 1e-11, ... 1e-6 is tried before throwing DegenerateInput.
GpSurrogate gp_condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper);

struct GpGrid {
  std::vector<double> length_scales{0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 3.2};
  std::vector<double> signal_vars{0.25, 0.5, 1.0, 2.0, 4.0};
  std::vector<double> noise_vars{1e-6, 1e-4, 1e-3, 1e-2, 1e-1};
  bool refine = true;  // second pass on a finer grid around the coarse optimum
};

struct GpFitTrace {
  std::size_t candidates = 0;
  double best = 0.0;
  double runner_up = 0.0;  // best log marginal likelihood among the others
};

/// ML-II over the grid (per-dimension length-scales). Ties go to the smaller
/// noise, then the larger length-scales. Requires >= 2 observations.
GpSurrogate gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpGrid& grid = {},
                   GpFitTrace* trace = nullptr);

/// Log marginal likelihood of standardised scores under `hyper`.
double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper);

struct GpPrediction {
  Eigen::VectorXd mean;      // raw score units
  Eigen::VectorXd variance;  // latent-function variance, raw units, >= 0
};

/// Rows of `queries` are encoded points.
GpPrediction gp_posterior(const GpSurrogate& gp, const Eigen::MatrixXd& queries);

enum class AcquisitionKind { MaxVariance, Ucb };

struct AcquisitionConfig {
  AcquisitionKind kind = AcquisitionKind::Ucb;
  double beta = 2.0;
};

struct Acquired {
  std::size_t index = 0;  // into the pool
  double value = 0.0;
};

/// Max posterior variance or mean + beta * std over the pool. Ties (relative
/// 1e-12) go to the lexicographically smallest encoding.
Acquired acquire(const GpSurrogate& gp, const std::vector<Eigen::VectorXd>& pool, const AcquisitionConfig& config);

std::string to_string(AcquisitionKind kind);
AcquisitionKind acquisition_from_string(const std::string& name);

struct SearchConfig {
  int budget = 20;
  int init_samples = 5;
  AcquisitionConfig acquisition;
  std::uint64_t seed = 0;
  std::string evaluator = "synthetic";
  GpGrid grid;

  void validate() const;
};

/// Higher is better. May throw; the search records the failure and moves on.
using Evaluator = std::function<double(const SearchPoint&)>;

struct SearchRecord {
  int iteration = 0;
  SearchPoint point;
  double score = 0.0;
  bool failed = false;
  std::string error;
  bool initial = false;  // quasi-random design point
  std::optional<GpHyper> hyper;
  double acquisition_value = 0.0;
};

struct SearchResult {
  std::vector<SearchRecord> history;  // evaluation order
  std::vector<SearchRecord> ranked;   // by score, best first; ties by iteration
  SearchPoint posterior_argmax;
  double posterior_argmax_mean = 0.0;

  /// Best score after each evaluation.
  std::vector<double> best_so_far() const;
  nlohmann::json to_json(const SearchSpace& space) const;
};

/// Deterministic low-discrepancy design: Halton sequence with a seeded
/// Cranley-Patterson shift, mapped to indices and deduplicated.
std::vector<SearchPoint> quasi_random_points(const SearchSpace& space, int count, std::uint64_t seed);

SearchResult search(const SearchSpace& space, const Evaluator& evaluator, const SearchConfig& config);

/// Uniform sampling without replacement, for comparison.
SearchResult random_search(const SearchSpace& space, const Evaluator& evaluator, int budget, std::uint64_t seed);

/// Closed-form benchmark over a space: a separable concave quadratic in the
/// encoded coordinates, maximised at `optimum`.
struct QuadraticBenchmark {
  SearchPoint optimum;
  Eigen::VectorXd curvature;

  double operator()(const SearchSpace& space, const SearchPoint& p) const;
};

/// 4 x 10 x 3 DRN-shaped space and a benchmark whose unique optimum lies in the interior.
SearchSpace benchmark_space();
QuadraticBenchmark benchmark_quadratic();

}  // namespace srforge
