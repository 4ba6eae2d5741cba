#include "srforge/nas.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include "srforge/error.hpp"
#include "srforge/random.hpp"

namespace srforge {

// ---- search space ----

SearchSpace::SearchSpace(ModelKind kind, std::vector<SearchDimension> dims, int scale, int attention_reduction)
    : kind_(kind), dims_(std::move(dims)), scale_(scale), attention_reduction_(attention_reduction) {
  if (dims_.size() != 3) throw InvalidArgument("search space: expected three dimensions");
  for (const auto& d : dims_) {
    if (d.values.empty()) throw InvalidArgument("search space: dimension " + d.name + " has no values");
    std::vector<int> sorted = d.values;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw InvalidArgument("search space: dimension " + d.name + " repeats a value");
    }
  }
  for (std::size_t i = 0; i < size(); ++i) {
    try {
      validate(config_at(point(i)));
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(std::string("search space: invalid point: ") + e.what());
    }
  }
}

std::size_t SearchSpace::size() const noexcept {
  std::size_t n = 1;
  for (const auto& d : dims_) n *= d.values.size();
  return n;
}

SearchPoint SearchSpace::point(std::size_t index) const {
  if (index >= size()) throw InvalidArgument("search space: index out of range");
  SearchPoint p(dims_.size());
  for (std::size_t k = dims_.size(); k-- > 0;) {
    p[k] = static_cast<int>(index % dims_[k].values.size());
    index /= dims_[k].values.size();
  }
  return p;
}

std::size_t SearchSpace::index(const SearchPoint& p) const {
  if (p.size() != dims_.size()) throw InvalidArgument("search space: point has wrong dimensionality");
  std::size_t index = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (p[k] < 0 || static_cast<std::size_t>(p[k]) >= dims_[k].values.size()) {
      throw InvalidArgument("search space: point index out of range in " + dims_[k].name);
    }
    index = index * dims_[k].values.size() + static_cast<std::size_t>(p[k]);
  }
  return index;
}

std::vector<int> SearchSpace::values(const SearchPoint& p) const {
  index(p);
  std::vector<int> v(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) v[k] = dims_[k].values[static_cast<std::size_t>(p[k])];
  return v;
}

Eigen::VectorXd SearchSpace::encode(const SearchPoint& p) const {
  const std::vector<int> v = values(p);
  Eigen::VectorXd e(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) {
    const auto [lo, hi] = std::minmax_element(dims_[k].values.begin(), dims_[k].values.end());
    e[static_cast<Eigen::Index>(k)] = *hi == *lo ? 0.0 : double(v[k] - *lo) / double(*hi - *lo);
  }
  return e;
}

ModelConfig SearchSpace::config_at(const SearchPoint& p) const {
  const std::vector<int> v = values(p);
  if (kind_ == ModelKind::Drn) return DrnConfig{v[0], v[1], v[2], scale_, attention_reduction_};
  return RcanConfig{v[0], v[1], v[2], attention_reduction_, scale_};
}

SearchSpace default_drn_space(int scale) {
  return SearchSpace(ModelKind::Drn,
                     {{"features", {16, 32, 64, 128}},
                      {"depth", {2, 4, 6, 8, 10, 12, 14, 16, 18, 20}},
                      {"block_size", {2, 3, 4}}},
                     scale);
}

// ---- Gaussian process ----

double rbf_kernel(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const GpHyper& h) {
  return h.signal_var * std::exp(-0.5 * ((a - b).array() / h.length_scales.array()).square().sum());
}

double GpSurrogate::signal_std() const { return y_scale * std::sqrt(hyper.signal_var); }

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Standardised {
  Eigen::VectorXd y;
  double mean = 0.0;
  double scale = 1.0;
};

Standardised standardise(const Eigen::VectorXd& y) {
  Standardised s;
  if (y.size() == 0) return s;
  s.mean = y.mean();
  const double var = (y.array() - s.mean).square().mean();
  s.scale = var > 1e-24 * std::max(1.0, s.mean * s.mean) ? std::sqrt(var) : 1.0;
  s.y = (y.array() - s.mean) / s.scale;
  return s;
}

// Correlation matrix exp(-0.5 |(xi - xj) / l|^2) without signal variance.
Eigen::MatrixXd correlation(const Eigen::MatrixXd& x, const Eigen::VectorXd& ls) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd r(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      r(i, j) = r(j, i) = std::exp(-0.5 * ((x.row(i) - x.row(j)).array() / ls.transpose().array()).square().sum());
    }
  }
  return r;
}

void check_inputs(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper* hyper) {
  if (x.rows() != y.size()) throw InvalidArgument("gp: observation count mismatch");
  if (!x.allFinite() || !y.allFinite()) throw InvalidArgument("gp: non-finite observations");
  if (hyper != nullptr) {
    if (hyper->length_scales.size() != x.cols() || !(hyper->length_scales.array() > 0).all()) {
      throw InvalidArgument("gp: one positive length-scale per dimension required");
    }
    if (!(hyper->signal_var > 0) || !(hyper->noise_var >= 0)) throw InvalidArgument("gp: bad variances");
  }
}

// Candidate ordering for ML-II: higher likelihood; ties to smaller noise, then
// larger length-scales.
struct Candidate {
  GpHyper hyper;
  double lml = -std::numeric_limits<double>::infinity();
};

bool better(const Candidate& a, const Candidate& b) {
  const double tol = 1e-9 * std::max(1.0, std::abs(b.lml));
  if (a.lml > b.lml + tol) return true;
  if (a.lml < b.lml - tol) return false;
  if (a.hyper.noise_var != b.hyper.noise_var) return a.hyper.noise_var < b.hyper.noise_var;
  const double la = a.hyper.length_scales.array().log().sum();
  const double lb = b.hyper.length_scales.array().log().sum();
  if (la != lb) return la > lb;
  for (Eigen::Index k = 0; k < a.hyper.length_scales.size(); ++k) {
    if (a.hyper.length_scales[k] != b.hyper.length_scales[k]) return a.hyper.length_scales[k] > b.hyper.length_scales[k];
  }
  return a.hyper.signal_var < b.hyper.signal_var;
}

// Scores every (signal, noise) pair for one length-scale vector using one
// eigendecomposition of the correlation matrix.
void score_length_scales(const Eigen::MatrixXd& x, const Eigen::VectorXd& ys, const Eigen::VectorXd& ls,
                         const std::vector<double>& signals, const std::vector<double>& noises,
                         std::vector<Candidate>& out) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(correlation(x, ls));
  const Eigen::VectorXd lambda = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd proj2 = (eig.eigenvectors().transpose() * ys).array().square();
  const double n = static_cast<double>(ys.size());
  for (double sv : signals)
    for (double nv : noises) {
      const Eigen::ArrayXd d = sv * lambda.array() + nv;
      Candidate c{{ls, sv, nv}, -std::numeric_limits<double>::infinity()};
      if ((d > 0).all()) c.lml = -0.5 * (proj2.array() / d).sum() - 0.5 * d.log().sum() - 0.5 * n * kLog2Pi;
      out.push_back(std::move(c));
    }
}

template <typename F>
void for_each_combo(const std::vector<std::vector<double>>& axes, F&& f) {
  std::vector<std::size_t> idx(axes.size(), 0);
  Eigen::VectorXd v(static_cast<Eigen::Index>(axes.size()));
  while (true) {
    for (std::size_t k = 0; k < axes.size(); ++k) v[static_cast<Eigen::Index>(k)] = axes[k][idx[k]];
    f(v);
    std::size_t k = axes.size();
    while (k > 0) {
      --k;
      if (++idx[k] < axes[k].size()) break;
      idx[k] = 0;
      if (k == 0) return;
    }
    if (axes.empty()) return;
  }
}

}  // namespace

double gp_log_marginal_likelihood(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper) {
  return gp_condition(x, y, hyper).log_marginal_likelihood;
}

GpSurrogate gp_condition(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpHyper& hyper) {
  check_inputs(x, y, &hyper);
  GpSurrogate gp;
  gp.x = x;
  gp.y = y;
  gp.hyper = hyper;
  const Standardised s = standardise(y);
  gp.y_mean = s.mean;
  gp.y_scale = s.scale;
  const Eigen::Index n = x.rows();
  if (n == 0) return gp;

  const Eigen::MatrixXd k = hyper.signal_var * correlation(x, hyper.length_scales);
  const double jitters[] = {0.0, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6};
  for (double jitter : jitters) {
    Eigen::MatrixXd kn = k;
    kn.diagonal().array() += hyper.noise_var + jitter;
    gp.factor.compute(kn);
    if (gp.factor.info() != Eigen::Success) continue;
    const Eigen::VectorXd diag = gp.factor.matrixL().toDenseMatrix().diagonal();
    if (!diag.allFinite() || (diag.array() <= 0).any()) continue;
    gp.jitter = jitter;
    gp.alpha = gp.factor.solve(s.y);
    gp.log_marginal_likelihood =
        -0.5 * s.y.dot(gp.alpha) - diag.array().log().sum() - 0.5 * static_cast<double>(n) * kLog2Pi;
    return gp;
  }
  throw DegenerateInput("gp: kernel matrix is singular even with 1e-6 jitter");
}

GpSurrogate gp_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GpGrid& grid, GpFitTrace* trace) {
  check_inputs(x, y, nullptr);
  if (x.rows() < 2) throw InvalidArgument("gp_fit: need at least two observations");
  if (grid.length_scales.empty() || grid.signal_vars.empty() || grid.noise_vars.empty()) {
    throw InvalidArgument("gp_fit: empty hyperparameter grid");
  }
  const Standardised s = standardise(y);
  const auto d = static_cast<std::size_t>(x.cols());

  std::vector<Candidate> all;
  for_each_combo(std::vector<std::vector<double>>(d, grid.length_scales), [&](const Eigen::VectorXd& ls) {
    score_length_scales(x, s.y, ls, grid.signal_vars, grid.noise_vars, all);
  });
  auto best_of = [&] {
    std::size_t b = 0;
    for (std::size_t i = 1; i < all.size(); ++i)
      if (better(all[i], all[b])) b = i;
    return b;
  };
  std::size_t best = best_of();

  if (grid.refine) {
    const GpHyper centre = all[best].hyper;
    std::vector<std::vector<double>> axes(d);
    for (std::size_t k = 0; k < d; ++k) {
      const double l = centre.length_scales[static_cast<Eigen::Index>(k)];
      axes[k] = {l / std::numbers::sqrt2, l, l * std::numbers::sqrt2};
    }
    const std::vector<double> signals{centre.signal_var / std::numbers::sqrt2, centre.signal_var,
                                      centre.signal_var * std::numbers::sqrt2};
    const double r10 = std::sqrt(10.0);
    const std::vector<double> noises{centre.noise_var / r10, centre.noise_var, centre.noise_var * r10};
    for_each_combo(axes, [&](const Eigen::VectorXd& ls) { score_length_scales(x, s.y, ls, signals, noises, all); });
    best = best_of();
  }

  GpSurrogate gp = gp_condition(x, y, all[best].hyper);
  if (trace != nullptr) {
    trace->candidates = all.size();
    trace->best = all[best].lml;
    trace->runner_up = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < all.size(); ++i)
      if (i != best) trace->runner_up = std::max(trace->runner_up, all[i].lml);
  }
  return gp;
}

GpPrediction gp_posterior(const GpSurrogate& gp, const Eigen::MatrixXd& queries) {
  if (queries.cols() != gp.hyper.length_scales.size()) throw InvalidArgument("gp_posterior: query dimension mismatch");
  const Eigen::Index m = queries.rows();
  const Eigen::Index n = gp.x.rows();
  GpPrediction p;
  if (n == 0) {
    p.mean = Eigen::VectorXd::Constant(m, gp.y_mean);
    p.variance = Eigen::VectorXd::Constant(m, gp.y_scale * gp.y_scale * gp.hyper.signal_var);
    return p;
  }
  Eigen::MatrixXd ks(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) ks(i, j) = rbf_kernel(gp.x.row(i).transpose(), queries.row(j).transpose(), gp.hyper);
  const Eigen::VectorXd mean_s = ks.transpose() * gp.alpha;
  const Eigen::MatrixXd v = gp.factor.matrixL().solve(ks);
  const Eigen::VectorXd var_s = (gp.hyper.signal_var - v.colwise().squaredNorm().array()).cwiseMax(0.0);
  p.mean = (gp.y_mean + gp.y_scale * mean_s.array()).matrix();
  p.variance = gp.y_scale * gp.y_scale * var_s;
  return p;
}

// ---- acquisition ----

std::string to_string(AcquisitionKind kind) { return kind == AcquisitionKind::Ucb ? "ucb" : "max-variance"; }

AcquisitionKind acquisition_from_string(const std::string& name) {
  if (name == "ucb") return AcquisitionKind::Ucb;
  if (name == "max-variance") return AcquisitionKind::MaxVariance;
  throw InvalidArgument("unknown acquisition '" + name + "' (expected max-variance or ucb)");
}

Acquired acquire(const GpSurrogate& gp, const std::vector<Eigen::VectorXd>& pool, const AcquisitionConfig& config) {
  if (pool.empty()) throw InvalidArgument("acquire: empty candidate pool");
  Eigen::MatrixXd q(static_cast<Eigen::Index>(pool.size()), pool[0].size());
  for (std::size_t i = 0; i < pool.size(); ++i) q.row(static_cast<Eigen::Index>(i)) = pool[i].transpose();
  const GpPrediction p = gp_posterior(gp, q);
  Eigen::VectorXd value = p.variance;
  if (config.kind == AcquisitionKind::Ucb) value = p.mean + config.beta * p.variance.cwiseSqrt();
  auto lex_less = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    const double vi = value[static_cast<Eigen::Index>(i)];
    const double vb = value[static_cast<Eigen::Index>(best)];
    const double tol = 1e-12 * std::max({1.0, std::abs(vi), std::abs(vb)});
    if (vi > vb + tol || (vi >= vb - tol && lex_less(pool[i], pool[best]))) best = i;
  }
  return {best, value[static_cast<Eigen::Index>(best)]};
}

// ---- search loop ----

void SearchConfig::validate() const {
  if (budget < 1) throw InvalidArgument("search: budget must be >= 1");
  if (init_samples < 0 || init_samples > budget) throw InvalidArgument("search: init_samples must lie in [0, budget]");
  if (!(acquisition.beta >= 0)) throw InvalidArgument("search: beta must be >= 0");
}

std::vector<SearchPoint> quasi_random_points(const SearchSpace& space, int count, std::uint64_t seed) {
  static constexpr int kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};
  const std::size_t d = space.dims().size();
  if (d > std::size(kPrimes)) throw InvalidArgument("quasi_random_points: too many dimensions");
  const auto target = std::min<std::size_t>(static_cast<std::size_t>(std::max(count, 0)), space.size());
  Rng rng(derive_seed(seed, hash_string("halton-shift")));
  std::vector<double> shift(d);
  for (auto& s : shift) s = rng.uniform();

  std::vector<SearchPoint> out;
  std::set<std::size_t> seen;
  for (std::uint64_t k = 1; out.size() < target && k <= 64 * space.size() + 64; ++k) {
    SearchPoint p(d);
    for (std::size_t j = 0; j < d; ++j) {
      double h = 0.0;
      double f = 1.0;
      for (std::uint64_t i = k; i > 0; i /= static_cast<std::uint64_t>(kPrimes[j])) {
        f /= kPrimes[j];
        h += f * static_cast<double>(i % static_cast<std::uint64_t>(kPrimes[j]));
      }
      const double u = std::fmod(h + shift[j], 1.0);
      const int n = static_cast<int>(space.dims()[j].values.size());
      p[j] = std::min(n - 1, static_cast<int>(u * n));
    }
    if (seen.insert(space.index(p)).second) out.push_back(std::move(p));
  }
  for (std::size_t i = 0; out.size() < target; ++i)
    if (seen.insert(i).second) out.push_back(space.point(i));
  return out;
}

namespace {

// Score assigned to a point whose evaluation failed.
double failure_score(const std::vector<SearchRecord>& history, const GpSurrogate* gp) {
  if (gp != nullptr && gp->count() >= 2) return gp->prior_mean() - 3.0 * gp->signal_std();
  std::vector<double> ok;
  for (const auto& r : history)
    if (!r.failed) ok.push_back(r.score);
  if (ok.empty()) return -3.0;
  const Eigen::Map<const Eigen::VectorXd> v(ok.data(), static_cast<Eigen::Index>(ok.size()));
  const double mean = v.mean();
  const double sd = ok.size() >= 2 ? std::sqrt((v.array() - mean).square().mean()) : 0.0;
  return mean - 3.0 * (sd > 0 ? sd : 1.0);
}

SearchRecord evaluate(const Evaluator& evaluator, const SearchPoint& p, int iteration,
                      const std::vector<SearchRecord>& history, const GpSurrogate* gp) {
  SearchRecord r;
  r.iteration = iteration;
  r.point = p;
  try {
    r.score = evaluator(p);
    if (!std::isfinite(r.score)) throw DegenerateInput("evaluator returned a non-finite score");
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
    r.score = failure_score(history, gp);
  }
  return r;
}

GpSurrogate surrogate_for(const SearchSpace& space, const std::vector<SearchRecord>& history, const GpGrid& grid) {
  const auto d = static_cast<Eigen::Index>(space.dims().size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(history.size()), d);
  Eigen::VectorXd y(static_cast<Eigen::Index>(history.size()));
  for (std::size_t i = 0; i < history.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = space.encode(history[i].point).transpose();
    y[static_cast<Eigen::Index>(i)] = history[i].score;
  }
  if (history.size() >= 2) return gp_fit(x, y, grid);
  GpHyper prior{Eigen::VectorXd::Constant(d, 0.4), 1.0, 1e-4};
  return gp_condition(x, y, prior);
}

std::vector<SearchRecord> rank(std::vector<SearchRecord> records) {
  std::stable_sort(records.begin(), records.end(),
                   [](const SearchRecord& a, const SearchRecord& b) { return a.score > b.score; });
  return records;
}

}  // namespace

SearchResult search(const SearchSpace& space, const Evaluator& evaluator, const SearchConfig& config) {
  config.validate();
  const auto budget = std::min<std::size_t>(static_cast<std::size_t>(config.budget), space.size());
  const auto init = std::min<std::size_t>(static_cast<std::size_t>(config.init_samples), budget);
  SearchResult result;
  std::vector<bool> evaluated(space.size(), false);

  for (const SearchPoint& p : quasi_random_points(space, static_cast<int>(init), config.seed)) {
    SearchRecord r = evaluate(evaluator, p, static_cast<int>(result.history.size()), result.history, nullptr);
    r.initial = true;
    evaluated[space.index(p)] = true;
    result.history.push_back(std::move(r));
  }
  while (result.history.size() < budget) {
    const GpSurrogate gp = surrogate_for(space, result.history, config.grid);
    std::vector<std::size_t> ids;
    std::vector<Eigen::VectorXd> pool;
    for (std::size_t i = 0; i < space.size(); ++i) {
      if (evaluated[i]) continue;
      ids.push_back(i);
      pool.push_back(space.encode(space.point(i)));
    }
    const Acquired pick = acquire(gp, pool, config.acquisition);
    const SearchPoint p = space.point(ids[pick.index]);
    SearchRecord r = evaluate(evaluator, p, static_cast<int>(result.history.size()), result.history, &gp);
    r.hyper = gp.hyper;
    r.acquisition_value = pick.value;
    evaluated[ids[pick.index]] = true;
    result.history.push_back(std::move(r));
  }

  result.ranked = rank(result.history);
  if (result.history.size() >= 2) {
    const GpSurrogate gp = surrogate_for(space, result.history, config.grid);
    Eigen::MatrixXd all(static_cast<Eigen::Index>(space.size()), static_cast<Eigen::Index>(space.dims().size()));
    for (std::size_t i = 0; i < space.size(); ++i) all.row(static_cast<Eigen::Index>(i)) = space.encode(space.point(i)).transpose();
    const GpPrediction pred = gp_posterior(gp, all);
    Eigen::Index best = 0;
    pred.mean.maxCoeff(&best);
    result.posterior_argmax = space.point(static_cast<std::size_t>(best));
    result.posterior_argmax_mean = pred.mean[best];
  } else if (!result.history.empty()) {
    result.posterior_argmax = result.ranked.front().point;
    result.posterior_argmax_mean = result.ranked.front().score;
  }
  return result;
}

SearchResult random_search(const SearchSpace& space, const Evaluator& evaluator, int budget, std::uint64_t seed) {
  if (budget < 1) throw InvalidArgument("random_search: budget must be >= 1");
  std::vector<std::size_t> order(space.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(derive_seed(seed, hash_string("random-search")));
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);
  SearchResult result;
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(budget), space.size());
  for (std::size_t i = 0; i < n; ++i) {
    result.history.push_back(
        evaluate(evaluator, space.point(order[i]), static_cast<int>(i), result.history, nullptr));
  }
  result.ranked = rank(result.history);
  result.posterior_argmax = result.ranked.front().point;
  result.posterior_argmax_mean = result.ranked.front().score;
  return result;
}

std::vector<double> SearchResult::best_so_far() const {
  std::vector<double> out;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& r : history) out.push_back(best = std::max(best, r.score));
  return out;
}

nlohmann::json SearchResult::to_json(const SearchSpace& space) const {
  auto describe = [&](const SearchPoint& p) {
    nlohmann::ordered_json j;
    const std::vector<int> v = space.values(p);
    for (std::size_t k = 0; k < v.size(); ++k) j[space.dims()[k].name] = v[k];
    return j;
  };
  nlohmann::ordered_json iterations = nlohmann::ordered_json::array();
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["point"] = describe(r.point);
    j["score"] = r.score;
    j["failed"] = r.failed;
    if (r.failed) j["error"] = r.error;
    j["initial"] = r.initial;
    if (r.hyper) {
      j["hyperparameters"] = {{"length_scales", std::vector<double>(r.hyper->length_scales.data(),
                                                                    r.hyper->length_scales.data() +
                                                                        r.hyper->length_scales.size())},
                              {"signal_var", r.hyper->signal_var},
                              {"noise_var", r.hyper->noise_var}};
      j["acquisition_value"] = r.acquisition_value;
    } else {
      j["hyperparameters"] = nullptr;
      j["acquisition_value"] = nullptr;
    }
    iterations.push_back(std::move(j));
  }
  nlohmann::ordered_json out;
  out["iterations"] = std::move(iterations);
  nlohmann::ordered_json final_block;
  if (!ranked.empty()) {
    final_block["best_observed"] = {{"point", describe(ranked.front().point)}, {"score", ranked.front().score}};
  }
  if (!posterior_argmax.empty()) {
    final_block["posterior_argmax"] = {{"point", describe(posterior_argmax)}, {"mean", posterior_argmax_mean}};
  }
  out["final"] = std::move(final_block);
  return out;
}

// ---- benchmark ----

double QuadraticBenchmark::operator()(const SearchSpace& space, const SearchPoint& p) const {
  const Eigen::VectorXd d = space.encode(p) - space.encode(optimum);
  return 30.0 - (curvature.array() * d.array().square()).sum();
}

SearchSpace benchmark_space() { return default_drn_space(2); }

QuadraticBenchmark benchmark_quadratic() {
  // Optimum at F = 64, D = 14, L = 3.
  return {{2, 6, 1}, (Eigen::VectorXd(3) << 4.0, 6.0, 2.0).finished()};
}

}  // namespace srforge
