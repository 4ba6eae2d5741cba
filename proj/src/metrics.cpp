#include "srforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "srforge/ops.hpp"

namespace srforge {
namespace {

using Plane = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b) {
    throw InvalidArgument(std::string(op) + ": shape mismatch " + to_string(a) + " vs " + to_string(b));
  }
}

Eigen::VectorXd gaussian_window(const SsimConstants& k) {
  Eigen::VectorXd g(k.window);
  const double center = (k.window - 1) / 2.0;
  for (int i = 0; i < k.window; ++i) g[i] = std::exp(-(i - center) * (i - center) / (2 * k.sigma * k.sigma));
  return g / g.sum();
}

// Valid-region separable filtering: out(i, j) = sum_uv g[u] g[v] in(i+u, j+v).
Plane filter_valid(const Plane& in, const Eigen::VectorXd& g) {
  const Eigen::Index n = g.size();
  const Eigen::Index rows = in.rows() - n + 1;
  const Eigen::Index cols = in.cols() - n + 1;
  Plane tmp = Plane::Zero(in.rows(), cols);
  for (Eigen::Index u = 0; u < n; ++u) tmp += g[u] * in.middleCols(u, cols);
  Plane out = Plane::Zero(rows, cols);
  for (Eigen::Index u = 0; u < n; ++u) out += g[u] * tmp.middleRows(u, rows);
  return out;
}

// Adjoint of filter_valid back onto an in_rows x in_cols plane.
Plane filter_valid_adjoint(const Plane& m, const Eigen::VectorXd& g, Eigen::Index in_rows,
                           Eigen::Index in_cols) {
  const Eigen::Index n = g.size();
  Plane tmp = Plane::Zero(in_rows, m.cols());
  for (Eigen::Index u = 0; u < n; ++u) tmp.middleRows(u, m.rows()) += g[u] * m;
  Plane out = Plane::Zero(in_rows, in_cols);
  for (Eigen::Index u = 0; u < n; ++u) out.middleCols(u, m.cols()) += g[u] * tmp;
  return out;
}

Plane pool2(const Plane& p) {
  const Eigen::Index r = p.rows() / 2;
  const Eigen::Index c = p.cols() / 2;
  Plane out(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j)
      out(i, j) = 0.25 * (p(2 * i, 2 * j) + p(2 * i, 2 * j + 1) + p(2 * i + 1, 2 * j) + p(2 * i + 1, 2 * j + 1));
  return out;
}

Plane pool2_adjoint(const Plane& g, Eigen::Index rows, Eigen::Index cols) {
  Plane out = Plane::Zero(rows, cols);
  for (Eigen::Index i = 0; i < g.rows(); ++i)
    for (Eigen::Index j = 0; j < g.cols(); ++j) out.block(2 * i, 2 * j, 2, 2).setConstant(0.25 * g(i, j));
  return out;
}

// Statistics of one SSIM evaluation on a plane pair.
struct SsimTerms {
  Plane mu_x, mu_y, var_x, var_y, cov;
  Plane luminance, contrast;  // l and cs maps
};

SsimTerms ssim_terms(const Plane& x, const Plane& y, const Eigen::VectorXd& g, double c1, double c2) {
  SsimTerms t;
  t.mu_x = filter_valid(x, g);
  t.mu_y = filter_valid(y, g);
  t.var_x = filter_valid(x.cwiseProduct(x), g) - t.mu_x.cwiseProduct(t.mu_x);
  t.var_y = filter_valid(y.cwiseProduct(y), g) - t.mu_y.cwiseProduct(t.mu_y);
  t.cov = filter_valid(x.cwiseProduct(y), g) - t.mu_x.cwiseProduct(t.mu_y);
  const auto mx = t.mu_x.array();
  const auto my = t.mu_y.array();
  t.luminance = ((2 * mx * my + c1) / (mx * mx + my * my + c1)).matrix();
  t.contrast = ((2 * t.cov.array() + c2) / (t.var_x.array() + t.var_y.array() + c2)).matrix();
  return t;
}

// Gradient w.r.t. x of mean(cs) (with_luminance = false) or mean(l * cs),
// scaled by `weight`.
Plane ssim_terms_grad(const Plane& x, const Plane& y, const SsimTerms& t, const Eigen::VectorXd& g,
                      double c1, double c2, bool with_luminance, double weight) {
  const double per_pixel = weight / static_cast<double>(t.contrast.size());
  const auto mx = t.mu_x.array();
  const auto my = t.mu_y.array();
  const auto denom_cs = t.var_x.array() + t.var_y.array() + c2;
  const auto numer_cs = 2 * t.cov.array() + c2;
  // d cs / d cov and d cs / d var_x
  Eigen::ArrayXXd d_cov = 2.0 / denom_cs;
  Eigen::ArrayXXd d_var = -numer_cs / denom_cs.square();
  Eigen::ArrayXXd d_mu = Eigen::ArrayXXd::Zero(mx.rows(), mx.cols());
  if (with_luminance) {
    const auto l = t.luminance.array();
    const auto cs = t.contrast.array();
    const auto denom_l = mx * mx + my * my + c1;
    const auto numer_l = 2 * mx * my + c1;
    d_mu = cs * (2 * my / denom_l - numer_l * 2 * mx / denom_l.square());
    d_cov = d_cov * l;
    d_var = d_var * l;
  }
  // var_x = E[x^2] - mu_x^2, cov = E[xy] - mu_x mu_y
  const Eigen::ArrayXXd g_mu = per_pixel * (d_mu - 2 * mx * d_var - my * d_cov);
  const Eigen::ArrayXXd g_exx = per_pixel * d_var;
  const Eigen::ArrayXXd g_exy = per_pixel * d_cov;
  const Plane a_mu = filter_valid_adjoint(g_mu.matrix(), g, x.rows(), x.cols());
  const Plane a_exx = filter_valid_adjoint(g_exx.matrix(), g, x.rows(), x.cols());
  const Plane a_exy = filter_valid_adjoint(g_exy.matrix(), g, x.rows(), x.cols());
  return a_mu + 2 * x.cwiseProduct(a_exx) + y.cwiseProduct(a_exy);
}

template <typename Scalar>
Plane to_plane(const Tensor<Scalar>& t, int n, int c) {
  return t.plane(n, c).template cast<double>();
}

constexpr double kMsFloor = 1e-6;

}  // namespace

template <typename Scalar>
double l1_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, std::type_identity_t<Tensor<Scalar>>* grad) {
  require_same_shape(pred.shape(), target.shape(), "l1_loss");
  const double count = static_cast<double>(pred.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    total += std::abs(static_cast<double>(pred.values()[i]) - static_cast<double>(target.values()[i]));
  }
  if (grad != nullptr) {
    *grad = Tensor<Scalar>(pred.shape());
    const Scalar step = static_cast<Scalar>(1.0 / count);
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      const Scalar d = pred.values()[i] - target.values()[i];
      grad->values()[i] = d > 0 ? step : (d < 0 ? -step : Scalar(0));
    }
  }
  return count > 0 ? total / count : 0.0;
}

template <typename Scalar>
double ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b, const SsimConstants& k) {
  require_same_shape(a.shape(), b.shape(), "ssim");
  if (a.h() < k.window || a.w() < k.window) {
    throw InvalidArgument("ssim: image " + to_string(a.shape()) + " smaller than the " +
                          std::to_string(k.window) + "x" + std::to_string(k.window) + " window");
  }
  const Eigen::VectorXd g = gaussian_window(k);
  const double c1 = (k.k1 * k.range) * (k.k1 * k.range);
  const double c2 = (k.k2 * k.range) * (k.k2 * k.range);
  double total = 0.0;
  for (int n = 0; n < a.n(); ++n)
    for (int c = 0; c < a.c(); ++c) {
      const SsimTerms t = ssim_terms(to_plane(a, n, c), to_plane(b, n, c), g, c1, c2);
      total += t.luminance.cwiseProduct(t.contrast).mean();
    }
  return total / (static_cast<double>(a.n()) * a.c());
}

int ms_ssim_max_scales(int height, int width, const SsimConstants& k) {
  int scales = 0;
  int h = height;
  int w = width;
  while (scales < 5 && h >= k.window && w >= k.window) {
    ++scales;
    h /= 2;
    w /= 2;
  }
  return scales;
}

template <typename Scalar>
double ms_ssim(const Tensor<Scalar>& a, const Tensor<Scalar>& b, std::type_identity_t<Tensor<Scalar>>* grad, int scales,
               const SsimConstants& k) {
  require_same_shape(a.shape(), b.shape(), "ms_ssim");
  const int usable = ms_ssim_max_scales(a.h(), a.w(), k);
  if (scales == 0) scales = usable;
  if (scales < 2 || scales > usable) {
    throw InvalidArgument("ms_ssim: image " + to_string(a.shape()) + " supports " +
                          std::to_string(usable) + " scales; need at least 2 (requested " +
                          std::to_string(scales) + ")");
  }
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kMsSsimWeights[s];
  std::vector<double> weights(static_cast<std::size_t>(scales));
  for (int s = 0; s < scales; ++s) weights[static_cast<std::size_t>(s)] = kMsSsimWeights[s] / weight_sum;

  const Eigen::VectorXd g = gaussian_window(k);
  const double c1 = (k.k1 * k.range) * (k.k1 * k.range);
  const double c2 = (k.k2 * k.range) * (k.k2 * k.range);
  const double planes = static_cast<double>(a.n()) * a.c();
  if (grad != nullptr) *grad = Tensor<Scalar>(a.shape());

  double total = 0.0;
  for (int n = 0; n < a.n(); ++n)
    for (int c = 0; c < a.c(); ++c) {
      std::vector<Plane> xs{to_plane(a, n, c)};
      std::vector<Plane> ys{to_plane(b, n, c)};
      for (int s = 1; s < scales; ++s) {
        xs.push_back(pool2(xs.back()));
        ys.push_back(pool2(ys.back()));
      }
      std::vector<SsimTerms> terms;
      std::vector<double> values;
      double product = 1.0;
      for (int s = 0; s < scales; ++s) {
        terms.push_back(ssim_terms(xs[s], ys[s], g, c1, c2));
        const bool last = s == scales - 1;
        const double v = last ? terms.back().luminance.cwiseProduct(terms.back().contrast).mean()
                              : terms.back().contrast.mean();
        values.push_back(v);
        product *= std::pow(std::max(v, kMsFloor), weights[static_cast<std::size_t>(s)]);
      }
      total += product;
      if (grad == nullptr) continue;

      // d product / d v_s = w_s * product / v_s (zero where the floor is active)
      Plane carry;
      for (int s = scales - 1; s >= 0; --s) {
        const double v = values[static_cast<std::size_t>(s)];
        const double dv = v > kMsFloor ? weights[static_cast<std::size_t>(s)] * product / v / planes : 0.0;
        Plane gs = ssim_terms_grad(xs[s], ys[s], terms[s], g, c1, c2, s == scales - 1, dv);
        if (s + 1 < scales) gs += pool2_adjoint(carry, xs[s].rows(), xs[s].cols());
        carry = std::move(gs);
      }
      grad->plane(n, c) = carry.cast<Scalar>();
    }
  return total / planes;
}

template <typename Scalar>
double mixed_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, double alpha,
                  std::type_identity_t<Tensor<Scalar>>* grad) {
  require_same_shape(pred.shape(), target.shape(), "mixed_loss");
  if (alpha < 0.0 || alpha > 1.0) throw InvalidArgument("mixed_loss: alpha must lie in [0, 1]");
  Tensor<Scalar> g_l1;
  Tensor<Scalar> g_ms;
  const bool need_grad = grad != nullptr;
  double value = 0.0;
  if (alpha < 1.0) value += (1.0 - alpha) * l1_loss(pred, target, need_grad ? &g_l1 : nullptr);
  if (alpha > 0.0) value += alpha * (1.0 - ms_ssim(pred, target, need_grad ? &g_ms : nullptr));
  if (need_grad) {
    *grad = Tensor<Scalar>(pred.shape());
    if (alpha < 1.0) grad->values() += static_cast<Scalar>(1.0 - alpha) * g_l1.values();
    if (alpha > 0.0) grad->values() -= static_cast<Scalar>(alpha) * g_ms.values();
  }
  return value;
}

template <typename Scalar>
double psnr(const Tensor<Scalar>& a, const Tensor<Scalar>& b, double peak) {
  require_same_shape(a.shape(), b.shape(), "psnr");
  double sse = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a.values()[i]) - static_cast<double>(b.values()[i]);
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

template <typename Scalar>
double ncc(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.n() != b.n() || a.c() != b.c()) {
    throw InvalidArgument("ncc: batch/channel mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  }
  const Tensor<double> x = a.shape() == b.shape() ? a.template cast<double>()
                                                  : bicubic_resize(a.template cast<double>(), b.h(), b.w());
  const Tensor<double> y = b.template cast<double>();
  const Eigen::ArrayXd dx = x.values().array() - x.values().mean();
  const Eigen::ArrayXd dy = y.values().array() - y.values().mean();
  const double vx = dx.square().sum();
  const double vy = dy.square().sum();
  // Relative test: the mean of a constant image is not exact in floating point.
  const double tiny = 1e-24;
  if (vx <= tiny * x.values().squaredNorm() || vy <= tiny * y.values().squaredNorm()) {
    throw DegenerateInput("ncc: zero variance input");
  }
  return std::clamp((dx * dy).sum() / std::sqrt(vx * vy), -1.0, 1.0);
}

void MetricReport::add(std::string id, double psnr_db, double ssim_value) {
  entries.push_back({std::move(id), psnr_db, ssim_value});
}

void MetricReport::fail(std::string id, std::string error) {
  failures.push_back({std::move(id), std::move(error)});
}

double MetricReport::mean_psnr() const {
  if (entries.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& e : entries) total += e.psnr;
  return total / static_cast<double>(entries.size());
}

double MetricReport::mean_ssim() const {
  if (entries.empty()) return std::numeric_limits<double>::quiet_NaN();
  double total = 0.0;
  for (const auto& e : entries) total += e.ssim;
  return total / static_cast<double>(entries.size());
}

#define SRFORGE_INSTANTIATE(S)                                                                   \
  template double l1_loss(const Tensor<S>&, const Tensor<S>&, std::type_identity_t<Tensor<S>>*);                      \
  template double ssim(const Tensor<S>&, const Tensor<S>&, const SsimConstants&);               \
  template double ms_ssim(const Tensor<S>&, const Tensor<S>&, std::type_identity_t<Tensor<S>>*, int,                  \
                          const SsimConstants&);                                                 \
  template double mixed_loss(const Tensor<S>&, const Tensor<S>&, double, std::type_identity_t<Tensor<S>>*);           \
  template double psnr(const Tensor<S>&, const Tensor<S>&, double);                              \
  template double ncc(const Tensor<S>&, const Tensor<S>&);

SRFORGE_INSTANTIATE(float)
SRFORGE_INSTANTIATE(double)

#undef SRFORGE_INSTANTIATE

}  // namespace srforge
