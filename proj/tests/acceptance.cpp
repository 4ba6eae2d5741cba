// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Expensive criteria (5, 6) train two small models on a 60/12 synthetic set.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "srforge/data.hpp"
#include "srforge/ensemble.hpp"
#include "srforge/metrics.hpp"
#include "srforge/models.hpp"
#include "srforge/nas.hpp"
#include "srforge/ops.hpp"
#include "srforge/parallel.hpp"
#include "srforge/trainer.hpp"
#include "test_support.hpp"

using namespace srforge;
using srforge::testing::dot;
using srforge::testing::kink_aware_fd;
using srforge::testing::max_fd_error;
using srforge::testing::random_away_from_zero;
using srforge::testing::random_tensor;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Collects sub-check outcomes for one criterion.
struct Verdict {
  bool ok = true;
  std::ostringstream detail;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      detail << " [failed: " << what << "]";
    }
  }
};

int failures = 0;

void report(int id, const std::string& name, Verdict& v) {
  std::printf("%s criterion %d (%s):%s\n", v.ok ? "PASS" : "FAIL", id, name.c_str(), v.detail.str().c_str());
  std::fflush(stdout);
  failures += !v.ok;
}

void run(int id, const std::string& name, const std::function<void(Verdict&)>& body) {
  Verdict v;
  try {
    body(v);
  } catch (const std::exception& e) {
    v.ok = false;
    v.detail << " [exception: " << e.what() << "]";
  }
  report(id, name, v);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("srforge_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

template <typename Scalar>
bool same_bytes(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

// Report contents minus wall-clock fields and the output-directory path.
nlohmann::json comparable(const TrainReport& r) {
  nlohmann::json j = r.to_json(false);
  j.erase("best_checkpoint");
  return j;
}

// ---- 1: gradients ----------------------------------------------------------

void gradients(Verdict& v) {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  auto note = [&](const std::string& op, double err) {
    worst = std::max(worst, err);
    v.check(err < 1e-3, op + " rel err " + std::to_string(err));
  };

  {
    Tensord x = random_tensor({2, 3, 6, 5}, rng);
    Parameter<double> w("w", random_tensor({4, 3, 3, 3}, rng));
    Parameter<double> b("b", random_tensor({1, 4, 1, 1}, rng));
    const ConvGeometry g{1, 1};
    const auto r = random_tensor({2, 4, 6, 5}, rng);
    const auto gx = conv2d_backward(r, x, w, &b, g);
    auto loss = [&] { return dot(conv2d(x, w.value, b.value, g), r); };
    note("conv2d input", max_fd_error(x, gx, loss));
    note("conv2d weight", max_fd_error(w.value, w.grad, loss));
    note("conv2d bias", max_fd_error(b.value, b.grad, loss));
  }
  {
    Tensord x = random_away_from_zero({2, 3, 4, 4}, rng);
    const auto r = random_tensor(x.shape(), rng);
    note("relu", max_fd_error(x, relu_backward(r, x), [&] { return dot(relu(x), r); }));
  }
  {
    Tensord x = random_tensor({2, 3, 4, 4}, rng, -4, 4);
    const auto r = random_tensor(x.shape(), rng);
    note("sigmoid", max_fd_error(x, sigmoid_backward(r, sigmoid(x)), [&] { return dot(sigmoid(x), r); }));
  }
  {
    Tensord x = random_tensor({2, 3, 5, 4}, rng);
    const auto r = random_tensor({2, 3, 1, 1}, rng);
    note("global_avg_pool",
         max_fd_error(x, global_avg_pool_backward(r, x.shape()), [&] { return dot(global_avg_pool(x), r); }));
  }
  {
    Tensord x = random_tensor({2, 3, 4, 5}, rng);
    Tensord gate = random_tensor({2, 3, 1, 1}, rng);
    const auto r = random_tensor(x.shape(), rng);
    Tensord gx, gg;
    scale_channels_backward(r, x, gate, gx, gg);
    auto loss = [&] { return dot(scale_channels(x, gate), r); };
    note("scale_channels input", max_fd_error(x, gx, loss));
    note("scale_channels gate", max_fd_error(gate, gg, loss));
  }
  {
    Tensord x = random_tensor({2, 2, 7, 6}, rng);
    const auto r = random_tensor({2, 2, 3, 3}, rng);
    note("avg_pool2", max_fd_error(x, avg_pool2_backward(r, x.shape()), [&] { return dot(avg_pool2(x), r); }));
  }
  {
    Tensord x = random_tensor({1, 8, 3, 3}, rng);
    const auto r = random_tensor({1, 2, 6, 6}, rng);
    note("pixel_shuffle", max_fd_error(x, pixel_unshuffle(r, 2), [&] { return dot(pixel_shuffle(x, 2), r); }));
  }
  {
    Tensord a = random_tensor({1, 2, 3, 3}, rng);
    Tensord b = random_tensor({1, 3, 3, 3}, rng);
    const auto r = random_tensor({1, 5, 3, 3}, rng);
    const std::vector<int> widths{2, 3};
    const auto parts = split_channels<double>(r, widths);
    auto loss = [&] {
      const std::vector<Tensord> both{a, b};
      return dot(concat_channels<double>(both), r);
    };
    note("concat_channels", std::max(max_fd_error(a, parts[0], loss), max_fd_error(b, parts[1], loss)));
  }
  {
    Tensord target = random_tensor({1, 3, 12, 12}, rng, 0, 1);
    Tensord pred = target;
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      const double off = rng.uniform(0.05, 0.2);
      pred.values()[i] += rng.uniform() < 0.5 ? -off : off;
    }
    Tensord g;
    l1_loss(pred, target, &g);
    note("l1_loss", max_fd_error(pred, g, [&] { return l1_loss(pred, target); }));
  }
  {
    Tensord target = random_tensor({1, 1, 48, 48}, rng, 0, 1);
    Tensord pred = target;
    for (Eigen::Index i = 0; i < pred.size(); ++i) pred.values()[i] += rng.uniform(-0.2, 0.2);
    Tensord g;
    ms_ssim(pred, target, &g, 3);
    note("ms_ssim", max_fd_error(pred, g, [&] { return ms_ssim(pred, target, nullptr, 3); }));
  }

  // Composed tiny DRN: F=4, D=1, L=2, x2, L1 loss with targets away from the kink.
  srforge::testing::FdReport drn;
  for (std::uint64_t seed : {1, 2, 3}) {
    Modeld model = Modelf(DrnConfig{4, 1, 2, 2, 2}, seed).cast<double>();
    Rng r(seed);
    Tensord x = random_tensor({1, 3, 6, 6}, r, 0, 1);
    const auto probe = model.forward(x);
    Tensord target(probe.shape());
    for (Eigen::Index i = 0; i < target.size(); ++i) {
      const double off = r.uniform(0.2, 0.5);
      target.values()[i] = probe.values()[i] + (r.uniform() < 0.5 ? -off : off);
    }
    auto loss = [&] { return (model.forward(x).values() - target.values()).cwiseAbs().mean(); };
    model.zero_grads();
    const auto y = model.forward_train(x);
    Tensord g(y.shape());
    for (Eigen::Index i = 0; i < g.size(); ++i)
      g.values()[i] = (y.values()[i] > target.values()[i] ? 1.0 : -1.0) / static_cast<double>(g.size());
    const auto gx = model.backward(g);
    drn.merge(kink_aware_fd(x, gx, loss));
    for (auto* p : model.parameters()) drn.merge(kink_aware_fd(p->value, p->grad, loss));
  }
  note("tiny DRN", drn.max_error);
  v.check(drn.skipped_fraction() < 0.05, "too many kink-straddling coordinates");

  const double secs = seconds_since(t0);
  v.check(secs < 60.0, "took " + std::to_string(secs) + " s");
  v.detail << " max rel err " << worst << ", DRN coords checked " << drn.checked << " (kink-skipped "
           << drn.skipped << "), " << secs << " s";
}

// ---- 2: metric identities -------------------------------------------------

void metric_identities(Verdict& v) {
  Rng rng(202);
  const Tensord x = random_tensor({1, 3, 64, 64}, rng, 0, 1);
  const double s = ssim(x, x);
  const double ms = ms_ssim(x, x);
  const Tensord a({1, 3, 8, 8}, 0.5);
  const Tensord b({1, 3, 8, 8}, 0.6);
  const double p = psnr(a, b);
  const double self = ncc(x, x);
  Tensord flipped = x;
  flipped.values() = 0.7 - x.values().array();
  const double anti = ncc(x, flipped);
  v.check(std::abs(s - 1) <= 1e-9, "ssim(x,x)");
  v.check(std::abs(ms - 1) <= 1e-9, "ms_ssim(x,x)");
  v.check(std::abs(p - 20) <= 1e-9, "psnr at mse 0.01");
  v.check(std::abs(self - 1) <= 1e-9, "ncc(x,x)");
  v.check(std::abs(anti + 1) <= 1e-9, "ncc(x,c-x)");
  char buf[200];
  std::snprintf(buf, sizeof buf, " ssim-1=%.1e ms_ssim-1=%.1e psnr=%.12f ncc-1=%.1e ncc_anti+1=%.1e", s - 1, ms - 1,
                p, self - 1, anti + 1);
  v.detail << buf;
}

// ---- 3: ensemble algebra --------------------------------------------------

double max_abs_diff(const Tensorf& a, const Tensorf& b) {
  if (a.shape() != b.shape()) return INFINITY;
  return (a.values().cast<double>() - b.values().cast<double>()).cwiseAbs().maxCoeff();
}

void ensemble_algebra(Verdict& v) {
  Rng rng(303);
  const PatchFn identity = [](const Tensorf& x) { return x; };
  double worst_a = 0.0;
  for (int trial = 0; trial < 6; ++trial) {
    const int patch = 3 + static_cast<int>(rng.below(12));
    const int stride = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(patch - 1)));
    const int h = patch + static_cast<int>(rng.below(30));
    const int w = patch + static_cast<int>(rng.below(30));
    const Tensorf x = random_tensor<float>({1, 3, h, w}, rng, 0, 1);
    const Tensorf y = tiled_forward(identity, x, 1, plan_tiles(h, w, patch, stride), make_weight_map(patch, 1));
    worst_a = std::max(worst_a, max_abs_diff(y, x));
  }
  v.check(worst_a <= 1e-6, "(a) identity tiling");

  // Oracle: every offset that is a stride multiple, plus the flush last one.
  std::vector<int> axis;
  for (int o = 0; o + 120 <= 272; ++o)
    if (o % 60 == 0 || o == 272 - 120) axis.push_back(o);
  std::set<std::pair<int, int>> expected;
  for (int y : axis)
    for (int x : axis) expected.insert({y, x});
  const TilePlan plan = plan_tiles(272, 272, 120, 60);
  std::set<std::pair<int, int>> got;
  for (const Tile& t : plan.tiles) got.insert({t.y, t.x});
  v.check(plan.tiles.size() == 16 && got == expected && axis == std::vector<int>{0, 60, 120, 152}, "(b) plan_tiles");

  Tensorf w = random_tensor<float>({3, 3, 1, 1}, rng, -0.5, 0.5);
  Tensorf bias = random_tensor<float>({1, 3, 1, 1}, rng, -0.1, 0.1);
  const Tensorf b3(Shape{3, 1, 1, 1}, bias.values());
  const PatchFn mix = [&](const Tensorf& x) { return conv2d(x, w, b3); };
  const Tensorf x = random_tensor<float>({1, 3, 13, 17}, rng, 0, 1);
  const double c = max_abs_diff(self_ensemble_forward(mix, x), mix(x));
  v.check(c <= 1e-5, "(c) self-ensemble of 1x1 conv");

  const Modelf model(preset("drn-tiny", 2), 31);
  const Tensorf lr = random_tensor<float>({1, 3, 24, 24}, rng, 0, 1);
  EnsembleOptions o;
  o.patch = 12;
  o.stride = 6;
  const std::vector<EnsembleMember> one{{as_patch_fn(model), 2}};
  const std::vector<EnsembleMember> three(3, one[0]);
  const double d = max_abs_diff(model_ensemble(three, lr, o), model_ensemble(one, lr, o));
  v.check(d <= 1e-6, "(d) k-copy model ensemble");
  v.detail << " (a) " << worst_a << " (b) " << plan.tiles.size() << " tiles (c) " << c << " (d) " << d;
}

// ---- 4: GP surrogate ------------------------------------------------------

void gp_surrogate(Verdict& v) {
  const auto t0 = Clock::now();
  Rng rng(404);
  Eigen::MatrixXd x(12, 3);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    for (int k = 0; k < 3; ++k) x(i, k) = rng.uniform();
    y(i) = std::sin(3 * x(i, 0)) + x(i, 1) * x(i, 2) - 0.5 * x(i, 2);
  }
  GpHyper h;
  h.length_scales = Eigen::VectorXd::Constant(3, 0.5);
  h.signal_var = 1.0;
  h.noise_var = 1e-10;
  const GpSurrogate gp = gp_condition(x, y, h);
  const double interp = (gp_posterior(gp, x).mean - y).cwiseAbs().maxCoeff();
  v.check(interp < 1e-6, "interpolation error " + std::to_string(interp));

  const SearchSpace s = benchmark_space();
  const QuadraticBenchmark q = benchmark_quadratic();
  auto f = [&](const SearchPoint& p) { return q(s, p); };
  v.check(s.dims()[0].values.size() * s.dims()[1].values.size() * s.dims()[2].values.size() == 120,
          "benchmark grid is not 4x10x3");
  // Brute-force optimum.
  SearchPoint best;
  double best_score = -INFINITY;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const SearchPoint p = s.point(i);
    if (f(p) > best_score) best_score = f(p), best = p;
  }
  v.check(best == q.optimum, "enumerated optimum differs from benchmark optimum");

  int hits = 0;
  std::vector<double> gp_curve(20, 0.0), random_curve(20, 0.0);
  for (int seed = 0; seed < 50; ++seed) {
    SearchConfig c;
    c.seed = static_cast<std::uint64_t>(seed);
    c.budget = 20;
    c.init_samples = 5;
    c.acquisition = {AcquisitionKind::Ucb, 0.1};
    const SearchResult r = search(s, f, c);
    hits += r.ranked.front().point == best;
    const auto a = r.best_so_far();
    const auto b = random_search(s, f, 20, static_cast<std::uint64_t>(seed)).best_so_far();
    for (int i = 0; i < 20; ++i) gp_curve[i] += a[i] / 50, random_curve[i] += b[i] / 50;
  }
  v.check(hits >= 45, "optimum found " + std::to_string(hits) + "/50");
  double margin = INFINITY;
  for (int budget = 5; budget <= 20; ++budget) margin = std::min(margin, gp_curve[budget - 1] - random_curve[budget - 1]);
  v.check(margin >= 0, "GP curve below random search");
  const double secs = seconds_since(t0);
  v.check(secs < 120, "took " + std::to_string(secs) + " s");
  v.detail << " interp err " << interp << ", optimum found " << hits << "/50, min GP-random margin (budget>=5) "
           << margin << ", " << secs << " s";
}

// ---- 5 and 6: desk-scale training -----------------------------------------

// Config chosen for the 48 px LR images of the desk-scale set.
TrainConfig desk_config(const fs::path& out) {
  TrainConfig c;
  c.epochs = 30;
  c.batch_size = 1;
  c.crop = 48;
  c.learning_rate = 2e-3;
  c.lr_decay_interval = 7;
  c.adam.beta2 = 0.99;
  c.seed = 3;
  c.validation = {true, 32, 16};
  c.out_dir = out;
  return c;
}

struct DeskRun {
  TrainReport report;
  std::vector<std::uint8_t> weights;
  double seconds = 0.0;
};

DeskRun train_desk(const std::string& preset_name, const DatasetManifest& m, const fs::path& out) {
  const auto t0 = Clock::now();
  Modelf model(preset(preset_name, 2), 5);
  DeskRun r;
  r.report = train(model, m, desk_config(out));
  r.weights = encode_weights(model);
  r.seconds = seconds_since(t0);
  return r;
}

struct DeskData {
  DatasetManifest manifest;
  std::vector<ImagePair> val;
  std::optional<DeskRun> drn;
};

DeskData& desk_data() {
  static DeskData d = [] {
    SyntheticOptions o;
    o.count = 72;
    o.hr_size = 96;
    o.val_fraction = 12.0 / 72.0;
    o.seed = 1;
    o.spec.scale = 2;
    o.spec.kernel = gaussian_kernel(0.8);
    o.spec.noise_sigma = 0.005;
    DeskData out;
    out.manifest = make_synthetic_dataset(o, scratch("desk_data"));
    out.val = out.manifest.load_pairs("val");
    return out;
  }();
  return d;
}

void desk_scale(Verdict& v) {
  DeskData& d = desk_data();
  v.check(d.manifest.count("train") == 60 && d.manifest.count("val") == 12, "split is not 60/12");

  const int threads = std::clamp(static_cast<int>(std::thread::hardware_concurrency()), 1, 4);
  set_num_threads(threads);
  d.drn = train_desk("drn-tiny", d.manifest, scratch("desk_drn"));
  const TrainReport& r = d.drn->report;
  v.check(r.train_pairs == 60 && r.rejected_pairs == 0, "training pairs lost to the NCC gate");
  const double final_psnr = r.epochs.back().val_psnr;
  const double gain = final_psnr - r.bicubic_val_psnr;
  v.check(gain >= 0.5, "gain over bicubic " + std::to_string(gain) + " dB");
  v.check(d.drn->seconds <= 900, "wall time " + std::to_string(d.drn->seconds) + " s");

  // Repeat with a different worker count; bytes must not move.
  set_num_threads(threads == 1 ? 3 : 1);
  const DeskRun again = train_desk("drn-tiny", d.manifest, scratch("desk_drn_again"));
  set_num_threads(threads);
  const bool same_weights = again.weights == d.drn->weights;
  const bool same_report = comparable(again.report) == comparable(r);
  v.check(same_weights, "second run weights differ");
  v.check(same_report, "second run report differs");
  const bool same = same_weights && same_report;

  char buf[300];
  std::snprintf(buf, sizeof buf,
                " final-epoch val PSNR %.3f dB vs bicubic %.3f dB (%+.3f dB), %.0f s with %d thread(s), repeat run "
                "bit-identical: %s",
                final_psnr, r.bicubic_val_psnr, gain, d.drn->seconds, threads, same ? "yes" : "no");
  v.detail << buf;
}

void ensemble_beats_members(Verdict& v) {
  DeskData& d = desk_data();
  if (!d.drn) d.drn = train_desk("drn-tiny", d.manifest, scratch("desk_drn"));
  const DeskRun rcan = train_desk("rcan-tiny", d.manifest, scratch("desk_rcan"));
  const Modelf drn_model = decode_weights(d.drn->weights);
  const Modelf rcan_model = decode_weights(rcan.weights);
  const EnsembleOptions o = desk_config({}).validation;
  const std::vector<EnsembleMember> members{{as_patch_fn(drn_model), 2}, {as_patch_fn(rcan_model), 2}};
  const double drn_psnr = evaluate(std::span(members.data(), 1), d.val, o).mean_psnr();
  const double rcan_psnr = evaluate(std::span(members.data() + 1, 1), d.val, o).mean_psnr();
  const double both = evaluate(members, d.val, o).mean_psnr();
  v.check(both >= std::max(drn_psnr, rcan_psnr) - 0.05, "below best member - 0.05 dB");
  v.check(both >= 0.5 * (drn_psnr + rcan_psnr), "below mean of members");
  char buf[200];
  std::snprintf(buf, sizeof buf, " drn-tiny %.3f dB, rcan-tiny %.3f dB, ensemble %.3f dB", drn_psnr, rcan_psnr, both);
  v.detail << buf;
}

// ---- 7: NCC gate ----------------------------------------------------------

void ncc_gate(Verdict& v) {
  const Tensorf big = procedural_image(104, 104, 77);
  const Tensorf hr = crop(big, 4, 4, 96, 96);
  const Tensorf shifted = crop(big, 4, 8, 96, 96);
  DegradeSpec spec;
  spec.scale = 2;
  spec.kernel = gaussian_kernel(0.8);
  const ImagePair aligned{"aligned", degrade(hr, spec), hr, 0.0};
  const ImagePair misaligned{"shifted", aligned.lr, shifted, 0.0};

  // Oracle NCC: Pearson correlation of the bicubic upscale and HR, written out here.
  const Tensord up = bicubic_resize(aligned.lr.cast<double>(), 96, 96);
  auto corr = [&](const Tensorf& target) {
    const Eigen::ArrayXd a = up.values().array() - up.values().mean();
    const Eigen::ArrayXd t = target.values().cast<double>().array();
    const Eigen::ArrayXd b = t - t.mean();
    return (a * b).sum() / std::sqrt(a.square().sum() * b.square().sum());
  };
  const double aligned_ncc = corr(hr);
  const double shifted_ncc = corr(shifted);
  const NccFilterResult r = ncc_filter({aligned, misaligned}, 0.99);
  v.check(r.kept.size() == 1 && r.kept[0].id == "aligned", "aligned pair not kept");
  v.check(r.rejected.size() == 1 && r.rejected[0].pair.id == "shifted", "shifted pair not rejected");
  if (r.kept.size() == 1) v.check(std::abs(r.kept[0].ncc_score - aligned_ncc) < 1e-6, "aligned ncc mismatch");
  if (r.rejected.size() == 1)
    v.check(std::abs(r.rejected[0].pair.ncc_score - shifted_ncc) < 1e-6, "shifted ncc mismatch");
  char buf[160];
  std::snprintf(buf, sizeof buf, " oracle ncc aligned %.6f, 4 px shift %.6f, threshold 0.99", aligned_ncc, shifted_ncc);
  v.detail << buf;
}

// ---- 8: persistence -------------------------------------------------------

std::vector<ImagePair> small_pairs(int count, std::uint64_t seed) {
  std::vector<ImagePair> pairs;
  for (int i = 0; i < count; ++i) {
    DegradeSpec spec;
    spec.kernel = gaussian_kernel(0.8);
    spec.noise_sigma = 0.005;
    spec.rng_seed = derive_seed(seed, static_cast<std::uint64_t>(i));
    const Tensorf hr = procedural_image(32, 32, derive_seed(seed, 1000 + static_cast<std::uint64_t>(i)));
    pairs.push_back({"p" + std::to_string(i), degrade(hr, spec), hr, 0.0});
  }
  return pairs;
}

void persistence(Verdict& v) {
  Rng rng(808);
  const Tensorf x = random_tensor<float>({1, 3, 14, 11}, rng, 0, 1);
  const fs::path dir = scratch("persist");
  for (const char* name : {"drn-tiny", "rcan-tiny"}) {
    const Modelf model(preset(name, 2), 8);
    save_weights(model, dir / (std::string(name) + ".srfw"));
    const Modelf loaded = load_weights(dir / (std::string(name) + ".srfw"));
    v.check(same_bytes(model.forward(x), loaded.forward(x)), std::string(name) + " forward after reload");
    v.check(encode_weights(loaded) == encode_weights(model), std::string(name) + " weight bytes after reload");
  }

  const auto train_set = small_pairs(8, 5);
  const auto val_set = small_pairs(2, 50);
  TrainConfig c;
  c.epochs = 4;
  c.batch_size = 4;
  c.learning_rate = 2e-3;
  c.crop = 16;
  c.seed = 9;
  c.validation = {false, 0, 1};
  c.out_dir = dir / "whole";
  Modelf whole(DrnConfig{8, 1, 2, 2, 4}, 6);
  const TrainReport full = train(whole, train_set, val_set, c);
  c.out_dir = dir / "split";
  c.epochs = 2;
  Modelf first(DrnConfig{8, 1, 2, 2, 4}, 6);
  train(first, train_set, val_set, c);
  c.epochs = 4;
  c.resume = true;
  Modelf resumed(DrnConfig{8, 1, 2, 2, 4}, 999);
  const TrainReport rest = train(resumed, train_set, val_set, c);
  v.check(comparable(rest) == comparable(full), "resumed report differs");
  v.check(encode_weights(resumed) == encode_weights(whole), "resumed weights differ");

  Tensorf img({1, 3, 9, 13});
  for (Eigen::Index i = 0; i < img.size(); ++i) img.values()[i] = static_cast<float>(rng.below(256)) / 255.0f;
  save_ppm(img, dir / "img.ppm");
  const Tensorf back = load_ppm(dir / "img.ppm");
  v.check(same_bytes(back, img), "ppm values");
  v.check(encode_ppm(back) == encode_ppm(img), "ppm bytes");
  v.detail << " weights reload, 2+2 vs 4 epoch resume and ppm round trip compared byte for byte";
}

}  // namespace

int main() {
  set_num_threads(1);
  run(1, "gradient correctness", gradients);
  run(2, "metric identities", metric_identities);
  run(3, "ensemble algebra", ensemble_algebra);
  run(4, "GP surrogate and benchmark search", gp_surrogate);
  run(5, "desk-scale SR beats bicubic", desk_scale);
  run(6, "ensemble beats members", ensemble_beats_members);
  run(7, "NCC data gate", ncc_gate);
  run(8, "persistence", persistence);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
