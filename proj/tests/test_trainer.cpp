#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "srforge/data.hpp"
#include "srforge/error.hpp"
#include "srforge/ops.hpp"
#include "srforge/trainer.hpp"
#include "test_support.hpp"

using namespace srforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("srforge_trainer_" + name);
  fs::remove_all(p);
  return p;
}

Parameter<float> scalar_param(float value) {
  Tensorf t({1, 1, 1, 1});
  t.values()[0] = value;
  return Parameter<float>("p", t);
}

// In-memory x2 pairs: procedural 32x32 HR, mild blur and noise.
std::vector<ImagePair> tiny_pairs(int count, std::uint64_t seed) {
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

ModelConfig tiny_drn() { return DrnConfig{8, 1, 2, 2, 4}; }

TrainConfig quick_config() {
  TrainConfig c;
  c.epochs = 5;
  c.batch_size = 4;
  c.learning_rate = 2e-3;
  c.crop = 16;
  c.seed = 9;
  c.validation = {false, 0, 1};
  return c;
}

std::vector<std::uint8_t> weights_bytes(const Modelf& m) { return encode_weights(m); }

}  // namespace

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  Parameter<float> p = scalar_param(0.3f);
  AdamState s;
  for (int i = 0; i < 10; ++i) adam_step({&p}, s, 0.1, {});
  EXPECT_EQ(p.value.values()[0], 0.3f);
  EXPECT_EQ(s.step, 10);
}

TEST(Adam, ConstantGradientStepTendsToLrTimesSign) {
  for (float g : {0.7f, -3.0f, 1e-3f}) {
    Parameter<float> p = scalar_param(0.0f);
    p.grad.values()[0] = g;
    AdamState s;
    const double lr = 1e-3;
    double before = 0.0;
    for (int i = 0; i < 200; ++i) {
      before = p.value.values()[0];
      adam_step({&p}, s, lr, {});
    }
    const double last_step = p.value.values()[0] - before;
    EXPECT_NEAR(last_step, -lr * (g > 0 ? 1 : -1), 1e-5 * lr + 1e-7) << g;
  }
}

TEST(Adam, TwoStepsMatchHandAlgebra) {
  // beta1 = 0.9, beta2 = 0.999, eps = 1e-8, lr = 0.01, g1 = 0.5, g2 = -0.2.
  // m1 = 0.05, v1 = 0.00025; m1^ = 0.5, v1^ = 0.25; step1 = 0.01 * 0.5 / (0.5 + 1e-8).
  // m2 = 0.045 - 0.02 = 0.025, v2 = 0.00024975 + 0.00004 = 0.00028975;
  // m2^ = 0.025 / 0.19, v2^ = 0.00028975 / 0.001999.
  Parameter<float> p = scalar_param(1.0f);
  AdamState s;
  p.grad.values()[0] = 0.5f;
  adam_step({&p}, s, 0.01, {});
  const double x1 = 1.0 - 0.01 * 0.5 / (0.5 + 1e-8);
  EXPECT_EQ(p.value.values()[0], static_cast<float>(x1));
  p.grad.values()[0] = -0.2f;
  adam_step({&p}, s, 0.01, {});
  const double g2 = static_cast<double>(-0.2f);
  const double m2 = 0.9 * 0.05 + 0.1 * g2;
  const double v2 = 0.999 * 0.00025 + 0.001 * g2 * g2;
  const double x2 = static_cast<double>(static_cast<float>(x1)) - 0.01 * (m2 / 0.19) / (std::sqrt(v2 / (1 - 0.999 * 0.999)) + 1e-8);
  EXPECT_NEAR(s.m[0][0], m2, 1e-15);
  EXPECT_NEAR(s.v[0][0], v2, 1e-15);
  EXPECT_EQ(p.value.values()[0], static_cast<float>(x2));
}

TEST(Adam, StateRoundTripsExactly) {
  const fs::path dir = scratch("adam");
  fs::create_directories(dir);
  AdamState s;
  s.step = 17;
  s.m = {Eigen::VectorXd::LinSpaced(5, -1, 1), Eigen::VectorXd::Constant(1, 1e-300)};
  s.v = {Eigen::VectorXd::LinSpaced(5, 0, 3), Eigen::VectorXd::Constant(1, 0.1)};
  save_adam_state(s, dir / "a.adam");
  const AdamState t = load_adam_state(dir / "a.adam");
  EXPECT_EQ(t.step, 17);
  ASSERT_EQ(t.m.size(), 2u);
  for (int i = 0; i < 2; ++i) {
    EXPECT_EQ(t.m[i], s.m[i]);
    EXPECT_EQ(t.v[i], s.v[i]);
  }
  std::ofstream(dir / "bad.adam") << "SRFW....";
  EXPECT_THROW(load_adam_state(dir / "bad.adam"), ParseError);
  EXPECT_THROW(load_adam_state(dir / "missing.adam"), IoError);
  Parameter<float> p = scalar_param(0.0f);
  AdamState wrong = t;
  EXPECT_THROW(adam_step({&p}, wrong, 0.1, {}), InvalidArgument);
}

TEST(TrainConfig, ScheduleAndValidation) {
  TrainConfig c;
  EXPECT_DOUBLE_EQ(c.lr_at(0), 1e-4);
  EXPECT_DOUBLE_EQ(c.lr_at(29), 1e-4);
  EXPECT_DOUBLE_EQ(c.lr_at(30), 5e-5);
  EXPECT_DOUBLE_EQ(c.lr_at(65), 2.5e-5);
  EXPECT_EQ(c.adam.beta1, 0.9);
  EXPECT_EQ(c.adam.beta2, 0.999);
  EXPECT_EQ(c.crop, 120);
  c.batch_size = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.loss_alpha = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = {};
  c.resume = true;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(Train, RejectsOversizedCropAndScaleMismatch) {
  Modelf m(tiny_drn(), 1);
  TrainConfig c = quick_config();
  c.crop = 17;
  EXPECT_THROW(train(m, tiny_pairs(2, 1), {}, c), InvalidArgument);
  Modelf m3(DrnConfig{8, 1, 2, 3, 4}, 1);
  EXPECT_THROW(train(m3, tiny_pairs(2, 1), {}, quick_config()), InvalidArgument);
  EXPECT_THROW(train(m, {}, {}, quick_config()), InvalidArgument);
}

TEST(Train, LossDecreasesOnTinyDrn) {
  Modelf m(tiny_drn(), 3);
  TrainConfig c = quick_config();
  c.batch_size = 2;
  const TrainReport r = train(m, tiny_pairs(20, 2), tiny_pairs(2, 77), c);
  ASSERT_EQ(r.epochs.size(), 5u);
  EXPECT_LT(r.epochs.back().train_loss, r.epochs.front().train_loss);
  EXPECT_EQ(r.epochs.front().batch_losses.size(), 10u);
  EXPECT_TRUE(std::isfinite(r.epochs.back().val_psnr));
  EXPECT_TRUE(std::isfinite(r.bicubic_val_psnr));
}

TEST(Train, ZeroLearningRateKeepsWeightsBitIdentical) {
  Modelf m(tiny_drn(), 4);
  const auto before = weights_bytes(m);
  TrainConfig c = quick_config();
  c.learning_rate = 0.0;
  c.epochs = 3;
  train(m, tiny_pairs(6, 3), {}, c);
  EXPECT_EQ(weights_bytes(m), before);
}

TEST(Train, SameSeedGivesIdenticalReportAndWeights) {
  const auto pairs = tiny_pairs(8, 4);
  const auto val = tiny_pairs(2, 40);
  Modelf a(tiny_drn(), 5), b(tiny_drn(), 5);
  const TrainReport ra = train(a, pairs, val, quick_config());
  const TrainReport rb = train(b, pairs, val, quick_config());
  EXPECT_EQ(ra.to_json(false).dump(), rb.to_json(false).dump());
  EXPECT_EQ(weights_bytes(a), weights_bytes(b));
  TrainConfig other = quick_config();
  other.seed = 10;
  Modelf c(tiny_drn(), 5);
  EXPECT_NE(train(c, pairs, val, other).to_json(false).dump(), ra.to_json(false).dump());
}

TEST(Train, ResumeReproducesUninterruptedTrajectory) {
  const auto pairs = tiny_pairs(8, 5);
  const auto val = tiny_pairs(2, 50);
  TrainConfig c = quick_config();
  c.epochs = 4;
  c.out_dir = scratch("full");
  Modelf full(tiny_drn(), 6);
  const TrainReport whole = train(full, pairs, val, c);

  c.out_dir = scratch("split");
  c.epochs = 2;
  Modelf first(tiny_drn(), 6);
  train(first, pairs, val, c);
  c.epochs = 4;
  c.resume = true;
  Modelf resumed(tiny_drn(), 999);  // weights come from the checkpoint
  const TrainReport rest = train(resumed, pairs, val, c);

  ASSERT_EQ(rest.epochs.size(), 4u);
  for (int e = 0; e < 4; ++e) {
    EXPECT_EQ(rest.epochs[e].batch_losses, whole.epochs[e].batch_losses) << "epoch " << e;
    EXPECT_EQ(rest.epochs[e].val_psnr, whole.epochs[e].val_psnr);
  }
  EXPECT_EQ(weights_bytes(resumed), weights_bytes(full));
  EXPECT_EQ(rest.best_epoch, whole.best_epoch);
}

TEST(Train, BestCheckpointIsMaxValidationPsnr) {
  TrainConfig c = quick_config();
  c.epochs = 4;
  c.out_dir = scratch("best");
  Modelf m(tiny_drn(), 7);
  const TrainReport r = train(m, tiny_pairs(8, 6), tiny_pairs(2, 60), c);
  int best = 0;
  for (int e = 1; e < 4; ++e)
    if (r.epochs[e].val_psnr > r.epochs[best].val_psnr) best = e;
  EXPECT_EQ(r.best_epoch, best);
  ASSERT_TRUE(fs::exists(r.best_checkpoint));
  // The stored weights reproduce the best epoch's validation PSNR.
  const Modelf loaded = load_weights(r.best_checkpoint);
  const EnsembleMember member{as_patch_fn(loaded), 2, 1.0};
  EXPECT_EQ(evaluate(std::span(&member, 1), tiny_pairs(2, 60), c.validation).mean_psnr(), r.epochs[best].val_psnr);
  for (const char* f : {"checkpoint.srfw", "checkpoint.adam", "checkpoint.json", "final.srfw", "report.json"}) {
    EXPECT_TRUE(fs::exists(c.out_dir / f)) << f;
  }
  const TrainReport back = TrainReport::from_json(nlohmann::json::parse(std::ifstream(c.out_dir / "report.json")));
  EXPECT_EQ(back.to_json(true).dump(), r.to_json(true).dump());
}

TEST(Train, NonFiniteLossAbortsWithSnapshot) {
  auto pairs = tiny_pairs(4, 7);
  pairs[2].hr.values()[5] = std::nanf("");
  TrainConfig c = quick_config();
  c.batch_size = 1;
  c.out_dir = scratch("diverge");
  Modelf m(tiny_drn(), 8);
  try {
    train(m, pairs, {}, c);
    FAIL() << "expected TrainingDiverged";
  } catch (const TrainingDiverged& e) {
    EXPECT_EQ(e.snapshot().epoch, 0);
    EXPECT_EQ(e.snapshot().pair_ids, std::vector<std::string>{"p2"});
    EXPECT_FALSE(std::isfinite(e.snapshot().loss));
  }
  EXPECT_TRUE(fs::exists(c.out_dir / "divergence.json"));
}

TEST(Train, SingleStepDecreasesLossForSomeSmallRate) {
  const auto pairs = tiny_pairs(1, 8);
  const PatchPair crop = crop_pair(pairs[0], 16, 0, 0, 0);
  bool decreased = false;
  for (double lr : {1e-2, 1e-3, 1e-4}) {
    Modelf m(tiny_drn(), 10);
    m.zero_grads();
    Tensorf grad;
    const double before = mixed_loss(m.forward_train(crop.lr), crop.hr, kDefaultLossAlpha, &grad);
    m.backward(grad);
    AdamState s;
    adam_step(m.parameters(), s, lr, {});
    decreased |= mixed_loss(m.forward(crop.lr), crop.hr) < before;
  }
  EXPECT_TRUE(decreased);
}

TEST(Train, LossIsInvariantUnderAugmentationForEquivariantModel) {
  // Pointwise channel mixing commutes with every dihedral transform, so each
  // augmented crop has the same loss as the plain one.
  Rng rng(12);
  const Tensorf w = srforge::testing::random_tensor<float>({3, 3, 1, 1}, rng, -0.6, 0.6);
  const Tensorf bias({3, 1, 1, 1});
  const Tensorf img = procedural_image(32, 32, 3);
  const ImagePair pair{"eq", img, procedural_image(32, 32, 4), 0.0};
  const PatchPair plain = crop_pair(pair, 32, 0, 0, 0);
  const double reference = mixed_loss(conv2d(plain.lr, w, bias), plain.hr);
  for (int t = 1; t < 8; ++t) {
    const PatchPair aug = crop_pair(pair, 32, 0, 0, t);
    EXPECT_NEAR(mixed_loss(conv2d(aug.lr, w, bias), aug.hr), reference, 1e-6) << "transform " << t;
  }
}

TEST(Evaluate, SelfAgainstSelfGivesSentinels) {
  const Tensorf img = procedural_image(24, 24, 5);
  const std::vector<ImagePair> pairs{{"same", img, img, 1.0}};
  const EnsembleMember identity{[](const Tensorf& x) { return x; }, 1, 1.0};
  const MetricReport r = evaluate(std::span(&identity, 1), pairs, {false, 0, 1});
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.entries[0].psnr, std::numeric_limits<double>::infinity());
  EXPECT_NEAR(r.entries[0].ssim, 1.0, 1e-9);
}

TEST(Evaluate, BicubicBaselineMatchesDirectComputation) {
  const auto pairs = tiny_pairs(3, 9);
  const MetricReport r = evaluate_bicubic(pairs);
  ASSERT_EQ(r.entries.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    Tensorf up = bicubic_resize(pairs[i].lr, 32, 32);
    up.values() = up.values().cwiseMax(0.0f).cwiseMin(1.0f);
    EXPECT_EQ(r.entries[i].psnr, psnr(up, pairs[i].hr));
    EXPECT_EQ(r.entries[i].id, pairs[i].id);
  }
}

TEST(Evaluate, MissingFilesBecomeFailureEntries) {
  const fs::path dir = scratch("eval_manifest");
  SyntheticOptions o;
  o.count = 4;
  o.hr_size = 32;
  o.val_fraction = 1.0;
  o.seed = 3;
  const DatasetManifest m = make_synthetic_dataset(o, dir);
  fs::remove(m.root / m.entries[1].hr_path);
  const EnsembleMember bicubic{bicubic_patch_fn(2), 2, 1.0};
  const MetricReport r = evaluate(std::span(&bicubic, 1), m, "val", {false, 0, 1});
  EXPECT_EQ(r.entries.size(), 3u);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].id, m.entries[1].id);
  EXPECT_TRUE(std::isfinite(r.mean_psnr()));
  EXPECT_THROW(evaluate(std::span(&bicubic, 1), m, "train", {}), InvalidArgument);
}

TEST(Train, ManifestTrainingAppliesNccGate) {
  const fs::path dir = scratch("manifest_train");
  SyntheticOptions o;
  o.count = 6;
  o.hr_size = 96;
  o.val_fraction = 2.0 / 6.0;
  o.seed = 4;
  o.spec.kernel = gaussian_kernel(0.8);
  const DatasetManifest m = make_synthetic_dataset(o, dir);
  Modelf model(tiny_drn(), 2);
  TrainConfig c = quick_config();
  c.epochs = 1;
  const TrainReport r = train(model, m, c);
  EXPECT_EQ(r.train_pairs, 4u);
  EXPECT_EQ(r.rejected_pairs, 0u);
  EXPECT_EQ(r.val_pairs, 2u);
  c.ncc_threshold = 1.01;
  EXPECT_THROW(train(model, m, c), InvalidArgument);
}

TEST(MiniTrain, EvaluatorScoresSearchPointsDeterministically) {
  const SearchSpace space(ModelKind::Drn, {{"features", {4, 8}}, {"depth", {1}}, {"block_size", {1, 2}}}, 2, 4);
  MiniTrainOptions o;
  o.train = quick_config();
  o.train.epochs = 1;
  const Evaluator eval = mini_train_evaluator(space, tiny_pairs(4, 11), tiny_pairs(1, 12), o);
  const double a = eval({1, 0, 1});
  EXPECT_TRUE(std::isfinite(a));
  EXPECT_EQ(eval({1, 0, 1}), a);
  EXPECT_THROW(mini_train_evaluator(space, tiny_pairs(1, 1), {}, o), InvalidArgument);
}
