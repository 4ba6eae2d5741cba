#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "srforge/models.hpp"
#include "test_support.hpp"

using namespace srforge;
using srforge::testing::max_fd_error;
using srforge::testing::random_tensor;

namespace {

// Layer-by-layer enumeration of the DRN topology: 3x3 convs carry F_in*F_out*9
// weights plus F_out biases; 1x1 convs F_in*F_out plus F_out.
std::size_t conv_params(std::size_t in, std::size_t out, std::size_t k) { return in * out * k * k + out; }

std::size_t drn_block_params(std::size_t f, std::size_t l, std::size_t r) {
  return l * 2 * conv_params(f, f, 3) + conv_params(f * l, f, 1) + conv_params(f, f / r, 1) +
         conv_params(f / r, f, 1);
}

std::size_t drn_params(std::size_t f, std::size_t d, std::size_t l, std::size_t r, int scale) {
  const std::size_t up = scale == 4 ? 2 * conv_params(f, 4 * f, 3)
                                    : conv_params(f, f * scale * scale, 3);
  return conv_params(3, f, 3) + d * drn_block_params(f, l, r) + up + conv_params(f, 3, 3);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("srforge_test_" + name);
}

std::vector<char> file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

template <typename Scalar>
bool same_bytes(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data(), b.data(), sizeof(Scalar) * static_cast<std::size_t>(a.size())) == 0;
}

}  // namespace

TEST(Config, Validation) {
  EXPECT_THROW((Modelf(DrnConfig{8, 1, 2, 5, 4}, 0)), InvalidArgument);
  EXPECT_THROW((Modelf(DrnConfig{8, 0, 2, 2, 4}, 0)), InvalidArgument);
  EXPECT_THROW((Modelf(DrnConfig{8, 1, 2, 2, 3}, 0)), InvalidArgument);
  EXPECT_THROW((Modelf(DrnConfig{2, 1, 2, 2, 4}, 0)), InvalidArgument);
  EXPECT_THROW((Modelf(RcanConfig{10, 1, 1, 4, 2}, 0)), InvalidArgument);
  EXPECT_THROW(preset("nope", 2), InvalidArgument);
}

TEST(Drn, PaperPresetsBuild) {
  for (int scale : {2, 3, 4}) {
    const auto config = std::get<DrnConfig>(preset("drn-star", scale));
    EXPECT_EQ(config.features, 128);
    EXPECT_EQ(config.depth, 18);
    EXPECT_EQ(config.block_size, 3);
    Modelf model(config, 1);
    EXPECT_EQ(model.parameter_count(), drn_params(128, 18, 3, 16, scale));
  }
}

TEST(Rcan, PaperPresetsBuild) {
  const auto star = std::get<RcanConfig>(preset("rcan-star", 2));
  EXPECT_EQ(star.features, 128);
  EXPECT_EQ(star.groups, 5);
  EXPECT_EQ(star.blocks_per_group, 10);
  const auto original = std::get<RcanConfig>(preset("rcan", 3));
  EXPECT_EQ(original.features, 64);
  EXPECT_EQ(original.groups, 10);
  EXPECT_EQ(original.blocks_per_group, 20);
  EXPECT_NO_THROW((Modelf(star, 1)));
  EXPECT_NO_THROW((Modelf(original, 1)));
}

TEST(Drn, ParameterCountMatchesEnumeration) {
  Modelf model(DrnConfig{8, 1, 2, 2, 4}, 3);
  EXPECT_EQ(model.parameter_count(), drn_params(8, 1, 2, 4, 2));
  for (int scale : {3, 4}) {
    EXPECT_EQ(Modelf(DrnConfig{8, 3, 3, scale, 2}, 0).parameter_count(), drn_params(8, 3, 3, 2, scale));
  }
}

TEST(Drn, DoublingDepthAddsBlockCost) {
  const std::size_t d = 3;
  const auto shallow = Modelf(DrnConfig{8, int(d), 2, 2, 4}, 0).parameter_count();
  const auto deep = Modelf(DrnConfig{8, int(2 * d), 2, 2, 4}, 0).parameter_count();
  EXPECT_EQ(deep - shallow, d * drn_block_params(8, 2, 4));
}

TEST(Models, ParameterNamesUniqueAndStable) {
  for (const auto& name : preset_names()) {
    if (name != "drn-tiny" && name != "rcan-tiny") continue;
    Modelf a(preset(name, 2), 1);
    Modelf b(preset(name, 2), 99);
    std::set<std::string> seen;
    const auto pa = a.parameters();
    const auto pb = b.parameters();
    ASSERT_EQ(pa.size(), pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      EXPECT_TRUE(seen.insert(pa[i]->name).second) << pa[i]->name;
      EXPECT_EQ(pa[i]->name, pb[i]->name);
      EXPECT_EQ(pa[i]->grad.shape(), pa[i]->value.shape());
    }
  }
}

TEST(Models, ForwardShapes) {
  Rng rng(4);
  Modelf drn(DrnConfig{8, 1, 2, 2, 4}, 0);
  EXPECT_EQ(drn.forward(random_tensor<float>({1, 3, 24, 24}, rng, 0, 1)).shape(), (Shape{1, 3, 48, 48}));
  Modelf rcan(RcanConfig{8, 1, 2, 4, 3}, 0);
  EXPECT_EQ(rcan.forward(random_tensor<float>({1, 3, 16, 16}, rng, 0, 1)).shape(), (Shape{1, 3, 48, 48}));
  Modelf x4(DrnConfig{8, 1, 1, 4, 4}, 0);
  EXPECT_EQ(x4.forward(random_tensor<float>({2, 3, 5, 7}, rng, 0, 1)).shape(), (Shape{2, 3, 20, 28}));
  EXPECT_THROW(drn.forward(Tensorf({1, 1, 8, 8})), InvalidArgument);
}

TEST(Models, ZeroOutputConvGivesZeros) {
  Rng rng(5);
  Modelf model(DrnConfig{8, 1, 2, 2, 4}, 0);
  model.parameter("output.weight").value.set_zero();
  const auto y = model.forward(random_tensor<float>({1, 3, 10, 10}, rng, 0, 1));
  EXPECT_EQ(y.values().cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Models, BatchIndependence) {
  Rng rng(6);
  for (const auto& name : {"drn-tiny", "rcan-tiny"}) {
    Modelf model(preset(name, 2), 7);
    const auto a = random_tensor<float>({1, 3, 12, 12}, rng, 0, 1);
    const auto b = random_tensor<float>({1, 3, 12, 12}, rng, 0, 1);
    Tensorf::Vector stacked(a.size() * 2);
    stacked << a.values(), b.values();
    const auto batched = model.forward(Tensorf({2, 3, 12, 12}, stacked));
    const auto ya = model.forward(a);
    const auto yb = model.forward(b);
    Tensorf::Vector joined(ya.size() * 2);
    joined << ya.values(), yb.values();
    EXPECT_LT((batched.values() - joined).cwiseAbs().maxCoeff(), 1e-6) << name;
  }
}

TEST(Models, InferClampsForwardDoesNot) {
  Rng rng(7);
  Modelf model(DrnConfig{8, 1, 2, 2, 4}, 0);
  model.parameter("output.bias").value.values().setConstant(2.0f);
  const auto x = random_tensor<float>({1, 3, 6, 6}, rng, 0, 1);
  EXPECT_GT(model.forward(x).values().maxCoeff(), 1.0f);
  EXPECT_LE(model.infer(x).values().maxCoeff(), 1.0f);
  EXPECT_GE(model.infer(x).values().minCoeff(), 0.0f);
}

// A constant LR image is constant on every sub-pixel phase of the HR output
// away from the zero-padded border; pixel shuffle makes the HR image
// s-periodic rather than constant.
TEST(Models, ConstantInputGivesPeriodicInterior) {
  for (const auto& name : {"drn-tiny", "rcan-tiny"}) {
    Modelf model(preset(name, 2), 11);
    const auto y = model.forward(Tensorf({1, 3, 40, 40}, 0.4f));
    // receptive radius is well under 14 LR pixels for the tiny presets
    const int margin = 2 * 14;
    for (int c = 0; c < 3; ++c)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          float lo = 1e9f, hi = -1e9f;
          for (int yy = margin + dy; yy < 80 - margin; yy += 2)
            for (int xx = margin + dx; xx < 80 - margin; xx += 2) {
              lo = std::min(lo, y(0, c, yy, xx));
              hi = std::max(hi, y(0, c, yy, xx));
            }
          EXPECT_LT(hi - lo, 1e-5) << name;
        }
  }
}

TEST(Blocks, ZeroFusionMakesBlockIdentity) {
  Rng rng(8);
  layers::DenseResidualBlock<double> block("b", 6, 3, 2, rng);
  block.fuse.weight.value.set_zero();
  block.fuse.bias.value.set_zero();
  const auto x = random_tensor({2, 6, 7, 5}, rng);
  const auto prev = random_tensor({2, 6, 7, 5}, rng);
  EXPECT_TRUE(same_bytes(block.forward(x, prev, nullptr), x));
}

TEST(Blocks, AttentionWithZeroLogitsHalvesFeatures) {
  Rng rng(9);
  layers::ChannelAttention<double> ca("ca", 8, 4, rng);
  ca.up.weight.value.set_zero();
  ca.up.bias.value.set_zero();
  const auto x = random_tensor({1, 8, 5, 5}, rng);
  const auto y = ca.forward(x, nullptr);
  EXPECT_EQ((y.values() - 0.5 * x.values()).cwiseAbs().maxCoeff(), 0.0);
}

namespace {
// Max relative FD error over every parameter and the input for an L1 loss
// through a double-precision model.
srforge::testing::FdReport model_fd_error(Modeld& model, const Shape& in_shape, std::uint64_t seed) {
  Rng rng(seed);
  Tensord x = random_tensor(in_shape, rng, 0, 1);
  const auto probe = model.forward(x);
  // keep |pred - target| well away from the L1 kink
  Tensord target(probe.shape());
  for (Eigen::Index i = 0; i < target.size(); ++i) {
    const double off = rng.uniform(0.2, 0.5);
    target.values()[i] = probe.values()[i] + (rng.uniform() < 0.5 ? -off : off);
  }
  auto loss = [&] {
    return (model.forward(x).values() - target.values()).cwiseAbs().mean();
  };
  model.zero_grads();
  const auto y = model.forward_train(x);
  Tensord g(y.shape());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double d = y.values()[i] - target.values()[i];
    g.values()[i] = (d > 0 ? 1.0 : -1.0) / static_cast<double>(g.size());
  }
  const auto gx = model.backward(g);
  auto report = srforge::testing::kink_aware_fd(x, gx, loss);
  for (auto* p : model.parameters()) report.merge(srforge::testing::kink_aware_fd(p->value, p->grad, loss));
  return report;
}
}  // namespace

void expect_gradients_match(Modeld& model, const Shape& in, std::uint64_t seed) {
  const auto r = model_fd_error(model, in, seed);
  EXPECT_LT(r.max_error, 1e-3);
  EXPECT_LT(r.skipped_fraction(), 0.05) << r.skipped << " of " << r.checked + r.skipped;
}

TEST(Drn, EndToEndGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed : {1, 2, 3}) {
    Modeld model = Modelf(DrnConfig{4, 1, 2, 2, 2}, seed).cast<double>();
    expect_gradients_match(model, {1, 3, 6, 6}, seed);
  }
  Modeld deeper(DrnConfig{4, 2, 3, 3, 2}, 22);
  expect_gradients_match(deeper, {2, 3, 5, 4}, 2);
}

TEST(Rcan, EndToEndGradientMatchesFiniteDifferences) {
  Modeld model(RcanConfig{4, 2, 2, 2, 2}, 23);
  expect_gradients_match(model, {1, 3, 5, 5}, 3);
}

TEST(Drn, X4UpsamplerGradient) {
  Modeld model(DrnConfig{4, 1, 1, 4, 2}, 24);
  expect_gradients_match(model, {1, 3, 3, 3}, 4);
}

TEST(Weights, RoundTripIsBitExact) {
  Rng rng(10);
  for (const auto& name : {"drn-tiny", "rcan-tiny"}) {
    Modelf model(preset(name, 3), 5);
    const auto p1 = temp_path(std::string(name) + "_a.srfw");
    const auto p2 = temp_path(std::string(name) + "_b.srfw");
    save_weights(model, p1);
    const Modelf loaded = load_weights(p1);
    save_weights(loaded, p2);
    EXPECT_EQ(file_bytes(p1), file_bytes(p2));
    EXPECT_EQ(loaded.config(), model.config());
    const auto x = random_tensor<float>({1, 3, 9, 9}, rng, 0, 1);
    EXPECT_TRUE(same_bytes(model.forward(x), loaded.forward(x)));
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }
}

TEST(Weights, HeaderLayout) {
  Modelf model(DrnConfig{4, 1, 1, 2, 2}, 0);
  const auto bytes = encode_weights(model);
  ASSERT_GT(bytes.size(), 13u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SRFW");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(bytes[5] | bytes[6] | bytes[7], 0);
  EXPECT_EQ(bytes[8], 0);  // DRN
  EXPECT_EQ(encode_weights(Modelf(RcanConfig{4, 1, 1, 2, 2}, 0))[8], 1);
}

namespace {
ParseError::Kind decode_error(const std::vector<std::uint8_t>& bytes) {
  try {
    decode_weights(bytes);
  } catch (const ParseError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "decode succeeded";
  return ParseError::Kind::BadValue;
}
}  // namespace

TEST(Weights, CorruptFilesGiveStructuredErrors) {
  Modelf model(DrnConfig{4, 1, 1, 2, 2}, 0);
  const auto good = encode_weights(model);
  using Kind = ParseError::Kind;

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(decode_error(bad_magic), Kind::BadMagic);

  auto bad_version = good;
  bad_version[4] = 2;
  EXPECT_EQ(decode_error(bad_version), Kind::BadVersion);

  auto truncated = good;
  truncated.resize(good.size() - 3);
  EXPECT_EQ(decode_error(truncated), Kind::Truncated);

  // locate the tensor-count field right after the JSON blob
  const std::uint32_t blob_len = good[9] | good[10] << 8 | good[11] << 16 | good[12] << 24;
  const std::size_t count_at = 13 + blob_len;
  for (std::uint8_t v : {std::uint8_t{0}, std::uint8_t{3}, std::uint8_t{0xff}}) {
    auto bad_count = good;
    bad_count[count_at] = v;
    bad_count[count_at + 3] = v;
    EXPECT_EQ(decode_error(bad_count), Kind::ShapeMismatch);
  }

  auto bad_json = good;
  bad_json[13] = '[';
  EXPECT_EQ(decode_error(bad_json), Kind::BadHeader);

  EXPECT_EQ(decode_error({}), Kind::Truncated);
  EXPECT_THROW(load_weights(temp_path("does_not_exist.srfw")), IoError);
}
