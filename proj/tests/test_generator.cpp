#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <set>

#include "csagan/core/gradcheck.hpp"
#include "csagan/core/ops.hpp"
#include "csagan/model/generator.hpp"

using namespace csagan;

namespace {

class Gen64 : public ::testing::Test {
 protected:
  void SetUp() override { set_precision(Precision::kF64); }
};

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

// Random condition levels obtained by average pooling one full-size map.
std::vector<Tensor> random_levels(const GeneratorConfig& cfg, int batch, std::mt19937_64& rng) {
  Tensor full = rand_tensor({batch, 1, cfg.image_side, cfg.image_side}, rng);
  std::vector<Tensor> levels;
  for (int s : cfg.pyramid_scales()) levels.push_back(s == 1 ? full : ops::avg_pool(full, s));
  return levels;
}

bool bit_equal(const Tensor& a, const Tensor& b) {
  return a.shape() == b.shape() &&
         std::memcmp(a.data().data(), b.data().data(), sizeof(double) * a.numel()) == 0;
}

double max_diff(const Tensor& a, const Tensor& b) {
  double d = 0.0;
  for (int64_t k = 0; k < a.numel(); ++k) d = std::max(d, std::abs(a.data()[k] - b.data()[k]));
  return d;
}

void fill(Tensor t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

GeneratorConfig small_config(int side = 16, int n_down = 2) {
  GeneratorConfig c;
  c.base_channels = 8;
  c.n_down = n_down;
  c.image_side = side;
  return c;
}

}  // namespace

TEST_F(Gen64, ConfigValidation) {
  GeneratorConfig c;
  EXPECT_NO_THROW(c.validate());
  c.image_side = 60;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GeneratorConfig{};
  c.base_channels = 4;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = GeneratorConfig{};
  c.image_side = 256;
  c.n_down = 6;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.channels_at(0), 32);
  EXPECT_EQ(c.channels_at(3), 256);
  EXPECT_EQ(c.channels_at(5), 256);
  EXPECT_EQ(small_config().pyramid_scales(), (std::vector<int>{1, 2, 4}));
}

TEST_F(Gen64, MruGateClosedPassesProjection) {
  std::mt19937_64 rng(1);
  Mru mru("m", 3, 5, Activation::kLeakyRelu, 7);
  fill(mru.conv_n.bias, -30.0);
  Tensor x = rand_tensor({3, 6, 6}, rng, -1, 1), c = rand_tensor({1, 6, 6}, rng);
  Tensor y = mru.forward(x, c, {});
  Tensor p = mru.proj.forward(x, {});
  EXPECT_LT(max_diff(y, p), 1e-9);
}

TEST_F(Gen64, MruGateOpenPassesFeatureBranch) {
  std::mt19937_64 rng(2);
  Mru mru("m", 4, 4, Activation::kRelu, 8);
  EXPECT_FALSE(mru.has_proj);
  fill(mru.conv_n.bias, 30.0);
  Tensor x = rand_tensor({4, 5, 5}, rng, -1, 1), c = rand_tensor({1, 5, 5}, rng);
  Tensor y = mru.forward(x, c, {});
  Tensor m = ops::sigmoid(mru.conv_m.forward(ops::concat({x, c}, 0), {}));
  Tensor z = ops::relu(mru.norm_z.forward(mru.conv_z.forward(ops::concat({ops::mul(m, x), c}, 0), {})));
  EXPECT_LT(max_diff(y, z), 1e-9);
}

TEST_F(Gen64, MruGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(3);
  Mru mru("m", 3, 4, Activation::kLeakyRelu, 9);
  for (Tensor* b : {&mru.conv_m.bias, &mru.conv_n.bias, &mru.proj.bias}) {
    auto v = rand_tensor(b->shape(), rng, -0.5, 0.5);
    std::copy(v.data().begin(), v.data().end(), b->mutable_data().begin());
  }
  for (Tensor* t : {&mru.norm_z.gain, &mru.norm_z.shift}) {
    auto v = rand_tensor(t->shape(), rng, 0.5, 1.5);
    std::copy(v.data().begin(), v.data().end(), t->mutable_data().begin());
  }
  Tensor x = rand_tensor({3, 5, 5}, rng, -1, 1);
  x.set_requires_grad(true);
  Tensor c = rand_tensor({1, 5, 5}, rng);
  Tensor probe = rand_tensor({4, 5, 5}, rng, -1, 1);
  auto fn = [&] { return ops::sum(ops::mul(mru.forward(x, c, {}), probe)); };
  GradCheckResult r = check_gradients(
      fn,
      {x, mru.conv_m.weight, mru.conv_m.bias, mru.conv_n.weight, mru.conv_n.bias,
       mru.conv_z.weight, mru.norm_z.gain, mru.norm_z.shift, mru.proj.weight},
      {"x", "m.w", "m.b", "n.w", "n.b", "z.w", "z.gain", "z.shift", "proj.w"});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST_F(Gen64, MruRejectsExtentMismatch) {
  Mru mru("m", 2, 2, Activation::kRelu, 1);
  EXPECT_THROW(mru.forward(Tensor::zeros({2, 4, 4}), Tensor::zeros({1, 4, 3}), {}),
               DimensionError);
}

TEST_F(Gen64, OutputShapeAndRange) {
  std::mt19937_64 rng(4);
  GeneratorConfig cfg = small_config(64, 3);
  EXPECT_EQ(cfg.pyramid_scales(), (std::vector<int>{1, 2, 4, 8}));
  Generator g(cfg, 11);
  auto levels = random_levels(cfg, 2, rng);
  std::vector<int64_t> extents;
  for (const auto& t : levels) extents.push_back(t.size(-1));
  EXPECT_EQ(extents, (std::vector<int64_t>{64, 32, 16, 8}));
  Tensor y = g.forward(levels);
  EXPECT_EQ(y.shape(), (Shape{2, 3, 64, 64}));
  for (double v : y.data()) {
    EXPECT_GT(v, -1.0);
    EXPECT_LT(v, 1.0);
  }
  EXPECT_EQ(g.csam_resolution(), 32);
}

TEST_F(Gen64, ExtremeConditionsStayInsideOpenInterval) {
  GeneratorConfig cfg = small_config();
  Generator g(cfg, 5);
  for (double value : {0.0, 1.0}) {
    std::vector<Tensor> levels;
    for (int s : cfg.pyramid_scales()) {
      levels.push_back(Tensor::full({1, 1, 16 / s, 16 / s}, value));
    }
    for (double v : g.forward(levels).data()) {
      EXPECT_GT(v, -1.0);
      EXPECT_LT(v, 1.0);
    }
  }
}

TEST_F(Gen64, Deterministic) {
  std::mt19937_64 rng(5);
  GeneratorConfig cfg = small_config(32, 3);
  Generator g(cfg, 12), g2(cfg, 12);
  auto levels = random_levels(cfg, 1, rng);
  Tensor a = g.forward(levels), b = g.forward(levels), c = g2.forward(levels);
  EXPECT_TRUE(bit_equal(a, b));
  EXPECT_TRUE(bit_equal(a, c));
}

TEST_F(Gen64, MissingPyramidLevelRejected) {
  std::mt19937_64 rng(6);
  GeneratorConfig cfg = small_config();
  Generator g(cfg, 1);
  auto levels = random_levels(cfg, 1, rng);
  levels.pop_back();
  EXPECT_THROW(g.forward(levels), std::out_of_range);
}

TEST_F(Gen64, CsamInsertionIsIdentityAtInit) {
  std::mt19937_64 rng(7);
  GeneratorConfig with = small_config(32, 3);
  GeneratorConfig without = with;
  without.csam_enabled = false;
  Generator g(with, 21), plain(without, 21);
  auto levels = random_levels(with, 2, rng);
  Tensor on = g.forward(levels);
  g.set_csam_active(false);
  Tensor off = g.forward(levels);
  EXPECT_TRUE(bit_equal(on, off));
  EXPECT_TRUE(bit_equal(on, plain.forward(levels)));

  // A nonzero gamma makes the module observable.
  g.set_csam_active(true);
  fill(g.csam_parameters().find("G.csam.gamma"), 0.5);
  EXPECT_GT(max_diff(g.forward(levels), off), 1e-9);
}

TEST_F(Gen64, AttentionMapAtCsamResolution) {
  std::mt19937_64 rng(8);
  GeneratorConfig cfg = small_config(16, 2);
  Generator g(cfg, 2);
  Tensor b = g.attention_map(random_levels(cfg, 1, rng));
  EXPECT_EQ(b.shape(), (Shape{1, 64, 64}));
}

TEST_F(Gen64, SkipConnectionsAreWired) {
  std::mt19937_64 rng(9);
  GeneratorConfig cfg = small_config(32, 3);
  Generator g(cfg, 3);
  auto levels = random_levels(cfg, 1, rng);
  Tensor base = g.forward(levels);
  for (int l = 0; l < cfg.n_down; ++l) {
    GenerateOptions opts;
    opts.zero_skip_level = l;
    EXPECT_GT(max_diff(g.forward(levels, opts), base), 1e-9) << "level " << l;
  }
}

TEST_F(Gen64, EndToEndGradient) {
  std::mt19937_64 rng(10);
  GeneratorConfig cfg = small_config(16, 2);
  Generator g(cfg, 4);
  auto levels = random_levels(cfg, 1, rng);
  ParameterSet params = g.parameters();
  Tensor w = params.find("G.enc0.z.weight");
  GradCheckOptions opts;
  opts.max_coords = 12;
  GradCheckResult r = check_gradients([&] { return ops::mean(g.forward(levels)); }, {w},
                                      {"G.enc0.z.weight"}, opts);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

TEST_F(Gen64, ParameterPartition) {
  Generator g(small_config(32, 3), 1);
  ParameterSet all = g.parameters(), core = g.backbone_parameters(), att = g.csam_parameters();
  EXPECT_EQ(all.parameters.size(), core.parameters.size() + att.parameters.size());
  std::set<std::string> names;
  for (const auto& p : all.parameters) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  for (const auto& p : att.parameters) EXPECT_EQ(p.name.rfind("G.csam.", 0), 0u);
  for (const auto& p : core.parameters) EXPECT_NE(p.name.rfind("G.csam.", 0), 0u);
  GeneratorConfig off = small_config(32, 3);
  off.csam_enabled = false;
  Generator plain(off, 1);
  EXPECT_TRUE(plain.csam_parameters().parameters.empty());
}

TEST_F(Gen64, GenerateFromDistanceField) {
  GeneratorConfig cfg = small_config(16, 2);
  Generator g(cfg, 6);
  LineMap lines;
  lines.height = lines.width = 16;
  lines.mask.assign(256, 0);
  for (int x = 2; x < 14; ++x) lines.mask[8 * 16 + x] = 1;
  DistanceField field = distance_field(lines);
  ConditionPyramid pyr = build_condition_pyramid(field, cfg.pyramid_scales());
  Tensor y = generate(g, field, pyr);
  EXPECT_EQ(y.shape(), (Shape{3, 16, 16}));
  EXPECT_TRUE(bit_equal(y, generate(g, field, pyr)));

  ConditionPyramid partial = build_condition_pyramid(field, {1, 2});
  EXPECT_THROW(generate(g, field, partial), std::out_of_range);
  LineMap big = lines;
  big.height = big.width = 32;
  big.mask.assign(1024, 0);
  big.mask[5] = 1;
  DistanceField wrong = distance_field(big);
  EXPECT_THROW(generate(g, wrong, pyr), DimensionError);
}
