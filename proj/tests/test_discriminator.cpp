#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <set>

#include "csagan/core/gradcheck.hpp"
#include "csagan/core/ops.hpp"
#include "csagan/model/discriminator.hpp"

using namespace csagan;

namespace {

class Disc64 : public ::testing::Test {
 protected:
  void SetUp() override { set_precision(Precision::kF64); }
};

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = dist(rng);
  return Tensor::from_data(std::move(shape), std::move(v));
}

DiscriminatorConfig small(int side = 32) {
  DiscriminatorConfig c;
  c.base_channels = 4;
  c.image_side = side;
  return c;
}

}  // namespace

TEST(ReceptiveField, Recurrence) {
  EXPECT_EQ(receptive_field({1}, 4, 2), (std::vector<int64_t>{4}));
  EXPECT_EQ(receptive_field({2}, 4, 2), (std::vector<int64_t>{10}));
  EXPECT_EQ(receptive_field({0, 3, 4, 5}, 4, 2), (std::vector<int64_t>{1, 22, 46, 94}));
  EXPECT_EQ(receptive_field({3}, 3, 1), (std::vector<int64_t>{7}));
  EXPECT_THROW(receptive_field({1}, 0, 1), std::invalid_argument);
}

TEST(DiscriminatorConfigTest, DefaultsCoverImage) {
  for (int side : {32, 64, 128, 256}) {
    DiscriminatorConfig c;
    c.image_side = side;
    EXPECT_NO_THROW(c.validate());
    auto d = c.resolved_depths();
    ASSERT_EQ(d.size(), 3u);
    EXPECT_GE(receptive_field({d.back()}, 4, 2)[0], side);
    EXPECT_GT(d.front(), c.shared_depth);
  }
  DiscriminatorConfig c;
  c.image_side = 32;
  EXPECT_EQ(c.resolved_depths(), (std::vector<int>{3, 4, 5}));
}

TEST(DiscriminatorConfigTest, InvalidRejected) {
  DiscriminatorConfig c = small();
  c.depths = {3, 3, 5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.depths = {2, 4, 5};
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.depths = {3, 4, 5};
  c.shared_depth = 3;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = small(64);
  c.depths = {3, 4};
  c.n_d = 2;
  EXPECT_THROW(c.validate(), std::invalid_argument);  // RF 46 < 64
  c = small();
  c.depths = {3, 4};
  EXPECT_THROW(c.validate(), std::invalid_argument);  // count != n_d
  c = small();
  c.n_d = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST_F(Disc64, OutputStructure) {
  std::mt19937_64 rng(1);
  Discriminator d(small(), 3);
  Tensor cond = rand_tensor({2, 1, 32, 32}, rng, 0, 1), img = rand_tensor({2, 3, 32, 32}, rng);
  DiscriminatorOutput out = d.forward(cond, img);
  ASSERT_EQ(out.scores.size(), 3u);
  ASSERT_EQ(out.taps.size(), 3u);
  for (int i = 0; i < 3; ++i) {
    EXPECT_EQ(out.taps[i].size(), 3u);
    EXPECT_EQ(out.scores[i].shape(), (Shape{2}));
    for (double s : out.scores[i].data()) {
      EXPECT_GT(s, 0.0);
      EXPECT_LT(s, 1.0);
    }
  }
  // Depth 3 branch: taps are the two trunk layers and its own layer.
  EXPECT_EQ(out.taps[0][0].shape(), (Shape{2, 4, 16, 16}));
  EXPECT_EQ(out.taps[0][2].shape(), (Shape{2, 16, 4, 4}));
  EXPECT_EQ(out.taps[2][2].shape(), (Shape{2, 64, 1, 1}));
}

TEST_F(Disc64, UnbatchedInputAccepted) {
  std::mt19937_64 rng(2);
  Discriminator d(small(), 3);
  auto out = d.forward(rand_tensor({1, 32, 32}, rng, 0, 1), rand_tensor({3, 32, 32}, rng));
  EXPECT_EQ(out.scores[0].shape(), (Shape{1}));
}

TEST_F(Disc64, ExtentMismatchRejected) {
  Discriminator d(small(), 3);
  EXPECT_THROW(d.forward(Tensor::zeros({1, 1, 32, 32}), Tensor::zeros({1, 3, 16, 16})),
               DimensionError);
  EXPECT_THROW(d.forward(Tensor::zeros({1, 1, 32, 32}), Tensor::zeros({1, 1, 32, 32})),
               DimensionError);
  EXPECT_THROW(d.forward(Tensor::zeros({2, 1, 32, 32}), Tensor::zeros({1, 3, 32, 32})),
               DimensionError);
}

TEST_F(Disc64, SharedTrunkWiring) {
  std::mt19937_64 rng(3);
  Discriminator d(small(), 4);
  Tensor cond = rand_tensor({1, 1, 32, 32}, rng, 0, 1), img = rand_tensor({1, 3, 32, 32}, rng);
  auto base = d.forward(cond, img);
  auto perturb_and_compare = [&](Tensor w, std::vector<bool> expect_change) {
    w.mutable_data()[0] += 0.5;
    auto out = d.forward(cond, img);
    w.mutable_data()[0] -= 0.5;
    for (int i = 0; i < 3; ++i) {
      const bool changed = out.scores[i].item() != base.scores[i].item();
      EXPECT_EQ(changed, expect_change[i]) << "subnet " << i;
    }
  };
  perturb_and_compare(d.trunk_parameters().find("D.trunk0.weight"), {true, true, true});
  perturb_and_compare(d.branch_parameters(1).find("D.sub1.conv3.weight"), {false, true, false});
  perturb_and_compare(d.branch_parameters(2).find("D.sub2.head.weight"), {false, false, true});
}

TEST_F(Disc64, TrunkStoredOnce) {
  Discriminator d(small(), 5);
  ParameterSet all = d.parameters();
  std::set<std::string> names;
  for (const auto& p : all.parameters) EXPECT_TRUE(names.insert(p.name).second) << p.name;
  ParameterSet trunk = d.trunk_parameters();
  for (const auto& p : trunk.parameters) {
    EXPECT_EQ(all.find(p.name).impl(), p.tensor.impl());
  }
  for (int i = 0; i < 3; ++i) {
    for (const auto& p : d.branch_parameters(i).parameters) {
      EXPECT_EQ(p.name.rfind("D.sub" + std::to_string(i) + ".", 0), 0u);
    }
  }
}

TEST_F(Disc64, SigmoidHeadLimits) {
  std::mt19937_64 rng(6);
  Discriminator d(small(), 6);
  for (double bias : {30.0, -30.0}) {
    for (int i = 0; i < 3; ++i) {
      ParameterSet head = d.branch_parameters(i);
      Tensor w = head.find("D.sub" + std::to_string(i) + ".head.weight");
      Tensor b = head.find("D.sub" + std::to_string(i) + ".head.bias");
      for (double& v : w.mutable_data()) v = 0;
      b.mutable_data()[0] = bias;
    }
    auto out = d.forward(rand_tensor({1, 1, 32, 32}, rng, 0, 1), rand_tensor({1, 3, 32, 32}, rng));
    for (const auto& s : out.scores) {
      if (bias > 0) {
        EXPECT_NEAR(s.item(), 1.0, 1e-12);
      } else {
        EXPECT_NEAR(s.item(), 0.0, 1e-12);
      }
    }
  }
}

TEST_F(Disc64, EmpiricalReceptiveField) {
  DiscriminatorConfig c = small(32);
  c.n_d = 1;
  c.depths = {4};
  Discriminator d(c, 7);
  std::mt19937_64 rng(7);
  Tensor cond = rand_tensor({1, 1, 32, 32}, rng, 0, 1);
  Tensor img = rand_tensor({1, 3, 32, 32}, rng);
  auto base = d.forward(cond, img);
  const int py = 13, px = 18;
  std::vector<double> bumped(img.data().begin(), img.data().end());
  bumped[1 * 1024 + py * 32 + px] += 1.0;
  auto out = d.forward(cond, Tensor::from_data(img.shape(), bumped));
  // Taps of a depth-4 branch follow layers 2, 3 and 4.
  for (int k = 0; k < 3; ++k) {
    const int layers = k + 2;
    const int64_t rf = receptive_field({layers}, 4, 2)[0];
    const int64_t jump = int64_t{1} << layers, offset = jump - 1;
    const Tensor& a = base.taps[0][k];
    const Tensor& b = out.taps[0][k];
    const int64_t ch = a.size(1), h = a.size(2), w = a.size(3);
    auto inside = [&](int64_t o, int p) {
      return p >= o * jump - offset - 1 && p <= o * jump - offset + rf;
    };
    int changed = 0;
    for (int64_t q = 0; q < ch; ++q) {
      for (int64_t oy = 0; oy < h; ++oy) {
        for (int64_t ox = 0; ox < w; ++ox) {
          const int64_t idx = (q * h + oy) * w + ox;
          if (a.data()[idx] == b.data()[idx]) continue;
          ++changed;
          EXPECT_TRUE(inside(oy, py) && inside(ox, px))
              << "tap " << k << " output (" << oy << "," << ox << ")";
        }
      }
    }
    EXPECT_GT(changed, 0) << "tap " << k;
  }
}

TEST_F(Disc64, SubnetworkGradients) {
  std::mt19937_64 rng(8);
  DiscriminatorConfig c = small(16);
  c.n_d = 1;
  c.depths = {3};
  c.base_channels = 2;
  Discriminator d(c, 8);
  Tensor cond = rand_tensor({1, 1, 16, 16}, rng, 0, 1);
  Tensor img = rand_tensor({1, 3, 16, 16}, rng);
  img.set_requires_grad(true);
  std::vector<Tensor> inputs{img};
  std::vector<std::string> names{"image"};
  for (const auto& p : d.parameters().parameters) {
    inputs.push_back(p.tensor);
    names.push_back(p.name);
  }
  auto fn = [&] {
    auto out = d.forward(cond, img);
    Tensor s = ops::sum(out.scores[0]);
    for (const auto& t : out.taps[0]) s = ops::add(s, ops::mean(ops::abs(t)));
    return s;
  };
  GradCheckOptions opts;
  opts.max_coords = 40;
  GradCheckResult r = check_gradients(fn, inputs, names, opts);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}
