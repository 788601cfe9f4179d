#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "csagan/core/gradcheck.hpp"
#include "csagan/core/ops.hpp"
#include "csagan/train/checkpoint.hpp"
#include "csagan/train/trainer.hpp"

using namespace csagan;

namespace {

class Train64 : public ::testing::Test {
 protected:
  void SetUp() override { set_precision(Precision::kF64); }
};

Tensor rand_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi, bool grad = false) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(static_cast<size_t>(shape_numel(shape)));
  for (double& x : v) x = dist(rng);
  return grad ? Tensor::parameter(std::move(shape), std::move(v))
              : Tensor::from_data(std::move(shape), std::move(v));
}

GeneratorConfig tiny_g() {
  GeneratorConfig c;
  c.base_channels = 8;
  c.n_down = 2;
  c.image_side = 16;
  return c;
}

DiscriminatorConfig tiny_d() {
  DiscriminatorConfig c;
  c.base_channels = 4;
  c.n_d = 2;
  c.image_side = 16;
  return c;
}

std::vector<Sample> tiny_data(int count = 8) {
  ToyOptions o;
  o.count = count;
  o.side = 16;
  o.seed = 3;
  o.min_pixels = 2;
  return make_toy_dataset(o, tiny_g().pyramid_scales());
}

StagePlan short_plan(int stage, int epochs) {
  StagePlan p = StagePlan::desk_default(stage);
  p.epochs = epochs;
  return p;
}

ParameterSet non_csam(TrainingState& s) {
  ParameterSet set = s.generator->backbone_parameters();
  set.append(s.discriminator->parameters());
  return set;
}

std::vector<std::string> trace_of(TrainingState& s, const std::vector<Sample>& data,
                                  const StagePlan& plan, int64_t max_steps = -1) {
  std::vector<std::string> rows;
  TrainOptions o;
  o.batch_size = 4;
  o.max_steps = max_steps;
  o.on_step = [&](const TraceRow& r, TrainingState&) { rows.push_back(format_trace_row(r)); };
  run_stage(plan, s, data, o);
  return rows;
}

}  // namespace

// ---- losses -------------------------------------------------------------

TEST(AdversarialLoss, HalfScoresGiveTwoLogHalf) {
  for (int nd = 1; nd <= 4; ++nd) {
    std::vector<double> half(nd, 0.5);
    EXPECT_NEAR(adversarial_value(half, half), 2.0 * std::log(0.5), 1e-9) << nd;
  }
}

TEST(AdversarialLoss, OptimalDiscriminatorLimit) {
  EXPECT_NEAR(adversarial_value({1 - 1e-7, 1 - 1e-7}, {1e-7, 1e-7}), 0.0, 1e-6);
}

TEST(AdversarialLoss, AveragesSubnetworks) {
  const double a = adversarial_value({0.7}, {0.2});
  const double b = adversarial_value({0.4}, {0.9});
  EXPECT_NEAR(adversarial_value({0.7, 0.4}, {0.2, 0.9}), 0.5 * (a + b), 1e-15);
}

TEST(AdversarialLoss, RejectsBadInput) {
  EXPECT_THROW(adversarial_value({1.2}, {0.5}), std::invalid_argument);
  EXPECT_THROW(adversarial_value({0.5}, {-0.1}), std::invalid_argument);
  EXPECT_THROW(adversarial_value({0.5, 0.5}, {0.5}), std::invalid_argument);
  EXPECT_THROW(adversarial_value({std::nan("")}, {0.5}), NumericError);
  EXPECT_THROW(adversarial_loss({Tensor::from_data({1}, {1.5})}, {Tensor::from_data({1}, {0.5})}),
               std::invalid_argument);
}

TEST(AdversarialLoss, FloorAppliesAtSaturation) {
  EXPECT_NEAR(adversarial_value({0.0}, {1.0}), 2.0 * std::log(1e-7), 1e-9);
}

TEST_F(Train64, TensorFormMatchesScalarForm) {
  std::mt19937_64 rng(1);
  std::vector<Tensor> real, fake;
  std::vector<double> r_mean, f_mean;
  for (int i = 0; i < 3; ++i) {
    real.push_back(rand_tensor({5}, rng, 0.05, 0.95));
    fake.push_back(rand_tensor({5}, rng, 0.05, 0.95));
  }
  double want = 0.0;
  for (int i = 0; i < 3; ++i) {
    double acc = 0.0;
    for (int b = 0; b < 5; ++b) acc += adversarial_value({real[i].data()[b]}, {fake[i].data()[b]});
    want += acc / 5.0;
  }
  EXPECT_NEAR(adversarial_loss(real, fake).item(), want / 3.0, 1e-13);
}

TEST_F(Train64, LossGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(2);
  std::vector<Tensor> real, fake;
  for (int i = 0; i < 3; ++i) {
    real.push_back(rand_tensor({4}, rng, 0.1, 0.9, true));
    fake.push_back(rand_tensor({4}, rng, 0.1, 0.9, true));
  }
  std::vector<Tensor> inputs = real;
  inputs.insert(inputs.end(), fake.begin(), fake.end());
  auto r = check_gradients([&] { return adversarial_loss(real, fake); }, inputs);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  r = check_gradients([&] { return generator_adversarial_loss(fake); }, fake);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;

  Tensor y = rand_tensor({2, 3, 4, 4}, rng, -1, 1);
  Tensor y_hat = rand_tensor({2, 3, 4, 4}, rng, -1, 1, true);
  r = check_gradients([&] { return l1_loss(y, y_hat); }, {y_hat});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;

  std::vector<std::vector<Tensor>> tf(2), tr(2);
  std::vector<Tensor> fm_inputs;
  for (int i = 0; i < 2; ++i) {
    for (int q = 0; q < 3; ++q) {
      tf[i].push_back(rand_tensor({1, 2, 3, 3}, rng, -1, 1, true));
      tr[i].push_back(rand_tensor({1, 2, 3, 3}, rng, -1, 1));
      fm_inputs.push_back(tf[i].back());
    }
  }
  r = check_gradients([&] { return feature_matching_loss(tf, tr); }, fm_inputs);
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;

  Tensor adv = Tensor::parameter({}, {0.3}), l1 = Tensor::parameter({}, {0.2}),
         fm = Tensor::parameter({}, {0.7});
  r = check_gradients([&] { return total_objective(adv, l1, fm); }, {adv, l1, fm});
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
  backward(total_objective(adv, l1, fm));
  EXPECT_NEAR(adv.grad()[0], 1.0, 1e-12);
  EXPECT_NEAR(l1.grad()[0], 100.0, 1e-12);
  EXPECT_NEAR(fm.grad()[0], 1.0, 1e-12);
}

TEST_F(Train64, L1Loss) {
  std::mt19937_64 rng(3);
  Tensor y = rand_tensor({3, 5, 5}, rng, -1, 1);
  EXPECT_EQ(l1_loss(y, y).item(), 0.0);
  EXPECT_EQ(l1_loss(Tensor::full({3, 4, 4}, 1.0), Tensor::zeros({3, 4, 4})).item(), 1.0);
  Tensor y_hat = rand_tensor({3, 5, 5}, rng, -1, 1);
  double acc = 0.0;
  for (int64_t k = 0; k < 75; ++k) acc += std::abs(y.data()[k] - y_hat.data()[k]);
  EXPECT_NEAR(l1_loss(y, y_hat).item(), acc / 75.0, 1e-12);
  EXPECT_THROW(l1_loss(y, Tensor::zeros({3, 5, 4})), DimensionError);
}

TEST_F(Train64, L1GradientSignFollowsResidual) {
  std::mt19937_64 rng(4);
  Tensor y = rand_tensor({1, 3, 4, 4}, rng, -1, 1);
  Tensor y_hat = rand_tensor({1, 3, 4, 4}, rng, -1, 1, true);
  backward(ops::scale(l1_loss(y, y_hat), 100.0));
  for (int64_t k = 0; k < y.numel(); ++k) {
    const double diff = y_hat.data()[k] - y.data()[k];
    EXPECT_EQ(std::signbit(y_hat.grad()[k]), std::signbit(diff)) << k;
    EXPECT_NEAR(std::abs(y_hat.grad()[k]), 100.0 / 48.0, 1e-12);
  }
}

TEST_F(Train64, FeatureMatching) {
  std::mt19937_64 rng(5);
  Tensor a = rand_tensor({1, 2, 3, 3}, rng, -1, 1);
  EXPECT_EQ(feature_matching_loss({{a}}, {{a}}).item(), 0.0);
  Tensor shifted = ops::add_scalar(a, 1.0);
  EXPECT_NEAR(feature_matching_loss({{shifted}}, {{a}}).item(), 1.0, 1e-15);

  std::vector<std::vector<Tensor>> tf(2), tr(2);
  const std::vector<Shape> shapes = {{2, 4, 8, 8}, {2, 8, 4, 4}, {2, 16, 2, 2}};
  for (int i = 0; i < 2; ++i) {
    for (const auto& s : shapes) {
      tf[i].push_back(rand_tensor(s, rng, -1, 1));
      tr[i].push_back(rand_tensor(s, rng, -1, 1));
    }
  }
  double want = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int q = 0; q < 3; ++q) {
      double acc = 0.0;
      const int64_t n = tf[i][q].numel();
      for (int64_t k = 0; k < n; ++k) acc += std::abs(tf[i][q].data()[k] - tr[i][q].data()[k]);
      want += acc / static_cast<double>(n);
    }
  }
  EXPECT_NEAR(feature_matching_loss(tf, tr).item(), want / 6.0, 1e-10);

  EXPECT_THROW(feature_matching_loss(tf, {tr[0]}), DimensionError);
  auto bad = tr;
  bad[1].pop_back();
  EXPECT_THROW(feature_matching_loss(tf, bad), DimensionError);
  bad = tr;
  bad[0][1] = Tensor::zeros({2, 8, 4, 2});
  EXPECT_THROW(feature_matching_loss(tf, bad), DimensionError);
}

TEST(TotalObjective, Affine) {
  EXPECT_EQ(total_objective(0, 0, 0), 0.0);
  EXPECT_NEAR(total_objective(0, 0.01, 0), 1.0, 1e-12);
  LossWeights w2;
  w2.mu = 2.0;
  EXPECT_EQ(total_objective(0.3, 0.02, 0, w2), total_objective(0.3, 0.02, 0));
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-2, 2);
  for (int t = 0; t < 20; ++t) {
    const double a = u(rng), l = u(rng), f = u(rng), d = u(rng);
    EXPECT_NEAR(total_objective(a + d, l, f) - total_objective(a, l, f), d, 1e-12);
    EXPECT_NEAR(total_objective(a, l + d, f) - total_objective(a, l, f), 100.0 * d, 1e-10);
    EXPECT_NEAR(total_objective(a, l, f + d) - total_objective(a, l, f), d, 1e-12);
  }
  EXPECT_THROW(total_objective(std::nan(""), 0, 0), NumericError);
  EXPECT_THROW(total_objective(0, INFINITY, 0), NumericError);
}

// ---- schedule -----------------------------------------------------------

TEST(StagePlanTest, Defaults) {
  const StagePlan s1 = StagePlan::paper_default(1), s2 = StagePlan::paper_default(2),
                  s3 = StagePlan::paper_default(3);
  EXPECT_EQ(s1.epochs, 100);
  EXPECT_EQ(s2.epochs, 100);
  EXPECT_EQ(s3.epochs, 50);
  EXPECT_EQ(s1.lr_g, 1e-4);
  EXPECT_EQ(s1.lr_d, 4e-4);
  EXPECT_EQ(s3.lr_g, 1e-5);
  EXPECT_EQ(s3.lr_d, 4e-5);
  EXPECT_EQ(StagePlan::desk_default(1).epochs, 5);
  EXPECT_EQ(StagePlan::desk_default(3).epochs, 3);
}

TEST(StagePlanTest, DecayAtHalfway) {
  const StagePlan p = StagePlan::paper_default(1);
  EXPECT_EQ(p.lr_g_at(49), 1e-4);
  EXPECT_NEAR(p.lr_g_at(50), 1e-5, 1e-18);
  EXPECT_NEAR(p.lr_d_at(50), 4e-5, 1e-18);
  for (int epochs : {1, 2, 3, 5, 7, 100}) {
    StagePlan q = p;
    q.epochs = epochs;
    EXPECT_EQ(q.decay_epoch(), epochs / 2);
  }
  StagePlan bad = p;
  bad.decay_factor = 0;
  EXPECT_THROW(bad.validate(), std::invalid_argument);
}

// ---- loop ---------------------------------------------------------------

TEST(EpochBatches, DeterministicPartition) {
  auto a = epoch_batches(9, 1, 0, 21, 8), b = epoch_batches(9, 1, 0, 21, 8);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[2].size(), 5u);
  std::vector<int> seen(21, 0);
  for (const auto& batch : a)
    for (size_t i : batch) ++seen[i];
  for (int s : seen) EXPECT_EQ(s, 1);
  EXPECT_NE(epoch_batches(9, 1, 1, 21, 8), a);
  EXPECT_NE(epoch_batches(9, 2, 0, 21, 8), a);
}

TEST_F(Train64, StageOrderEnforced) {
  TrainingState s(tiny_g(), tiny_d(), 1);
  auto data = tiny_data();
  EXPECT_THROW(run_stage(short_plan(2, 1), s, data), std::invalid_argument);
}

TEST_F(Train64, OptimizerViews) {
  TrainingState s(tiny_g(), tiny_d(), 1);
  for (int stage = 1; stage <= 3; ++stage) {
    prepare_stage(s, stage);
    size_t csam = 0;
    for (const auto& p : s.opt_g.parameters()) {
      EXPECT_EQ(p.name.rfind("G.", 0), 0u);
      if (p.name.rfind("G.csam.", 0) == 0) ++csam;
    }
    for (const auto& p : s.opt_d.parameters()) EXPECT_EQ(p.name.rfind("D.", 0), 0u);
    if (stage == 1) {
      EXPECT_EQ(csam, 0u);
    }
    if (stage == 2) {
      EXPECT_EQ(csam, s.opt_g.parameters().size());
    }
    if (stage == 2) {
      EXPECT_TRUE(s.opt_d.parameters().empty());
    }
    if (stage == 3) {
      EXPECT_EQ(s.opt_g.parameters().size(), s.generator->parameters().parameters.size());
    }
  }
}

TEST_F(Train64, StageContract) {
  TrainingState s(tiny_g(), tiny_d(), 2);
  auto data = tiny_data();
  const uint64_t csam0 = hash_parameters(s.generator->csam_parameters());
  auto rows1 = trace_of(s, data, short_plan(1, 2));
  EXPECT_EQ(rows1.size(), 4u);
  EXPECT_EQ(s.stage, 2);
  EXPECT_EQ(hash_parameters(s.generator->csam_parameters()), csam0);

  // Stage-1 model evaluated on the first stage-2 batch.
  Batch first = make_batch(data, epoch_batches(s.seed, 2, 0, data.size(), 4)[0]);
  s.generator->set_csam_active(false);
  GeneratorLosses before = evaluate_generator(s, first);

  const uint64_t frozen = hash_parameters(non_csam(s));
  std::vector<TraceRow> rows2;
  TrainOptions o;
  o.batch_size = 4;
  o.on_step = [&](const TraceRow& r, TrainingState&) { rows2.push_back(r); };
  ASSERT_EQ(run_stage(short_plan(2, 2), s, data, o), StageResult::kCompleted);
  EXPECT_EQ(hash_parameters(non_csam(s)), frozen);
  EXPECT_NE(hash_parameters(s.generator->csam_parameters()), csam0);
  ASSERT_FALSE(rows2.empty());
  const double after =
      total_objective(rows2[0].loss_g_adv, rows2[0].loss_l1, rows2[0].loss_fm);
  EXPECT_NEAR(after, before.total, 1e-9);

  const uint64_t g2 = hash_parameters(s.generator->parameters());
  const uint64_t d2 = hash_parameters(s.discriminator->parameters());
  auto rows3 = trace_of(s, data, short_plan(3, 1));
  EXPECT_EQ(rows3.size(), 2u);
  EXPECT_NE(hash_parameters(s.generator->parameters()), g2);
  EXPECT_NE(hash_parameters(s.discriminator->parameters()), d2);
  EXPECT_EQ(s.stage, 4);
}

TEST_F(Train64, LearningRateDropsAtHalfway) {
  TrainingState s(tiny_g(), tiny_d(), 3);
  auto data = tiny_data();
  std::vector<TraceRow> rows;
  TrainOptions o;
  o.batch_size = 4;
  o.on_step = [&](const TraceRow& r, TrainingState&) { rows.push_back(r); };
  run_stage(short_plan(1, 4), s, data, o);
  ASSERT_EQ(rows.size(), 8u);
  for (size_t i = 0; i < rows.size(); ++i) {
    const double f = i < 4 ? 1.0 : 0.1;
    EXPECT_NEAR(rows[i].lr_g, 1e-4 * f, 1e-18);
    EXPECT_NEAR(rows[i].lr_d, 4e-4 * f, 1e-18);
  }
}

TEST_F(Train64, DeterministicTraces) {
  auto data = tiny_data();
  TrainingState a(tiny_g(), tiny_d(), 4), b(tiny_g(), tiny_d(), 4);
  EXPECT_EQ(trace_of(a, data, short_plan(1, 3)), trace_of(b, data, short_plan(1, 3)));
}

TEST_F(Train64, NanHaltsWithoutUpdate) {
  auto data = tiny_data();
  TrainingState s(tiny_g(), tiny_d(), 5);
  Tensor w = s.generator->parameters().find("G.rgb.bias");
  w.mutable_data()[0] = std::nan("");
  const uint64_t d0 = hash_parameters(s.discriminator->parameters());
  TrainOptions o;
  o.batch_size = 4;
  EXPECT_EQ(run_stage(short_plan(1, 1), s, data, o), StageResult::kHalted);
  EXPECT_TRUE(s.halted);
  EXPECT_EQ(s.step, 0);
  EXPECT_EQ(hash_parameters(s.discriminator->parameters()), d0);
}

TEST_F(Train64, GeneratorL1Decreases) {
  auto data = tiny_data(8);
  TrainingState s(tiny_g(), tiny_d(), 6);
  const double l0 = mean_l1(*s.generator, data);
  StagePlan p = short_plan(1, 20);
  p.decay_at = 1.0;
  p.lr_g = 1e-3;
  TrainOptions o;
  o.batch_size = 4;
  run_stage(p, s, data, o);
  EXPECT_LT(mean_l1(*s.generator, data), l0);
}

// ---- checkpoint ---------------------------------------------------------

TEST_F(Train64, CheckpointRoundTripIsBitExact) {
  auto data = tiny_data();
  TrainingState s(tiny_g(), tiny_d(), 7);
  s.config_text = "seed = 7\n";
  trace_of(s, data, short_plan(1, 1));
  const std::string bytes = encode_checkpoint(s);
  CheckpointData d = decode_checkpoint(bytes);
  TrainingState fresh(tiny_g(), tiny_d(), 99);
  apply_checkpoint(d, fresh);
  EXPECT_EQ(encode_checkpoint(fresh), bytes);
  EXPECT_EQ(fresh.config_text, "seed = 7\n");
  EXPECT_EQ(fresh.step, 2);
  EXPECT_EQ(fresh.stage, 2);
  EXPECT_EQ(hash_parameters(fresh.generator->parameters()),
            hash_parameters(s.generator->parameters()));
}

TEST_F(Train64, CheckpointRejectsDamage) {
  TrainingState s(tiny_g(), tiny_d(), 8);
  const std::string bytes = encode_checkpoint(s);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, bytes.size() - 1)), CheckpointError);
  EXPECT_THROW(decode_checkpoint(bytes.substr(0, 10)), CheckpointError);
  std::string wrong_version = bytes;
  wrong_version[4] = 2;
  try {
    decode_checkpoint(wrong_version);
    FAIL() << "version mismatch accepted";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  EXPECT_THROW(decode_checkpoint(flipped), CheckpointError);
}

TEST_F(Train64, CheckpointRejectsOtherModelWithoutTouchingState) {
  TrainingState s(tiny_g(), tiny_d(), 9);
  CheckpointData d = decode_checkpoint(encode_checkpoint(s));
  GeneratorConfig wider = tiny_g();
  wider.base_channels = 16;
  TrainingState other(wider, tiny_d(), 9);
  const uint64_t before = hash_parameters(other.discriminator->parameters());
  EXPECT_THROW(apply_checkpoint(d, other), CheckpointError);
  EXPECT_EQ(hash_parameters(other.discriminator->parameters()), before);
}

TEST_F(Train64, ResumeMatchesUninterruptedRun) {
  auto data = tiny_data();
  TrainingState whole(tiny_g(), tiny_d(), 10);
  auto full = trace_of(whole, data, short_plan(1, 3));
  auto rest = trace_of(whole, data, short_plan(2, 1));
  full.insert(full.end(), rest.begin(), rest.end());

  TrainingState part(tiny_g(), tiny_d(), 10);
  auto first = trace_of(part, data, short_plan(1, 3), 3);
  const auto path = std::filesystem::temp_directory_path() / "csagan_resume_test.ckpt";
  save_checkpoint(path, part);
  TrainingState resumed(tiny_g(), tiny_d(), 0);
  apply_checkpoint(read_checkpoint(path), resumed);
  std::filesystem::remove(path);
  auto second = trace_of(resumed, data, short_plan(1, 3));
  auto third = trace_of(resumed, data, short_plan(2, 1));
  first.insert(first.end(), second.begin(), second.end());
  first.insert(first.end(), third.begin(), third.end());
  EXPECT_EQ(first, full);
}

TEST_F(Train64, TraceWriterAppends) {
  const auto path = std::filesystem::temp_directory_path() / "csagan_trace_test.csv";
  std::filesystem::remove(path);
  {
    TraceWriter w(path);
    w.append({0, 1, 1.5, 0.5, 0.25, 0.125, 1e-4, 4e-4});
  }
  TraceWriter again(path);
  again.append({1, 1, 1, 1, 1, 1, 1, 1});
  std::ifstream in(path);
  std::string line;
  std::vector<std::string> lines;
  while (std::getline(in, line)) lines.push_back(line);
  std::filesystem::remove(path);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], kTraceHeader);
  EXPECT_EQ(lines[1], "0,1,1.5,0.5,0.25,0.125,0.0001,0.00040000000000000002");
}

// ---- toy data -----------------------------------------------------------

TEST(ToyData, DeterministicAndLabelled) {
  ToyOptions o;
  o.count = 12;
  o.seed = 4;
  auto scales = std::vector<int>{1, 2, 4, 8};
  auto a = make_toy_dataset(o, scales), b = make_toy_dataset(o, scales);
  ASSERT_EQ(a.size(), 12u);
  for (size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].target, b[i].target);
    EXPECT_GE(a[i].label, 0);
    EXPECT_LT(a[i].label, kToyClasses);
    EXPECT_EQ(a[i].target.size(), 3u * 32 * 32);
    EXPECT_EQ(a[i].pyramid.levels.size(), 4u);
    for (double v : a[i].target) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(ToyData, HigherThresholdDropsDetail) {
  // Line pixels farther than 2 from the outline-only line map are detail.
  auto detail_pixels = [](int index, double tau) {
    ProbEdgeMap plain = detect_edges(draw_toy_shape(index, 32, 5, false));
    DistanceField outline = distance_field(extract_linemap(plain, 0.2, 4));
    LineMap lines = extract_linemap(detect_edges(draw_toy_shape(index, 32, 5, true)), tau, 4);
    int n = 0;
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 32; ++x)
        if (lines.at(y, x) && outline.at(y, x) > 2.0) ++n;
    return n;
  };
  int with_detail = 0;
  for (int i = 0; i < 10; ++i) {
    const int low = detail_pixels(i, 0.2), high = detail_pixels(i, 0.6);
    EXPECT_LE(high, low) << "shape " << i;
    if (low > 0) ++with_detail;
  }
  EXPECT_GE(with_detail, 8);
}

TEST(ToyData, TargetImageRoundTrip) {
  Image img = draw_toy_shape(0, 16, 1, true);
  auto t = image_to_target(img);
  Image back = target_to_image(t, 16);
  for (size_t k = 0; k < img.pixels.size(); ++k) EXPECT_NEAR(back.pixels[k], img.pixels[k], 1e-6);
}
