#include "csagan/harness/gradient_suite.hpp"

#include <functional>
#include <random>

#include "csagan/core/ops.hpp"
#include "csagan/core/rng.hpp"
#include "csagan/core/spectral.hpp"
#include "csagan/model/csam.hpp"
#include "csagan/model/discriminator.hpp"
#include "csagan/model/generator.hpp"
#include "csagan/train/losses.hpp"

namespace csagan {

namespace {

class PrecisionGuard {
 public:
  explicit PrecisionGuard(Precision p) : saved_(precision()) { set_precision(p); }
  ~PrecisionGuard() { set_precision(saved_); }

 private:
  Precision saved_;
};

Tensor random_param(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(static_cast<size_t>(shape_numel(shape)));
  for (double& v : data) v = dist(rng);
  return Tensor::parameter(std::move(shape), std::move(data));
}

Tensor random_const(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = random_param(std::move(shape), rng, lo, hi);
  t.set_requires_grad(false);
  return t;
}

struct Case {
  std::string name;
  std::function<Tensor()> fn;
  std::vector<Tensor> inputs;
  std::vector<std::string> names;
  int max_coords = 0;
};

void randomize(Tensor t, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  for (double& v : t.mutable_data()) v = dist(rng);
}

}  // namespace

std::vector<GradientCase> run_gradient_suite(uint64_t seed) {
  PrecisionGuard guard(Precision::kF64);
  auto rng = make_rng(seed, "gradient-suite");
  std::vector<Case> cases;

  Tensor x = random_param({2, 3, 4, 4}, rng);
  Tensor y = random_param({2, 3, 4, 4}, rng);
  Tensor pos = random_param({2, 3, 4, 4}, rng, 0.2, 2.0);
  Tensor bias = random_param({3}, rng);
  Tensor s = random_param({1}, rng);
  Tensor m = random_param({3, 5, 4}, rng);
  Tensor n = random_param({3, 4, 6}, rng);
  Tensor probe = random_const({2, 3, 4, 4}, rng);
  auto weighted = [probe](const Tensor& t) { return ops::mean(ops::mul(t, probe)); };
  auto op = [&](std::string name, std::function<Tensor()> fn, std::vector<Tensor> in) {
    cases.push_back({"op." + std::move(name), std::move(fn), std::move(in), {}, 0});
  };
  op("add", [=] { return weighted(ops::add(x, y)); }, {x, y});
  op("sub", [=] { return weighted(ops::sub(x, y)); }, {x, y});
  op("mul", [=] { return weighted(ops::mul(x, y)); }, {x, y});
  op("scale", [=] { return weighted(ops::scale(x, -1.7)); }, {x});
  op("add_scalar", [=] { return weighted(ops::mul(ops::add_scalar(x, 0.3), x)); }, {x});
  op("one_minus", [=] { return weighted(ops::mul(ops::one_minus(x), y)); }, {x, y});
  op("mul_scalar_tensor", [=] { return weighted(ops::mul_scalar_tensor(x, s)); }, {x, s});
  op("add_scaled", [=] { return weighted(ops::add_scaled(x, s, y)); }, {x, s, y});
  op("bias_add", [=] { return weighted(ops::bias_add(x, bias)); }, {x, bias});
  {
    Tensor gain = random_param({3}, rng, 0.5, 1.5);
    op("instance_norm", [=] { return weighted(ops::instance_norm(x, gain, bias)); }, {x, gain, bias});
  }
  op("relu", [=] { return weighted(ops::relu(x)); }, {x});
  op("leaky_relu", [=] { return weighted(ops::leaky_relu(x, 0.2)); }, {x});
  op("sigmoid", [=] { return weighted(ops::sigmoid(x)); }, {x});
  op("tanh", [=] { return weighted(ops::tanh(x)); }, {x});
  op("abs", [=] { return weighted(ops::abs(x)); }, {x});
  op("log", [=] { return weighted(ops::log(pos)); }, {pos});
  op("log_clamped", [=] { return weighted(ops::log_clamped(pos, 1e-7)); }, {pos});
  op("sum", [=] { return ops::sum(ops::mul(x, probe)); }, {x});
  op("mean_per_sample",
     [=] { return ops::sum(ops::mul(ops::mean_per_sample(ops::mul(x, x)), ops::mean_per_sample(y))); },
     {x, y});
  op("concat", [=] { return ops::mean(ops::mul(ops::concat({x, y}, 1), ops::concat({y, x}, 1))); },
     {x, y});
  op("upsample_nearest", [=] { return ops::mean(ops::tanh(ops::upsample_nearest(ops::mul(x, y), 2))); },
     {x, y});
  op("avg_pool", [=] { return ops::mean(ops::tanh(ops::avg_pool(ops::mul(x, y), 2))); }, {x, y});
  op("matmul", [=] { return ops::mean(ops::tanh(ops::matmul(m, n))); }, {m, n});
  op("transpose", [=] { return ops::mean(ops::matmul(ops::transpose(m), ops::tanh(m))); }, {m});
  op("softmax_rows", [=] { return ops::mean(ops::mul(ops::softmax_rows(n), n)); }, {n});
  op("reshape", [=] { return ops::mean(ops::matmul(ops::reshape(m, {3, 4, 5}), ops::tanh(m))); }, {m});
  {
    Tensor in = random_param({2, 3, 7, 7}, rng);
    Tensor k3 = random_param({4, 3, 3, 3}, rng);
    Tensor k4 = random_param({2, 3, 4, 4}, rng);
    Tensor p3 = random_const({2, 4, 7, 7}, rng);
    Tensor p4 = random_const({2, 2, 3, 3}, rng);
    op("conv2d", [=] { return ops::mean(ops::mul(ops::conv2d(in, k3, 1, 1), p3)); }, {in, k3});
    op("conv2d_strided", [=] { return ops::mean(ops::mul(ops::conv2d(in, k4, 2, 1), p4)); }, {in, k4});
  }
  {
    Tensor w = random_param({4, 2, 3, 3}, rng);
    Tensor p = random_const({4, 2, 3, 3}, rng);
    SpectralState st = init_spectral_state(w, rng, 3);
    op("spectral_normalize", [=] { return ops::mean(ops::mul(spectral_normalize(w, st, 0).weight, p)); },
       {w});
  }

  {
    const int c = 4, h = 6, wd = 6;
    Csam csam("csam", c, derive_seed(seed, "suite-csam"));
    randomize(csam.gamma, rng, 0.5, 1.0);
    Tensor a = random_param({c, h, wd}, rng);
    Tensor cond = random_const({1, h, wd}, rng, 0.0, 1.0);
    Tensor p = random_const({c, h, wd}, rng);
    CsamWeights weights{csam.query.weight, csam.key.weight, csam.value.weight, csam.gamma};
    cases.push_back({"csam",
                     [=] { return ops::sum(ops::mul(csam_forward(a, cond, weights), p)); },
                     {a, weights.query, weights.key, weights.value, weights.gamma},
                     {"a", "W_f", "W_g", "W_h", "gamma"},
                     0});
  }
  {
    auto mru = std::make_shared<Mru>("mru", 3, 4, Activation::kLeakyRelu, derive_seed(seed, "suite-mru"));
    for (Tensor* b : {&mru->conv_m.bias, &mru->conv_n.bias, &mru->proj.bias}) {
      randomize(*b, rng, -0.5, 0.5);
    }
    randomize(mru->norm_z.gain, rng, 0.5, 1.5);
    randomize(mru->norm_z.shift, rng, -0.5, 0.5);
    Tensor in = random_param({3, 5, 5}, rng);
    Tensor cond = random_const({1, 5, 5}, rng, 0.0, 1.0);
    Tensor p = random_const({4, 5, 5}, rng);
    cases.push_back({"mru",
                     [=] { return ops::sum(ops::mul(mru->forward(in, cond, {}), p)); },
                     {in, mru->conv_m.weight, mru->conv_m.bias, mru->conv_n.weight, mru->conv_n.bias,
                      mru->conv_z.weight, mru->norm_z.gain, mru->norm_z.shift,
                      mru->proj.weight, mru->proj.bias},
                     {"x", "m.weight", "m.bias", "n.weight", "n.bias", "z.weight",
                      "z.norm.gain", "z.norm.shift", "proj.weight", "proj.bias"},
                     0});
  }
  {
    DiscriminatorConfig dc;
    dc.n_d = 1;
    dc.shared_depth = 2;
    dc.depths = {4};
    dc.base_channels = 2;
    dc.image_side = 16;
    auto d = std::make_shared<Discriminator>(dc, derive_seed(seed, "suite-disc"));
    Tensor cond = random_const({1, 1, 16, 16}, rng, 0.0, 1.0);
    Tensor img = random_param({1, 3, 16, 16}, rng);
    Case cs{"discriminator_subnetwork",
            [=] {
              auto out = d->forward(cond, img);
              Tensor total = ops::sum(out.scores[0]);
              for (const auto& t : out.taps[0]) total = ops::add(total, ops::mean(ops::abs(t)));
              return total;
            },
            {img},
            {"image"},
            40};
    for (const auto& p : d->parameters().parameters) {
      cs.inputs.push_back(p.tensor);
      cs.names.push_back(p.name);
    }
    cases.push_back(std::move(cs));
  }

  {
    std::vector<Tensor> real_logits, fake_logits;
    for (int i = 0; i < 3; ++i) {
      real_logits.push_back(random_param({4}, rng, -2.0, 2.0));
      fake_logits.push_back(random_param({4}, rng, -2.0, 2.0));
    }
    auto scores = [](const std::vector<Tensor>& logits) {
      std::vector<Tensor> out;
      for (const auto& l : logits) out.push_back(ops::sigmoid(l));
      return out;
    };
    std::vector<Tensor> all = real_logits;
    all.insert(all.end(), fake_logits.begin(), fake_logits.end());
    cases.push_back({"loss.adversarial",
                     [=] { return adversarial_loss(scores(real_logits), scores(fake_logits)); }, all,
                     {}, 0});
    cases.push_back({"loss.generator_adversarial",
                     [=] { return generator_adversarial_loss(scores(fake_logits)); }, fake_logits, {},
                     0});
    Tensor yt = random_param({2, 3, 5, 5}, rng), yh = random_param({2, 3, 5, 5}, rng);
    cases.push_back({"loss.l1", [=] { return l1_loss(yt, yh); }, {yt, yh}, {}, 0});
    std::vector<std::vector<Tensor>> tf(2), tr(2);
    std::vector<Tensor> flat;
    for (int i = 0; i < 2; ++i) {
      for (int q = 0; q < 3; ++q) {
        tf[i].push_back(random_param({2, 2 + q, 4 - q, 4 - q}, rng));
        tr[i].push_back(random_param({2, 2 + q, 4 - q, 4 - q}, rng));
        flat.push_back(tf[i].back());
        flat.push_back(tr[i].back());
      }
    }
    cases.push_back({"loss.feature_matching", [=] { return feature_matching_loss(tf, tr); }, flat, {}, 0});
    cases.push_back({"loss.total",
                     [=] {
                       return total_objective(generator_adversarial_loss(scores(fake_logits)),
                                              l1_loss(yt, yh), feature_matching_loss(tf, tr));
                     },
                     [&] {
                       std::vector<Tensor> in = fake_logits;
                       in.push_back(yh);
                       in.push_back(tf[0][0]);
                       return in;
                     }(),
                     {}, 0});
  }

  std::vector<GradientCase> results;
  for (auto& c : cases) {
    GradCheckOptions opts;
    opts.max_coords = c.max_coords;
    results.push_back({c.name, check_gradients(c.fn, c.inputs, c.names, opts)});
  }
  return results;
}

}  // namespace csagan
