#include "csagan/train/trainer.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <stdexcept>

#include "csagan/core/ops.hpp"
#include "csagan/core/rng.hpp"

namespace csagan {

StagePlan StagePlan::paper_default(int stage) {
  StagePlan p;
  p.stage = stage;
  p.epochs = stage == 3 ? 50 : 100;
  p.lr_g = stage == 3 ? 1e-5 : 1e-4;
  p.lr_d = stage == 3 ? 4e-5 : 4e-4;
  return p;
}

StagePlan StagePlan::desk_default(int stage) {
  StagePlan p = paper_default(stage);
  p.epochs = stage == 3 ? 3 : 5;
  return p;
}

int StagePlan::decay_epoch() const {
  return static_cast<int>(std::floor(decay_at * epochs + 1e-9));
}

double StagePlan::lr_g_at(int epoch) const {
  return epoch >= decay_epoch() ? lr_g * decay_factor : lr_g;
}

double StagePlan::lr_d_at(int epoch) const {
  return epoch >= decay_epoch() ? lr_d * decay_factor : lr_d;
}

void StagePlan::validate() const {
  if (stage < 1 || stage > 3) throw std::invalid_argument("stage must be 1, 2 or 3");
  if (epochs < 1) throw std::invalid_argument("stage epochs must be >= 1");
  if (!(lr_g > 0) || !(lr_d > 0)) throw std::invalid_argument("learning rates must be > 0");
  if (!(decay_at >= 0 && decay_at <= 1)) throw std::invalid_argument("decay_at must be in [0, 1]");
  if (!(decay_factor > 0 && decay_factor <= 1)) {
    throw std::invalid_argument("decay_factor must be in (0, 1]");
  }
}

TrainingState::TrainingState(const GeneratorConfig& g, const DiscriminatorConfig& d,
                             uint64_t master_seed)
    : generator(std::make_unique<Generator>(g, master_seed)),
      discriminator(std::make_unique<Discriminator>(d, master_seed)),
      seed(master_seed) {
  if (g.image_side != d.image_side) {
    throw std::invalid_argument("generator and discriminator image_side differ");
  }
}

std::string format_trace_row(const TraceRow& r) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%" PRId64 ",%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g", r.step,
                r.stage, r.loss_d, r.loss_g_adv, r.loss_l1, r.loss_fm, r.lr_g, r.lr_d);
  return buf;
}

namespace {

void set_trainable(const ParameterSet& set, bool flag) {
  for (const auto& p : set.parameters) {
    Tensor t = p.tensor;
    t.set_requires_grad(flag);
  }
}

// Disables discriminator gradients for the duration of a generator step.
class FreezeGuard {
 public:
  explicit FreezeGuard(ParameterSet set) : set_(std::move(set)) {
    for (const auto& p : set_.parameters) previous_.push_back(p.tensor.requires_grad());
    set_trainable(set_, false);
  }
  ~FreezeGuard() {
    for (size_t i = 0; i < previous_.size(); ++i) {
      Tensor t = set_.parameters[i].tensor;
      t.set_requires_grad(previous_[i]);
    }
  }

 private:
  ParameterSet set_;
  std::vector<bool> previous_;
};

struct GeneratorPass {
  Tensor adv, l1, fm, total;
  double loss_d = 0;
};

GeneratorPass generator_pass(Discriminator& d, const Batch& batch, const Tensor& fake,
                             const LossWeights& weights) {
  DiscriminatorOutput real = d.forward(batch.cond, batch.target);
  DiscriminatorOutput gen = d.forward(batch.cond, fake);
  std::vector<std::vector<Tensor>> real_taps;
  for (const auto& taps : real.taps) {
    std::vector<Tensor> detached;
    for (const auto& t : taps) detached.push_back(t.detach());
    real_taps.push_back(std::move(detached));
  }
  GeneratorPass pass;
  pass.adv = generator_adversarial_loss(gen.scores);
  pass.l1 = l1_loss(batch.target, fake);
  pass.fm = feature_matching_loss(gen.taps, real_taps);
  pass.total = total_objective(pass.adv, pass.l1, pass.fm, weights);
  std::vector<Tensor> real_scores, fake_scores;
  for (const auto& s : real.scores) real_scores.push_back(s.detach());
  for (const auto& s : gen.scores) fake_scores.push_back(s.detach());
  pass.loss_d = -adversarial_loss(real_scores, fake_scores).item();
  return pass;
}

bool finite(const Tensor& t) { return std::isfinite(t.item()); }

}  // namespace

void prepare_stage(TrainingState& state, int stage) {
  if (stage < 1 || stage > 3) throw std::invalid_argument("stage must be 1, 2 or 3");
  Generator& g = *state.generator;
  g.set_csam_active(stage >= 2 && g.has_csam());
  ParameterSet backbone = g.backbone_parameters();
  ParameterSet csam = g.csam_parameters();
  ParameterSet disc = state.discriminator->parameters();
  set_trainable(backbone, stage != 2);
  set_trainable(csam, stage != 1);
  set_trainable(disc, stage != 2);
  if (stage == 1) {
    state.opt_g.set_parameters(backbone.parameters);
  } else if (stage == 2) {
    state.opt_g.set_parameters(csam.parameters);
  } else {
    state.opt_g.set_parameters(g.parameters().parameters);
  }
  state.opt_d.set_parameters(stage == 2 ? std::vector<NamedParameter>{} : disc.parameters);
}

std::vector<std::vector<size_t>> epoch_batches(uint64_t seed, int stage, int epoch, size_t count,
                                               int batch_size) {
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  std::vector<size_t> order(count);
  for (size_t i = 0; i < count; ++i) order[i] = i;
  std::mt19937_64 rng =
      make_rng(seed, "epoch-order", static_cast<uint64_t>(stage) * 1000000u + epoch);
  for (size_t i = count; i > 1; --i) {
    std::uniform_int_distribution<size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  std::vector<std::vector<size_t>> batches;
  for (size_t start = 0; start < count; start += batch_size) {
    const size_t end = std::min(count, start + static_cast<size_t>(batch_size));
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

GeneratorLosses evaluate_generator(TrainingState& state, const Batch& batch,
                                   const LossWeights& weights) {
  Tensor fake = state.generator->forward(batch.levels);
  GeneratorPass pass = generator_pass(*state.discriminator, batch, fake, weights);
  return {pass.adv.item(), pass.l1.item(), pass.fm.item(), pass.total.item(), pass.loss_d};
}

double mean_l1(Generator& generator, const std::vector<Sample>& samples, int batch_size) {
  if (samples.empty()) throw std::invalid_argument("mean_l1: no samples");
  double acc = 0.0;
  for (size_t start = 0; start < samples.size(); start += batch_size) {
    std::vector<size_t> idx;
    for (size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) idx.push_back(i);
    Batch b = make_batch(samples, idx);
    Tensor fake = generator.forward(b.levels).detach();
    acc += l1_loss(b.target, fake).item() * static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(samples.size());
}

StageResult run_stage(const StagePlan& plan, TrainingState& state, const std::vector<Sample>& data,
                      const TrainOptions& options) {
  plan.validate();
  if (plan.stage != state.stage) {
    throw std::invalid_argument("stage " + std::to_string(plan.stage) +
                                " requested but training state is at stage " +
                                std::to_string(state.stage));
  }
  if (data.empty()) throw std::invalid_argument("run_stage: empty dataset");
  if (state.halted) return StageResult::kHalted;
  prepare_stage(state, plan.stage);
  Generator& g = *state.generator;
  Discriminator& d = *state.discriminator;
  const bool train_d = plan.stage != 2;
  ForwardContext update;
  update.update_spectral = true;

  while (state.epoch < plan.epochs) {
    const auto batches =
        epoch_batches(state.seed, plan.stage, state.epoch, data.size(), options.batch_size);
    const double lr_g = plan.lr_g_at(state.epoch), lr_d = plan.lr_d_at(state.epoch);
    while (state.batch_in_epoch < static_cast<int64_t>(batches.size())) {
      if (options.max_steps >= 0 && state.step >= options.max_steps) return StageResult::kStopped;
      Batch batch = make_batch(data, batches[static_cast<size_t>(state.batch_in_epoch)]);
      TraceRow row;
      row.step = state.step;
      row.stage = plan.stage;
      row.lr_g = lr_g;
      row.lr_d = lr_d;
      try {
        GenerateOptions gen_opts;
        gen_opts.ctx = update;
        Tensor fake = g.forward(batch.levels, gen_opts);

        if (train_d) {
          DiscriminatorOutput real = d.forward(batch.cond, batch.target, update);
          DiscriminatorOutput gen = d.forward(batch.cond, fake.detach());
          Tensor loss_d = ops::scale(adversarial_loss(real.scores, gen.scores), -1.0);
          if (!finite(loss_d)) throw NumericError("non-finite discriminator loss");
          row.loss_d = loss_d.item();
          state.opt_d.zero_grad();
          backward(loss_d);
          state.opt_d.step(lr_d);
        }

        GeneratorPass pass;
        {
          FreezeGuard freeze(d.parameters());
          pass = generator_pass(d, batch, fake, options.weights);
          if (!train_d) row.loss_d = pass.loss_d;
          row.loss_g_adv = pass.adv.item();
          row.loss_l1 = pass.l1.item();
          row.loss_fm = pass.fm.item();
          state.opt_g.zero_grad();
          backward(pass.total);
        }
        state.opt_g.step(lr_g);
      } catch (const NumericError& e) {
        std::fprintf(stderr, "training halted at step %" PRId64 ": %s\n", state.step, e.what());
        state.halted = true;
        return StageResult::kHalted;
      }
      ++state.batch_in_epoch;
      ++state.step;
      if (options.on_step) options.on_step(row, state);
    }
    ++state.epoch;
    state.batch_in_epoch = 0;
  }
  ++state.stage;
  state.epoch = 0;
  state.batch_in_epoch = 0;
  return StageResult::kCompleted;
}

uint64_t hash_parameters(const ParameterSet& set) {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&](const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      h ^= p[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : set.parameters) {
    mix(p.name.data(), p.name.size());
    mix(p.tensor.data().data(), p.tensor.data().size_bytes());
  }
  return h;
}

TraceWriter::TraceWriter(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  if (!std::filesystem::exists(path_, ec) || std::filesystem::file_size(path_, ec) == 0) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw std::runtime_error("cannot open trace file " + path_.string());
    out << kTraceHeader << '\n';
  }
}

void TraceWriter::append(const TraceRow& row) {
  std::ofstream out(path_, std::ios::app);
  if (!out) throw std::runtime_error("cannot append to trace file " + path_.string());
  out << format_trace_row(row) << '\n';
}

}  // namespace csagan
