#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "csagan/core/optim.hpp"
#include "csagan/model/discriminator.hpp"
#include "csagan/model/generator.hpp"
#include "csagan/train/data.hpp"
#include "csagan/train/losses.hpp"

namespace csagan {

struct StagePlan {
  int stage = 1;
  int epochs = 5;
  double lr_g = 1e-4;
  double lr_d = 4e-4;
  double decay_at = 0.5;
  double decay_factor = 0.1;

  // Full-schedule defaults: 100/100/50 epochs with the stage-3 rates cut
  // tenfold.
  static StagePlan paper_default(int stage);
  // Desk-scale defaults: 5/5/3 epochs, same rates.
  static StagePlan desk_default(int stage);

  // First epoch (0-based) running at the decayed rate.
  int decay_epoch() const;
  double lr_g_at(int epoch) const;
  double lr_d_at(int epoch) const;
  void validate() const;
  bool operator==(const StagePlan&) const = default;
};

struct TrainingState {
  std::unique_ptr<Generator> generator;
  std::unique_ptr<Discriminator> discriminator;
  Adam opt_g;
  Adam opt_d;
  int stage = 1;  // 4 once stage 3 has finished
  int epoch = 0;
  int64_t batch_in_epoch = 0;
  int64_t step = 0;
  uint64_t seed = 0;
  std::string config_text;  // serialized run configuration
  bool halted = false;

  TrainingState() = default;
  TrainingState(const GeneratorConfig& g, const DiscriminatorConfig& d, uint64_t seed);
};

struct TraceRow {
  int64_t step = 0;
  int stage = 0;
  double loss_d = 0, loss_g_adv = 0, loss_l1 = 0, loss_fm = 0;
  double lr_g = 0, lr_d = 0;
};

constexpr const char* kTraceHeader = "step,stage,loss_D,loss_G_adv,loss_L1,loss_FM,lr_G,lr_D";
std::string format_trace_row(const TraceRow& row);

struct GeneratorLosses {
  double adv = 0, l1 = 0, fm = 0, total = 0;
  double loss_d = 0;  // discriminator loss on the same forward passes
};

struct TrainOptions {
  int batch_size = 8;
  LossWeights weights;
  // Stop (resumably) once the global step reaches this value; < 0 disables.
  int64_t max_steps = -1;
  // Called after every completed step.
  std::function<void(const TraceRow&, TrainingState&)> on_step;
};

enum class StageResult { kCompleted, kStopped, kHalted };

// Per batch: one discriminator step (skipped in stage 2, where the
// discriminator is frozen) then one generator step. Progress is tracked in
// the state so an interrupted stage resumes at the next batch.
StageResult run_stage(const StagePlan& plan, TrainingState& state, const std::vector<Sample>& data,
                      const TrainOptions& options = {});

// Configures CSAM activity, trainable sets and optimizer views for a stage.
void prepare_stage(TrainingState& state, int stage);

// Batch order for one epoch; depends only on (seed, stage, epoch).
std::vector<std::vector<size_t>> epoch_batches(uint64_t seed, int stage, int epoch, size_t count,
                                               int batch_size);

// Generator-side losses without any update or spectral-vector change.
GeneratorLosses evaluate_generator(TrainingState& state, const Batch& batch,
                                   const LossWeights& weights = {});

// Mean L1 between generator output and target over a sample set.
double mean_l1(Generator& generator, const std::vector<Sample>& samples, int batch_size = 8);

// FNV-1a over names and raw parameter bytes.
uint64_t hash_parameters(const ParameterSet& set);

// Appends rows to a CSV file, writing the header when the file is new.
class TraceWriter {
 public:
  explicit TraceWriter(std::filesystem::path path);
  void append(const TraceRow& row);

 private:
  std::filesystem::path path_;
};

}  // namespace csagan
