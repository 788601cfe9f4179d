#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "csagan/harness/config.hpp"
#include "csagan/linemap/image.hpp"
#include "csagan/metrics/providers.hpp"
#include "csagan/train/data.hpp"
#include "csagan/train/trainer.hpp"

namespace csagan {

// Exclusive ownership of a run directory through "<dir>/lock", created with
// O_EXCL and removed on destruction.
class RunLock {
 public:
  explicit RunLock(const std::filesystem::path& dir);
  ~RunLock();
  RunLock(const RunLock&) = delete;
  RunLock& operator=(const RunLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Fresh state whose config_text is the serialized config.
TrainingState make_training_state(const RunConfig& config);

// Rebuilds the configuration stored in a checkpoint and loads its blobs.
TrainingState load_training_state(const std::filesystem::path& checkpoint, RunConfig* config = nullptr);

struct PreprocessOptions {
  double tau = 0.3;
  int lmin = 10;
  uint64_t seed = 0;
  double split = 0.8;
  int side = 256;
};

struct PreprocessSummary {
  size_t train = 0;
  size_t test = 0;
};

// For each photo: <out>/<split>/<stem>.png (cropped, resized photo),
// <stem>.csdf (distance field) and <stem>.lines.png (line map).
PreprocessSummary preprocess_photos(const std::filesystem::path& in, const std::filesystem::path& out,
                                    const PreprocessOptions& options);

// Pairs written by preprocess_photos; split is "train" or "test".
std::vector<Sample> load_pairs(const std::filesystem::path& dir, const std::string& split,
                               const std::vector<int>& scales);

// Training and held-out samples for a configuration.
struct SampleSets {
  std::vector<Sample> train;
  std::vector<Sample> test;
};
SampleSets load_samples(const RunConfig& config);

// Generator output for a line drawing (PNG, dark strokes) or a .csdf file.
Image generate_from_file(Generator& generator, const std::filesystem::path& input);

// Output file names embed tau with two decimals: face_tau0.30.png.
std::string tau_tag(double tau);
std::vector<std::filesystem::path> tau_sweep(Generator& generator, const Image& photo,
                                             const std::vector<double>& taus, int lmin,
                                             const std::filesystem::path& out_dir);

struct TrainRunOptions {
  int64_t max_steps = -1;      // stop resumably at this global step
  int64_t checkpoint_every = 0;  // steps; 0 = only at stage ends and stops
  bool verbose = true;
};

struct TrainRunResult {
  StageResult result = StageResult::kCompleted;
  int64_t step = 0;
  int stage = 1;
  double heldout_l1 = 0.0;
};

// Trains (or resumes from <dir>/checkpoint.bin) through stage 3 under the run
// lock. Writes config.cfg, trace.csv and checkpoint.bin into the directory.
// A halted run leaves the last good checkpoint in place. On resume the
// stored configuration wins and trace rows past the checkpoint are dropped.
TrainRunResult train_run(const RunConfig& config, const std::filesystem::path& dir,
                         const TrainRunOptions& options = {});

// Keeps the header and rows with step < `step`.
void truncate_trace(const std::filesystem::path& path, int64_t step);

std::vector<Image> read_png_dir(const std::filesystem::path& dir);

// "random-projection", or "toy-classifier" fitted on drawn toy shapes.
std::unique_ptr<FeatureProvider> make_provider(const std::string& name, uint64_t seed = 0);

struct MetricReport {
  double is_mean = 0, is_std = 0, fid = 0, kid = 0;
};

// IS over the fake set; FID and KID between the sets.
MetricReport evaluate_images(const std::vector<Image>& real, const std::vector<Image>& fake,
                             const FeatureProvider& provider, int is_splits = 1);

}  // namespace csagan
