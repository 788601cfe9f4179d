#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "csagan/harness/config.hpp"
#include "csagan/harness/run.hpp"
#include "csagan/linemap/linemap.hpp"
#include "csagan/train/checkpoint.hpp"

using namespace csagan;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() /
            ("csagan_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  static inline int counter_ = 0;
  fs::path path_;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny_config() {
  RunConfig c;
  c.seed = 3;
  c.image_side = 16;
  c.batch_size = 4;
  c.generator.base_channels = 8;
  c.generator.n_down = 2;
  c.discriminator.n_d = 2;
  c.discriminator.base_channels = 4;
  c.data.toy_count = 20;
  c.data.lmin = 3;
  c.stages[0].epochs = 2;
  c.stages[1].epochs = 2;
  c.stages[2].epochs = 1;
  return c;
}

RunConfig random_valid_config(std::mt19937_64& rng) {
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto real = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  auto log_real = [&](double lo, double hi) { return std::exp(real(std::log(lo), std::log(hi))); };
  RunConfig c;
  c.seed = rng();
  c.generator.n_down = pick(2, 5);
  c.image_side = (1 << c.generator.n_down) * pick(1, 4) * 4;
  c.batch_size = pick(1, 64);
  c.generator.base_channels = 8 * pick(1, 8);
  c.generator.max_channels = c.generator.base_channels * pick(1, 8);
  c.generator.csam_enabled = pick(0, 1) == 1;
  c.discriminator.base_channels = pick(1, 64);
  c.discriminator.max_channels = c.discriminator.base_channels * pick(1, 8);
  c.discriminator.n_d = 1;
  c.discriminator.shared_depth = pick(0, 2);
  if (pick(0, 1)) {
    // Explicit depths ending where the image is just covered.
    DiscriminatorConfig probe = c.discriminator_config();
    probe.n_d = pick(1, 2);
    auto depths = probe.resolved_depths();
    if (depths.size() == static_cast<size_t>(probe.n_d)) {
      c.discriminator.n_d = probe.n_d;
      c.discriminator.depths = depths;
    }
  }
  for (int s = 0; s < 3; ++s) {
    c.stages[s].epochs = pick(1, 200);
    c.stages[s].lr_g = log_real(1e-6, 1e-2);
    c.stages[s].lr_d = log_real(1e-6, 1e-2);
    c.stages[s].decay_at = real(0, 1);
    c.stages[s].decay_factor = real(0.01, 1);
  }
  c.loss.lambda = real(0, 500);
  c.loss.mu = real(0, 10);
  c.data.source = pick(0, 1) ? "toy" : "pairs";
  c.data.pairs = "data/run_" + std::to_string(pick(0, 99999)) + "/pairs dir";
  c.data.tau = real(0, 1);
  c.data.lmin = pick(1, 50);
  c.data.split = real(0.05, 0.95);
  c.data.toy_count = pick(2, 5000);
  c.data.toy_tau_min = real(0, 0.5);
  c.data.toy_tau_max = real(c.data.toy_tau_min, 1.0);
  return c;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  RunConfig c;
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(parse_config(serialize_config(c)), c);
  EXPECT_EQ(c.loss.lambda, 100.0);
  EXPECT_EQ(c.loss.mu, 1.0);
  EXPECT_EQ(c.batch_size, 8);
}

TEST(Config, RandomRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 100; ++i) {
    RunConfig c = random_valid_config(rng);
    ASSERT_NO_THROW(c.validate()) << serialize_config(c);
    const std::string text = serialize_config(c);
    EXPECT_EQ(parse_config(text), c) << text;
    EXPECT_EQ(serialize_config(parse_config(text)), text);
  }
}

TEST(Config, EveryKeyIsSerialized) {
  const std::string text = serialize_config(RunConfig{});
  for (const auto& k : config_keys()) EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config("run.seed = 4\ngenerator.base_channel = 16\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("generator.base_channel"), std::string::npos) << e.what();
  }
}

TEST(Config, BadValueIsNamed) {
  try {
    parse_config("stage2.lr_g = fast\n");
    FAIL() << "no error";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("stage2.lr_g"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parse_config("run.batch_size = 8.5\n"), ConfigError);
  EXPECT_THROW(parse_config("generator.csam = maybe\n"), ConfigError);
  EXPECT_THROW(parse_config("run.seed\n"), ConfigError);
}

TEST(Config, CommentsBlankLinesAndOverrides) {
  RunConfig c = parse_config("# comment\n\n  run.seed =  42  \ndiscriminator.depths = 3, 4,5\n");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.discriminator.depths, (std::vector<int>{3, 4, 5}));
  set_config_value(c, "discriminator.depths", "auto");
  EXPECT_TRUE(c.discriminator.depths.empty());
  RunConfig later = parse_config("run.seed = 1\nrun.seed = 2\n");
  EXPECT_EQ(later.seed, 2u);
}

TEST(Config, ValidationNamesTheKey) {
  auto message = [](const std::string& text) {
    try {
      parse_config(text).validate();
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  EXPECT_NE(message("generator.n_down = 1\n").find("generator.n_down"), std::string::npos);
  EXPECT_NE(message("run.image_side = 60\n").find("image_side"), std::string::npos);
  EXPECT_NE(message("data.tau = 1.5\n").find("data.tau"), std::string::npos);
  EXPECT_NE(message("data.source = folder\n").find("data.source"), std::string::npos);
  EXPECT_NE(message("stage3.epochs = 0\n").find("stage3"), std::string::npos);
  EXPECT_NE(message("discriminator.depths = 5,4,3\n").find("discriminator.depths"), std::string::npos);
  EXPECT_NE(message("data.source = pairs\n").find("data.pairs"), std::string::npos);
}

TEST(RunLockTest, ExcludesSecondOwner) {
  TempDir dir;
  {
    RunLock a(dir.path());
    EXPECT_TRUE(fs::exists(dir.path() / "lock"));
    EXPECT_THROW(RunLock b(dir.path()), std::runtime_error);
  }
  EXPECT_FALSE(fs::exists(dir.path() / "lock"));
  EXPECT_NO_THROW(RunLock c(dir.path()));
}

TEST(Checkpoint, StateRebuiltFromStoredConfig) {
  set_precision(Precision::kF64);
  TempDir dir;
  RunConfig cfg = tiny_config();
  TrainingState state = make_training_state(cfg);
  const SampleSets data = load_samples(cfg);
  TrainOptions opts;
  opts.batch_size = cfg.batch_size;
  opts.max_steps = 3;
  run_stage(cfg.stages[0], state, data.train, opts);
  save_checkpoint(dir.path() / "c.bin", state);
  RunConfig loaded;
  TrainingState back = load_training_state(dir.path() / "c.bin", &loaded);
  EXPECT_EQ(loaded, cfg);
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(state));
}

TEST(TrainRun, ResumeReproducesTrace) {
  set_precision(Precision::kF64);
  TempDir a, b;
  RunConfig cfg = tiny_config();
  TrainRunOptions quiet;
  quiet.verbose = false;
  const auto full = train_run(cfg, a.path(), quiet);
  EXPECT_EQ(full.result, StageResult::kCompleted);
  EXPECT_EQ(full.stage, 4);

  TrainRunOptions part = quiet;
  part.max_steps = 7;
  EXPECT_EQ(train_run(cfg, b.path(), part).result, StageResult::kStopped);
  part.max_steps = 13;
  EXPECT_EQ(train_run(cfg, b.path(), part).result, StageResult::kStopped);
  // Rows written after the checkpoint are dropped on resume.
  {
    std::ofstream out(b.path() / "trace.csv", std::ios::app);
    out << "13,2,9,9,9,9,9,9\n";
  }
  const auto rest = train_run(cfg, b.path(), quiet);
  EXPECT_EQ(rest.step, full.step);
  EXPECT_EQ(read_text(b.path() / "trace.csv"), read_text(a.path() / "trace.csv"));
  EXPECT_EQ(read_text(b.path() / "checkpoint.bin"), read_text(a.path() / "checkpoint.bin"));
  EXPECT_EQ(rest.heldout_l1, full.heldout_l1);
  EXPECT_FALSE(fs::exists(b.path() / "lock"));
}

TEST(TrainRun, TruncateTraceKeepsHeader) {
  TempDir dir;
  const fs::path p = dir.path() / "t.csv";
  {
    std::ofstream out(p);
    out << kTraceHeader << "\n0,1,a\n1,1,b\n2,1,c\n";
  }
  truncate_trace(p, 2);
  EXPECT_EQ(read_text(p), std::string(kTraceHeader) + "\n0,1,a\n1,1,b\n");
}

TEST(Pipeline, PreprocessThenLoadPairs) {
  TempDir photos, out;
  for (int i = 0; i < 6; ++i) write_png(photos.path() / ("p" + std::to_string(i) + ".png"), draw_toy_shape(i, 48, 2, true));
  PreprocessOptions opt;
  opt.side = 16;
  opt.lmin = 3;
  opt.split = 0.5;
  const auto s = preprocess_photos(photos.path(), out.path(), opt);
  EXPECT_EQ(s.train + s.test, 6u);
  const auto train = load_pairs(out.path(), "train", {1, 2, 4});
  EXPECT_EQ(train.size(), s.train);
  for (const auto& sm : train) {
    EXPECT_EQ(sm.side, 16);
    EXPECT_TRUE(fs::exists(out.path() / "train" / (sm.name + ".lines.png")));
  }
  RunConfig cfg = tiny_config();
  cfg.data.source = "pairs";
  cfg.data.pairs = out.path().string();
  const SampleSets sets = load_samples(cfg);
  EXPECT_EQ(sets.train.size(), s.train);
  EXPECT_EQ(sets.test.size(), s.test);
  cfg.image_side = 32;
  cfg.discriminator.n_d = 3;
  EXPECT_THROW(load_samples(cfg), ConfigError);
}

TEST(Pipeline, GenerateAndSweepFiles) {
  set_precision(Precision::kF64);
  TempDir dir;
  RunConfig cfg = tiny_config();
  TrainingState state = make_training_state(cfg);
  LineMap lines(16, 16);
  for (int x = 3; x < 13; ++x) lines.at(8, x) = 1;
  write_png(dir.path() / "line.png", linemap_to_image(lines));
  write_csdf(dir.path() / "line.csdf", distance_field(lines));
  Image a = generate_from_file(*state.generator, dir.path() / "line.png");
  Image b = generate_from_file(*state.generator, dir.path() / "line.csdf");
  EXPECT_EQ(a.height, 16);
  EXPECT_EQ(a.channels, 3);
  // CSDF stores float32 distances, so the two paths agree only to rounding.
  ASSERT_EQ(a.pixels.size(), b.pixels.size());
  for (size_t i = 0; i < a.pixels.size(); ++i) EXPECT_NEAR(a.pixels[i], b.pixels[i], 1e-4);
  const auto files = tau_sweep(*state.generator, draw_toy_shape(0, 40, 1, true), {0.3, 0.6}, 3, dir.path() / "sweep");
  ASSERT_EQ(files.size(), 2u);
  EXPECT_EQ(files[0].filename(), "face_tau0.30.png");
  EXPECT_EQ(files[1].filename(), "face_tau0.60.png");
  for (const auto& f : files) EXPECT_TRUE(fs::exists(f));
  EXPECT_THROW(generate_from_file(*state.generator, dir.path() / "missing.png"), std::exception);
}

TEST(Pipeline, MetricReport) {
  std::vector<Image> real, fake;
  for (int i = 0; i < 12; ++i) {
    real.push_back(draw_toy_shape(i, 32, 4, true));
    fake.push_back(draw_toy_shape(i + 100, 32, 4, true));
  }
  auto provider = make_provider("random-projection", 1);
  const auto same = evaluate_images(real, real, *provider, 2);
  EXPECT_NEAR(same.fid, 0.0, 1e-8);
  const auto diff = evaluate_images(real, fake, *provider, 2);
  EXPECT_GT(diff.fid, same.fid);
  EXPECT_GE(diff.is_mean, 1.0);
  EXPECT_THROW(make_provider("inception"), std::invalid_argument);
}

#ifdef CSAGAN_CLI
TEST(Cli, MisspelledKeyExitsNonzeroAndNamesKey) {
  TempDir dir;
  {
    std::ofstream cfg(dir.path() / "bad.cfg");
    cfg << "run.seed = 1\nloss.lamda = 10\n";
  }
  const fs::path log = dir.path() / "log.txt";
  const std::string cmd = std::string(CSAGAN_CLI) + " train --config " + (dir.path() / "bad.cfg").string() +
                          " --run " + (dir.path() / "run").string() + " > " + log.string() + " 2>&1";
  EXPECT_NE(std::system(cmd.c_str()), 0);
  EXPECT_NE(read_text(log).find("loss.lamda"), std::string::npos) << read_text(log);
}

TEST(Cli, UnknownSubcommandFails) {
  const std::string cmd = std::string(CSAGAN_CLI) + " frobnicate > /dev/null 2>&1";
  EXPECT_NE(std::system(cmd.c_str()), 0);
  const std::string flag = std::string(CSAGAN_CLI) + " gradcheck --bogus > /dev/null 2>&1";
  EXPECT_NE(std::system(flag.c_str()), 0);
}

TEST(Cli, GenerateIsDeterministic) {
  TempDir dir;
  set_precision(Precision::kF64);
  TrainingState state = make_training_state(tiny_config());
  save_checkpoint(dir.path() / "c.bin", state);
  LineMap lines(16, 16);
  for (int y = 2; y < 14; ++y) lines.at(y, 5) = 1;
  write_png(dir.path() / "line.png", linemap_to_image(lines));
  for (const char* name : {"a.png", "b.png"}) {
    const std::string cmd = std::string(CSAGAN_CLI) + " generate --ckpt " + (dir.path() / "c.bin").string() +
                            " --in " + (dir.path() / "line.png").string() + " --out " +
                            (dir.path() / name).string();
    ASSERT_EQ(std::system(cmd.c_str()), 0);
  }
  EXPECT_EQ(read_text(dir.path() / "a.png"), read_text(dir.path() / "b.png"));
}
#endif
