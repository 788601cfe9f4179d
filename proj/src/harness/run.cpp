#include "csagan/harness/run.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "csagan/core/rng.hpp"
#include "csagan/linemap/dataset.hpp"
#include "csagan/linemap/linemap.hpp"
#include "csagan/train/checkpoint.hpp"
#include "csagan/util/atomic_file.hpp"

namespace csagan {

namespace fs = std::filesystem;

RunLock::RunLock(const fs::path& dir) : path_(dir / "lock") {
  fs::create_directories(dir);
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      throw std::runtime_error("run directory " + dir.string() + " is locked by another process (" +
                               path_.string() + " exists)");
    }
    throw std::runtime_error("cannot create " + path_.string() + ": " + std::strerror(errno));
  }
  const std::string pid = std::to_string(::getpid()) + "\n";
  [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
  ::close(fd);
}

RunLock::~RunLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

TrainingState make_training_state(const RunConfig& config) {
  config.validate();
  TrainingState state(config.generator_config(), config.discriminator_config(), config.seed);
  state.config_text = serialize_config(config);
  return state;
}

TrainingState load_training_state(const fs::path& checkpoint, RunConfig* config) {
  CheckpointData data = read_checkpoint(checkpoint);
  RunConfig cfg = parse_config(data.config_text);
  TrainingState state = make_training_state(cfg);
  apply_checkpoint(data, state);
  if (config) *config = cfg;
  return state;
}

PreprocessSummary preprocess_photos(const fs::path& in, const fs::path& out,
                                    const PreprocessOptions& options) {
  if (!(options.tau >= 0 && options.tau <= 1)) throw std::invalid_argument("--tau must lie in [0, 1]");
  if (options.lmin < 1) throw std::invalid_argument("--lmin must be >= 1");
  Dataset ds = make_dataset(in, options.split, options.seed, options.side);
  PreprocessSummary summary;
  for (const auto& [split, photos] : {std::pair{"train", &ds.train}, std::pair{"test", &ds.test}}) {
    const fs::path dir = out / split;
    fs::create_directories(dir);
    for (const auto& p : *photos) {
      const std::string stem = fs::path(p.name).stem().string();
      const LineMap lines = extract_linemap(detect_edges(p.photo), options.tau, options.lmin);
      write_png(dir / (stem + ".png"), p.photo);
      write_png(dir / (stem + ".lines.png"), linemap_to_image(lines));
      write_csdf(dir / (stem + ".csdf"), distance_field(lines));
    }
    (split == std::string("train") ? summary.train : summary.test) = photos->size();
  }
  return summary;
}

std::vector<Sample> load_pairs(const fs::path& dir, const std::string& split,
                               const std::vector<int>& scales) {
  const fs::path root = dir / split;
  if (!fs::is_directory(root)) throw std::runtime_error("no preprocessed split at " + root.string());
  std::vector<fs::path> fields;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.path().extension() == ".csdf") fields.push_back(e.path());
  }
  std::sort(fields.begin(), fields.end());
  std::vector<Sample> out;
  for (const auto& f : fields) {
    fs::path photo = f;
    photo.replace_extension(".png");
    out.push_back(make_sample_from_field(f.stem().string(), read_png(photo, 3), read_csdf(f), scales));
  }
  if (out.empty()) throw std::runtime_error("no pairs found under " + root.string());
  return out;
}

SampleSets load_samples(const RunConfig& config) {
  const std::vector<int> scales = config.generator_config().pyramid_scales();
  SampleSets sets;
  if (config.data.source == "pairs") {
    sets.train = load_pairs(config.data.pairs, "train", scales);
    sets.test = load_pairs(config.data.pairs, "test", scales);
  } else {
    ToyOptions toy;
    toy.count = config.data.toy_count;
    toy.side = config.image_side;
    toy.tau_min = config.data.toy_tau_min;
    toy.tau_max = config.data.toy_tau_max;
    toy.min_pixels = config.data.lmin;
    toy.seed = config.seed;
    std::vector<Sample> all = make_toy_dataset(toy, scales);
    const SplitIndices split = split_indices(all.size(), config.data.split, config.seed);
    for (size_t i : split.train) sets.train.push_back(all[i]);
    for (size_t i : split.test) sets.test.push_back(all[i]);
  }
  for (const auto* set : {&sets.train, &sets.test}) {
    for (const auto& s : *set) {
      if (s.side != config.image_side) {
        throw ConfigError("config key 'run.image_side': sample " + s.name + " has side " +
                          std::to_string(s.side) + ", expected " + std::to_string(config.image_side));
      }
    }
  }
  return sets;
}

namespace {

Image render(Generator& generator, const DistanceField& field) {
  const int side = generator.config().image_side;
  if (field.height != side || field.width != side) {
    throw std::invalid_argument("input is " + std::to_string(field.height) + "x" +
                                std::to_string(field.width) + ", the model expects " +
                                std::to_string(side) + "x" + std::to_string(side));
  }
  ConditionPyramid pyramid = build_condition_pyramid(field, generator.config().pyramid_scales());
  Tensor out = generate(generator, field, pyramid);
  return target_to_image(out.data(), side);
}

}  // namespace

Image generate_from_file(Generator& generator, const fs::path& input) {
  if (input.extension() == ".csdf") return render(generator, read_csdf(input));
  return render(generator, distance_field(linemap_from_drawing(read_png(input, 1))));
}

std::string tau_tag(double tau) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "tau%.2f", tau);
  return buf;
}

std::vector<fs::path> tau_sweep(Generator& generator, const Image& photo, const std::vector<double>& taus,
                                int lmin, const fs::path& out_dir) {
  const int side = generator.config().image_side;
  Image square = center_crop_square(photo);
  if (square.height != side) square = resize_area(square, side, side);
  const ProbEdgeMap edges = detect_edges(square);
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (double tau : taus) {
    if (!(tau >= 0 && tau <= 1)) throw std::invalid_argument("tau " + std::to_string(tau) + " outside [0, 1]");
    const LineMap lines = extract_linemap(edges, tau, lmin);
    const fs::path face = out_dir / ("face_" + tau_tag(tau) + ".png");
    write_png(out_dir / ("lines_" + tau_tag(tau) + ".png"), linemap_to_image(lines));
    write_png(face, render(generator, distance_field(lines)));
    written.push_back(face);
  }
  return written;
}

void truncate_trace(const fs::path& path, int64_t step) {
  std::ifstream in(path);
  if (!in) return;
  std::string line, kept;
  bool header = true;
  while (std::getline(in, line)) {
    if (header || (!line.empty() && std::stoll(line.substr(0, line.find(','))) < step)) {
      kept += line + "\n";
    }
    header = false;
  }
  in.close();
  write_file_atomic(path, kept);
}

TrainRunResult train_run(const RunConfig& config, const fs::path& dir, const TrainRunOptions& options) {
  RunLock lock(dir);
  const fs::path ckpt = dir / "checkpoint.bin";
  const fs::path trace = dir / "trace.csv";
  RunConfig cfg = config;
  TrainingState state;
  if (fs::exists(ckpt)) {
    state = load_training_state(ckpt, &cfg);
    if (!(cfg == config) && options.verbose) {
      std::fprintf(stderr, "resuming %s with the configuration stored in its checkpoint\n",
                   dir.string().c_str());
    }
    truncate_trace(trace, state.step);
  } else {
    state = make_training_state(cfg);
    fs::remove(trace);
  }
  write_file_atomic(dir / "config.cfg", serialize_config(cfg));
  const SampleSets data = load_samples(cfg);

  TraceWriter writer(trace);
  TrainOptions train;
  train.batch_size = cfg.batch_size;
  train.weights = cfg.loss;
  train.max_steps = options.max_steps;
  train.on_step = [&](const TraceRow& row, TrainingState& st) {
    writer.append(row);
    if (options.checkpoint_every > 0 && st.step % options.checkpoint_every == 0) save_checkpoint(ckpt, st);
    if (options.verbose && (row.step % 50 == 0)) {
      std::fprintf(stderr, "stage %d step %lld  D %.4f  G_adv %.4f  L1 %.4f  FM %.4f\n", row.stage,
                   static_cast<long long>(row.step), row.loss_d, row.loss_g_adv, row.loss_l1, row.loss_fm);
    }
  };

  TrainRunResult out;
  while (state.stage <= 3) {
    out.result = run_stage(cfg.stages[static_cast<size_t>(state.stage - 1)], state, data.train, train);
    if (out.result == StageResult::kHalted) break;
    save_checkpoint(ckpt, state);
    if (out.result == StageResult::kStopped) break;
  }
  out.step = state.step;
  out.stage = state.stage;
  out.heldout_l1 = data.test.empty() ? 0.0 : mean_l1(*state.generator, data.test, cfg.batch_size);
  return out;
}

std::vector<Image> read_png_dir(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".png") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<Image> images;
  for (const auto& f : files) images.push_back(read_png(f, 3));
  if (images.size() < 2) throw std::runtime_error("need at least two PNG images in " + dir.string());
  return images;
}

std::unique_ptr<FeatureProvider> make_provider(const std::string& name, uint64_t seed) {
  if (name == "random-projection") return std::make_unique<RandomProjectionProvider>(32, 64, 10, seed);
  if (name == "toy-classifier") {
    std::vector<Image> images;
    std::vector<int> labels;
    for (int i = 0; i < 512; ++i) {
      int label = -1;
      images.push_back(draw_toy_shape(i, 32, derive_seed(seed, "classifier-data"), true, &label));
      labels.push_back(label);
    }
    return std::make_unique<ToyClassifierProvider>(
        ToyClassifierProvider::fit(images, labels, kToyClasses, seed));
  }
  throw std::invalid_argument("unknown provider '" + name +
                              "' (expected random-projection or toy-classifier)");
}

MetricReport evaluate_images(const std::vector<Image>& real, const std::vector<Image>& fake,
                             const FeatureProvider& provider, int is_splits) {
  const FeatureSet fr = provider.features(real), ff = provider.features(fake);
  const InceptionScore is = inception_score(provider.class_probs(fake), is_splits);
  return {is.mean, is.std, frechet_distance(fr, ff), kid(fr, ff)};
}

}  // namespace csagan
