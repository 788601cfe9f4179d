#include <cstdio>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "csagan/core/tensor.hpp"
#include "csagan/harness/config.hpp"
#include "csagan/harness/gradient_suite.hpp"
#include "csagan/harness/run.hpp"
#include "csagan/util/atomic_file.hpp"

using namespace csagan;
namespace fs = std::filesystem;

namespace {

std::vector<double> parse_taus(const std::string& list) {
  std::vector<double> taus;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    size_t used = 0;
    const double v = std::stod(item, &used);
    if (used != item.size()) throw std::invalid_argument("bad tau '" + item + "'");
    taus.push_back(v);
  }
  if (taus.empty()) throw std::invalid_argument("--taus is empty");
  return taus;
}

RunConfig resolve_config(const std::string& file, const std::vector<std::string>& overrides) {
  RunConfig cfg = file.empty() ? RunConfig{} : load_config(file);
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"csagan: line-map to image GAN"};
  app.require_subcommand(1);

  PreprocessOptions pre;
  std::string pre_in, pre_out;
  auto* preprocess = app.add_subcommand("preprocess", "photos -> line maps and distance fields");
  preprocess->add_option("--in", pre_in, "photo directory")->required();
  preprocess->add_option("--out", pre_out, "output directory")->required();
  preprocess->add_option("--tau", pre.tau, "edge probability threshold");
  preprocess->add_option("--lmin", pre.lmin, "minimum line component size");
  preprocess->add_option("--seed", pre.seed, "split seed");
  preprocess->add_option("--split", pre.split, "train fraction");
  preprocess->add_option("--side", pre.side, "output side length");

  std::string cfg_file, run_dir;
  std::vector<std::string> overrides;
  int64_t max_steps = -1, ckpt_every = 0;
  bool print_config = false, quiet = false;
  auto* train = app.add_subcommand("train", "train all three stages (resumes from the run directory)");
  train->add_option("--config", cfg_file, "config file (section.key = value)");
  train->add_option("--set", overrides, "override, key=value (repeatable)");
  train->add_option("--run", run_dir, "run directory");
  train->add_option("--max-steps", max_steps, "stop after this global step");
  train->add_option("--checkpoint-every", ckpt_every, "checkpoint period in steps");
  train->add_flag("--print-config", print_config, "print the effective config and exit");
  train->add_flag("--quiet", quiet, "no progress output");

  std::string ckpt, gen_in, gen_out;
  auto* gen = app.add_subcommand("generate", "render one line drawing or .csdf file");
  gen->add_option("--ckpt", ckpt, "checkpoint")->required();
  gen->add_option("--in", gen_in, "line drawing PNG (dark strokes) or .csdf")->required();
  gen->add_option("--out", gen_out, "output PNG")->required();

  std::string real_dir, fake_dir, provider_name = "random-projection", report;
  int splits = 1;
  uint64_t eval_seed = 0;
  auto* evaluate = app.add_subcommand("evaluate", "IS / FID / KID between two image folders");
  evaluate->add_option("--real", real_dir)->required();
  evaluate->add_option("--fake", fake_dir)->required();
  evaluate->add_option("--provider", provider_name, "random-projection | toy-classifier");
  evaluate->add_option("--splits", splits, "IS splits");
  evaluate->add_option("--seed", eval_seed, "provider seed");
  evaluate->add_option("--out", report, "also write the JSON report here");

  uint64_t grad_seed = 0;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient suite (64-bit)");
  gradcheck->add_option("--seed", grad_seed);

  std::string sweep_ckpt, photo, taus = "0.3,0.6", sweep_out;
  int sweep_lmin = 10;
  auto* sweep = app.add_subcommand("tau-sweep", "outputs for one photo at several thresholds");
  sweep->add_option("--ckpt", sweep_ckpt)->required();
  sweep->add_option("--photo", photo)->required();
  sweep->add_option("--taus", taus, "comma-separated thresholds");
  sweep->add_option("--lmin", sweep_lmin);
  sweep->add_option("--out", sweep_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    set_precision(precision_from_env(Precision::kF32));
    if (*preprocess) {
      const auto s = preprocess_photos(pre_in, pre_out, pre);
      std::printf("preprocessed %zu train / %zu test photos into %s\n", s.train, s.test, pre_out.c_str());
    } else if (*train) {
      const RunConfig cfg = resolve_config(cfg_file, overrides);
      if (print_config) {
        std::fputs(serialize_config(cfg).c_str(), stdout);
        return 0;
      }
      if (run_dir.empty()) throw std::invalid_argument("--run is required");
      TrainRunOptions opts;
      opts.max_steps = max_steps;
      opts.checkpoint_every = ckpt_every;
      opts.verbose = !quiet;
      const auto r = train_run(cfg, run_dir, opts);
      const char* status = r.result == StageResult::kHalted    ? "halted"
                           : r.result == StageResult::kStopped ? "stopped"
                                                               : "completed";
      std::printf("%s at step %lld (stage %d); held-out L1 %.6f\n", status,
                  static_cast<long long>(r.step), std::min(r.stage, 3), r.heldout_l1);
      return r.result == StageResult::kHalted ? 3 : 0;
    } else if (*gen) {
      TrainingState state = load_training_state(ckpt);
      write_png(gen_out, generate_from_file(*state.generator, gen_in));
    } else if (*evaluate) {
      auto provider = make_provider(provider_name, eval_seed);
      const auto m = evaluate_images(read_png_dir(real_dir), read_png_dir(fake_dir), *provider, splits);
      nlohmann::json j = {{"is_mean", m.is_mean}, {"is_std", m.is_std}, {"fid", m.fid}, {"kid", m.kid},
                          {"provider", provider->id()}};
      const std::string text = j.dump(2) + "\n";
      if (!report.empty()) write_file_atomic(report, text);
      std::fputs(text.c_str(), stdout);
    } else if (*gradcheck) {
      bool ok = true;
      for (const auto& c : run_gradient_suite(grad_seed)) {
        const bool pass = c.result.max_rel_error < kGradientTolerance;
        ok = ok && pass;
        std::printf("%-28s %s  max rel %.3e  coords %d%s%s\n", c.name.c_str(), pass ? "ok  " : "FAIL",
                    c.result.max_rel_error, c.result.coords_checked, pass ? "" : "  worst ",
                    pass ? "" : c.result.worst.c_str());
      }
      return ok ? 0 : 1;
    } else if (*sweep) {
      TrainingState state = load_training_state(sweep_ckpt);
      for (const auto& p : tau_sweep(*state.generator, read_png(photo, 3), parse_taus(taus), sweep_lmin, sweep_out)) {
        std::printf("%s\n", p.string().c_str());
      }
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
