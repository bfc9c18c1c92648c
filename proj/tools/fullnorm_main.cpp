#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>

#ifdef FULLNORM_CLI11_SINGLE_HEADER
#include <CLI11.hpp>
#else
#include <CLI/CLI.hpp>
#endif

#include "fullnorm/errors.hpp"
#include "fullnorm/experiment.hpp"
#include "fullnorm/recipes.hpp"
#include "fullnorm/verify.hpp"

namespace fs = std::filesystem;
using namespace fullnorm;

namespace {

constexpr int kFail = 1;
constexpr int kUsage = 2;
constexpr int kData = 3;

void print_summary(const std::string& name, const RunResult& run) {
  const auto epochs = summarize_epochs(run);
  std::cout << name << ": " << run.rows.size() << " rows";
  if (!epochs.empty()) {
    const auto& e = epochs.back();
    std::cout << std::fixed << std::setprecision(4) << ", epoch " << e.epoch << " train loss "
              << e.train_loss << " err " << e.train_error << ", test loss " << e.test_loss
              << " err " << e.test_error;
    std::cout.unsetf(std::ios::floatfield);
  }
  std::cout << '\n';
}

int cmd_run(const std::string& path, const std::string& out) {
  auto cfg = ExperimentConfig::from_file(path);
  if (!out.empty()) cfg.output = out;
  if (cfg.output.empty()) cfg.output = cfg.name + ".csv";
  const auto run = run_experiment(cfg);
  print_summary(cfg.name, run);
  std::cout << "wrote " << cfg.output << '\n';
  return 0;
}

int cmd_reproduce(const std::string& recipe, RecipeOptions opts) {
  if (opts.out_dir.empty()) opts.out_dir = "results";
  int rc = 0;
  for (const auto& arm : recipe_arms(recipe, opts)) {
    const auto run = run_experiment(arm.config);
    print_summary(arm.config.name, run);
    std::cout << "  wrote " << arm.config.output << '\n';
    if (recipe == "rates") {
      std::ofstream series(opts.out_dir / "rates_error_series.csv");
      write_error_series_csv(series, run.series);
      VerifyOptions vo;
      vo.recipe = opts;
      const auto rep = verify_rate_run(run, vo);
      std::cout << rep.to_text();
      if (!rep.passed()) rc = kFail;
    }
  }
  return rc;
}

int cmd_gen(const std::string& gen, std::uint64_t seed, std::string out, std::size_t samples,
            std::size_t dims, std::size_t classes) {
  if (out.empty()) out = gen + ".fnds";
  const fs::path path(out);
  auto test_path = path;
  test_path.replace_filename(path.stem().string() + "_test" + path.extension().string());
  if (gen == "toy3") {
    save_dataset(path, gen_toy3());
  } else if (gen == "large_variation") {
    LargeVariationOptions o;
    if (samples) o.n = samples;
    if (dims) o.d = dims;
    if (classes) o.classes = classes;
    const auto tt = gen_large_variation(o, seed);
    save_dataset(path, tt.train);
    save_dataset(test_path, tt.test);
    std::cout << "wrote " << test_path.string() << '\n';
  } else if (gen == "compositional") {
    CompositionalOptions o;
    if (samples) o.n = samples;
    if (dims) o.d = dims;
    if (classes) o.classes = classes;
    save_dataset(path, gen_compositional(o, seed));
  } else {
    throw ConfigError("unknown generator `" + gen + "` (toy3, large_variation, compositional)");
  }
  std::cout << "wrote " << path.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Batch normalization, full normalization and MCSGD on small dense nets"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Train from a key = value config file");
  std::string config_path, run_out;
  run->add_option("config", config_path, "Config file")->required();
  run->add_option("--out", run_out, "Metrics CSV path (overrides `output`)");

  auto* rep = app.add_subcommand("reproduce", "Run a figure recipe");
  std::string recipe;
  RecipeOptions ropts;
  std::string rout;
  std::optional<std::size_t> repochs;
  std::optional<std::uint64_t> riters;
  rep->add_option("recipe", recipe, "fig1 | fig3 | mnist_unshuffled | cifar_unshuffled | "
                                    "mnist_shuffled | cifar_shuffled | batchsize | rates")
      ->required();
  rep->add_option("--out", rout, "Output directory (default: results)");
  rep->add_option("--cap", ropts.cap, "Training-sample cap");
  rep->add_option("--seed", ropts.seed, "Seed");
  rep->add_option("--data-dir", ropts.data_dir, "Dataset root (default: $FULLNORM_DATA_DIR)");
  rep->add_option("--epochs", repochs, "Override the recipe's epoch count");
  rep->add_option("--iterations", riters, "Stop after this many iterations");
  rep->add_flag("--full-scale", ropts.full_scale, "fig3: use the 10000 x 1000 x 1000 dataset");

  auto* ver = app.add_subcommand("verify", "Property checks; exit status 1 on failure");
  std::string kind;
  VerifyOptions vopts;
  double tol = 0.0;
  std::optional<std::uint64_t> viters;
  ver->add_option("kind", kind, "grads | schedules | rates | absorption")->required();
  auto* tol_opt = ver->add_option("--tol", tol, "Tolerance (grads 1e-6, absorption 1e-10)");
  ver->add_option("--instances", vopts.instances, "Random instances (grads 50, absorption 200)");
  ver->add_option("--seed", vopts.seed, "Seed");
  ver->add_option("--gamma", vopts.gamma_exp, "schedules: step-size exponent");
  ver->add_option("--alpha-exp", vopts.alpha_exp, "schedules: approximation-rate exponent");
  ver->add_option("--lg", vopts.lg, "schedules: L_g");
  ver->add_option("--horizon", vopts.horizon, "schedules: last k checked");
  ver->add_option("--iterations", viters, "rates: iterations to run");

  auto* gen = app.add_subcommand("gen-data", "Write a synthetic dataset file");
  std::string generator, gen_out;
  std::uint64_t gen_seed = 1;
  std::size_t samples = 0, dims = 0, classes = 0;
  gen->add_option("generator", generator, "toy3 | large_variation | compositional")->required();
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--out", gen_out, "Output path (default: <generator>.fnds)");
  gen->add_option("--samples", samples, "Sample count");
  gen->add_option("--dims", dims, "Feature count");
  gen->add_option("--classes", classes, "Class count");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, run_out);
    if (rep->parsed()) {
      ropts.out_dir = rout;
      ropts.epochs = repochs;
      ropts.iterations = riters;
      return cmd_reproduce(recipe, ropts);
    }
    if (ver->parsed()) {
      if (*tol_opt) vopts.tol = tol;
      vopts.recipe.iterations = viters;
      const auto report = verify(kind, vopts);
      std::cout << report.to_text();
      return report.passed() ? 0 : kFail;
    }
    if (gen->parsed()) return cmd_gen(generator, gen_seed, gen_out, samples, dims, classes);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
  return kUsage;
}
