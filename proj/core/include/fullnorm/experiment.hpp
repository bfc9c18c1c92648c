#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fullnorm/config.hpp"
#include "fullnorm/estimation.hpp"

namespace fullnorm {

inline constexpr const char* kMetricsHeader =
    "iteration,epoch,split,loss,error_rate,est_sq_error,grad_norm_sq,lr,alpha,wall_ms";

struct MetricsRow {
  std::uint64_t iteration = 0;
  std::size_t epoch = 0;
  std::string split;  // train | test
  double loss = 0.0;
  double error_rate = 0.0;
  std::vector<double> est_sq_error;  // per FN layer; empty unless the oracle ran
  std::optional<double> grad_norm_sq;
  std::optional<double> lr;
  std::optional<double> alpha;
  std::optional<double> wall_ms;
};

struct RunResult {
  std::vector<std::string> metadata;  // CSV comment lines, without the leading "# "
  std::vector<MetricsRow> rows;
  ErrorSeries series;  // oracle evaluations, iteration = k of the estimate update
  Network net;         // final state
};

/// Resolves mnist / cifar10 roots: explicit dir, else FULLNORM_DATA_DIR.
std::filesystem::path resolve_data_dir(const std::string& explicit_dir);

/// Materializes the train/test split the config describes.
TrainTest load_experiment_data(const ExperimentConfig& cfg);

/// Inference-mode loss and error over `ds`, evaluated in chunks. Leaves the
/// net's mode as it was.
ForwardResult evaluate(Network& net, const Dataset& ds, std::size_t chunk = 1024);

/// Trains per the config. Rows: the initial inference-mode evaluation on the
/// train and test sets (iteration 0, epoch 0), one train row per iteration
/// (train-mode loss on the batch) and one test row per epoch. Writes the CSV
/// to cfg.output when it is non-empty. Throws ConfigError when norm = fn and
/// the schedules are inadmissible without optim.schedule_override.
RunResult run_experiment(const ExperimentConfig& cfg);

void write_metrics_csv(std::ostream& out, const RunResult& run);
void write_metrics_csv(const std::filesystem::path& path, const RunResult& run);

/// Mean of the per-iteration train rows of one epoch.
struct EpochSummary {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_error = 0.0;
  double test_loss = 0.0;
  double test_error = 0.0;
};
std::vector<EpochSummary> summarize_epochs(const RunResult& run);

}  // namespace fullnorm
