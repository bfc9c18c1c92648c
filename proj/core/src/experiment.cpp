#include "fullnorm/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace fs = std::filesystem;

namespace {

fs::path first_existing(const fs::path& root, std::initializer_list<const char*> subdirs,
                        const char* probe) {
  for (const char* sub : subdirs) {
    const fs::path dir = root / sub;
    if (fs::exists(dir / probe)) return dir;
  }
  return {};
}

TrainTest load_mnist(const fs::path& root) {
  const auto dir = first_existing(root, {"mnist", "MNIST", "."}, "train-images-idx3-ubyte");
  if (dir.empty())
    throw FormatError("missing dataset files: no train-images-idx3-ubyte under " + root.string() +
                      " (or its mnist/ subdirectory)");
  TrainTest tt;
  tt.train = load_mnist_idx(dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte");
  tt.test = load_mnist_idx(dir / "t10k-images-idx3-ubyte", dir / "t10k-labels-idx1-ubyte");
  return tt;
}

TrainTest load_cifar(const fs::path& root) {
  const auto dir =
      first_existing(root, {"cifar-10-batches-bin", "cifar10", "."}, "data_batch_1.bin");
  if (dir.empty())
    throw FormatError("missing dataset files: no data_batch_1.bin under " + root.string() +
                      " (or cifar-10-batches-bin/)");
  std::vector<fs::path> train_files;
  for (int i = 1; i <= 5; ++i) {
    auto p = dir / ("data_batch_" + std::to_string(i) + ".bin");
    if (fs::exists(p)) train_files.push_back(p);
  }
  const fs::path test_file = dir / "test_batch.bin";
  TrainTest tt;
  tt.train = load_cifar10_bin(train_files);
  tt.test = load_cifar10_bin(std::span<const fs::path>(&test_file, 1));
  return tt;
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

struct Batch {
  Tensor x;
  std::vector<int> y;
};

Batch gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
  Batch b{gather_rows(ds.features, idx), {}};
  b.y.reserve(idx.size());
  for (std::size_t i : idx) b.y.push_back(ds.labels[i]);
  return b;
}

}  // namespace

fs::path resolve_data_dir(const std::string& explicit_dir) {
  if (!explicit_dir.empty()) return explicit_dir;
  if (const char* env = std::getenv("FULLNORM_DATA_DIR"); env && *env) return env;
  throw FormatError("missing dataset files: set FULLNORM_DATA_DIR or dataset.data_dir");
}

TrainTest load_experiment_data(const ExperimentConfig& cfg) {
  const RngStream root(cfg.seed);
  const std::uint64_t data_seed = root.substream("data").seed();
  TrainTest tt;
  bool same = cfg.test_on_train;
  if (cfg.dataset == "toy3") {
    tt.train = gen_toy3();
    same = true;
  } else if (cfg.dataset == "large_variation") {
    tt = gen_large_variation(cfg.large_variation, data_seed);
  } else if (cfg.dataset == "compositional") {
    tt.train = gen_compositional(cfg.compositional, data_seed);
    same = true;
  } else if (cfg.dataset == "mnist") {
    tt = load_mnist(resolve_data_dir(cfg.data_dir));
  } else if (cfg.dataset == "cifar10") {
    tt = load_cifar(resolve_data_dir(cfg.data_dir));
  } else if (cfg.dataset == "file") {
    tt.train = load_dataset(fs::path(cfg.train_path));
    if (cfg.test_path.empty()) {
      same = true;
    } else {
      tt.test = load_dataset(fs::path(cfg.test_path));
    }
  } else {
    throw ConfigError("unknown dataset.kind `" + cfg.dataset + "`");
  }

  if (cfg.train_cap > 0 && tt.train.size() > cfg.train_cap)
    tt.train = stratified_cap(tt.train, cfg.train_cap);
  if (!same && cfg.test_cap > 0 && tt.test.size() > cfg.test_cap)
    tt.test = stratified_cap(tt.test, cfg.test_cap);
  if (cfg.random_scale) {
    tt.train = scale_samples(tt.train, cfg.scale_lo, cfg.scale_hi, root.substream("scale", 0).seed());
    if (!same)
      tt.test = scale_samples(tt.test, cfg.scale_lo, cfg.scale_hi, root.substream("scale", 1).seed());
  }
  if (same) tt.test = tt.train;
  tt.train.validate();
  tt.test.validate();
  return tt;
}

ForwardResult evaluate(Network& net, const Dataset& ds, std::size_t chunk) {
  if (ds.size() == 0) throw EmptyBatchError("evaluate: empty dataset");
  if (chunk == 0) throw ContractError("evaluate: chunk must be positive");
  const Mode saved = net.mode();
  net.set_mode(Mode::infer);
  ForwardResult total;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += chunk) {
    const std::size_t end = std::min(ds.size(), start + chunk);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const auto b = gather(ds, idx);
    const auto r = net.forward(b.x, b.y);
    loss_sum += r.loss * static_cast<double>(r.samples);
    total.errors += r.errors;
    total.samples += r.samples;
  }
  net.set_mode(saved);
  total.loss = loss_sum / static_cast<double>(total.samples);
  return total;
}

RunResult run_experiment(const ExperimentConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() -> std::optional<double> {
    if (!cfg.timing) return std::nullopt;
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  };

  const TrainTest data = load_experiment_data(cfg);
  const Dataset& train = data.train;
  const Dataset& test = data.test;
  if (cfg.batch_size > train.size())
    throw ConfigError("batch.size " + std::to_string(cfg.batch_size) + " exceeds the " +
                      std::to_string(train.size()) + " training samples");

  const RngStream root(cfg.seed);
  auto init_rng = root.substream("init");
  NormOptions nopts;
  nopts.bn_alpha = cfg.bn_alpha;
  nopts.fn_alpha = cfg.alpha.value(0);
  nopts.eps = cfg.eps;
  nopts.norm_logits = cfg.norm_logits;
  RunResult run;
  run.net = build_mlp(train.dims(), cfg.hidden, train.class_count, cfg.norm, cfg.input_norm, nopts,
                      init_rng);
  Network& net = run.net;

  const auto plan_seed = [&](std::size_t epoch) { return root.substream("plan", epoch).seed(); };
  const std::size_t per_epoch =
      make_batch_plan(train, cfg.strategy, cfg.batch_size, cfg.plan, plan_seed(1)).batches.size();
  std::uint64_t total = static_cast<std::uint64_t>(per_epoch) * cfg.epochs;
  if (cfg.max_iterations > 0) total = std::min(total, cfg.max_iterations);

  if (cfg.norm == NormKind::fn) {
    const ScheduleConstraint sc{cfg.lr.exponent, cfg.alpha.exponent, cfg.lg};
    const auto report = check_schedule(sc, cfg.lr, cfg.alpha, std::max<std::uint64_t>(total, 1));
    if (!report.admissible() && !cfg.schedule_override) {
      throw ConfigError("inadmissible schedules (set optim.schedule_override = true to run anyway):\n" +
                        report.to_text());
    }
  }

  run.metadata.push_back("fullnorm metrics v1");
  run.metadata.push_back("experiment: " + cfg.name);
  run.metadata.push_back("seed: " + std::to_string(cfg.seed));
  run.metadata.push_back("train: " + train.provenance + " (" + std::to_string(train.size()) +
                         " samples, " + std::to_string(train.dims()) + " dims, " +
                         std::to_string(train.class_count) + " classes)");
  run.metadata.push_back("test: " + test.provenance + " (" + std::to_string(test.size()) +
                         " samples)");
  if (cfg.train_cap > 0 || cfg.test_cap > 0) {
    run.metadata.push_back("desk-scale cap: train " + std::to_string(cfg.train_cap) + ", test " +
                           std::to_string(cfg.test_cap) + " (0 = uncapped)");
  }
  if (!cfg.note.empty()) run.metadata.push_back("note: " + cfg.note);
  {
    // the destination path would make reruns into different dirs differ
    auto dumped = cfg;
    dumped.output.clear();
    std::istringstream lines(dumped.to_text());
    std::string l;
    while (std::getline(lines, l)) run.metadata.push_back("config: " + l);
  }

  auto eval_row = [&](std::uint64_t it, std::size_t epoch, const char* split, const Dataset& ds) {
    const auto r = evaluate(net, ds);
    MetricsRow row;
    row.iteration = it;
    row.epoch = epoch;
    row.split = split;
    row.loss = r.loss;
    row.error_rate = r.error_rate();
    row.wall_ms = elapsed();
    run.rows.push_back(std::move(row));
  };
  eval_row(0, 0, "train", train);
  eval_row(0, 0, "test", test);

  OptimState state;
  auto oracle_due = [&](std::uint64_t k) {
    return k % cfg.oracle_every == 0 || k < cfg.oracle_head || k + cfg.oracle_tail >= total;
  };

  for (std::size_t epoch = 1; epoch <= cfg.epochs && state.k < total; ++epoch) {
    const auto plan = make_batch_plan(train, cfg.strategy, cfg.batch_size, cfg.plan, plan_seed(epoch));
    double mult = 1.0;
    if (cfg.lr_decay_every > 0)
      mult = std::pow(cfg.lr_decay_factor, static_cast<double>((epoch - 1) / cfg.lr_decay_every));

    for (const auto& idx : plan.batches) {
      if (state.k >= total) break;
      const auto b = gather(train, idx);
      const std::uint64_t k = state.k;
      const double alpha_k = cfg.alpha.value(k);
      const double gamma_k = cfg.lr.value(k) * mult;

      const auto fwd = mcsgd_estimation_update(net, b.x, b.y, alpha_k);
      MetricsRow row;
      if (cfg.oracle && oracle_due(k)) {
        const auto exact = full_dataset_stats(net, train);
        row.est_sq_error = estimation_error(current_estimates(net), exact);
        row.grad_norm_sq = full_gradient_norm_sq(net, train);
        run.series.append(k + 1, row.est_sq_error, *row.grad_norm_sq);
      }
      const auto grads = gradient_oracle(net, cfg.fn_grad);
      momentum_update(net, state, grads, gamma_k, cfg.momentum);
      ++state.k;

      if (cfg.log_iterations) {
        row.iteration = state.k;
        row.epoch = epoch;
        row.split = "train";
        row.loss = fwd.loss;
        row.error_rate = fwd.error_rate();
        row.lr = gamma_k;
        if (cfg.norm == NormKind::fn) row.alpha = alpha_k;
        if (cfg.norm == NormKind::bn) row.alpha = cfg.bn_alpha;
        row.wall_ms = elapsed();
        run.rows.push_back(std::move(row));
      }
    }
    eval_row(state.k, epoch, "test", test);
  }

  if (!cfg.output.empty()) write_metrics_csv(fs::path(cfg.output), run);
  return run;
}

void write_metrics_csv(std::ostream& out, const RunResult& run) {
  for (const auto& m : run.metadata) out << "# " << m << '\n';
  out << kMetricsHeader << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? fmt(*v) : std::string(); };
  for (const auto& r : run.rows) {
    out << r.iteration << ',' << r.epoch << ',' << r.split << ',' << fmt(r.loss) << ','
        << fmt(r.error_rate) << ',';
    for (std::size_t i = 0; i < r.est_sq_error.size(); ++i) {
      if (i) out << ';';
      out << fmt(r.est_sq_error[i]);
    }
    out << ',' << opt(r.grad_norm_sq) << ',' << opt(r.lr) << ',' << opt(r.alpha) << ','
        << opt(r.wall_ms) << '\n';
  }
}

void write_metrics_csv(const fs::path& path, const RunResult& run) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  write_metrics_csv(out, run);
  if (!out) throw FormatError("write failed: " + path.string());
}

std::vector<EpochSummary> summarize_epochs(const RunResult& run) {
  std::vector<EpochSummary> out;
  std::vector<std::size_t> counts;
  for (const auto& r : run.rows) {
    if (r.epoch == 0) continue;
    if (out.size() < r.epoch) {
      out.resize(r.epoch);
      counts.resize(r.epoch, 0);
    }
    auto& s = out[r.epoch - 1];
    s.epoch = r.epoch;
    if (r.split == "train") {
      s.train_loss += r.loss;
      s.train_error += r.error_rate;
      ++counts[r.epoch - 1];
    } else {
      s.test_loss = r.loss;
      s.test_error = r.error_rate;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (counts[i] == 0) continue;
    out[i].train_loss /= static_cast<double>(counts[i]);
    out[i].train_error /= static_cast<double>(counts[i]);
  }
  return out;
}

}  // namespace fullnorm
