#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "fullnorm/config.hpp"
#include "fullnorm/errors.hpp"
#include "fullnorm/experiment.hpp"
#include "fullnorm/recipes.hpp"
#include "fullnorm/verify.hpp"
#include "support.hpp"

using namespace fullnorm;

namespace {

const char* kToy = R"(
name = toy
seed = 3
[dataset]
kind = toy3
[model]
hidden = 3
norm = fn
[batch]
size = 1
[optim]
lr = 0.1
momentum = 0.5
schedule_override = true
[train]
epochs = 4
)";

std::string csv_of(const RunResult& r) {
  std::ostringstream os;
  write_metrics_csv(os, r);
  return os.str();
}

std::vector<double> train_losses(const RunResult& r) {
  std::vector<double> out;
  for (const auto& row : r.rows)
    if (row.split == "train" && row.iteration > 0) out.push_back(row.loss);
  return out;
}

}  // namespace

TEST(KeyValue, SectionsCommentsOverrides) {
  auto kv = KeyValueText::parse("a = 1  # trailing\n# whole line\n[s]\nb = x y\nb = z\n");
  EXPECT_EQ(kv.count("a", 0), 1u);
  EXPECT_EQ(kv.str("s.b", ""), "z");
  EXPECT_EQ(kv.real("missing", 2.5), 2.5);
  EXPECT_TRUE(kv.unused_keys().empty());
}

TEST(KeyValue, TypedAccessors) {
  auto kv = KeyValueText::parse("f = yes\ng = off\nl = 4, 5,6\ne =\nr = 1e-3\n");
  EXPECT_TRUE(kv.flag("f", false));
  EXPECT_FALSE(kv.flag("g", true));
  EXPECT_EQ(kv.list("l", {}), (std::vector<std::size_t>{4, 5, 6}));
  EXPECT_TRUE(kv.list("e", {1}).empty());
  EXPECT_DOUBLE_EQ(kv.real("r", 0), 1e-3);
  auto bad = KeyValueText::parse("n = -1\nb = maybe\nx = 1.5q\n");
  EXPECT_THROW(bad.count("n", 0), ConfigError);
  EXPECT_THROW(bad.flag("b", false), ConfigError);
  EXPECT_THROW(bad.real("x", 0), ConfigError);
}

TEST(KeyValue, MalformedLines) {
  EXPECT_THROW(KeyValueText::parse("just words\n"), ConfigError);
  EXPECT_THROW(KeyValueText::parse("[open\n"), ConfigError);
  EXPECT_THROW(KeyValueText::parse(" = 3\n"), ConfigError);
}

TEST(Config, ParsesToyConfig) {
  const auto c = ExperimentConfig::from_text(kToy);
  EXPECT_EQ(c.name, "toy");
  EXPECT_EQ(c.seed, 3u);
  EXPECT_EQ(c.hidden, (std::vector<std::size_t>{3}));
  EXPECT_EQ(c.norm, NormKind::fn);
  EXPECT_EQ(c.batch_size, 1u);
  EXPECT_DOUBLE_EQ(c.lr.value(7), 0.1);
  EXPECT_EQ(c.epochs, 4u);
}

TEST(Config, UnknownKeysAreListed) {
  try {
    ExperimentConfig::from_text("seed = 1\nmodel.hiden = 3\nbogus = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("model.hiden"), std::string::npos) << msg;
    EXPECT_NE(msg.find("bogus"), std::string::npos) << msg;
  }
}

TEST(Config, SeedRequired) {
  EXPECT_THROW(ExperimentConfig::from_text("name = x\n"), ConfigError);
}

TEST(Config, RejectsBadValues) {
  const char* bad[] = {
      "seed = 1\nbatch.size = 0\n",
      "seed = 1\noptim.momentum = 1\n",
      "seed = 1\nmodel.fn_grad = sideways\n",
      "seed = 1\nmodel.norm = ln\n",
      "seed = 1\ndataset.kind = imagenet\n",
      "seed = 1\ndataset.kind = file\n",
      "seed = 1\nmodel.bn_alpha = 0\n",
      "seed = 1\nmodel.norm = none\nmodel.input_norm = true\n",
      "seed = 1\nmodel.norm = bn\neval.oracle = true\n",
      "seed = 1\noptim.alpha_scale = 2\n",
      "seed = 1\nbatch.strategy = sorted\n",
  };
  for (const char* text : bad) EXPECT_THROW(ExperimentConfig::from_text(text), ConfigError) << text;
}

TEST(Config, CanonicalDumpRoundTrips) {
  auto c = ExperimentConfig::from_text(kToy);
  c.alpha = {1.0, 1.0, 20.0, 0.4};
  c.note = "desk run";
  const auto text = c.to_text();
  EXPECT_EQ(ExperimentConfig::from_text(text).to_text(), text);
  for (const auto& id : recipe_ids()) {
    RecipeOptions o;
    for (const auto& arm : recipe_arms(id, o)) {
      const auto t = arm.config.to_text();
      EXPECT_EQ(ExperimentConfig::from_text(t).to_text(), t) << id;
    }
  }
}

TEST(Config, FromFile) {
  const auto dir = fntest::scratch_dir("config");
  std::ofstream(dir / "toy.cfg") << kToy;
  EXPECT_EQ(ExperimentConfig::from_file(dir / "toy.cfg").name, "toy");
  EXPECT_THROW(ExperimentConfig::from_file(dir / "absent.cfg"), ConfigError);
}

TEST(Experiment, ZeroEpochsWritesInitialEvaluationOnly) {
  auto c = ExperimentConfig::from_text(kToy);
  c.epochs = 0;
  const auto dir = fntest::scratch_dir("zero_epochs");
  c.output = (dir / "out.csv").string();
  const auto r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].split, "train");
  EXPECT_EQ(r.rows[1].split, "test");
  std::ifstream in(dir / "out.csv");
  std::string line, header;
  std::size_t data_lines = 0;
  while (std::getline(in, line)) {
    if (line.rfind("# ", 0) == 0) continue;
    if (header.empty()) {
      header = line;
      continue;
    }
    ++data_lines;
  }
  EXPECT_EQ(header, kMetricsHeader);
  EXPECT_EQ(data_lines, 2u);
}

TEST(Experiment, RowsAndColumns) {
  const auto r = run_experiment(ExperimentConfig::from_text(kToy));
  std::size_t train_rows = 0, test_rows = 0;
  for (const auto& row : r.rows) {
    EXPECT_GE(row.loss, 0.0);
    EXPECT_GE(row.error_rate, 0.0);
    EXPECT_LE(row.error_rate, 1.0);
    if (row.split == "train" && row.iteration > 0) {
      ++train_rows;
      ASSERT_TRUE(row.lr && row.alpha);
      EXPECT_DOUBLE_EQ(*row.lr, 0.1);
    }
    if (row.split == "test") ++test_rows;
  }
  EXPECT_EQ(train_rows, 12u);
  EXPECT_EQ(test_rows, 5u);
  const auto csv = csv_of(r);
  EXPECT_EQ(csv.rfind("# fullnorm metrics v1\n", 0), 0u);
  EXPECT_NE(csv.find("\n" + std::string(kMetricsHeader) + "\n"), std::string::npos);
}

TEST(Experiment, ByteIdenticalReruns) {
  auto c = ExperimentConfig::from_text(kToy);
  EXPECT_EQ(csv_of(run_experiment(c)), csv_of(run_experiment(c)));
  c.norm = NormKind::bn;
  c.strategy = BatchStrategy::shuffled;
  c.batch_size = 2;
  EXPECT_EQ(csv_of(run_experiment(c)), csv_of(run_experiment(c)));
  auto other = c;
  other.seed = 4;
  EXPECT_NE(csv_of(run_experiment(c)), csv_of(run_experiment(other)));
}

TEST(Experiment, FullBatchBnMatchesFullRateFn) {
  auto c = ExperimentConfig::from_text(kToy);
  c.batch_size = 3;
  c.epochs = 100;
  c.momentum = 0.0;
  c.eps = 0.0;
  c.alpha = Schedule::constant(1.0);
  c.fn_grad = FnGradMode::exact;
  auto bn = c;
  bn.norm = NormKind::bn;
  const auto a = train_losses(run_experiment(c));
  const auto b = train_losses(run_experiment(bn));
  ASSERT_EQ(a.size(), 100u);
  ASSERT_EQ(b.size(), 100u);
  double worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  EXPECT_LE(worst, 1e-10);
}

TEST(Experiment, InadmissibleSchedulesNeedOverride) {
  auto c = ExperimentConfig::from_text(kToy);
  c.schedule_override = false;
  EXPECT_THROW(run_experiment(c), ConfigError);
  c.lr = Schedule::corollary_gamma(1.0);
  c.alpha = Schedule::corollary_alpha();
  EXPECT_NO_THROW(run_experiment(c));
}

TEST(Experiment, OracleColumns) {
  auto c = ExperimentConfig::from_text(kToy);
  c.oracle = true;
  c.oracle_every = 2;
  const auto r = run_experiment(c);
  EXPECT_EQ(r.series.k.size(), 6u);
  EXPECT_EQ(r.series.k.front(), 1u);
  EXPECT_EQ(r.series.layer_count(), 1u);
  std::size_t with_oracle = 0;
  for (const auto& row : r.rows)
    if (row.grad_norm_sq) {
      ++with_oracle;
      EXPECT_EQ(row.est_sq_error.size(), 1u);
    }
  EXPECT_EQ(with_oracle, 6u);
}

TEST(Experiment, MissingMnistIsReported) {
  auto c = ExperimentConfig::from_text("seed = 1\ndataset.kind = mnist\nmodel.norm = bn\n");
  c.data_dir = fntest::scratch_dir("no_mnist").string();
  EXPECT_THROW(run_experiment(c), FormatError);
}

TEST(Experiment, FileDataset) {
  const auto dir = fntest::scratch_dir("file_ds");
  save_dataset(dir / "toy.fnds", gen_toy3());
  auto c = ExperimentConfig::from_text(kToy);
  c.dataset = "file";
  c.train_path = (dir / "toy.fnds").string();
  const auto data = load_experiment_data(c);
  EXPECT_TRUE(data.train == gen_toy3());
  EXPECT_TRUE(data.test == gen_toy3());
}

TEST(Experiment, EvaluateRestoresMode) {
  auto r = run_experiment(ExperimentConfig::from_text(kToy));
  r.net.set_mode(Mode::train);
  const auto before = r.net;
  const auto e = evaluate(r.net, gen_toy3(), 2);
  EXPECT_EQ(r.net.mode(), Mode::train);
  EXPECT_TRUE(r.net == before);
  EXPECT_EQ(e.samples, 3u);
}

TEST(Experiment, EpochSummaries) {
  const auto r = run_experiment(ExperimentConfig::from_text(kToy));
  const auto s = summarize_epochs(r);
  ASSERT_EQ(s.size(), 4u);
  EXPECT_EQ(s.back().epoch, 4u);
}

TEST(Recipes, UnknownIdThrows) {
  EXPECT_THROW(recipe_arms("nope", {}), ConfigError);
  EXPECT_THROW(reproduce("nope", {}), ConfigError);
}

TEST(Recipes, CaptionHyperparameters) {
  RecipeOptions o;
  const auto fig1 = recipe_arms("fig1", o);
  ASSERT_EQ(fig1.size(), 1u);
  EXPECT_EQ(fig1[0].config.batch_size, 1u);
  EXPECT_EQ(fig1[0].config.hidden, (std::vector<std::size_t>{3}));
  EXPECT_EQ(fig1[0].config.norm, NormKind::bn);
  EXPECT_EQ(fig1[0].config.epochs, 200u);

  const auto m = recipe_arms("mnist_unshuffled", o);
  ASSERT_EQ(m.size(), 2u);
  for (const auto& arm : m) {
    EXPECT_EQ(arm.config.batch_size, 64u);
    EXPECT_EQ(arm.config.strategy, BatchStrategy::single_label);
    EXPECT_DOUBLE_EQ(arm.config.lr.value(0), 0.01);
    EXPECT_DOUBLE_EQ(arm.config.momentum, 0.5);
    EXPECT_NEAR(arm.config.alpha.value(20), 0.757858, 1e-6);
    EXPECT_EQ(arm.config.train_cap, 6400u);
  }
  EXPECT_EQ(m[0].config.seed, m[1].config.seed);

  const auto cifar = recipe_arms("cifar_unshuffled", o);
  EXPECT_DOUBLE_EQ(cifar[0].config.momentum, 0.9);
  EXPECT_EQ(cifar[0].config.plan.k_labels, 3u);
  EXPECT_DOUBLE_EQ(cifar[0].config.lr_decay_factor, 0.2);

  const auto rates = recipe_arms("rates", o);
  ASSERT_EQ(rates.size(), 1u);
  EXPECT_EQ(rates[0].config.max_iterations, 100000u);
  EXPECT_DOUBLE_EQ(rates[0].config.momentum, 0.0);
  EXPECT_TRUE(rates[0].config.oracle);
}

TEST(Recipes, CapAndScaleNotedInMetadata) {
  RecipeOptions o;
  o.epochs = 1;
  const auto fig3 = recipe_arms("fig3", o);
  EXPECT_EQ(fig3[0].config.large_variation.n, 2000u);
  EXPECT_NE(fig3[0].config.note.find("2000"), std::string::npos);
  o.full_scale = true;
  EXPECT_EQ(recipe_arms("fig3", o)[0].config.large_variation.n, 10000u);
}

TEST(Verify, SchedulesDefaultAndViolation) {
  VerifyOptions o;
  o.horizon = 1000;
  EXPECT_TRUE(verify("schedules", o).passed());
  o.gamma_exp = 0.5;
  const auto r = verify("schedules", o);
  EXPECT_FALSE(r.passed());
  EXPECT_NE(r.to_text().find("a < 2*gamma - 1"), std::string::npos);
}

TEST(Verify, GradsSmallSweep) {
  VerifyOptions o;
  o.instances = 10;
  EXPECT_TRUE(verify("grads", o).passed()) << verify("grads", o).to_text();
}

TEST(Verify, Absorption) {
  const auto r = verify("absorption", {});
  EXPECT_TRUE(r.passed()) << r.to_text();
}

TEST(Verify, UnknownKind) { EXPECT_THROW(verify("speed", {}), ConfigError); }
