#include "fullnorm/recipes.hpp"

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

ExperimentConfig base(const std::string& name, const RecipeOptions& o) {
  ExperimentConfig c;
  c.name = name;
  c.seed = o.seed;
  c.data_dir = o.data_dir;
  return c;
}

// Constant lr with momentum, as in the figure captions.
void figure_optim(ExperimentConfig& c, double lr, double momentum) {
  c.lr = Schedule::constant(lr);
  c.momentum = momentum;
  c.schedule_override = true;
}

std::vector<RecipeArm> fig1(const RecipeOptions& o) {
  auto c = base("fig1_bn", o);
  c.dataset = "toy3";
  c.test_on_train = true;
  c.hidden = {3};
  c.norm = NormKind::bn;
  c.strategy = BatchStrategy::shuffled;
  c.batch_size = 1;
  figure_optim(c, 0.1, 0.5);
  c.epochs = 200;
  return {{"bn", c}};
}

std::vector<RecipeArm> fig3(const RecipeOptions& o) {
  auto c = base("fig3", o);
  c.dataset = "large_variation";
  if (!o.full_scale) {
    c.large_variation.n = 2000;
    c.large_variation.d = 200;
    c.large_variation.classes = 200;
    c.note = "desk-scale variant: 2000 samples, 200 dims, 200 classes";
  }
  if (o.cap > 0) c.train_cap = o.cap;
  c.hidden = {};
  c.strategy = BatchStrategy::shuffled;
  c.batch_size = 20;
  figure_optim(c, 0.01, 0.5);
  c.epochs = 20;

  auto plain = c;
  plain.name = "fig3_plain";
  plain.norm = NormKind::none;
  auto bn = c;
  bn.name = "fig3_bn";
  bn.norm = NormKind::bn;
  bn.input_norm = true;
  return {{"plain", plain}, {"bn", bn}};
}

ExperimentConfig image_base(const std::string& name, const RecipeOptions& o, const char* dataset,
                            std::size_t default_cap) {
  auto c = base(name, o);
  c.dataset = dataset;
  c.train_cap = o.cap > 0 ? o.cap : default_cap;
  c.hidden = {128, 64};
  c.batch_size = 64;
  c.fn_grad = FnGradMode::paper;
  return c;
}

std::vector<RecipeArm> bn_fn_arms(const ExperimentConfig& c) {
  auto bn = c;
  bn.name = c.name + "_bn";
  bn.norm = NormKind::bn;
  auto fn = c;
  fn.name = c.name + "_fn";
  fn.norm = NormKind::fn;
  return {{"bn", bn}, {"fn", fn}};
}

std::vector<RecipeArm> mnist(const RecipeOptions& o, bool shuffled) {
  auto c = image_base(shuffled ? "mnist_shuffled" : "mnist_unshuffled", o, "mnist", 6400);
  c.strategy = shuffled ? BatchStrategy::shuffled : BatchStrategy::single_label;
  figure_optim(c, 0.01, 0.5);
  c.alpha = {1.0, 1.0, 20.0, 0.4};
  c.epochs = 40;
  return bn_fn_arms(c);
}

std::vector<RecipeArm> cifar(const RecipeOptions& o, bool shuffled) {
  auto c = image_base(shuffled ? "cifar_shuffled" : "cifar_unshuffled", o, "cifar10", 5000);
  c.strategy = shuffled ? BatchStrategy::shuffled : BatchStrategy::max_k_labels;
  c.plan.k_labels = 3;
  figure_optim(c, 0.01, 0.9);
  c.lr_decay_factor = 0.2;
  c.lr_decay_every = 20;
  c.alpha = shuffled ? Schedule{1.0, 1.0, 20.0, 0.2} : Schedule{1.0, 1.0, 5.0, 0.3};
  c.epochs = 60;
  return bn_fn_arms(c);
}

std::vector<RecipeArm> batchsize(const RecipeOptions& o) {
  auto c = image_base("batchsize", o, "mnist", 6400);
  c.random_scale = true;
  c.scale_lo = -2.5;
  c.scale_hi = 2.5;
  c.strategy = BatchStrategy::shuffled;
  figure_optim(c, 0.01, 0.5);
  c.alpha = {1.0, 1.0, 20.0, 0.4};
  c.epochs = 10;
  std::vector<RecipeArm> out;
  for (const auto& arm : bn_fn_arms(c)) {
    for (std::size_t b : {1, 16}) {
      auto a = arm;
      a.name += "_b" + std::to_string(b);
      a.config.name += "_b" + std::to_string(b);
      a.config.batch_size = b;
      out.push_back(a);
    }
  }
  return out;
}

std::vector<RecipeArm> rates(const RecipeOptions& o) {
  auto c = base("rates", o);
  c.dataset = "compositional";
  c.compositional = {};  // 512 samples, 8 dims, 4 classes
  if (o.cap > 0) c.compositional.n = o.cap;
  c.hidden = {16, 16};
  c.norm = NormKind::fn;
  c.input_norm = true;  // three FN layers in total
  c.fn_grad = FnGradMode::compositional;
  c.strategy = BatchStrategy::shuffled;
  c.batch_size = 4;
  c.lg = 1.0;
  c.lr = Schedule::corollary_gamma(c.lg);
  c.alpha = Schedule::corollary_alpha();
  c.max_iterations = 100000;
  c.epochs = 1000;  // 128 batches per epoch; max_iterations binds
  c.oracle = true;
  c.oracle_every = 10;
  c.oracle_head = 1000;
  c.oracle_tail = 1000;
  return {{"fn", c}};
}

}  // namespace

const std::vector<std::string>& recipe_ids() {
  static const std::vector<std::string> ids = {"fig1",           "fig3",
                                               "mnist_unshuffled", "cifar_unshuffled",
                                               "mnist_shuffled", "cifar_shuffled",
                                               "batchsize",      "rates"};
  return ids;
}

std::vector<RecipeArm> recipe_arms(std::string_view id, const RecipeOptions& opts) {
  std::vector<RecipeArm> arms;
  if (id == "fig1") arms = fig1(opts);
  else if (id == "fig3") arms = fig3(opts);
  else if (id == "mnist_unshuffled") arms = mnist(opts, false);
  else if (id == "mnist_shuffled") arms = mnist(opts, true);
  else if (id == "cifar_unshuffled") arms = cifar(opts, false);
  else if (id == "cifar_shuffled") arms = cifar(opts, true);
  else if (id == "batchsize") arms = batchsize(opts);
  else if (id == "rates") arms = rates(opts);
  else {
    std::string known;
    for (const auto& r : recipe_ids()) known += " " + r;
    throw ConfigError("unknown recipe `" + std::string(id) + "`; known:" + known);
  }
  for (auto& arm : arms) {
    if (opts.epochs) arm.config.epochs = *opts.epochs;
    if (opts.iterations) arm.config.max_iterations = *opts.iterations;
    if (!opts.out_dir.empty())
      arm.config.output = (opts.out_dir / (std::string(id) + "_" + arm.name + ".csv")).string();
  }
  return arms;
}

std::vector<ArmRun> reproduce(std::string_view id, const RecipeOptions& opts) {
  std::vector<ArmRun> out;
  for (auto& arm : recipe_arms(id, opts)) out.push_back({arm.name, run_experiment(arm.config)});
  return out;
}

}  // namespace fullnorm
