#include "fullnorm/verify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "fullnorm/errors.hpp"
#include "fullnorm/norm_operators.hpp"

namespace fullnorm {

namespace {

std::string num(double v) {
  std::ostringstream os;
  os.precision(3);
  os << v;
  return os.str();
}

NormState random_state(RngStream& r, std::size_t d, bool clamped) {
  NormState s;
  s.mu.resize(d);
  s.nu.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    s.mu[j] = r.uniform(-1.0, 1.0);
    s.nu[j] = s.mu[j] * s.mu[j] + r.uniform(0.5, 2.0);
  }
  s.alpha = r.uniform(0.1, 1.0);
  s.eps = clamped ? 100.0 : 1e-5;
  return s;
}

Layer random_norm(RngStream& r, std::size_t d, std::string& shape) {
  if (r.below(2) == 0) {
    shape += " bn";
    auto s = random_state(r, d, false);
    s.alpha = 0.1;
    return BatchNormLayer(s);
  }
  const bool clamped = r.below(5) == 0;
  shape += clamped ? " fn(clamped)" : " fn";
  return FullNormLayer(random_state(r, d, clamped));
}

struct GradInstance {
  Network net;
  Tensor x;
  std::vector<int> y;
  std::string shape;
};

GradInstance random_instance(RngStream& r) {
  const std::size_t in = 1 + r.below(8);
  const std::size_t classes = 2 + r.below(7);
  const std::size_t depth = 1 + r.below(3);
  const std::size_t b = 2 + r.below(5);
  GradInstance g;
  g.shape = "b=" + std::to_string(b) + " in=" + std::to_string(in);
  std::vector<Layer> layers;
  if (r.below(2) == 0) layers.push_back(random_norm(r, in, g.shape));
  std::size_t width = in;
  for (std::size_t i = 0; i < depth; ++i) {
    const bool last = i + 1 == depth;
    const std::size_t next = last ? classes : 1 + r.below(8);
    layers.emplace_back(LinearLayer::init_uniform(width, next, r));
    g.shape += " linear(" + std::to_string(next) + ")";
    width = next;
    if (last) break;
    if (r.below(3) != 0) layers.push_back(random_norm(r, width, g.shape));
    if (r.below(3) != 0) {
      layers.emplace_back(ReluLayer{});
      g.shape += " relu";
    }
  }
  layers.emplace_back(NllLayer{});
  g.shape += " nll";
  g.net = Network(std::move(layers));

  g.x = rng_normal(r, b, in);
  for (std::size_t j = 0; j < in; ++j) {
    const double scale = r.uniform(0.5, 3.0);
    const double shift = r.uniform(-2.0, 2.0);
    for (std::size_t i = 0; i < b; ++i) g.x(i, j) = g.x(i, j) * scale + shift;
  }
  for (std::size_t i = 0; i < b; ++i) g.y.push_back(static_cast<int>(r.below(classes)));
  return g;
}

// Smallest distance of any relu input from its kink, or of any FN layer's
// nu - mu^2 from eps, in a train-mode forward. Finite differences across
// either boundary are meaningless.
double kink_margin(const GradInstance& g) {
  Network net = g.net;
  net.set_mode(Mode::train);
  Tensor h = g.x;
  double margin = INFINITY;
  auto& layers = net.layers();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    std::visit(
        [&](auto& l) {
          using L = std::decay_t<decltype(l)>;
          if constexpr (std::is_same_v<L, LinearLayer>) {
            h = l.forward(h);
          } else if constexpr (std::is_same_v<L, ReluLayer>) {
            for (double v : h.data()) margin = std::min(margin, std::abs(v));
            h = l.forward(h);
          } else if constexpr (std::is_same_v<L, BatchNormLayer>) {
            h = l.forward(h, Mode::train);
          } else if constexpr (std::is_same_v<L, FullNormLayer>) {
            h = l.forward(h, Mode::train);
            const auto& s = l.state();
            for (std::size_t j = 0; j < s.width(); ++j)
              margin = std::min(margin, std::abs(s.nu[j] - s.mu[j] * s.mu[j] - s.eps));
          }
        },
        layers[i]);
  }
  return margin;
}

double loss_at(const Network& snapshot, const GradInstance& g, std::size_t layer, std::size_t entry,
               double delta) {
  Network net = snapshot;
  net.set_mode(Mode::train);
  net.linear_layers()[layer]->weights().w.data()[entry] += delta;
  return net.forward(g.x, g.y).loss;
}

}  // namespace

bool VerifyReport::passed() const {
  if (assertions.empty()) return false;
  return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
}

std::string VerifyReport::to_text() const {
  std::ostringstream os;
  os << "verify " << kind << '\n';
  for (const auto& a : assertions) {
    os << (a.passed ? "  pass  " : "  FAIL  ") << a.name;
    if (!a.detail.empty()) os << "  (" << a.detail << ")";
    os << '\n';
  }
  os << (passed() ? "PASS" : "FAIL") << '\n';
  return os.str();
}

VerifyReport verify_grads(const VerifyOptions& opts) {
  const double tol = opts.tol.value_or(1e-6);
  const std::size_t n = opts.instances ? opts.instances : 50;
  const double h = 1e-6;
  VerifyReport rep{"grads", {}};
  RngStream root(opts.seed);
  double worst = 0.0;
  std::size_t drawn = 0;
  for (std::size_t done = 0; done < n; ++drawn) {
    auto r = root.substream("grads", drawn);
    auto g = random_instance(r);
    if (kink_margin(g) < 1e-4) continue;

    Network net = g.net;
    net.set_mode(Mode::train);
    net.forward(g.x, g.y);
    const auto analytic = net.backward(FnGradMode::exact);

    double max_rel = 0.0;
    for (std::size_t l = 0; l < analytic.size(); ++l) {
      const auto a = analytic[l].data();
      for (std::size_t e = 0; e < a.size(); ++e) {
        const double num_grad = (loss_at(g.net, g, l, e, h) - loss_at(g.net, g, l, e, -h)) / (2 * h);
        const double denom = std::max({std::abs(a[e]), std::abs(num_grad), 1e-2});
        max_rel = std::max(max_rel, std::abs(a[e] - num_grad) / denom);
      }
    }
    worst = std::max(worst, max_rel);
    rep.assertions.push_back({"instance " + std::to_string(done) + ": " + g.shape,
                              max_rel <= tol, "max rel err " + num(max_rel)});
    ++done;
  }
  rep.assertions.push_back({"max relative error <= " + num(tol) + " over " + std::to_string(n) +
                                " instances",
                            worst <= tol, "max " + num(worst)});
  return rep;
}

VerifyReport verify_schedules(const VerifyOptions& opts) {
  VerifyReport rep{"schedules", {}};
  auto add = [&](const std::string& prefix, const ScheduleReport& r) {
    for (const auto& c : r.conditions) rep.assertions.push_back({prefix + c.name, c.passed, c.detail});
  };
  const ScheduleConstraint given{opts.gamma_exp, opts.alpha_exp, opts.lg};
  const Schedule gamma{1.0 / (2.0 * opts.lg), 2.0, 1.0, opts.gamma_exp};
  const Schedule alpha{1.0, 1.0, 1.0, opts.alpha_exp};
  add("given: ", check_schedule(given, gamma, alpha, opts.horizon));

  for (const auto& arm : recipe_arms("rates", opts.recipe)) {
    const auto& c = arm.config;
    add("rates recipe: ", check_schedule({c.lr.exponent, c.alpha.exponent, c.lg}, c.lr, c.alpha,
                                         opts.horizon));
  }
  return rep;
}

VerifyReport verify_rate_run(const RunResult& run, const VerifyOptions& opts) {
  VerifyReport rep{"rates", {}};
  const auto& s = run.series;
  if (s.k.empty()) {
    rep.assertions.push_back({"oracle series present", false, "no oracle evaluations"});
    return rep;
  }
  for (std::size_t l = 0; l < s.layer_count(); ++l) {
    const auto v = s.layer(l);
    const std::string name = "layer " + std::to_string(l) + " log-log slope over k in [" +
                             std::to_string(opts.slope_lo) + ", " + std::to_string(opts.slope_hi) +
                             "] within [" + num(opts.slope_min) + ", " + num(opts.slope_max) + "]";
    try {
      const double slope = loglog_slope(s.k, v, opts.slope_lo, opts.slope_hi);
      rep.assertions.push_back(
          {name, slope >= opts.slope_min && slope <= opts.slope_max, "slope " + num(slope)});
    } catch (const ContractError& e) {
      rep.assertions.push_back({name, false, e.what()});
    }
  }

  const std::uint64_t last = s.k.back();
  double head = 0.0, tail = 0.0;
  std::size_t nh = 0, nt = 0;
  for (std::size_t i = 0; i < s.k.size(); ++i) {
    if (s.k[i] <= opts.grad_window) {
      head += s.grad_norm_sq[i];
      ++nh;
    }
    if (s.k[i] + opts.grad_window > last) {
      tail += s.grad_norm_sq[i];
      ++nt;
    }
  }
  const std::string name = "trailing-" + std::to_string(opts.grad_window) +
                           " mean |grad f|^2 <= " + num(opts.grad_ratio) + " x leading mean";
  if (nh == 0 || nt == 0) {
    rep.assertions.push_back({name, false, "empty window"});
  } else {
    head /= static_cast<double>(nh);
    tail /= static_cast<double>(nt);
    rep.assertions.push_back({name, tail <= opts.grad_ratio * head,
                              "leading " + num(head) + ", trailing " + num(tail) + ", ratio " +
                                  num(tail / head)});
  }
  return rep;
}

VerifyReport verify_rates(const VerifyOptions& opts) {
  const auto runs = reproduce("rates", opts.recipe);
  return verify_rate_run(runs.front().result, opts);
}

VerifyReport verify_absorption(const VerifyOptions& opts) {
  const double tol = opts.tol.value_or(1e-10);
  const std::size_t n = opts.instances ? opts.instances : 200;
  VerifyReport rep{"absorption", {}};
  RngStream root(opts.seed);
  double worst = 0.0;
  std::size_t drawn = 0;
  for (std::size_t done = 0; done < n; ++drawn) {
    auto r = root.substream("absorption", drawn);
    const std::size_t d = 1 + r.below(8);
    const std::size_t out = 1 + r.below(8);
    const std::size_t rows = 2 + r.below(15);
    Tensor g = rng_normal(r, rows, d);
    for (std::size_t j = 0; j < d; ++j) {
      const double scale = std::exp(r.uniform(-2.0, 2.0));
      const double shift = r.uniform(-5.0, 5.0);
      for (std::size_t i = 0; i < rows; ++i) g(i, j) = g(i, j) * scale + shift;
    }
    const auto stats = stats_of(g);
    if (*std::min_element(stats.vars.begin(), stats.vars.end()) <= kVarianceFloor) continue;
    const AffineAug w{rng_normal(r, out, d + 1)};
    const auto sigma = r.below(2) ? Activation::relu : Activation::identity;
    const auto wp = build_w_prime(w, stats);
    for (std::size_t i = 0; i < rows; ++i) {
      const auto row = g.row(i);
      const auto a = apply_norm_operator(w, sigma, stats, row);
      const auto b = apply_plain_operator(wp, sigma, row);
      for (std::size_t o = 0; o < out; ++o) worst = std::max(worst, std::abs(a[o] - b[o]));
    }
    ++done;
  }
  rep.assertions.push_back({"max |norm op(W) - plain op(W')| <= " + num(tol) + " over " +
                                std::to_string(n) + " instances",
                            worst <= tol, "max deviation " + num(worst)});
  return rep;
}

VerifyReport verify(std::string_view kind, const VerifyOptions& opts) {
  if (kind == "grads") return verify_grads(opts);
  if (kind == "schedules") return verify_schedules(opts);
  if (kind == "rates") return verify_rates(opts);
  if (kind == "absorption") return verify_absorption(opts);
  throw ConfigError("unknown verify kind `" + std::string(kind) +
                    "` (grads, schedules, rates, absorption)");
}

}  // namespace fullnorm
