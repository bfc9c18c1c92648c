#include "fullnorm/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string fmt_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

}  // namespace

KeyValueText KeyValueText::parse(std::string_view text) {
  KeyValueText kv;
  std::string section;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;

    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
      section = std::string(trim(line.substr(1, line.size() - 2)));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("line " + std::to_string(line_no) + ": expected `key = value`");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    std::string full = section.empty() ? std::string(key) : section + "." + std::string(key);
    kv.values_[full] = std::string(trim(line.substr(eq + 1)));
  }
  return kv;
}

const std::string* KeyValueText::lookup(const std::string& key) {
  used_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KeyValueText::str(const std::string& key, const std::string& fallback) {
  const auto* v = lookup(key);
  return v ? *v : fallback;
}

double KeyValueText::real(const std::string& key, double fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  double out = 0.0;
  const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc{} || r.ptr != v->data() + v->size())
    throw ConfigError(key + ": expected a number, got `" + *v + "`");
  return out;
}

std::uint64_t KeyValueText::count(const std::string& key, std::uint64_t fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::uint64_t out = 0;
  const auto r = std::from_chars(v->data(), v->data() + v->size(), out);
  if (r.ec != std::errc{} || r.ptr != v->data() + v->size())
    throw ConfigError(key + ": expected a non-negative integer, got `" + *v + "`");
  return out;
}

bool KeyValueText::flag(const std::string& key, bool fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw ConfigError(key + ": expected true/false, got `" + *v + "`");
}

std::vector<std::size_t> KeyValueText::list(const std::string& key,
                                            const std::vector<std::size_t>& fallback) {
  const auto* v = lookup(key);
  if (!v) return fallback;
  std::vector<std::size_t> out;
  std::string_view rest = *v;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    std::size_t n = 0;
    const auto r = std::from_chars(item.data(), item.data() + item.size(), n);
    if (r.ec != std::errc{} || r.ptr != item.data() + item.size() || n == 0)
      throw ConfigError(key + ": expected positive integers, got `" + *v + "`");
    out.push_back(n);
  }
  return out;
}

std::vector<std::string> KeyValueText::unused_keys() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_)
    if (!used_.count(k)) out.push_back(k);
  return out;
}

FnGradMode parse_fn_grad_mode(std::string_view name) {
  if (name == "paper") return FnGradMode::paper;
  if (name == "exact") return FnGradMode::exact;
  if (name == "compositional") return FnGradMode::compositional;
  throw ConfigError("unknown fn gradient mode `" + std::string(name) +
                    "` (paper, exact, compositional)");
}

const char* to_string(FnGradMode mode) {
  switch (mode) {
    case FnGradMode::paper: return "paper";
    case FnGradMode::exact: return "exact";
    case FnGradMode::compositional: return "compositional";
  }
  return "?";
}

NormKind parse_norm_kind(std::string_view name) {
  if (name == "none") return NormKind::none;
  if (name == "bn") return NormKind::bn;
  if (name == "fn") return NormKind::fn;
  throw ConfigError("unknown norm kind `" + std::string(name) + "` (none, bn, fn)");
}

ExperimentConfig ExperimentConfig::from_text(std::string_view text) {
  auto kv = KeyValueText::parse(text);
  ExperimentConfig c;
  if (!kv.has("seed")) throw ConfigError("seed is required");
  c.seed = kv.count("seed", 0);
  c.name = kv.str("name", c.name);
  c.note = kv.str("note", c.note);
  c.output = kv.str("output", c.output);

  c.dataset = kv.str("dataset.kind", c.dataset);
  c.data_dir = kv.str("dataset.data_dir", c.data_dir);
  c.train_path = kv.str("dataset.train_path", c.train_path);
  c.test_path = kv.str("dataset.test_path", c.test_path);
  c.train_cap = kv.count("dataset.train_cap", c.train_cap);
  c.test_cap = kv.count("dataset.test_cap", c.test_cap);
  c.test_on_train = kv.flag("dataset.test_on_train", c.test_on_train);
  c.random_scale = kv.flag("dataset.random_scale", c.random_scale);
  c.scale_lo = kv.real("dataset.scale_lo", c.scale_lo);
  c.scale_hi = kv.real("dataset.scale_hi", c.scale_hi);

  auto& lv = c.large_variation;
  lv.n = kv.count("large_variation.samples", lv.n);
  lv.d = kv.count("large_variation.dims", lv.d);
  lv.classes = kv.count("large_variation.classes", lv.classes);
  lv.scale_max = kv.real("large_variation.scale_max", lv.scale_max);
  lv.test_n = kv.count("large_variation.test_samples", lv.test_n);
  lv.noise = kv.flag("large_variation.noise", lv.noise);

  auto& cp = c.compositional;
  cp.n = kv.count("compositional.samples", cp.n);
  cp.d = kv.count("compositional.dims", cp.d);
  cp.classes = kv.count("compositional.classes", cp.classes);
  cp.spread = kv.real("compositional.spread", cp.spread);
  cp.label_noise = kv.real("compositional.label_noise", cp.label_noise);

  c.hidden = kv.list("model.hidden", c.hidden);
  c.norm = parse_norm_kind(kv.str("model.norm", to_string(c.norm)));
  c.input_norm = kv.flag("model.input_norm", c.input_norm);
  c.norm_logits = kv.flag("model.norm_logits", c.norm_logits);
  c.eps = kv.real("model.eps", c.eps);
  c.bn_alpha = kv.real("model.bn_alpha", c.bn_alpha);
  c.fn_grad = parse_fn_grad_mode(kv.str("model.fn_grad", to_string(c.fn_grad)));

  c.strategy = parse_batch_strategy(kv.str("batch.strategy", to_string(c.strategy)));
  c.batch_size = kv.count("batch.size", c.batch_size);
  c.plan.k_labels = kv.count("batch.k_labels", c.plan.k_labels);
  c.plan.workers = kv.count("batch.workers", c.plan.workers);
  c.plan.shuffle_order = kv.flag("batch.shuffle_order", c.plan.shuffle_order);

  c.lr.scale = kv.real("optim.lr", c.lr.scale);
  c.lr.shift = kv.real("optim.lr_shift", c.lr.shift);
  c.lr.divisor = kv.real("optim.lr_divisor", c.lr.divisor);
  c.lr.exponent = kv.real("optim.lr_exponent", c.lr.exponent);
  c.alpha.scale = kv.real("optim.alpha_scale", c.alpha.scale);
  c.alpha.shift = kv.real("optim.alpha_shift", c.alpha.shift);
  c.alpha.divisor = kv.real("optim.alpha_divisor", c.alpha.divisor);
  c.alpha.exponent = kv.real("optim.alpha_exponent", c.alpha.exponent);
  c.momentum = kv.real("optim.momentum", c.momentum);
  c.lr_decay_factor = kv.real("optim.lr_decay_factor", c.lr_decay_factor);
  c.lr_decay_every = kv.count("optim.lr_decay_every", c.lr_decay_every);
  c.lg = kv.real("optim.lg", c.lg);
  c.schedule_override = kv.flag("optim.schedule_override", c.schedule_override);

  c.epochs = kv.count("train.epochs", c.epochs);
  c.max_iterations = kv.count("train.max_iterations", c.max_iterations);
  c.log_iterations = kv.flag("train.log_iterations", c.log_iterations);

  c.oracle = kv.flag("eval.oracle", c.oracle);
  c.oracle_every = kv.count("eval.oracle_every", c.oracle_every);
  c.oracle_head = kv.count("eval.oracle_head", c.oracle_head);
  c.oracle_tail = kv.count("eval.oracle_tail", c.oracle_tail);
  c.timing = kv.flag("eval.timing", c.timing);

  if (const auto unknown = kv.unused_keys(); !unknown.empty()) {
    std::string msg = "unknown config keys:";
    for (const auto& k : unknown) msg += " " + k;
    throw ConfigError(msg);
  }

  static const char* kinds[] = {"toy3", "large_variation", "compositional", "mnist", "cifar10",
                                "file"};
  bool known = false;
  for (const char* k : kinds) known = known || c.dataset == k;
  if (!known) throw ConfigError("unknown dataset.kind `" + c.dataset + "`");
  if (c.dataset == "file" && c.train_path.empty())
    throw ConfigError("dataset.kind = file needs dataset.train_path");
  if (c.batch_size == 0) throw ConfigError("batch.size must be positive");
  if (c.eps < 0.0) throw ConfigError("model.eps must be >= 0");
  if (!(c.bn_alpha > 0.0 && c.bn_alpha <= 1.0)) throw ConfigError("model.bn_alpha must be in (0, 1]");
  if (!(c.momentum >= 0.0 && c.momentum < 1.0)) throw ConfigError("optim.momentum must be in [0, 1)");
  if (!(c.lr.scale > 0.0) || !(c.lr.shift > 0.0) || !(c.lr.divisor > 0.0) || c.lr.exponent < 0.0)
    throw ConfigError("optim.lr schedule needs lr, lr_shift, lr_divisor > 0 and lr_exponent >= 0");
  if (!(c.alpha.shift > 0.0) || !(c.alpha.divisor > 0.0) || c.alpha.exponent < 0.0)
    throw ConfigError("optim.alpha schedule needs alpha_shift, alpha_divisor > 0, alpha_exponent >= 0");
  const double a0 = c.alpha.value(0);
  if (!(a0 > 0.0 && a0 <= 1.0)) throw ConfigError("optim.alpha schedule must start in (0, 1]");
  if (!(c.lr_decay_factor > 0.0)) throw ConfigError("optim.lr_decay_factor must be positive");
  if (!(c.lg > 0.0)) throw ConfigError("optim.lg must be positive");
  if (c.norm == NormKind::none && (c.input_norm || c.norm_logits))
    throw ConfigError("model.input_norm and model.norm_logits need model.norm = bn or fn");
  if (c.oracle && c.norm != NormKind::fn) throw ConfigError("eval.oracle needs model.norm = fn");
  if (c.oracle_every == 0) throw ConfigError("eval.oracle_every must be positive");
  if (!(c.scale_lo < c.scale_hi)) throw ConfigError("dataset.scale_lo must be below scale_hi");
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  auto line = [&](const char* k, const std::string& v) { os << k << " = " << v << '\n'; };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  line("name", name);
  line("seed", std::to_string(seed));
  if (!note.empty()) line("note", note);
  if (!output.empty()) line("output", output);
  line("dataset.kind", dataset);
  if (!data_dir.empty()) line("dataset.data_dir", data_dir);
  if (!train_path.empty()) line("dataset.train_path", train_path);
  if (!test_path.empty()) line("dataset.test_path", test_path);
  line("dataset.train_cap", std::to_string(train_cap));
  line("dataset.test_cap", std::to_string(test_cap));
  line("dataset.test_on_train", flag(test_on_train));
  line("dataset.random_scale", flag(random_scale));
  line("dataset.scale_lo", fmt(scale_lo));
  line("dataset.scale_hi", fmt(scale_hi));
  if (dataset == "large_variation") {
    line("large_variation.samples", std::to_string(large_variation.n));
    line("large_variation.dims", std::to_string(large_variation.d));
    line("large_variation.classes", std::to_string(large_variation.classes));
    line("large_variation.scale_max", fmt(large_variation.scale_max));
    line("large_variation.test_samples", std::to_string(large_variation.test_n));
    line("large_variation.noise", flag(large_variation.noise));
  }
  if (dataset == "compositional") {
    line("compositional.samples", std::to_string(compositional.n));
    line("compositional.dims", std::to_string(compositional.d));
    line("compositional.classes", std::to_string(compositional.classes));
    line("compositional.spread", fmt(compositional.spread));
    line("compositional.label_noise", fmt(compositional.label_noise));
  }
  line("model.hidden", fmt_list(hidden));
  line("model.norm", to_string(norm));
  line("model.input_norm", flag(input_norm));
  line("model.norm_logits", flag(norm_logits));
  line("model.eps", fmt(eps));
  line("model.bn_alpha", fmt(bn_alpha));
  line("model.fn_grad", to_string(fn_grad));
  line("batch.strategy", to_string(strategy));
  line("batch.size", std::to_string(batch_size));
  line("batch.k_labels", std::to_string(plan.k_labels));
  line("batch.workers", std::to_string(plan.workers));
  line("batch.shuffle_order", flag(plan.shuffle_order));
  line("optim.lr", fmt(lr.scale));
  line("optim.lr_shift", fmt(lr.shift));
  line("optim.lr_divisor", fmt(lr.divisor));
  line("optim.lr_exponent", fmt(lr.exponent));
  line("optim.alpha_scale", fmt(alpha.scale));
  line("optim.alpha_shift", fmt(alpha.shift));
  line("optim.alpha_divisor", fmt(alpha.divisor));
  line("optim.alpha_exponent", fmt(alpha.exponent));
  line("optim.momentum", fmt(momentum));
  line("optim.lr_decay_factor", fmt(lr_decay_factor));
  line("optim.lr_decay_every", std::to_string(lr_decay_every));
  line("optim.lg", fmt(lg));
  line("optim.schedule_override", flag(schedule_override));
  line("train.epochs", std::to_string(epochs));
  line("train.max_iterations", std::to_string(max_iterations));
  line("train.log_iterations", flag(log_iterations));
  line("eval.oracle", flag(oracle));
  line("eval.oracle_every", std::to_string(oracle_every));
  line("eval.oracle_head", std::to_string(oracle_head));
  line("eval.oracle_tail", std::to_string(oracle_tail));
  line("eval.timing", flag(timing));
  return os.str();
}

}  // namespace fullnorm
