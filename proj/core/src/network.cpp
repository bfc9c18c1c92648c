#include "fullnorm/network.hpp"

#include <algorithm>
#include <fstream>
#include <string>
#include <type_traits>

#include "binary_io.hpp"
#include "fullnorm/errors.hpp"

namespace fullnorm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

bool same_state(const NormState& a, const NormState& b) {
  return a.mu == b.mu && a.nu == b.nu && a.alpha == b.alpha && a.eps == b.eps;
}

}  // namespace

LayerKind kind_of(const Layer& layer) {
  return static_cast<LayerKind>(layer.index());
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::linear: return "linear";
    case LayerKind::relu: return "relu";
    case LayerKind::bn: return "bn";
    case LayerKind::fn: return "fn";
    case LayerKind::nll: return "nll";
  }
  return "?";
}

const char* to_string(NormKind kind) {
  switch (kind) {
    case NormKind::none: return "none";
    case NormKind::bn: return "bn";
    case NormKind::fn: return "fn";
  }
  return "?";
}

Network::Network(std::vector<Layer> layers) : layers_(std::move(layers)) { validate(); }

void Network::validate() const {
  if (layers_.empty() || kind_of(layers_.back()) != LayerKind::nll) {
    throw ContractError("Network: last layer must be nll");
  }
  // Walk widths: linear layers fix them, norm layers must agree.
  std::size_t width = 0;  // 0 = not yet known
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    const auto& layer = layers_[i];
    std::visit(overloaded{
                   [&](const LinearLayer& l) {
                     if (width != 0 && l.inputs() != width) {
                       throw ContractError("Network: layer " + std::to_string(i) +
                                           " expects width " + std::to_string(l.inputs()) +
                                           ", previous layer produces " + std::to_string(width));
                     }
                     width = l.outputs();
                   },
                   [&](const BatchNormLayer& l) {
                     if (width != 0 && l.state().width() != width)
                       throw ContractError("Network: bn width mismatch at layer " +
                                           std::to_string(i));
                     width = l.state().width();
                   },
                   [&](const FullNormLayer& l) {
                     if (width != 0 && l.state().width() != width)
                       throw ContractError("Network: fn width mismatch at layer " +
                                           std::to_string(i));
                     width = l.state().width();
                   },
                   [](const ReluLayer&) {},
                   [&](const NllLayer&) {
                     throw ContractError("Network: nll must be the last layer");
                   },
               },
               layer);
  }
}

Tensor Network::logits(const Tensor& x) {
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = std::visit(overloaded{
                       [&](LinearLayer& l) { return l.forward(h); },
                       [&](ReluLayer& l) { return l.forward(h); },
                       [&](BatchNormLayer& l) { return l.forward(h, mode_); },
                       [&](FullNormLayer& l) { return l.forward(h, mode_); },
                       [&](NllLayer&) -> Tensor { throw ContractError("unreachable"); },
                   },
                   layers_[i]);
  }
  return h;
}

ForwardResult Network::forward(const Tensor& x, std::span<const int> labels) {
  const Tensor z = logits(x);
  auto& head = std::get<NllLayer>(layers_.back());
  const auto r = head.forward(z, labels);
  return {r.loss, r.errors, x.rows()};
}

std::vector<Tensor> Network::backward(FnGradMode fn_mode, double loss_scale) {
  Tensor g = std::get<NllLayer>(layers_.back()).backward();
  if (loss_scale != 1.0)
    for (double& v : g.data()) v *= loss_scale;
  std::vector<Tensor> grads;
  for (std::size_t i = layers_.size() - 1; i-- > 0;) {
    g = std::visit(overloaded{
                       [&](LinearLayer& l) {
                         Tensor gi = l.backward(g);
                         grads.push_back(l.grad());
                         return gi;
                       },
                       [&](ReluLayer& l) { return l.backward(g); },
                       [&](BatchNormLayer& l) { return l.backward(g); },
                       [&](FullNormLayer& l) { return l.backward(g, fn_mode); },
                       [&](NllLayer&) -> Tensor { throw ContractError("unreachable"); },
                   },
                   layers_[i]);
  }
  std::reverse(grads.begin(), grads.end());
  return grads;
}

std::vector<LinearLayer*> Network::linear_layers() {
  std::vector<LinearLayer*> out;
  for (auto& l : layers_)
    if (auto* p = std::get_if<LinearLayer>(&l)) out.push_back(p);
  return out;
}

std::vector<const LinearLayer*> Network::linear_layers() const {
  std::vector<const LinearLayer*> out;
  for (const auto& l : layers_)
    if (const auto* p = std::get_if<LinearLayer>(&l)) out.push_back(p);
  return out;
}

std::vector<NormState*> Network::fn_states() {
  std::vector<NormState*> out;
  for (auto& l : layers_)
    if (auto* p = std::get_if<FullNormLayer>(&l)) out.push_back(&p->state());
  return out;
}

std::vector<const NormState*> Network::fn_states() const {
  std::vector<const NormState*> out;
  for (const auto& l : layers_)
    if (const auto* p = std::get_if<FullNormLayer>(&l)) out.push_back(&p->state());
  return out;
}

std::vector<NormState*> Network::bn_states() {
  std::vector<NormState*> out;
  for (auto& l : layers_)
    if (auto* p = std::get_if<BatchNormLayer>(&l)) out.push_back(&p->state());
  return out;
}

std::size_t Network::count(LayerKind kind) const {
  std::size_t n = 0;
  for (const auto& l : layers_)
    if (kind_of(l) == kind) ++n;
  return n;
}

std::size_t Network::input_width() const {
  for (const auto& l : layers_) {
    if (const auto* p = std::get_if<LinearLayer>(&l)) return p->inputs();
    if (const auto* p = std::get_if<BatchNormLayer>(&l)) return p->state().width();
    if (const auto* p = std::get_if<FullNormLayer>(&l)) return p->state().width();
  }
  return 0;
}

std::size_t Network::output_width() const {
  const auto lin = linear_layers();
  return lin.empty() ? input_width() : lin.back()->outputs();
}

void Network::set_fn_alpha(double alpha) {
  for (auto* s : fn_states()) s->alpha = alpha;
}

bool operator==(const Network& a, const Network& b) {
  if (a.layers_.size() != b.layers_.size() || a.mode_ != b.mode_) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    const auto& la = a.layers_[i];
    const auto& lb = b.layers_[i];
    if (la.index() != lb.index()) return false;
    if (const auto* p = std::get_if<LinearLayer>(&la)) {
      if (!(p->weights().w == std::get<LinearLayer>(lb).weights().w)) return false;
    } else if (const auto* p = std::get_if<BatchNormLayer>(&la)) {
      if (!same_state(p->state(), std::get<BatchNormLayer>(lb).state())) return false;
    } else if (const auto* p = std::get_if<FullNormLayer>(&la)) {
      if (!same_state(p->state(), std::get<FullNormLayer>(lb).state())) return false;
    }
  }
  return true;
}

Network build_mlp(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t classes,
                  NormKind norm, bool input_norm, const NormOptions& opts, RngStream& rng) {
  if (inputs == 0 || classes == 0) throw ContractError("build_mlp: zero width");
  auto norm_layer = [&](std::size_t d) -> Layer {
    if (norm == NormKind::bn) return BatchNormLayer(NormState::initial(d, opts.bn_alpha, opts.eps));
    return FullNormLayer(NormState::initial(d, opts.fn_alpha, opts.eps));
  };
  std::vector<Layer> layers;
  if (input_norm && norm != NormKind::none) layers.push_back(norm_layer(inputs));
  std::size_t width = inputs;
  for (std::size_t h : hidden) {
    if (h == 0) throw ContractError("build_mlp: zero hidden width");
    layers.emplace_back(LinearLayer::init_uniform(width, h, rng));
    if (norm != NormKind::none) layers.push_back(norm_layer(h));
    layers.emplace_back(ReluLayer{});
    width = h;
  }
  layers.emplace_back(LinearLayer::init_uniform(width, classes, rng));
  if (opts.norm_logits && norm != NormKind::none) layers.push_back(norm_layer(classes));
  layers.emplace_back(NllLayer{});
  return Network(std::move(layers));
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kNetMagic[] = "FNRM1";
constexpr std::size_t kNetMagicLen = 5;

void write_state(std::ostream& out, LayerKind kind, const NormState& s) {
  detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.width()));
  detail::write_le<std::uint32_t>(out, 0);
  for (double v : s.mu) detail::write_f64(out, v);
  for (double v : s.nu) detail::write_f64(out, v);
  detail::write_f64(out, s.alpha);
  detail::write_f64(out, s.eps);
}

NormState read_state(std::istream& in, std::uint32_t width) {
  NormState s;
  s.mu.resize(width);
  s.nu.resize(width);
  for (auto& v : s.mu) v = detail::read_f64(in, "mu");
  for (auto& v : s.nu) v = detail::read_f64(in, "nu");
  s.alpha = detail::read_f64(in, "alpha");
  s.eps = detail::read_f64(in, "eps");
  return s;
}

}  // namespace

void save_network(std::ostream& out, const Network& net) {
  detail::write_magic(out, kNetMagic, kNetMagicLen);
  detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& layer : net.layers()) {
    const auto kind = kind_of(layer);
    if (const auto* l = std::get_if<LinearLayer>(&layer)) {
      const auto& w = l->weights().w;
      detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
      detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.rows()));
      detail::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(w.cols()));
      for (double v : w.data()) detail::write_f64(out, v);
    } else if (const auto* l = std::get_if<BatchNormLayer>(&layer)) {
      write_state(out, kind, l->state());
    } else if (const auto* l = std::get_if<FullNormLayer>(&layer)) {
      write_state(out, kind, l->state());
    } else {
      detail::write_le<std::uint8_t>(out, static_cast<std::uint8_t>(kind));
      detail::write_le<std::uint32_t>(out, 0);
      detail::write_le<std::uint32_t>(out, 0);
    }
  }
  if (!out) throw FormatError("save_network: write failed");
}

Network load_network(std::istream& in) {
  detail::expect_magic(in, kNetMagic, kNetMagicLen);
  const auto count = detail::read_le<std::uint32_t>(in, "layer count");
  std::vector<Layer> layers;
  layers.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto tag = detail::read_le<std::uint8_t>(in, "layer kind");
    const auto d0 = detail::read_le<std::uint32_t>(in, "dim0");
    const auto d1 = detail::read_le<std::uint32_t>(in, "dim1");
    switch (static_cast<LayerKind>(tag)) {
      case LayerKind::linear: {
        std::vector<double> w(static_cast<std::size_t>(d0) * d1);
        for (auto& v : w) v = detail::read_f64(in, "weights");
        layers.emplace_back(LinearLayer(AffineAug{Tensor(d0, d1, std::move(w))}));
        break;
      }
      case LayerKind::relu: layers.emplace_back(ReluLayer{}); break;
      case LayerKind::bn: layers.emplace_back(BatchNormLayer(read_state(in, d0))); break;
      case LayerKind::fn: layers.emplace_back(FullNormLayer(read_state(in, d0))); break;
      case LayerKind::nll: layers.emplace_back(NllLayer{}); break;
      default: throw FormatError("load_network: unknown layer kind " + std::to_string(tag));
    }
  }
  return Network(std::move(layers));
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path.string() + " for writing");
  save_network(out, net);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return load_network(in);
}

}  // namespace fullnorm
