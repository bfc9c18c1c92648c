#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <variant>
#include <vector>

#include "fullnorm/layers.hpp"

namespace fullnorm {

enum class LayerKind : std::uint8_t { linear = 0, relu = 1, bn = 2, fn = 3, nll = 4 };
enum class NormKind { none, bn, fn };

using Layer = std::variant<LinearLayer, ReluLayer, BatchNormLayer, FullNormLayer, NllLayer>;

LayerKind kind_of(const Layer& layer);
const char* to_string(LayerKind kind);
const char* to_string(NormKind kind);

struct ForwardResult {
  double loss = 0.0;
  std::size_t errors = 0;
  std::size_t samples = 0;
  double error_rate() const {
    return samples == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(samples);
  }
};

/// Ordered layer stack ending in an nll head. Train-mode forward mutates the
/// normalization states; infer-mode forward does not.
class Network {
 public:
  Network() = default;
  explicit Network(std::vector<Layer> layers);

  Mode mode() const { return mode_; }
  void set_mode(Mode mode) { mode_ = mode; }

  ForwardResult forward(const Tensor& x, std::span<const int> labels);
  /// Output of the last layer before the nll head; caches like forward().
  Tensor logits(const Tensor& x);
  /// Reverse pass from the nll head. Returns one weight gradient per linear
  /// layer in forward order. `loss_scale` multiplies the seed gradient.
  std::vector<Tensor> backward(FnGradMode fn_mode, double loss_scale = 1.0);

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<LinearLayer*> linear_layers();
  std::vector<const LinearLayer*> linear_layers() const;
  /// States of FN layers in forward order.
  std::vector<NormState*> fn_states();
  std::vector<const NormState*> fn_states() const;
  std::vector<NormState*> bn_states();

  std::size_t count(LayerKind kind) const;
  std::size_t input_width() const;
  std::size_t output_width() const;

  /// Sets alpha on every FN layer.
  void set_fn_alpha(double alpha);

  friend bool operator==(const Network& a, const Network& b);

 private:
  void validate() const;

  std::vector<Layer> layers_;
  Mode mode_ = Mode::train;
};

struct NormOptions {
  double bn_alpha = 0.1;
  double fn_alpha = 1.0;
  double eps = 1e-5;
  bool norm_logits = false;  // a norm layer between the last linear layer and the head
};

/// [norm] -> linear(in, h1) -> norm -> relu -> ... -> linear(h_last, classes) -> nll.
/// With NormKind::none the norm layers are omitted; `input_norm` puts one
/// norm layer directly on the input, `opts.norm_logits` one on the logits.
Network build_mlp(std::size_t inputs, std::span<const std::size_t> hidden, std::size_t classes,
                  NormKind norm, bool input_norm, const NormOptions& opts, RngStream& rng);

/// Little-endian checkpoint:
///   "FNRM1" | u32 layer_count | per layer: u8 kind, u32 dim0, u32 dim1, payload
///   linear: dim0 x dim1 f64 (weights incl. bias column)
///   bn/fn:  dim0 = width, dim1 = 0; mu[width] f64, nu[width] f64, alpha f64, eps f64
///   relu/nll: dims 0, no payload
void save_network(std::ostream& out, const Network& net);
Network load_network(std::istream& in);
void save_network(const std::filesystem::path& path, const Network& net);
Network load_network(const std::filesystem::path& path);

}  // namespace fullnorm
