#ifndef EAE_NETWORK_HPP
#define EAE_NETWORK_HPP

#include "eae/core.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace eae {

enum class Activation { linear, relu, elu, sigmoid };

std::string to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Fully-connected network shape: layer widths (input first) and one
/// activation per non-input layer.
struct NetworkSpec {
  std::vector<Index> layer_widths;
  std::vector<Activation> activations;

  /// Throws DimensionError if the invariants do not hold.
  void validate() const;

  Index input_width() const { return layer_widths.front(); }
  Index output_width() const { return layer_widths.back(); }
  Index layer_count() const { return static_cast<Index>(activations.size()); }
  Index param_count() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Builds a spec with `hidden` activation on every hidden layer and `output`
/// on the last layer.
NetworkSpec make_mlp(std::vector<Index> widths, Activation hidden, Activation output);

/// Offsets of one layer inside a flat parameter vector. The weight block is
/// stored row-major as (n_out x n_in) and followed by the bias block.
struct LayerSlot {
  Index n_in = 0;
  Index n_out = 0;
  Index weight_offset = 0;
  Index bias_offset = 0;
};

std::vector<LayerSlot> param_layout(const NetworkSpec& spec);

struct LayerParams {
  Batch<double> weight;  // n_out x n_in
  VectorXd bias;
};

std::vector<LayerParams> unflatten(const NetworkSpec& spec, const ParamVector& params);
ParamVector flatten(const NetworkSpec& spec, const std::vector<LayerParams>& layers);

/// Glorot-uniform weights, zero biases.
ParamVector glorot_init(const NetworkSpec& spec, std::uint64_t seed);

}  // namespace eae

#endif  // EAE_NETWORK_HPP
