#include "eae/network.hpp"
#include "eae/mlp.hpp"

#include <random>

namespace eae {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::linear:
      return "linear";
    case Activation::relu:
      return "relu";
    case Activation::elu:
      return "elu";
    case Activation::sigmoid:
      return "sigmoid";
  }
  return "linear";
}

Activation activation_from_string(std::string_view name) {
  if (name == "linear") return Activation::linear;
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  if (name == "sigmoid") return Activation::sigmoid;
  throw DomainError("unknown activation '" + std::string(name) + "'");
}

void NetworkSpec::validate() const {
  if (layer_widths.size() < 2) {
    throw DimensionError("network needs at least an input and an output width");
  }
  if (activations.size() != layer_widths.size() - 1) {
    throw DimensionError("network has " + std::to_string(activations.size()) +
                         " activations for " + std::to_string(layer_widths.size() - 1) +
                         " layers");
  }
  for (std::size_t i = 0; i < layer_widths.size(); ++i) {
    if (layer_widths[i] <= 0) {
      throw DimensionError("layer width " + std::to_string(i) + " must be positive");
    }
  }
}

Index NetworkSpec::param_count() const {
  Index n = 0;
  for (std::size_t l = 0; l + 1 < layer_widths.size(); ++l) {
    n += (layer_widths[l] + 1) * layer_widths[l + 1];
  }
  return n;
}

NetworkSpec make_mlp(std::vector<Index> widths, Activation hidden, Activation output) {
  NetworkSpec spec;
  spec.layer_widths = std::move(widths);
  if (spec.layer_widths.size() >= 2) {
    spec.activations.assign(spec.layer_widths.size() - 1, hidden);
    spec.activations.back() = output;
  }
  spec.validate();
  return spec;
}

std::vector<LayerSlot> param_layout(const NetworkSpec& spec) {
  std::vector<LayerSlot> layout;
  layout.reserve(spec.layer_widths.size() - 1);
  Index offset = 0;
  for (std::size_t l = 0; l + 1 < spec.layer_widths.size(); ++l) {
    LayerSlot slot;
    slot.n_in = spec.layer_widths[l];
    slot.n_out = spec.layer_widths[l + 1];
    slot.weight_offset = offset;
    slot.bias_offset = offset + slot.n_in * slot.n_out;
    offset = slot.bias_offset + slot.n_out;
    layout.push_back(slot);
  }
  return layout;
}

std::vector<LayerParams> unflatten(const NetworkSpec& spec, const ParamVector& params) {
  if (params.size() != spec.param_count()) {
    throw DimensionError("parameter vector has " + std::to_string(params.size()) +
                         " entries, spec expects " + std::to_string(spec.param_count()));
  }
  std::vector<LayerParams> layers;
  for (const auto& slot : param_layout(spec)) {
    layers.push_back({detail::weight_block(slot, params), detail::bias_block(slot, params)});
  }
  return layers;
}

ParamVector flatten(const NetworkSpec& spec, const std::vector<LayerParams>& layers) {
  const auto layout = param_layout(spec);
  if (layers.size() != layout.size()) {
    throw DimensionError("flatten: expected " + std::to_string(layout.size()) + " layers");
  }
  ParamVector params(spec.param_count());
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const auto& slot = layout[l];
    if (layers[l].weight.rows() != slot.n_out || layers[l].weight.cols() != slot.n_in ||
        layers[l].bias.size() != slot.n_out) {
      throw DimensionError("flatten: layer " + std::to_string(l) + " has the wrong shape");
    }
    Eigen::Map<Batch<double>>(params.data() + slot.weight_offset, slot.n_out, slot.n_in) =
        layers[l].weight;
    params.segment(slot.bias_offset, slot.n_out) = layers[l].bias;
  }
  return params;
}

ParamVector glorot_init(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ParamVector params = ParamVector::Zero(spec.param_count());
  for (const auto& slot : param_layout(spec)) {
    const double limit = std::sqrt(6.0 / static_cast<double>(slot.n_in + slot.n_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Index i = 0; i < slot.n_in * slot.n_out; ++i) {
      params[slot.weight_offset + i] = dist(rng);
    }
  }
  return params;
}

namespace detail {

void check_network_inputs(const NetworkSpec& spec, Index param_size, Index input_cols,
                          const char* op) {
  if (param_size != spec.param_count()) {
    throw DimensionError(std::string(op) + ": parameter vector has " +
                         std::to_string(param_size) + " entries, spec expects " +
                         std::to_string(spec.param_count()));
  }
  if (input_cols != spec.input_width()) {
    throw DimensionError(std::string(op) + ": layer 0 expects input width " +
                         std::to_string(spec.input_width()) + ", got " +
                         std::to_string(input_cols));
  }
}

}  // namespace detail

}  // namespace eae
