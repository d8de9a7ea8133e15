#ifndef EAE_MLP_HPP
#define EAE_MLP_HPP

// Forward evaluation and differentiation of dense multilayer perceptrons.
//
// Everything here is templated on the scalar type so that finite-difference
// oracles can run in extended precision against the same graph. All routines
// are pure; batches are row-major with one sample per row.

#include "eae/core.hpp"
#include "eae/network.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace eae {

namespace detail {

template <typename Scalar>
Scalar activate(Activation act, Scalar a) {
  using std::exp;
  switch (act) {
    case Activation::linear:
      return a;
    case Activation::relu:
      return a > Scalar(0) ? a : Scalar(0);
    case Activation::elu:
      return a > Scalar(0) ? a : exp(a) - Scalar(1);
    case Activation::sigmoid:
      return a >= Scalar(0) ? Scalar(1) / (Scalar(1) + exp(-a))
                            : exp(a) / (Scalar(1) + exp(a));
  }
  return a;
}

template <typename Scalar>
Scalar activate_d1(Activation act, Scalar a) {
  using std::exp;
  switch (act) {
    case Activation::linear:
      return Scalar(1);
    case Activation::relu:
      return a > Scalar(0) ? Scalar(1) : Scalar(0);
    case Activation::elu:
      return a > Scalar(0) ? Scalar(1) : exp(a);
    case Activation::sigmoid: {
      const Scalar s = activate(act, a);
      return s * (Scalar(1) - s);
    }
  }
  return Scalar(1);
}

template <typename Scalar>
Scalar activate_d2(Activation act, Scalar a) {
  using std::exp;
  switch (act) {
    case Activation::linear:
    case Activation::relu:
      return Scalar(0);
    case Activation::elu:
      return a > Scalar(0) ? Scalar(0) : exp(a);
    case Activation::sigmoid: {
      const Scalar s = activate(act, a);
      return s * (Scalar(1) - s) * (Scalar(1) - Scalar(2) * s);
    }
  }
  return Scalar(0);
}

template <typename Scalar>
Eigen::Map<const Batch<Scalar>> weight_block(const LayerSlot& slot, const Vector<Scalar>& params) {
  return Eigen::Map<const Batch<Scalar>>(params.data() + slot.weight_offset, slot.n_out, slot.n_in);
}

template <typename Scalar>
Eigen::Map<const Vector<Scalar>> bias_block(const LayerSlot& slot, const Vector<Scalar>& params) {
  return Eigen::Map<const Vector<Scalar>>(params.data() + slot.bias_offset, slot.n_out);
}

void check_network_inputs(const NetworkSpec& spec, Index param_size, Index input_cols,
                          const char* op);

template <typename Scalar>
void check_same_shape(const Batch<Scalar>& a, const Batch<Scalar>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape (" + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()) + ") does not match (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")");
  }
}

template <typename Scalar>
Batch<Scalar> affine(const Batch<Scalar>& h, const LayerSlot& slot, const Vector<Scalar>& params) {
  Batch<Scalar> a = h * weight_block(slot, params).transpose();
  a.rowwise() += bias_block(slot, params).transpose();
  return a;
}

template <typename Scalar>
Batch<Scalar> apply_activation(Activation act, const Batch<Scalar>& a) {
  return a.unaryExpr([act](Scalar v) { return activate(act, v); });
}

template <typename Scalar>
Batch<Scalar> activation_d1(Activation act, const Batch<Scalar>& a) {
  return a.unaryExpr([act](Scalar v) { return activate_d1(act, v); });
}

template <typename Scalar>
Batch<Scalar> activation_d2(Activation act, const Batch<Scalar>& a) {
  return a.unaryExpr([act](Scalar v) { return activate_d2(act, v); });
}

}  // namespace detail

/// Intermediate values of one forward pass, kept for the reverse sweep.
template <typename Scalar>
struct ForwardTrace {
  std::vector<Batch<Scalar>> inputs;          // input to each layer
  std::vector<Batch<Scalar>> preactivations;  // affine output of each layer
  Batch<Scalar> output;
};

/// Forward pass that also carries a tangent (forward-mode) alongside values.
template <typename Scalar>
struct TangentTrace {
  std::vector<Batch<Scalar>> inputs;
  std::vector<Batch<Scalar>> input_tangents;
  std::vector<Batch<Scalar>> preactivations;
  std::vector<Batch<Scalar>> preactivation_tangents;
  Batch<Scalar> output;
  Batch<Scalar> output_tangent;
};

template <typename Scalar>
struct VjpResult {
  Vector<Scalar> grad_params;
  Batch<Scalar> grad_input;
};

template <typename Scalar>
struct TangentVjpResult {
  Vector<Scalar> grad_params;
  Batch<Scalar> grad_input;
  Batch<Scalar> grad_tangent;
};

template <typename Scalar>
ForwardTrace<Scalar> forward_trace(const NetworkSpec& spec, const Vector<Scalar>& params,
                                   const Batch<Scalar>& x) {
  detail::check_network_inputs(spec, params.size(), x.cols(), "forward");
  const auto layout = param_layout(spec);
  ForwardTrace<Scalar> trace;
  trace.inputs.reserve(layout.size());
  trace.preactivations.reserve(layout.size());
  Batch<Scalar> h = x;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    Batch<Scalar> a = detail::affine(h, layout[l], params);
    trace.inputs.push_back(std::move(h));
    h = detail::apply_activation(spec.activations[l], a);
    trace.preactivations.push_back(std::move(a));
  }
  trace.output = std::move(h);
  return trace;
}

template <typename Scalar>
Batch<Scalar> forward(const NetworkSpec& spec, const Vector<Scalar>& params,
                      const Batch<Scalar>& x) {
  detail::check_network_inputs(spec, params.size(), x.cols(), "forward");
  const auto layout = param_layout(spec);
  Batch<Scalar> h = x;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    h = detail::apply_activation(spec.activations[l], detail::affine(h, layout[l], params));
  }
  return h;
}

/// Reverse sweep over a recorded trace.
template <typename Scalar>
VjpResult<Scalar> vjp_from_trace(const NetworkSpec& spec, const Vector<Scalar>& params,
                                 const ForwardTrace<Scalar>& trace, const Batch<Scalar>& upstream) {
  detail::check_same_shape(trace.output, upstream, "vjp upstream");
  const auto layout = param_layout(spec);
  VjpResult<Scalar> result;
  result.grad_params = Vector<Scalar>::Zero(params.size());
  Batch<Scalar> g = upstream;
  for (std::size_t l = layout.size(); l-- > 0;) {
    const LayerSlot& slot = layout[l];
    const Batch<Scalar> ga =
        g.cwiseProduct(detail::activation_d1(spec.activations[l], trace.preactivations[l]));
    Eigen::Map<Batch<Scalar>> gw(result.grad_params.data() + slot.weight_offset, slot.n_out,
                                 slot.n_in);
    gw.noalias() = ga.transpose() * trace.inputs[l];
    result.grad_params.segment(slot.bias_offset, slot.n_out) = ga.colwise().sum().transpose();
    g = ga * detail::weight_block(slot, params);
  }
  result.grad_input = std::move(g);
  return result;
}

/// upstreamᵀ·J with respect to parameters and inputs.
template <typename Scalar>
VjpResult<Scalar> vjp(const NetworkSpec& spec, const Vector<Scalar>& params,
                      const Batch<Scalar>& x, const Batch<Scalar>& upstream) {
  return vjp_from_trace(spec, params, forward_trace(spec, params, x), upstream);
}

template <typename Scalar>
TangentTrace<Scalar> tangent_trace(const NetworkSpec& spec, const Vector<Scalar>& params,
                                   const Batch<Scalar>& x, const Batch<Scalar>& tangent_x) {
  detail::check_network_inputs(spec, params.size(), x.cols(), "jvp");
  detail::check_same_shape(x, tangent_x, "jvp tangent");
  const auto layout = param_layout(spec);
  TangentTrace<Scalar> trace;
  Batch<Scalar> h = x;
  Batch<Scalar> t = tangent_x;
  for (std::size_t l = 0; l < layout.size(); ++l) {
    const Activation act = spec.activations[l];
    Batch<Scalar> a = detail::affine(h, layout[l], params);
    Batch<Scalar> adot = t * detail::weight_block(layout[l], params).transpose();
    trace.inputs.push_back(std::move(h));
    trace.input_tangents.push_back(std::move(t));
    h = detail::apply_activation(act, a);
    t = detail::activation_d1(act, a).cwiseProduct(adot);
    trace.preactivations.push_back(std::move(a));
    trace.preactivation_tangents.push_back(std::move(adot));
  }
  trace.output = std::move(h);
  trace.output_tangent = std::move(t);
  return trace;
}

/// (∂f/∂x)·tangent_x per batch row, by forward-mode propagation.
template <typename Scalar>
Batch<Scalar> jvp(const NetworkSpec& spec, const Vector<Scalar>& params, const Batch<Scalar>& x,
                  const Batch<Scalar>& tangent_x) {
  return tangent_trace(spec, params, x, tangent_x).output_tangent;
}

/// Reverse sweep through a forward-mode pass. Given adjoints of the output
/// value and of the output tangent, returns adjoints of the parameters, the
/// input and the input tangent. This is what differentiating a loss built from
/// Jacobian-vector products needs.
template <typename Scalar>
TangentVjpResult<Scalar> tangent_vjp_from_trace(const NetworkSpec& spec,
                                                const Vector<Scalar>& params,
                                                const TangentTrace<Scalar>& trace,
                                                const Batch<Scalar>& upstream_value,
                                                const Batch<Scalar>& upstream_tangent) {
  detail::check_same_shape(trace.output, upstream_value, "tangent_vjp upstream value");
  detail::check_same_shape(trace.output, upstream_tangent, "tangent_vjp upstream tangent");
  const auto layout = param_layout(spec);
  TangentVjpResult<Scalar> result;
  result.grad_params = Vector<Scalar>::Zero(params.size());
  Batch<Scalar> gh = upstream_value;
  Batch<Scalar> gt = upstream_tangent;
  for (std::size_t l = layout.size(); l-- > 0;) {
    const LayerSlot& slot = layout[l];
    const Activation act = spec.activations[l];
    const Batch<Scalar> d1 = detail::activation_d1(act, trace.preactivations[l]);
    const Batch<Scalar> d2 = detail::activation_d2(act, trace.preactivations[l]);
    const Batch<Scalar> ga_dot = gt.cwiseProduct(d1);
    const Batch<Scalar> ga =
        gh.cwiseProduct(d1) + gt.cwiseProduct(d2).cwiseProduct(trace.preactivation_tangents[l]);
    Eigen::Map<Batch<Scalar>> gw(result.grad_params.data() + slot.weight_offset, slot.n_out,
                                 slot.n_in);
    gw.noalias() = ga.transpose() * trace.inputs[l];
    gw.noalias() += ga_dot.transpose() * trace.input_tangents[l];
    result.grad_params.segment(slot.bias_offset, slot.n_out) = ga.colwise().sum().transpose();
    const auto w = detail::weight_block(slot, params);
    gh = ga * w;
    gt = ga_dot * w;
  }
  result.grad_input = std::move(gh);
  result.grad_tangent = std::move(gt);
  return result;
}

}  // namespace eae

#endif  // EAE_MLP_HPP
