#ifndef EAE_ADAM_HPP
#define EAE_ADAM_HPP

#include "eae/core.hpp"

#include <cmath>
#include <cstdint>

namespace eae {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Bias-corrected Adam. State persists across calls.
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  template <typename Derived>
  void step(VectorXd& params, const Eigen::MatrixBase<Derived>& grad) {
    if (m_.size() != params.size()) {
      m_ = VectorXd::Zero(params.size());
      v_ = VectorXd::Zero(params.size());
      t_ = 0;
    }
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    params.array() -=
        cfg_.learning_rate * (m_.array() / c1) / ((v_.array() / c2).sqrt() + cfg_.epsilon);
  }

  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  VectorXd m_;
  VectorXd v_;
  std::int64_t t_ = 0;
};

}  // namespace eae

#endif  // EAE_ADAM_HPP
