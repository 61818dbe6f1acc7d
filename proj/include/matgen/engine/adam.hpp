#ifndef MATGEN_ENGINE_ADAM_HPP
#define MATGEN_ENGINE_ADAM_HPP

#include <Eigen/Dense>

namespace matgen::engine {

struct AdamConfig {
  double lr = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a flat parameter vector.
class Adam {
 public:
  Adam(int n_params, AdamConfig cfg = {})
      : cfg_(cfg),
        m_(Eigen::VectorXd::Zero(n_params)),
        v_(Eigen::VectorXd::Zero(n_params)) {}

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    ++t_;
    m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * grad;
    v_ = cfg_.beta2 * v_.array().matrix() + (1.0 - cfg_.beta2) * grad.array().square().matrix();
    const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
    const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
    params.array() -= cfg_.lr * (m_.array() / bc1) / ((v_.array() / bc2).sqrt() + cfg_.eps);
  }

  long step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

}  // namespace matgen::engine

#endif
