#include "matgen/engine/rk4.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace matgen::engine {

Eigen::VectorXd rk4_unroll(const DenseNet& rhs, const Eigen::VectorXd& h0, int steps) {
  if (steps < 1) throw std::invalid_argument("rk4_unroll requires steps >= 1");
  if (rhs.input_width() != static_cast<int>(h0.size()) ||
      rhs.output_width() != static_cast<int>(h0.size()))
    throw std::invalid_argument("rhs width must match state width");
  const double dt = 1.0 / steps;
  Eigen::VectorXd h = h0;
  for (int s = 0; s < steps; ++s) {
    Eigen::VectorXd k1 = rhs.forward(h);
    Eigen::VectorXd k2 = rhs.forward(h + 0.5 * dt * k1);
    Eigen::VectorXd k3 = rhs.forward(h + 0.5 * dt * k2);
    Eigen::VectorXd k4 = rhs.forward(h + dt * k3);
    h += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!h.allFinite())
      throw std::runtime_error("rk4 state non-finite at step " + std::to_string(s));
  }
  return h;
}

double rk4_scalar(const DenseNet& rhs, double x0, int steps, Rk4ScalarTrace* trace) {
  if (steps < 1) throw std::invalid_argument("rk4_scalar requires steps >= 1");
  if (rhs.input_width() != 1 || rhs.output_width() != 1)
    throw std::invalid_argument("scalar rk4 needs a 1->1 rhs network");
  const double dt = 1.0 / steps;
  if (trace) {
    trace->h.clear();
    trace->stage_in.clear();
    trace->k.clear();
  }
  Eigen::VectorXd v(1);
  auto f = [&](double x) {
    v[0] = x;
    return rhs.forward(v)[0];
  };
  double h = x0;
  for (int s = 0; s < steps; ++s) {
    const double x1 = h;
    const double k1 = f(x1);
    const double x2 = h + 0.5 * dt * k1;
    const double k2 = f(x2);
    const double x3 = h + 0.5 * dt * k2;
    const double k3 = f(x3);
    const double x4 = h + dt * k3;
    const double k4 = f(x4);
    if (trace) {
      trace->h.push_back(h);
      trace->stage_in.push_back({x1, x2, x3, x4});
      trace->k.push_back({k1, k2, k3, k4});
    }
    h += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(h))
      throw std::runtime_error("rk4 state non-finite at step " + std::to_string(s));
  }
  return h;
}

double rk4_scalar_backward(const DenseNet& rhs, const Rk4ScalarTrace& trace, double seed,
                           Eigen::VectorXd& param_grad) {
  const int steps = static_cast<int>(trace.h.size());
  const double dt = 1.0 / steps;
  if (param_grad.size() != rhs.param_count())
    throw std::invalid_argument("gradient buffer size");

  // rhs backward at a stored stage input: returns d(stage k)/d(stage input)
  // scaled by the adjoint, and accumulates the parameter gradient.
  Eigen::MatrixXd xin(1, 1), dy(1, 1);
  DenseNet::Trace net_trace;
  auto stage_backward = [&](double x, double kbar) {
    xin(0, 0) = x;
    rhs.forward_batch(xin, &net_trace);
    dy(0, 0) = kbar;
    return rhs.backward_batch(net_trace, dy, param_grad)(0, 0);
  };

  double hbar = seed;
  for (int s = steps - 1; s >= 0; --s) {
    const auto& x = trace.stage_in[s];
    double k1b = hbar * dt / 6.0;
    double k2b = hbar * dt / 3.0;
    double k3b = hbar * dt / 3.0;
    double k4b = hbar * dt / 6.0;
    double hprev = hbar;
    const double x4b = stage_backward(x[3], k4b);
    hprev += x4b;
    k3b += dt * x4b;
    const double x3b = stage_backward(x[2], k3b);
    hprev += x3b;
    k2b += 0.5 * dt * x3b;
    const double x2b = stage_backward(x[1], k2b);
    hprev += x2b;
    k1b += 0.5 * dt * x2b;
    hprev += stage_backward(x[0], k1b);
    hbar = hprev;
  }
  return hbar;
}

Eigen::RowVectorXd rk4_scalar_batch(const DenseNet& rhs, const Eigen::RowVectorXd& x0,
                                    int steps, Rk4BatchTrace* trace) {
  if (steps < 1) throw std::invalid_argument("rk4_scalar_batch requires steps >= 1");
  if (rhs.input_width() != 1 || rhs.output_width() != 1)
    throw std::invalid_argument("scalar rk4 needs a 1->1 rhs network");
  const double dt = 1.0 / steps;
  if (trace) {
    trace->stage_in.clear();
    trace->k.clear();
  }
  auto f = [&](const Eigen::RowVectorXd& x) -> Eigen::RowVectorXd {
    return rhs.forward_batch(x).row(0);
  };
  Eigen::RowVectorXd h = x0;
  for (int s = 0; s < steps; ++s) {
    const Eigen::RowVectorXd x1 = h;
    const Eigen::RowVectorXd k1 = f(x1);
    const Eigen::RowVectorXd x2 = h + 0.5 * dt * k1;
    const Eigen::RowVectorXd k2 = f(x2);
    const Eigen::RowVectorXd x3 = h + 0.5 * dt * k2;
    const Eigen::RowVectorXd k3 = f(x3);
    const Eigen::RowVectorXd x4 = h + dt * k3;
    const Eigen::RowVectorXd k4 = f(x4);
    if (trace) {
      trace->stage_in.push_back({x1, x2, x3, x4});
      trace->k.push_back({k1, k2, k3, k4});
    }
    h += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!h.allFinite())
      throw std::runtime_error("rk4 state non-finite at step " + std::to_string(s));
  }
  return h;
}

Eigen::RowVectorXd rk4_scalar_batch_backward(const DenseNet& rhs, const Rk4BatchTrace& trace,
                                             const Eigen::RowVectorXd& seed,
                                             Eigen::VectorXd& param_grad) {
  const int steps = static_cast<int>(trace.stage_in.size());
  if (steps < 1) throw std::invalid_argument("empty rk4 trace");
  const double dt = 1.0 / steps;
  if (param_grad.size() != rhs.param_count())
    throw std::invalid_argument("gradient buffer size");

  DenseNet::Trace net_trace;
  auto stage_backward = [&](const Eigen::RowVectorXd& x,
                            const Eigen::RowVectorXd& kbar) -> Eigen::RowVectorXd {
    rhs.forward_batch(x, &net_trace);
    return rhs.backward_batch(net_trace, kbar, param_grad).row(0);
  };

  Eigen::RowVectorXd hbar = seed;
  for (int s = steps - 1; s >= 0; --s) {
    const auto& x = trace.stage_in[s];
    Eigen::RowVectorXd k1b = hbar * (dt / 6.0);
    Eigen::RowVectorXd k2b = hbar * (dt / 3.0);
    Eigen::RowVectorXd k3b = k2b;
    const Eigen::RowVectorXd& k4b = k1b;
    Eigen::RowVectorXd hprev = hbar;
    const Eigen::RowVectorXd x4b = stage_backward(x[3], k4b);
    hprev += x4b;
    k3b += dt * x4b;
    const Eigen::RowVectorXd x3b = stage_backward(x[2], k3b);
    hprev += x3b;
    k2b += 0.5 * dt * x3b;
    const Eigen::RowVectorXd x2b = stage_backward(x[1], k2b);
    hprev += x2b;
    k1b += 0.5 * dt * x2b;
    hprev += stage_backward(x[0], k1b);
    hbar = hprev;
  }
  return hbar;
}

}  // namespace matgen::engine
