#ifndef MATGEN_ENGINE_RK4_HPP
#define MATGEN_ENGINE_RK4_HPP

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "matgen/engine/net.hpp"

namespace matgen::engine {

// Classical RK4 over pseudo-time [0, 1] with an autonomous DenseNet right
// hand side (input width == output width == state width).
Eigen::VectorXd rk4_unroll(const DenseNet& rhs, const Eigen::VectorXd& h0, int steps);

// Scalar state specialization with a recorded trace so the map can be
// differentiated end-to-end (discretize-then-differentiate).
struct Rk4ScalarTrace {
  std::vector<double> h;                                // state before each step
  std::vector<std::array<double, 4>> stage_in;          // stage inputs
  std::vector<std::array<double, 4>> k;                 // stage slopes
};

double rk4_scalar(const DenseNet& rhs, double x0, int steps, Rk4ScalarTrace* trace = nullptr);

// Batch of independent scalar states flowed through the same rhs; entries of
// x0 are separate initial conditions. Vectorizes the fitting hot loop.
struct Rk4BatchTrace {
  std::vector<std::array<Eigen::RowVectorXd, 4>> stage_in;
  std::vector<std::array<Eigen::RowVectorXd, 4>> k;
};

Eigen::RowVectorXd rk4_scalar_batch(const DenseNet& rhs, const Eigen::RowVectorXd& x0,
                                    int steps, Rk4BatchTrace* trace = nullptr);

// Accumulates sum over batch entries of seed_i * d(out_i)/d(params) into
// param_grad and returns the per-entry seed_i * d(out_i)/d(x0_i).
Eigen::RowVectorXd rk4_scalar_batch_backward(const DenseNet& rhs, const Rk4BatchTrace& trace,
                                             const Eigen::RowVectorXd& seed,
                                             Eigen::VectorXd& param_grad);

// Reverse sweep through the recorded trace. Accumulates d(out)/d(rhs params)
// scaled by `seed` into param_grad and returns seed * d(out)/d(x0).
double rk4_scalar_backward(const DenseNet& rhs, const Rk4ScalarTrace& trace, double seed,
                           Eigen::VectorXd& param_grad);

}  // namespace matgen::engine

#endif
