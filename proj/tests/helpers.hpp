#ifndef MATGEN_TESTS_HELPERS_HPP
#define MATGEN_TESTS_HELPERS_HPP

#include <functional>
#include <random>

#include <Eigen/Dense>

namespace testutil {

// Central finite differences of a scalar function.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double h = 1e-6) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    xp[i] = x0 + h;
    const double fp = f(xp);
    xp[i] = x0 - h;
    const double fm = f(xp);
    xp[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(1.0, std::abs(want));
}

inline double max_rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  double m = 0.0;
  const double scale = std::max(1e-8, want.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 0; i < got.size(); ++i)
    m = std::max(m, std::abs(got[i] - want[i]) / scale);
  return m;
}

inline Eigen::VectorXd randn(int n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = gauss(rng);
  return v;
}

}  // namespace testutil

#endif
