#ifndef MATGEN_METRICS_HPP
#define MATGEN_METRICS_HPP

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "matgen/mech.hpp"
#include "matgen/node_energy.hpp"

namespace matgen::metrics {

// Samples are rows (n x dim).
using SampleSet = Eigen::MatrixXd;

// Szekely squared energy distance: 2 E||x-y|| - E||x-x'|| - E||y-y'||.
double energy_distance_sq(const SampleSet& X, const SampleSet& Y);

struct GmmModel {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<Eigen::MatrixXd> covs;
  double log_likelihood = 0.0;
  std::vector<double> ll_history;  // per EM iteration
};

GmmModel gmm_fit_em(const SampleSet& samples, int k, uint64_t seed, int max_iter = 500,
                    double tol = 1e-8);
SampleSet gmm_sample(const GmmModel& model, int n, std::mt19937_64& rng);

// Gaussian KDE; bandwidth <= 0 selects Silverman's rule per dimension.
Eigen::VectorXd kde_pdf(const SampleSet& samples, const SampleSet& query,
                        double bandwidth = 0.0);

// sigma_xx of every phi at (protocol, lambda); one row per model.
SampleSet qoi_stress_samples(const std::vector<Eigen::VectorXd>& phis,
                             const node::ConstitutiveModel& model, mech::Protocol protocol,
                             double lambda);

}  // namespace matgen::metrics

#endif
