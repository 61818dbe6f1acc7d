#include "matgen/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Cholesky>

namespace matgen::metrics {

namespace {

double mean_cross_distance(const SampleSet& X, const SampleSet& Y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < Y.rows(); ++j) s += (X.row(i) - Y.row(j)).norm();
  return s / (static_cast<double>(X.rows()) * Y.rows());
}

}  // namespace

double energy_distance_sq(const SampleSet& X, const SampleSet& Y) {
  if (X.cols() != Y.cols()) throw std::invalid_argument("sample dimension mismatch");
  if (X.rows() < 1 || Y.rows() < 1) throw std::invalid_argument("empty sample set");
  return 2.0 * mean_cross_distance(X, Y) - mean_cross_distance(X, X) -
         mean_cross_distance(Y, Y);
}

GmmModel gmm_fit_em(const SampleSet& samples, int k, uint64_t seed, int max_iter,
                    double tol) {
  const int n = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  if (n < k) throw std::invalid_argument("need at least k samples");

  std::mt19937_64 rng(seed);
  auto initialize = [&](GmmModel& m) {
    m.weights.assign(k, 1.0 / k);
    m.means.clear();
    m.covs.clear();
    std::uniform_int_distribution<int> pick(0, n - 1);
    Eigen::VectorXd gmean = samples.colwise().mean();
    Eigen::MatrixXd centered = samples.rowwise() - gmean.transpose();
    Eigen::MatrixXd gcov = centered.transpose() * centered / n;
    for (int c = 0; c < k; ++c) {
      m.means.push_back(samples.row(pick(rng)).transpose());
      m.covs.push_back(gcov + 1e-6 * Eigen::MatrixXd::Identity(d, d));
    }
  };

  auto log_gauss = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& mu,
                       const Eigen::LLT<Eigen::MatrixXd>& llt, double logdet) {
    Eigen::VectorXd r = x - mu;
    Eigen::VectorXd s = llt.matrixL().solve(r);
    return -0.5 * (d * std::log(2.0 * M_PI) + logdet + s.squaredNorm());
  };

  GmmModel model;
  for (int attempt = 0; attempt < 2; ++attempt) {
    initialize(model);
    model.ll_history.clear();
    double prev_ll = -std::numeric_limits<double>::infinity();
    bool empty_component = false;
    Eigen::MatrixXd resp(n, k);
    for (int iter = 0; iter < max_iter; ++iter) {
      // E step
      std::vector<Eigen::LLT<Eigen::MatrixXd>> llts;
      std::vector<double> logdets;
      for (int c = 0; c < k; ++c) {
        llts.emplace_back(model.covs[c]);
        double ld = 0.0;
        for (int i = 0; i < d; ++i) ld += 2.0 * std::log(llts[c].matrixL()(i, i));
        logdets.push_back(ld);
      }
      double ll = 0.0;
      for (int i = 0; i < n; ++i) {
        Eigen::VectorXd lw(k);
        for (int c = 0; c < k; ++c)
          lw[c] = std::log(model.weights[c]) +
                  log_gauss(samples.row(i).transpose(), model.means[c], llts[c], logdets[c]);
        const double m = lw.maxCoeff();
        const double lse = m + std::log((lw.array() - m).exp().sum());
        ll += lse;
        resp.row(i) = (lw.array() - lse).exp();
      }
      model.log_likelihood = ll;
      model.ll_history.push_back(ll);
      // M step
      empty_component = false;
      for (int c = 0; c < k; ++c) {
        const double nc = resp.col(c).sum();
        if (nc < 1e-10) {
          empty_component = true;
          break;
        }
        model.weights[c] = nc / n;
        Eigen::VectorXd mu = (samples.transpose() * resp.col(c)) / nc;
        Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
        for (int i = 0; i < n; ++i) {
          Eigen::VectorXd r = samples.row(i).transpose() - mu;
          cov += resp(i, c) * r * r.transpose();
        }
        model.means[c] = mu;
        model.covs[c] = cov / nc + 1e-6 * Eigen::MatrixXd::Identity(d, d);
      }
      if (empty_component) break;
      if (std::abs(ll - prev_ll) < tol) return model;
      prev_ll = ll;
    }
    if (!empty_component) return model;
  }
  throw std::runtime_error("GMM EM: empty component after reinitialization");
}

SampleSet gmm_sample(const GmmModel& model, int n, std::mt19937_64& rng) {
  const int d = static_cast<int>(model.means.front().size());
  std::discrete_distribution<int> comp(model.weights.begin(), model.weights.end());
  std::normal_distribution<double> gauss(0.0, 1.0);
  SampleSet out(n, d);
  for (int i = 0; i < n; ++i) {
    const int c = comp(rng);
    Eigen::LLT<Eigen::MatrixXd> llt(model.covs[c]);
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; ++j) z[j] = gauss(rng);
    out.row(i) = (model.means[c] + llt.matrixL() * z).transpose();
  }
  return out;
}

Eigen::VectorXd kde_pdf(const SampleSet& samples, const SampleSet& query, double bandwidth) {
  const int n = static_cast<int>(samples.rows());
  const int d = static_cast<int>(samples.cols());
  if (query.cols() != d) throw std::invalid_argument("query dimension mismatch");
  Eigen::VectorXd h(d);
  if (bandwidth > 0.0) {
    h.setConstant(bandwidth);
  } else {
    if (n < 2) throw std::invalid_argument("Silverman bandwidth needs n >= 2");
    for (int j = 0; j < d; ++j) {
      const double m = samples.col(j).mean();
      const double sd = std::sqrt((samples.col(j).array() - m).square().sum() / (n - 1));
      if (!(sd > 0.0)) throw std::invalid_argument("zero-variance data with auto bandwidth");
      h[j] = sd * std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
    }
  }
  const double norm = std::pow(2.0 * M_PI, -0.5 * d) / (n * h.prod());
  Eigen::VectorXd out(query.rows());
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      double e = 0.0;
      for (int j = 0; j < d; ++j) {
        const double u = (query(q, j) - samples(i, j)) / h[j];
        e += u * u;
      }
      s += std::exp(-0.5 * e);
    }
    out[q] = norm * s;
  }
  return out;
}

SampleSet qoi_stress_samples(const std::vector<Eigen::VectorXd>& phis,
                             const node::ConstitutiveModel& model, mech::Protocol protocol,
                             double lambda) {
  node::ConstitutiveModel m = model;
  SampleSet out(static_cast<Eigen::Index>(phis.size()), 1);
  for (size_t i = 0; i < phis.size(); ++i) {
    m.set_individual(phis[i]);
    out(static_cast<Eigen::Index>(i), 0) = m.predict_stress(protocol, lambda).sxx;
  }
  return out;
}

}  // namespace matgen::metrics
