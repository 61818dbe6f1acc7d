#ifndef MATGEN_DIFFUSION_HPP
#define MATGEN_DIFFUSION_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "matgen/engine/net.hpp"
#include "matgen/node_energy.hpp"

// Variance-preserving OU diffusion over (standardized) individual parameter
// vectors: closed-form marginals, exact mixture scores, score matching and
// Euler-Maruyama reverse sampling, unconditional and conditioned.

namespace matgen::diffusion {

struct Schedule {
  double beta_min = 0.001;
  double beta_max = 3.0;
  double T = 1.0;
  int n_steps = 1000;

  double dt() const { return T / n_steps; }
  double beta(double t) const { return beta_min + t * (beta_max - beta_min); }
  double alpha(double t) const { return beta_min * t + 0.5 * t * t * (beta_max - beta_min); }
  double mu(double t) const { return std::exp(-alpha(t) / 2.0); }
  double sigma2(double t) const { return 1.0 - std::exp(-alpha(t)); }

  struct Eval {
    double beta, alpha, mu, sigma2;
  };
  Eval eval(double t) const;

  void validate() const;
};

struct Standardizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;

  // Columns of `data` are samples. Degenerate dimensions get std = 1.
  static Standardizer fit(const Eigen::MatrixXd& data);
  static Standardizer identity(int dim);

  Eigen::VectorXd transform(const Eigen::VectorXd& x) const;
  Eigen::VectorXd inverse(const Eigen::VectorXd& z) const;
  Eigen::MatrixXd transform_cols(const Eigen::MatrixXd& X) const;
  Eigen::MatrixXd inverse_cols(const Eigen::MatrixXd& Z) const;
};

Eigen::VectorXd forward_marginal_sample(const Eigen::VectorXd& phi0, double t,
                                        const Schedule& sched, std::mt19937_64& rng);

// Score of the empirical Gaussian mixture (columns of data are phi0^i),
// log-sum-exp stabilized. t = 0 is singular.
Eigen::VectorXd exact_mixture_score(const Eigen::MatrixXd& data, const Schedule& sched,
                                    const Eigen::VectorXd& phi, double t);
// Batched: columns of Phi are query points, all at the same t.
Eigen::MatrixXd exact_mixture_score_batch(const Eigen::MatrixXd& data, const Schedule& sched,
                                          const Eigen::MatrixXd& Phi, double t);
// Log density of the mixture (used by the finite-difference oracle in tests).
double mixture_log_density(const Eigen::MatrixXd& data, const Schedule& sched,
                           const Eigen::VectorXd& phi, double t);

// Batched score callable: columns are states, shared time t.
using ScoreFn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;

ScoreFn make_exact_score(const Eigen::MatrixXd& data, const Schedule& sched);

enum class ScoreTarget { ExactMixture, Denoising };

struct TrainConfig {
  int epochs = 1000;
  int batch = 100;
  double lr = 1e-3;
  double t_min = 1e-3;
  uint64_t seed = 0;
  ScoreTarget target = ScoreTarget::ExactMixture;
  int hidden_layers = 4;
  int hidden_width = 256;
};

struct ScoreModel {
  engine::DenseNet net;  // input P + 3 time features -> P
  Schedule schedule;
  Standardizer standardizer;
  double first_epoch_loss = 0.0;
  double final_epoch_loss = 0.0;

  int dim() const { return net.output_width(); }
  Eigen::MatrixXd score_batch(const Eigen::MatrixXd& Phi, double t) const;
  Eigen::VectorXd score(const Eigen::VectorXd& phi, double t) const;
  ScoreFn as_score_fn() const;
};

// data columns are raw phi^i; standardization happens inside.
ScoreModel train_score(const Eigen::MatrixXd& data, const Schedule& sched,
                       const TrainConfig& cfg);

// Reverse SDE in standardized space; returns raw-space samples as columns
// when a standardizer is supplied.
Eigen::MatrixXd reverse_sde_sample(const ScoreFn& score, const Schedule& sched, int dim,
                                   int n_samples, std::mt19937_64& rng,
                                   const Standardizer* destd = nullptr);

struct Observation {
  // Direct-parameter conditioning: y lives in standardized phi units.
  bool direct = false;
  std::vector<int> indices;  // parameter indices for direct mode
  Eigen::VectorXd values;    // y
  double noise = 0.05;       // varsigma

  // Stress-observation mode: one (protocol, lambda, component) per value,
  // component 0 = sigma_xx, 1 = sigma_yy.
  std::vector<mech::Protocol> protocols;
  std::vector<double> lambdas;
  std::vector<int> components;

  void validate() const;
};

// Gradient of the Gaussian log-likelihood w.r.t. the standardized phi.
// `model` supplies sigma_hat for stress observations (ignored in direct mode).
Eigen::VectorXd likelihood_score(const Observation& obs, const node::ConstitutiveModel* model,
                                 const Standardizer& std_, const Eigen::VectorXd& phi_std);

Eigen::MatrixXd conditional_sample(const ScoreFn& score, const Observation& obs,
                                   const node::ConstitutiveModel* model,
                                   const Standardizer& std_, const Schedule& sched, int dim,
                                   int n_samples, std::mt19937_64& rng,
                                   bool destandardize = true);

}  // namespace matgen::diffusion

#endif
