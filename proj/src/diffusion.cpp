#include "matgen/diffusion.hpp"

#include <cmath>
#include <stdexcept>

namespace matgen::diffusion {

void Schedule::validate() const {
  if (!(beta_min > 0.0) || !(beta_max >= beta_min))
    throw std::invalid_argument("need 0 < beta_min <= beta_max");
  if (n_steps < 1 || !(T > 0.0)) throw std::invalid_argument("bad schedule horizon");
}

Schedule::Eval Schedule::eval(double t) const {
  if (t < 0.0 || t > T) throw std::domain_error("t outside [0, T]");
  return {beta(t), alpha(t), mu(t), sigma2(t)};
}

Standardizer Standardizer::fit(const Eigen::MatrixXd& data) {
  if (data.cols() < 1) throw std::invalid_argument("empty data");
  Standardizer s;
  s.mean = data.rowwise().mean();
  Eigen::MatrixXd centered = data.colwise() - s.mean;
  s.std = (centered.array().square().rowwise().sum() / data.cols()).sqrt();
  for (Eigen::Index i = 0; i < s.std.size(); ++i)
    if (!(s.std[i] > 0.0)) s.std[i] = 1.0;  // degenerate dimension
  return s;
}

Standardizer Standardizer::identity(int dim) {
  Standardizer s;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.std = Eigen::VectorXd::Ones(dim);
  return s;
}

Eigen::VectorXd Standardizer::transform(const Eigen::VectorXd& x) const {
  return (x - mean).cwiseQuotient(std);
}
Eigen::VectorXd Standardizer::inverse(const Eigen::VectorXd& z) const {
  return mean + z.cwiseProduct(std);
}
Eigen::MatrixXd Standardizer::transform_cols(const Eigen::MatrixXd& X) const {
  return (X.colwise() - mean).array().colwise() / std.array();
}
Eigen::MatrixXd Standardizer::inverse_cols(const Eigen::MatrixXd& Z) const {
  return (Z.array().colwise() * std.array()).colwise() + mean.array();
}

Eigen::VectorXd forward_marginal_sample(const Eigen::VectorXd& phi0, double t,
                                        const Schedule& sched, std::mt19937_64& rng) {
  const auto e = sched.eval(t);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(phi0.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = gauss(rng);
  return e.mu * phi0 + std::sqrt(e.sigma2) * z;
}

namespace {

// Column-stochastic softmax weights of the mixture components for each query
// column, plus the component means, shared by score and log-density.
struct MixtureEval {
  Eigen::MatrixXd weights;  // N x B
  double sigma2 = 0.0;
  double mu = 0.0;
};

MixtureEval mixture_weights(const Eigen::MatrixXd& data, const Schedule& sched,
                            const Eigen::MatrixXd& Phi, double t) {
  if (data.cols() < 1) throw std::invalid_argument("mixture needs at least one component");
  if (data.rows() != Phi.rows()) throw std::invalid_argument("dimension mismatch");
  const auto e = sched.eval(t);
  if (!(e.sigma2 > 0.0)) throw std::domain_error("mixture score singular at t = 0");
  const Eigen::MatrixXd centers = e.mu * data;  // P x N
  // squared distances: N x B
  Eigen::MatrixXd d2 = (-2.0 * centers.transpose() * Phi);
  d2.colwise() += centers.colwise().squaredNorm().transpose();
  d2.rowwise() += Phi.colwise().squaredNorm();
  Eigen::MatrixXd loglik = -d2 / (2.0 * e.sigma2);
  Eigen::RowVectorXd m = loglik.colwise().maxCoeff();
  Eigen::MatrixXd w = (loglik.rowwise() - m).array().exp();
  Eigen::RowVectorXd norm = w.colwise().sum();
  w.array().rowwise() /= norm.array();
  return {std::move(w), e.sigma2, e.mu};
}

}  // namespace

Eigen::MatrixXd exact_mixture_score_batch(const Eigen::MatrixXd& data, const Schedule& sched,
                                          const Eigen::MatrixXd& Phi, double t) {
  const auto mix = mixture_weights(data, sched, Phi, t);
  // weighted component means minus query, over the marginal variance
  return ((mix.mu * data) * mix.weights - Phi) / mix.sigma2;
}

Eigen::VectorXd exact_mixture_score(const Eigen::MatrixXd& data, const Schedule& sched,
                                    const Eigen::VectorXd& phi, double t) {
  return exact_mixture_score_batch(data, sched, phi, t).col(0);
}

double mixture_log_density(const Eigen::MatrixXd& data, const Schedule& sched,
                           const Eigen::VectorXd& phi, double t) {
  const auto e = sched.eval(t);
  if (!(e.sigma2 > 0.0)) throw std::domain_error("mixture density singular at t = 0");
  const int N = static_cast<int>(data.cols());
  const double P = static_cast<double>(data.rows());
  Eigen::VectorXd loglik(N);
  for (int i = 0; i < N; ++i)
    loglik[i] = -(phi - e.mu * data.col(i)).squaredNorm() / (2.0 * e.sigma2);
  const double m = loglik.maxCoeff();
  const double lse = m + std::log((loglik.array() - m).exp().sum());
  return lse - std::log(static_cast<double>(N)) -
         0.5 * P * std::log(2.0 * M_PI * e.sigma2);
}

ScoreFn make_exact_score(const Eigen::MatrixXd& data, const Schedule& sched) {
  return [data, sched](const Eigen::MatrixXd& Phi, double t) {
    return exact_mixture_score_batch(data, sched, Phi, t);
  };
}

Eigen::MatrixXd ScoreModel::score_batch(const Eigen::MatrixXd& Phi, double t) const {
  const auto e = schedule.eval(t);
  Eigen::MatrixXd in(Phi.rows() + 3, Phi.cols());
  in.topRows(Phi.rows()) = Phi;
  in.row(Phi.rows()).setConstant(t);
  in.row(Phi.rows() + 1).setConstant(e.mu);
  in.row(Phi.rows() + 2).setConstant(e.sigma2);
  return net.forward_batch(in);
}

Eigen::VectorXd ScoreModel::score(const Eigen::VectorXd& phi, double t) const {
  return score_batch(phi, t).col(0);
}

ScoreFn ScoreModel::as_score_fn() const {
  return [this](const Eigen::MatrixXd& Phi, double t) { return score_batch(Phi, t); };
}

ScoreModel train_score(const Eigen::MatrixXd& data, const Schedule& sched,
                       const TrainConfig& cfg) {
  sched.validate();
  if (data.cols() < 2) throw std::invalid_argument("score training needs N >= 2");
  const int P = static_cast<int>(data.rows());
  const int N = static_cast<int>(data.cols());

  ScoreModel model;
  model.schedule = sched;
  model.standardizer = Standardizer::fit(data);
  const Eigen::MatrixXd D = model.standardizer.transform_cols(data);

  std::vector<int> widths;
  widths.push_back(P + 3);
  for (int i = 0; i < cfg.hidden_layers; ++i) widths.push_back(cfg.hidden_width);
  widths.push_back(P);
  std::vector<engine::Activation> acts(widths.size() - 1, engine::Activation::Tanh);
  acts.back() = engine::Activation::Linear;
  std::mt19937_64 rng(cfg.seed);
  model.net = engine::DenseNet::random_init(widths, acts, rng);

  engine::AdamConfig acfg;
  acfg.lr = cfg.lr;
  Eigen::VectorXd theta = model.net.params_flat();
  engine::Adam opt(static_cast<int>(theta.size()), acfg);
  Eigen::VectorXd grad(theta.size());

  const int steps_per_epoch = std::max(1, (N + cfg.batch - 1) / cfg.batch);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif_t(cfg.t_min, sched.T);
  std::uniform_int_distribution<int> unif_i(0, N - 1);

  const int B = cfg.batch;
  Eigen::MatrixXd phi(P, B), in(P + 3, B), target(P, B);
  engine::DenseNet::Trace trace;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int s = 0; s < steps_per_epoch; ++s) {
      const double t = unif_t(rng);
      const auto e = sched.eval(t);
      const double sd = std::sqrt(e.sigma2);
      for (int b = 0; b < B; ++b) {
        const int i = unif_i(rng);
        for (int r = 0; r < P; ++r) phi(r, b) = gauss(rng);
        phi.col(b) = e.mu * D.col(i) + sd * phi.col(b);
        if (cfg.target == ScoreTarget::Denoising)
          target.col(b) = (e.mu * D.col(i) - phi.col(b)) / e.sigma2;
      }
      if (cfg.target == ScoreTarget::ExactMixture)
        target = exact_mixture_score_batch(D, sched, phi, t);

      in.topRows(P) = phi;
      in.row(P).setConstant(t);
      in.row(P + 1).setConstant(e.mu);
      in.row(P + 2).setConstant(e.sigma2);
      const Eigen::MatrixXd out = model.net.forward_batch(in, &trace);
      const Eigen::MatrixXd resid = out - target;
      epoch_loss += resid.squaredNorm() / B;
      grad.setZero();
      model.net.backward_batch(trace, 2.0 * resid / B, grad);
      opt.step(theta, grad);
      model.net.set_params_flat(theta);
    }
    epoch_loss /= steps_per_epoch;
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("score training loss diverged at epoch " + std::to_string(epoch));
    if (epoch == 0) model.first_epoch_loss = epoch_loss;
    model.final_epoch_loss = epoch_loss;
  }
  return model;
}

Eigen::MatrixXd reverse_sde_sample(const ScoreFn& score, const Schedule& sched, int dim,
                                   int n_samples, std::mt19937_64& rng,
                                   const Standardizer* destd) {
  sched.validate();
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd phi(dim, n_samples);
  for (Eigen::Index j = 0; j < phi.size(); ++j) phi.data()[j] = gauss(rng);

  const double dt = sched.dt();
  for (int k = 0; k < sched.n_steps; ++k) {
    const double t = sched.T - k * dt;
    const double beta = sched.beta(t);
    Eigen::MatrixXd z(dim, n_samples);
    for (Eigen::Index j = 0; j < z.size(); ++j) z.data()[j] = gauss(rng);
    phi += 0.5 * beta * dt * phi + beta * dt * score(phi, t) + std::sqrt(beta * dt) * z;
    if (!phi.allFinite())
      throw std::runtime_error("reverse SDE state non-finite at step " + std::to_string(k));
  }
  if (destd) return destd->inverse_cols(phi);
  return phi;
}

void Observation::validate() const {
  if (!(noise > 0.0)) throw std::invalid_argument("observation noise must be positive");
  if (values.size() < 1) throw std::invalid_argument("need at least one observation");
  if (direct) {
    if (static_cast<Eigen::Index>(indices.size()) != values.size())
      throw std::invalid_argument("index/value count mismatch");
  } else {
    if (static_cast<Eigen::Index>(protocols.size()) != values.size() ||
        lambdas.size() != protocols.size() || components.size() != protocols.size())
      throw std::invalid_argument("observation point/value count mismatch");
  }
}

Eigen::VectorXd likelihood_score(const Observation& obs, const node::ConstitutiveModel* model,
                                 const Standardizer& std_, const Eigen::VectorXd& phi_std) {
  obs.validate();
  const double inv_s2 = 1.0 / (obs.noise * obs.noise);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(phi_std.size());
  if (obs.direct) {
    for (size_t i = 0; i < obs.indices.size(); ++i) {
      const int idx = obs.indices[i];
      g[idx] += inv_s2 * (obs.values[static_cast<Eigen::Index>(i)] - phi_std[idx]);
    }
    return g;
  }
  if (!model) throw std::invalid_argument("stress observation requires a constitutive model");
  node::ConstitutiveModel m = *model;
  m.set_individual(std_.inverse(phi_std));
  Eigen::VectorXd shared_grad(m.shared_dim());
  for (size_t i = 0; i < obs.protocols.size(); ++i) {
    shared_grad.setZero();
    Eigen::VectorXd dsig = Eigen::VectorXd::Zero(phi_std.size());
    const double wxx = obs.components[i] == 0 ? 1.0 : 0.0;
    const double wyy = obs.components[i] == 1 ? 1.0 : 0.0;
    const auto s = m.stress_backward(obs.protocols[i], obs.lambdas[i], wxx, wyy,
                                     shared_grad, dsig);
    const double pred = obs.components[i] == 0 ? s.sxx : s.syy;
    // chain rule through destandardization
    g += inv_s2 * (obs.values[static_cast<Eigen::Index>(i)] - pred) *
         dsig.cwiseProduct(std_.std);
  }
  return g;
}

Eigen::MatrixXd conditional_sample(const ScoreFn& score, const Observation& obs,
                                   const node::ConstitutiveModel* model,
                                   const Standardizer& std_, const Schedule& sched, int dim,
                                   int n_samples, std::mt19937_64& rng, bool destandardize) {
  obs.validate();
  auto combined = [&](const Eigen::MatrixXd& Phi, double t) {
    Eigen::MatrixXd s = score(Phi, t);
    for (Eigen::Index j = 0; j < Phi.cols(); ++j)
      s.col(j) += likelihood_score(obs, model, std_, Phi.col(j));
    return s;
  };
  return reverse_sde_sample(combined, sched, dim, n_samples, rng,
                            destandardize ? &std_ : nullptr);
}

}  // namespace matgen::diffusion
