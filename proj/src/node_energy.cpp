#include "matgen/node_energy.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace matgen::node {

namespace {

double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Crude Lipschitz bound of the RHS network (tanh slopes <= 1). The flow map
// is monotone for the exact ODE; keeping dt * L below the RK4 stability
// bound preserves monotonicity of the discrete map as well.
double rhs_lipschitz_bound(const engine::DenseNet& rhs) {
  double L = 1.0;
  for (const auto& l : rhs.layers()) L *= l.W.cwiseAbs().rowwise().sum().maxCoeff();
  return L;
}

int effective_steps(const engine::DenseNet& rhs, int base) {
  const double L = rhs_lipschitz_bound(rhs);
  const int needed = static_cast<int>(std::ceil(L / 2.0));
  return std::max(base, needed);
}

}  // namespace

ArchKind arch_from_string(const std::string& s) {
  if (s == "iso2") return ArchKind::Iso2;
  if (s == "aniso5") return ArchKind::Aniso5;
  throw std::invalid_argument("unknown architecture: " + s);
}

std::string to_string(ArchKind k) { return k == ArchKind::Iso2 ? "iso2" : "aniso5"; }

std::vector<int> NodeArch::widths_for(int node_index) const {
  std::vector<int> w;
  w.push_back(1);
  for (int h : hidden) w.push_back(h);
  if (!last_hidden.empty()) w.back() = last_hidden.at(node_index);
  w.push_back(1);
  return w;
}

int NodeArch::individual_dim() const {
  int p = 0;
  for (int i = 0; i < node_count(); ++i) {
    const auto w = widths_for(i);
    p += w[w.size() - 2] + 1;  // final linear layer: weights + bias
  }
  return p;
}

void NodeArch::validate() const {
  if (hidden.empty()) throw std::invalid_argument("at least one hidden layer required");
  for (int h : hidden)
    if (h < 1) throw std::invalid_argument("hidden widths must be >= 1");
  if (!last_hidden.empty() && static_cast<int>(last_hidden.size()) != node_count())
    throw std::invalid_argument("last_hidden must have one entry per NODE");
  if (tau_steps < 1) throw std::invalid_argument("tau_steps must be >= 1");
}

ConstitutiveModel::ConstitutiveModel(const NodeArch& arch, uint64_t seed) : arch_(arch) {
  arch.validate();
  std::mt19937_64 rng(seed);
  for (int i = 0; i < arch.node_count(); ++i) {
    const auto w = arch.widths_for(i);
    std::vector<engine::Activation> acts(w.size() - 1, engine::Activation::Tanh);
    acts.back() = engine::Activation::Linear;
    auto net = engine::DenseNet::random_init(w, acts, rng);
    // start the derivative functions near zero stress
    net.layers().back().b[0] = -1.0;
    nodes_.push_back(std::move(net));
  }
  alpha_pre_.setZero();
}

int ConstitutiveModel::individual_dim() const { return arch_.individual_dim(); }

int ConstitutiveModel::shared_dim() const {
  int n = 0;
  for (const auto& net : nodes_) n += net.param_count() - net.last_layer_param_count();
  return n + arch_.alpha_count();
}

Eigen::VectorXd ConstitutiveModel::individual() const {
  Eigen::VectorXd phi(individual_dim());
  int off = 0;
  for (const auto& net : nodes_) {
    const int k = net.last_layer_param_count();
    phi.segment(off, k) = net.params_flat().tail(k);
    off += k;
  }
  return phi;
}

void ConstitutiveModel::set_individual(const Eigen::VectorXd& phi) {
  if (phi.size() != individual_dim()) throw std::invalid_argument("phi dimension mismatch");
  int off = 0;
  for (auto& net : nodes_) {
    const int k = net.last_layer_param_count();
    Eigen::VectorXd p = net.params_flat();
    p.tail(k) = phi.segment(off, k);
    net.set_params_flat(p);
    off += k;
  }
}

Eigen::VectorXd ConstitutiveModel::shared() const {
  Eigen::VectorXd s(shared_dim());
  int off = 0;
  for (const auto& net : nodes_) {
    const int k = net.param_count() - net.last_layer_param_count();
    s.segment(off, k) = net.params_flat().head(k);
    off += k;
  }
  for (int i = 0; i < arch_.alpha_count(); ++i) s[off++] = alpha_pre_[i];
  return s;
}

void ConstitutiveModel::set_shared(const Eigen::VectorXd& s) {
  if (s.size() != shared_dim()) throw std::invalid_argument("shared dimension mismatch");
  int off = 0;
  for (auto& net : nodes_) {
    const int k = net.param_count() - net.last_layer_param_count();
    Eigen::VectorXd p = net.params_flat();
    p.head(k) = s.segment(off, k);
    net.set_params_flat(p);
    off += k;
  }
  for (int i = 0; i < arch_.alpha_count(); ++i) alpha_pre_[i] = s[off++];
}

Eigen::Vector3d ConstitutiveModel::alphas() const {
  return alpha_pre_.unaryExpr([](double a) { return sigmoid(a); });
}

double node_scalar_flow(const engine::DenseNet& rhs, double x0, int tau_steps) {
  return engine::rk4_scalar(rhs, x0, effective_steps(rhs, tau_steps));
}

double node_scalar_forward(const engine::DenseNet& rhs, double x0, int tau_steps) {
  return softplus(node_scalar_flow(rhs, x0, tau_steps));
}

namespace {

// NODE inputs shifted to vanish at the identity deformation.
struct NodeInputs {
  std::array<double, 5> xi{};
};

NodeInputs node_inputs(ArchKind kind, const mech::Invariants& inv, const Eigen::Vector3d& a) {
  NodeInputs in;
  in.xi[0] = inv.I1 - 3.0;
  in.xi[1] = inv.I2 - 3.0;
  if (kind == ArchKind::Aniso5) {
    in.xi[2] = a[0] * inv.I1 + (1.0 - a[0]) * inv.I4v - (2.0 * a[0] + 1.0);
    in.xi[3] = a[1] * inv.I1 + (1.0 - a[1]) * inv.I4w - (2.0 * a[1] + 1.0);
    in.xi[4] = a[2] * inv.I4v + (1.0 - a[2]) * inv.I4w - 1.0;
  }
  return in;
}

}  // namespace

mech::EnergyDerivs ConstitutiveModel::energy_derivs(const mech::Invariants& inv) const {
  const Eigen::Vector3d a = alphas();
  const auto in = node_inputs(arch_.kind, inv, a);
  mech::EnergyDerivs d;
  const double n1 = node_scalar_forward(nodes_[0], in.xi[0], arch_.tau_steps);
  const double n2 = node_scalar_forward(nodes_[1], in.xi[1], arch_.tau_steps);
  if (arch_.kind == ArchKind::Iso2) {
    d.psi1 = n1;
    d.psi2 = n2;
    return d;
  }
  const double n3 = node_scalar_forward(nodes_[2], in.xi[2], arch_.tau_steps);
  const double n4 = node_scalar_forward(nodes_[3], in.xi[3], arch_.tau_steps);
  const double n5 = node_scalar_forward(nodes_[4], in.xi[4], arch_.tau_steps);
  d.psi1 = n1 + a[0] * n3 + a[1] * n4;
  d.psi2 = n2;
  d.psi4v = (1.0 - a[0]) * n3 + a[2] * n5;
  d.psi4w = (1.0 - a[1]) * n4 + (1.0 - a[2]) * n5;
  return d;
}

mech::PlaneStress ConstitutiveModel::predict_stress_stretches(double lx, double ly) const {
  const double lz = 1.0 / (lx * ly);
  const auto inv = mech::invariants_from_stretches(lx, ly, lz);
  return mech::cauchy_stress_plane_stress(energy_derivs(inv), lx, ly);
}

mech::PlaneStress ConstitutiveModel::predict_stress(mech::Protocol kind, double lambda) const {
  const auto [lx, ly, lz] = mech::protocol_stretches(kind, lambda);
  return predict_stress_stretches(lx, ly);
}

mech::PlaneStress ConstitutiveModel::stress_backward(mech::Protocol kind, double lambda,
                                                     double w_xx, double w_yy,
                                                     Eigen::VectorXd& shared_grad,
                                                     Eigen::VectorXd& individual_grad) const {
  if (shared_grad.size() != shared_dim() || individual_grad.size() != individual_dim())
    throw std::invalid_argument("gradient buffer size mismatch");
  const auto [lx, ly, lz] = mech::protocol_stretches(kind, lambda);
  const auto inv = mech::invariants_from_stretches(lx, ly, lz);
  const Eigen::Vector3d a = alphas();
  const auto in = node_inputs(arch_.kind, inv, a);

  const int n_nodes = arch_.node_count();
  std::vector<engine::Rk4ScalarTrace> traces(n_nodes);
  std::vector<int> steps(n_nodes);
  std::vector<double> flow(n_nodes), val(n_nodes);
  for (int k = 0; k < n_nodes; ++k) {
    steps[k] = effective_steps(nodes_[k], arch_.tau_steps);
    flow[k] = engine::rk4_scalar(nodes_[k], in.xi[k], steps[k], &traces[k]);
    val[k] = softplus(flow[k]);
  }

  mech::EnergyDerivs d;
  if (arch_.kind == ArchKind::Iso2) {
    d.psi1 = val[0];
    d.psi2 = val[1];
  } else {
    d.psi1 = val[0] + a[0] * val[2] + a[1] * val[3];
    d.psi2 = val[1];
    d.psi4v = (1.0 - a[0]) * val[2] + a[2] * val[4];
    d.psi4w = (1.0 - a[1]) * val[3] + (1.0 - a[2]) * val[4];
  }
  const auto stress = mech::cauchy_stress_plane_stress(d, lx, ly);

  // adjoints of the energy derivatives from the plane-stress formula
  const double x = lx * lx, y = ly * ly, z = lz * lz;
  const double I1 = x + y + z;
  const double psi1_b = 2.0 * (x - z) * w_xx + 2.0 * (y - z) * w_yy;
  const double psi2_b = 2.0 * (I1 * (x - z) - (x * x - z * z)) * w_xx +
                        2.0 * (I1 * (y - z) - (y * y - z * z)) * w_yy;
  const double psi4v_b = 2.0 * x * w_xx;
  const double psi4w_b = 2.0 * y * w_yy;

  std::array<double, 5> nbar{};
  Eigen::Vector3d abar = Eigen::Vector3d::Zero();
  nbar[0] = psi1_b;
  nbar[1] = psi2_b;
  if (arch_.kind == ArchKind::Aniso5) {
    nbar[2] = a[0] * psi1_b + (1.0 - a[0]) * psi4v_b;
    nbar[3] = a[1] * psi1_b + (1.0 - a[1]) * psi4w_b;
    nbar[4] = a[2] * psi4v_b + (1.0 - a[2]) * psi4w_b;
    abar[0] = psi1_b * val[2] - psi4v_b * val[2];
    abar[1] = psi1_b * val[3] - psi4w_b * val[3];
    abar[2] = psi4v_b * val[4] - psi4w_b * val[4];
  }

  int shared_off = 0, indiv_off = 0;
  for (int k = 0; k < n_nodes; ++k) {
    const auto& net = nodes_[k];
    const int n_all = net.param_count();
    const int n_last = net.last_layer_param_count();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n_all);
    const double seed = nbar[k] * sigmoid(flow[k]);
    const double x0_b = engine::rk4_scalar_backward(net, traces[k], seed, g);
    shared_grad.segment(shared_off, n_all - n_last) += g.head(n_all - n_last);
    individual_grad.segment(indiv_off, n_last) += g.tail(n_last);
    shared_off += n_all - n_last;
    indiv_off += n_last;
    // input mixing contributes to the alpha adjoints
    if (arch_.kind == ArchKind::Aniso5) {
      if (k == 2) abar[0] += x0_b * (inv.I1 - inv.I4v - 2.0);
      if (k == 3) abar[1] += x0_b * (inv.I1 - inv.I4w - 2.0);
      if (k == 4) abar[2] += x0_b * (inv.I4v - inv.I4w);
    }
  }
  for (int i = 0; i < arch_.alpha_count(); ++i) {
    const double s = sigmoid(alpha_pre_[i]);
    shared_grad[shared_off + i] += abar[i] * s * (1.0 - s);
  }
  return stress;
}

namespace {

// Per-individual data flattened to one batch (columns are data points).
struct CurveBatch {
  Eigen::RowVectorXd x, y, z;      // squared stretches
  Eigen::RowVectorXd I1, I2;
  Eigen::RowVectorXd txx, tyy;     // target stresses
  int size() const { return static_cast<int>(x.size()); }
};

CurveBatch make_batch(const std::vector<mech::BiaxialCurve>& curves) {
  int B = 0;
  for (const auto& c : curves) B += static_cast<int>(c.protocol.stretch_grid.size());
  CurveBatch b;
  b.x.resize(B); b.y.resize(B); b.z.resize(B);
  b.I1.resize(B); b.I2.resize(B);
  b.txx.resize(B); b.tyy.resize(B);
  int j = 0;
  for (const auto& c : curves) {
    for (size_t p = 0; p < c.protocol.stretch_grid.size(); ++p, ++j) {
      const auto [lx, ly, lz] = mech::protocol_stretches(c.protocol.kind,
                                                         c.protocol.stretch_grid[p]);
      b.x[j] = lx * lx;
      b.y[j] = ly * ly;
      b.z[j] = lz * lz;
      b.I1[j] = b.x[j] + b.y[j] + b.z[j];
      b.I2[j] = b.x[j] * b.y[j] + b.y[j] * b.z[j] + b.z[j] * b.x[j];
      b.txx[j] = c.sigma_xx[p];
      b.tyy[j] = c.sigma_yy[p];
    }
  }
  return b;
}

// Fused batched MAE loss and gradient of one individual's curves. Gradients
// are accumulated; loss contributions are scaled by 1/n_res_total.
double batch_loss_grad(const ConstitutiveModel& model, const CurveBatch& b,
                       double inv_n_res, Eigen::VectorXd& shared_grad,
                       Eigen::VectorXd& indiv_grad) {
  const auto& arch = model.arch();
  const auto& nets = model.nodes();
  const int n_nodes = arch.node_count();
  const int B = b.size();
  const Eigen::Vector3d a = model.alphas();

  // NODE inputs per point
  std::vector<Eigen::RowVectorXd> xi(n_nodes);
  xi[0] = b.I1.array() - 3.0;
  xi[1] = b.I2.array() - 3.0;
  if (arch.kind == ArchKind::Aniso5) {
    xi[2] = a[0] * b.I1 + (1.0 - a[0]) * b.x - Eigen::RowVectorXd::Constant(B, 2.0 * a[0] + 1.0);
    xi[3] = a[1] * b.I1 + (1.0 - a[1]) * b.y - Eigen::RowVectorXd::Constant(B, 2.0 * a[1] + 1.0);
    xi[4] = a[2] * b.x + (1.0 - a[2]) * b.y - Eigen::RowVectorXd::Constant(B, 1.0);
  }

  std::vector<engine::Rk4BatchTrace> traces(n_nodes);
  std::vector<Eigen::RowVectorXd> flow(n_nodes), val(n_nodes);
  for (int k = 0; k < n_nodes; ++k) {
    const int steps = effective_steps(nets[k], arch.tau_steps);
    flow[k] = engine::rk4_scalar_batch(nets[k], xi[k], steps, &traces[k]);
    val[k] = flow[k].unaryExpr([](double v) { return softplus(v); });
  }

  Eigen::RowVectorXd psi1, psi2, psi4v, psi4w;
  if (arch.kind == ArchKind::Iso2) {
    psi1 = val[0];
    psi2 = val[1];
    psi4v = Eigen::RowVectorXd::Zero(B);
    psi4w = Eigen::RowVectorXd::Zero(B);
  } else {
    psi1 = val[0] + a[0] * val[2] + a[1] * val[3];
    psi2 = val[1];
    psi4v = (1.0 - a[0]) * val[2] + a[2] * val[4];
    psi4w = (1.0 - a[1]) * val[3] + (1.0 - a[2]) * val[4];
  }

  const Eigen::ArrayXXd xz = (b.x - b.z).array();
  const Eigen::ArrayXXd yz = (b.y - b.z).array();
  const Eigen::ArrayXXd cxx = b.I1.array() * xz - (b.x.array().square() - b.z.array().square());
  const Eigen::ArrayXXd cyy = b.I1.array() * yz - (b.y.array().square() - b.z.array().square());
  const Eigen::RowVectorXd sxx =
      2.0 * (psi1.array() * xz + psi2.array() * cxx + psi4v.array() * b.x.array()).matrix();
  const Eigen::RowVectorXd syy =
      2.0 * (psi1.array() * yz + psi2.array() * cyy + psi4w.array() * b.y.array()).matrix();

  const Eigen::RowVectorXd rxx = sxx - b.txx;
  const Eigen::RowVectorXd ryy = syy - b.tyy;
  const double loss = (rxx.cwiseAbs().sum() + ryy.cwiseAbs().sum()) * inv_n_res;

  auto sgn = [](double v) { return v >= 0.0 ? 1.0 : -1.0; };
  const Eigen::RowVectorXd wxx = rxx.unaryExpr(sgn) * inv_n_res;
  const Eigen::RowVectorXd wyy = ryy.unaryExpr(sgn) * inv_n_res;

  // adjoints of the energy derivative values per point
  const Eigen::RowVectorXd psi1_b = 2.0 * (wxx.array() * xz + wyy.array() * yz).matrix();
  const Eigen::RowVectorXd psi2_b = 2.0 * (wxx.array() * cxx + wyy.array() * cyy).matrix();
  const Eigen::RowVectorXd psi4v_b = 2.0 * (wxx.array() * b.x.array()).matrix();
  const Eigen::RowVectorXd psi4w_b = 2.0 * (wyy.array() * b.y.array()).matrix();

  std::vector<Eigen::RowVectorXd> nbar(n_nodes);
  Eigen::Vector3d abar = Eigen::Vector3d::Zero();
  nbar[0] = psi1_b;
  nbar[1] = psi2_b;
  if (arch.kind == ArchKind::Aniso5) {
    nbar[2] = a[0] * psi1_b + (1.0 - a[0]) * psi4v_b;
    nbar[3] = a[1] * psi1_b + (1.0 - a[1]) * psi4w_b;
    nbar[4] = a[2] * psi4v_b + (1.0 - a[2]) * psi4w_b;
    abar[0] = ((psi1_b - psi4v_b).array() * val[2].array()).sum();
    abar[1] = ((psi1_b - psi4w_b).array() * val[3].array()).sum();
    abar[2] = ((psi4v_b - psi4w_b).array() * val[4].array()).sum();
  }

  int shared_off = 0, indiv_off = 0;
  Eigen::VectorXd g;
  for (int k = 0; k < n_nodes; ++k) {
    const auto& net = nets[k];
    const int n_all = net.param_count();
    const int n_last = net.last_layer_param_count();
    g = Eigen::VectorXd::Zero(n_all);
    const Eigen::RowVectorXd seed =
        (nbar[k].array() * flow[k].unaryExpr([](double v) { return sigmoid(v); }).array())
            .matrix();
    const Eigen::RowVectorXd x0b =
        engine::rk4_scalar_batch_backward(net, traces[k], seed, g);
    shared_grad.segment(shared_off, n_all - n_last) += g.head(n_all - n_last);
    indiv_grad.segment(indiv_off, n_last) += g.tail(n_last);
    shared_off += n_all - n_last;
    indiv_off += n_last;
    if (arch.kind == ArchKind::Aniso5) {
      if (k == 2) abar[0] += (x0b.array() * (b.I1 - b.x).array() - 2.0 * x0b.array()).sum();
      if (k == 3) abar[1] += (x0b.array() * (b.I1 - b.y).array() - 2.0 * x0b.array()).sum();
      if (k == 4) abar[2] += (x0b.array() * (b.x - b.y).array()).sum();
    }
  }
  for (int i = 0; i < arch.alpha_count(); ++i) {
    const double s = sigmoid(model.alpha_pre()[i]);
    shared_grad[shared_off + i] += abar[i] * s * (1.0 - s);
  }
  return loss;
}

}  // namespace

double curves_mae(const ConstitutiveModel& model,
                  const std::vector<mech::BiaxialCurve>& curves) {
  double sum = 0.0;
  long n = 0;
  for (const auto& c : curves) {
    for (size_t j = 0; j < c.protocol.stretch_grid.size(); ++j) {
      const auto s = model.predict_stress(c.protocol.kind, c.protocol.stretch_grid[j]);
      sum += std::abs(s.sxx - c.sigma_xx[j]) + std::abs(s.syy - c.sigma_yy[j]);
      n += 2;
    }
  }
  return n > 0 ? sum / n : 0.0;
}

PopulationFit fit_population(const std::vector<std::vector<mech::BiaxialCurve>>& dataset,
                             const NodeArch& arch, const FitConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  arch.validate();
  const int M = static_cast<int>(dataset.size());
  ConstitutiveModel model(arch, cfg.seed);
  const int n_shared = model.shared_dim();
  const int P = model.individual_dim();

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd theta(n_shared + static_cast<Eigen::Index>(M) * P);
  theta.head(n_shared) = model.shared();
  for (int i = 0; i < M; ++i) {
    Eigen::VectorXd phi = model.individual();
    for (Eigen::Index j = 0; j < P; ++j) phi[j] += 0.1 * gauss(rng);
    theta.segment(n_shared + static_cast<Eigen::Index>(i) * P, P) = phi;
  }

  long n_res = 0;
  for (const auto& curves : dataset)
    for (const auto& c : curves) n_res += 2 * static_cast<long>(c.protocol.stretch_grid.size());
  if (n_res == 0) throw std::invalid_argument("dataset has no data points");
  const double inv_n_res = 1.0 / static_cast<double>(n_res);

  std::vector<CurveBatch> batches;
  batches.reserve(dataset.size());
  for (const auto& curves : dataset) batches.push_back(make_batch(curves));

  engine::AdamConfig acfg;
  acfg.lr = cfg.lr;
  engine::Adam opt(static_cast<int>(theta.size()), acfg);
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd shared_grad(n_shared), indiv_grad(P);

  double loss = 0.0;
  for (int step = 0; step < cfg.max_steps; ++step) {
    grad.setZero();
    loss = 0.0;
    model.set_shared(theta.head(n_shared));
    for (int i = 0; i < M; ++i) {
      model.set_individual(theta.segment(n_shared + static_cast<Eigen::Index>(i) * P, P));
      shared_grad.setZero();
      indiv_grad.setZero();
      loss += batch_loss_grad(model, batches[i], inv_n_res, shared_grad, indiv_grad);
      grad.head(n_shared) += shared_grad;
      grad.segment(n_shared + static_cast<Eigen::Index>(i) * P, P) += indiv_grad;
    }
    if (!std::isfinite(loss))
      throw std::runtime_error("fit_population: loss became non-finite at step " +
                               std::to_string(step));
    opt.step(theta, grad);
  }

  PopulationFit fit;
  model.set_shared(theta.head(n_shared));
  fit.model = model;
  fit.config = cfg;
  fit.final_loss = loss;
  for (int i = 0; i < M; ++i) {
    Eigen::VectorXd phi = theta.segment(n_shared + static_cast<Eigen::Index>(i) * P, P);
    fit.phis.push_back(phi);
    ConstitutiveModel m = model;
    m.set_individual(phi);
    fit.mae.push_back(curves_mae(m, dataset[i]));
  }
  return fit;
}

}  // namespace matgen::node
