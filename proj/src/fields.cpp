#include "matgen/fields.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace matgen::fields {

PointSet PointSet::grid2d(int nx, int ny, double Lx, double Ly) {
  if (nx < 1 || ny < 1) throw std::invalid_argument("grid needs at least one point per axis");
  PointSet ps;
  ps.coords.resize(2, static_cast<Eigen::Index>(nx) * ny);
  int c = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      ps.coords(0, c) = nx > 1 ? Lx * i / (nx - 1) : 0.0;
      ps.coords(1, c) = ny > 1 ? Ly * j / (ny - 1) : 0.0;
      ++c;
    }
  return ps;
}

void TriMesh::validate() const {
  if (nodes.rows() != 2) throw std::invalid_argument("mesh nodes must be 2-D");
  if (triangles.rows() != 3) throw std::invalid_argument("triangles need three indices");
  for (int t = 0; t < n_tris(); ++t) {
    for (int k = 0; k < 3; ++k) {
      const int idx = triangles(k, t);
      if (idx < 0 || idx >= n_nodes())
        throw std::invalid_argument("triangle " + std::to_string(t) + " index out of range");
    }
  }
}

double TriMesh::area() const {
  double a = 0.0;
  for (int t = 0; t < n_tris(); ++t) {
    const auto p0 = nodes.col(triangles(0, t));
    const auto p1 = nodes.col(triangles(1, t));
    const auto p2 = nodes.col(triangles(2, t));
    a += 0.5 * std::abs((p1.x() - p0.x()) * (p2.y() - p0.y()) -
                        (p2.x() - p0.x()) * (p1.y() - p0.y()));
  }
  return a;
}

TriMesh TriMesh::unit_square(int n) {
  if (n < 2) throw std::invalid_argument("need at least 2 vertices per side");
  TriMesh m;
  m.nodes.resize(2, static_cast<Eigen::Index>(n) * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int idx = j * n + i;
      m.nodes(0, idx) = static_cast<double>(i) / (n - 1);
      m.nodes(1, idx) = static_cast<double>(j) / (n - 1);
    }
  m.triangles.resize(3, 2 * static_cast<Eigen::Index>(n - 1) * (n - 1));
  int t = 0;
  for (int j = 0; j < n - 1; ++j)
    for (int i = 0; i < n - 1; ++i) {
      const int v00 = j * n + i, v10 = v00 + 1, v01 = v00 + n, v11 = v01 + 1;
      m.triangles.col(t++) << v00, v10, v11;
      m.triangles.col(t++) << v00, v11, v01;
    }
  return m;
}

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& ell) {
  if (x.size() != y.size() || x.size() != ell.size())
    throw std::invalid_argument("rbf_kernel dimension mismatch");
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(ell[i] > 0.0)) throw std::invalid_argument("length scale must be positive");
    const double d = x[i] - y[i];
    s += d * d / (2.0 * ell[i] * ell[i]);
  }
  return std::exp(-s);
}

GpPointSampler::GpPointSampler(const PointSet& points, const Eigen::VectorXd& ell) {
  const int n = points.size();
  if (n < 1) throw std::invalid_argument("empty point set");
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double k = rbf_kernel(points.coords.col(i), points.coords.col(j), ell);
      K(i, j) = k;
      K(j, i) = k;
    }
  for (double jitter = 1e-8; jitter <= 1e-4 + 1e-16; jitter *= 10.0) {
    Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) {
      L_ = llt.matrixL();
      jitter_ = jitter;
      return;
    }
  }
  throw std::runtime_error("kernel factorization failed after jitter escalation to 1e-4");
}

GpPointSampler::GpPointSampler(const PointSet& points, double ell)
    : GpPointSampler(points, Eigen::VectorXd::Constant(points.dim(), ell)) {}

Eigen::VectorXd GpPointSampler::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd z(L_.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = gauss(rng);
  return L_ * z;
}

Eigen::MatrixXd GpPointSampler::sample_fields(int n_fields, std::mt19937_64& rng) const {
  Eigen::MatrixXd out(L_.rows(), n_fields);
  for (int j = 0; j < n_fields; ++j) out.col(j) = sample(rng);
  return out;
}

void assemble_laplace_fem(const TriMesh& mesh, Eigen::SparseMatrix<double>& K,
                          Eigen::SparseMatrix<double>& M) {
  mesh.validate();
  const int n = mesh.n_nodes();
  std::vector<Eigen::Triplet<double>> kt, mt;
  kt.reserve(9 * mesh.n_tris());
  mt.reserve(9 * mesh.n_tris());
  for (int t = 0; t < mesh.n_tris(); ++t) {
    const int i0 = mesh.triangles(0, t), i1 = mesh.triangles(1, t), i2 = mesh.triangles(2, t);
    const auto p0 = mesh.nodes.col(i0), p1 = mesh.nodes.col(i1), p2 = mesh.nodes.col(i2);
    const double det = (p1.x() - p0.x()) * (p2.y() - p0.y()) -
                       (p2.x() - p0.x()) * (p1.y() - p0.y());
    const double area = 0.5 * std::abs(det);
    if (!(area > 1e-14))
      throw std::invalid_argument("degenerate triangle " + std::to_string(t));
    // P1 shape function gradients
    const double b[3] = {p1.y() - p2.y(), p2.y() - p0.y(), p0.y() - p1.y()};
    const double c[3] = {p2.x() - p1.x(), p0.x() - p2.x(), p1.x() - p0.x()};
    const int idx[3] = {i0, i1, i2};
    for (int a = 0; a < 3; ++a)
      for (int d = 0; d < 3; ++d) {
        kt.emplace_back(idx[a], idx[d], (b[a] * b[d] + c[a] * c[d]) / (4.0 * area));
        mt.emplace_back(idx[a], idx[d], area / 12.0 * (a == d ? 2.0 : 1.0));
      }
  }
  K.resize(n, n);
  M.resize(n, n);
  K.setFromTriplets(kt.begin(), kt.end());
  M.setFromTriplets(mt.begin(), mt.end());
}

EigenBasis laplace_eigenbasis(const Eigen::SparseMatrix<double>& K,
                              const Eigen::SparseMatrix<double>& M, int n_eig) {
  const int n = static_cast<int>(K.rows());
  if (n_eig < 1 || n_eig > n) throw std::invalid_argument("n_eig out of range");
  Eigen::MatrixXd Kd(K), Md(M);
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(Kd, Md);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("generalized eigensolver failed to converge");
  EigenBasis basis;
  basis.eigenvalues = solver.eigenvalues().head(n_eig);
  basis.eigenvectors = solver.eigenvectors().leftCols(n_eig);
  basis.lumped_mass = Md.rowwise().sum();
  basis.total_area = basis.lumped_mass.sum();
  return basis;
}

EigenBasis laplace_eigenbasis(const TriMesh& mesh, int n_eig) {
  Eigen::SparseMatrix<double> K, M;
  assemble_laplace_fem(mesh, K, M);
  return laplace_eigenbasis(K, M, n_eig);
}

MaternFieldSampler::MaternFieldSampler(const EigenBasis& basis, const MaternConfig& cfg)
    : basis_(basis) {
  if (!(cfg.ell > 0.0)) throw std::invalid_argument("length scale must be positive");
  const double kappa2 = 2.0 * cfg.nu / (cfg.ell * cfg.ell);
  const double expo = -(cfg.nu + cfg.manifold_dim / 2.0);
  const int n_eig = static_cast<int>(basis_.eigenvalues.size());
  Eigen::VectorXd spectral(n_eig);
  for (int i = 0; i < n_eig; ++i)
    spectral[i] = std::pow(kappa2 + std::max(basis_.eigenvalues[i], 0.0), expo);
  // area-weighted mean of the unnormalized k(x,x) sets C_m
  Eigen::VectorXd diag =
      (basis_.eigenvectors.array().square().matrix() * spectral);
  c_m_ = basis_.lumped_mass.dot(diag) / basis_.total_area;
  gamma_ = (spectral / c_m_).array().sqrt();
}

Eigen::VectorXd MaternFieldSampler::kernel_diagonal() const {
  return basis_.eigenvectors.array().square().matrix() * gamma_.array().square().matrix();
}

Eigen::VectorXd MaternFieldSampler::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd c(gamma_.size());
  for (Eigen::Index i = 0; i < c.size(); ++i) c[i] = gauss(rng) * gamma_[i];
  return basis_.eigenvectors * c;
}

Eigen::MatrixXd MaternFieldSampler::sample_fields(int n_fields, std::mt19937_64& rng) const {
  Eigen::MatrixXd out(size(), n_fields);
  for (int j = 0; j < n_fields; ++j) out.col(j) = sample(rng);
  return out;
}

FieldSampler make_sampler(const GpPointSampler& s) {
  return [&s](std::mt19937_64& rng) { return s.sample(rng); };
}
FieldSampler make_sampler(const MaternFieldSampler& s) {
  return [&s](std::mt19937_64& rng) { return s.sample(rng); };
}

ParameterField field_reverse_sde(const diffusion::ScoreFn& score,
                                 const FieldSampler& sampler, int n_points, int dim,
                                 const diffusion::Schedule& sched, std::mt19937_64& rng,
                                 const diffusion::Standardizer* destd) {
  sched.validate();
  Eigen::MatrixXd phi(dim, n_points);
  for (int r = 0; r < dim; ++r) phi.row(r) = sampler(rng).transpose();

  const double dt = sched.dt();
  Eigen::MatrixXd noise(dim, n_points);
  for (int k = 0; k < sched.n_steps; ++k) {
    const double t = sched.T - k * dt;
    const double beta = sched.beta(t);
    for (int r = 0; r < dim; ++r) noise.row(r) = sampler(rng).transpose();
    phi += 0.5 * beta * dt * phi + beta * dt * score(phi, t) + std::sqrt(beta * dt) * noise;
    if (!phi.allFinite())
      throw std::runtime_error("field reverse SDE non-finite at step " + std::to_string(k));
  }
  ParameterField f;
  f.phi = destd ? destd->inverse_cols(phi) : phi;
  return f;
}

Eigen::VectorXd pointwise_stress_field(const ParameterField& field,
                                       const node::ConstitutiveModel& model, double lx,
                                       double ly) {
  node::ConstitutiveModel m = model;
  Eigen::VectorXd sxx(field.phi.cols());
  for (Eigen::Index j = 0; j < field.phi.cols(); ++j) {
    m.set_individual(field.phi.col(j));
    sxx[j] = m.predict_stress_stretches(lx, ly).sxx;
  }
  return sxx;
}

}  // namespace matgen::fields
