#ifndef MATGEN_FIELDS_HPP
#define MATGEN_FIELDS_HPP

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "matgen/diffusion.hpp"
#include "matgen/node_energy.hpp"

// Spatially correlated standard-normal field samplers (dense RBF GP on point
// sets, Matern 5/2 via Laplace-Beltrami eigenpairs on triangle meshes) and
// the field-valued reverse SDE generating heterogeneous parameter fields.

namespace matgen::fields {

struct PointSet {
  Eigen::MatrixXd coords;  // d x n_points
  int dim() const { return static_cast<int>(coords.rows()); }
  int size() const { return static_cast<int>(coords.cols()); }

  static PointSet grid2d(int nx, int ny, double Lx, double Ly);
};

struct TriMesh {
  Eigen::MatrixXd nodes;      // 2 x n_nodes
  Eigen::MatrixXi triangles;  // 3 x n_tris (0-based)

  int n_nodes() const { return static_cast<int>(nodes.cols()); }
  int n_tris() const { return static_cast<int>(triangles.cols()); }
  double area() const;
  void validate() const;

  static TriMesh unit_square(int n);  // n x n vertices per side
};

double rbf_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& ell);

// Zero-mean unit-variance GP sampler backed by a Cholesky factor of the RBF
// kernel matrix (jitter ladder 1e-8 .. 1e-4).
class GpPointSampler {
 public:
  GpPointSampler(const PointSet& points, const Eigen::VectorXd& ell);
  GpPointSampler(const PointSet& points, double ell);

  int size() const { return static_cast<int>(L_.rows()); }
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  Eigen::MatrixXd sample_fields(int n_fields, std::mt19937_64& rng) const;
  const Eigen::MatrixXd& factor() const { return L_; }
  double jitter() const { return jitter_; }

 private:
  Eigen::MatrixXd L_;
  double jitter_ = 0.0;
};

// P1 stiffness and consistent mass matrices of the Laplace operator.
void assemble_laplace_fem(const TriMesh& mesh, Eigen::SparseMatrix<double>& K,
                          Eigen::SparseMatrix<double>& M);

struct EigenBasis {
  Eigen::VectorXd eigenvalues;   // ascending
  Eigen::MatrixXd eigenvectors;  // n_nodes x n_eig, M-orthonormal
  Eigen::VectorXd lumped_mass;   // row sums of M (area weights)
  double total_area = 0.0;
};

EigenBasis laplace_eigenbasis(const Eigen::SparseMatrix<double>& K,
                              const Eigen::SparseMatrix<double>& M, int n_eig);
EigenBasis laplace_eigenbasis(const TriMesh& mesh, int n_eig);

struct MaternConfig {
  double nu = 2.5;
  double ell = 0.2;   // length scale
  int manifold_dim = 2;
};

// Matern field sampler on a mesh: spectral coefficients of the
// Laplace-Beltrami basis, normalized so the area-weighted mean of k(x,x)
// equals one.
class MaternFieldSampler {
 public:
  MaternFieldSampler(const EigenBasis& basis, const MaternConfig& cfg);

  int size() const { return static_cast<int>(basis_.eigenvectors.rows()); }
  double normalization() const { return c_m_; }
  // k(x,x) at every node (diagnostic for the normalization condition).
  Eigen::VectorXd kernel_diagonal() const;
  Eigen::VectorXd sample(std::mt19937_64& rng) const;
  Eigen::MatrixXd sample_fields(int n_fields, std::mt19937_64& rng) const;

 private:
  EigenBasis basis_;
  Eigen::VectorXd gamma_;  // per-mode amplitudes
  double c_m_ = 1.0;
};

// Any zero-mean unit-variance correlated field sampler.
using FieldSampler = std::function<Eigen::VectorXd(std::mt19937_64&)>;

FieldSampler make_sampler(const GpPointSampler& s);
FieldSampler make_sampler(const MaternFieldSampler& s);

struct ParameterField {
  Eigen::MatrixXd phi;  // P x n_points, raw (destandardized) parameters
  uint64_t seed = 0;
  double ell = 0.0;
};

// Reverse diffusion where every parameter component evolves as a spatially
// correlated field; noise fields are fresh per component and per step.
ParameterField field_reverse_sde(const diffusion::ScoreFn& score,
                                 const FieldSampler& sampler, int n_points, int dim,
                                 const diffusion::Schedule& sched, std::mt19937_64& rng,
                                 const diffusion::Standardizer* destd = nullptr);

// sigma_xx at every point of the field under uniform stretches (lx, ly).
Eigen::VectorXd pointwise_stress_field(const ParameterField& field,
                                       const node::ConstitutiveModel& model, double lx,
                                       double ly);

}  // namespace matgen::fields

#endif
