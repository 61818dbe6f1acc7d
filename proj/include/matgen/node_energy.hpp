#ifndef MATGEN_NODE_ENERGY_HPP
#define MATGEN_NODE_ENERGY_HPP

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "matgen/engine/adam.hpp"
#include "matgen/engine/net.hpp"
#include "matgen/engine/rk4.hpp"
#include "matgen/mech.hpp"

// Polyconvex strain energies built from monotone scalar neural ODEs. Each
// energy term's derivative function dPsi/dI is the softplus of a scalar NODE
// flow, hence non-negative and non-decreasing for any parameter values.

namespace matgen::node {

enum class ArchKind { Iso2, Aniso5 };

ArchKind arch_from_string(const std::string& s);
std::string to_string(ArchKind k);

struct NodeArch {
  ArchKind kind = ArchKind::Iso2;
  std::vector<int> hidden = {5, 5};  // hidden widths of every RHS network
  // Optional per-NODE override of the last hidden width (controls the size
  // of that NODE's individual-specific final layer).
  std::vector<int> last_hidden;
  int tau_steps = 10;

  int node_count() const { return kind == ArchKind::Iso2 ? 2 : 5; }
  int alpha_count() const { return kind == ArchKind::Iso2 ? 0 : 3; }
  std::vector<int> widths_for(int node_index) const;
  // Dimension P of the individual parameter vector phi.
  int individual_dim() const;
  void validate() const;
};

// Population constitutive model: RHS networks whose final linear layers are
// individual-specific, everything else (plus the mixing weights) shared.
class ConstitutiveModel {
 public:
  ConstitutiveModel() = default;
  ConstitutiveModel(const NodeArch& arch, uint64_t seed);

  const NodeArch& arch() const { return arch_; }
  int individual_dim() const;
  int shared_dim() const;

  Eigen::VectorXd individual() const;            // phi
  void set_individual(const Eigen::VectorXd& phi);
  Eigen::VectorXd shared() const;                // varphi (incl. alpha pre-images)
  void set_shared(const Eigen::VectorXd& s);

  Eigen::Vector3d alphas() const;                // sigmoid(alpha_pre), Aniso5

  mech::EnergyDerivs energy_derivs(const mech::Invariants& inv) const;
  mech::PlaneStress predict_stress_stretches(double lx, double ly) const;
  mech::PlaneStress predict_stress(mech::Protocol kind, double lambda) const;

  // Reverse-mode sensitivities of (w_xx*sxx + w_yy*syy) accumulated into the
  // shared and individual gradient buffers.
  mech::PlaneStress stress_backward(mech::Protocol kind, double lambda, double w_xx,
                                    double w_yy, Eigen::VectorXd& shared_grad,
                                    Eigen::VectorXd& individual_grad) const;

  const std::vector<engine::DenseNet>& nodes() const { return nodes_; }
  std::vector<engine::DenseNet>& nodes() { return nodes_; }
  const Eigen::Vector3d& alpha_pre() const { return alpha_pre_; }
  void set_alpha_pre(const Eigen::Vector3d& a) { alpha_pre_ = a; }

 private:
  NodeArch arch_;
  std::vector<engine::DenseNet> nodes_;
  Eigen::Vector3d alpha_pre_ = Eigen::Vector3d::Zero();
};

// Value of a single monotone non-negative derivative function:
// softplus(rk4 flow of x0 through rhs).
double node_scalar_forward(const engine::DenseNet& rhs, double x0, int tau_steps);
// Raw flow value without the non-negative output map.
double node_scalar_flow(const engine::DenseNet& rhs, double x0, int tau_steps);

struct FitConfig {
  int max_steps = 4000;
  double lr = 1e-3;
  uint64_t seed = 0;
  double init_scale = 1.0;
  bool verbose = false;
};

struct PopulationFit {
  ConstitutiveModel model;               // carries the fitted shared parameters
  std::vector<Eigen::VectorXd> phis;     // fitted phi^i per individual
  std::vector<double> mae;               // final per-individual MAE
  double final_loss = 0.0;
  FitConfig config;
};

// Joint minimization of the mean absolute stress error over all individuals;
// shared parameters common, one phi per individual. Deterministic per seed.
PopulationFit fit_population(const std::vector<std::vector<mech::BiaxialCurve>>& dataset,
                             const NodeArch& arch, const FitConfig& cfg);

// MAE of one individual's curves under the model with phi loaded.
double curves_mae(const ConstitutiveModel& model, const std::vector<mech::BiaxialCurve>& curves);

}  // namespace matgen::node

#endif
