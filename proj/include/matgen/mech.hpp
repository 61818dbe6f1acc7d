#ifndef MATGEN_MECH_HPP
#define MATGEN_MECH_HPP

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

// Deformation kinematics for incompressible biaxial loading, plane-stress
// evaluation and the exponential reference model used for synthetic data.

namespace matgen::mech {

enum class Protocol { OffX, OffY, Equibiaxial };

Protocol protocol_from_string(const std::string& s);
std::string to_string(Protocol p);

struct LoadingProtocol {
  Protocol kind = Protocol::Equibiaxial;
  std::vector<double> stretch_grid;  // strictly increasing, all > 0

  void validate() const;
};

struct Invariants {
  double I1 = 3.0;
  double I2 = 3.0;
  double I4v = 1.0;
  double I4w = 1.0;
  double J = 1.0;
};

struct BiaxialCurve {
  LoadingProtocol protocol;
  std::vector<double> sigma_xx;
  std::vector<double> sigma_yy;
};

struct MayNewmanParams {
  double mu = 0.0;
  double k1 = 0.0;
  double k2 = 0.0;

  void validate() const;
};

// First derivatives of the strain energy w.r.t. (I1, I2, I4v, I4w).
struct EnergyDerivs {
  double psi1 = 0.0;
  double psi2 = 0.0;
  double psi4v = 0.0;
  double psi4w = 0.0;
};

struct PlaneStress {
  double sxx = 0.0;
  double syy = 0.0;
};

// In-plane principal stretches (lx, ly, lz) for a protocol at stretch level
// lambda, with lz = 1/(lx*ly) from incompressibility.
std::array<double, 3> protocol_stretches(Protocol kind, double lambda);

Invariants invariants_from_stretches(double lx, double ly, double lz);

// Incompressible plane stress: pressure eliminated with szz = 0.
PlaneStress cauchy_stress_plane_stress(const EnergyDerivs& d, double lx, double ly);

// Derivative set of the May-Newman energy: psi1 = k1*exp(k2*(I1-3)) + mu.
EnergyDerivs may_newman_derivs(const MayNewmanParams& p, const Invariants& inv);

PlaneStress may_newman_stress(const MayNewmanParams& p, Protocol kind, double lambda);

BiaxialCurve may_newman_curve(const MayNewmanParams& p, const LoadingProtocol& protocol);

}  // namespace matgen::mech

#endif
