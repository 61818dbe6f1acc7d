#include "matgen/mech.hpp"

#include <cmath>

namespace matgen::mech {

Protocol protocol_from_string(const std::string& s) {
  if (s == "offx" || s == "off-x" || s == "OffX") return Protocol::OffX;
  if (s == "offy" || s == "off-y" || s == "OffY") return Protocol::OffY;
  if (s == "equibiaxial" || s == "equi" || s == "Equibiaxial") return Protocol::Equibiaxial;
  throw std::invalid_argument("unknown protocol: " + s);
}

std::string to_string(Protocol p) {
  switch (p) {
    case Protocol::OffX: return "offx";
    case Protocol::OffY: return "offy";
    case Protocol::Equibiaxial: return "equibiaxial";
  }
  throw std::logic_error("bad protocol enum");
}

void LoadingProtocol::validate() const {
  if (stretch_grid.empty()) throw std::invalid_argument("empty stretch grid");
  double prev = 0.0;
  for (double l : stretch_grid) {
    if (!(l > 0.0)) throw std::domain_error("stretch must be positive");
    if (!(l > prev)) throw std::invalid_argument("stretch grid must be strictly increasing");
    prev = l;
  }
}

void MayNewmanParams::validate() const {
  if (!(mu > 0.0) || !(k1 > 0.0) || !(k2 > 0.0))
    throw std::domain_error("May-Newman parameters must be strictly positive");
}

std::array<double, 3> protocol_stretches(Protocol kind, double lambda) {
  if (!(lambda > 0.0)) throw std::domain_error("stretch must be positive");
  double lx = 0.0, ly = 0.0;
  switch (kind) {
    case Protocol::OffX:
      lx = std::sqrt(lambda);
      ly = lambda;
      break;
    case Protocol::OffY:
      lx = lambda;
      ly = std::sqrt(lambda);
      break;
    case Protocol::Equibiaxial:
      lx = lambda;
      ly = lambda;
      break;
  }
  return {lx, ly, 1.0 / (lx * ly)};
}

Invariants invariants_from_stretches(double lx, double ly, double lz) {
  if (!(lx > 0.0) || !(ly > 0.0) || !(lz > 0.0))
    throw std::domain_error("stretches must be positive");
  const double x = lx * lx, y = ly * ly, z = lz * lz;
  Invariants inv;
  inv.I1 = x + y + z;
  inv.I2 = x * y + y * z + z * x;
  inv.I4v = x;   // fiber direction v along specimen x-axis
  inv.I4w = y;   // fiber direction w along specimen y-axis
  inv.J = lx * ly * lz;
  return inv;
}

PlaneStress cauchy_stress_plane_stress(const EnergyDerivs& d, double lx, double ly) {
  if (!(lx > 0.0) || !(ly > 0.0)) throw std::domain_error("stretches must be positive");
  const double lz = 1.0 / (lx * ly);
  const double x = lx * lx, y = ly * ly, z = lz * lz;
  const double I1 = x + y + z;
  PlaneStress s;
  s.sxx = 2.0 * d.psi1 * (x - z) + 2.0 * d.psi2 * (I1 * (x - z) - (x * x - z * z)) +
          2.0 * d.psi4v * x;
  s.syy = 2.0 * d.psi1 * (y - z) + 2.0 * d.psi2 * (I1 * (y - z) - (y * y - z * z)) +
          2.0 * d.psi4w * y;
  return s;
}

EnergyDerivs may_newman_derivs(const MayNewmanParams& p, const Invariants& inv) {
  const double arg = p.k2 * (inv.I1 - 3.0);
  if (arg > 700.0) throw std::runtime_error("May-Newman exponent saturated (k2*(I1-3) > 700)");
  EnergyDerivs d;
  d.psi1 = p.k1 * std::exp(arg) + p.mu;
  return d;
}

PlaneStress may_newman_stress(const MayNewmanParams& p, Protocol kind, double lambda) {
  p.validate();
  const auto [lx, ly, lz] = protocol_stretches(kind, lambda);
  const auto inv = invariants_from_stretches(lx, ly, lz);
  return cauchy_stress_plane_stress(may_newman_derivs(p, inv), lx, ly);
}

BiaxialCurve may_newman_curve(const MayNewmanParams& p, const LoadingProtocol& protocol) {
  protocol.validate();
  BiaxialCurve c;
  c.protocol = protocol;
  c.sigma_xx.reserve(protocol.stretch_grid.size());
  c.sigma_yy.reserve(protocol.stretch_grid.size());
  for (double l : protocol.stretch_grid) {
    const auto s = may_newman_stress(p, protocol.kind, l);
    c.sigma_xx.push_back(s.sxx);
    c.sigma_yy.push_back(s.syy);
  }
  return c;
}

}  // namespace matgen::mech
