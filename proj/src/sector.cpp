#include "dcmg/sector.hpp"

#include <stdexcept>

namespace dcmg {

SectorBound sector_bounds(const DGParams& dg, const ZipLoad& load, double V_r, double V_min, double V_max) {
  if (!(0 < V_min && V_min <= V_r && V_r <= V_max)) {
    throw std::invalid_argument("sector_bounds: need 0 < V_min <= V_r <= V_max");
  }
  SectorBound b;
  b.alpha = load.P_L / (dg.C_t * V_max * V_max);
  b.beta = load.P_L / (dg.C_t * V_min * V_min);
  b.V_min = V_min;
  b.V_max = V_max;
  b.V_r = V_r;
  return b;
}

double cpl_nonlinearity(const DGParams& dg, const ZipLoad& load, double V_r, double V_tilde) {
  const double V = V_tilde + V_r;
  if (V <= 0) throw std::domain_error("cpl_nonlinearity: voltage at or below the constant-power pole");
  return load.P_L / dg.C_t * (1.0 / V_r - 1.0 / V);
}

SectorQuadratic sector_quadratic(const SectorBound& b) {
  SectorQuadratic q;
  const Eigen::Matrix3d TT = q.T * q.T.transpose();
  q.Theta = Eigen::MatrixXd::Zero(6, 6);
  q.Theta.block<3, 3>(0, 0) = -b.alpha * b.beta * TT;
  q.Theta.block<3, 3>(0, 3) = b.center() * TT;
  q.Theta.block<3, 3>(3, 0) = b.center() * TT;
  q.Theta.block<3, 3>(3, 3) = -TT;
  return q;
}

double sector_form(const SectorBound& b, double V_tilde, double g) {
  return -b.alpha * b.beta * V_tilde * V_tilde + 2.0 * b.center() * V_tilde * g - g * g;
}

}  // namespace dcmg
