#pragma once

#include <Eigen/Dense>

#include "dcmg/netspec.hpp"

namespace dcmg {

struct SectorBound {
  double alpha = 0.0;
  double beta = 0.0;
  double V_min = 0.0;
  double V_max = 0.0;
  double V_r = 0.0;

  double center() const { return 0.5 * (alpha + beta); }
};

struct SectorQuadratic {
  Eigen::MatrixXd Theta;  // 6x6, blocks Theta_11, Theta_12, Theta_21, Theta_22 of size 3x3
  Eigen::Vector3d T = Eigen::Vector3d::UnitX();

  Eigen::Matrix3d block(int r, int c) const { return Theta.block<3, 3>(3 * r, 3 * c); }
};

// alpha = P_L / (C_t V_max^2), beta = P_L / (C_t V_min^2).
SectorBound sector_bounds(const DGParams& dg, const ZipLoad& load, double V_r, double V_min, double V_max);

// g(dV) = (P_L / C_t) (1/V_r - 1/(dV + V_r)); throws std::domain_error at or beyond the pole.
double cpl_nonlinearity(const DGParams& dg, const ZipLoad& load, double V_r, double V_tilde);

SectorQuadratic sector_quadratic(const SectorBound& b);

// [dV; g]^T [-alpha beta, (alpha+beta)/2; (alpha+beta)/2, -1] [dV; g]
double sector_form(const SectorBound& b, double V_tilde, double g);

}  // namespace dcmg
