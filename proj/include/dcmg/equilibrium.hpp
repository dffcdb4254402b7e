#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcmg/netspec.hpp"

namespace dcmg {

struct EquilibriumPoint {
  Eigen::VectorXd V_E;      // DG voltages
  Eigen::VectorXd I_tE;     // converter currents
  Eigen::VectorXd I_bar_E;  // line currents
  Eigen::VectorXd u_E;      // converter inputs
  Eigen::VectorXd v_E;      // integrator states (fixed to 0)
  double I_s = 0.0;         // common I_t/P_n ratio
};

struct ReferenceSelection {
  Eigen::VectorXd V_r;
  double I_s = 0.0;
  double objective = 0.0;
  bool feasible = false;
  int iterations = 0;
  std::string message;
};

struct SelectionWeights {
  double alpha_V = 1.0;
  double alpha_I = 1.0;
  double tol = 1e-9;
  int max_iter = 50;
};

class EquilibriumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// B R^-1 B^T + diag(Y_L) for the given load set.
Eigen::MatrixXd network_conductance(const NetworkSpec& spec, const std::vector<ZipLoad>& loads);

// Closed-form equilibrium for a fixed reference; I_s is recorded as given.
EquilibriumPoint equilibrium_from_reference(const NetworkSpec& spec, const Eigen::VectorXd& V_r, double I_s);
EquilibriumPoint equilibrium_from_reference(const NetworkSpec& spec, const std::vector<ZipLoad>& loads,
                                            const Eigen::VectorXd& V_r, double I_s);

// Per-row residuals of the steady-state equations, stacked as
// [voltage rows (N); current rows (N); integrator rows (N); line rows (L)].
Eigen::VectorXd equilibrium_residual(const NetworkSpec& spec, const std::vector<ZipLoad>& loads,
                                     const Eigen::VectorXd& V_r, const EquilibriumPoint& eq);

// min alpha_V ||V_r - V_bar||^2 + alpha_I I_s subject to the sharing equality, the voltage
// box and 0 <= I_s <= 1. The constant-power term is frozen and iterated to a fixed point.
ReferenceSelection select_reference(const NetworkSpec& spec, const Eigen::VectorXd& V_bar,
                                    const SelectionWeights& w = {});

Eigen::VectorXd steady_state_inputs(const NetworkSpec& spec, const ReferenceSelection& sel);

}  // namespace dcmg
