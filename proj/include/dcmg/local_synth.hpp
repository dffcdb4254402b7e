#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "dcmg/equilibrium.hpp"
#include "dcmg/lmi.hpp"
#include "dcmg/netspec.hpp"
#include "dcmg/sector.hpp"

namespace dcmg {

struct DesignParams {
  double p = 0.1;            // DG multiplier p_i in the necessary conditions
  double p_bar = 0.01;       // line multiplier
  double gamma_bar = 10.0;   // bound on the local gamma~_i
  double alpha_lambda = 1.0;
  double alpha_gamma = 1.0;
  double eps = 1e-6;         // margin for strict inequalities
  double pi_min = 1e-2;      // P~ >= pi_min I
  double kappa = 100.0;      // ||K0|| <= kappa
  bool strict_structure = false;
  SdpSettings sdp;
};

struct DgMatrices {
  Eigen::Matrix3d A;
  Eigen::Vector3d B;
  Eigen::Matrix3d E;
};

// Error-state matrices of one DG: x = [V, I_t, v].
DgMatrices dg_matrices(const DGParams& dg, const ZipLoad& load);

struct NecessaryPair {
  int dg = 0;
  int line = 0;
  double xi = 0.0;
  double s1 = 0.0;
  double s2 = 0.0;
};

struct LocalDesign {
  SdpStatus status = SdpStatus::kNumericalFailure;
  std::string message;
  double objective = 0.0;
  std::vector<Eigen::RowVector3d> K0;
  std::vector<Eigen::RowVector3d> K_tilde;
  std::vector<Eigen::Matrix3d> P_tilde;
  std::vector<Eigen::Matrix3d> R_tilde;  // R^ = P~ R P~
  std::vector<PassivityCertificate> dg_certs;
  std::vector<PassivityCertificate> line_certs;
  std::vector<double> gamma_tilde;
  std::vector<double> lambda_tilde;
  std::vector<double> rho_tilde;
  std::vector<NecessaryPair> pairs;

  bool ok() const { return status == SdpStatus::kOptimal || status == SdpStatus::kFeasible; }
};

struct LocalProblem {
  LmiProblem problem;
  std::vector<MatrixVar> K, P, R;
  std::vector<int> lambda, nu, rho_t, gamma;
  std::vector<int> P_bar, nu_bar, rho_bar;
  std::vector<NecessaryPair> pairs;  // dg/line only
  std::vector<int> xi, s1, s2;
};

// Maximizes rho_bar + w nu_bar (w = 10 (1 + R^2)) over the line dissipativity LMI.
PassivityCertificate line_passivity(const LineParams& line, const SdpSettings& settings = {});

// Feasibility witness for a requested output index.
std::optional<PassivityCertificate> line_passivity_at(const LineParams& line, double rho_bar,
                                                      const SdpSettings& settings = {});

// 2x2 line dissipativity matrix [[2 P R/L - rho, -P/L + 1/2], [*, -nu]].
Eigen::Matrix2d line_dissipativity_matrix(const LineParams& line, double P_bar, double nu_bar, double rho_bar);

// Transformed necessary condition for DG i and incident line l (b_il = incidence entry).
Eigen::MatrixXd necessary_condition_matrix(double p, double p_bar, double nu, double rho_tilde, double nu_bar,
                                           double rho_bar, double xi, double gamma_tilde, double C_t, double b_il);

LocalProblem assemble_local_problem(const NetworkSpec& spec, const ReferenceSelection& sel,
                                    const std::vector<SectorBound>& sectors, const DesignParams& params);

LocalDesign solve_local(const LocalProblem& lp, const NetworkSpec& spec, const ReferenceSelection& sel,
                        const std::vector<SectorBound>& sectors, const DesignParams& params);

// Sector bounds for every DG at the selected reference.
std::vector<SectorBound> network_sectors(const NetworkSpec& spec, const ReferenceSelection& sel);

// Assemble, solve, and on infeasibility name the first failing necessary-condition block.
LocalDesign design_local(const NetworkSpec& spec, const ReferenceSelection& sel, const DesignParams& params);

struct CertificateCheck {
  bool dissipative = false;
  double min_eig = 0.0;  // worst over the sector slopes tried
};

// Searches for a storage matrix certifying IF-OFP(nu, rho) of the closed-loop DG
// linearized with CPL slope s, for s in {alpha, slope at V_r, beta}.
CertificateCheck confirm_dg_certificate(const DGParams& dg, const ZipLoad& load, const SectorBound& sector,
                                        const Eigen::RowVector3d& K0, double nu, double rho,
                                        const SdpSettings& settings = {});

// Samples (x~, u~) with V~ in the sector range and returns the largest
// (dV/dt - s(u~, x~)) / (1 + |x~|^2 + |u~|^2) along the nonlinear error dynamics.
double verify_dissipation_bound(const DGParams& dg, const ZipLoad& load, const SectorBound& sector,
                                const Eigen::RowVector3d& K0, const PassivityCertificate& cert, int samples,
                                unsigned seed = 1);

}  // namespace dcmg
