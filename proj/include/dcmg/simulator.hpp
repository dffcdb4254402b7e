#pragma once

#include <Eigen/Dense>
#include <functional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcmg/lmi.hpp"
#include "dcmg/netspec.hpp"
#include "dcmg/scenario.hpp"
#include "dcmg/sector.hpp"

namespace dcmg {

// Flat state x = [V (N); I_t (N); v (N); I_l (L)]. Disturbances use the same layout
// (w_v, w_c, integrator channel, line channel).
struct StateLayout {
  int N = 0;
  int L = 0;
  explicit StateLayout(const NetworkSpec& spec) : N(spec.num_dgs()), L(spec.num_lines()) {}
  int dim() const { return 3 * N + L; }
  int V(int i) const { return i; }
  int It(int i) const { return N + i; }
  int v(int i) const { return 2 * N + i; }
  int Il(int l) const { return 3 * N + l; }
};

struct SimState {
  double t = 0.0;
  Eigen::VectorXd x;
};

// Distributed controller: u = u_S + K0 (x - [V_r, P_n I_s, 0]) + L_t o (K_I I_t).
struct ControlDesign {
  Eigen::VectorXd V_r;
  Eigen::VectorXd u_S;
  double I_s = 0.0;
  std::vector<Eigen::RowVector3d> K0;
  Eigen::MatrixXd K_I;
};

// Primary droop u = V_r - m I_t, optionally with secondary restoration -k_sec v.
struct DroopConfig {
  Eigen::VectorXd V_r;
  Eigen::VectorXd m;
  bool secondary = false;
  double k_sec = 1.0;
};
// m_i = 0.05 V_r / I_rated with I_rated = P_n / V_r.
DroopConfig default_droop(const NetworkSpec& spec, const Eigen::VectorXd& V_r);

class SimulationError : public std::runtime_error {
 public:
  SimulationError(double t, const std::string& what)
      : std::runtime_error("t = " + format_double(t) + " s: " + what), t_(t) {}
  double time() const { return t_; }

 private:
  double t_;
};

struct ControlLaw {
  Eigen::VectorXd V_r;
  std::function<Eigen::VectorXd(const Eigen::VectorXd& x)> u;
};
ControlLaw make_law(const NetworkSpec& spec, const ControlDesign& d);
ControlLaw make_law(const NetworkSpec& spec, const DroopConfig& d);

Eigen::VectorXd dissipative_control(const NetworkSpec& spec, const ControlDesign& d, const Eigen::VectorXd& x);
Eigen::VectorXd droop_control(const NetworkSpec& spec, const DroopConfig& d, const Eigen::VectorXd& x);

// Vector field for a given input u and disturbance w (empty w means zero); the integrators
// accumulate V - V_r. Throws std::domain_error when some V <= V_guard.
Eigen::VectorXd plant_rhs(const NetworkSpec& spec, const std::vector<ZipLoad>& loads, const Eigen::VectorXd& V_r,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& w = {},
                          double V_guard = 1.0);

Eigen::VectorXd rhs(const NetworkSpec& spec, const std::vector<ZipLoad>& loads, const ControlDesign& d,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& w = {});

// Closed-loop equilibrium for a load configuration: V = V_r, integrators such that u = u_E.
Eigen::VectorXd closed_loop_equilibrium(const NetworkSpec& spec, const std::vector<ZipLoad>& loads,
                                        const ControlDesign& d);
// Droop equilibrium; without restoration V solves (I + D G) V = V_r - D (I_bar + P / V), D = diag(m + R_t).
Eigen::VectorXd droop_equilibrium(const NetworkSpec& spec, const std::vector<ZipLoad>& loads, const DroopConfig& d);

struct SimOptions {
  double V_guard = 1.0;
};

struct SimTrace {
  int N = 0;
  int L = 0;
  double dt = 0.0;
  int decimation = 1;
  std::vector<double> t;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<double> event_times;  // distinct times at which loads changed

  size_t size() const { return t.size(); }
};

// Fixed-step RK4; events act between steps at the step index nearest to their time.
SimTrace integrate(const NetworkSpec& spec, const ControlLaw& law, const Scenario& sc, const Eigen::VectorXd& x0,
                   const SimOptions& opt = {});
SimTrace integrate(const NetworkSpec& spec, const ControlDesign& d, const Scenario& sc, const Eigen::VectorXd& x0,
                   const SimOptions& opt = {});
SimTrace run_droop(const NetworkSpec& spec, const DroopConfig& d, const Scenario& sc, const Eigen::VectorXd& x0,
                   const SimOptions& opt = {});

// Equilibrium of the first load window for the given controller.
Eigen::VectorXd scenario_start(const NetworkSpec& spec, const Scenario& sc, const ControlDesign& d);
Eigen::VectorXd scenario_start(const NetworkSpec& spec, const Scenario& sc, const DroopConfig& d);

struct WindowMetrics {
  double t_begin = 0.0;
  double t_end = 0.0;
  double max_dev = 0.0;       // max_i,t |V_i - V_ri|
  double settle_time = 0.0;   // time after t_begin until |V - V_r| stays within 1 % of V_r
  bool settled = true;
  double tail_dev = 0.0;      // max |V - V_r| over the final 20 % of the window
  double dispersion = 0.0;    // max |I_ti/P_ni - I_tj/P_nj| over the final 20 %
  double mean_share = 0.0;    // mean I_t/P_n over the final 20 %
  double drift_rms = 0.0;     // RMS of dv/dt = V - V_r over the final 20 %
  double oscillation = 0.0;   // see oscillation_amplitude
};

// After the first extremum of V_i - V_i,final, the largest excursion to the other side of
// V_i,final (mean over the last 10 % of the window); maximum over DGs.
double oscillation_amplitude(const SimTrace& tr, double t_begin, double t_end);

std::vector<WindowMetrics> metrics(const NetworkSpec& spec, const SimTrace& tr, const Eigen::VectorXd& V_r,
                                   const std::vector<LoadWindow>& windows);

void write_trace_csv(std::ostream& os, const SimTrace& tr);
void write_metrics_csv(std::ostream& os, const std::vector<WindowMetrics>& m);

struct GainEnsemble {
  int members = 20;
  unsigned seed = 1;
  double amplitude = 0.5;
  double bandwidth = 20.0;
  double active = 3.0;    // disturbance on [0, active]
  double duration = 8.0;  // tail lets the response decay
  double dt = 1e-4;
};

struct GainResult {
  double max_ratio = 0.0;
  std::vector<double> ratios;
};

// sqrt(int |x - x_E|^2 dt / int |w|^2 dt) per member, started at the design equilibrium.
GainResult empirical_l2_gain(const NetworkSpec& spec, const ControlDesign& d, const GainEnsemble& ens);

struct AuditInputs {
  std::vector<Eigen::RowVector3d> K0;              // gains the certificates were issued for
  std::vector<PassivityCertificate> dg, line;
  std::vector<SectorBound> sectors;
};

struct AuditResult {
  double max_excess = 0.0;  // max (dV/dt - s) / (1 + |x~|^2 + |u~|^2) over samples and units
  int violations = 0;       // samples above tol
  int worst_unit = -1;      // DG index, or N + line index
  double worst_time = 0.0;
  int samples = 0;
};

// Storage derivative 2 x~' P dx/dt against the IF-OFP supply along a trace, with x~ relative to
// the equilibrium of the active window and u~ the part of dx/dt not explained by the local
// closed loop A_cl x~ + g(V~) e1.
AuditResult dissipation_audit(const NetworkSpec& spec, const Scenario& sc, const ControlLaw& law,
                              const SimTrace& tr, const std::vector<Eigen::VectorXd>& window_eq,
                              const AuditInputs& certs, double tol = 1e-6);

// Sum_i p_i x~_i' P_i x~_i + Sum_l pbar_l Pbar_l I~_l^2 at every trace sample.
std::vector<double> network_storage(const SimTrace& tr, const Eigen::VectorXd& x_eq, const AuditInputs& certs,
                                    const Eigen::VectorXd& p, const Eigen::VectorXd& p_bar);

}  // namespace dcmg
