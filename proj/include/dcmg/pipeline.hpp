#pragma once

#include <string>
#include <vector>

#include "dcmg/bundle.hpp"
#include "dcmg/scenario.hpp"
#include "dcmg/simulator.hpp"

namespace dcmg {

enum class Stage { kNone, kInput, kReference, kLocal, kGlobal };
const char* to_string(Stage s);

struct DesignConfig {
  double V_ref = 48.0;  // desired reference, clamped to the network's voltage bounds
  DesignParams local;
  GlobalParams global;
};

struct DesignOutcome {
  Stage failed = Stage::kNone;
  SdpStatus status = SdpStatus::kOptimal;  // status of the failing stage
  std::string message;
  DesignBundle bundle;

  bool ok() const { return failed == Stage::kNone; }
};

// Reference selection, local synthesis, global co-design.
DesignOutcome run_design(const NetworkSpec& spec, const DesignConfig& cfg);

// The five design artifacts: equilibrium.csv, local_design.csv, topology.csv, gamma.txt, design.json.
std::vector<std::string> write_design_artifacts(const std::string& dir, const DesignBundle& b);

struct VerifyCheck {
  std::string name;
  bool passed = false;
  double residual = 0.0;  // signed margin or error, see detail
  std::string detail;
};

struct VerifyOptions {
  int sector_samples = 10000;
  unsigned seed = 1;
  double tol_psd = 1e-7;
  double tol_recovery = 1e-8;
  double tol_laplacian = 1e-8;
  double tol_audit = 1e-6;
};

// Independent re-checks of a bundle. Check names: certificate, sector, line_certificate,
// gain_recovery, laplacian, topology, w_matrix, gamma, slack.
std::vector<VerifyCheck> verify_bundle(const DesignBundle& b, const VerifyOptions& opt = {});
const VerifyCheck* find_check(const std::vector<VerifyCheck>& checks, const std::string& name);

struct ScenarioRun {
  SimTrace trace;
  std::vector<LoadWindow> windows;
  std::vector<WindowMetrics> metrics;
};

ScenarioRun run_scenario(const NetworkSpec& spec, const ControlDesign& d, const Scenario& sc);
ScenarioRun run_scenario(const NetworkSpec& spec, const DroopConfig& d, const Scenario& sc);

struct SummaryLine {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Per-window checks of a dissipative run: steady-state band, settling and sharing.
std::vector<SummaryLine> scenario_summary(const ScenarioRun& run, double I_s, double band = 0.5,
                                          double settle_limit = 0.5, double dispersion_frac = 0.02);

}  // namespace dcmg
