#pragma once

#include <Eigen/Dense>
#include <random>
#include <string>

#include "dcmg/pipeline.hpp"

namespace dcmg::testing {

inline std::string data_path(const std::string& name) { return std::string(DCMG_DATA_DIR) + "/" + name; }

inline const NetworkSpec& default_network() {
  static const NetworkSpec spec = load_network(data_path("network_4dg.ini"));
  return spec;
}

inline const Scenario& default_scenario() {
  static const Scenario sc = load_scenario(data_path("scenario_loadsteps.ini"));
  return sc;
}

// The first n DGs of the bundled network and the lines among them.
inline NetworkSpec sub_network(int n) {
  const NetworkSpec& full = default_network();
  NetworkSpec s = full;
  s.dgs.resize(n);
  s.loads.resize(n);
  s.lines.clear();
  for (const auto& l : full.lines) {
    if (l.from_dg < n && l.to_dg < n) {
      s.lines.push_back(l);
      s.lines.back().id = static_cast<int>(s.lines.size()) - 1;
    }
  }
  s.incidence = incidence_of(s);
  return s;
}

// Full default design (hard mode, dense slack), computed once per process.
inline const DesignBundle& default_bundle() {
  static const DesignBundle b = [] {
    DesignOutcome r = run_design(default_network(), DesignConfig{});
    if (!r.ok()) throw std::runtime_error("default design failed: " + r.message);
    return r.bundle;
  }();
  return b;
}

inline Eigen::MatrixXd random_spd(std::mt19937& rng, int n, double floor = 0.1) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  return A * A.transpose() + floor * Eigen::MatrixXd::Identity(n, n);
}

inline Eigen::MatrixXd random_matrix(std::mt19937& rng, int r, int c) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd A(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) A(i, j) = g(rng);
  return A;
}

}  // namespace dcmg::testing
