#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "dcmg/netspec.hpp"

namespace dcmg {

enum class LoadField { kYL, kIbar, kPL };
const char* to_string(LoadField f);

struct LoadEvent {
  double time = 0.0;
  int target = -1;  // DG index, -1 for every DG
  LoadField field = LoadField::kYL;
  double value = 0.0;
  bool nominal = false;  // restore the network-file value
  int line = 0;          // source line of the section header
};

// Zero-mean disturbance on every channel: piecewise-linear interpolation of
// uniform samples on [-amplitude, amplitude] drawn every 1/bandwidth seconds.
struct DisturbanceSpec {
  bool enabled = false;
  double amplitude = 0.0;
  double bandwidth = 20.0;  // Hz
  unsigned seed = 1;
  double t_on = 0.0;
  double t_off = -1.0;  // < 0: until the end of the run
};

struct Scenario {
  double duration = 10.0;
  double dt = 1e-5;
  int decimation = 100;
  std::vector<LoadEvent> events;  // sorted by time, stable
  DisturbanceSpec disturbance;
};

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
// Range and target checks against a network; empty when valid.
std::vector<std::string> validate_scenario(const Scenario& sc, const NetworkSpec& spec);

void apply_event(const NetworkSpec& spec, const LoadEvent& ev, std::vector<ZipLoad>& loads);

// Interval of constant load configuration.
struct LoadWindow {
  double t_begin = 0.0;
  double t_end = 0.0;
  std::vector<ZipLoad> loads;
};

// Consecutive windows covering [0, duration]; events sharing a time open one window.
std::vector<LoadWindow> load_windows(const NetworkSpec& spec, const Scenario& sc);

class DisturbanceSignal {
 public:
  DisturbanceSignal() = default;
  DisturbanceSignal(const DisturbanceSpec& d, int channels, double duration);

  bool active() const { return enabled_; }
  int channels() const { return channels_; }
  Eigen::VectorXd at(double t) const;

 private:
  bool enabled_ = false;
  int channels_ = 0;
  double h_ = 1.0;
  double t_on_ = 0.0;
  double t_off_ = 0.0;
  Eigen::MatrixXd knots_;  // channels x samples
};

}  // namespace dcmg
