#pragma once

#include <stdexcept>
#include <string>

#include "dcmg/equilibrium.hpp"
#include "dcmg/global_codesign.hpp"
#include "dcmg/local_synth.hpp"
#include "dcmg/netspec.hpp"
#include "dcmg/simulator.hpp"

namespace dcmg {

// Everything cmd_design produces, self-contained (the network travels as its text form).
struct DesignBundle {
  NetworkSpec spec;
  ReferenceSelection sel;
  Eigen::VectorXd u_S;
  DesignParams local_params;
  LocalDesign local;
  GlobalParams global_params;
  GlobalDesign global;
};

class BundleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// JSON document; every double is written with enough digits to round-trip exactly.
std::string bundle_to_json(const DesignBundle& b);
DesignBundle bundle_from_json(const std::string& text);
void save_bundle(const std::string& path, const DesignBundle& b);
DesignBundle load_bundle(const std::string& path);

ControlDesign control_of(const DesignBundle& b);

}  // namespace dcmg
