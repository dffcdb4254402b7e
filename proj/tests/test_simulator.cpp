#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

using namespace dcmg;
using dcmg::testing::default_bundle;
using dcmg::testing::default_network;
using dcmg::testing::default_scenario;

namespace {

Scenario quiet(double duration, double dt, int decimation = 1) {
  Scenario sc;
  sc.duration = duration;
  sc.dt = dt;
  sc.decimation = decimation;
  return sc;
}

// Hand-built trace of a single DG whose voltage follows the given samples.
SimTrace synthetic(const std::vector<double>& V, double dt) {
  SimTrace tr;
  tr.N = 1;
  tr.L = 0;
  tr.dt = dt;
  tr.decimation = 1;
  for (size_t k = 0; k < V.size(); ++k) {
    tr.t.push_back(static_cast<double>(k) * dt);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(3);
    x(0) = V[k];
    tr.x.push_back(x);
    tr.u.push_back(Eigen::VectorXd::Zero(1));
  }
  return tr;
}

}  // namespace

TEST_CASE("scenario file parses into sorted events and windows") {
  const Scenario& sc = default_scenario();
  CHECK(sc.duration == 10.0);
  CHECK(sc.dt == 1e-5);
  REQUIRE(sc.events.size() == 6);
  CHECK(sc.events[0].target == -1);
  CHECK(sc.events[2].nominal);
  CHECK(validate_scenario(sc, default_network()).empty());
  const auto w = load_windows(default_network(), sc);
  REQUIRE(w.size() == 5);
  const double edges[] = {0, 1, 3, 5, 8, 10};
  for (size_t k = 0; k < w.size(); ++k) {
    CHECK(w[k].t_begin == edges[k]);
    CHECK(w[k].t_end == edges[k + 1]);
  }
  CHECK(w[0].loads[0].P_L == 0.0);
  CHECK(w[0].loads[0].I_bar == 0.0);
  CHECK(w[1].loads[0].I_bar == default_network().loads[0].I_bar);
  CHECK(w[2].loads[3].Y_L == 0.0);
  CHECK(w[4].loads[2].P_L == default_network().loads[2].P_L);
}

TEST_CASE("scenario syntax and range errors") {
  CHECK_THROWS_AS(parse_scenario("[event 1]\ntime = 1\ntarget = 1\nfield = y_l\nvalue = 0\n"), ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nduration = 1\n[event 1]\ntime = 0.5\ntarget = 1\nfield = q\nvalue = 0\n"),
                  ParseError);
  CHECK_THROWS_AS(parse_scenario("[scenario]\nduration = 1\n[event 1]\ntime = 0.5\ntarget = 0\nfield = y_l\nvalue = 0\n"),
                  ParseError);
  Scenario sc = parse_scenario("[scenario]\nduration = 1\n[event 1]\ntime = 2\ntarget = 9\nfield = y_l\nvalue = -1\n");
  CHECK(validate_scenario(sc, default_network()).size() == 3);
}

TEST_CASE("events targeting one DG leave the others untouched") {
  const NetworkSpec& s = default_network();
  std::vector<ZipLoad> loads = s.loads;
  LoadEvent ev;
  ev.target = 2;
  ev.field = LoadField::kPL;
  ev.value = 7.0;
  apply_event(s, ev, loads);
  CHECK(loads[2].P_L == 7.0);
  CHECK(loads[1].P_L == s.loads[1].P_L);
  ev.nominal = true;
  apply_event(s, ev, loads);
  CHECK(loads[2].P_L == s.loads[2].P_L);
}

TEST_CASE("disturbance signal is seeded, bounded and gated") {
  DisturbanceSpec d;
  d.enabled = true;
  d.amplitude = 0.3;
  d.bandwidth = 10.0;
  d.seed = 5;
  d.t_on = 1.0;
  d.t_off = 2.0;
  DisturbanceSignal a(d, 4, 5.0), b(d, 4, 5.0);
  CHECK(a.at(0.5).isZero());
  CHECK(a.at(2.5).isZero());
  for (double t = 1.0; t <= 2.0; t += 0.013) {
    CHECK(a.at(t) == b.at(t));
    CHECK(a.at(t).cwiseAbs().maxCoeff() <= 0.3);
  }
  // Linear between knots.
  const Eigen::VectorXd mid = 0.5 * (a.at(1.1) + a.at(1.2));
  CHECK((a.at(1.15) - mid).norm() <= 1e-12);
  d.seed = 6;
  CHECK_FALSE(DisturbanceSignal(d, 4, 5.0).at(1.5) == a.at(1.5));
  d.enabled = false;
  CHECK_FALSE(DisturbanceSignal(d, 4, 5.0).active());
}

TEST_CASE("closed-loop equilibrium is a fixed point for every window") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  for (const auto& w : load_windows(b.spec, default_scenario())) {
    const Eigen::VectorXd x = closed_loop_equilibrium(b.spec, w.loads, d);
    CHECK(rhs(b.spec, w.loads, d, x).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((x.head(4) - b.sel.V_r).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("droop equilibrium is a fixed point of the droop loop") {
  const DesignBundle& b = default_bundle();
  const DroopConfig dr = default_droop(b.spec, b.sel.V_r);
  for (int i = 0; i < 4; ++i) CHECK(dr.m(i) == doctest::Approx(0.05 * b.sel.V_r(i) * b.sel.V_r(i) / b.spec.dgs[i].P_n));
  for (const auto& w : load_windows(b.spec, default_scenario())) {
    const Eigen::VectorXd x = droop_equilibrium(b.spec, w.loads, dr);
    const Eigen::VectorXd f = plant_rhs(b.spec, w.loads, dr.V_r, x, droop_control(b.spec, dr, x));
    // The integrator row of the droop loop is unused and keeps drifting with V - V_r.
    CHECK(f.head(8).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(f.tail(4).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("the controller reduces to u_S at the sharing equilibrium") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  const EquilibriumPoint eq = equilibrium_from_reference(b.spec, b.sel.V_r, b.sel.I_s);
  Eigen::VectorXd x(16);
  x << eq.V_E, eq.I_tE, Eigen::VectorXd::Zero(4), eq.I_bar_E;
  CHECK((dissipative_control(b.spec, d, x) - b.u_S).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("RK4 converges with fourth order") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  Eigen::VectorXd x0 = closed_loop_equilibrium(b.spec, b.spec.loads, d);
  x0(0) += 1.0;
  x0(13) += 0.05;
  std::vector<Eigen::VectorXd> fin;
  for (double dt : {2e-3, 1e-3, 5e-4}) fin.push_back(integrate(b.spec, d, quiet(0.1, dt), x0).x.back());
  const double order = std::log2((fin[0] - fin[1]).norm() / (fin[1] - fin[2]).norm());
  CHECK(order >= 3.5);
  CHECK(order <= 4.5);
}

TEST_CASE("integration is deterministic, disturbance included") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  Scenario sc = quiet(0.5, 1e-4, 10);
  sc.disturbance.enabled = true;
  sc.disturbance.amplitude = 0.2;
  sc.disturbance.seed = 3;
  const Eigen::VectorXd x0 = closed_loop_equilibrium(b.spec, b.spec.loads, d);
  const SimTrace a = integrate(b.spec, d, sc, x0);
  const SimTrace c = integrate(b.spec, d, sc, x0);
  REQUIRE(a.size() == 501);
  for (size_t k = 0; k < a.size(); ++k) REQUIRE(a.x[k] == c.x[k]);
  CHECK_FALSE(a.x.back() == x0);
}

TEST_CASE("certified storage never increases from a perturbed start") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  const Eigen::VectorXd xe = closed_loop_equilibrium(b.spec, b.spec.loads, d);
  AuditInputs ai;
  ai.K0 = b.local.K0;
  ai.dg = b.local.dg_certs;
  ai.line = b.local.line_certs;
  for (double pert : {0.5, 2.0}) {
    Eigen::VectorXd x0 = xe;
    x0(0) += pert;
    x0(5) -= 0.5 * pert;
    x0(9) += 0.01 * pert;
    x0(13) += 0.02 * pert;
    const SimTrace tr = integrate(b.spec, d, quiet(2.0, 1e-4, 10), x0);
    const auto st = network_storage(tr, xe, ai, b.global.p, b.global.p_bar);
    double worst = 0.0;
    for (size_t k = 1; k < st.size(); ++k) worst = std::max(worst, st[k] - st[k - 1]);
    CHECK(worst <= 1e-12 * st.front());
    CHECK(st.back() < 1e-2 * st.front());
  }
}

TEST_CASE("events fire at their scheduled step") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  Scenario sc = default_scenario();
  sc.dt = 1e-4;
  const SimTrace tr = integrate(b.spec, d, sc, scenario_start(b.spec, sc, d));
  CHECK(tr.event_times == std::vector<double>{0.0, 1.0, 3.0, 5.0, 8.0});
  CHECK(tr.size() == 1001);
}

TEST_CASE("voltage collapse raises a timestamped simulation error") {
  const DesignBundle& b = default_bundle();
  const DroopConfig dr = default_droop(b.spec, b.sel.V_r);
  Scenario sc = parse_scenario("[scenario]\nduration = 2\ndt = 1e-4\n[event 1]\ntime = 0.2\ntarget = all\nfield = p_l\nvalue = 1e6\n");
  try {
    run_droop(b.spec, dr, sc, scenario_start(b.spec, sc, dr));
    FAIL("expected a collapse");
  } catch (const SimulationError& e) {
    CHECK(e.time() >= 0.2);
    CHECK(std::string(e.what()).find("t = ") == 0);
  }
}

TEST_CASE("window metrics on a hand-built trace") {
  // V_r = 48: jump to 49 (outside the 1 % band of 0.48), undershoot, then settle at 48.
  std::vector<double> V = {48.0, 49.0, 48.6, 47.7, 47.9, 48.05, 48.0};
  for (int k = 0; k < 13; ++k) V.push_back(48.0);
  const SimTrace tr = synthetic(V, 0.1);
  NetworkSpec s;
  s.dgs.resize(1);
  s.dgs[0].P_n = 1.0;
  LoadWindow w{0.0, 1.9, {}};
  const auto m = metrics(s, tr, Eigen::VectorXd::Constant(1, 48.0), {w});
  REQUIRE(m.size() == 1);
  CHECK(m[0].max_dev == doctest::Approx(1.0));
  CHECK(m[0].settle_time == doctest::Approx(0.3));
  CHECK(m[0].settled);
  CHECK(m[0].tail_dev == 0.0);
  CHECK(oscillation_amplitude(tr, 0.0, 1.9) == doctest::Approx(0.3));
}

TEST_CASE("trace CSV has one row per sample") {
  const SimTrace tr = synthetic({48.0, 48.1, 48.2}, 0.5);
  std::ostringstream os;
  write_trace_csv(os, tr);
  std::istringstream in(os.str());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "t,V_1,It_1,v_1,u_1");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("short disturbance ensemble stays below the certified gain") {
  const DesignBundle& b = default_bundle();
  GainEnsemble ens;
  ens.members = 2;
  ens.duration = 3.0;
  ens.active = 1.0;
  const GainResult g = empirical_l2_gain(b.spec, control_of(b), ens);
  REQUIRE(g.ratios.size() == 2);
  CHECK(g.max_ratio > 0.0);
  CHECK(g.max_ratio <= b.global.gamma);
}

TEST_CASE("dissipation audit along a load-step run is clean") {
  const DesignBundle& b = default_bundle();
  const ControlDesign d = control_of(b);
  Scenario sc = default_scenario();
  sc.duration = 4.0;
  sc.dt = 1e-4;
  sc.decimation = 10;
  const auto win = load_windows(b.spec, sc);
  std::vector<Eigen::VectorXd> eq;
  for (const auto& w : win) eq.push_back(closed_loop_equilibrium(b.spec, w.loads, d));
  const SimTrace tr = integrate(b.spec, d, sc, eq.front());
  AuditInputs ai{b.local.K0, b.local.dg_certs, b.local.line_certs, network_sectors(b.spec, b.sel)};
  const AuditResult r = dissipation_audit(b.spec, sc, make_law(b.spec, d), tr, eq, ai);
  CHECK(r.samples > 0);
  CHECK(r.violations == 0);
  CHECK(r.max_excess <= 1e-6);
}
