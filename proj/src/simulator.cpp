#include "dcmg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dcmg/equilibrium.hpp"
#include "dcmg/local_synth.hpp"

namespace dcmg {

DroopConfig default_droop(const NetworkSpec& spec, const Eigen::VectorXd& V_r) {
  DroopConfig d;
  d.V_r = V_r;
  d.m.resize(spec.num_dgs());
  for (int i = 0; i < spec.num_dgs(); ++i) d.m(i) = 0.05 * V_r(i) / (spec.dgs[i].P_n / V_r(i));
  return d;
}

Eigen::VectorXd dissipative_control(const NetworkSpec& spec, const ControlDesign& d, const Eigen::VectorXd& x) {
  const StateLayout s(spec);
  Eigen::VectorXd u(s.N);
  for (int i = 0; i < s.N; ++i) {
    const Eigen::RowVector3d& k = d.K0[i];
    u(i) = d.u_S(i) + k(0) * (x(s.V(i)) - d.V_r(i)) + k(1) * (x(s.It(i)) - spec.dgs[i].P_n * d.I_s) +
           k(2) * x(s.v(i));
  }
  if (d.K_I.size() > 0) {
    const Eigen::VectorXd g = d.K_I * x.segment(s.N, s.N);
    for (int i = 0; i < s.N; ++i) u(i) += spec.dgs[i].L_t * g(i);
  }
  return u;
}

Eigen::VectorXd droop_control(const NetworkSpec& spec, const DroopConfig& d, const Eigen::VectorXd& x) {
  const StateLayout s(spec);
  Eigen::VectorXd u = d.V_r - d.m.cwiseProduct(x.segment(s.N, s.N));
  if (d.secondary) u -= d.k_sec * x.segment(2 * s.N, s.N);
  return u;
}

ControlLaw make_law(const NetworkSpec& spec, const ControlDesign& d) {
  return {d.V_r, [spec, d](const Eigen::VectorXd& x) { return dissipative_control(spec, d, x); }};
}

ControlLaw make_law(const NetworkSpec& spec, const DroopConfig& d) {
  return {d.V_r, [spec, d](const Eigen::VectorXd& x) { return droop_control(spec, d, x); }};
}

Eigen::VectorXd plant_rhs(const NetworkSpec& spec, const std::vector<ZipLoad>& loads, const Eigen::VectorXd& V_r,
                          const Eigen::VectorXd& x, const Eigen::VectorXd& u, const Eigen::VectorXd& w,
                          double V_guard) {
  const StateLayout s(spec);
  const bool dist = w.size() > 0;
  Eigen::VectorXd f(s.dim());
  const Eigen::VectorXd BIl = spec.incidence * x.tail(s.L);
  for (int i = 0; i < s.N; ++i) {
    const double V = x(s.V(i));
    if (!(V > V_guard)) {
      throw std::domain_error("DG " + std::to_string(i + 1) + " voltage " + format_double(V) +
                              " V reached the constant-power pole guard");
    }
    const double It = x(s.It(i));
    const auto& z = loads[i];
    const auto& dg = spec.dgs[i];
    f(s.V(i)) = (It - z.Y_L * V - z.I_bar - z.P_L / V - BIl(i) + (dist ? w(s.V(i)) : 0.0)) / dg.C_t;
    f(s.It(i)) = (-V - dg.R_t * It + u(i) + (dist ? w(s.It(i)) : 0.0)) / dg.L_t;
    f(s.v(i)) = V - V_r(i) + (dist ? w(s.v(i)) : 0.0);
  }
  const Eigen::VectorXd BtV = spec.incidence.transpose() * x.head(s.N);
  for (int l = 0; l < s.L; ++l) {
    const auto& ln = spec.lines[l];
    f(s.Il(l)) = (-ln.R * x(s.Il(l)) + BtV(l)) / ln.L + (dist ? w(s.Il(l)) : 0.0);
  }
  return f;
}

Eigen::VectorXd rhs(const NetworkSpec& spec, const std::vector<ZipLoad>& loads, const ControlDesign& d,
                    const Eigen::VectorXd& x, const Eigen::VectorXd& w) {
  return plant_rhs(spec, loads, d.V_r, x, dissipative_control(spec, d, x), w);
}

Eigen::VectorXd closed_loop_equilibrium(const NetworkSpec& spec, const std::vector<ZipLoad>& loads,
                                        const ControlDesign& d) {
  const StateLayout s(spec);
  const EquilibriumPoint eq = equilibrium_from_reference(spec, loads, d.V_r, d.I_s);
  Eigen::VectorXd x(s.dim());
  x.head(s.N) = d.V_r;
  x.segment(s.N, s.N) = eq.I_tE;
  x.tail(s.L) = eq.I_bar_E;
  x.segment(2 * s.N, s.N).setZero();
  // With v = 0 the controller output differs from u_E by r; the integrator absorbs it.
  const Eigen::VectorXd r = eq.u_E - dissipative_control(spec, d, x);
  for (int i = 0; i < s.N; ++i) {
    const double kI = d.K0[i](2);
    if (kI == 0.0) throw SimulationError(0.0, "integral gain of DG " + std::to_string(i + 1) + " is zero");
    x(s.v(i)) = r(i) / kI;
  }
  return x;
}

Eigen::VectorXd droop_equilibrium(const NetworkSpec& spec, const std::vector<ZipLoad>& loads, const DroopConfig& d) {
  const StateLayout s(spec);
  Eigen::VectorXd Rt(s.N), Ib(s.N), PL(s.N);
  for (int i = 0; i < s.N; ++i) {
    Rt(i) = spec.dgs[i].R_t;
    Ib(i) = loads[i].I_bar;
    PL(i) = loads[i].P_L;
  }
  Eigen::VectorXd x(s.dim());
  Eigen::VectorXd rline(s.L);
  for (int l = 0; l < s.L; ++l) rline(l) = 1.0 / spec.lines[l].R;
  if (d.secondary) {
    const EquilibriumPoint eq = equilibrium_from_reference(spec, loads, d.V_r, 0.0);
    x.head(s.N) = d.V_r;
    x.segment(s.N, s.N) = eq.I_tE;
    x.segment(2 * s.N, s.N) = -(d.m + Rt).cwiseProduct(eq.I_tE) / d.k_sec;
    x.tail(s.L) = eq.I_bar_E;
    return x;
  }
  const Eigen::VectorXd D = d.m + Rt;
  const Eigen::MatrixXd G = network_conductance(spec, loads);
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(s.N, s.N) + D.asDiagonal() * G;
  const auto lu = M.partialPivLu();
  Eigen::VectorXd V = d.V_r;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXd Vn = lu.solve(d.V_r - D.cwiseProduct(Ib + PL.cwiseQuotient(V)));
    if (!(Vn.array() > 0).all()) throw SimulationError(0.0, "droop equilibrium lost positivity");
    const double step = (Vn - V).cwiseAbs().maxCoeff();
    V = Vn;
    if (step < 1e-13 * V.cwiseAbs().maxCoeff()) break;
  }
  x.head(s.N) = V;
  x.segment(s.N, s.N) = (d.V_r - V).cwiseQuotient(D);
  x.segment(2 * s.N, s.N).setZero();
  x.tail(s.L) = rline.asDiagonal() * (spec.incidence.transpose() * V);
  return x;
}

SimTrace integrate(const NetworkSpec& spec, const ControlLaw& law, const Scenario& sc, const Eigen::VectorXd& x0,
                   const SimOptions& opt) {
  const StateLayout s(spec);
  if (!(sc.dt > 0)) throw SimulationError(0.0, "dt must be positive");
  if (x0.size() != s.dim()) throw SimulationError(0.0, "initial state has wrong length");
  SimTrace tr;
  tr.N = s.N;
  tr.L = s.L;
  tr.dt = sc.dt;
  tr.decimation = std::max(1, sc.decimation);
  const long long steps = std::llround(sc.duration / sc.dt);
  const DisturbanceSignal dist(sc.disturbance, s.dim(), sc.duration);
  const Eigen::VectorXd none;

  std::vector<ZipLoad> loads = spec.loads;
  size_t next_event = 0;
  Eigen::VectorXd x = x0;
  auto f = [&](double t, const Eigen::VectorXd& y) {
    return plant_rhs(spec, loads, law.V_r, y, law.u(y), dist.active() ? dist.at(t) : none, opt.V_guard);
  };
  const size_t expected = static_cast<size_t>(steps / tr.decimation + 1);
  tr.t.reserve(expected);
  tr.x.reserve(expected);
  tr.u.reserve(expected);
  for (long long n = 0; n <= steps; ++n) {
    const double t = static_cast<double>(n) * sc.dt;
    bool changed = false;
    while (next_event < sc.events.size() && std::llround(sc.events[next_event].time / sc.dt) <= n) {
      apply_event(spec, sc.events[next_event++], loads);
      changed = true;
    }
    if (changed) tr.event_times.push_back(t);
    if (n % tr.decimation == 0) {
      tr.t.push_back(t);
      tr.x.push_back(x);
      tr.u.push_back(law.u(x));
    }
    if (n == steps) break;
    try {
      const double h = sc.dt;
      const Eigen::VectorXd k1 = f(t, x);
      const Eigen::VectorXd k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
      const Eigen::VectorXd k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
      const Eigen::VectorXd k4 = f(t + h, x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    } catch (const std::domain_error& e) {
      throw SimulationError(t, e.what());
    }
    if (!x.allFinite()) throw SimulationError(t + sc.dt, "state became non-finite");
  }
  return tr;
}

SimTrace integrate(const NetworkSpec& spec, const ControlDesign& d, const Scenario& sc, const Eigen::VectorXd& x0,
                   const SimOptions& opt) {
  return integrate(spec, make_law(spec, d), sc, x0, opt);
}

SimTrace run_droop(const NetworkSpec& spec, const DroopConfig& d, const Scenario& sc, const Eigen::VectorXd& x0,
                   const SimOptions& opt) {
  return integrate(spec, make_law(spec, d), sc, x0, opt);
}

Eigen::VectorXd scenario_start(const NetworkSpec& spec, const Scenario& sc, const ControlDesign& d) {
  return closed_loop_equilibrium(spec, load_windows(spec, sc).front().loads, d);
}

Eigen::VectorXd scenario_start(const NetworkSpec& spec, const Scenario& sc, const DroopConfig& d) {
  return droop_equilibrium(spec, load_windows(spec, sc).front().loads, d);
}

namespace {

// Sample indices [first, last) with t in [t_begin, t_end), the final window closed at t_end.
std::pair<size_t, size_t> sample_range(const SimTrace& tr, double t_begin, double t_end) {
  const double eps = 1e-9 * tr.dt;
  size_t a = 0;
  while (a < tr.size() && tr.t[a] < t_begin - eps) ++a;
  size_t b = a;
  const bool closed = !tr.t.empty() && t_end >= tr.t.back() - eps;
  while (b < tr.size() && (tr.t[b] < t_end - eps || (closed && tr.t[b] <= t_end + eps))) ++b;
  return {a, b};
}

}  // namespace

double oscillation_amplitude(const SimTrace& tr, double t_begin, double t_end) {
  const auto [a, b] = sample_range(tr, t_begin, t_end);
  if (b - a < 4) return 0.0;
  double out = 0.0;
  const size_t tail = a + static_cast<size_t>(0.9 * static_cast<double>(b - a));
  for (int i = 0; i < tr.N; ++i) {
    double fin = 0.0;
    for (size_t k = tail; k < b; ++k) fin += tr.x[k](i);
    fin /= static_cast<double>(b - tail);
    std::vector<double> e(b - a);
    double emax = 0.0;
    for (size_t k = a; k < b; ++k) {
      e[k - a] = tr.x[k](i) - fin;
      emax = std::max(emax, std::abs(e[k - a]));
    }
    if (emax == 0.0) continue;
    size_t first = e.size();
    for (size_t k = 1; k + 1 < e.size(); ++k) {
      const double d0 = e[k] - e[k - 1];
      const double d1 = e[k + 1] - e[k];
      if (d0 * d1 < 0 && std::abs(e[k]) >= 0.05 * emax) {
        first = k;
        break;
      }
    }
    if (first >= e.size()) continue;
    const double side = e[first] > 0 ? 1.0 : -1.0;
    double amp = 0.0;
    for (size_t k = first + 1; k < e.size(); ++k) amp = std::max(amp, -side * e[k]);
    out = std::max(out, amp);
  }
  return out;
}

std::vector<WindowMetrics> metrics(const NetworkSpec& spec, const SimTrace& tr, const Eigen::VectorXd& V_r,
                                   const std::vector<LoadWindow>& windows) {
  std::vector<WindowMetrics> out;
  const int N = tr.N;
  const double spacing = tr.dt * tr.decimation;
  for (const auto& w : windows) {
    WindowMetrics m;
    m.t_begin = w.t_begin;
    m.t_end = w.t_end;
    const auto [a, b] = sample_range(tr, w.t_begin, w.t_end);
    if (a >= b) {
      out.push_back(m);
      continue;
    }
    const double t_tail = w.t_end - 0.2 * (w.t_end - w.t_begin);
    long long last_out = -1;
    int tail_n = 0;
    double drift = 0.0;
    double share = 0.0;
    for (size_t k = a; k < b; ++k) {
      const Eigen::VectorXd& x = tr.x[k];
      double dev = 0.0;
      bool outside = false;
      for (int i = 0; i < N; ++i) {
        const double e = std::abs(x(i) - V_r(i));
        dev = std::max(dev, e);
        if (e > 0.01 * V_r(i)) outside = true;
      }
      m.max_dev = std::max(m.max_dev, dev);
      if (outside) last_out = static_cast<long long>(k);
      if (tr.t[k] >= t_tail - 1e-9 * tr.dt) {
        ++tail_n;
        m.tail_dev = std::max(m.tail_dev, dev);
        double lo = std::numeric_limits<double>::infinity(), hi = -lo;
        for (int i = 0; i < N; ++i) {
          const double r = x(N + i) / spec.dgs[i].P_n;
          lo = std::min(lo, r);
          hi = std::max(hi, r);
          share += r;
          drift += (x(i) - V_r(i)) * (x(i) - V_r(i));
        }
        m.dispersion = std::max(m.dispersion, hi - lo);
      }
    }
    if (tail_n > 0) {
      m.mean_share = share / (tail_n * N);
      m.drift_rms = std::sqrt(drift / (tail_n * N));
    }
    if (last_out >= 0) {
      m.settle_time = tr.t[static_cast<size_t>(last_out)] + spacing - w.t_begin;
      m.settled = static_cast<size_t>(last_out) + 1 < b;
    }
    m.oscillation = oscillation_amplitude(tr, w.t_begin, w.t_end);
    out.push_back(m);
  }
  return out;
}

void write_trace_csv(std::ostream& os, const SimTrace& tr) {
  os << "t";
  for (int i = 1; i <= tr.N; ++i) os << ",V_" << i;
  for (int i = 1; i <= tr.N; ++i) os << ",It_" << i;
  for (int i = 1; i <= tr.N; ++i) os << ",v_" << i;
  for (int l = 1; l <= tr.L; ++l) os << ",Il_" << l;
  for (int i = 1; i <= tr.N; ++i) os << ",u_" << i;
  os << "\n";
  for (size_t k = 0; k < tr.size(); ++k) {
    os << format_double(tr.t[k]);
    for (Eigen::Index j = 0; j < tr.x[k].size(); ++j) os << ',' << format_double(tr.x[k](j));
    for (Eigen::Index j = 0; j < tr.u[k].size(); ++j) os << ',' << format_double(tr.u[k](j));
    os << "\n";
  }
}

void write_metrics_csv(std::ostream& os, const std::vector<WindowMetrics>& m) {
  os << "t_begin,t_end,max_dev,settle_time,settled,tail_dev,dispersion,mean_share,drift_rms,oscillation\n";
  for (const auto& w : m) {
    os << format_double(w.t_begin) << ',' << format_double(w.t_end) << ',' << format_double(w.max_dev) << ','
       << format_double(w.settle_time) << ',' << (w.settled ? 1 : 0) << ',' << format_double(w.tail_dev) << ','
       << format_double(w.dispersion) << ',' << format_double(w.mean_share) << ',' << format_double(w.drift_rms)
       << ',' << format_double(w.oscillation) << "\n";
  }
}

GainResult empirical_l2_gain(const NetworkSpec& spec, const ControlDesign& d, const GainEnsemble& ens) {
  const StateLayout s(spec);
  const Eigen::VectorXd xE = closed_loop_equilibrium(spec, spec.loads, d);
  GainResult out;
  for (int m = 0; m < ens.members; ++m) {
    Scenario sc;
    sc.duration = ens.duration;
    sc.dt = ens.dt;
    sc.decimation = 1;
    sc.disturbance.enabled = true;
    sc.disturbance.amplitude = ens.amplitude;
    sc.disturbance.bandwidth = ens.bandwidth;
    sc.disturbance.seed = ens.seed + static_cast<unsigned>(m);
    sc.disturbance.t_on = 0.0;
    sc.disturbance.t_off = ens.active;
    const SimTrace tr = integrate(spec, d, sc, xE);
    const DisturbanceSignal w(sc.disturbance, s.dim(), sc.duration);
    double zz = 0.0, ww = 0.0;
    for (size_t k = 0; k < tr.size(); ++k) {
      const double wt = (k == 0 || k + 1 == tr.size()) ? 0.5 : 1.0;
      zz += wt * (tr.x[k] - xE).squaredNorm();
      ww += wt * w.at(tr.t[k]).squaredNorm();
    }
    if (ww <= 0) continue;
    const double r = std::sqrt(zz / ww);
    out.ratios.push_back(r);
    out.max_ratio = std::max(out.max_ratio, r);
  }
  return out;
}

AuditResult dissipation_audit(const NetworkSpec& spec, const Scenario& sc, const ControlLaw& law,
                              const SimTrace& tr, const std::vector<Eigen::VectorXd>& window_eq,
                              const AuditInputs& certs, double tol) {
  const StateLayout s(spec);
  const auto windows = load_windows(spec, sc);
  if (window_eq.size() != windows.size()) throw std::invalid_argument("one equilibrium per load window is required");
  std::vector<Eigen::Matrix3d> Acl(s.N);
  for (int i = 0; i < s.N; ++i) {
    const DgMatrices dm = dg_matrices(spec.dgs[i], spec.loads[i]);
    Acl[i] = dm.A + dm.B * certs.K0[i];
  }
  AuditResult res;
  double best = -std::numeric_limits<double>::infinity();
  size_t w = 0;
  for (size_t k = 0; k < tr.size(); ++k) {
    const double t = tr.t[k];
    while (w + 1 < windows.size() && t >= windows[w + 1].t_begin - 1e-9 * tr.dt) ++w;
    const Eigen::VectorXd& x = tr.x[k];
    const Eigen::VectorXd f = plant_rhs(spec, windows[w].loads, law.V_r, x, law.u(x));
    const Eigen::VectorXd xt = x - window_eq[w];
    auto record = [&](double excess, int unit) {
      ++res.samples;
      if (excess > tol) ++res.violations;
      if (excess > best) {
        best = excess;
        res.worst_unit = unit;
        res.worst_time = t;
      }
    };
    for (int i = 0; i < s.N; ++i) {
      const Eigen::Vector3d xi(xt(s.V(i)), xt(s.It(i)), xt(s.v(i)));
      const Eigen::Vector3d fi(f(s.V(i)), f(s.It(i)), f(s.v(i)));
      const SectorBound& sb = certs.sectors[i];
      const double V = x(s.V(i));
      if (V < sb.V_min || V > sb.V_max) continue;
      const double g = cpl_nonlinearity(spec.dgs[i], spec.loads[i], sb.V_r, V - sb.V_r);
      const Eigen::Vector3d ui = fi - Acl[i] * xi - g * Eigen::Vector3d::UnitX();
      const auto& c = certs.dg[i];
      const double Vdot = 2.0 * xi.dot(c.P * fi);
      const double supply = -c.nu * ui.squaredNorm() + xi.dot(ui) - c.rho * xi.squaredNorm();
      record((Vdot - supply) / (1.0 + xi.squaredNorm() + ui.squaredNorm()), i);
    }
    for (int l = 0; l < s.L; ++l) {
      const auto& ln = spec.lines[l];
      const double It = xt(s.Il(l));
      const double fl = f(s.Il(l));
      const double ul = ln.L * fl + ln.R * It;
      const auto& c = certs.line[l];
      const double Vdot = 2.0 * c.P(0, 0) * It * fl;
      const double supply = -c.nu * ul * ul + ul * It - c.rho * It * It;
      record((Vdot - supply) / (1.0 + It * It + ul * ul), s.N + l);
    }
  }
  res.max_excess = std::max(0.0, best);
  return res;
}

std::vector<double> network_storage(const SimTrace& tr, const Eigen::VectorXd& x_eq, const AuditInputs& certs,
                                    const Eigen::VectorXd& p, const Eigen::VectorXd& p_bar) {
  std::vector<double> out;
  out.reserve(tr.size());
  const int N = tr.N;
  for (const auto& x : tr.x) {
    const Eigen::VectorXd xt = x - x_eq;
    double v = 0.0;
    for (int i = 0; i < N; ++i) {
      const Eigen::Vector3d xi(xt(i), xt(N + i), xt(2 * N + i));
      v += p(i) * xi.dot(certs.dg[i].P * xi);
    }
    for (int l = 0; l < tr.L; ++l) v += p_bar(l) * certs.line[l].P(0, 0) * xt(3 * N + l) * xt(3 * N + l);
    out.push_back(v);
  }
  return out;
}

}  // namespace dcmg
