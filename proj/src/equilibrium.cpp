#include "dcmg/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dcmg {

namespace {

Eigen::VectorXd field(const std::vector<ZipLoad>& loads, double ZipLoad::*f) {
  Eigen::VectorXd v(loads.size());
  for (size_t i = 0; i < loads.size(); ++i) v(i) = loads[i].*f;
  return v;
}

Eigen::VectorXd ratings(const NetworkSpec& spec) {
  Eigen::VectorXd p(spec.num_dgs());
  for (int i = 0; i < spec.num_dgs(); ++i) p(i) = spec.dgs[i].P_n;
  return p;
}

Eigen::VectorXd line_resistances(const NetworkSpec& spec) {
  Eigen::VectorXd r(spec.num_lines());
  for (int l = 0; l < spec.num_lines(); ++l) r(l) = spec.lines[l].R;
  return r;
}

}  // namespace

Eigen::MatrixXd network_conductance(const NetworkSpec& spec, const std::vector<ZipLoad>& loads) {
  const Eigen::MatrixXd& B = spec.incidence;
  Eigen::MatrixXd G = B * line_resistances(spec).cwiseInverse().asDiagonal() * B.transpose();
  G.diagonal() += field(loads, &ZipLoad::Y_L);
  return G;
}

EquilibriumPoint equilibrium_from_reference(const NetworkSpec& spec, const Eigen::VectorXd& V_r, double I_s) {
  return equilibrium_from_reference(spec, spec.loads, V_r, I_s);
}

EquilibriumPoint equilibrium_from_reference(const NetworkSpec& spec, const std::vector<ZipLoad>& loads,
                                            const Eigen::VectorXd& V_r, double I_s) {
  const int N = spec.num_dgs();
  if (V_r.size() != N) throw EquilibriumError("reference vector has wrong length");
  if ((V_r.array() <= 0).any()) throw EquilibriumError("reference voltages must be positive");
  EquilibriumPoint eq;
  eq.V_E = V_r;
  eq.I_bar_E = line_resistances(spec).cwiseInverse().asDiagonal() * (spec.incidence.transpose() * V_r);
  eq.I_tE = network_conductance(spec, loads) * V_r + field(loads, &ZipLoad::I_bar) +
            field(loads, &ZipLoad::P_L).cwiseQuotient(V_r);
  Eigen::VectorXd Rt(N);
  for (int i = 0; i < N; ++i) Rt(i) = spec.dgs[i].R_t;
  eq.u_E = V_r + Rt.cwiseProduct(eq.I_tE);
  eq.v_E = Eigen::VectorXd::Zero(N);
  eq.I_s = I_s;
  return eq;
}

Eigen::VectorXd equilibrium_residual(const NetworkSpec& spec, const std::vector<ZipLoad>& loads,
                                     const Eigen::VectorXd& V_r, const EquilibriumPoint& eq) {
  const int N = spec.num_dgs();
  const int L = spec.num_lines();
  const Eigen::MatrixXd& B = spec.incidence;
  Eigen::VectorXd r(3 * N + L);
  for (int i = 0; i < N; ++i) {
    const auto& z = loads[i];
    const double V = eq.V_E(i);
    r(i) = eq.I_tE(i) - z.Y_L * V - z.I_bar - z.P_L / V - B.row(i).dot(eq.I_bar_E);
    r(N + i) = -V - spec.dgs[i].R_t * eq.I_tE(i) + eq.u_E(i);
    r(2 * N + i) = V - V_r(i);
  }
  for (int l = 0; l < L; ++l) r(3 * N + l) = -spec.lines[l].R * eq.I_bar_E(l) + B.col(l).dot(eq.V_E);
  return r;
}

ReferenceSelection select_reference(const NetworkSpec& spec, const Eigen::VectorXd& V_bar,
                                    const SelectionWeights& w) {
  const int N = spec.num_dgs();
  if (V_bar.size() != N) throw EquilibriumError("desired reference has wrong length");
  const Eigen::MatrixXd G = network_conductance(spec, spec.loads);
  const Eigen::VectorXd Pn = ratings(spec);
  const Eigen::VectorXd Ib = field(spec.loads, &ZipLoad::I_bar);
  const Eigen::VectorXd PL = field(spec.loads, &ZipLoad::P_L);

  // Unknown z = [V_r; I_s] with E z = h, E = [-G, P_n]. E has full row rank whenever
  // P_n is outside range(G), which holds for positive ratings.
  Eigen::MatrixXd E(N, N + 1);
  E << -G, Pn;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(E);
  Eigen::MatrixXd ker = lu.kernel();
  ReferenceSelection sel;
  if (lu.rank() != N || ker.cols() != 1) {
    sel.message = "sharing equality is degenerate";
    return sel;
  }
  Eigen::VectorXd n = ker.col(0);
  if (n(N) < 0) n = -n;
  n /= n.norm();
  const auto cod = E.completeOrthogonalDecomposition();

  Eigen::VectorXd lo(N + 1), hi(N + 1);
  lo.head(N).setConstant(spec.V_min);
  hi.head(N).setConstant(spec.V_max);
  lo(N) = 0.0;
  hi(N) = 1.0;

  Eigen::VectorXd V = V_bar;
  double Is = 0.0;
  for (int it = 1; it <= w.max_iter; ++it) {
    sel.iterations = it;
    const Eigen::VectorXd h = Ib + PL.cwiseQuotient(V);
    const Eigen::VectorXd zp = cod.solve(h);
    double tlo = -std::numeric_limits<double>::infinity();
    double thi = std::numeric_limits<double>::infinity();
    for (int k = 0; k <= N; ++k) {
      const double slack = 1e-12 * std::max(1.0, std::abs(hi(k)));
      if (std::abs(n(k)) < 1e-14) {
        if (zp(k) < lo(k) - slack || zp(k) > hi(k) + slack) tlo = std::numeric_limits<double>::infinity();
        continue;
      }
      double a = (lo(k) - slack - zp(k)) / n(k);
      double b = (hi(k) + slack - zp(k)) / n(k);
      if (a > b) std::swap(a, b);
      tlo = std::max(tlo, a);
      thi = std::min(thi, b);
    }
    if (!(tlo <= thi)) {
      sel.feasible = false;
      sel.message = "no reference within the voltage bounds carries the load with 0 <= I_s <= 1";
      return sel;
    }
    const Eigen::VectorXd nV = n.head(N);
    const double qa = w.alpha_V * nV.squaredNorm();
    const double qb = 2.0 * w.alpha_V * nV.dot(zp.head(N) - V_bar) + w.alpha_I * n(N);
    double t;
    if (qa > 0) {
      t = std::clamp(-qb / (2.0 * qa), tlo, thi);
    } else {
      t = qb > 0 ? tlo : thi;
    }
    const Eigen::VectorXd z = zp + t * n;
    const Eigen::VectorXd Vn = z.head(N).cwiseMax(spec.V_min).cwiseMin(spec.V_max);
    Is = std::clamp(z(N), 0.0, 1.0);
    const double step = (Vn - V).cwiseAbs().maxCoeff();
    V = Vn;
    if (step < w.tol) {
      sel.feasible = true;
      break;
    }
  }
  sel.V_r = V;
  sel.I_s = Is;
  sel.objective = w.alpha_V * (V - V_bar).squaredNorm() + w.alpha_I * Is;
  if (!sel.feasible) sel.message = "constant-power fixed point did not converge";
  return sel;
}

Eigen::VectorXd steady_state_inputs(const NetworkSpec& spec, const ReferenceSelection& sel) {
  Eigen::VectorXd u(spec.num_dgs());
  for (int i = 0; i < spec.num_dgs(); ++i) u(i) = sel.V_r(i) + spec.dgs[i].R_t * spec.dgs[i].P_n * sel.I_s;
  return u;
}

}  // namespace dcmg
