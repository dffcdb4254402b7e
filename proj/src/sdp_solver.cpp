// Primal-dual path-following SDP solver (HKM direction, Mehrotra predictor-corrector).
//
// The LMI problem  min c'y  s.t.  F0 + sum_k y_k F_k >= 0,  B y = d  is treated as the dual of
//   max <C, X> + d'w  s.t.  A(X) + B'w = c,  X >= 0,
// with A_k = F_k and C = -F0. Scalar inequalities are collected into one diagonal block.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

#include "dcmg/lmi.hpp"

namespace dcmg {

namespace {

struct Entry {
  int r;
  int c;
  double v;
};

struct DenseBlock {
  int n = 0;
  Eigen::MatrixXd C;
  std::vector<int> vars;
  std::vector<std::vector<Entry>> ents;  // full symmetric entry list per variable
};

struct LpBlock {
  int m = 0;
  Eigen::VectorXd C;
  std::vector<std::vector<std::pair<int, double>>> rows;
};

struct Compiled {
  int n = 0;
  std::vector<DenseBlock> dense;
  LpBlock lp;
  Eigen::MatrixXd B;
  Eigen::VectorXd d;
  Eigen::VectorXd c;
  double c0 = 0.0;
  Eigen::VectorXd scale;  // y = scale .* y_scaled
  bool trivially_infeasible = false;
  std::string trivial_reason;
};

// Rescale every variable so its coefficient column has unit norm.
void scale_columns(Compiled& cp) {
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(cp.n);
  for (const auto& b : cp.dense)
    for (size_t t = 0; t < b.vars.size(); ++t)
      for (const auto& e : b.ents[t]) sq(b.vars[t]) += e.v * e.v;
  for (const auto& r : cp.lp.rows)
    for (const auto& [k, v] : r) sq(k) += v * v;
  if (cp.B.rows() > 0) sq += cp.B.colwise().squaredNorm().transpose();
  cp.scale = Eigen::VectorXd::Ones(cp.n);
  for (int k = 0; k < cp.n; ++k)
    if (sq(k) > 0) cp.scale(k) = 1.0 / std::sqrt(sq(k));
  for (auto& b : cp.dense)
    for (size_t t = 0; t < b.vars.size(); ++t)
      for (auto& e : b.ents[t]) e.v *= cp.scale(b.vars[t]);
  for (auto& r : cp.lp.rows)
    for (auto& [k, v] : r) v *= cp.scale(k);
  if (cp.B.rows() > 0) cp.B = cp.B * cp.scale.asDiagonal();
  cp.c = cp.c.cwiseProduct(cp.scale);
}

Compiled compile(const LmiProblem& p) {
  Compiled cp;
  cp.n = p.num_vars();
  cp.c = Eigen::VectorXd::Zero(cp.n);
  for (const auto& [k, v] : p.objective().terms) cp.c(k) += v;
  cp.c0 = p.objective().constant;

  std::vector<std::pair<std::vector<std::pair<int, double>>, double>> eq;
  std::vector<double> lpC;

  auto add_lp = [&](std::vector<std::pair<int, double>> terms, double c) {
    cp.lp.rows.push_back(std::move(terms));
    lpC.push_back(c);
  };

  for (const auto& con : p.constraints()) {
    const auto& e = con.expr;
    switch (con.kind) {
      case ConstraintKind::kPsd: {
        if (e.rows() == 1) {
          add_lp(e(0, 0).terms, -(e(0, 0).constant - con.bound));
          break;
        }
        DenseBlock b;
        b.n = e.rows();
        b.C.resize(b.n, b.n);
        std::map<int, std::vector<Entry>> per_var;
        for (int i = 0; i < b.n; ++i) {
          for (int j = 0; j < b.n; ++j) {
            b.C(i, j) = -e(i, j).constant + (i == j ? con.bound : 0.0);
            for (const auto& [k, v] : e(i, j).terms) per_var[k].push_back({i, j, v});
          }
        }
        b.C = 0.5 * (b.C + b.C.transpose()).eval();
        for (auto& [k, ents] : per_var) {
          b.vars.push_back(k);
          b.ents.push_back(std::move(ents));
        }
        cp.dense.push_back(std::move(b));
        break;
      }
      case ConstraintKind::kGe:
        add_lp(e(0, 0).terms, -(e(0, 0).constant - con.bound));
        break;
      case ConstraintKind::kLe: {
        auto t = e(0, 0).terms;
        for (auto& x : t) x.second = -x.second;
        add_lp(std::move(t), -(con.bound - e(0, 0).constant));
        break;
      }
      case ConstraintKind::kZero:
        for (int i = 0; i < e.rows(); ++i) {
          for (int j = 0; j < e.cols(); ++j) {
            const auto& cell = e(i, j);
            if (cell.terms.empty()) {
              if (cell.constant != 0.0) {
                cp.trivially_infeasible = true;
                cp.trivial_reason = "constant equality violated in '" + con.name + "'";
              }
              continue;
            }
            std::pair<std::vector<std::pair<int, double>>, double> row{cell.terms, -cell.constant};
            if (std::find(eq.begin(), eq.end(), row) == eq.end()) eq.push_back(std::move(row));
          }
        }
        break;
    }
  }

  cp.lp.m = static_cast<int>(lpC.size());
  cp.lp.C = Eigen::Map<Eigen::VectorXd>(lpC.data(), cp.lp.m);
  cp.B = Eigen::MatrixXd::Zero(static_cast<int>(eq.size()), cp.n);
  cp.d = Eigen::VectorXd::Zero(static_cast<int>(eq.size()));
  for (size_t r = 0; r < eq.size(); ++r) {
    for (const auto& [k, v] : eq[r].first) cp.B(r, k) += v;
    cp.d(r) = eq[r].second;
  }
  scale_columns(cp);
  return cp;
}

struct Iterate {
  std::vector<Eigen::MatrixXd> X, Z;
  Eigen::VectorXd xl, zl;  // LP block (diagonal)
  Eigen::VectorXd y, w;
};

Eigen::VectorXd amap(const Compiled& cp, const std::vector<Eigen::MatrixXd>& X, const Eigen::VectorXd& xl) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(cp.n);
  for (size_t b = 0; b < cp.dense.size(); ++b) {
    const auto& blk = cp.dense[b];
    for (size_t t = 0; t < blk.vars.size(); ++t) {
      double s = 0.0;
      for (const auto& e : blk.ents[t]) s += e.v * X[b](e.r, e.c);
      out(blk.vars[t]) += s;
    }
  }
  for (int r = 0; r < cp.lp.m; ++r)
    for (const auto& [k, v] : cp.lp.rows[r]) out(k) += v * xl(r);
  return out;
}

void aadj(const Compiled& cp, const Eigen::VectorXd& y, std::vector<Eigen::MatrixXd>& S, Eigen::VectorXd& sl) {
  S.resize(cp.dense.size());
  for (size_t b = 0; b < cp.dense.size(); ++b) {
    const auto& blk = cp.dense[b];
    S[b] = Eigen::MatrixXd::Zero(blk.n, blk.n);
    for (size_t t = 0; t < blk.vars.size(); ++t) {
      double yk = y(blk.vars[t]);
      if (yk == 0.0) continue;
      for (const auto& e : blk.ents[t]) S[b](e.r, e.c) += yk * e.v;
    }
  }
  sl = Eigen::VectorXd::Zero(cp.lp.m);
  for (int r = 0; r < cp.lp.m; ++r)
    for (const auto& [k, v] : cp.lp.rows[r]) sl(r) += v * y(k);
}

double max_step_dense(const Eigen::MatrixXd& X, const Eigen::MatrixXd& D) {
  Eigen::LLT<Eigen::MatrixXd> llt(X);
  if (llt.info() != Eigen::Success) return 0.0;
  Eigen::MatrixXd W = llt.matrixL().solve(D);
  W = llt.matrixL().solve(W.transpose()).transpose();
  W = 0.5 * (W + W.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues()(0);
  return lmin < 0 ? -1.0 / lmin : std::numeric_limits<double>::infinity();
}

double max_step_lp(const Eigen::VectorXd& x, const Eigen::VectorXd& d) {
  double a = std::numeric_limits<double>::infinity();
  for (int i = 0; i < x.size(); ++i)
    if (d(i) < 0) a = std::min(a, -x(i) / d(i));
  return a;
}

double inner(const std::vector<Eigen::MatrixXd>& A, const Eigen::VectorXd& al,
             const std::vector<Eigen::MatrixXd>& B, const Eigen::VectorXd& bl) {
  double s = al.dot(bl);
  for (size_t b = 0; b < A.size(); ++b) s += A[b].cwiseProduct(B[b]).sum();
  return s;
}

double sqnorm(const std::vector<Eigen::MatrixXd>& A, const Eigen::VectorXd& al) {
  double s = al.squaredNorm();
  for (const auto& m : A) s += m.squaredNorm();
  return s;
}

}  // namespace

const char* to_string(SdpStatus s) {
  switch (s) {
    case SdpStatus::kOptimal: return "optimal";
    case SdpStatus::kFeasible: return "feasible";
    case SdpStatus::kInfeasible: return "infeasible";
    case SdpStatus::kNumericalFailure: return "numerical-failure";
  }
  return "?";
}

double min_eig(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return std::numeric_limits<double>::infinity();
  Eigen::MatrixXd s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

double constraint_violation(const LmiConstraint& c, const Eigen::VectorXd& x) {
  switch (c.kind) {
    case ConstraintKind::kPsd: {
      Eigen::MatrixXd m = c.expr.eval(x);
      return std::max(0.0, -(min_eig(m) - c.bound));
    }
    case ConstraintKind::kZero: return c.expr.eval(x).cwiseAbs().maxCoeff();
    case ConstraintKind::kGe: return std::max(0.0, c.bound - c.expr(0, 0).eval(x));
    case ConstraintKind::kLe: return std::max(0.0, c.expr(0, 0).eval(x) - c.bound);
  }
  return 0.0;
}

double max_violation(const LmiProblem& problem, const Eigen::VectorXd& x) {
  double v = 0.0;
  for (const auto& c : problem.constraints()) v = std::max(v, constraint_violation(c, x));
  return v;
}

SdpSolution solve(const LmiProblem& problem, const SdpSettings& st) {
  SdpSolution sol;
  const Compiled cp = compile(problem);
  const int n = cp.n;
  const int neq = static_cast<int>(cp.B.rows());
  const size_t nb = cp.dense.size();
  sol.x = Eigen::VectorXd::Zero(n);

  if (cp.trivially_infeasible) {
    sol.status = SdpStatus::kInfeasible;
    sol.message = cp.trivial_reason;
    return sol;
  }

  // Variables touched by no cone constraint and no equality are fixed at zero.
  std::vector<char> used(n, 0);
  for (const auto& b : cp.dense)
    for (int k : b.vars) used[k] = 1;
  for (const auto& r : cp.lp.rows)
    for (const auto& t : r) used[t.first] = 1;
  for (int r = 0; r < neq; ++r)
    for (int k = 0; k < n; ++k)
      if (cp.B(r, k) != 0.0) used[k] = 1;
  for (int k = 0; k < n; ++k) {
    if (!used[k] && cp.c(k) != 0.0) {
      sol.message = "variable '" + problem.var_names()[k] + "' is unconstrained";
      return sol;
    }
  }

  int ntot = cp.lp.m;
  for (const auto& b : cp.dense) ntot += b.n;
  if (ntot == 0) {
    // Only equalities: least-norm solution.
    Eigen::VectorXd ys = Eigen::VectorXd::Zero(n);
    if (neq > 0) ys = cp.B.completeOrthogonalDecomposition().solve(cp.d);
    sol.x = ys.cwiseProduct(cp.scale);
    sol.max_residual = max_violation(problem, sol.x);
    sol.status = sol.max_residual <= st.tol_psd ? SdpStatus::kOptimal : SdpStatus::kInfeasible;
    sol.objective = cp.c.dot(ys) + cp.c0;
    return sol;
  }

  double normC = 0.0;
  for (const auto& b : cp.dense) normC += b.C.squaredNorm();
  normC = std::sqrt(normC + cp.lp.C.squaredNorm());
  const double normc = cp.c.norm();
  const double normd = cp.d.norm();

  // Starting point in the style of SDPT3: scaled identities.
  Iterate it;
  it.X.resize(nb);
  it.Z.resize(nb);
  for (size_t b = 0; b < nb; ++b) {
    const auto& blk = cp.dense[b];
    double maxA = 0.0, ratio = 0.0;
    for (size_t t = 0; t < blk.vars.size(); ++t) {
      double fa = 0.0;
      for (const auto& e : blk.ents[t]) fa += e.v * e.v;
      fa = std::sqrt(fa);
      maxA = std::max(maxA, fa);
      ratio = std::max(ratio, (1.0 + std::abs(cp.c(blk.vars[t]))) / (1.0 + fa));
    }
    double sn = std::sqrt(static_cast<double>(blk.n));
    double xi = std::max({10.0, sn, blk.n * ratio});
    double zeta = std::max({10.0, sn, maxA, blk.C.norm()});
    it.X[b] = xi * Eigen::MatrixXd::Identity(blk.n, blk.n);
    it.Z[b] = zeta * Eigen::MatrixXd::Identity(blk.n, blk.n);
  }
  {
    double maxA = 0.0, ratio = 0.0;
    std::vector<double> rowsq(n, 0.0);
    for (const auto& r : cp.lp.rows)
      for (const auto& [k, v] : r) rowsq[k] += v * v;
    for (int k = 0; k < n; ++k) {
      if (rowsq[k] == 0.0) continue;
      double fa = std::sqrt(rowsq[k]);
      maxA = std::max(maxA, fa);
      ratio = std::max(ratio, (1.0 + std::abs(cp.c(k))) / (1.0 + fa));
    }
    double m = cp.lp.m;
    double xi = std::max({10.0, std::sqrt(m), m * ratio});
    double zeta = std::max({10.0, std::sqrt(m), maxA, cp.lp.C.norm()});
    it.xl = Eigen::VectorXd::Constant(cp.lp.m, xi);
    it.zl = Eigen::VectorXd::Constant(cp.lp.m, zeta);
  }
  it.y = Eigen::VectorXd::Zero(n);
  it.w = Eigen::VectorXd::Zero(neq);

  std::vector<Eigen::MatrixXd> Zi(nb), Rd(nb), S(nb);
  Eigen::VectorXd rdl, sl;
  int stalled = 0;
  bool converged = false;
  std::string why = "iteration limit reached";

  for (int iter = 0; iter < st.max_iter; ++iter) {
    sol.iterations = iter;
    bool chol_ok = true;
    for (size_t b = 0; b < nb; ++b) {
      Eigen::LLT<Eigen::MatrixXd> llt(it.Z[b]);
      if (llt.info() != Eigen::Success) {
        chol_ok = false;
        break;
      }
      Zi[b] = llt.solve(Eigen::MatrixXd::Identity(it.Z[b].rows(), it.Z[b].cols()));
      Zi[b] = 0.5 * (Zi[b] + Zi[b].transpose()).eval();
    }
    if (!chol_ok) {
      why = "dual slack lost positive definiteness";
      break;
    }

    const Eigen::VectorXd AX = amap(cp, it.X, it.xl);
    const Eigen::VectorXd Btw = neq ? Eigen::VectorXd(cp.B.transpose() * it.w) : Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd rp = cp.c - AX - Btw;
    aadj(cp, it.y, S, sl);
    for (size_t b = 0; b < nb; ++b) Rd[b] = S[b] - cp.dense[b].C - it.Z[b];
    rdl = sl - cp.lp.C - it.zl;
    const Eigen::VectorXd re = neq ? Eigen::VectorXd(cp.d - cp.B * it.y) : Eigen::VectorXd();

    std::vector<Eigen::MatrixXd> Cb(nb);
    for (size_t b = 0; b < nb; ++b) Cb[b] = cp.dense[b].C;
    const double CX = inner(Cb, cp.lp.C, it.X, it.xl);
    const double pobj = cp.c.dot(it.y) + cp.c0;
    const double dobj = CX + (neq ? cp.d.dot(it.w) : 0.0) + cp.c0;
    const double xz = inner(it.X, it.xl, it.Z, it.zl);
    const double mu = xz / ntot;
    const double pinf = rp.norm() / (1.0 + normc);
    const double dinf = std::sqrt(sqnorm(Rd, rdl)) / (1.0 + normC);
    const double einf = neq ? re.norm() / (1.0 + normd) : 0.0;
    const double relgap = xz / (1.0 + std::abs(pobj) + std::abs(dobj));
    sol.gap = relgap;

    if (st.verbose) {
      std::fprintf(stderr, "it %3d pobj % .9e dobj % .9e gap %.2e pinf %.2e dinf %.2e einf %.2e\n", iter,
                   pobj, dobj, relgap, pinf, dinf, einf);
    }

    if (relgap < st.tol_gap && pinf < st.tol_feas && dinf < st.tol_feas && einf < st.tol_feas) {
      converged = true;
      break;
    }

    // Farkas ray: X >= 0 with A(X) + B'w ~ 0 and <C,X> + d'w > 0 rules out feasible y with
    // ||y|| < infeasibility_radius.
    const double tray = CX + (neq ? cp.d.dot(it.w) : 0.0);
    if (tray > 0) {
      const double ray_res = (AX + Btw).norm() / tray;
      if (ray_res * st.infeasibility_radius < 1.0) {
        sol.status = SdpStatus::kInfeasible;
        sol.message = "infeasibility certificate found";
        sol.x = it.y.cwiseProduct(cp.scale);
        sol.max_residual = max_violation(problem, sol.x);
        return sol;
      }
    }
    if (pobj < -1e14) {
      why = "objective unbounded below";
      break;
    }

    // Schur complement matrix M_ij = tr(A_i X A_j Z^-1).
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
    for (size_t b = 0; b < nb; ++b) {
      const auto& blk = cp.dense[b];
      const Eigen::MatrixXd& X = it.X[b];
      const Eigen::MatrixXd& Zb = Zi[b];
      const size_t nv = blk.vars.size();
      for (size_t a = 0; a < nv; ++a) {
        const auto& Ea = blk.ents[a];
        for (size_t c = a; c < nv; ++c) {
          const auto& Ec = blk.ents[c];
          double s = 0.0;
          for (const auto& e : Ea)
            for (const auto& f : Ec) s += e.v * f.v * X(e.c, f.r) * Zb(f.c, e.r);
          M(blk.vars[a], blk.vars[c]) += s;
          if (c != a) M(blk.vars[c], blk.vars[a]) += s;
        }
      }
    }
    for (int r = 0; r < cp.lp.m; ++r) {
      const double ratio = it.xl(r) / it.zl(r);
      const auto& row = cp.lp.rows[r];
      for (const auto& [ka, va] : row)
        for (const auto& [kc, vc] : row) M(ka, kc) += va * vc * ratio;
    }
    double maxdiag = std::max(1e-300, M.diagonal().cwiseAbs().maxCoeff());
    for (int k = 0; k < n; ++k) {
      if (!used[k] || M(k, k) == 0.0) M(k, k) = maxdiag;
    }
    // Jacobi-scale M before factoring; its diagonal spans many orders of magnitude
    // late in the iteration.
    const Eigen::VectorXd dsc = M.diagonal().cwiseAbs().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd Ms = dsc.asDiagonal() * M * dsc.asDiagonal();
    double reg = 1e-15;
    Eigen::LLT<Eigen::MatrixXd> mllt_s;
    bool mok = false;
    for (int attempt = 0; attempt < 8 && !mok; ++attempt) {
      Eigen::MatrixXd Mr = Ms;
      Mr.diagonal().array() += reg;
      mllt_s.compute(Mr);
      mok = mllt_s.info() == Eigen::Success;
      reg *= 100.0;
    }
    struct ScaledSolve {
      const Eigen::LLT<Eigen::MatrixXd>& f;
      const Eigen::VectorXd& d;
      Eigen::MatrixXd solve(const Eigen::MatrixXd& r) const {
        return d.asDiagonal() * f.solve(d.asDiagonal() * r);
      }
    } mllt{mllt_s, dsc};
    if (st.verbose) std::fprintf(stderr, "      reg %.3e maxdiag %.3e\n", reg / 100.0, maxdiag);
    if (!mok) {
      why = "Schur complement factorization failed";
      break;
    }
    Eigen::MatrixXd MiBt;
    Eigen::LDLT<Eigen::MatrixXd> sldlt;
    if (neq) {
      MiBt = mllt.solve(cp.B.transpose());
      Eigen::MatrixXd SS = cp.B * MiBt;
      SS.diagonal().array() += 1e-14 * std::max(1.0, SS.diagonal().cwiseAbs().maxCoeff());
      sldlt.compute(SS);
    }

    std::vector<Eigen::MatrixXd> dX(nb), dZ(nb);
    Eigen::VectorXd dxl, dzl, dy, dw;
    auto direction = [&](const std::vector<Eigen::MatrixXd>& G, const Eigen::VectorXd& gl) {
      std::vector<Eigen::MatrixXd> T(nb);
      for (size_t b = 0; b < nb; ++b) T[b] = G[b] - it.X[b] * Rd[b] * Zi[b];
      Eigen::VectorXd tl = gl - it.xl.cwiseProduct(rdl).cwiseQuotient(it.zl);
      Eigen::VectorXd g = amap(cp, T, tl) - cp.c + Btw;
      // Bordered system [M, -B'; B, 0] [dy; dw] = [g; re], solved through the Schur
      // complement of the ridged M and refined against the exact M.
      auto kkt = [&](const Eigen::VectorXd& r1, const Eigen::VectorXd& r2, Eigen::VectorXd& y1, Eigen::VectorXd& w1) {
        if (neq) {
          w1 = sldlt.solve(r2 - cp.B * mllt.solve(r1));
          y1 = mllt.solve(r1 + cp.B.transpose() * w1);
        } else {
          y1 = mllt.solve(r1);
          w1.resize(0);
        }
      };
      kkt(g, re, dy, dw);
      for (int ref = 0; ref < 3; ++ref) {
        Eigen::VectorXd r1 = g - M * dy;
        Eigen::VectorXd r2;
        if (neq) {
          r1 += cp.B.transpose() * dw;
          r2 = re - cp.B * dy;
        }
        Eigen::VectorXd cy, cw;
        kkt(r1, r2, cy, cw);
        dy += cy;
        if (neq) dw += cw;
      }
      aadj(cp, dy, dZ, dzl);
      for (size_t b = 0; b < nb; ++b) {
        dZ[b] += Rd[b];
        Eigen::MatrixXd t = G[b] - it.X[b] - it.X[b] * dZ[b] * Zi[b];
        dX[b] = 0.5 * (t + t.transpose());
      }
      dzl += rdl;
      dxl = gl - it.xl - it.xl.cwiseProduct(dzl).cwiseQuotient(it.zl);
    };
    auto steps = [&](double& ap, double& ad) {
      ap = max_step_lp(it.xl, dxl);
      ad = max_step_lp(it.zl, dzl);
      for (size_t b = 0; b < nb; ++b) {
        ap = std::min(ap, max_step_dense(it.X[b], dX[b]));
        ad = std::min(ad, max_step_dense(it.Z[b], dZ[b]));
      }
    };

    // Predictor.
    std::vector<Eigen::MatrixXd> G(nb);
    for (size_t b = 0; b < nb; ++b) G[b] = Eigen::MatrixXd::Zero(cp.dense[b].n, cp.dense[b].n);
    Eigen::VectorXd gl = Eigen::VectorXd::Zero(cp.lp.m);
    direction(G, gl);
    double ap = 0, ad = 0;
    steps(ap, ad);
    ap = std::min(1.0, ap);
    ad = std::min(1.0, ad);
    double xz_aff = 0.0;
    {
      std::vector<Eigen::MatrixXd> Xa(nb), Za(nb);
      for (size_t b = 0; b < nb; ++b) {
        Xa[b] = it.X[b] + ap * dX[b];
        Za[b] = it.Z[b] + ad * dZ[b];
      }
      xz_aff = inner(Xa, it.xl + ap * dxl, Za, it.zl + ad * dzl);
    }
    double sigma = std::pow(std::max(0.0, xz_aff) / xz, 3.0);
    sigma = std::clamp(sigma, 0.0, 1.0);

    // Corrector with the second-order term.
    for (size_t b = 0; b < nb; ++b) {
      G[b] = (sigma * mu * Eigen::MatrixXd::Identity(cp.dense[b].n, cp.dense[b].n) - dX[b] * dZ[b]) * Zi[b];
    }
    gl = (Eigen::VectorXd::Constant(cp.lp.m, sigma * mu) - dxl.cwiseProduct(dzl)).cwiseQuotient(it.zl);
    direction(G, gl);
    steps(ap, ad);
    ap = std::min(1.0, st.step_fraction * ap);
    ad = std::min(1.0, st.step_fraction * ad);

    for (size_t b = 0; b < nb; ++b) {
      it.X[b] += ap * dX[b];
      it.Z[b] += ad * dZ[b];
    }
    it.xl += ap * dxl;
    it.zl += ad * dzl;
    if (neq) it.w += ap * dw;
    it.y += ad * dy;

    if (st.verbose) {
      const Eigen::VectorXd lin = rp - amap(cp, dX, dxl) - (neq ? Eigen::VectorXd(cp.B.transpose() * dw) : Eigen::VectorXd::Zero(n));
      std::fprintf(stderr, "      ap %.3e ad %.3e sigma %.2e linres %.2e\n", ap, ad, sigma, lin.norm());
    }
    if (ap < 1e-10 && ad < 1e-10) {
      if (++stalled >= 3) {
        why = "step length stalled";
        break;
      }
    } else {
      stalled = 0;
    }
  }

  sol.x = it.y.cwiseProduct(cp.scale);
  sol.objective = cp.c.dot(it.y) + cp.c0;
  sol.max_residual = max_violation(problem, sol.x);
  if (converged && sol.max_residual <= st.tol_psd) {
    sol.status = SdpStatus::kOptimal;
  } else if (sol.max_residual <= st.tol_psd) {
    sol.status = SdpStatus::kFeasible;
    sol.message = converged ? "converged" : why;
  } else {
    sol.status = SdpStatus::kNumericalFailure;
    sol.message = converged ? "converged but re-verification failed" : why;
  }
  return sol;
}

}  // namespace dcmg
