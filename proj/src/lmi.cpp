#include <cmath>

#include "dcmg/lmi.hpp"

namespace dcmg {

Eigen::MatrixXd SupplyRate::full() const {
  const int m = static_cast<int>(X11.rows());
  const int p = static_cast<int>(X22.rows());
  Eigen::MatrixXd out(m + p, m + p);
  out << X11, X12, X21(), X22;
  return out;
}

double SupplyRate::eval(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const {
  return u.dot(X11 * u) + 2.0 * u.dot(X12 * y) + y.dot(X22 * y);
}

SupplyRate SupplyRate::passive(int m) {
  SupplyRate s;
  s.X11 = Eigen::MatrixXd::Zero(m, m);
  s.X12 = 0.5 * Eigen::MatrixXd::Identity(m, m);
  s.X22 = Eigen::MatrixXd::Zero(m, m);
  return s;
}

SupplyRate SupplyRate::ifofp(double nu, double rho, int m) {
  SupplyRate s;
  s.X11 = -nu * Eigen::MatrixXd::Identity(m, m);
  s.X12 = 0.5 * Eigen::MatrixXd::Identity(m, m);
  s.X22 = -rho * Eigen::MatrixXd::Identity(m, m);
  return s;
}

SupplyRate SupplyRate::l2g(double gamma, int m_in, int m_out) {
  SupplyRate s;
  s.X11 = gamma * gamma * Eigen::MatrixXd::Identity(m_in, m_in);
  s.X12 = Eigen::MatrixXd::Zero(m_in, m_out);
  s.X22 = -Eigen::MatrixXd::Identity(m_out, m_out);
  return s;
}

namespace {

void check_dims(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, const Eigen::MatrixXd& C,
                const Eigen::MatrixXd& D, const SupplyRate& X) {
  const auto n = A.rows();
  if (A.cols() != n || B.rows() != n || C.cols() != n || D.rows() != C.rows() || D.cols() != B.cols() ||
      X.X11.rows() != B.cols() || X.X22.rows() != C.rows() || X.X12.rows() != B.cols() ||
      X.X12.cols() != C.rows()) {
    throw std::invalid_argument("dissipativity check: inconsistent dimensions");
  }
}

}  // namespace

Eigen::MatrixXd dissipativity_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                     const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                     const SupplyRate& X, const Eigen::MatrixXd& P) {
  check_dims(A, B, C, D, X);
  const Eigen::MatrixXd PA = P * A;
  const Eigen::MatrixXd m11 = -(PA + PA.transpose()) + C.transpose() * X.X22 * C;
  const Eigen::MatrixXd m12 = -P * B + C.transpose() * X.X21() + C.transpose() * X.X22 * D;
  const Eigen::MatrixXd XD = X.X12 * D;
  const Eigen::MatrixXd m22 = X.X11 + XD + XD.transpose() + D.transpose() * X.X22 * D;
  Eigen::MatrixXd out(m11.rows() + m22.rows(), m11.cols() + m22.cols());
  out << m11, m12, m12.transpose(), m22;
  return 0.5 * (out + out.transpose());
}

DissipativityCheck check_lti_dissipative(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                         const SupplyRate& X, double p_min, const SdpSettings& settings) {
  check_dims(A, B, C, D, X);
  const int n = static_cast<int>(A.rows());
  LmiProblem prob;
  MatrixVar P = prob.add_matrix("P", n, n, true);
  AffineMatrix Pe = P.expr();
  AffineMatrix PA = Pe * A;
  AffineMatrix m11 = -herm(PA) + AffineMatrix::constant(C.transpose() * X.X22 * C);
  AffineMatrix m12 = -(Pe * B) + AffineMatrix::constant(C.transpose() * X.X21() + C.transpose() * X.X22 * D);
  const Eigen::MatrixXd XD = X.X12 * D;
  AffineMatrix m22 = AffineMatrix::constant(X.X11 + XD + XD.transpose() + D.transpose() * X.X22 * D);
  prob.add_psd("storage", Pe, p_min);
  prob.add_psd("dissipation", bmat({{m11, m12}, {m12.transpose(), m22}}));
  SdpSolution sol = solve(prob, settings);

  DissipativityCheck out;
  out.status = sol.status;
  if (sol.x.size() == prob.num_vars()) {
    out.P = sol.value(P);
    out.min_eig = min_eig(dissipativity_matrix(A, B, C, D, X, out.P));
  }
  out.dissipative = sol.ok() && out.min_eig >= -settings.tol_psd && min_eig(out.P) >= p_min - settings.tol_psd;
  return out;
}

SchurStatements schur_oracle(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q, const Eigen::MatrixXd& R,
                             double tol) {
  if (P.rows() != P.cols() || R.rows() != R.cols() || Q.rows() != P.rows() || Q.cols() != R.rows()) {
    throw std::invalid_argument("schur_oracle: shape mismatch");
  }
  SchurStatements s;
  Eigen::MatrixXd M(P.rows() + R.rows(), P.cols() + R.cols());
  M << P, Q, Q.transpose(), R;
  s.block_psd = min_eig(M) >= -tol;

  s.p_and_complement = min_eig(P) > tol && min_eig(R - Q.transpose() * P.llt().solve(Q)) >= -tol;

  // Generalized form: R >= 0, (I - R R^+) Q^T = 0 and P - Q R^+ Q^T >= 0.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(0.5 * (R + R.transpose()));
  const Eigen::VectorXd& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
  for (int i = 0; i < ev.size(); ++i)
    if (ev(i) > tol * scale) inv(i) = 1.0 / ev(i);
  const Eigen::MatrixXd& U = es.eigenvectors();
  const Eigen::MatrixXd Rp = U * inv.asDiagonal() * U.transpose();
  const Eigen::MatrixXd proj = Eigen::MatrixXd::Identity(R.rows(), R.cols()) - R * Rp;
  const bool range_ok = (proj * Q.transpose()).cwiseAbs().maxCoeff() <= std::sqrt(tol) * std::max(1.0, Q.norm());
  s.r_and_complement = (ev.size() == 0 || ev(0) >= -tol) && range_ok &&
                       min_eig(P - Q * Rp * Q.transpose()) >= -tol;
  return s;
}

InvSchurResult inv_schur_oracle(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q, double tol) {
  const Eigen::MatrixXd D = Q.transpose() * P.llt().solve(Q) - (Q.transpose() + Q - P);
  const double scale = std::max(1.0, std::max(P.norm(), Q.norm()));
  const double lmin = min_eig(D);
  if (lmin > tol * scale) return InvSchurResult::kHolds;
  if (lmin >= -tol * scale) return InvSchurResult::kBoundary;
  return InvSchurResult::kFails;
}

double woodbury_oracle(const Eigen::MatrixXd& R, double rho) {
  const int n = static_cast<int>(R.rows());
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(R);
  if (!lu.isInvertible()) throw std::invalid_argument("woodbury_oracle: singular R");
  const Eigen::MatrixXd Ri = lu.inverse();
  const Eigen::MatrixXd lhs = (R + rho * I).fullPivLu().inverse();
  const Eigen::MatrixXd rhs = Ri - rho * Ri * (I + rho * Ri).fullPivLu().inverse() * Ri;
  return (lhs - rhs).norm() / lhs.norm();
}

}  // namespace dcmg
