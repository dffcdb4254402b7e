#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "fixtures.hpp"

using namespace dcmg;
using dcmg::testing::random_matrix;
using dcmg::testing::random_spd;

namespace {

Eigen::MatrixXd random_sym(std::mt19937& rng, int n) {
  Eigen::MatrixXd A = random_matrix(rng, n, n);
  return 0.5 * (A + A.transpose());
}

}  // namespace

TEST_CASE("affine expressions merge duplicates and evaluate") {
  AffineExpr e = AffineExpr::var(2, 3.0) + AffineExpr::var(0, 1.0) + AffineExpr::var(2, -1.0) + 5.0;
  e.normalize();
  REQUIRE(e.terms.size() == 2);
  CHECK(e.terms[0].first == 0);
  CHECK(e.terms[1].second == 2.0);
  Eigen::VectorXd x(3);
  x << 1.0, 10.0, 2.0;
  CHECK(e.eval(x) == 10.0);
  AffineExpr z = AffineExpr::var(1) - AffineExpr::var(1);
  z.normalize();
  CHECK(z.is_constant());
  CHECK((-2.0 * e).eval(x) == -20.0);
}

TEST_CASE("affine matrix algebra matches numeric evaluation") {
  std::mt19937 rng(3);
  LmiProblem p;
  MatrixVar X = p.add_matrix("X", 3, 3, true);
  MatrixVar Y = p.add_matrix("Y", 3, 2, false);
  CHECK(p.num_vars() == 6 + 6);
  Eigen::VectorXd x = random_matrix(rng, p.num_vars(), 1);
  Eigen::MatrixXd Xv = X.expr().eval(x);
  Eigen::MatrixXd Yv = Y.expr().eval(x);
  CHECK(Xv.isApprox(Xv.transpose()));
  Eigen::MatrixXd A = random_matrix(rng, 3, 3);

  CHECK(herm(A * X.expr()).eval(x).isApprox(A * Xv + Xv * A.transpose()));
  CHECK((X.expr() * A).eval(x).isApprox(Xv * A));
  CHECK(Y.expr().transpose().eval(x).isApprox(Yv.transpose()));

  AffineMatrix big = bmat({{X.expr(), Y.expr()}, {Y.expr().transpose(), AffineMatrix::constant(Eigen::Matrix2d::Identity())}});
  CHECK(big.is_symmetric());
  Eigen::MatrixXd want(5, 5);
  want << Xv, Yv, Yv.transpose(), Eigen::Matrix2d::Identity();
  CHECK(big.eval(x).isApprox(want));
  CHECK(big.block(0, 3, 3, 2).eval(x).isApprox(Yv));
  CHECK_FALSE(Y.expr().block(0, 0, 2, 2).is_symmetric());
}

TEST_CASE("solver finds the largest eigenvalue") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Eigen::MatrixXd A = random_sym(rng, 5);
    LmiProblem p;
    int t = p.add_scalar("t");
    p.add_psd("tI - A", AffineMatrix::scaled(AffineExpr::var(t), Eigen::MatrixXd::Identity(5, 5)) -
                             AffineMatrix::constant(A));
    p.minimize(AffineExpr::var(t));
    SdpSolution s = solve(p);
    REQUIRE(s.ok());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
    CHECK(s.objective == doctest::Approx(es.eigenvalues().maxCoeff()).epsilon(1e-7));
  }
}

TEST_CASE("solver handles matrix variables with equalities") {
  std::mt19937 rng(12);
  const Eigen::MatrixXd C = random_sym(rng, 4);
  LmiProblem p;
  MatrixVar X = p.add_matrix("X", 4, 4, true);
  p.add_psd("X", X.expr());
  AffineExpr tr, obj;
  for (int i = 0; i < 4; ++i) {
    tr += X(i, i);
    for (int j = 0; j < 4; ++j) obj += C(i, j) * X(i, j);
  }
  p.add_zero("trace", tr - 1.0);
  p.minimize(obj);
  SdpSolution s = solve(p);
  REQUIRE(s.ok());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  CHECK(s.objective == doctest::Approx(es.eigenvalues().minCoeff()).epsilon(1e-7));
  CHECK(s.value(X).trace() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(max_violation(p, s.x) <= 1e-7);
}

TEST_CASE("scalar bounds and margins") {
  LmiProblem p;
  int x = p.add_scalar("x");
  int y = p.add_scalar("y");
  p.add_ge("x >= 2", AffineExpr::var(x), 2.0);
  p.add_le("y <= -1", AffineExpr::var(y), -1.0);
  p.add_psd("x >= 3", AffineMatrix::scaled(AffineExpr::var(x), Eigen::MatrixXd::Identity(1, 1)), 3.0);
  p.minimize(AffineExpr::var(x) - AffineExpr::var(y));
  SdpSolution s = solve(p);
  REQUIRE(s.ok());
  CHECK(s.value(x) == doctest::Approx(3.0).epsilon(1e-7));
  CHECK(s.value(y) == doctest::Approx(-1.0).epsilon(1e-7));
}

TEST_CASE("contradictory LMIs are reported infeasible") {
  LmiProblem p;
  int x = p.add_scalar("x");
  AffineMatrix M = AffineMatrix::zeros(2, 2);
  M(0, 0) = AffineExpr::var(x);
  M(1, 1) = -AffineExpr::var(x) - 1.0;
  p.add_psd("both", M);
  SdpSolution s = solve(p);
  CHECK(s.status == SdpStatus::kInfeasible);
  CHECK_FALSE(s.ok());
}

TEST_CASE("Lyapunov LMI: feasible iff A is Hurwitz") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 6; ++trial) {
    Eigen::MatrixXd A = random_matrix(rng, 3, 3);
    Eigen::EigenSolver<Eigen::MatrixXd> es(A);
    const double shift = es.eigenvalues().real().maxCoeff();
    const bool stable = trial % 2 == 0;
    A -= (shift + (stable ? 0.5 : -0.5)) * Eigen::MatrixXd::Identity(3, 3);
    LmiProblem p;
    MatrixVar P = p.add_matrix("P", 3, 3, true);
    p.add_psd("P > I", P.expr() - AffineMatrix::constant(Eigen::MatrixXd::Identity(3, 3)));
    p.add_psd("-(A'P + PA) > 0", -herm(A.transpose() * P.expr()), 1e-6);
    SdpSolution s = solve(p);
    if (stable) {
      REQUIRE(s.ok());
      const Eigen::MatrixXd Pv = s.value(P);
      CHECK(min_eig(Pv) >= 1.0 - 1e-7);
      CHECK(min_eig(-(A.transpose() * Pv + Pv * A)) >= -1e-7);
    } else {
      CHECK(s.status == SdpStatus::kInfeasible);
    }
  }
}

TEST_CASE("problem dump round-trips") {
  LmiProblem p;
  MatrixVar X = p.add_matrix("X", 2, 2, true);
  int t = p.add_scalar("t");
  Eigen::Matrix2d A;
  A << 1.0, 0.3, 0.3, 2.0;
  p.add_psd("tI-X", AffineMatrix::scaled(AffineExpr::var(t), Eigen::MatrixXd::Identity(2, 2)) - X.expr());
  p.add_psd("X-A", X.expr() - AffineMatrix::constant(A));
  p.add_ge("t", AffineExpr::var(t), 0.0);
  p.minimize(AffineExpr::var(t));
  const std::string text = p.dump();
  LmiProblem q = LmiProblem::parse_dump(text);
  CHECK(q.num_vars() == p.num_vars());
  CHECK(q.constraints().size() == p.constraints().size());
  CHECK(q.dump() == text);
  CHECK(solve(q).objective == doctest::Approx(solve(p).objective).epsilon(1e-9));
}

TEST_CASE("constraint violation measures the PSD shortfall") {
  LmiProblem p;
  int x = p.add_scalar("x");
  p.add_psd("x I", AffineMatrix::scaled(AffineExpr::var(x), Eigen::MatrixXd::Identity(2, 2)), 1.0);
  Eigen::VectorXd v(1);
  v << 0.25;
  CHECK(constraint_violation(p.constraints()[0], v) == doctest::Approx(0.75));
  v << 2.0;
  CHECK(constraint_violation(p.constraints()[0], v) == 0.0);
}

TEST_CASE("first-order lag: IF-OFP and L2 gain thresholds") {
  // G(s) = 1/(s+1): Re G = |G|^2, so the output index is exactly 1, and ||G||_inf = 1.
  Eigen::MatrixXd A(1, 1), B(1, 1), C(1, 1), D(1, 1);
  A << -1.0;
  B << 1.0;
  C << 1.0;
  D << 0.0;
  CHECK(check_lti_dissipative(A, B, C, D, SupplyRate::passive(1)).dissipative);
  CHECK(check_lti_dissipative(A, B, C, D, SupplyRate::ifofp(0.0, 0.95, 1)).dissipative);
  CHECK_FALSE(check_lti_dissipative(A, B, C, D, SupplyRate::ifofp(0.0, 1.05, 1)).dissipative);
  CHECK(check_lti_dissipative(A, B, C, D, SupplyRate::l2g(1.05, 1, 1)).dissipative);
  CHECK_FALSE(check_lti_dissipative(A, B, C, D, SupplyRate::l2g(0.95, 1, 1)).dissipative);

  auto r = check_lti_dissipative(A, B, C, D, SupplyRate::ifofp(0.0, 0.5, 1));
  REQUIRE(r.dissipative);
  CHECK(min_eig(dissipativity_matrix(A, B, C, D, SupplyRate::ifofp(0.0, 0.5, 1), r.P)) >= -1e-8);
}

TEST_CASE("supply rate forms") {
  Eigen::VectorXd u(1), y(1);
  u << 2.0;
  y << 3.0;
  CHECK(SupplyRate::ifofp(-0.5, 0.25, 1).eval(u, y) == doctest::Approx(0.5 * 4 + 6 - 0.25 * 9));
  CHECK(SupplyRate::l2g(2.0, 1, 1).eval(u, y) == doctest::Approx(4.0 * 4 - 9));
  CHECK(SupplyRate::passive(1).eval(u, y) == doctest::Approx(6.0));
}

TEST_CASE("Schur statements agree on random strictly-definite instances") {
  std::mt19937 rng(21);
  std::uniform_real_distribution<double> shift(-1.0, 1.0);
  int agree = 0;
  for (int k = 0; k < 200; ++k) {
    const int n = 1 + k % 4;
    const int m = 1 + (k / 4) % 3;
    const Eigen::MatrixXd P = random_spd(rng, n);
    const Eigen::MatrixXd Q = random_matrix(rng, n, m);
    double s = shift(rng);
    if (std::abs(s) < 0.05) s = 0.05;
    const Eigen::MatrixXd R = Q.transpose() * P.inverse() * Q + s * Eigen::MatrixXd::Identity(m, m);
    const SchurStatements st = schur_oracle(P, Q, R);
    CHECK(st.block_psd == (s > 0));
    CHECK(st.block_psd == st.p_and_complement);
    CHECK(st.block_psd == st.r_and_complement);
    agree += st.block_psd == st.p_and_complement;
  }
  CHECK(agree == 200);
}

TEST_CASE("inverse Schur bound holds with equality only at Q = P") {
  std::mt19937 rng(22);
  for (int k = 0; k < 100; ++k) {
    const int n = 1 + k % 5;
    const Eigen::MatrixXd P = random_spd(rng, n);
    const Eigen::MatrixXd Q = random_matrix(rng, n, n) + 0.5 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd E = Q - P;
    const double oracle = min_eig(E.transpose() * P.inverse() * E);
    const InvSchurResult r = inv_schur_oracle(P, Q);
    CHECK(r != InvSchurResult::kFails);
    if (oracle > 1e-6) CHECK(r == InvSchurResult::kHolds);
  }
  const Eigen::Matrix2d P = Eigen::Vector2d(2.0, 3.0).asDiagonal();
  CHECK(inv_schur_oracle(P, P) == InvSchurResult::kBoundary);
}

TEST_CASE("Woodbury identity residual is at rounding level") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> rho(0.01, 10.0);
  for (int k = 0; k < 50; ++k) {
    const int n = 1 + k % 6;
    CHECK(woodbury_oracle(random_spd(rng, n), rho(rng)) <= 1e-10);
  }
  CHECK_THROWS_AS(woodbury_oracle(Eigen::MatrixXd::Zero(2, 2), 1.0), std::invalid_argument);
}
