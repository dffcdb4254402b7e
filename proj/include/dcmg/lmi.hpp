#pragma once

#include <Eigen/Dense>
#include <string>
#include <utility>
#include <vector>

namespace dcmg {

using SymMatrix = Eigen::MatrixXd;

// Scalar affine function of the decision variables: constant + sum coef * x[var].
struct AffineExpr {
  double constant = 0.0;
  std::vector<std::pair<int, double>> terms;

  AffineExpr() = default;
  AffineExpr(double c) : constant(c) {}  // NOLINT: implicit from constants is intended
  static AffineExpr var(int index, double coef = 1.0);

  AffineExpr& operator+=(const AffineExpr& o);
  AffineExpr& operator-=(const AffineExpr& o);
  AffineExpr& operator*=(double s);

  // Merge duplicate variables, drop exact zeros, sort by index.
  void normalize();
  bool is_constant() const { return terms.empty(); }
  double eval(const Eigen::VectorXd& x) const;
};

AffineExpr operator+(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a, const AffineExpr& b);
AffineExpr operator-(AffineExpr a);
AffineExpr operator*(double s, AffineExpr a);
AffineExpr operator*(AffineExpr a, double s);

class AffineMatrix {
 public:
  AffineMatrix() = default;
  AffineMatrix(int rows, int cols) : rows_(rows), cols_(cols), cells_(rows * cols) {}

  static AffineMatrix constant(const Eigen::MatrixXd& m);
  static AffineMatrix zeros(int rows, int cols) { return AffineMatrix(rows, cols); }
  // e * M, each entry M(i,j) scales the scalar expression e.
  static AffineMatrix scaled(const AffineExpr& e, const Eigen::MatrixXd& m);
  static AffineMatrix diag(const std::vector<AffineExpr>& d);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  AffineExpr& operator()(int i, int j) { return cells_[i * cols_ + j]; }
  const AffineExpr& operator()(int i, int j) const { return cells_[i * cols_ + j]; }

  AffineMatrix transpose() const;
  AffineMatrix block(int r, int c, int nr, int nc) const;
  void set_block(int r, int c, const AffineMatrix& b);
  Eigen::MatrixXd eval(const Eigen::VectorXd& x) const;
  void normalize();
  // Structural symmetry: cell (i,j) and (j,i) carry the same affine function.
  bool is_symmetric(double tol = 1e-12) const;

  AffineMatrix& operator+=(const AffineMatrix& o);
  AffineMatrix& operator-=(const AffineMatrix& o);
  AffineMatrix& operator*=(double s);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<AffineExpr> cells_;
};

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b);
AffineMatrix operator-(AffineMatrix a);
AffineMatrix operator*(double s, AffineMatrix a);
AffineMatrix operator*(const Eigen::MatrixXd& m, const AffineMatrix& a);
AffineMatrix operator*(const AffineMatrix& a, const Eigen::MatrixXd& m);
// H(X) = X + X^T
AffineMatrix herm(const AffineMatrix& a);
// Block matrix from a grid of blocks; each row of blocks must agree in height, each column in width.
AffineMatrix bmat(const std::vector<std::vector<AffineMatrix>>& grid);

struct MatrixVar {
  std::string name;
  int rows = 0;
  int cols = 0;
  bool symmetric = false;
  std::vector<int> index;  // row-major, symmetric entries share one variable

  int at(int i, int j) const { return index[i * cols + j]; }
  AffineMatrix expr() const;
  AffineExpr operator()(int i, int j) const { return AffineExpr::var(at(i, j)); }
};

enum class ConstraintKind { kPsd, kZero, kGe, kLe };

struct LmiConstraint {
  std::string name;
  ConstraintKind kind = ConstraintKind::kPsd;
  AffineMatrix expr;
  double bound = 0.0;  // margin for kPsd (expr >= bound*I), right-hand side for kGe/kLe
};

class LmiProblem {
 public:
  int add_scalar(const std::string& name);
  MatrixVar add_matrix(const std::string& name, int rows, int cols, bool symmetric);

  // expr >= margin * I; expr must be structurally symmetric.
  void add_psd(const std::string& name, const AffineMatrix& expr, double margin = 0.0);
  void add_zero(const std::string& name, const AffineMatrix& expr);
  void add_zero(const std::string& name, const AffineExpr& expr);
  void add_ge(const std::string& name, const AffineExpr& expr, double rhs);
  void add_le(const std::string& name, const AffineExpr& expr, double rhs);
  void minimize(const AffineExpr& objective);

  int num_vars() const { return static_cast<int>(var_names_.size()); }
  const std::vector<std::string>& var_names() const { return var_names_; }
  const std::vector<MatrixVar>& matrix_vars() const { return matrix_vars_; }
  const std::vector<LmiConstraint>& constraints() const { return constraints_; }
  const AffineExpr& objective() const { return objective_; }
  int count(ConstraintKind kind) const;

  // Plain-text listing: one sparse triplet per nonzero cell of every constraint.
  std::string dump() const;
  static LmiProblem parse_dump(const std::string& text);

 private:
  std::vector<std::string> var_names_;
  std::vector<MatrixVar> matrix_vars_;
  std::vector<LmiConstraint> constraints_;
  AffineExpr objective_;
};

enum class SdpStatus { kOptimal, kFeasible, kInfeasible, kNumericalFailure };
const char* to_string(SdpStatus s);

struct SdpSettings {
  int max_iter = 150;
  double tol_gap = 1e-8;
  double tol_feas = 1e-9;
  double tol_psd = 1e-7;
  double step_fraction = 0.95;
  double infeasibility_radius = 1e8;
  bool verbose = false;
};

struct SdpSolution {
  SdpStatus status = SdpStatus::kNumericalFailure;
  Eigen::VectorXd x;
  double objective = 0.0;
  double max_residual = 0.0;
  double gap = 0.0;
  int iterations = 0;
  std::string message;

  bool ok() const { return status == SdpStatus::kOptimal || status == SdpStatus::kFeasible; }
  double value(int index) const { return x(index); }
  double value(const AffineExpr& e) const { return e.eval(x); }
  Eigen::MatrixXd value(const MatrixVar& v) const;
  Eigen::MatrixXd value(const AffineMatrix& m) const { return m.eval(x); }
};

SdpSolution solve(const LmiProblem& problem, const SdpSettings& settings = {});

// Amount by which x violates a constraint (0 when satisfied). PSD constraints use the
// smallest eigenvalue of the evaluated expression minus the margin.
double constraint_violation(const LmiConstraint& c, const Eigen::VectorXd& x);
double max_violation(const LmiProblem& problem, const Eigen::VectorXd& x);

double min_eig(const Eigen::MatrixXd& m);

// Quadratic supply rate s(u, y) = [u; y]^T [X11 X12; X12^T X22] [u; y].
struct SupplyRate {
  Eigen::MatrixXd X11;
  Eigen::MatrixXd X12;
  Eigen::MatrixXd X22;

  Eigen::MatrixXd X21() const { return X12.transpose(); }
  Eigen::MatrixXd full() const;
  double eval(const Eigen::VectorXd& u, const Eigen::VectorXd& y) const;

  static SupplyRate passive(int m);
  // IF-OFP(nu, rho): X11 = -nu I, X12 = I/2, X22 = -rho I.
  static SupplyRate ifofp(double nu, double rho, int m);
  // L2G(gamma): X11 = gamma^2 I, X12 = 0, X22 = -I.
  static SupplyRate l2g(double gamma, int m_in, int m_out);
};

struct PassivityCertificate {
  enum class Kind { kDg, kLine };
  double nu = 0.0;
  double rho = 0.0;
  Eigen::MatrixXd P;
  Kind kind = Kind::kDg;
};

struct DissipativityCheck {
  bool dissipative = false;
  Eigen::MatrixXd P;
  double min_eig = 0.0;  // smallest eigenvalue of the certificate LMI at the returned P
  SdpStatus status = SdpStatus::kNumericalFailure;
};

// Searches P > 0 with
// [ -H(PA) + C^T X22 C    -PB + C^T X21 + C^T X22 D      ]
// [        *              X11 + H(X12 D) + D^T X22 D     ] >= 0.
DissipativityCheck check_lti_dissipative(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                         const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                         const SupplyRate& X, double p_min = 1e-6,
                                         const SdpSettings& settings = {});

// The certificate LMI evaluated at a given P.
Eigen::MatrixXd dissipativity_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                                     const Eigen::MatrixXd& C, const Eigen::MatrixXd& D,
                                     const SupplyRate& X, const Eigen::MatrixXd& P);

struct SchurStatements {
  bool block_psd = false;       // [P Q; Q^T R] >= 0
  bool p_and_complement = false;  // P > 0 and R - Q^T P^-1 Q >= 0
  bool r_and_complement = false;  // R > 0 and P - Q R^-1 Q^T >= 0, or its pseudo-inverse form
};
SchurStatements schur_oracle(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
                             const Eigen::MatrixXd& R, double tol = 1e-9);

enum class InvSchurResult { kHolds, kBoundary, kFails };
// Q^T P^-1 Q - (Q^T + Q - P) > 0, which is (Q - P)^T P^-1 (Q - P) > 0.
InvSchurResult inv_schur_oracle(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Q,
                                double tol = 1e-10);

// || (R + rho I)^-1 - (R^-1 - rho R^-1 (I + rho R^-1)^-1 R^-1) ||_F / ||(R + rho I)^-1||_F
double woodbury_oracle(const Eigen::MatrixXd& R, double rho);

}  // namespace dcmg
