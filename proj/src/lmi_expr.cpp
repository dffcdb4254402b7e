#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "dcmg/lmi.hpp"
#include "dcmg/netspec.hpp"

namespace dcmg {

AffineExpr AffineExpr::var(int index, double coef) {
  AffineExpr e;
  e.terms.emplace_back(index, coef);
  return e;
}

AffineExpr& AffineExpr::operator+=(const AffineExpr& o) {
  constant += o.constant;
  terms.insert(terms.end(), o.terms.begin(), o.terms.end());
  return *this;
}

AffineExpr& AffineExpr::operator-=(const AffineExpr& o) {
  constant -= o.constant;
  for (const auto& [k, c] : o.terms) terms.emplace_back(k, -c);
  return *this;
}

AffineExpr& AffineExpr::operator*=(double s) {
  constant *= s;
  for (auto& t : terms) t.second *= s;
  return *this;
}

void AffineExpr::normalize() {
  if (terms.empty()) return;
  std::sort(terms.begin(), terms.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<int, double>> out;
  for (const auto& t : terms) {
    if (!out.empty() && out.back().first == t.first) {
      out.back().second += t.second;
    } else {
      out.push_back(t);
    }
  }
  out.erase(std::remove_if(out.begin(), out.end(), [](const auto& t) { return t.second == 0.0; }),
            out.end());
  terms = std::move(out);
}

double AffineExpr::eval(const Eigen::VectorXd& x) const {
  double v = constant;
  for (const auto& [k, c] : terms) v += c * x(k);
  return v;
}

AffineExpr operator+(AffineExpr a, const AffineExpr& b) { return a += b; }
AffineExpr operator-(AffineExpr a, const AffineExpr& b) { return a -= b; }
AffineExpr operator-(AffineExpr a) { return a *= -1.0; }
AffineExpr operator*(double s, AffineExpr a) { return a *= s; }
AffineExpr operator*(AffineExpr a, double s) { return a *= s; }

AffineMatrix AffineMatrix::constant(const Eigen::MatrixXd& m) {
  AffineMatrix a(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < a.rows_; ++i)
    for (int j = 0; j < a.cols_; ++j) a(i, j).constant = m(i, j);
  return a;
}

AffineMatrix AffineMatrix::scaled(const AffineExpr& e, const Eigen::MatrixXd& m) {
  AffineMatrix a(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
  for (int i = 0; i < a.rows_; ++i)
    for (int j = 0; j < a.cols_; ++j)
      if (m(i, j) != 0.0) a(i, j) = m(i, j) * e;
  return a;
}

AffineMatrix AffineMatrix::diag(const std::vector<AffineExpr>& d) {
  const int n = static_cast<int>(d.size());
  AffineMatrix a(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = d[i];
  return a;
}

AffineMatrix AffineMatrix::transpose() const {
  AffineMatrix t(cols_, rows_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

AffineMatrix AffineMatrix::block(int r, int c, int nr, int nc) const {
  AffineMatrix b(nr, nc);
  for (int i = 0; i < nr; ++i)
    for (int j = 0; j < nc; ++j) b(i, j) = (*this)(r + i, c + j);
  return b;
}

void AffineMatrix::set_block(int r, int c, const AffineMatrix& b) {
  if (r + b.rows() > rows_ || c + b.cols() > cols_) throw std::out_of_range("set_block outside matrix");
  for (int i = 0; i < b.rows(); ++i)
    for (int j = 0; j < b.cols(); ++j) (*this)(r + i, c + j) = b(i, j);
}

Eigen::MatrixXd AffineMatrix::eval(const Eigen::VectorXd& x) const {
  Eigen::MatrixXd m(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int j = 0; j < cols_; ++j) m(i, j) = (*this)(i, j).eval(x);
  return m;
}

void AffineMatrix::normalize() {
  for (auto& c : cells_) c.normalize();
}

bool AffineMatrix::is_symmetric(double tol) const {
  if (rows_ != cols_) return false;
  for (int i = 0; i < rows_; ++i) {
    for (int j = i + 1; j < cols_; ++j) {
      AffineExpr d = (*this)(i, j) - (*this)(j, i);
      d.normalize();
      double scale = 1.0 + std::abs((*this)(i, j).constant);
      if (std::abs(d.constant) > tol * scale) return false;
      for (const auto& t : d.terms)
        if (std::abs(t.second) > tol) return false;
    }
  }
  return true;
}

AffineMatrix& AffineMatrix::operator+=(const AffineMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("AffineMatrix size mismatch in +");
  for (size_t k = 0; k < cells_.size(); ++k) cells_[k] += o.cells_[k];
  return *this;
}

AffineMatrix& AffineMatrix::operator-=(const AffineMatrix& o) {
  if (o.rows_ != rows_ || o.cols_ != cols_) throw std::invalid_argument("AffineMatrix size mismatch in -");
  for (size_t k = 0; k < cells_.size(); ++k) cells_[k] -= o.cells_[k];
  return *this;
}

AffineMatrix& AffineMatrix::operator*=(double s) {
  for (auto& c : cells_) c *= s;
  return *this;
}

AffineMatrix operator+(AffineMatrix a, const AffineMatrix& b) { return a += b; }
AffineMatrix operator-(AffineMatrix a, const AffineMatrix& b) { return a -= b; }
AffineMatrix operator-(AffineMatrix a) { return a *= -1.0; }
AffineMatrix operator*(double s, AffineMatrix a) { return a *= s; }

AffineMatrix operator*(const Eigen::MatrixXd& m, const AffineMatrix& a) {
  if (m.cols() != a.rows()) throw std::invalid_argument("matrix * AffineMatrix size mismatch");
  AffineMatrix out(static_cast<int>(m.rows()), a.cols());
  for (int i = 0; i < m.rows(); ++i)
    for (int k = 0; k < m.cols(); ++k) {
      if (m(i, k) == 0.0) continue;
      for (int j = 0; j < a.cols(); ++j) out(i, j) += m(i, k) * a(k, j);
    }
  out.normalize();
  return out;
}

AffineMatrix operator*(const AffineMatrix& a, const Eigen::MatrixXd& m) {
  return (m.transpose() * a.transpose()).transpose();
}

AffineMatrix herm(const AffineMatrix& a) { return a + a.transpose(); }

AffineMatrix bmat(const std::vector<std::vector<AffineMatrix>>& grid) {
  if (grid.empty()) return AffineMatrix();
  const size_t nr = grid.size();
  const size_t nc = grid[0].size();
  std::vector<int> heights(nr), widths(nc);
  for (size_t i = 0; i < nr; ++i) {
    if (grid[i].size() != nc) throw std::invalid_argument("bmat: ragged block grid");
    heights[i] = grid[i][0].rows();
  }
  for (size_t j = 0; j < nc; ++j) widths[j] = grid[0][j].cols();
  int total_r = 0, total_c = 0;
  for (int h : heights) total_r += h;
  for (int w : widths) total_c += w;
  AffineMatrix out(total_r, total_c);
  int r = 0;
  for (size_t i = 0; i < nr; ++i) {
    int c = 0;
    for (size_t j = 0; j < nc; ++j) {
      const auto& b = grid[i][j];
      if (b.rows() != heights[i] || b.cols() != widths[j])
        throw std::invalid_argument("bmat: block size mismatch");
      out.set_block(r, c, b);
      c += widths[j];
    }
    r += heights[i];
  }
  return out;
}

AffineMatrix MatrixVar::expr() const {
  AffineMatrix a(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) a(i, j) = AffineExpr::var(at(i, j));
  return a;
}

int LmiProblem::add_scalar(const std::string& name) {
  var_names_.push_back(name);
  return static_cast<int>(var_names_.size()) - 1;
}

MatrixVar LmiProblem::add_matrix(const std::string& name, int rows, int cols, bool symmetric) {
  if (symmetric && rows != cols) throw std::invalid_argument("symmetric matrix variable must be square");
  MatrixVar v;
  v.name = name;
  v.rows = rows;
  v.cols = cols;
  v.symmetric = symmetric;
  v.index.assign(rows * cols, -1);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) {
      if (symmetric && j < i) {
        v.index[i * cols + j] = v.index[j * cols + i];
        continue;
      }
      v.index[i * cols + j] =
          add_scalar(name + "[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
  }
  matrix_vars_.push_back(v);
  return v;
}

void LmiProblem::add_psd(const std::string& name, const AffineMatrix& expr, double margin) {
  if (expr.rows() == 0 && expr.cols() == 0) return;
  AffineMatrix e = expr;
  e.normalize();
  if (!e.is_symmetric()) throw std::invalid_argument("constraint '" + name + "' is not symmetric");
  constraints_.push_back({name, ConstraintKind::kPsd, std::move(e), margin});
}

void LmiProblem::add_zero(const std::string& name, const AffineMatrix& expr) {
  AffineMatrix e = expr;
  e.normalize();
  constraints_.push_back({name, ConstraintKind::kZero, std::move(e), 0.0});
}

void LmiProblem::add_zero(const std::string& name, const AffineExpr& expr) {
  AffineMatrix m(1, 1);
  m(0, 0) = expr;
  add_zero(name, m);
}

void LmiProblem::add_ge(const std::string& name, const AffineExpr& expr, double rhs) {
  AffineMatrix m(1, 1);
  m(0, 0) = expr;
  m.normalize();
  constraints_.push_back({name, ConstraintKind::kGe, std::move(m), rhs});
}

void LmiProblem::add_le(const std::string& name, const AffineExpr& expr, double rhs) {
  AffineMatrix m(1, 1);
  m(0, 0) = expr;
  m.normalize();
  constraints_.push_back({name, ConstraintKind::kLe, std::move(m), rhs});
}

void LmiProblem::minimize(const AffineExpr& objective) {
  objective_ = objective;
  objective_.normalize();
}

int LmiProblem::count(ConstraintKind kind) const {
  return static_cast<int>(std::count_if(constraints_.begin(), constraints_.end(),
                                        [kind](const LmiConstraint& c) { return c.kind == kind; }));
}

namespace {

const char* kind_name(ConstraintKind k) {
  switch (k) {
    case ConstraintKind::kPsd: return "psd";
    case ConstraintKind::kZero: return "zero";
    case ConstraintKind::kGe: return "ge";
    case ConstraintKind::kLe: return "le";
  }
  return "?";
}

ConstraintKind kind_from(const std::string& s, int line) {
  if (s == "psd") return ConstraintKind::kPsd;
  if (s == "zero") return ConstraintKind::kZero;
  if (s == "ge") return ConstraintKind::kGe;
  if (s == "le") return ConstraintKind::kLe;
  throw ParseError(line, "unknown constraint kind '" + s + "'");
}

void write_expr(std::ostream& o, const AffineExpr& e) {
  o << format_double(e.constant) << " " << e.terms.size();
  for (const auto& [k, c] : e.terms) o << " " << k << " " << format_double(c);
}

AffineExpr read_expr(std::istringstream& in, int line) {
  std::string tok;
  AffineExpr e;
  if (!(in >> tok)) throw ParseError(line, "missing constant");
  e.constant = parse_number(tok, line, "constant");
  size_t n = 0;
  if (!(in >> n)) throw ParseError(line, "missing term count");
  for (size_t t = 0; t < n; ++t) {
    int k = 0;
    if (!(in >> k >> tok)) throw ParseError(line, "truncated term list");
    e.terms.emplace_back(k, parse_number(tok, line, "coefficient"));
  }
  return e;
}

std::string checked_name(const std::string& s) {
  if (s.find_first_of(" \t\n") != std::string::npos)
    throw std::invalid_argument("names in a dump cannot contain whitespace: '" + s + "'");
  return s;
}

}  // namespace

std::string LmiProblem::dump() const {
  std::ostringstream o;
  o << "lmi-problem 1\n";
  o << "vars " << var_names_.size() << "\n";
  for (size_t k = 0; k < var_names_.size(); ++k) o << "var " << k << " " << checked_name(var_names_[k]) << "\n";
  for (const auto& m : matrix_vars_) {
    o << "matvar " << checked_name(m.name) << " " << m.rows << " " << m.cols << " " << (m.symmetric ? 1 : 0);
    for (int k : m.index) o << " " << k;
    o << "\n";
  }
  o << "objective ";
  write_expr(o, objective_);
  o << "\n";
  for (const auto& c : constraints_) {
    o << "constraint " << kind_name(c.kind) << " " << checked_name(c.name) << " " << c.expr.rows() << " "
      << c.expr.cols() << " " << format_double(c.bound) << "\n";
    for (int i = 0; i < c.expr.rows(); ++i) {
      for (int j = 0; j < c.expr.cols(); ++j) {
        const auto& e = c.expr(i, j);
        if (e.constant == 0.0 && e.terms.empty()) continue;
        o << "entry " << i << " " << j << " ";
        write_expr(o, e);
        o << "\n";
      }
    }
    o << "end\n";
  }
  return o.str();
}

LmiProblem LmiProblem::parse_dump(const std::string& text) {
  LmiProblem p;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  LmiConstraint* open = nullptr;
  while (std::getline(in, raw)) {
    ++line;
    if (raw.empty()) continue;
    std::istringstream ls(raw);
    std::string tag;
    ls >> tag;
    if (tag == "lmi-problem") {
      int version = 0;
      ls >> version;
      if (version != 1) throw ParseError(line, "unsupported dump version");
    } else if (tag == "vars") {
      size_t n = 0;
      ls >> n;
      p.var_names_.reserve(n);
    } else if (tag == "var") {
      size_t k = 0;
      std::string name;
      if (!(ls >> k >> name) || k != p.var_names_.size()) throw ParseError(line, "bad var line");
      p.var_names_.push_back(name);
    } else if (tag == "matvar") {
      MatrixVar m;
      int sym = 0;
      if (!(ls >> m.name >> m.rows >> m.cols >> sym)) throw ParseError(line, "bad matvar line");
      m.symmetric = sym != 0;
      m.index.resize(m.rows * m.cols);
      for (auto& k : m.index)
        if (!(ls >> k)) throw ParseError(line, "truncated matvar index list");
      p.matrix_vars_.push_back(m);
    } else if (tag == "objective") {
      p.objective_ = read_expr(ls, line);
    } else if (tag == "constraint") {
      std::string kind, name, bound;
      int r = 0, c = 0;
      if (!(ls >> kind >> name >> r >> c >> bound)) throw ParseError(line, "bad constraint header");
      p.constraints_.push_back({name, kind_from(kind, line), AffineMatrix(r, c), parse_number(bound, line, "bound")});
      open = &p.constraints_.back();
    } else if (tag == "entry") {
      if (!open) throw ParseError(line, "entry outside constraint");
      int i = 0, j = 0;
      if (!(ls >> i >> j) || i < 0 || j < 0 || i >= open->expr.rows() || j >= open->expr.cols())
        throw ParseError(line, "bad entry position");
      open->expr(i, j) = read_expr(ls, line);
    } else if (tag == "end") {
      open = nullptr;
    } else {
      throw ParseError(line, "unknown record '" + tag + "'");
    }
  }
  return p;
}

Eigen::MatrixXd SdpSolution::value(const MatrixVar& v) const {
  Eigen::MatrixXd m(v.rows, v.cols);
  for (int i = 0; i < v.rows; ++i)
    for (int j = 0; j < v.cols; ++j) m(i, j) = x(v.at(i, j));
  return m;
}

}  // namespace dcmg
