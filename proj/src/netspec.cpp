#include "dcmg/netspec.hpp"

#include "kv_reader.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace dcmg {

namespace {

std::string trim(const std::string& s) {
  const char* ws = " \t\r\n";
  auto b = s.find_first_not_of(ws);
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : std::runtime_error("invalid network: " + join(violations, "; ")),
      violations_(std::move(violations)) {}

std::vector<KvSection> parse_kv_document(const std::string& text) {
  std::vector<KvSection> out;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError(line_no, "unterminated section header");
      std::istringstream hs(line.substr(1, line.size() - 2));
      KvSection s;
      s.line = line_no;
      hs >> s.kind;
      hs >> s.label;
      std::string extra;
      if (s.kind.empty()) throw ParseError(line_no, "empty section header");
      if (hs >> extra) throw ParseError(line_no, "malformed section header");
      out.push_back(std::move(s));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError(line_no, "expected 'key = value'");
    if (out.empty()) throw ParseError(line_no, "entry outside of any section");
    KvEntry e{trim(line.substr(0, eq)), trim(line.substr(eq + 1)), line_no};
    if (e.key.empty() || e.value.empty()) throw ParseError(line_no, "expected 'key = value'");
    out.back().entries.push_back(std::move(e));
  }
  return out;
}

double parse_number(const std::string& s, int line, const std::string& what) {
  double v = 0.0;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (!s.empty() && *b == '+') ++b;
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) {
    throw ParseError(line, what + ": not a number '" + s + "'");
  }
  return v;
}

int parse_index(const std::string& s, int line, const std::string& what) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(line, what + ": not an integer '" + s + "'");
  }
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FileError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

NetworkSpec parse_network(const std::string& text) {
  auto sections = parse_kv_document(text);
  std::map<int, std::pair<DGParams, ZipLoad>> dgs;
  std::map<int, std::pair<LineParams, int>> lines;  // label -> (params, header line)
  bool have_bounds = false;
  NetworkSpec spec;

  for (const auto& s : sections) {
    KeyReader r(s);
    if (s.kind == "dg" || s.kind == "line") {
      if (s.label.empty()) throw ParseError(s.line, s.kind + " section needs an index");
      int k = parse_index(s.label, s.line, s.kind + " index");
      if (k < 1) throw ParseError(s.line, s.kind + " index must be >= 1");
      if (s.kind == "dg") {
        if (dgs.count(k)) throw ParseError(s.line, "dg " + s.label + " defined twice");
        r.allow({"r_t", "l_t", "c_t", "p_n", "y_l", "i_bar", "p_l"});
        DGParams d;
        d.R_t = r.number("r_t");
        d.L_t = r.number("l_t");
        d.C_t = r.number("c_t");
        d.P_n = r.number("p_n");
        ZipLoad z;
        z.Y_L = r.number("y_l");
        z.I_bar = r.number("i_bar");
        z.P_L = r.number("p_l");
        dgs[k] = {d, z};
      } else {
        if (lines.count(k)) throw ParseError(s.line, "line " + s.label + " defined twice");
        r.allow({"r", "l", "from", "to"});
        LineParams l;
        l.R = r.number("r");
        l.L = r.number("l");
        l.from_dg = r.index("from");
        l.to_dg = r.index("to");
        lines[k] = {l, s.line};
      }
    } else if (s.kind == "bounds") {
      if (have_bounds) throw ParseError(s.line, "bounds defined twice");
      r.allow({"v_min", "v_max"});
      spec.V_min = r.number("v_min");
      spec.V_max = r.number("v_max");
      have_bounds = true;
    } else {
      throw ParseError(s.line, "unknown section '" + s.kind + "'");
    }
    r.finish();
  }
  if (!have_bounds) throw ParseError(0, "missing [bounds] section");
  if (dgs.empty()) throw ParseError(0, "no [dg] sections");

  // File labels are 1-based; the k-th smallest label becomes index k-1.
  std::map<int, int> dg_index;
  for (auto& [label, v] : dgs) {
    int idx = static_cast<int>(spec.dgs.size());
    dg_index[label] = idx;
    v.first.id = idx;
    spec.dgs.push_back(v.first);
    spec.loads.push_back(v.second);
  }
  std::vector<std::string> bad;
  for (auto& [label, v] : lines) {
    LineParams l = v.first;
    l.id = static_cast<int>(spec.lines.size());
    auto f = dg_index.find(l.from_dg);
    auto t = dg_index.find(l.to_dg);
    if (f == dg_index.end() || t == dg_index.end()) {
      bad.push_back("line " + std::to_string(label) + ": unknown endpoint");
      l.from_dg = l.to_dg = -1;
    } else {
      l.from_dg = f->second;
      l.to_dg = t->second;
    }
    spec.lines.push_back(l);
  }
  if (!bad.empty()) throw ValidationError(bad);
  spec.incidence = incidence_of(spec);
  auto violations = validate(spec);
  if (!violations.empty()) throw ValidationError(violations);
  return spec;
}

NetworkSpec load_network(const std::string& path) { return parse_network(read_text_file(path)); }

std::string serialize_network(const NetworkSpec& spec) {
  std::ostringstream o;
  o << "[bounds]\n";
  o << "v_min = " << format_double(spec.V_min) << "\n";
  o << "v_max = " << format_double(spec.V_max) << "\n";
  for (int i = 0; i < spec.num_dgs(); ++i) {
    const auto& d = spec.dgs[i];
    const auto& z = spec.loads[i];
    o << "\n[dg " << i + 1 << "]\n";
    o << "r_t = " << format_double(d.R_t) << "\n";
    o << "l_t = " << format_double(d.L_t) << "\n";
    o << "c_t = " << format_double(d.C_t) << "\n";
    o << "p_n = " << format_double(d.P_n) << "\n";
    o << "y_l = " << format_double(z.Y_L) << "\n";
    o << "i_bar = " << format_double(z.I_bar) << "\n";
    o << "p_l = " << format_double(z.P_L) << "\n";
  }
  for (int l = 0; l < spec.num_lines(); ++l) {
    const auto& ln = spec.lines[l];
    o << "\n[line " << l + 1 << "]\n";
    o << "r = " << format_double(ln.R) << "\n";
    o << "l = " << format_double(ln.L) << "\n";
    o << "from = " << ln.from_dg + 1 << "\n";
    o << "to = " << ln.to_dg + 1 << "\n";
  }
  return o.str();
}

Eigen::MatrixXd incidence_of(const NetworkSpec& spec) {
  const int n = spec.num_dgs();
  const int m = spec.num_lines();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, m);
  for (int l = 0; l < m; ++l) {
    const auto& ln = spec.lines[l];
    if (ln.from_dg >= 0 && ln.from_dg < n) B(ln.from_dg, l) += 1.0;
    if (ln.to_dg >= 0 && ln.to_dg < n) B(ln.to_dg, l) -= 1.0;
  }
  return B;
}

std::vector<std::string> validate(const NetworkSpec& spec) {
  std::vector<std::string> v;
  const int n = spec.num_dgs();
  const int m = spec.num_lines();
  auto dg = [](int i) { return "dg " + std::to_string(i + 1) + ": "; };
  auto line = [](int l) { return "line " + std::to_string(l + 1) + ": "; };
  if (n == 0) v.push_back("no DGs");
  if (static_cast<int>(spec.loads.size()) != n) v.push_back("exactly one load per DG required");
  for (int i = 0; i < n; ++i) {
    const auto& d = spec.dgs[i];
    if (!(d.R_t > 0)) v.push_back(dg(i) + "R_t must be > 0");
    if (!(d.L_t > 0)) v.push_back(dg(i) + "L_t must be > 0");
    if (!(d.C_t > 0)) v.push_back(dg(i) + "C_t must be > 0");
    if (!(d.P_n > 0)) v.push_back(dg(i) + "P_n must be > 0");
    if (i < static_cast<int>(spec.loads.size())) {
      const auto& z = spec.loads[i];
      if (!(z.Y_L >= 0)) v.push_back(dg(i) + "Y_L must be >= 0");
      if (!(z.I_bar >= 0)) v.push_back(dg(i) + "I_bar must be >= 0");
      if (!(z.P_L >= 0)) v.push_back(dg(i) + "P_L must be >= 0");
    }
  }
  bool endpoints_ok = true;
  for (int l = 0; l < m; ++l) {
    const auto& ln = spec.lines[l];
    if (!(ln.R > 0)) v.push_back(line(l) + "R must be > 0");
    if (!(ln.L > 0)) v.push_back(line(l) + "L must be > 0");
    if (ln.from_dg < 0 || ln.from_dg >= n || ln.to_dg < 0 || ln.to_dg >= n) {
      v.push_back(line(l) + "unknown endpoint");
      endpoints_ok = false;
    } else if (ln.from_dg == ln.to_dg) {
      v.push_back(line(l) + "from and to must differ");
      endpoints_ok = false;
    }
  }
  if (!(spec.V_min > 0 && spec.V_min < spec.V_max)) v.push_back("bounds: need 0 < v_min < v_max");

  if (spec.incidence.rows() != n || spec.incidence.cols() != m) {
    v.push_back("incidence has wrong shape");
  } else if (endpoints_ok) {
    for (int l = 0; l < m; ++l) {
      for (int i = 0; i < n; ++i) {
        double want = (spec.lines[l].from_dg == i ? 1.0 : 0.0) - (spec.lines[l].to_dg == i ? 1.0 : 0.0);
        if (spec.incidence(i, l) != want) {
          v.push_back(line(l) + "incidence column inconsistent with from/to");
          break;
        }
      }
    }
  }

  if (endpoints_ok && n > 0) {
    std::vector<int> parent(n);
    std::iota(parent.begin(), parent.end(), 0);
    auto root = [&](int a) {
      while (parent[a] != a) a = parent[a] = parent[parent[a]];
      return a;
    };
    for (const auto& ln : spec.lines) parent[root(ln.from_dg)] = root(ln.to_dg);
    for (int i = 1; i < n; ++i) {
      if (root(i) != root(0)) {
        v.push_back("graph not connected");
        break;
      }
    }
  }
  return v;
}

bool physically_adjacent(const NetworkSpec& spec, int i, int j) {
  if (i == j) return true;
  for (const auto& ln : spec.lines) {
    if ((ln.from_dg == i && ln.to_dg == j) || (ln.from_dg == j && ln.to_dg == i)) return true;
  }
  return false;
}

std::vector<int> lines_at(const NetworkSpec& spec, int i) {
  std::vector<int> out;
  for (int l = 0; l < spec.num_lines(); ++l) {
    if (spec.lines[l].from_dg == i || spec.lines[l].to_dg == i) out.push_back(l);
  }
  return out;
}

}  // namespace dcmg
