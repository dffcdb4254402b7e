#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcmg {

struct DGParams {
  int id = 0;
  double R_t = 0.0;  // Ohm
  double L_t = 0.0;  // H
  double C_t = 0.0;  // F
  double P_n = 0.0;  // W
};

struct LineParams {
  int id = 0;
  double R = 0.0;  // Ohm
  double L = 0.0;  // H
  int from_dg = 0;
  int to_dg = 0;
};

struct ZipLoad {
  double Y_L = 0.0;    // S
  double I_bar = 0.0;  // A
  double P_L = 0.0;    // W
};

struct NetworkSpec {
  std::vector<DGParams> dgs;
  std::vector<LineParams> lines;
  std::vector<ZipLoad> loads;  // one per DG
  Eigen::MatrixXd incidence;   // N x L, +1 where a line leaves a DG
  double V_min = 0.0;
  double V_max = 0.0;

  int num_dgs() const { return static_cast<int>(dgs.size()); }
  int num_lines() const { return static_cast<int>(lines.size()); }
};

struct CommEdge {
  int from = 0;  // j
  int to = 0;    // i
  double gain = 0.0;  // k_ij^I
};

struct CommTopology {
  std::vector<CommEdge> edges;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// An input file could not be opened.
class FileError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const { return violations_; }

 private:
  std::vector<std::string> violations_;
};

// Sectioned key/value document shared by network and scenario files.
struct KvEntry {
  std::string key;
  std::string value;
  int line = 0;
};

struct KvSection {
  std::string kind;
  std::string label;
  int line = 0;
  std::vector<KvEntry> entries;
};

std::vector<KvSection> parse_kv_document(const std::string& text);
double parse_number(const std::string& s, int line, const std::string& what);
int parse_index(const std::string& s, int line, const std::string& what);
std::string format_double(double v);
std::string read_text_file(const std::string& path);

NetworkSpec parse_network(const std::string& text);
NetworkSpec load_network(const std::string& path);
std::string serialize_network(const NetworkSpec& spec);

Eigen::MatrixXd incidence_of(const NetworkSpec& spec);
std::vector<std::string> validate(const NetworkSpec& spec);

// True when DGs i and j share at least one line (or i == j).
bool physically_adjacent(const NetworkSpec& spec, int i, int j);

// Lines incident to DG i (the set E_i).
std::vector<int> lines_at(const NetworkSpec& spec, int i);

}  // namespace dcmg
