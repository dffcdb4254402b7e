#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

#include "dcmg/lmi.hpp"
#include "dcmg/local_synth.hpp"
#include "dcmg/netspec.hpp"

namespace dcmg {

enum class GraphMode { kHard, kSoft };
const char* to_string(GraphMode m);
GraphMode parse_graph_mode(const std::string& s);

struct GraphConstraintMode {
  GraphMode mode = GraphMode::kHard;
  double penalty = 5.0;  // soft mode: cost of a link between non-adjacent DGs
};

struct GlobalParams {
  GraphConstraintMode graph;
  double c_adjacent = 1.0;
  double c1 = 1.0;
  double alpha = 1e-3;
  double eta = 1e-2;
  double gamma_bar = 10.0;
  double eps = 1e-6;
  bool full_slack = true;  // dense S; false restricts S to a diagonal
  double tau_rel = 1e-6;
  double tau_abs = 1e-6;
  Eigen::MatrixXd costs;  // optional N x N override of c_ij
  SdpSettings sdp;
};

// Passivity indices consumed by the global stage.
struct LocalIndices {
  Eigen::VectorXd nu, rho;          // per DG
  Eigen::VectorXd nu_bar, rho_bar;  // per line
};
LocalIndices indices_of(const LocalDesign& local);

class GlobalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Sign requirements on the local indices; empty when all hold.
std::vector<std::string> check_index_signs(const LocalIndices& idx);

// The 4(3N + L) square matrix W at given multipliers, consensus matrix q (N x N,
// entry (i,j) sits at Q(3i+1, 3j+1)) and gamma~. Returned symmetrized.
Eigen::MatrixXd assemble_W(const NetworkSpec& spec, const LocalIndices& idx, const Eigen::VectorXd& p,
                           const Eigen::VectorXd& p_bar, const Eigen::MatrixXd& q, double gamma_tilde);

// Link cost matrix c_ij for the given mode (hard mode ignores off-graph entries).
Eigen::MatrixXd link_costs(const NetworkSpec& spec, const GlobalParams& params);

struct GlobalProblem {
  LmiProblem problem;
  LocalIndices idx;
  std::vector<int> p, p_bar;
  int gamma = -1;
  MatrixVar q;  // N x N
  MatrixVar t;  // |q| epigraph
  std::vector<int> slack;  // S entries, upper triangle row-major (or the diagonal)
  int slack_dim = 0;
  std::vector<std::pair<int, int>> pinned;  // (i, j) fixed to zero in hard mode
};

GlobalProblem assemble_global_problem(const NetworkSpec& spec, const LocalIndices& idx, const GlobalParams& params);

struct GlobalDesign {
  SdpStatus status = SdpStatus::kNumericalFailure;
  std::string message;
  double objective = 0.0;
  Eigen::MatrixXd q;    // solver value, N x N
  Eigen::MatrixXd Q;    // 3N x 3N
  Eigen::MatrixXd K;    // (X_p^11)^-1 Q after sparsification
  Eigen::MatrixXd K_I;  // N x N
  double gamma_tilde = 0.0;
  double gamma = 0.0;
  CommTopology topology;
  Eigen::MatrixXd S;
  Eigen::MatrixXd W;
  Eigen::VectorXd p, p_bar;
  double min_eig_WS = 0.0;
  double tau = 0.0;

  bool ok() const { return status == SdpStatus::kOptimal || status == SdpStatus::kFeasible; }
};

GlobalDesign solve_global(const GlobalProblem& gp, const NetworkSpec& spec, const GlobalParams& params);

// Zero |K_I(i,j)| <= tau for i != j, then reset each diagonal so that K_I P_n = 0.
Eigen::MatrixXd sparsify_consensus(const Eigen::MatrixXd& K_I, const Eigen::VectorXd& P_n, double tau);

// Edge j -> i for every off-diagonal |K_I(i,j)| > tau, gain k_ij = -K_I(i,j) L_ti P_nj.
CommTopology extract_topology(const NetworkSpec& spec, const Eigen::MatrixXd& K_I, double tau);

// Sum of c_ij |q_ij| + c1 gamma~ + alpha tr S for a given solution.
double global_objective(const Eigen::MatrixXd& costs, const Eigen::MatrixXd& q, double gamma_tilde,
                        const Eigen::MatrixXd& S, const GlobalParams& params);

// Checks the index signs, assembles and solves. On infeasibility the message reports the
// smallest gamma~ the constraints admit when the bound is lifted, if any.
GlobalDesign design_global(const NetworkSpec& spec, const LocalDesign& local, const GlobalParams& params);

}  // namespace dcmg
