#include "dcmg/bundle.hpp"

#include <fstream>

#include "json.hpp"

namespace dcmg {

using nlohmann::json;

namespace {

json vec(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json mat(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    a.push_back(r);
  }
  return a;
}

Eigen::VectorXd to_vec(const json& a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v(static_cast<Eigen::Index>(i)) = a[i].get<double>();
  return v;
}

Eigen::MatrixXd to_mat(const json& a) {
  const auto r = static_cast<Eigen::Index>(a.size());
  const auto c = r ? static_cast<Eigen::Index>(a[0].size()) : 0;
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    if (static_cast<Eigen::Index>(a[i].size()) != c) throw BundleError("ragged matrix in bundle");
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = a[i][j].get<double>();
  }
  return m;
}

SdpStatus status_from(const std::string& s) {
  for (SdpStatus st : {SdpStatus::kOptimal, SdpStatus::kFeasible, SdpStatus::kInfeasible, SdpStatus::kNumericalFailure})
    if (s == to_string(st)) return st;
  throw BundleError("unknown status '" + s + "'");
}

json cert(const PassivityCertificate& c) { return {{"nu", c.nu}, {"rho", c.rho}, {"P", mat(c.P)}}; }

PassivityCertificate cert_from(const json& j, PassivityCertificate::Kind kind) {
  PassivityCertificate c;
  c.nu = j.at("nu").get<double>();
  c.rho = j.at("rho").get<double>();
  c.P = to_mat(j.at("P"));
  c.kind = kind;
  return c;
}

}  // namespace

std::string bundle_to_json(const DesignBundle& b) {
  json j;
  j["format"] = "dcmg-design-bundle";
  j["version"] = 1;
  j["network"] = serialize_network(b.spec);
  j["reference"] = {{"V_r", vec(b.sel.V_r)},         {"I_s", b.sel.I_s},
                    {"objective", b.sel.objective}, {"iterations", b.sel.iterations},
                    {"u_S", vec(b.u_S)}};
  const DesignParams& lp = b.local_params;
  j["local_params"] = {{"p", lp.p},       {"p_bar", lp.p_bar},   {"gamma_bar", lp.gamma_bar},
                       {"alpha_lambda", lp.alpha_lambda},        {"alpha_gamma", lp.alpha_gamma},
                       {"eps", lp.eps},   {"pi_min", lp.pi_min}, {"kappa", lp.kappa},
                       {"strict_structure", lp.strict_structure}};
  const LocalDesign& ld = b.local;
  json dgs = json::array();
  for (size_t i = 0; i < ld.K0.size(); ++i) {
    dgs.push_back({{"K0", vec(ld.K0[i].transpose())},
                   {"K_tilde", vec(ld.K_tilde[i].transpose())},
                   {"P_tilde", mat(ld.P_tilde[i])},
                   {"R_tilde", mat(ld.R_tilde[i])},
                   {"certificate", cert(ld.dg_certs[i])},
                   {"gamma_tilde", ld.gamma_tilde[i]},
                   {"lambda_tilde", ld.lambda_tilde[i]},
                   {"rho_tilde", ld.rho_tilde[i]}});
  }
  json lines = json::array();
  for (const auto& c : ld.line_certs) lines.push_back(cert(c));
  json pairs = json::array();
  for (const auto& p : ld.pairs) pairs.push_back({{"dg", p.dg}, {"line", p.line}, {"xi", p.xi}, {"s1", p.s1}, {"s2", p.s2}});
  j["local"] = {{"status", to_string(ld.status)}, {"objective", ld.objective}, {"dgs", dgs}, {"lines", lines},
                {"pairs", pairs}};

  const GlobalParams& gp = b.global_params;
  j["global_params"] = {{"mode", to_string(gp.graph.mode)}, {"penalty", gp.graph.penalty},
                        {"c_adjacent", gp.c_adjacent},      {"c1", gp.c1},
                        {"alpha", gp.alpha},                {"eta", gp.eta},
                        {"gamma_bar", gp.gamma_bar},        {"eps", gp.eps},
                        {"full_slack", gp.full_slack},      {"tau_rel", gp.tau_rel},
                        {"tau_abs", gp.tau_abs}};
  if (gp.costs.size() > 0) j["global_params"]["costs"] = mat(gp.costs);
  const GlobalDesign& g = b.global;
  json edges = json::array();
  for (const auto& e : g.topology.edges) edges.push_back({{"from", e.from}, {"to", e.to}, {"gain", e.gain}});
  j["global"] = {{"status", to_string(g.status)},
                 {"objective", g.objective},
                 {"p", vec(g.p)},
                 {"p_bar", vec(g.p_bar)},
                 {"q", mat(g.q)},
                 {"Q", mat(g.Q)},
                 {"K", mat(g.K)},
                 {"K_I", mat(g.K_I)},
                 {"gamma_tilde", g.gamma_tilde},
                 {"gamma", g.gamma},
                 {"tau", g.tau},
                 {"min_eig_WS", g.min_eig_WS},
                 {"S", mat(g.S)},
                 {"edges", edges}};
  return j.dump(1) + "\n";
}

DesignBundle bundle_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw BundleError(std::string("bundle is not valid JSON: ") + e.what());
  }
  try {
    if (j.value("format", "") != "dcmg-design-bundle") throw BundleError("not a design bundle");
    DesignBundle b;
    b.spec = parse_network(j.at("network").get<std::string>());
    const json& r = j.at("reference");
    b.sel.V_r = to_vec(r.at("V_r"));
    b.sel.I_s = r.at("I_s").get<double>();
    b.sel.objective = r.at("objective").get<double>();
    b.sel.iterations = r.at("iterations").get<int>();
    b.sel.feasible = true;
    b.u_S = to_vec(r.at("u_S"));

    const json& lp = j.at("local_params");
    DesignParams& dp = b.local_params;
    dp.p = lp.at("p").get<double>();
    dp.p_bar = lp.at("p_bar").get<double>();
    dp.gamma_bar = lp.at("gamma_bar").get<double>();
    dp.alpha_lambda = lp.at("alpha_lambda").get<double>();
    dp.alpha_gamma = lp.at("alpha_gamma").get<double>();
    dp.eps = lp.at("eps").get<double>();
    dp.pi_min = lp.at("pi_min").get<double>();
    dp.kappa = lp.at("kappa").get<double>();
    dp.strict_structure = lp.at("strict_structure").get<bool>();

    const json& l = j.at("local");
    LocalDesign& ld = b.local;
    ld.status = status_from(l.at("status").get<std::string>());
    ld.objective = l.at("objective").get<double>();
    for (const auto& d : l.at("dgs")) {
      const Eigen::VectorXd k0 = to_vec(d.at("K0"));
      const Eigen::VectorXd kt = to_vec(d.at("K_tilde"));
      if (k0.size() != 3 || kt.size() != 3) throw BundleError("DG gain must have three entries");
      ld.K0.push_back(k0.transpose());
      ld.K_tilde.push_back(kt.transpose());
      ld.P_tilde.push_back(to_mat(d.at("P_tilde")));
      ld.R_tilde.push_back(to_mat(d.at("R_tilde")));
      ld.dg_certs.push_back(cert_from(d.at("certificate"), PassivityCertificate::Kind::kDg));
      ld.gamma_tilde.push_back(d.at("gamma_tilde").get<double>());
      ld.lambda_tilde.push_back(d.at("lambda_tilde").get<double>());
      ld.rho_tilde.push_back(d.at("rho_tilde").get<double>());
    }
    for (const auto& c : l.at("lines")) ld.line_certs.push_back(cert_from(c, PassivityCertificate::Kind::kLine));
    for (const auto& p : l.at("pairs")) {
      ld.pairs.push_back({p.at("dg").get<int>(), p.at("line").get<int>(), p.at("xi").get<double>(),
                          p.at("s1").get<double>(), p.at("s2").get<double>()});
    }

    const json& gpj = j.at("global_params");
    GlobalParams& gp = b.global_params;
    gp.graph.mode = parse_graph_mode(gpj.at("mode").get<std::string>());
    gp.graph.penalty = gpj.at("penalty").get<double>();
    gp.c_adjacent = gpj.at("c_adjacent").get<double>();
    gp.c1 = gpj.at("c1").get<double>();
    gp.alpha = gpj.at("alpha").get<double>();
    gp.eta = gpj.at("eta").get<double>();
    gp.gamma_bar = gpj.at("gamma_bar").get<double>();
    gp.eps = gpj.at("eps").get<double>();
    gp.full_slack = gpj.at("full_slack").get<bool>();
    gp.tau_rel = gpj.at("tau_rel").get<double>();
    gp.tau_abs = gpj.at("tau_abs").get<double>();
    if (gpj.contains("costs")) gp.costs = to_mat(gpj.at("costs"));

    const json& g = j.at("global");
    GlobalDesign& gd = b.global;
    gd.status = status_from(g.at("status").get<std::string>());
    gd.objective = g.at("objective").get<double>();
    gd.p = to_vec(g.at("p"));
    gd.p_bar = to_vec(g.at("p_bar"));
    gd.q = to_mat(g.at("q"));
    gd.Q = to_mat(g.at("Q"));
    gd.K = to_mat(g.at("K"));
    gd.K_I = to_mat(g.at("K_I"));
    gd.gamma_tilde = g.at("gamma_tilde").get<double>();
    gd.gamma = g.at("gamma").get<double>();
    gd.tau = g.at("tau").get<double>();
    gd.min_eig_WS = g.at("min_eig_WS").get<double>();
    gd.S = to_mat(g.at("S"));
    for (const auto& e : g.at("edges"))
      gd.topology.edges.push_back({e.at("from").get<int>(), e.at("to").get<int>(), e.at("gain").get<double>()});

    const int N = b.spec.num_dgs();
    const int L = b.spec.num_lines();
    if (b.sel.V_r.size() != N || b.u_S.size() != N || static_cast<int>(ld.K0.size()) != N ||
        static_cast<int>(ld.line_certs.size()) != L || gd.p.size() != N || gd.p_bar.size() != L ||
        gd.K_I.rows() != N || gd.K_I.cols() != N) {
      throw BundleError("bundle dimensions do not match its network");
    }
    return b;
  } catch (const json::exception& e) {
    throw BundleError(std::string("malformed bundle: ") + e.what());
  }
}

void save_bundle(const std::string& path, const DesignBundle& b) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw BundleError("cannot write '" + path + "'");
  f << bundle_to_json(b);
}

DesignBundle load_bundle(const std::string& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::runtime_error& e) {
    throw BundleError(e.what());
  }
  return bundle_from_json(text);
}

ControlDesign control_of(const DesignBundle& b) {
  ControlDesign d;
  d.V_r = b.sel.V_r;
  d.u_S = b.u_S;
  d.I_s = b.sel.I_s;
  d.K0 = b.local.K0;
  d.K_I = b.global.K_I;
  return d;
}

}  // namespace dcmg
