#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dcmg/pipeline.hpp"

namespace fs = std::filesystem;
using namespace dcmg;

namespace {

constexpr int kOk = 0;
constexpr int kChecksFailed = 1;
constexpr int kInputError = 2;
constexpr int kInfeasible = 3;
constexpr int kNumerical = 4;

struct Options {
  std::string network;
  std::string scenario;
  std::string bundle;
  std::string out = ".";
  std::string mode = "hard";
  std::optional<unsigned> seed;
  std::optional<double> gamma_bar;
  std::optional<double> dt;
  bool compare_droop = false;
};

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
  f << text;
}

int cmd_design(const Options& o) {
  const NetworkSpec spec = load_network(o.network);
  DesignConfig cfg;
  cfg.global.graph.mode = parse_graph_mode(o.mode);
  if (o.gamma_bar) cfg.global.gamma_bar = *o.gamma_bar;
  const DesignOutcome r = run_design(spec, cfg);
  if (!r.ok()) {
    std::cerr << "error: " << to_string(r.failed) << " stage: " << r.message << "\n";
    return r.status == SdpStatus::kInfeasible ? kInfeasible : kNumerical;
  }
  const auto files = write_design_artifacts(o.out, r.bundle);
  const auto& g = r.bundle.global;
  std::cout << "reference V_r = " << format_double(r.bundle.sel.V_r(0)) << " V, I_s = " << format_double(r.bundle.sel.I_s)
            << "\n";
  std::cout << "local synthesis " << to_string(r.bundle.local.status) << ", objective "
            << format_double(r.bundle.local.objective) << "\n";
  std::cout << "global co-design " << to_string(g.status) << " (" << to_string(cfg.global.graph.mode)
            << " mode), gamma~ = " << format_double(g.gamma_tilde) << ", gamma = " << format_double(g.gamma) << ", "
            << g.topology.edges.size() << " links\n";
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
  return kOk;
}

Scenario scenario_for(const Options& o, const NetworkSpec& spec) {
  Scenario sc = load_scenario(o.scenario);
  if (o.dt) sc.dt = *o.dt;
  if (o.seed) sc.disturbance.seed = *o.seed;
  const auto bad = validate_scenario(sc, spec);
  if (!bad.empty()) throw ValidationError(bad);
  return sc;
}

void write_comparison(const fs::path& path, const ScenarioRun& a, const ScenarioRun& b) {
  std::ostringstream os;
  os << "t_begin,t_end,max_dev,max_dev_droop,oscillation,oscillation_droop,tail_dev,tail_dev_droop\n";
  for (size_t k = 0; k < a.metrics.size() && k < b.metrics.size(); ++k) {
    const auto& m = a.metrics[k];
    const auto& d = b.metrics[k];
    os << format_double(m.t_begin) << ',' << format_double(m.t_end) << ',' << format_double(m.max_dev) << ','
       << format_double(d.max_dev) << ',' << format_double(m.oscillation) << ',' << format_double(d.oscillation)
       << ',' << format_double(m.tail_dev) << ',' << format_double(d.tail_dev) << "\n";
  }
  write_file(path, os.str());
}

int cmd_simulate(const Options& o, bool with_droop) {
  const DesignBundle b = load_bundle(o.bundle);
  const Scenario sc = scenario_for(o, b.spec);
  fs::create_directories(o.out);
  const fs::path dir(o.out);
  const ScenarioRun run = run_scenario(b.spec, control_of(b), sc);
  {
    std::ostringstream os;
    write_trace_csv(os, run.trace);
    write_file(dir / "trace.csv", os.str());
  }
  {
    std::ostringstream os;
    write_metrics_csv(os, run.metrics);
    write_file(dir / "metrics.csv", os.str());
  }
  std::ostringstream summary;
  bool all = true;
  for (const auto& line : scenario_summary(run, b.sel.I_s)) {
    summary << (line.passed ? "PASS " : "FAIL ") << line.name << ": " << line.detail << "\n";
    all = all && line.passed;
  }
  if (with_droop) {
    const ScenarioRun droop = run_scenario(b.spec, default_droop(b.spec, b.sel.V_r), sc);
    std::ostringstream tr, mt;
    write_trace_csv(tr, droop.trace);
    write_file(dir / "trace_droop.csv", tr.str());
    write_metrics_csv(mt, droop.metrics);
    write_file(dir / "metrics_droop.csv", mt.str());
    write_comparison(dir / "comparison.csv", run, droop);
    for (size_t k = 1; k < run.metrics.size() && k < droop.metrics.size(); ++k) {
      const auto& m = run.metrics[k];
      const auto& d = droop.metrics[k];
      summary << "INFO window [" << format_double(m.t_begin) << ", " << format_double(m.t_end)
              << "] max |V - V_r|: dissipative " << format_double(m.max_dev) << ", droop " << format_double(d.max_dev)
              << "; oscillation: dissipative " << format_double(m.oscillation) << ", droop "
              << format_double(d.oscillation) << "\n";
    }
  }
  write_file(dir / "summary.txt", summary.str());
  std::cout << summary.str();
  std::cout << (all ? "scenario checks passed" : "scenario checks failed") << "\n";
  return kOk;
}

int cmd_verify(const Options& o) {
  const DesignBundle b = load_bundle(o.bundle);
  VerifyOptions vo;
  if (o.seed) vo.seed = *o.seed;
  const auto checks = verify_bundle(b, vo);
  bool all = true;
  for (const auto& c : checks) {
    std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << " residual=" << format_double(c.residual) << " "
              << c.detail << "\n";
    all = all && c.passed;
  }
  std::cout << (all ? "all checks passed" : "verification failed") << "\n";
  return all ? kOk : kChecksFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dissipativity-based distributed control and topology co-design for DC microgrids"};
  app.require_subcommand(1);
  Options o;

  auto* design = app.add_subcommand("design", "select the reference, synthesize local controllers and the topology");
  design->add_option("--network", o.network, "network file")->required();
  design->add_option("--mode", o.mode, "communication graph constraint")->check(CLI::IsMember({"hard", "soft"}));
  design->add_option("--gamma-bar", o.gamma_bar, "upper bound on gamma~");
  design->add_option("--out", o.out, "output directory");
  design->add_option("--seed", o.seed, "random seed");

  auto* simulate = app.add_subcommand("simulate", "simulate a design bundle on a scenario");
  auto* compare = app.add_subcommand("compare-droop", "simulate a design bundle and the droop baseline");
  for (auto* sub : {simulate, compare}) {
    sub->add_option("--bundle", o.bundle, "design bundle (design.json)")->required();
    sub->add_option("--scenario", o.scenario, "scenario file")->required();
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--dt", o.dt, "integration step [s]");
    sub->add_option("--seed", o.seed, "disturbance seed");
  }
  simulate->add_flag("--compare-droop", o.compare_droop, "also run the droop baseline");

  auto* verify = app.add_subcommand("verify", "re-check every certificate in a design bundle");
  verify->add_option("--bundle", o.bundle, "design bundle (design.json)")->required();
  verify->add_option("--seed", o.seed, "sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInputError;
  }

  try {
    if (*design) return cmd_design(o);
    if (*simulate) return cmd_simulate(o, o.compare_droop);
    if (*compare) return cmd_simulate(o, true);
    if (*verify) return cmd_verify(o);
  } catch (const ParseError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const ValidationError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const BundleError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const FileError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const SimulationError& e) {
    std::cerr << "simulation failed at " << e.what() << "\n";
    return kNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kInputError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  }
  return kInputError;
}
