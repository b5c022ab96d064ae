#include "cli.hpp"

#include "io.hpp"

#include <stosdp/errors.hpp>
#include <stosdp/extensive.hpp>
#include <stosdp/recourse.hpp>
#include <stosdp/sdpa.hpp>

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace stosdp::cli {
namespace {

// Thrown for failures that map to a specific exit code.
struct Exit {
  int code;
  std::string message;
};

double env_number(const char* name, double fallback) {
  const char* v = std::getenv(name);
  if (!v || !*v) return fallback;
  char* end = nullptr;
  const double x = std::strtod(v, &end);
  if (*end != '\0' || !(x > 0.0) || !std::isfinite(x)) {
    throw Exit{kUsageError, std::string(name) + "='" + v + "' is not a positive number"};
  }
  return x;
}

// Tolerance overrides: STOSDP_FEAS_TOL, STOSDP_GAP_TOL, STOSDP_MAX_ITER (interior point),
// STOSDP_BENDERS_TOL, STOSDP_BENDERS_MAX_ITER, STOSDP_BNB_MAX_NODES.
ModelOptions model_options(int threads) {
  ModelOptions o;
  o.threads = threads;
  for (SolverOptions* s : {&o.sdp, &o.benders.master, &o.bnb.sdp}) {
    s->feas_tol = env_number("STOSDP_FEAS_TOL", s->feas_tol);
    s->gap_tol = env_number("STOSDP_GAP_TOL", s->gap_tol);
    s->max_iter = static_cast<int>(env_number("STOSDP_MAX_ITER", s->max_iter));
  }
  o.benders.tol = env_number("STOSDP_BENDERS_TOL", o.benders.tol);
  o.benders.max_iter = static_cast<int>(env_number("STOSDP_BENDERS_MAX_ITER", o.benders.max_iter));
  o.bnb.max_nodes = static_cast<int>(env_number("STOSDP_BNB_MAX_NODES", o.bnb.max_nodes));
  return o;
}

std::string full(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string brief(double v) {
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

std::string matrix_text(const SymMatrix& a) {
  std::string s = "[";
  for (int i = 0; i < a.dim(); ++i) {
    s += i ? ", [" : "[";
    for (int j = 0; j < a.dim(); ++j) s += (j ? ", " : "") + full(a(i, j));
    s += "]";
  }
  return s + "]";
}

struct Inputs {
  ProblemData problem;
  ScenarioSet scenarios;
};

Inputs load(const std::string& problem, const std::string& scenarios, std::ostream& err) {
  Inputs in{io::read_problem(problem), io::read_scenarios(scenarios)};
  const auto report = validate_problem(in.problem, in.scenarios);
  for (const auto& w : report.warnings()) err << "warning: " << w << "\n";
  if (!report.ok()) {
    std::string msg = "invalid input:";
    for (const auto& e : report.errors()) msg += "\n  " + e;
    throw Exit{kUsageError, msg};
  }
  return in;
}

RecourseOracle require_assumptions(const ProblemData& p, std::ostream& err) {
  RecourseOracle o = RecourseOracle::allow_unverified(p);
  if (!o.verified()) {
    err << "A1/A2 do not hold; run 'stosdp check' for details\n";
    throw Exit{kAssumptionFailure, ""};
  }
  return o;
}

int cmd_check(const std::string& problem, const std::string& scenarios, std::ostream& out, std::ostream& err) {
  const Inputs in = load(problem, scenarios, err);
  const RecourseOracle o = RecourseOracle::allow_unverified(in.problem);
  out << "problem: n=" << in.problem.n << " m=" << in.problem.m << " s=" << in.problem.s << ", "
      << in.scenarios.size() << " scenarios\n";
  out << "A2: " << (o.a2().holds ? "OK" : "FAIL") << ", margin " << brief(std::max(o.a2().margin, 0.0));
  if (!o.a2().holds) out << " (M_D has no interior; here M_D = {u : q - W'u psd} is lower-dimensional)";
  out << "\n";
  if (o.a1()) {
    const A1Result& a1 = *o.a1();
    out << "A1: " << (a1.holds ? "OK" : "FAIL") << (a1.a2_held ? "" : " (informational)") << ", " << a1.certificate
        << "\n";
  } else {
    out << "A1: not checked\n";
  }
  if (o.verified()) {
    out << "L_hat: " << brief(o.lipschitz_bound()) << "\n";
    return kSuccess;
  }
  out << "L_hat: n/a\n";
  return kAssumptionFailure;
}

int cmd_solve(const std::string& problem, const std::string& scenarios, const std::string& risk,
              const std::string& method_name, const std::string& out_path, int threads, bool single_cut,
              std::ostream& out, std::ostream& err) {
  const RiskSpec spec = parse_risk_spec(risk);
  const Method method = parse_method(method_name);
  if (!method_supports(method, spec)) {
    std::string msg = "method " + method_name + " cannot solve " + to_string(spec);
    if (method != Method::Bnb && std::holds_alternative<MeanRisk>(spec) &&
        std::holds_alternative<VaR>(std::get<MeanRisk>(spec).base)) {
      msg += " (VaR models have binary variables; use --method bnb)";
    } else if (method == Method::Bnb) {
      msg += " (bnb is only for E+rho*VaR(alpha))";
    }
    throw Exit{kUsageError, msg};
  }
  const Inputs in = load(problem, scenarios, err);
  require_assumptions(in.problem, err);
  ModelOptions opts = model_options(threads);
  opts.benders.single_cut = single_cut;
  const ModelResult r = solve_model(in.problem, in.scenarios, spec, method, opts);

  out << "risk: " << to_string(spec) << "\n";
  out << "method: " << to_string(r.method) << "\n";
  out << "status: " << r.status << "\n";
  if (method != Method::Extensive) out << "bounds: [" << full(r.lower) << ", " << full(r.upper) << "]\n";
  out << "value: " << full(r.value) << "\n";
  out << "x: " << matrix_text(r.x) << "\n";
  out << "scenario costs:";
  for (double c : r.scenario_costs) out << ' ' << full(c);
  out << "\n";
  if (!r.eta.empty()) {
    out << "eta:";
    for (double e : r.eta) out << ' ' << full(e);
    out << "\n";
  }
  if (!r.delta.empty()) {
    out << "delta:";
    for (int d : r.delta) out << ' ' << d;
    out << "\n";
  }
  if (method == Method::Benders) out << "iterations: " << r.iterations << ", cuts: " << r.cuts.size() << "\n";
  if (method == Method::Bnb) out << "nodes: " << r.nodes << "\n";
  if (!out_path.empty()) io::write_text(out_path, io::result_to_json(r, to_string(spec)));

  if (r.ok) return kSuccess;
  if (r.status == "PrimalInfeasible" || r.status == "DualInfeasible") return kAssumptionFailure;
  return kConvergenceFailure;
}

int cmd_export(const std::string& problem, const std::string& scenarios, const std::string& risk,
               const std::string& format, const std::string& out_path, bool literal, std::ostream& out,
               std::ostream& err) {
  if (format != "sdpa") throw Exit{kUsageError, "unknown export format '" + format + "' (expected sdpa)"};
  const RiskSpec spec = parse_risk_spec(risk);
  const Inputs in = load(problem, scenarios, err);
  BuildOptions bo;
  bo.literal = literal;
  const ExtensiveForm ef = build_model(in.problem, in.scenarios, spec, bo);
  try {
    export_sdpa(out_path, ef.sdp, ef.binary_indices, ef.big_M);
  } catch (const std::exception& e) {
    throw Exit{kUsageError, e.what()};
  }
  const SdpaImport back = import_sdpa(out_path);
  const bool same = structurally_equal(back.sdp, ef.sdp);
  out << "wrote " << out_path << " and " << out_path << ".sidecar\n";
  out << "psd blocks: " << ef.sdp.num_psd_blocks() << ", nonneg scalars: " << ef.sdp.num_nonneg()
      << ", free scalars: " << ef.sdp.num_free() << ", rows: " << ef.sdp.num_rows() << "\n";
  out << "binary indices: " << ef.binary_indices.size();
  if (ef.big_M) out << ", big_M: " << full(*ef.big_M);
  out << "\n";
  out << "round trip: " << (same ? "identical" : "MISMATCH") << "\n";
  return same ? kSuccess : kUsageError;
}

int cmd_stability(const std::string& problem, const std::string& scenarios, const std::string& risk,
                  const std::string& plan_path, const std::string& out_path, const std::string& method_name,
                  int threads, std::ostream& out, std::ostream& err) {
  const RiskSpec spec = parse_risk_spec(risk);
  const PerturbationPlan plan = io::read_plan(plan_path);
  const Inputs in = load(problem, scenarios, err);
  require_assumptions(in.problem, err);
  StabilityOptions so;
  so.threads = threads;
  so.model = model_options(1);
  if (!method_name.empty()) {
    so.method = parse_method(method_name);
    if (!method_supports(*so.method, spec)) throw Exit{kUsageError, "method " + method_name + " cannot solve " + to_string(spec)};
  }
  const StabilityReport rep = stability_sweep(in.problem, in.scenarios, spec, plan, so);
  for (const auto& w : rep.warnings) err << "warning: " << w << "\n";
  if (out_path.empty()) {
    out << rep.to_csv();
  } else {
    io::write_text(out_path, rep.to_csv());
    out << "wrote " << out_path << "\n";
  }
  return kSuccess;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Risk-averse two-stage stochastic SDPs with continuous recourse"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "stosdp 0.1.0");

  std::string problem, scenarios, risk = "E", method = "extensive", out_path, format = "sdpa", plan, stab_method;
  int threads = 1;
  bool single_cut = false, literal = false;

  auto* check = app.add_subcommand("check", "Verify A1/A2 and report the Lipschitz bound of the recourse");
  auto* solve = app.add_subcommand("solve", "Solve a mean-risk model");
  auto* exp = app.add_subcommand("export", "Export the deterministic equivalent in SDPA format");
  auto* stab = app.add_subcommand("stability", "Sweep perturbations of the scenario distribution");
  for (auto* sub : {check, solve, exp, stab}) {
    sub->add_option("problem", problem, "Problem file")->required();
    sub->add_option("scenarios", scenarios, "Scenario file")->required();
  }
  for (auto* sub : {solve, exp, stab}) sub->add_option("--risk", risk, "E, E+rho*EE(eta), E+rho*CVaR(alpha), E+rho*VaR(alpha) or E+rho*Mad(p)");
  solve->add_option("--method", method, "extensive, benders or bnb");
  solve->add_option("--out", out_path, "Write a JSON result file");
  solve->add_flag("--single-cut", single_cut, "Benders: one aggregate cut per iteration");
  for (auto* sub : {solve, stab}) sub->add_option("--threads", threads, "Concurrent subproblem solves")->check(CLI::PositiveNumber);
  exp->add_option("--format", format, "Export format (sdpa)");
  exp->add_option("--out", out_path, "Output path; the sidecar goes to <out>.sidecar")->required();
  exp->add_flag("--literal", literal, "Use the printed big-M and semideviation rows");
  stab->add_option("--plan", plan, "Perturbation plan file")->required();
  stab->add_option("--out", out_path, "Write the CSV report here instead of stdout");
  stab->add_option("--method", stab_method, "extensive or bnb (default: bnb for VaR, extensive otherwise)");

  std::vector<std::string> argv_store{"stosdp"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*check) return cmd_check(problem, scenarios, out, err);
    if (*solve) return cmd_solve(problem, scenarios, risk, method, out_path, threads, single_cut, out, err);
    if (*exp) return cmd_export(problem, scenarios, risk, format, out_path, literal, out, err);
    if (*stab) return cmd_stability(problem, scenarios, risk, plan, out_path, stab_method, threads, out, err);
  } catch (const Exit& e) {
    if (!e.message.empty()) err << "error: " << e.message << "\n";
    return e.code;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kUsageError;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kAssumptionFailure;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << "\n";
    return kConvergenceFailure;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }
  return kUsageError;
}

}  // namespace stosdp::cli
