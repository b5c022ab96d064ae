#include "stosdp/problem.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace stosdp {

double Spectrahedron::radius() const {
  if (!trace_cap) throw std::logic_error("Spectrahedron::radius: X has no trace cap");
  return std::max(0.0, *trace_cap);
}

bool Spectrahedron::contains(const SymMatrix& x, double tol) const {
  if (x.dim() != dim) return false;
  if (x.min_eigenvalue() < -tol) return false;
  for (const auto& e : equalities) {
    if (std::abs(e.coeff.dot(x) - e.rhs) > tol * (1.0 + std::abs(e.rhs))) return false;
  }
  for (const auto& h : inequalities) {
    if (h.coeff.dot(x) > h.rhs + tol * (1.0 + std::abs(h.rhs))) return false;
  }
  if (trace_cap && x.trace() > *trace_cap + tol * (1.0 + std::abs(*trace_cap))) return false;
  return true;
}

double ScenarioSet::total_probability() const {
  double sum = 0.0;
  for (const auto& sc : scenarios) sum += sc.prob;
  return sum;
}

ScenarioSet ScenarioSet::renormalized() const {
  const double total = total_probability();
  if (!(total > 0.0)) throw std::invalid_argument("renormalized: total probability must be positive");
  ScenarioSet out = *this;
  for (auto& sc : out.scenarios) sc.prob /= total;
  return out;
}

bool ValidationReport::ok() const {
  for (const auto& i : issues) {
    if (i.severity == ValidationIssue::Severity::Error) return false;
  }
  return true;
}

std::vector<std::string> ValidationReport::errors() const {
  std::vector<std::string> out;
  for (const auto& i : issues) {
    if (i.severity == ValidationIssue::Severity::Error) out.push_back(i.message);
  }
  return out;
}

std::vector<std::string> ValidationReport::warnings() const {
  std::vector<std::string> out;
  for (const auto& i : issues) {
    if (i.severity == ValidationIssue::Severity::Warning) out.push_back(i.message);
  }
  return out;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& i : issues) {
    os << (i.severity == ValidationIssue::Severity::Error ? "error: " : "warning: ") << i.message << '\n';
  }
  return os.str();
}

namespace {

class Collector {
 public:
  explicit Collector(ValidationReport& r) : r_(r) {}
  void error(std::string msg) { r_.issues.push_back({ValidationIssue::Severity::Error, std::move(msg)}); }
  void warning(std::string msg) { r_.issues.push_back({ValidationIssue::Severity::Warning, std::move(msg)}); }

  void matrix(const SymMatrix& a, int expected_dim, const std::string& name) {
    if (a.dim() != expected_dim) {
      error("dimension mismatch: " + name + " is " + std::to_string(a.dim()) + "x" + std::to_string(a.dim()) +
            ", expected " + std::to_string(expected_dim) + "x" + std::to_string(expected_dim));
    }
    if (!a.is_finite()) error(name + " has non-finite entries");
    if (a.was_symmetrized()) warning(name + " was slightly asymmetric and has been symmetrized");
  }

 private:
  ValidationReport& r_;
};

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

ValidationReport validate_problem(const ProblemData& p, const ScenarioSet& scen) {
  ValidationReport report;
  Collector col(report);

  if (p.n < 1 || p.m < 1 || p.s < 1) {
    col.error("dims must be positive (n=" + std::to_string(p.n) + ", m=" + std::to_string(p.m) +
              ", s=" + std::to_string(p.s) + ")");
  }
  col.matrix(p.c, p.n, "c");
  col.matrix(p.q, p.m, "q");

  if (p.T.count() != p.s) {
    col.error("dimension mismatch: T has " + std::to_string(p.T.count()) + " blocks, expected s=" +
              std::to_string(p.s));
  }
  if (p.W.count() != p.s) {
    col.error("dimension mismatch: W has " + std::to_string(p.W.count()) + " blocks, expected s=" +
              std::to_string(p.s));
  }
  for (int j = 0; j < p.T.count(); ++j) col.matrix(p.T[j], p.n, "T[" + std::to_string(j) + "]");
  for (int j = 0; j < p.W.count(); ++j) col.matrix(p.W[j], p.m, "W[" + std::to_string(j) + "]");

  if (p.X.dim != p.n) {
    col.error("dimension mismatch: X has dim " + std::to_string(p.X.dim) + ", expected n=" + std::to_string(p.n));
  }
  for (std::size_t k = 0; k < p.X.equalities.size(); ++k) {
    col.matrix(p.X.equalities[k].coeff, p.n, "X.eq[" + std::to_string(k) + "].G");
    if (!std::isfinite(p.X.equalities[k].rhs)) col.error("X.eq[" + std::to_string(k) + "].g is not finite");
  }
  for (std::size_t k = 0; k < p.X.inequalities.size(); ++k) {
    col.matrix(p.X.inequalities[k].coeff, p.n, "X.ineq[" + std::to_string(k) + "].H");
    if (!std::isfinite(p.X.inequalities[k].rhs)) col.error("X.ineq[" + std::to_string(k) + "].h is not finite");
  }
  if (p.X.trace_cap && !std::isfinite(*p.X.trace_cap)) col.error("X.trace_cap is not finite");
  if (p.X.compact_claimed && !p.X.trace_cap) col.error("X is claimed compact but has no trace_cap");

  if (scen.scenarios.empty()) col.error("scenario set is empty");
  bool probs_positive = true;
  for (int i = 0; i < scen.size(); ++i) {
    const auto& sc = scen[i];
    if (!(sc.prob > 0.0) || !std::isfinite(sc.prob)) {
      probs_positive = false;
      col.error("scenario " + std::to_string(i) + " has non-positive probability " + fmt_double(sc.prob));
    }
    if (sc.z.size() != p.s) {
      col.error("dimension mismatch: scenario " + std::to_string(i) + " has z of length " +
                std::to_string(sc.z.size()) + ", expected s=" + std::to_string(p.s));
    } else if (!sc.z.allFinite()) {
      col.error("scenario " + std::to_string(i) + " has non-finite z");
    }
  }
  if (!scen.scenarios.empty() && probs_positive) {
    const double total = scen.total_probability();
    if (std::abs(total - 1.0) > kProbabilitySumTol) col.error("probabilities sum to " + fmt_double(total));
  }
  return report;
}

void require_valid(const ProblemData& p, const ScenarioSet& scen) {
  const auto report = validate_problem(p, scen);
  if (!report.ok()) throw std::invalid_argument("invalid problem data:\n" + report.to_string());
}

}  // namespace stosdp
