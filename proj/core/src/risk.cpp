#include "stosdp/risk.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace stosdp {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kQuantileTol = 1e-12;
constexpr double kMixtureSumTol = 1e-9;

// Atoms sorted by value with equal values merged.
std::vector<Atom> sorted_support(const DiscreteDist& d) {
  std::vector<Atom> a = d.atoms();
  std::sort(a.begin(), a.end(), [](const Atom& x, const Atom& y) { return x.value < y.value; });
  std::vector<Atom> out;
  for (const Atom& x : a) {
    if (!out.empty() && out.back().value == x.value) {
      out.back().prob += x.prob;
    } else {
      out.push_back(x);
    }
  }
  return out;
}

// Index into sorted support of the alpha-quantile.
std::size_t quantile_index(const std::vector<Atom>& s, double alpha) {
  double cum = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) {
    cum += s[k].prob;
    if (cum >= alpha - kQuantileTol) return k;
  }
  return s.size() - 1;
}

void require_alpha(double alpha, const char* what) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw std::invalid_argument(std::string(what) + ": alpha must lie in (0, 1), got " + std::to_string(alpha));
  }
}

// Tail weights mu with CVaR_alpha(v) = sum_i mu_i v_i, in the original atom order.
std::vector<double> cvar_weights(const DiscreteDist& d, double alpha) {
  const double q = cvar(d, alpha).eta;
  double below = 0.0;  // P(Y < q)
  double at = 0.0;     // P(Y = q)
  for (const Atom& a : d.atoms()) {
    if (a.value < q) below += a.prob;
    if (a.value == q) at += a.prob;
  }
  const double at_mass = std::max(0.0, below + at - alpha) / (1.0 - alpha);
  std::vector<double> mu;
  mu.reserve(d.atoms().size());
  for (const Atom& a : d.atoms()) {
    if (a.value > q) {
      mu.push_back(a.prob / (1.0 - alpha));
    } else if (a.value == q) {
      mu.push_back(at_mass * a.prob / at);
    } else {
      mu.push_back(0.0);
    }
  }
  return mu;
}

std::string number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_number(const std::string& s, const std::string& text) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw std::invalid_argument("risk spec '" + text + "': '" + s + "' is not a number");
  }
  return v;
}

std::string lower(std::string s) {
  for (char& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

DiscreteDist::DiscreteDist(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
  if (atoms_.empty()) throw std::invalid_argument("DiscreteDist: no atoms");
  double total = 0.0;
  for (const Atom& a : atoms_) {
    if (!(a.prob > 0.0) || !std::isfinite(a.prob)) {
      throw std::invalid_argument("DiscreteDist: probability " + std::to_string(a.prob) + " is not positive");
    }
    if (!std::isfinite(a.value)) throw std::invalid_argument("DiscreteDist: atom value is not finite");
    total += a.prob;
  }
  if (std::abs(total - 1.0) > kSumTol) {
    throw std::invalid_argument("DiscreteDist: probabilities sum to " + number(total));
  }
}

DiscreteDist DiscreteDist::shifted(double c) const {
  std::vector<Atom> a = atoms_;
  for (Atom& x : a) x.value += c;
  return DiscreteDist(std::move(a));
}

DiscreteDist DiscreteDist::scaled(double lambda) const {
  std::vector<Atom> a = atoms_;
  for (Atom& x : a) x.value *= lambda;
  return DiscreteDist(std::move(a));
}

double expectation(const DiscreteDist& d) {
  double v = 0.0;
  for (const Atom& a : d.atoms()) v += a.prob * a.value;
  return v;
}

double expected_excess(const DiscreteDist& d, double eta) {
  double v = 0.0;
  for (const Atom& a : d.atoms()) v += a.prob * std::max(a.value - eta, 0.0);
  return v;
}

double value_at_risk(const DiscreteDist& d, double alpha) {
  require_alpha(alpha, "value_at_risk");
  const auto s = sorted_support(d);
  return s[quantile_index(s, alpha)].value;
}

CvarValue cvar(const DiscreteDist& d, double alpha) {
  require_alpha(alpha, "cvar");
  const auto s = sorted_support(d);
  const std::size_t k = quantile_index(s, alpha);
  double cum = 0.0;
  for (std::size_t j = 0; j <= k; ++j) cum += s[j].prob;
  double tail = std::max(0.0, cum - alpha) * s[k].value;
  for (std::size_t j = k + 1; j < s.size(); ++j) tail += s[j].prob * s[j].value;
  return {tail / (1.0 - alpha), s[k].value};
}

double cvar_objective(const DiscreteDist& d, double alpha, double eta) {
  require_alpha(alpha, "cvar_objective");
  return eta + expected_excess(d, eta) / (1.0 - alpha);
}

double upper_semidev(const DiscreteDist& d, int p) {
  if (p != 1 && p != 2) throw std::invalid_argument("upper_semidev: p must be 1 or 2, got " + std::to_string(p));
  const double mean = expectation(d);
  double v = 0.0;
  for (const Atom& a : d.atoms()) {
    const double e = std::max(a.value - mean, 0.0);
    v += a.prob * (p == 1 ? e : e * e);
  }
  return p == 1 ? v : std::sqrt(v);
}

namespace {

void validate_base(const BaseRisk& b) {
  std::visit(overloaded{
                 [](const ExpectedExcess& e) {
                   if (!std::isfinite(e.eta)) throw std::invalid_argument("ExpectedExcess: eta must be finite");
                 },
                 [](const CVaR& c) { require_alpha(c.alpha, "CVaR"); },
                 [](const VaR& v) { require_alpha(v.alpha, "VaR"); },
                 [](const UpperSemidev& u) {
                   if (u.p != 1 && u.p != 2) throw std::invalid_argument("UpperSemidev: p must be 1 or 2");
                 },
                 [](const CVaRMixture& m) {
                   if (m.terms.empty()) throw std::invalid_argument("CVaRMixture: no terms");
                   double total = 0.0;
                   for (const auto& [w, a] : m.terms) {
                     if (!(w > 0.0) || !std::isfinite(w)) throw std::invalid_argument("CVaRMixture: weights must be positive");
                     if (!(a >= 0.0 && a < 1.0)) throw std::invalid_argument("CVaRMixture: alpha must lie in [0, 1)");
                     total += w;
                   }
                   if (std::abs(total - 1.0) > kMixtureSumTol) throw std::invalid_argument("CVaRMixture: weights must sum to 1");
                 },
             },
             b);
}

double evaluate_base(const BaseRisk& b, const DiscreteDist& d) {
  return std::visit(overloaded{
                        [&](const ExpectedExcess& e) { return expected_excess(d, e.eta); },
                        [&](const CVaR& c) { return cvar(d, c.alpha).value; },
                        [&](const VaR& v) { return value_at_risk(d, v.alpha); },
                        [&](const UpperSemidev& u) { return upper_semidev(d, u.p); },
                        [&](const CVaRMixture& m) {
                          double v = 0.0;
                          for (const auto& [w, a] : m.terms) v += w * (a == 0.0 ? expectation(d) : cvar(d, a).value);
                          return v;
                        },
                    },
                    b);
}

// Subgradient weights of a convex monotone base measure.
std::vector<double> base_weights(const BaseRisk& b, const DiscreteDist& d) {
  return std::visit(overloaded{
                        [&](const ExpectedExcess& e) {
                          std::vector<double> w;
                          for (const Atom& a : d.atoms()) w.push_back(a.value > e.eta ? a.prob : 0.0);
                          return w;
                        },
                        [&](const CVaR& c) { return cvar_weights(d, c.alpha); },
                        [&](const CVaRMixture& m) {
                          std::vector<double> w(d.atoms().size(), 0.0);
                          for (const auto& [wt, a] : m.terms) {
                            if (a == 0.0) {
                              for (std::size_t i = 0; i < w.size(); ++i) w[i] += wt * d.atoms()[i].prob;
                            } else {
                              const auto mu = cvar_weights(d, a);
                              for (std::size_t i = 0; i < w.size(); ++i) w[i] += wt * mu[i];
                            }
                          }
                          return w;
                        },
                        [](const VaR&) -> std::vector<double> {
                          throw std::invalid_argument("risk_gradient_weights: VaR is not convex");
                        },
                        [](const UpperSemidev&) -> std::vector<double> {
                          throw std::invalid_argument("risk_gradient_weights: not available for the upper semideviation");
                        },
                    },
                    b);
}

BaseRisk as_base(const RiskSpec& spec) {
  return std::visit(overloaded{
                        [](const ExpectedExcess& e) -> BaseRisk { return e; },
                        [](const CVaR& c) -> BaseRisk { return c; },
                        [](const VaR& v) -> BaseRisk { return v; },
                        [](const UpperSemidev& u) -> BaseRisk { return u; },
                        [](const CVaRMixture& m) -> BaseRisk { return m; },
                        [](const auto&) -> BaseRisk { throw std::logic_error("not a base measure"); },
                    },
                    spec);
}

std::string base_to_string(const BaseRisk& b) {
  return std::visit(overloaded{
                        [](const ExpectedExcess& e) { return "EE(" + number(e.eta) + ")"; },
                        [](const CVaR& c) { return "CVaR(" + number(c.alpha) + ")"; },
                        [](const VaR& v) { return "VaR(" + number(v.alpha) + ")"; },
                        [](const UpperSemidev& u) { return "Mad(" + std::to_string(u.p) + ")"; },
                        [](const CVaRMixture& m) {
                          std::string s = "Mix(";
                          for (std::size_t k = 0; k < m.terms.size(); ++k) {
                            s += (k ? "," : "") + number(m.terms[k].first) + ":" + number(m.terms[k].second);
                          }
                          return s + ")";
                        },
                    },
                    b);
}

}  // namespace

void validate(const RiskSpec& spec) {
  std::visit(overloaded{
                 [](const Expectation&) {},
                 [](const MeanRisk& m) {
                   if (!(m.rho >= 0.0) || !std::isfinite(m.rho)) throw std::invalid_argument("MeanRisk: rho must be >= 0");
                   validate_base(m.base);
                 },
                 [&](const auto&) { validate_base(as_base(spec)); },
             },
             spec);
}

double evaluate(const RiskSpec& spec, const DiscreteDist& d) {
  validate(spec);
  return std::visit(overloaded{
                        [&](const Expectation&) { return expectation(d); },
                        [&](const MeanRisk& m) { return expectation(d) + m.rho * evaluate_base(m.base, d); },
                        [&](const auto&) { return evaluate_base(as_base(spec), d); },
                    },
                    spec);
}

std::vector<double> risk_gradient_weights(const RiskSpec& spec, const DiscreteDist& d) {
  validate(spec);
  std::vector<double> pi;
  for (const Atom& a : d.atoms()) pi.push_back(a.prob);
  return std::visit(overloaded{
                        [&](const Expectation&) { return pi; },
                        [&](const MeanRisk& m) {
                          auto w = base_weights(m.base, d);
                          for (std::size_t i = 0; i < w.size(); ++i) w[i] = pi[i] + m.rho * w[i];
                          return w;
                        },
                        [&](const auto&) { return base_weights(as_base(spec), d); },
                    },
                    spec);
}

RiskSpec parse_risk_spec(const std::string& text) {
  std::string s;
  for (char ch : text) {
    if (!std::isspace(static_cast<unsigned char>(ch))) s += ch;
  }
  auto fail = [&](const std::string& why) -> RiskSpec {
    throw std::invalid_argument("risk spec '" + text + "': " + why +
                                " (expected E, E+rho*EE(eta), E+rho*CVaR(alpha), E+rho*VaR(alpha) or E+rho*Mad(p))");
  };
  if (s == "E") return Expectation{};
  if (s.rfind("E+", 0) != 0) return fail("must start with 'E'");
  const auto star = s.find('*');
  const auto open = s.find('(');
  if (star == std::string::npos || open == std::string::npos || open < star || s.back() != ')') {
    return fail("malformed risk term");
  }
  const double rho = parse_number(s.substr(2, star - 2), text);
  const std::string name = lower(s.substr(star + 1, open - star - 1));
  const double arg = parse_number(s.substr(open + 1, s.size() - open - 2), text);
  RiskSpec spec;
  if (name == "ee") {
    spec = MeanRisk{ExpectedExcess{arg}, rho};
  } else if (name == "cvar") {
    spec = MeanRisk{CVaR{arg}, rho};
  } else if (name == "var") {
    spec = MeanRisk{VaR{arg}, rho};
  } else if (name == "mad") {
    if (arg != 1.0 && arg != 2.0) return fail("Mad order must be 1 or 2");
    spec = MeanRisk{UpperSemidev{static_cast<int>(arg)}, rho};
  } else {
    return fail("unknown measure '" + name + "'");
  }
  validate(spec);
  return spec;
}

std::string to_string(const RiskSpec& spec) {
  return std::visit(overloaded{
                        [](const Expectation&) { return std::string("E"); },
                        [](const MeanRisk& m) { return "E+" + number(m.rho) + "*" + base_to_string(m.base); },
                        [&](const auto&) { return base_to_string(as_base(spec)); },
                    },
                    spec);
}

}  // namespace stosdp
