#include "stosdp/stability.hpp"

#include "stosdp/recourse.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace stosdp {
namespace {

std::uint64_t cell_seed(std::uint64_t seed, std::size_t k, int rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(rep)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Vector gaussian(std::mt19937_64& rng, Eigen::Index s) {
  std::normal_distribution<double> g;
  Vector v(s);
  for (Eigen::Index j = 0; j < s; ++j) v(j) = g(rng);
  return v;
}

// Sup-norm Lipschitz constant of the measure, when the sweep knows one.
std::optional<double> risk_lipschitz(const RiskSpec& spec) {
  if (std::holds_alternative<Expectation>(spec) || std::holds_alternative<CVaR>(spec) ||
      std::holds_alternative<CVaRMixture>(spec)) {
    return 1.0;
  }
  if (const auto* m = std::get_if<MeanRisk>(&spec)) {
    if (std::holds_alternative<CVaR>(m->base) || std::holds_alternative<ExpectedExcess>(m->base) ||
        std::holds_alternative<CVaRMixture>(m->base)) {
      return 1.0 + m->rho;
    }
  }
  return std::nullopt;
}

Method default_method(const RiskSpec& spec) {
  return method_supports(Method::Extensive, spec) ? Method::Extensive : Method::Bnb;
}

std::string number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

std::string to_string(PerturbationMode m) {
  switch (m) {
    case PerturbationMode::WeightJitter: return "weight-dirichlet-jitter";
    case PerturbationMode::SupportJitter: return "support-gaussian-jitter";
    case PerturbationMode::MergeSplit: return "atom-merge-split";
  }
  return "?";
}

PerturbationMode parse_perturbation_mode(const std::string& s) {
  for (auto m : {PerturbationMode::WeightJitter, PerturbationMode::SupportJitter, PerturbationMode::MergeSplit}) {
    if (s == to_string(m)) return m;
  }
  throw std::invalid_argument("unknown perturbation mode '" + s +
                              "' (expected weight-dirichlet-jitter, support-gaussian-jitter or atom-merge-split)");
}

void PerturbationPlan::validate() const {
  if (magnitudes.empty()) throw std::invalid_argument("perturbation plan: no magnitudes");
  for (std::size_t k = 0; k < magnitudes.size(); ++k) {
    if (!std::isfinite(magnitudes[k]) || magnitudes[k] < 0.0) {
      throw std::invalid_argument("perturbation plan: magnitudes must be finite and >= 0");
    }
    if (k > 0 && magnitudes[k] < magnitudes[k - 1]) {
      throw std::invalid_argument("perturbation plan: magnitudes must be ascending");
    }
  }
  if (replications < 1) throw std::invalid_argument("perturbation plan: replications must be >= 1");
}

ScenarioSet perturb(const ScenarioSet& scen, PerturbationMode mode, double eps, std::uint64_t seed) {
  if (!std::isfinite(eps) || eps < 0.0) throw std::invalid_argument("perturb: eps must be finite and >= 0");
  if (eps == 0.0) return scen;
  std::mt19937_64 rng(seed);
  ScenarioSet out = scen;
  const int S = scen.size();
  switch (mode) {
    case PerturbationMode::WeightJitter: {
      const double lam = std::min(eps, 1.0);
      std::gamma_distribution<double> gam(1.0, 1.0);
      std::vector<double> w(static_cast<std::size_t>(S));
      double total = 0.0;
      for (double& x : w) total += (x = gam(rng));
      double sum = 0.0;
      for (int i = 0; i < S; ++i) {
        auto& pr = out.scenarios[static_cast<std::size_t>(i)].prob;
        pr = (1.0 - lam) * pr + lam * w[static_cast<std::size_t>(i)] / total;
        sum += pr;
      }
      for (auto& sc : out.scenarios) sc.prob /= sum;
      break;
    }
    case PerturbationMode::SupportJitter: {
      for (auto& sc : out.scenarios) {
        const Vector g = gaussian(rng, sc.z.size());
        sc.z += (eps / std::max(1.0, g.norm())) * g;
      }
      break;
    }
    case PerturbationMode::MergeSplit: {
      const auto i = static_cast<std::size_t>(std::uniform_int_distribution<int>(0, S - 1)(rng));
      Vector d = gaussian(rng, out.scenarios[i].z.size());
      const double n = d.norm();
      if (n > 0.0) d /= n;
      Scenario twin = out.scenarios[i];
      out.scenarios[i].prob *= 0.5;
      twin.prob = out.scenarios[i].prob;
      out.scenarios[i].z += eps * d;
      twin.z -= eps * d;
      out.scenarios.insert(out.scenarios.begin() + static_cast<std::ptrdiff_t>(i) + 1, std::move(twin));
      break;
    }
  }
  return out;
}

std::string StabilityReport::to_csv() const {
  std::ostringstream os;
  os << "mode,epsilon,rep,value,value_dist,x_dist,status\n";
  for (const auto& c : cells) {
    os << to_string(mode) << ',' << number(c.epsilon) << ',' << c.rep << ',' << number(c.value) << ','
       << number(c.value_dist) << ',' << number(c.x_dist) << ',' << c.status << '\n';
  }
  return os.str();
}

StabilityReport stability_sweep(const ProblemData& p, const ScenarioSet& scen, const RiskSpec& spec,
                                const PerturbationPlan& plan, const StabilityOptions& opts) {
  plan.validate();
  const Method method = opts.method.value_or(default_method(spec));
  const ModelResult base = solve_model(p, scen, spec, method, opts.model);
  if (!base.ok) throw std::runtime_error("stability_sweep: base model returned " + base.status);

  StabilityReport rep;
  rep.mode = plan.mode;
  rep.base_value = base.value;
  rep.base_x = base.x;

  const std::size_t K = plan.magnitudes.size();
  const auto R = static_cast<std::size_t>(plan.replications);
  rep.cells.resize(K * R);
  auto run = [&](std::size_t idx) {
    const std::size_t k = idx / R;
    const int r = static_cast<int>(idx % R);
    StabilityCell& c = rep.cells[idx];
    c.epsilon = plan.magnitudes[k];
    c.rep = r;
    try {
      const ScenarioSet moved = perturb(scen, plan.mode, c.epsilon, cell_seed(plan.seed, k, r));
      const ModelResult res = solve_model(p, moved, spec, method, opts.model);
      c.status = res.status;
      c.ok = res.ok;
      c.value = res.value;
      c.value_dist = std::abs(res.value - base.value);
      c.x_dist = (res.x - base.x).norm();
    } catch (const std::exception& e) {
      c.status = "Error";
      c.ok = false;
      c.value = c.value_dist = c.x_dist = std::nan("");
      c.message = e.what();
    }
  };
  const int workers = std::max(1, std::min<int>(opts.threads, static_cast<int>(K * R)));
  if (workers == 1) {
    for (std::size_t idx = 0; idx < K * R; ++idx) run(idx);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t idx = next++; idx < K * R; idx = next++) run(idx);
      });
    }
    for (auto& t : pool) t.join();
  }

  const bool moves_support = plan.mode != PerturbationMode::WeightJitter;
  const auto kappa = risk_lipschitz(spec);
  const double lip = moves_support && kappa ? *kappa * RecourseOracle(p).lipschitz_bound() : 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    StabilitySummary s;
    s.epsilon = plan.magnitudes[k];
    if (moves_support && kappa) s.bound = lip * s.epsilon;
    for (std::size_t r = 0; r < R; ++r) {
      const StabilityCell& c = rep.cells[k * R + r];
      if (!c.ok) {
        ++s.failures;
        rep.warnings.push_back("epsilon " + number(c.epsilon) + ", rep " + std::to_string(c.rep) + ": " + c.status +
                               (c.message.empty() ? "" : " (" + c.message + ")"));
        if (c.status == "Error") continue;
      }
      s.max_value_dist = std::max(s.max_value_dist, c.value_dist);
      s.max_x_dist = std::max(s.max_x_dist, c.x_dist);
    }
    if (s.bound && s.max_value_dist > *s.bound + 1e-6) {
      rep.warnings.push_back("epsilon " + number(s.epsilon) + ": value distance " + number(s.max_value_dist) +
                             " exceeds the Lipschitz estimate " + number(*s.bound));
    }
    rep.summary.push_back(s);
  }
  return rep;
}

}  // namespace stosdp
