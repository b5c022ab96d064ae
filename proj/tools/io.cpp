#include "io.hpp"

#include <stosdp/errors.hpp>

#include <json.hpp>

#include <fstream>
#include <initializer_list>
#include <sstream>

namespace stosdp::io {
namespace {

using json = nlohmann::json;

class Reader {
 public:
  explicit Reader(std::string source) : source_(std::move(source)) {}

  json parse(const std::string& text) const {
    try {
      return json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(source_ + ": " + e.what());
    }
  }

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw ParseError(source_ + ": " + (ptr.empty() ? "/" : ptr) + ": " + msg);
  }

  void object(const json& j, const std::string& ptr, std::initializer_list<const char*> allowed) const {
    if (!j.is_object()) fail(ptr, "expected an object");
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) fail(ptr + "/" + key, "unknown key");
    }
  }

  const json& at(const json& j, const std::string& ptr, const char* key) const {
    if (!j.contains(key)) fail(ptr + "/" + key, "missing");
    return j.at(key);
  }

  const json& array(const json& j, const std::string& ptr) const {
    if (!j.is_array()) fail(ptr, "expected an array");
    return j;
  }

  double number(const json& j, const std::string& ptr) const {
    if (!j.is_number()) fail(ptr, "expected a number");
    return j.get<double>();
  }

  long long integer(const json& j, const std::string& ptr) const {
    if (!j.is_number_integer()) fail(ptr, "expected an integer");
    return j.get<long long>();
  }

  void version(const json& j) const {
    const auto v = integer(at(j, "", "format_version"), "/format_version");
    if (v != kFormatVersion) fail("/format_version", "unsupported version " + std::to_string(v));
  }

  Vector vector(const json& j, const std::string& ptr) const {
    array(j, ptr);
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], ptr + "/" + std::to_string(i));
    return v;
  }

  SymMatrix sym(const json& j, const std::string& ptr, int dim) const {
    array(j, ptr);
    if (static_cast<int>(j.size()) != dim) fail(ptr, "expected " + std::to_string(dim) + " rows");
    Matrix m(dim, dim);
    for (int r = 0; r < dim; ++r) {
      const std::string rp = ptr + "/" + std::to_string(r);
      const json& row = array(j[static_cast<std::size_t>(r)], rp);
      if (static_cast<int>(row.size()) != dim) fail(rp, "expected " + std::to_string(dim) + " entries");
      for (int c = 0; c < dim; ++c) m(r, c) = number(row[static_cast<std::size_t>(c)], rp + "/" + std::to_string(c));
    }
    try {
      return SymMatrix(m);
    } catch (const std::invalid_argument& e) {
      fail(ptr, e.what());
    }
  }

  MatrixTuple tuple(const json& j, const std::string& ptr, int count, int dim) const {
    array(j, ptr);
    if (static_cast<int>(j.size()) != count) fail(ptr, "expected " + std::to_string(count) + " matrices");
    std::vector<SymMatrix> out;
    for (int k = 0; k < count; ++k) out.push_back(sym(j[static_cast<std::size_t>(k)], ptr + "/" + std::to_string(k), dim));
    return MatrixTuple(std::move(out));
  }

 private:
  std::string source_;
};

json rows(const SymMatrix& a) {
  json out = json::array();
  for (int i = 0; i < a.dim(); ++i) {
    json row = json::array();
    for (int j = 0; j < a.dim(); ++j) row.push_back(a(i, j));
    out.push_back(std::move(row));
  }
  return out;
}

json tuple_rows(const MatrixTuple& t) {
  json out = json::array();
  for (const auto& a : t) out.push_back(rows(a));
  return out;
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path.string() + ": cannot write file");
  out << text;
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

ProblemData parse_problem(const std::string& text, const std::string& source) {
  const Reader rd(source);
  const json doc = rd.parse(text);
  rd.object(doc, "", {"format_version", "dims", "c", "q", "T", "W", "X", "name", "description"});
  rd.version(doc);
  const json& dims = rd.at(doc, "", "dims");
  rd.object(dims, "/dims", {"n", "m", "s"});
  auto dim = [&](const char* k) {
    const auto v = rd.integer(rd.at(dims, "/dims", k), std::string("/dims/") + k);
    if (v < 1 || v > 100000) rd.fail(std::string("/dims/") + k, "must be a positive dimension");
    return static_cast<int>(v);
  };
  const int n = dim("n"), m = dim("m"), s = dim("s");
  ProblemData p{n,
                m,
                s,
                rd.sym(rd.at(doc, "", "c"), "/c", n),
                rd.sym(rd.at(doc, "", "q"), "/q", m),
                rd.tuple(rd.at(doc, "", "T"), "/T", s, n),
                rd.tuple(rd.at(doc, "", "W"), "/W", s, m),
                Spectrahedron::psd_cone(n)};
  if (doc.contains("X")) {
    const json& X = doc.at("X");
    rd.object(X, "/X", {"eq", "ineq", "trace_cap", "compact"});
    if (X.contains("eq")) {
      const json& eq = rd.array(X.at("eq"), "/X/eq");
      for (std::size_t k = 0; k < eq.size(); ++k) {
        const std::string ptr = "/X/eq/" + std::to_string(k);
        rd.object(eq[k], ptr, {"G", "g"});
        p.X.equalities.push_back(
            {rd.sym(rd.at(eq[k], ptr, "G"), ptr + "/G", p.n), rd.number(rd.at(eq[k], ptr, "g"), ptr + "/g")});
      }
    }
    if (X.contains("ineq")) {
      const json& in = rd.array(X.at("ineq"), "/X/ineq");
      for (std::size_t k = 0; k < in.size(); ++k) {
        const std::string ptr = "/X/ineq/" + std::to_string(k);
        rd.object(in[k], ptr, {"H", "h"});
        p.X.inequalities.push_back(
            {rd.sym(rd.at(in[k], ptr, "H"), ptr + "/H", p.n), rd.number(rd.at(in[k], ptr, "h"), ptr + "/h")});
      }
    }
    if (X.contains("trace_cap")) p.X.trace_cap = rd.number(X.at("trace_cap"), "/X/trace_cap");
    p.X.compact_claimed = p.X.trace_cap.has_value();
    if (X.contains("compact")) {
      if (!X.at("compact").is_boolean()) rd.fail("/X/compact", "expected true or false");
      p.X.compact_claimed = X.at("compact").get<bool>();
    }
  }
  return p;
}

ProblemData read_problem(const std::filesystem::path& path) { return parse_problem(read_text(path), path.string()); }

std::string problem_to_json(const ProblemData& p) {
  json X = json::object();
  json eq = json::array(), ineq = json::array();
  for (const auto& e : p.X.equalities) eq.push_back({{"G", rows(e.coeff)}, {"g", e.rhs}});
  for (const auto& h : p.X.inequalities) ineq.push_back({{"H", rows(h.coeff)}, {"h", h.rhs}});
  X["eq"] = eq;
  X["ineq"] = ineq;
  if (p.X.trace_cap) X["trace_cap"] = *p.X.trace_cap;
  X["compact"] = p.X.compact_claimed;
  const json doc = {{"format_version", kFormatVersion},
                    {"dims", {{"n", p.n}, {"m", p.m}, {"s", p.s}}},
                    {"c", rows(p.c)},
                    {"q", rows(p.q)},
                    {"T", tuple_rows(p.T)},
                    {"W", tuple_rows(p.W)},
                    {"X", X}};
  return doc.dump(2) + "\n";
}

ScenarioSet parse_scenarios(const std::string& text, const std::string& source) {
  const Reader rd(source);
  const json doc = rd.parse(text);
  rd.object(doc, "", {"format_version", "scenarios", "name", "description"});
  rd.version(doc);
  const json& list = rd.array(rd.at(doc, "", "scenarios"), "/scenarios");
  if (list.empty()) rd.fail("/scenarios", "no scenarios");
  ScenarioSet scen;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const std::string ptr = "/scenarios/" + std::to_string(i);
    rd.object(list[i], ptr, {"pi", "z"});
    scen.scenarios.push_back({rd.number(rd.at(list[i], ptr, "pi"), ptr + "/pi"), rd.vector(rd.at(list[i], ptr, "z"), ptr + "/z")});
  }
  return scen;
}

ScenarioSet read_scenarios(const std::filesystem::path& path) {
  return parse_scenarios(read_text(path), path.string());
}

std::string scenarios_to_json(const ScenarioSet& scen) {
  json list = json::array();
  for (const auto& s : scen.scenarios) list.push_back({{"pi", s.prob}, {"z", std::vector<double>(s.z.begin(), s.z.end())}});
  return json{{"format_version", kFormatVersion}, {"scenarios", list}}.dump(2) + "\n";
}

PerturbationPlan parse_plan(const std::string& text, const std::string& source) {
  const Reader rd(source);
  const json doc = rd.parse(text);
  rd.object(doc, "", {"format_version", "mode", "magnitudes", "replications", "seed"});
  rd.version(doc);
  PerturbationPlan plan;
  const json& mode = rd.at(doc, "", "mode");
  if (!mode.is_string()) rd.fail("/mode", "expected a string");
  try {
    plan.mode = parse_perturbation_mode(mode.get<std::string>());
  } catch (const std::invalid_argument& e) {
    rd.fail("/mode", e.what());
  }
  const Vector mags = rd.vector(rd.at(doc, "", "magnitudes"), "/magnitudes");
  plan.magnitudes.assign(mags.begin(), mags.end());
  if (doc.contains("replications")) plan.replications = static_cast<int>(rd.integer(doc.at("replications"), "/replications"));
  if (doc.contains("seed")) {
    const auto seed = rd.integer(doc.at("seed"), "/seed");
    if (seed < 0) rd.fail("/seed", "must be >= 0");
    plan.seed = static_cast<std::uint64_t>(seed);
  }
  try {
    plan.validate();
  } catch (const std::invalid_argument& e) {
    rd.fail("", e.what());
  }
  return plan;
}

PerturbationPlan read_plan(const std::filesystem::path& path) { return parse_plan(read_text(path), path.string()); }

std::string result_to_json(const ModelResult& r, const std::string& risk) {
  json doc = {{"format_version", kFormatVersion},
              {"method", to_string(r.method)},
              {"risk", risk},
              {"status", r.status},
              {"value", r.value},
              {"lower", r.lower},
              {"upper", r.upper},
              {"x", rows(r.x)},
              {"scenario_costs", r.scenario_costs},
              {"eta", r.eta},
              {"delta", r.delta},
              {"iterations", r.iterations},
              {"nodes", r.nodes}};
  return doc.dump(2) + "\n";
}

}  // namespace stosdp::io
