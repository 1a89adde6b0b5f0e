#include "caplab/config.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

namespace caplab {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ValidationError("config: " + path + ": " + msg);
}

void expect_object(const json& j, const std::string& path) {
  if (!j.is_object()) fail(path, "expected an object");
}

void expect_keys(const json& obj, const std::string& path,
                 std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : allowed) known = known || item.key() == k;
    if (!known) fail(path, "unknown key '" + item.key() + "'");
  }
}

const json& require(const json& obj, const std::string& path,
                    const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(path, std::string("missing key '") + key + "'");
  return *it;
}

Real get_real(const json& j, const std::string& path) {
  if (j.is_number()) return j.get<Real>();
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return kNaN;
    fail(path, "expected a number or \"inf\", got \"" + s + "\"");
  }
  fail(path, "expected a number");
}

int get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  return j.get<int>();
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) fail(path, "expected a boolean");
  return j.get<bool>();
}

Vector get_vector(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a nonempty array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i)
    v[static_cast<Eigen::Index>(i)] =
        get_real(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Matrix get_matrix(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected an array of rows");
  const std::size_t rows = j.size();
  std::size_t cols = 0;
  Matrix m;
  for (std::size_t i = 0; i < rows; ++i) {
    const std::string rp = path + "[" + std::to_string(i) + "]";
    if (!j[i].is_array() || j[i].empty()) fail(rp, "expected a row array");
    if (i == 0) {
      cols = j[i].size();
      m.resize(rows, cols);
    } else if (j[i].size() != cols) {
      fail(rp, "ragged matrix rows");
    }
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          get_real(j[i][k], rp + "[" + std::to_string(k) + "]");
  }
  return m;
}

MappingSpec parse_map(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string family =
      get_string(require(j, path, "family"), path + ".family");
  if (family == "identity") {
    expect_keys(j, path, {"family"});
    return MappingSpec::identity();
  }
  if (family == "linear") {
    expect_keys(j, path, {"family", "matrix"});
    return MappingSpec::linear(
        get_matrix(require(j, path, "matrix"), path + ".matrix"));
  }
  if (family == "radial_power") {
    expect_keys(j, path, {"family", "exponent", "a"});
    if (j.contains("a") && j.contains("exponent"))
      fail(path, "give either 'a' or 'exponent', not both");
    if (j.contains("a"))
      return MappingSpec::radial_power(get_real(j["a"], path + ".a"));
    return MappingSpec::radial_power(
        get_real(require(j, path, "exponent"), path + ".exponent"));
  }
  if (family == "planar_stretch") {
    expect_keys(j, path, {"family", "factor"});
    return MappingSpec::planar_stretch(
        get_real(require(j, path, "factor"), path + ".factor"));
  }
  if (family == "grid_field") {
    expect_keys(j, path, {"family", "path"});
    const std::string file =
        get_string(require(j, path, "path"), path + ".path");
    const bool binary = file.size() > 4 &&
                        file.compare(file.size() - 4, 4, ".bin") == 0;
    auto data = std::make_shared<GridFieldData>(
        binary ? load_grid_field_binary(file) : load_grid_field_csv(file));
    return MappingSpec::grid_field(std::move(data));
  }
  if (family == "composed") {
    expect_keys(j, path, {"family", "parts"});
    const json& parts = require(j, path, "parts");
    if (!parts.is_array() || parts.size() != 2)
      fail(path + ".parts", "expected exactly two parts [inner, outer]");
    return MappingSpec::composed(parse_map(parts[0], path + ".parts[0]"),
                                 parse_map(parts[1], path + ".parts[1]"));
  }
  fail(path + ".family", "unknown family '" + family + "'");
}

Domain parse_domain(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string kind = get_string(require(j, path, "kind"), path + ".kind");
  const int grid = get_int(require(j, path, "grid"), path + ".grid");
  // "n" is redundant with the corner/center arity but accepted for clarity
  const auto check_n = [&](const Domain& d) {
    if (j.contains("n") && get_int(j["n"], path + ".n") != d.dim)
      fail(path + ".n", "dimension disagrees with the coordinate arrays");
    return d;
  };
  if (kind == "box") {
    expect_keys(j, path, {"kind", "lo", "hi", "n", "grid"});
    return check_n(
        Domain::box(get_vector(require(j, path, "lo"), path + ".lo"),
                    get_vector(require(j, path, "hi"), path + ".hi"), grid));
  }
  if (kind == "ball") {
    expect_keys(j, path, {"kind", "center", "radius", "n", "grid"});
    return check_n(Domain::ball(
        get_vector(require(j, path, "center"), path + ".center"),
        get_real(require(j, path, "radius"), path + ".radius"), grid));
  }
  if (kind == "annulus") {
    expect_keys(j, path, {"kind", "center", "r_inner", "r_outer", "n", "grid"});
    return check_n(Domain::annulus(
        get_vector(require(j, path, "center"), path + ".center"),
        get_real(require(j, path, "r_inner"), path + ".r_inner"),
        get_real(require(j, path, "r_outer"), path + ".r_outer"), grid));
  }
  fail(path + ".kind", "unknown domain kind '" + kind + "'");
}

CellMask parse_mask(const json& j, const std::string& path) {
  expect_object(j, path);
  const std::string kind = get_string(require(j, path, "kind"), path + ".kind");
  if (kind == "inner_ring") {
    expect_keys(j, path, {"kind"});
    return CellMask::inner_ring();
  }
  if (kind == "outer_ring") {
    expect_keys(j, path, {"kind"});
    return CellMask::outer_ring();
  }
  if (kind == "all") {
    expect_keys(j, path, {"kind"});
    return CellMask::all();
  }
  if (kind == "ball" || kind == "outside_ball") {
    expect_keys(j, path, {"kind", "center", "radius"});
    const Vector c = get_vector(require(j, path, "center"), path + ".center");
    const Real r = get_real(require(j, path, "radius"), path + ".radius");
    return kind == "ball" ? CellMask::ball(c, r) : CellMask::outside_ball(c, r);
  }
  if (kind == "box") {
    expect_keys(j, path, {"kind", "lo", "hi"});
    return CellMask::box(get_vector(require(j, path, "lo"), path + ".lo"),
                         get_vector(require(j, path, "hi"), path + ".hi"));
  }
  if (kind == "slab") {
    expect_keys(j, path, {"kind", "axis", "at_min", "layers"});
    const int axis = get_int(require(j, path, "axis"), path + ".axis");
    const bool at_min = j.contains("at_min")
                            ? get_bool(j["at_min"], path + ".at_min")
                            : true;
    const int layers =
        j.contains("layers") ? get_int(j["layers"], path + ".layers") : 1;
    return CellMask::slab(axis, at_min, layers);
  }
  if (kind == "cells") {
    expect_keys(j, path, {"kind", "cells"});
    const json& list = require(j, path, "cells");
    if (!list.is_array()) fail(path + ".cells", "expected an array");
    std::vector<std::int64_t> flat;
    flat.reserve(list.size());
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string ip = path + ".cells[" + std::to_string(i) + "]";
      if (!list[i].is_number_integer()) fail(ip, "expected an integer");
      flat.push_back(list[i].get<std::int64_t>());
    }
    return CellMask::cells(std::move(flat));
  }
  fail(path + ".kind", "unknown mask kind '" + kind + "'");
}

FamilySpec parse_family(const json& j, const std::string& path) {
  expect_object(j, path);
  expect_keys(j, path, {"kind", "center", "scale", "count"});
  FamilySpec f;
  if (j.contains("kind")) f.kind = get_string(j["kind"], path + ".kind");
  if (j.contains("center"))
    f.center = get_vector(j["center"], path + ".center");
  if (j.contains("scale")) f.scale = get_real(j["scale"], path + ".scale");
  if (j.contains("count")) f.count = get_int(j["count"], path + ".count");
  return f;
}

SolverConfig parse_solver(const json& j, const std::string& path) {
  expect_object(j, path);
  expect_keys(j, path,
              {"tol_energy", "max_iter", "eps_schedule", "jacobi_sweeps",
               "bracket"});
  SolverConfig s;
  if (j.contains("tol_energy"))
    s.tol_energy = get_real(j["tol_energy"], path + ".tol_energy");
  if (j.contains("max_iter")) {
    if (!j["max_iter"].is_number_integer())
      fail(path + ".max_iter", "expected an integer");
    s.max_iter = j["max_iter"].get<std::int64_t>();
  }
  if (j.contains("eps_schedule")) {
    const json& sched = j["eps_schedule"];
    if (!sched.is_array()) fail(path + ".eps_schedule", "expected an array");
    s.eps_schedule.clear();
    for (std::size_t i = 0; i < sched.size(); ++i)
      s.eps_schedule.push_back(get_real(
          sched[i], path + ".eps_schedule[" + std::to_string(i) + "]"));
  }
  if (j.contains("jacobi_sweeps"))
    s.jacobi_sweeps = get_int(j["jacobi_sweeps"], path + ".jacobi_sweeps");
  if (j.contains("bracket"))
    s.bracket = get_bool(j["bracket"], path + ".bracket");
  return s;
}

Scheme parse_scheme(const json& j, const std::string& path) {
  expect_object(j, path);
  expect_keys(j, path, {"scheme", "step"});
  const std::string kind =
      get_string(require(j, path, "scheme"), path + ".scheme");
  if (kind == "analytic") return Scheme::analytic();
  if (kind == "central_fd") {
    Real step = 0.0;
    if (j.contains("step")) step = get_real(j["step"], path + ".step");
    return Scheme::central_fd(step);
  }
  fail(path + ".scheme", "unknown scheme '" + kind + "'");
}

CheckRequest parse_check(const json& j, const std::string& path) {
  expect_object(j, path);
  expect_keys(j, path, {"kind", "integrand", "set"});
  CheckRequest c;
  c.kind = get_string(require(j, path, "kind"), path + ".kind");
  const bool cov = c.kind == "change_of_variables";
  if (!cov && (j.contains("integrand") || j.contains("set")))
    fail(path, "'integrand'/'set' only apply to change_of_variables");
  if (j.contains("integrand"))
    c.integrand = get_string(j["integrand"], path + ".integrand");
  if (j.contains("set")) c.set = parse_mask(j["set"], path + ".set");
  return c;
}

// --- serialization ------------------------------------------------------

json jreal(Real v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

json jmetadata(const VerificationVerdict& v) {
  json m = json::object();
  for (const auto& [k, val] : v.metadata) m[k] = val;
  return m;
}

json jverdict(const VerificationVerdict& v) {
  json j = json::object();
  j["name"] = v.name;
  j["lhs"] = jreal(v.lhs);
  j["rhs"] = jreal(v.rhs);
  j["slack"] = jreal(v.slack);
  j["tolerance"] = jreal(v.tolerance_used);
  j["passed"] = v.passed;
  j["vacuous"] = v.vacuous;
  j["identity"] = v.identity;
  j["metadata"] = jmetadata(v);
  return j;
}

json report_head(const ExperimentConfig& config) {
  json j = json::object();
  j["tool"] = "caplab";
  j["config_name"] = config.name;
  j["command"] = config.command;
  return j;
}

std::string dump(json j, const ExperimentConfig& config) {
  j["config_echo"] = config.source_text;
  return j.dump(2) + "\n";
}

std::string csv_num(Real v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::string& name) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ValidationError("config: invalid JSON in " + name + ": " + e.what());
  }
  expect_object(j, name);
  expect_keys(j, name,
              {"command", "name", "map", "domain", "image_domain", "exponents",
               "condenser", "family", "solver", "jacobian", "checks", "output",
               "seed", "tol"});

  ExperimentConfig c;
  c.source_text = text;
  c.name = j.contains("name") ? get_string(j["name"], name + ".name") : name;
  c.command = get_string(require(j, name, "command"), name + ".command");
  if (c.command != "distortion" && c.command != "capacity" &&
      c.command != "verify")
    fail(name + ".command", "unknown command '" + c.command + "'");

  c.map = parse_map(require(j, name, "map"), name + ".map");
  c.domain = parse_domain(require(j, name, "domain"), name + ".domain");
  if (j.contains("image_domain")) {
    c.image_domain = parse_domain(j["image_domain"], name + ".image_domain");
    c.has_image_domain = true;
  }
  if (j.contains("exponents")) {
    const json& e = j["exponents"];
    const std::string ep = name + ".exponents";
    expect_object(e, ep);
    expect_keys(e, ep, {"p", "q", "s", "r"});
    if (e.contains("p")) c.p = get_real(e["p"], ep + ".p");
    if (e.contains("q")) c.q = get_real(e["q"], ep + ".q");
    if (e.contains("s")) c.s = get_real(e["s"], ep + ".s");
    if (e.contains("r")) c.r = get_real(e["r"], ep + ".r");
  }
  if (j.contains("condenser")) {
    const json& cd = j["condenser"];
    const std::string cp = name + ".condenser";
    expect_object(cd, cp);
    expect_keys(cd, cp, {"p", "F0", "F1"});
    if (cd.contains("p")) c.condenser_p = get_real(cd["p"], cp + ".p");
    c.plate_f0 = parse_mask(require(cd, cp, "F0"), cp + ".F0");
    c.plate_f1 = parse_mask(require(cd, cp, "F1"), cp + ".F1");
    c.has_condenser = true;
  }
  if (j.contains("family"))
    c.family = parse_family(j["family"], name + ".family");
  if (j.contains("solver"))
    c.solver = parse_solver(j["solver"], name + ".solver");
  if (j.contains("jacobian"))
    c.scheme = parse_scheme(j["jacobian"], name + ".jacobian");
  if (j.contains("checks")) {
    const json& ch = j["checks"];
    if (!ch.is_array()) fail(name + ".checks", "expected an array");
    for (std::size_t i = 0; i < ch.size(); ++i)
      c.checks.push_back(
          parse_check(ch[i], name + ".checks[" + std::to_string(i) + "]"));
  }
  if (j.contains("output")) {
    const json& o = j["output"];
    const std::string op = name + ".output";
    expect_object(o, op);
    expect_keys(o, op, {"path", "format"});
    if (o.contains("path")) c.output.path = get_string(o["path"], op + ".path");
    if (o.contains("format")) {
      c.output.format = get_string(o["format"], op + ".format");
      if (c.output.format != "json" && c.output.format != "csv")
        fail(op + ".format", "expected json or csv");
    }
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer())
      fail(name + ".seed", "expected an integer");
    c.seed = j["seed"].get<long long>();
  }
  if (j.contains("tol")) c.tol = get_real(j["tol"], name + ".tol");
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string stem = path;
  if (const auto slash = stem.find_last_of('/'); slash != std::string::npos)
    stem = stem.substr(slash + 1);
  if (const auto dot = stem.find_last_of('.'); dot != std::string::npos)
    stem = stem.substr(0, dot);
  return parse_config_text(buf.str(), stem);
}

Condenser build_condenser(const ExperimentConfig& config) {
  if (!config.has_condenser)
    throw ValidationError("config: " + config.name +
                          ": missing key 'condenser'");
  Condenser c;
  c.domain = config.domain;
  c.plate_zero = config.plate_f0;
  c.plate_one = config.plate_f1;
  const Real p = std::isnan(config.condenser_p) ? config.p : config.condenser_p;
  if (std::isnan(p))
    throw ValidationError("config: " + config.name +
                          ": condenser.p (or exponents.p) is required");
  c.p = p;
  return c;
}

std::string distortion_report_json(const ExperimentConfig& config,
                                   const DistortionReport& r) {
  json j = report_head(config);
  json body = json::object();
  body["K_pq"] = jreal(r.K_pq);
  body["K_I_qs"] = jreal(r.K_I_qs);
  body["seminorm_L1q"] = jreal(r.seminorm_L1q);
  body["adj_Lr_norm"] = jreal(r.adj_Lr_norm);
  body["jacobian_sign_fraction"] = jreal(r.jacobian_sign_fraction);
  body["finite_distortion"] = r.finite_distortion_flag;
  body["ball_class_verdict"] = r.ball_class_verdict;
  body["reason"] = r.reason;
  body["hyp_q_gt_n_minus_1"] = r.hyp_q_gt_n_minus_1;
  body["hyp_r_ge_conjugate"] = r.hyp_r_ge_conjugate;
  body["excluded_cells"] = r.excluded_cell_count;
  body["q"] = jreal(r.q);
  body["r"] = jreal(r.r);
  body["grid_n"] = r.grid_n;
  body["dim"] = r.dim;
  j["report"] = std::move(body);
  return dump(std::move(j), config);
}

std::string capacity_report_json(const ExperimentConfig& config,
                                 const CapacityResult& r) {
  json j = report_head(config);
  json body = json::object();
  body["value"] = jreal(r.value);
  body["grid_n"] = r.grid_n;
  body["dim"] = r.dim;
  body["iterations"] = r.iterations;
  body["final_grad_norm"] = jreal(r.final_grad_norm);
  body["cells_f0"] = r.cells_f0;
  body["cells_f1"] = r.cells_f1;
  body["cells_unknown"] = r.cells_unknown;
  json sched = json::array();
  for (const Real e : r.eps_used) sched.push_back(jreal(e));
  body["epsilon_schedule"] = std::move(sched);
  json warn = json::array();
  for (const std::string& w : r.warnings) warn.push_back(w);
  body["warnings"] = std::move(warn);
  body["value_plates_grown"] = jreal(r.value_plates_grown);
  body["value_plates_shrunk"] = jreal(r.value_plates_shrunk);
  j["report"] = std::move(body);
  return dump(std::move(j), config);
}

std::string verify_report_json(
    const ExperimentConfig& config,
    const std::vector<VerificationVerdict>& verdicts) {
  json j = report_head(config);
  json arr = json::array();
  int passed = 0, failed = 0, vacuous = 0;
  Real worst_slack = kInf;
  Real worst_residual = 0.0;
  for (const VerificationVerdict& v : verdicts) {
    arr.push_back(jverdict(v));
    (v.passed ? passed : failed) += 1;
    if (v.vacuous) ++vacuous;
    if (v.identity)
      worst_residual = std::max(worst_residual, v.slack);
    else if (!v.vacuous)
      worst_slack = std::min(worst_slack, v.slack);
  }
  j["verdicts"] = std::move(arr);
  json summary = json::object();
  summary["total"] = verdicts.size();
  summary["passed"] = passed;
  summary["failed"] = failed;
  summary["vacuous"] = vacuous;
  summary["worst_inequality_slack"] = jreal(worst_slack);
  summary["worst_identity_residual"] = jreal(worst_residual);
  j["summary"] = std::move(summary);
  return dump(std::move(j), config);
}

std::string capacity_minimizer_csv(const ExperimentConfig& config,
                                   const CapacityResult& r) {
  std::ostringstream out;
  const int dim = r.dim;
  for (int d = 0; d < dim; ++d) out << "i" << d << ",";
  out << "value\n";
  std::vector<int> idx(dim);
  for (std::int64_t c = 0; c < std::ssize(r.minimizer); ++c) {
    config.domain.unflatten(c, idx);
    for (int d = 0; d < dim; ++d) out << idx[d] << ",";
    out << csv_num(r.minimizer[c]) << "\n";
  }
  return out.str();
}

std::string distortion_report_csv(const DistortionReport& r) {
  std::ostringstream out;
  out << "key,value\n";
  out << "K_pq," << csv_num(r.K_pq) << "\n";
  out << "K_I_qs," << csv_num(r.K_I_qs) << "\n";
  out << "seminorm_L1q," << csv_num(r.seminorm_L1q) << "\n";
  out << "adj_Lr_norm," << csv_num(r.adj_Lr_norm) << "\n";
  out << "jacobian_sign_fraction," << csv_num(r.jacobian_sign_fraction)
      << "\n";
  out << "finite_distortion," << (r.finite_distortion_flag ? 1 : 0) << "\n";
  out << "ball_class_verdict," << r.ball_class_verdict << "\n";
  out << "excluded_cells," << r.excluded_cell_count << "\n";
  out << "q," << csv_num(r.q) << "\n";
  out << "r," << csv_num(r.r) << "\n";
  out << "grid_n," << r.grid_n << "\n";
  out << "dim," << r.dim << "\n";
  return out.str();
}

std::string verdict_csv_header() {
  return "config,name,lhs,rhs,slack,tolerance,passed,vacuous,identity\n";
}

std::string verdict_csv_row(const std::string& config_name,
                            const VerificationVerdict& v) {
  std::ostringstream out;
  out << config_name << "," << v.name << "," << csv_num(v.lhs) << ","
      << csv_num(v.rhs) << "," << csv_num(v.slack) << ","
      << csv_num(v.tolerance_used) << "," << (v.passed ? 1 : 0) << ","
      << (v.vacuous ? 1 : 0) << "," << (v.identity ? 1 : 0) << "\n";
  return out.str();
}

}  // namespace caplab
