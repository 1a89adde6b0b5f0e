#include "caplab/config.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

using namespace caplab;

namespace {

const char* kVerifyConfig = R"({
  "command": "verify",
  "map": {"family": "radial_power", "exponent": 2.0},
  "domain": {"kind": "annulus", "center": [0, 0], "r_inner": 1.0,
             "r_outer": 2.0, "grid": 128},
  "image_domain": {"kind": "annulus", "center": [0, 0], "r_inner": 1.0,
                   "r_outer": 4.0, "grid": 128},
  "exponents": {"q": "inf", "s": 2.0},
  "checks": [{"kind": "transfer_identity"}],
  "output": {"path": "out.json", "format": "json"}
})";

}  // namespace

TEST_CASE("full verify config parses") {
  const ExperimentConfig cfg = parse_config_text(kVerifyConfig, "radial");
  CHECK(cfg.command == "verify");
  CHECK(cfg.name == "radial");
  CHECK(cfg.map.family == Family::radial_power);
  CHECK(cfg.map.exponent == doctest::Approx(2.0));
  CHECK(cfg.domain.kind == DomainKind::annulus);
  CHECK(cfg.domain.grid_n == 128);
  CHECK(cfg.has_image_domain);
  CHECK(cfg.image_domain.r_outer == doctest::Approx(4.0));
  CHECK(std::isinf(cfg.q));
  CHECK(cfg.s == doctest::Approx(2.0));
  CHECK(std::isnan(cfg.p));
  REQUIRE(cfg.checks.size() == 1);
  CHECK(cfg.checks[0].kind == "transfer_identity");
  CHECK(cfg.output.path == "out.json");
  CHECK(cfg.source_text == kVerifyConfig);
}

TEST_CASE("compact schema spelling parses") {
  // short exponent key and explicit dimension on the domain
  const ExperimentConfig cfg = parse_config_text(R"({
    "command": "distortion",
    "map": {"family": "radial_power", "a": 0.5},
    "domain": {"kind": "annulus", "center": [0, 0], "r_inner": 0.5,
               "r_outer": 1.0, "n": 2, "grid": 64},
    "exponents": {"p": 2.0, "q": 2.0}})", "x");
  CHECK(cfg.map.exponent == doctest::Approx(0.5));
  CHECK(cfg.domain.dim == 2);
  // a contradictory dimension is refused
  CHECK_THROWS_AS(parse_config_text(R"({
    "command": "distortion",
    "map": {"family": "identity"},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "n": 3, "grid": 8}})",
                                    "x"),
                  ValidationError);
}

TEST_CASE("unknown keys are rejected with their path") {
  const std::string bad = R"({"command": "distortion",
    "map": {"family": "identity", "exponnent": 1},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8}})";
  try {
    parse_config_text(bad, "bad");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("exponnent") != std::string::npos);
    CHECK(msg.find("map") != std::string::npos);
  }
}

TEST_CASE("missing required keys are named") {
  try {
    parse_config_text(R"({"command": "distortion"})", "x");
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("map") != std::string::npos);
  }
}

TEST_CASE("bad command is rejected") {
  CHECK_THROWS_AS(parse_config_text(R"({"command": "solve",
    "map": {"family": "identity"},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8}})",
                                    "x"),
                  ValidationError);
}

TEST_CASE("infinities parse from strings") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "command": "distortion",
    "map": {"family": "identity"},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8},
    "exponents": {"p": "inf", "q": 2.0}})", "x");
  CHECK(std::isinf(cfg.p));
  CHECK(cfg.p > 0);
}

TEST_CASE("condenser exponent falls back to the exponent block") {
  const char* base = R"({
    "command": "capacity",
    "map": {"family": "identity"},
    "domain": {"kind": "annulus", "center": [0,0], "r_inner": 1.0,
               "r_outer": 2.0, "grid": 16},
    "condenser": {"F0": {"kind": "inner_ring"}, "F1": {"kind": "outer_ring"}},
    "exponents": {"p": 3.0}})";
  const ExperimentConfig cfg = parse_config_text(base, "x");
  CHECK(cfg.has_condenser);
  const Condenser c = build_condenser(cfg);
  CHECK(c.p == doctest::Approx(3.0));
  CHECK(c.plate_zero.kind == MaskKind::inner_ring);

  // no exponent anywhere: the condenser cannot be built
  const ExperimentConfig no_p = parse_config_text(R"({
    "command": "capacity",
    "map": {"family": "identity"},
    "domain": {"kind": "annulus", "center": [0,0], "r_inner": 1.0,
               "r_outer": 2.0, "grid": 16},
    "condenser": {"F0": {"kind": "inner_ring"}, "F1": {"kind": "outer_ring"}}})",
                                                 "x");
  CHECK_THROWS_AS(build_condenser(no_p), ValidationError);
}

TEST_CASE("condenser block may pin its own exponent") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "command": "capacity",
    "map": {"family": "identity"},
    "domain": {"kind": "annulus", "center": [0,0], "r_inner": 1.0,
               "r_outer": 2.0, "grid": 16},
    "condenser": {"p": 2.5, "F0": {"kind": "inner_ring"},
                  "F1": {"kind": "outer_ring"}},
    "exponents": {"p": 3.0}})", "x");
  CHECK(build_condenser(cfg).p == doctest::Approx(2.5));
}

TEST_CASE("composed maps parse inner then outer") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "command": "distortion",
    "map": {"family": "composed", "parts": [
      {"family": "radial_power", "exponent": 2.0},
      {"family": "linear", "matrix": [[2, 0], [0, 1]]}]},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8},
    "exponents": {"p": 2.0, "q": 2.0}})", "x");
  CHECK(cfg.map.family == Family::composed);
  CHECK(cfg.map.parts[0].family == Family::radial_power);
  CHECK(cfg.map.parts[1].family == Family::linear);
  Vector x(2);
  x << 0.3, 0.4;  // |x| = 0.5; radial then stretch
  const Vector y = evaluate(cfg.map, x);
  CHECK(y[0] == doctest::Approx(2.0 * 0.5 * 0.3));
  CHECK(y[1] == doctest::Approx(0.5 * 0.4));
}

TEST_CASE("jacobian scheme selection") {
  const ExperimentConfig fd = parse_config_text(R"({
    "command": "distortion",
    "map": {"family": "identity"},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8},
    "exponents": {"p": 2.0, "q": 2.0},
    "jacobian": {"scheme": "central_fd", "step": 1e-4}})", "x");
  CHECK(fd.scheme.kind == Scheme::Kind::central_fd);
  CHECK(fd.scheme.step == doctest::Approx(1e-4));
  CHECK_THROWS_AS(parse_config_text(R"({
    "command": "distortion",
    "map": {"family": "identity"},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8},
    "jacobian": {"scheme": "forward"}})", "x"),
                  ValidationError);
}

TEST_CASE("reports are deterministic byte for byte") {
  const ExperimentConfig cfg = parse_config_text(kVerifyConfig, "radial");
  DistortionReport rep;
  rep.K_pq = std::sqrt(2.0);
  rep.K_I_qs = kInf;
  rep.seminorm_L1q = 2.0;
  rep.adj_Lr_norm = 2.0;
  rep.jacobian_sign_fraction = 1.0;
  rep.finite_distortion_flag = true;
  rep.ball_class_verdict = "member";
  rep.reason = "test";
  rep.q = 2.0;
  rep.r = 2.0;
  rep.grid_n = 8;
  rep.dim = 2;
  const std::string a = distortion_report_json(cfg, rep);
  const std::string b = distortion_report_json(cfg, rep);
  CHECK(a == b);
  CHECK(a.find("\"inf\"") != std::string::npos);      // K_I_qs encodes as text
  CHECK(a.find("config_echo") != std::string::npos);  // verbatim input kept
  CHECK(a.find("timestamp") == std::string::npos);
}

TEST_CASE("verify report json aggregates a summary") {
  const ExperimentConfig cfg = parse_config_text(kVerifyConfig, "radial");
  VerificationVerdict pass;
  pass.name = "transfer_identity";
  pass.lhs = 1.0;
  pass.rhs = 1.0;
  pass.slack = 1e-9;
  pass.tolerance_used = 1e-6;
  pass.passed = true;
  pass.identity = true;
  VerificationVerdict vac;
  vac.name = "energy_lower:bump";
  vac.lhs = 0.0;
  vac.rhs = kInf;
  vac.passed = true;
  vac.vacuous = true;
  const std::string s = verify_report_json(cfg, {pass, vac});
  CHECK(s.find("\"total\": 2") != std::string::npos);
  CHECK(s.find("\"passed\": 2") != std::string::npos);
  CHECK(s.find("\"vacuous\": 1") != std::string::npos);
  CHECK(s.find("worst_identity_residual") != std::string::npos);
}

TEST_CASE("csv rows quote nothing and match the header arity") {
  VerificationVerdict v;
  v.name = "transfer_identity";
  v.lhs = 2.0;
  v.rhs = 2.0;
  v.slack = 0.0;
  v.tolerance_used = 1e-6;
  v.passed = true;
  v.identity = true;
  const std::string header = verdict_csv_header();
  const std::string row = verdict_csv_row("diag", v);
  const auto count = [](const std::string& s) {
    return std::count(s.begin(), s.end(), ',');
  };
  CHECK(count(header) == count(row));
  CHECK(row.find("diag") == 0);
}

TEST_CASE("config file stem names the experiment") {
  const std::string path = "test_config_stem_tmp.json";
  {
    std::ofstream out(path);
    out << R"({"command": "distortion",
               "map": {"family": "identity"},
               "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8},
               "exponents": {"p": 2.0, "q": 2.0}})";
  }
  const ExperimentConfig cfg = load_config(path);
  std::remove(path.c_str());
  CHECK(cfg.name == "test_config_stem_tmp");
}

TEST_CASE("name key overrides the stem") {
  const ExperimentConfig cfg = parse_config_text(R"({
    "command": "distortion",
    "name": "custom",
    "map": {"family": "identity"},
    "domain": {"kind": "box", "lo": [0,0], "hi": [1,1], "grid": 8},
    "exponents": {"p": 2.0, "q": 2.0}})", "stem");
  CHECK(cfg.name == "custom");
}

TEST_CASE("malformed json is a validation error") {
  CHECK_THROWS_AS(parse_config_text("{not json", "x"), ValidationError);
  CHECK_THROWS_AS(parse_config_text("[1, 2]", "x"), ValidationError);
  CHECK_THROWS_AS(load_config("no_such_file_anywhere.json"), ValidationError);
}
