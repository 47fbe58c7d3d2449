#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qdnw/cli.hpp"
#include "qdnw/errors.hpp"

using namespace qdnw;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qdnw_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

ErrorKind parse_kind(const std::string& text) {
    try {
        (void)parse_config(text, "t.json");
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;
}

const char* kWitness = R"({
  "seed": 7,
  "metric": {"kind": "minkowski", "d": 3},
  "nonlinearity": {"N0": "g", "N1": "0", "M": "G0"},
  "symbol": {"attempts": 100, "threshold": 1e-4, "count": 10}
})";

const char* kZero = R"({
  "metric": {"kind": "minkowski", "d": 1},
  "nonlinearity": {"N0": "0", "N1": "0", "M": "0"},
  "grid": {"T": 1.0, "lower": [-2.0], "upper": [2.0], "cells": [80], "cfl": 0.8},
  "sources": [
    {"kind": "bump", "center": [0.3, -0.5], "width": [0.25, 0.25]},
    {"kind": "bump", "center": [0.3, 0.5], "width": [0.25, 0.25]}
  ],
  "expansion": {"order": 2}
})";

int run_text(const std::string& sub, const std::string& text, const fs::path& dir, cli::RunOptions opt = {},
             std::string* err_out = nullptr) {
    const ScenarioConfig cfg = parse_config(text, "t.json");
    opt.out_dir = dir.string();
    std::ostringstream out, err;
    const int code = cli::run(sub, cfg, opt, out, err);
    if (err_out) *err_out = err.str();
    return code;
}

}  // namespace

TEST(Config, Fnv1aVectors) {
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
    EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(Config, MalformedJsonHasLineAndColumn) {
    try {
        (void)parse_config("{\n  \"seed\": 1,\n  \"metric\" {}\n}", "bad.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::ParseError);
        EXPECT_NE(std::string(e.what()).find("bad.json:3:"), std::string::npos) << e.what();
    }
}

TEST(Config, UnknownKeysRejectedWithPath) {
    try {
        (void)parse_config(R"({"metric": {"kind": "minkowski", "dim": 3}})", "x.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::SchemaError);
        EXPECT_NE(std::string(e.what()).find("metric.dim: unknown key"), std::string::npos) << e.what();
    }
    EXPECT_EQ(parse_kind(R"({"sources": [{"kind": "bump", "centre": [0, 0]}]})"), ErrorKind::SchemaError);
    EXPECT_EQ(parse_kind(R"({"grid": {"T": "long"}})"), ErrorKind::SchemaError);
    EXPECT_EQ(parse_kind(R"({"metric": {"kind": "schwarzschild"}})"), ErrorKind::SchemaError);
    EXPECT_EQ(parse_kind(R"([1, 2])"), ErrorKind::SchemaError);
}

TEST(Config, HashIgnoresFormatting) {
    const auto a = parse_config(R"({"seed": 1, "metric": {"kind": "minkowski", "d": 1}})");
    const auto b = parse_config("{\n  \"metric\": {\"d\": 1, \"kind\": \"minkowski\"},\n  \"seed\": 1\n}");
    EXPECT_EQ(a.hash(), b.hash());
    EXPECT_EQ(a.seed, 1u);
}

TEST(Config, ToleranceScaling) {
    auto c = parse_config(R"({"tolerances": {"tol_dec": 2e-9}})");
    EXPECT_DOUBLE_EQ(c.tolerance("tol_dec", 1.0), 2e-9);
    EXPECT_DOUBLE_EQ(c.tolerance("tol_null", 1e-10), 1e-10);
    c.tol_scale = 10.0;
    EXPECT_DOUBLE_EQ(c.tolerance("tol_dec", 1.0), 2e-8);
}

TEST(Config, MetricCatalog) {
    EXPECT_EQ(build_metric(Json::parse(R"({"kind": "minkowski", "d": 2})")).dim(), 3);
    const auto conf = build_metric(Json::parse(R"({"kind": "conformal_minkowski", "d": 1, "gamma": 0.5})"));
    EXPECT_NEAR(conf.metric(Vec::Zero(2))(1, 1), std::exp(1.0), 1e-14);
    const auto sphere = build_metric(Json::parse(R"({"kind": "ultrastatic_sphere"})"));
    EXPECT_EQ(sphere.kind(), MetricSpec::Kind::UltrastaticSphere);
    const auto prod = build_metric(Json::parse(R"({"kind": "product", "d": 2, "beta": 2.0, "kappa": {"11": 3.0, "12": 0.5}})"));
    const Mat g = prod.metric(Vec::Zero(3));
    EXPECT_DOUBLE_EQ(g(1, 2), 0.5);
    EXPECT_DOUBLE_EQ(g(2, 2), 1.0);
    const auto table = build_metric(Json::parse(R"({"kind": "coefficient_table", "d": 1, "table": [[-2, 0], [0, 1]]})"));
    EXPECT_DOUBLE_EQ(table.metric(Vec::Zero(2))(0, 0), -2.0);
    EXPECT_THROW(build_metric(Json::parse(R"({"kind": "coefficient_table", "d": 2, "table": [[-1, 0], [0, 1]]})")), Error);
}

TEST(Config, NonlinearityFromStringsAndMatrices) {
    const auto m = MetricSpec::minkowski(1);
    const auto nl = build_nonlinearity(Json::parse(R"({"N0": "2*g", "M": [[1, 0], [0, 0]]})"), m);
    EXPECT_DOUBLE_EQ(nl.N0.at(Vec::Zero(2))(0, 0), -2.0);
    EXPECT_TRUE(nl.N1.at(Vec::Zero(2)).isZero(0.0));
    EXPECT_DOUBLE_EQ(nl.M.at(Vec::Zero(2))(0, 0), 1.0);
}

TEST(Config, SourcesSampled) {
    const auto m = MetricSpec::minkowski(1);
    const Grid g = build_grid(Json::parse(R"({"T": 1.0, "lower": [-1], "upper": [1], "cells": [20]})"), m);
    const auto src = build_sources(Json::parse(R"([{"kind": "bump", "center": [0.5, 0.0], "width": [0.3, 0.3], "amplitude": 2.0},
                                                   {"kind": "pulse", "center": [0.0], "width": [0.4], "sigma": 1.0}])"),
                                   g);
    ASSERT_EQ(src.size(), 2u);
    EXPECT_NEAR(src[0].max_abs(), 2.0, 1e-12);
    EXPECT_THROW(build_sources(Json::parse(R"([{"kind": "bump", "center": [0.5], "width": [0.3]}])"), g), Error);
}

TEST(Cli, WitnessReportIsDeterministic) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    EXPECT_EQ(run_text("witness", kWitness, a), cli::kExitOk);
    EXPECT_EQ(run_text("witness", kWitness, b), cli::kExitOk);
    const std::string ra = slurp(a / "witness.json");
    EXPECT_EQ(ra, slurp(b / "witness.json"));
    const Json r = Json::parse(ra);
    EXPECT_EQ(r["seed"], 7);
    EXPECT_EQ(r["config_hash"].get<std::string>().size(), 16u);
    EXPECT_TRUE(r.contains("tolerances"));
    EXPECT_TRUE(r.contains("config"));
    EXPECT_GT(r["P_normalized"].get<double>(), 1e-4);
}

TEST(Cli, SeedOverrideChangesReport) {
    const auto a = scratch("seed_a"), b = scratch("seed_b");
    cli::RunOptions opt;
    opt.seed = 99;
    EXPECT_EQ(run_text("interact", kWitness, a), cli::kExitOk);
    EXPECT_EQ(run_text("interact", kWitness, b, opt), cli::kExitOk);
    EXPECT_EQ(Json::parse(slurp(b / "interact.json"))["seed"], 99);
    EXPECT_NE(slurp(a / "interact.csv"), slurp(b / "interact.csv"));
}

TEST(Cli, ExpandZeroNonlinearity) {
    const auto dir = scratch("zero");
    EXPECT_EQ(run_text("expand", kZero, dir), cli::kExitAssertion);
    cli::RunOptions opt;
    opt.zero_check = true;
    EXPECT_EQ(run_text("expand", kZero, dir, opt), cli::kExitOk);
    EXPECT_TRUE(fs::exists(dir / "expand_estimate.qgf"));
}

TEST(Cli, ValidateWarnsOnNullM) {
    const auto dir = scratch("nullm");
    std::string err;
    const std::string text = R"({"metric": {"kind": "minkowski", "d": 3}, "nonlinearity": {"N0": "g", "M": "g"}})";
    EXPECT_EQ(run_text("validate", text, dir, {}, &err), cli::kExitOk);
    EXPECT_NE(err.find("AssumptionAViolated"), std::string::npos);
}

TEST(Cli, SolveRefusesViolationWithoutFlag) {
    const auto dir = scratch("violation");
    const std::string text = R"({"metric": {"kind": "minkowski", "d": 1},
      "nonlinearity": {"N0": "G1", "M": "G0"},
      "grid": {"T": 0.5, "lower": [-1], "upper": [1], "cells": [40]},
      "sources": [{"kind": "bump", "center": [0.2, 0.0], "width": [0.15, 0.3], "amplitude": 0.1}]})";
    EXPECT_EQ(run_text("solve", text, dir), cli::kExitError);
    cli::RunOptions opt;
    opt.allow_violation = true;
    EXPECT_EQ(run_text("solve", text, dir, opt), cli::kExitOk);
}

TEST(Cli, MissingSectionIsError) {
    const auto dir = scratch("missing");
    EXPECT_EQ(run_text("geodesics", R"({"metric": {"kind": "minkowski", "d": 1}})", dir), cli::kExitError);
}

TEST(Cli, MalformedFileExitsOne) {
    const auto dir = scratch("malformed");
    const fs::path cfg = dir / "bad.json";
    std::ofstream(cfg) << "{ \"seed\": ";
    cli::RunOptions opt;
    opt.config_path = cfg.string();
    std::ostringstream out, err;
    EXPECT_EQ(cli::run_file("validate", opt, out, err), cli::kExitError);
    EXPECT_NE(err.str().find("ParseError"), std::string::npos);
}

TEST(Cli, GeodesicConjugateCheck) {
    const auto dir = scratch("geo");
    const std::string text = R"({"metric": {"kind": "ultrastatic_sphere"},
      "geodesics": {"x0": [0, 1.5707963267948966, 0], "theta0": [1, 0, 1], "s_max": 4.0, "h": 0.01,
                    "expect_conjugate": 3.141592653589793}})";
    EXPECT_EQ(run_text("geodesics", text, dir), cli::kExitOk);
    EXPECT_TRUE(fs::exists(dir / "geodesic.csv"));
    const std::string wrong = R"({"metric": {"kind": "ultrastatic_sphere"},
      "geodesics": {"x0": [0, 1.5707963267948966, 0], "theta0": [1, 0, 1], "s_max": 4.0, "h": 0.01,
                    "expect_conjugate": 2.5}})";
    EXPECT_EQ(run_text("geodesics", wrong, dir), cli::kExitAssertion);
}

TEST(Cli, SubcommandList) {
    EXPECT_EQ(cli::subcommands().size(), 10u);
}
