#include "qdnw/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "qdnw/errors.hpp"

namespace qdnw {

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

enum class T { Number, Integer, Bool, String, NumberArray, IntArray, Object, Scalar, Form, Points, ObjectArray, Matrix };

struct Key {
    T type;
    const std::map<std::string, Key>* sub = nullptr;
};

using Schema = std::map<std::string, Key>;

const Schema kDomain = {{"lower", {T::NumberArray}}, {"upper", {T::NumberArray}}};
const Schema kMetric = {{"kind", {T::String}},   {"d", {T::Integer}},     {"gamma", {T::Scalar}},
                        {"beta", {T::Scalar}},   {"kappa", {T::Object}},  {"table", {T::Matrix}},
                        {"domain", {T::Object, &kDomain}}};
const Schema kNonlinearity = {{"N0", {T::Form}}, {"N1", {T::Form}}, {"M", {T::Form}}};
const Schema kGrid = {{"T", {T::Number}},        {"lower", {T::NumberArray}}, {"upper", {T::NumberArray}},
                      {"cells", {T::IntArray}},  {"cfl", {T::Number}},        {"collar", {T::Number}},
                      {"sponge", {T::Number}}};
const Schema kSource = {{"kind", {T::String}},  {"center", {T::NumberArray}}, {"width", {T::NumberArray}},
                        {"amplitude", {T::Number}}, {"sigma", {T::Number}},   {"t_on", {T::Number}},
                        {"ramp", {T::Number}}};
const Schema kExpansion = {{"order", {T::Integer}},       {"delta", {T::Number}},  {"zero_check", {T::Bool}},
                           {"richardson", {T::Bool}},     {"max_rel_error", {T::Number}},
                           {"mode", {T::String}},         {"reference", {T::Bool}}};
const Schema kSymbol = {{"q0", {T::NumberArray}},  {"attempts", {T::Integer}}, {"threshold", {T::Number}},
                        {"count", {T::Integer}},   {"gamma", {T::Scalar}},     {"tol_indep", {T::Number}},
                        {"null_sum", {T::Bool}}};
const Schema kGeodesics = {{"x0", {T::NumberArray}}, {"theta0", {T::NumberArray}}, {"direction", {T::NumberArray}},
                           {"s_max", {T::Number}},   {"h", {T::Number}},           {"t0", {T::Number}},
                           {"s0", {T::Number}},      {"n_dirs", {T::Integer}},     {"expect_conjugate", {T::Number}}};
const Schema kObservation = {{"sources", {T::Points}},          {"center", {T::NumberArray}},
                             {"half_width", {T::Number}},       {"observers_per_axis", {T::Integer}},
                             {"n_dirs", {T::Integer}},          {"force_shooting", {T::Bool}},
                             {"h", {T::Number}}};
const Schema kBump = {{"center", {T::NumberArray}}, {"width", {T::NumberArray}}, {"amplitude", {T::Number}}};
const Schema kConvergence = {{"resolutions", {T::Points}}, {"bump", {T::Object, &kBump}}, {"T", {T::Number}},
                             {"lower", {T::NumberArray}},  {"upper", {T::NumberArray}}, {"cfl", {T::Number}}};
const Schema kTolerances = {{"tol_dec", {T::Number}},    {"tol_null", {T::Number}},  {"tol_rank", {T::Number}},
                            {"tol_causal", {T::Number}}, {"tol_order", {T::Number}}, {"tol_ratio", {T::Number}}};
const Schema kTop = {{"description", {T::String}},
                     {"seed", {T::Integer}},
                     {"output_dir", {T::String}},
                     {"metric", {T::Object, &kMetric}},
                     {"nonlinearity", {T::Object, &kNonlinearity}},
                     {"grid", {T::Object, &kGrid}},
                     {"sources", {T::ObjectArray, &kSource}},
                     {"expansion", {T::Object, &kExpansion}},
                     {"symbol", {T::Object, &kSymbol}},
                     {"geodesics", {T::Object, &kGeodesics}},
                     {"observation", {T::Object, &kObservation}},
                     {"convergence", {T::Object, &kConvergence}},
                     {"tolerances", {T::Object, &kTolerances}}};

const Schema kScalar = {{"kind", {T::String}},   {"value", {T::Number}},  {"c", {T::Number}},
                        {"slope", {T::NumberArray}}, {"amplitude", {T::Number}}, {"center", {T::NumberArray}},
                        {"width", {T::Number}},  {"spatial_only", {T::Bool}}};

bool number_array(const Json& v, bool integer) {
    if (!v.is_array()) return false;
    return std::all_of(v.begin(), v.end(), [&](const Json& e) { return integer ? e.is_number_integer() : e.is_number(); });
}

void check(const Json& j, const Schema& schema, const std::string& path, std::vector<std::string>& errors);

void check_value(const Json& v, const Key& key, const std::string& path, std::vector<std::string>& errors) {
    auto bad = [&](const char* what) { errors.push_back(path + ": expected " + what); };
    switch (key.type) {
        case T::Number: if (!v.is_number()) bad("a number"); break;
        case T::Integer: if (!v.is_number_integer()) bad("an integer"); break;
        case T::Bool: if (!v.is_boolean()) bad("a boolean"); break;
        case T::String: if (!v.is_string()) bad("a string"); break;
        case T::NumberArray: if (!number_array(v, false)) bad("an array of numbers"); break;
        case T::IntArray: if (!number_array(v, true)) bad("an array of integers"); break;
        case T::Form:
            if (!v.is_string() && !(v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& r) { return number_array(r, false); })))
                bad("a form string or a numeric matrix");
            break;
        case T::Matrix:
        case T::Points:
            if (!(v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& r) { return number_array(r, false); })))
                bad("an array of numeric arrays");
            break;
        case T::Scalar:
            if (v.is_object()) check(v, kScalar, path, errors);
            else if (!v.is_number()) bad("a number or a scalar-field object");
            break;
        case T::Object:
            if (!v.is_object()) bad("an object");
            else if (key.sub) check(v, *key.sub, path, errors);
            break;
        case T::ObjectArray:
            if (!v.is_array()) {
                bad("an array of objects");
                break;
            }
            for (std::size_t k = 0; k < v.size(); ++k) {
                const std::string p = path + "[" + std::to_string(k) + "]";
                if (!v[k].is_object()) errors.push_back(p + ": expected an object");
                else check(v[k], *key.sub, p, errors);
            }
            break;
    }
}

void check(const Json& j, const Schema& schema, const std::string& path, std::vector<std::string>& errors) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string p = path.empty() ? it.key() : path + "." + it.key();
        const auto found = schema.find(it.key());
        if (found == schema.end()) {
            errors.push_back(p + ": unknown key");
            continue;
        }
        check_value(it.value(), found->second, p, errors);
    }
}

std::pair<int, int> line_column(const std::string& text, std::size_t byte) {
    int line = 1, col = 1;
    for (std::size_t k = 0; k < std::min(byte, text.size()); ++k) {
        if (text[k] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    return {line, col};
}

Vec to_vec(const Json& v) {
    Vec out(static_cast<int>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) out[static_cast<int>(k)] = v[k].get<double>();
    return out;
}

Mat to_mat(const Json& v) {
    const int n = static_cast<int>(v.size());
    if (n < 2 || n > kMaxDim) throw Error(ErrorKind::SchemaError, "matrix size must be 2..4");
    Mat out(n, n);
    for (int r = 0; r < n; ++r) {
        if (static_cast<int>(v[r].size()) != n) throw Error(ErrorKind::SchemaError, "matrix must be square");
        for (int c = 0; c < n; ++c) out(r, c) = v[r][c].get<double>();
    }
    return out;
}

}  // namespace

std::vector<std::string> schema_errors(const Json& raw) {
    std::vector<std::string> errors;
    if (!raw.is_object()) {
        errors.push_back("top level: expected an object");
        return errors;
    }
    check(raw, kTop, "", errors);
    if (raw.contains("metric") && raw["metric"].is_object()) {
        const Json& m = raw["metric"];
        static const std::set<std::string> kinds = {"minkowski", "conformal_minkowski", "ultrastatic_sphere", "product",
                                                    "coefficient_table"};
        if (!m.contains("kind")) errors.push_back("metric.kind: missing");
        else if (m["kind"].is_string() && !kinds.count(m["kind"].get<std::string>())) errors.push_back("metric.kind: unknown metric kind");
    }
    if (raw.contains("sources") && raw["sources"].is_array()) {
        for (std::size_t k = 0; k < raw["sources"].size(); ++k) {
            const Json& s = raw["sources"][k];
            if (s.is_object() && s.contains("kind") && s["kind"].is_string()) {
                const std::string kind = s["kind"].get<std::string>();
                if (kind != "bump" && kind != "pulse") errors.push_back("sources[" + std::to_string(k) + "].kind: expected bump or pulse");
            }
        }
    }
    return errors;
}

const Json& ScenarioConfig::section(const std::string& name) const {
    if (!raw.contains(name)) throw Error(ErrorKind::SchemaError, "missing section '" + name + "'");
    return raw.at(name);
}

double ScenarioConfig::tolerance(const std::string& name, double fallback) const {
    double v = fallback;
    if (raw.contains("tolerances") && raw["tolerances"].contains(name)) v = raw["tolerances"][name].get<double>();
    return v * tol_scale;
}

std::string ScenarioConfig::hash() const {
    return fnv1a_hex(raw.dump());
}

ScenarioConfig parse_config(const std::string& text, const std::string& origin) {
    ScenarioConfig cfg;
    cfg.origin = origin;
    try {
        cfg.raw = Json::parse(text);
    } catch (const Json::parse_error& e) {
        const auto [line, col] = line_column(text, e.byte > 0 ? e.byte - 1 : 0);
        std::ostringstream msg;
        msg << origin << ":" << line << ":" << col << ": malformed JSON";
        throw Error(ErrorKind::ParseError, msg.str());
    }
    const auto errors = schema_errors(cfg.raw);
    if (!errors.empty()) {
        std::ostringstream msg;
        msg << origin << ": ";
        for (std::size_t k = 0; k < errors.size(); ++k) msg << (k ? "; " : "") << errors[k];
        throw Error(ErrorKind::SchemaError, msg.str());
    }
    if (cfg.raw.contains("seed")) cfg.seed = cfg.raw["seed"].get<std::uint64_t>();
    if (cfg.raw.contains("output_dir")) cfg.output_dir = cfg.raw["output_dir"].get<std::string>();
    return cfg;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorKind::IoError, "cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config(ss.str(), path);
}

ScalarField build_scalar(const Json& spec, int n) {
    if (spec.is_number()) return ScalarField::constant(spec.get<double>());
    const std::string kind = spec.value("kind", "constant");
    if (kind == "constant") return ScalarField::constant(spec.value("value", 0.0));
    if (kind == "affine") {
        Vec slope = spec.contains("slope") ? to_vec(spec["slope"]) : Vec(Vec::Zero(n));
        if (slope.size() != n) throw Error(ErrorKind::SchemaError, "affine slope has the wrong length");
        return ScalarField::affine(spec.value("c", 0.0), slope);
    }
    if (kind == "gaussian") {
        Vec center = spec.contains("center") ? to_vec(spec["center"]) : Vec(Vec::Zero(n));
        if (center.size() != n) throw Error(ErrorKind::SchemaError, "gaussian center has the wrong length");
        return ScalarField::gaussian(spec.value("amplitude", 0.1), center, spec.value("width", 1.0),
                                     spec.value("spatial_only", true));
    }
    throw Error(ErrorKind::SchemaError, "unknown scalar field kind '" + kind + "'");
}

MetricSpec build_metric(const Json& spec) {
    const std::string kind = spec.at("kind").get<std::string>();
    int d = spec.value("d", 3);
    if (kind == "ultrastatic_sphere") d = 2;
    const int n = d + 1;
    MetricSpec m = MetricSpec::minkowski(d);
    if (kind == "minkowski") {
    } else if (kind == "conformal_minkowski") {
        m = MetricSpec::conformal_minkowski(d, build_scalar(spec.value("gamma", Json(0.0)), n));
    } else if (kind == "ultrastatic_sphere") {
        m = MetricSpec::ultrastatic_sphere();
    } else if (kind == "product") {
        std::vector<ScalarField> kappa;
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) kappa.push_back(ScalarField::constant(a == b ? 1.0 : 0.0));
        if (spec.contains("kappa")) {
            const Json& k = spec["kappa"];
            for (auto it = k.begin(); it != k.end(); ++it) {
                // keys "ab" with spatial indices 1..d
                const std::string key = it.key();
                if (key.size() != 2) throw Error(ErrorKind::SchemaError, "kappa keys are index pairs like \"11\"");
                const int a = key[0] - '1', b = key[1] - '1';
                if (a < 0 || a >= d || b < 0 || b >= d) throw Error(ErrorKind::SchemaError, "kappa index out of range");
                kappa[a * d + b] = build_scalar(it.value(), n);
                kappa[b * d + a] = kappa[a * d + b];
            }
        }
        m = MetricSpec::product(d, build_scalar(spec.value("beta", Json(1.0)), n), kappa);
    } else if (kind == "coefficient_table") {
        if (!spec.contains("table")) throw Error(ErrorKind::SchemaError, "coefficient_table needs a table");
        const Mat table = to_mat(spec["table"]);
        if (table.rows() != n) throw Error(ErrorKind::SchemaError, "table size must be d + 1");
        m = MetricSpec::coefficient_table(d, [table](const Vec&) { return table; }, true);
    } else {
        throw Error(ErrorKind::SchemaError, "unknown metric kind '" + kind + "'");
    }
    if (spec.contains("domain")) {
        const Vec lo = to_vec(spec["domain"].at("lower")), hi = to_vec(spec["domain"].at("upper"));
        if (lo.size() != n || hi.size() != n) throw Error(ErrorKind::SchemaError, "domain needs d + 1 bounds");
        m.with_domain(Box{lo, hi});
    }
    return m;
}

NonlinearTerm build_nonlinearity(const Json& spec, const MetricSpec& m) {
    auto form = [&](const char* key) {
        if (!spec.contains(key)) return QuadraticForm::zero(m.dim());
        const Json& v = spec[key];
        if (v.is_string()) return parse_form(v.get<std::string>(), m);
        const Mat w = to_mat(v);
        if (w.rows() != m.dim()) throw Error(ErrorKind::SchemaError, std::string(key) + " matrix size must be d + 1");
        return QuadraticForm::constant(w, "matrix");
    };
    NonlinearTerm nl{form("N0"), form("N1"), form("M"), {}, {}};
    return nl;
}

Grid build_grid(const Json& spec, const MetricSpec& m) {
    auto vecd = [](const Json& v) { return v.get<std::vector<double>>(); };
    return Grid::make(m, spec.at("T").get<double>(), vecd(spec.at("lower")), vecd(spec.at("upper")),
                      spec.at("cells").get<std::vector<int>>(), spec.value("cfl", 0.5), spec.value("collar", 0.0),
                      spec.value("sponge", 0.0));
}

Bump build_bump(const Json& spec) {
    Bump b;
    b.center = to_vec(spec.at("center"));
    b.width = to_vec(spec.at("width"));
    if (b.center.size() != b.width.size()) throw Error(ErrorKind::SchemaError, "bump center and width lengths differ");
    b.amplitude = spec.value("amplitude", 1.0);
    return b;
}

std::vector<GridField> build_sources(const Json& spec, const Grid& grid) {
    std::vector<GridField> out;
    for (const auto& s : spec) {
        const std::string kind = s.value("kind", "bump");
        if (kind == "bump") {
            const Bump b = build_bump(s);
            if (b.center.size() != grid.d + 1) throw Error(ErrorKind::SchemaError, "bump source needs d + 1 coordinates");
            out.push_back(GridField::sample(grid, [b](const Point& x) { return b(x); }));
        } else {
            if (grid.d != 1) throw Error(ErrorKind::SchemaError, "pulse sources need d = 1");
            ProgressingPulse p;
            p.phi = build_bump(s);
            p.sigma = s.value("sigma", 1.0);
            p.t_on = s.value("t_on", 0.1);
            p.ramp = s.value("ramp", 0.5);
            p.amplitude = s.value("amplitude", 1.0);
            p.phi.amplitude = 1.0;
            out.push_back(GridField::sample(grid, [p](const Point& x) { return p.source(x); }));
        }
    }
    return out;
}

Point json_point(const Json& v) {
    return to_vec(v);
}

ObservationRegion build_region(const Json& spec, int d) {
    ObservationRegion r = ObservationRegion::default_region(d);
    if (spec.contains("center") || spec.contains("half_width")) {
        Vec center = r.box.lower + 0.5 * (r.box.upper - r.box.lower);
        if (spec.contains("center")) center = to_vec(spec["center"]);
        if (center.size() != d + 1) throw Error(ErrorKind::SchemaError, "observation center needs d + 1 coordinates");
        const double hw = spec.value("half_width", 0.3);
        r.box = Box{Vec(center.array() - hw), Vec(center.array() + hw)};
    }
    r.observers_per_axis = spec.value("observers_per_axis", 7);
    return r;
}

}  // namespace qdnw
