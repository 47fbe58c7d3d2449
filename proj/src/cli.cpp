#include "qdnw/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <numbers>
#include <sstream>

#include "CLI11.hpp"
#include "qdnw/errors.hpp"
#include "qdnw/expansion.hpp"
#include "qdnw/field_io.hpp"
#include "qdnw/symbolcalc.hpp"

namespace qdnw::cli {

namespace {

namespace fs = std::filesystem;

/// Thrown inside a subcommand once a check fails; the report is still written.
struct AssertionFailed {
    std::string message;
};

Json vec_json(const Vec& v) {
    Json out = Json::array();
    for (int k = 0; k < v.size(); ++k) out.push_back(v[k]);
    return out;
}

Json mat_json(const Mat& m) {
    Json out = Json::array();
    for (int r = 0; r < m.rows(); ++r) {
        Json row = Json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        out.push_back(row);
    }
    return out;
}

Json quad_json(const CovectorQuadruple& q) {
    Json z = Json::array();
    for (const auto& c : q.zeta) z.push_back(vec_json(c.c));
    return Json{{"q0", vec_json(q.q0)}, {"zeta", z}, {"orientation", q.orientation}};
}

Point default_point(const MetricSpec& m) {
    Point x = Point::Zero(m.dim());
    if (m.kind() == MetricSpec::Kind::UltrastaticSphere) x[1] = std::numbers::pi / 2;
    return x;
}

class Runner {
public:
    Runner(const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out, std::ostream& err)
        : cfg_(cfg), opt_(opt), out_(out), err_(err) {
        seed_ = opt.seed.value_or(cfg.seed);
        out_dir_ = opt.out_dir.value_or(cfg.output_dir);
        report_ = Json{{"config", cfg.raw}, {"config_hash", cfg.hash()}, {"seed", seed_}, {"tolerances", Json::object()}};
    }

    int dispatch(const std::string& sub) {
        report_["subcommand"] = sub;
        int code = kExitOk;
        try {
            if (sub == "validate") validate();
            else if (sub == "decompose") decompose();
            else if (sub == "witness") witness();
            else if (sub == "interact") interact();
            else if (sub == "conformal") conformal();
            else if (sub == "solve") solve();
            else if (sub == "expand") expand();
            else if (sub == "geodesics") geodesics();
            else if (sub == "obset") obset();
            else if (sub == "convergence") convergence();
            else throw Error(ErrorKind::InvalidArgument, "unknown subcommand '" + sub + "'");
            report_["status"] = "ok";
        } catch (const AssertionFailed& a) {
            report_["status"] = "assertion_failed";
            report_["failure"] = a.message;
            err_ << sub << ": assertion failed: " << a.message << "\n";
            code = kExitAssertion;
        }
        write_report(sub);
        out_ << sub << ": " << report_["status"].get<std::string>() << " (" << (fs::path(out_dir_) / (sub + ".json")).string()
             << ")\n";
        return code;
    }

private:
    double tol(const std::string& name, double fallback) {
        const double v = cfg_.tolerance(name, fallback) * opt_.tol_scale;
        report_["tolerances"][name] = v;
        return v;
    }

    void require(bool ok, const std::string& what) {
        if (!ok) throw AssertionFailed{what};
    }

    fs::path output(const std::string& name) {
        fs::create_directories(out_dir_);
        return fs::path(out_dir_) / name;
    }

    void write_report(const std::string& sub) {
        std::ofstream os(output(sub + ".json"));
        if (!os) throw Error(ErrorKind::IoError, "cannot write report in " + out_dir_);
        os << report_.dump(2) << "\n";
    }

    const MetricSpec& metric() {
        if (!metric_) metric_ = build_metric(cfg_.section("metric"));
        return *metric_;
    }

    NonlinearTerm nonlinearity() {
        const MetricSpec& m = metric();
        return cfg_.has("nonlinearity") ? build_nonlinearity(cfg_.section("nonlinearity"), m) : NonlinearTerm::zero(m.dim());
    }

    Json section_or_empty(const std::string& name) const { return cfg_.has(name) ? cfg_.section(name) : Json::object(); }

    Point base_point() {
        const Json sym = section_or_empty("symbol");
        if (sym.contains("q0")) {
            const Point q = json_point(sym["q0"]);
            if (q.size() != metric().dim()) throw Error(ErrorKind::SchemaError, "symbol.q0 needs d + 1 coordinates");
            return q;
        }
        return default_point(metric());
    }

    /// Base point plus small coordinate offsets, all inside the metric domain.
    std::vector<Point> classification_points() {
        const Point x0 = base_point();
        std::vector<Point> pts{x0};
        for (int k = 0; k < x0.size(); ++k) {
            for (double s : {-0.25, 0.25}) {
                Point x = x0;
                x[k] += s;
                if (metric().domain().contains(x)) pts.push_back(x);
            }
        }
        return pts;
    }

    AssumptionReport classify(NonlinearTerm& nl) {
        AssumptionReport rep = classify_nonlinearity(nl, metric(), classification_points());
        report_["assumption_A"] = Json{{"satisfied", rep.satisfied}, {"summary", rep.summary}};
        return rep;
    }

    void gate_assumption(NonlinearTerm& nl) {
        const AssumptionReport rep = classify(nl);
        if (!rep.satisfied) {
            err_ << "warning: AssumptionAViolated: " << rep.summary << "\n";
            if (!opt_.allow_violation)
                throw Error(ErrorKind::NotANullForm, "nonlinearity violates assumption (A); rerun with --allow-violation");
        }
    }

    void validate() {
        Json checks = Json::array();
        if (cfg_.has("metric")) {
            const MetricSpec& m = metric();
            const Point x0 = base_point();
            m.validate_at(x0);
            checks.push_back("metric valid at base point");
            if (cfg_.has("nonlinearity")) {
                NonlinearTerm nl = nonlinearity();
                const AssumptionReport rep = classify(nl);
                if (!rep.satisfied) {
                    err_ << "warning: AssumptionAViolated: " << rep.summary << "\n";
                    report_["warnings"].push_back("AssumptionAViolated: " + rep.summary);
                }
                checks.push_back("nonlinearity classified");
            }
            if (cfg_.has("grid")) {
                const Grid g = build_grid(cfg_.section("grid"), m);
                checks.push_back("grid built with courant " + std::to_string(g.courant(m)));
                if (cfg_.has("sources")) {
                    for (const auto& s : cfg_.section("sources")) {
                        if (s.value("kind", "bump") != "bump") continue;
                        const Bump b = build_bump(s);
                        const Box supp = b.support();
                        for (int a = 0; a < g.d; ++a) {
                            if (supp.lower[a + 1] < g.lower[a] || supp.upper[a + 1] > g.upper[a])
                                throw Error(ErrorKind::SchemaError, "source support leaves the spatial grid");
                        }
                    }
                    checks.push_back("source supports inside the grid");
                }
            }
        }
        report_["checks"] = checks;
    }

    void decompose() {
        const MetricSpec& m = metric();
        NonlinearTerm nl = nonlinearity();
        const double tol_dec = tol("tol_dec", kTolDec);
        const double tol_null = tol("tol_null", kTolNull);
        Json forms = Json::object();
        double worst = 0.0;
        const std::vector<std::pair<std::string, QuadraticForm>> list{{"N0", nl.N0}, {"N1", nl.N1}, {"M", nl.M}};
        for (const auto& [name, w] : list) {
            Json rows = Json::array();
            for (const auto& x : classification_points()) {
                Json row{{"x", vec_json(x)}, {"null", is_null_form(w, m, x, 64, seed_, tol_null)}};
                try {
                    const Decomposition dec = decompose_null_form(w, m, x, tol_dec);
                    const double res = (dec.reconstruct(m) - w.at(x)).norm();
                    worst = std::max(worst, res);
                    row["C0"] = dec.C0;
                    row["a"] = mat_json(dec.a);
                    row["pivot"] = {dec.pivot.first, dec.pivot.second};
                    row["reconstruction_residual"] = res;
                } catch (const NotANullFormError& e) {
                    row["error"] = e.what();
                    row["row"] = e.row();
                    row["col"] = e.col();
                    row["residual"] = e.residual();
                }
                rows.push_back(row);
            }
            forms[name] = rows;
        }
        report_["forms"] = forms;
        classify(nl);
        require(worst <= tol_dec, "decomposition does not reconstruct the form");
    }

    void witness() {
        const MetricSpec& m = metric();
        const NonlinearTerm nl = nonlinearity();
        const Json sym = section_or_empty("symbol");
        const int attempts = sym.value("attempts", 100);
        const double threshold = sym.value("threshold", 1e-4);
        QuadrupleConfig qc;
        qc.tol_indep = sym.value("tol_indep", qc.tol_indep);
        qc.tol_null = tol("tol_null", qc.tol_null);
        try {
            const WitnessResult res = nonvanishing_witness(m, nl.M, base_point(), attempts, threshold, seed_, qc);
            if (const auto* q = std::get_if<CovectorQuadruple>(&res)) {
                const double p = interaction_P(m, nl.M, *q);
                report_["witness"] = quad_json(*q);
                report_["P"] = p;
                report_["P_normalized"] = std::abs(p) / q->norm2();
            } else {
                report_["m_null"] = std::get<MNullCertificate>(res).reason;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::SearchFailed) throw;
            throw AssertionFailed{e.what()};
        }
    }

    void interact() {
        const MetricSpec& m = metric();
        const NonlinearTerm nl = nonlinearity();
        const Json sym = section_or_empty("symbol");
        const int count = sym.value("count", 50);
        const bool null_sum = sym.value("null_sum", false);
        const double tol_ratio = tol("tol_ratio", 1e-8);
        const double tol_rank = tol("tol_rank", 1e-8);
        const Point q0 = base_point();
        std::ofstream csv(output("interact.csv"));
        csv << "seed,gstar,P,A,B,rank\n";
        csv.precision(17);
        double worst = 0.0;
        int rows = 0, skipped = 0;
        for (int k = 0; k < count; ++k) {
            const std::uint64_t s = seed_ + static_cast<std::uint64_t>(k);
            try {
                const CovectorQuadruple q = sample_quadruple(m, q0, s, null_sum);
                const Covector z = q.sum();
                const double gz = inner(m, q0, z, z);
                const double A = coefficient_A(m, q), B = coefficient_B(m, q);
                const double P = interaction_P(m, nl.M, q);
                const int rank = rank_certificate(m, nl.M, q, tol_rank).rank;
                const double scale = std::max({q.norm2(), std::abs(kKappaA * gz), std::abs(kKappaB * gz)});
                worst = std::max({worst, std::abs(A - kKappaA * gz) / scale, std::abs(B - kKappaB * gz) / scale});
                csv << s << "," << gz << "," << P << "," << A << "," << B << "," << rank << "\n";
                ++rows;
            } catch (const Error& e) {
                if (e.kind() != ErrorKind::DegenerateDenominator && e.kind() != ErrorKind::SamplingExhausted) throw;
                ++skipped;
            }
        }
        report_["rows"] = rows;
        report_["skipped"] = skipped;
        report_["kappa_A"] = kKappaA;
        report_["kappa_B"] = kKappaB;
        report_["max_relative_deviation"] = worst;
        report_["csv"] = "interact.csv";
        require(rows > 0, "no admissible quadruple sampled");
        require(worst <= tol_ratio, "coefficients are not proportional to g*(zeta, zeta)");
    }

    void conformal() {
        const MetricSpec& m = metric();
        const NonlinearTerm nl = nonlinearity();
        const Json sym = section_or_empty("symbol");
        const ScalarField gamma = build_scalar(sym.value("gamma", Json(0.5)), m.dim());
        const double tol_ratio = tol("tol_ratio", 1e-10);
        const CovectorQuadruple q = sample_quadruple(m, base_point(), seed_, false);
        const ConformalReport rep = conformal_relation(m, gamma, nl.M, q, tol_ratio);
        report_["quadruple"] = quad_json(q);
        report_["gamma_q0"] = rep.gamma_q0;
        report_["P_base"] = rep.P_base;
        report_["P_scaled"] = rep.P_scaled;
        report_["ratio"] = rep.ratio;
        report_["expected_ratio"] = rep.expected_ratio;
        report_["exponents"] = Json{{"P", rep.exponent_P}, {"outgoing", rep.exponent_outgoing}, {"incoming", rep.exponent_incoming},
                                    {"net", rep.net_exponent()}};
        require(rep.ratio_ok, "interaction ratio differs from exp(-4 gamma)");
        require(rep.net_exponent() == -5, "net conformal exponent is not -5");
    }

    GridField total_source(const Grid& g) {
        GridField f = GridField::zeros(g);
        for (const auto& s : build_sources(cfg_.section("sources"), g)) f += s;
        return f;
    }

    NonlinearOptions solver_options() {
        NonlinearOptions o;
        const Json ex = section_or_empty("expansion");
        if (ex.value("mode", "explicit") == "picard") o.mode = NonlinearMode::Picard;
        return o;
    }

    static bool vanishes(const NonlinearTerm& nl, const Point& x) {
        return nl.N0.at(x).isZero(0.0) && nl.N1.at(x).isZero(0.0) && nl.M.at(x).isZero(0.0);
    }

    void solve() {
        const MetricSpec& m = metric();
        NonlinearTerm nl = nonlinearity();
        const Grid g = build_grid(cfg_.section("grid"), m);
        const GridField f = total_source(g);
        const bool linear = vanishes(nl, base_point());
        if (!linear) gate_assumption(nl);
        const GridField u = linear ? solve_linear(m, f) : solve_nonlinear(m, nl, f, solver_options());
        write_field_binary(output("solve_u.qgf").string(), u);
        const double leak = leakage_outside(u, discrete_causal_future(g, support_mask(f)), std::max(f.max_abs(), 1e-300));
        const double tol_causal = tol("tol_causal", 1e-10);
        report_["grid"] = Json{{"d", g.d}, {"nt", g.nt}, {"dt", g.dt}, {"nodes", g.nodes}, {"courant", g.courant(m)}};
        report_["linear"] = linear;
        report_["max_abs"] = u.max_abs();
        report_["interior_l2"] = u.interior_l2();
        report_["causal_leakage"] = leak;
        report_["field"] = "solve_u.qgf";
        require(leak <= tol_causal, "solution is nonzero outside the discrete causal future");
    }

    void expand() {
        const MetricSpec& m = metric();
        NonlinearTerm nl = nonlinearity();
        const Grid g = build_grid(cfg_.section("grid"), m);
        const Json ex = section_or_empty("expansion");
        const int order = ex.value("order", 4);
        if (order != 2 && order != 4) throw Error(ErrorKind::SchemaError, "expansion.order must be 2 or 4");
        const auto sources = build_sources(cfg_.section("sources"), g);
        if (static_cast<int>(sources.size()) != order)
            throw Error(ErrorKind::SchemaError, "expansion needs as many sources as its order");
        const bool zero_check = opt_.zero_check || ex.value("zero_check", false);
        MixedDifferenceOptions mo;
        mo.delta = ex.value("delta", mo.delta);
        mo.richardson = ex.value("richardson", true);
        mo.threads = std::max(1, opt_.threads);
        mo.solver = solver_options();
        if (vanishes(nl, base_point())) {
            require(zero_check, "nonlinearity vanishes; pass --zero-check to run the zero-interaction check");
            mo.allow_zero = true;
            const MixedDifference md = mixed_difference(m, nl, sources, order, mo);
            write_field_binary(output("expand_estimate.qgf").string(), md.estimate);
            report_["max_abs"] = md.estimate.max_abs();
            report_["solves"] = md.solves;
            require(md.estimate.max_abs() <= tol("tol_zero", 1e-10), "zero nonlinearity produced a nonzero mixed difference");
            return;
        }
        gate_assumption(nl);
        const MixedDifference md = mixed_difference(m, nl, sources, order, mo);
        std::vector<GridField> v;
        for (const auto& s : sources) v.push_back(solve_linear(m, s));
        GridField ref = order == 2 ? order2_reference(m, nl, v[0], v[1])
                                   : expansion_terms(m, nl, {v[0], v[1], v[2], v[3]}).total;
        const double err = relative_interior_error(md.estimate, ref);
        const double limit = tol("max_rel_error", ex.value("max_rel_error", order == 4 ? 0.1 : 0.05));
        write_field_binary(output("expand_estimate.qgf").string(), md.estimate);
        write_field_binary(output("expand_reference.qgf").string(), ref);
        report_["order"] = order;
        report_["delta"] = mo.delta;
        report_["relative_error"] = err;
        report_["richardson_gap"] = md.richardson_gap;
        report_["solves"] = md.solves;
        report_["reference_l2"] = ref.interior_l2();
        require(err <= limit, "mixed difference disagrees with the expansion terms");
    }

    void geodesics() {
        const MetricSpec& m = metric();
        const Json& gs = cfg_.section("geodesics");
        const Point x0 = gs.contains("x0") ? json_point(gs["x0"]) : default_point(m);
        if (x0.size() != m.dim()) throw Error(ErrorKind::SchemaError, "geodesics.x0 needs d + 1 coordinates");
        Vector theta;
        if (gs.contains("theta0")) theta = Vector{json_point(gs["theta0"])};
        else if (gs.contains("direction")) theta = future_null_vector(m, x0, json_point(gs["direction"]));
        else throw Error(ErrorKind::SchemaError, "geodesics needs theta0 or direction");
        if (theta.c.size() != m.dim()) throw Error(ErrorKind::SchemaError, "geodesics.theta0 needs d + 1 components");
        const double h = gs.value("h", 1e-2);
        const GeodesicPath path = geodesic_trace(m, x0, theta, gs.value("s_max", 5.0), h);
        {
            std::ofstream os(output("geodesic.csv"));
            path.write_csv(os);
        }
        const auto tau = first_conjugate_time(m, path, tol("tol_conj", kTolConj));
        report_["character"] = std::string(to_string(path.character));
        report_["samples"] = path.samples.size();
        report_["conservation_defect"] = path.conservation_defect(m);
        report_["first_conjugate"] = tau ? Json(*tau) : Json(nullptr);
        report_["csv"] = "geodesic.csv";
        if (gs.contains("t0")) {
            const FlowoutSurface fs = flowout_surface(m, x0, theta, gs.at("t0").get<double>(), gs.value("s0", 0.1),
                                                      gs.value("n_dirs", 16), h, seed_ + 1);
            std::ofstream os(output("flowout_slice.csv"));
            os.precision(17);
            os << "index";
            for (int k = 0; k < m.dim(); ++k) os << ",x" << k;
            os << "\n";
            for (std::size_t k = 0; k < fs.slice.size(); ++k) {
                os << k;
                for (int c = 0; c < fs.slice[k].size(); ++c) os << "," << fs.slice[k][c];
                os << "\n";
            }
            report_["flowout"] = Json{{"x_prime", vec_json(fs.x_prime)}, {"slice_points", fs.slice.size()},
                                      {"csv", "flowout_slice.csv"}};
        }
        if (gs.contains("expect_conjugate")) {
            const double expect = gs["expect_conjugate"].get<double>();
            const double t = tol("tol_tau", 1e-3);
            require(tau.has_value(), "no conjugate point found");
            require(std::abs(*tau - expect) <= t, "conjugate parameter differs from the expected value");
        }
    }

    void obset() {
        const MetricSpec& m = metric();
        const Json& os = cfg_.section("observation");
        const ObservationRegion region = build_region(os, m.space_dim());
        ObsetConfig oc;
        oc.n_dirs = os.value("n_dirs", oc.n_dirs);
        oc.h = os.value("h", oc.h);
        oc.force_shooting = os.value("force_shooting", false);
        oc.seed = seed_;
        std::vector<Point> qs;
        for (const auto& p : os.at("sources")) {
            qs.push_back(json_point(p));
            if (qs.back().size() != m.dim()) throw Error(ErrorKind::SchemaError, "observation sources need d + 1 coordinates");
        }
        std::vector<std::vector<Point>> earliest;
        std::ofstream csv(output("obset.csv"));
        csv.precision(17);
        csv << "q";
        for (int k = 0; k < m.dim(); ++k) csv << ",x" << k;
        csv << ",earliest\n";
        double cone_defect = 0.0;
        for (std::size_t k = 0; k < qs.size(); ++k) {
            const ObservationSet set = earliest_observation_set(m, qs[k], region, oc);
            for (const auto& p : set.points) {
                csv << k;
                for (int c = 0; c < p.x.size(); ++c) csv << "," << p.x[c];
                csv << "," << (p.earliest ? 1 : 0) << "\n";
                if (m.cone_exact() && !oc.force_shooting) {
                    const Vec dx = p.x - qs[k];
                    cone_defect = std::max(cone_defect, std::abs(dx[0] - dx.tail(m.space_dim()).norm()));
                }
            }
            earliest.push_back(set.earliest());
        }
        std::ofstream mat(output("distinguish.csv"));
        mat.precision(17);
        double min_off = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < qs.size(); ++a) {
            for (std::size_t b = 0; b < qs.size(); ++b) {
                double h = std::numeric_limits<double>::quiet_NaN();
                if (!earliest[a].empty() && !earliest[b].empty()) h = hausdorff(earliest[a], earliest[b]);
                if (a != b) min_off = std::min(min_off, std::isnan(h) ? 0.0 : h);
                mat << (b ? "," : "") << h;
            }
            mat << "\n";
        }
        const double t_cone = tol("tol_cone", 1e-8);
        report_["sources"] = qs.size();
        report_["cone_defect"] = cone_defect;
        report_["min_offdiagonal"] = qs.size() > 1 ? Json(min_off) : Json(nullptr);
        report_["csv"] = {"obset.csv", "distinguish.csv"};
        require(cone_defect <= t_cone, "observation points leave the light cone");
        if (qs.size() > 1) require(min_off > 0.0, "two sources have identical earliest observation sets");
    }

    void convergence() {
        const MetricSpec& m = metric();
        const Json& cs = cfg_.section("convergence");
        const Bump exact = build_bump(cs.at("bump"));
        std::vector<std::vector<int>> res;
        for (const auto& r : cs.at("resolutions")) res.push_back(r.get<std::vector<int>>());
        const auto rows = convergence_study(m, exact, cs.at("T").get<double>(), cs.at("lower").get<std::vector<double>>(),
                                            cs.at("upper").get<std::vector<double>>(), res, cs.value("cfl", 0.5));
        Json table = Json::array();
        for (const auto& r : rows) table.push_back(Json{{"cells", r.cells}, {"error", r.error}, {"order", r.order}});
        report_["rows"] = table;
        const double t = tol("tol_order", 0.3);
        if (rows.size() > 1) {
            const double p = rows.back().order;
            require(std::abs(p - 2.0) <= t, "observed order is not 2");
        }
    }

    const ScenarioConfig& cfg_;
    RunOptions opt_;
    std::ostream& out_;
    std::ostream& err_;
    std::uint64_t seed_ = 0;
    std::string out_dir_;
    Json report_;
    std::optional<MetricSpec> metric_;
};

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names = {"validate", "decompose", "witness",   "interact", "conformal",
                                                   "solve",    "expand",    "geodesics", "obset",    "convergence"};
    return names;
}

int run(const std::string& subcommand, const ScenarioConfig& cfg, const RunOptions& opt, std::ostream& out,
        std::ostream& err) {
    try {
        Runner r(cfg, opt, out, err);
        return r.dispatch(subcommand);
    } catch (const std::exception& e) {
        err << subcommand << ": error: " << e.what() << "\n";
        return kExitError;
    }
}

int run_file(const std::string& subcommand, const RunOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        const ScenarioConfig cfg = load_config(opt.config_path);
        return run(subcommand, cfg, opt, out, err);
    } catch (const std::exception& e) {
        err << subcommand << ": error: " << e.what() << "\n";
        return kExitError;
    }
}

int main(int argc, char** argv) {
    CLI::App app{"Quadratic derivative nonlinear wave toolkit"};
    RunOptions opt;
    std::uint64_t seed = 0;
    std::string out_dir;
    app.add_option("--config", opt.config_path, "Scenario JSON file")->required()->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
    auto* dir_opt = app.add_option("--out-dir", out_dir, "Override the output directory");
    app.add_option("--threads", opt.threads, "Worker threads for mixed differences")->check(CLI::PositiveNumber);
    app.add_option("--tol-scale", opt.tol_scale, "Multiply every tolerance")->check(CLI::PositiveNumber);
    app.add_flag("--zero-check", opt.zero_check, "expand: accept a vanishing nonlinearity");
    app.add_flag("--allow-violation", opt.allow_violation, "Run despite an assumption (A) violation");
    app.require_subcommand(1, 1);
    app.fallthrough();
    static const std::map<std::string, std::string> about = {
        {"validate", "Check the scenario and classify the nonlinearity"},
        {"decompose", "Null-form decomposition of N0 and N1 at sample points"},
        {"witness", "Search for a quadruple with nonvanishing interaction"},
        {"interact", "Coefficient table for sampled quadruples"},
        {"conformal", "Interaction ratio under a conformal rescaling"},
        {"solve", "Nonlinear forward solve with causality check"},
        {"expand", "Mixed-difference extraction against its reference"},
        {"geodesics", "Null geodesic, conjugate point and flowout slice"},
        {"obset", "Earliest light observation sets and distinguishability"},
        {"convergence", "Manufactured-solution refinement study"}};
    for (const auto& name : subcommands()) app.add_subcommand(name, about.at(name));
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitError;
    }
    if (*seed_opt) opt.seed = seed;
    if (*dir_opt) opt.out_dir = out_dir;
    return run_file(app.get_subcommands().front()->get_name(), opt, std::cout, std::cerr);
}

}  // namespace qdnw::cli
