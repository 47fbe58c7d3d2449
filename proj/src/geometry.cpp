#include "qdnw/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "qdnw/errors.hpp"

namespace qdnw {

// ---------------------------------------------------------------------------
// Scalar fields

ScalarField ScalarField::constant(double c) {
    ScalarField f;
    f.value = [c](const Vec&) { return c; };
    f.gradient = [](const Vec& x) { return Vec(Vec::Zero(x.size())); };
    f.static_in_time = true;
    f.description = "constant(" + std::to_string(c) + ")";
    return f;
}

ScalarField ScalarField::affine(double c, const Vec& slope) {
    ScalarField f;
    f.value = [c, slope](const Vec& x) { return c + slope.dot(x); };
    f.gradient = [slope](const Vec&) { return slope; };
    f.static_in_time = slope.size() == 0 || slope[0] == 0.0;
    f.description = "affine";
    return f;
}

ScalarField ScalarField::gaussian(double amplitude, const Vec& center, double width, bool spatial_only) {
    ScalarField f;
    auto offset = [center, spatial_only](const Vec& x) {
        Vec r = x - center;
        if (spatial_only) r[0] = 0.0;
        return r;
    };
    f.value = [=](const Vec& x) {
        const Vec r = offset(x);
        return amplitude * std::exp(-r.squaredNorm() / (width * width));
    };
    f.gradient = [=](const Vec& x) {
        const Vec r = offset(x);
        const double e = amplitude * std::exp(-r.squaredNorm() / (width * width));
        return Vec(-2.0 * e / (width * width) * r);
    };
    f.static_in_time = spatial_only;
    f.description = "gaussian";
    return f;
}

// ---------------------------------------------------------------------------
// Metric catalog

std::string_view to_string(CausalCharacter c) {
    switch (c) {
        case CausalCharacter::Timelike: return "timelike";
        case CausalCharacter::Null: return "null";
        case CausalCharacter::Spacelike: return "spacelike";
    }
    return "?";
}

std::string_view to_string(Verdict v) {
    switch (v) {
        case Verdict::Yes: return "yes";
        case Verdict::No: return "no";
        case Verdict::Undecided: return "undecided";
    }
    return "?";
}

Box Box::unbounded(int n) {
    const double inf = std::numeric_limits<double>::infinity();
    return Box{Vec::Constant(n, -inf), Vec::Constant(n, inf)};
}

bool Box::contains(const Vec& x) const {
    for (int i = 0; i < x.size(); ++i) {
        if (!(x[i] >= lower[i] && x[i] <= upper[i])) return false;
    }
    return true;
}

namespace {

void check_space_dim(int d) {
    if (d < 1 || d > 3) throw Error(ErrorKind::InvalidArgument, "space dimension must be 1, 2 or 3");
}

Mat minkowski_matrix(int n) {
    Mat g = Mat::Identity(n, n);
    g(0, 0) = -1.0;
    return g;
}

}  // namespace

MetricSpec MetricSpec::minkowski(int d) {
    check_space_dim(d);
    MetricSpec m;
    m.kind_ = Kind::Minkowski;
    m.d_ = d;
    m.name_ = "minkowski";
    m.static_ = true;
    m.cone_exact_ = true;
    m.gamma_ = ScalarField::constant(0.0);
    m.domain_ = Box::unbounded(d + 1);
    const Mat eta = minkowski_matrix(d + 1);
    m.g_ = [eta](const Vec&) { return eta; };
    m.dg_ = [n = d + 1](const Vec&, int) { return Mat(Mat::Zero(n, n)); };
    return m;
}

MetricSpec MetricSpec::conformal(const MetricSpec& base, ScalarField gamma) {
    MetricSpec m;
    m.kind_ = base.kind_ == Kind::Minkowski ? Kind::ConformalMinkowski : Kind::Conformal;
    m.d_ = base.d_;
    m.name_ = "conformal(" + base.name_ + ")";
    m.static_ = base.static_ && gamma.static_in_time;
    m.cone_exact_ = base.cone_exact_;
    if (base.gamma_) {
        // compose e^{2 gamma} e^{2 gamma_base}
        ScalarField inner = *base.gamma_;
        ScalarField total;
        total.value = [gamma, inner](const Vec& x) { return gamma(x) + inner(x); };
        total.gradient = [gamma, inner](const Vec& x) { return Vec(gamma.gradient(x) + inner.gradient(x)); };
        total.static_in_time = gamma.static_in_time && inner.static_in_time;
        m.gamma_ = total;
    }
    m.domain_ = base.domain_;
    auto bg = base.g_;
    auto bdg = base.dg_;
    m.g_ = [bg, gamma](const Vec& x) { return Mat(std::exp(2.0 * gamma(x)) * bg(x)); };
    m.dg_ = [bg, bdg, gamma](const Vec& x, int k) {
        const double e = std::exp(2.0 * gamma(x));
        return Mat(e * (2.0 * gamma.gradient(x)[k] * bg(x) + bdg(x, k)));
    };
    return m;
}

MetricSpec MetricSpec::conformal_minkowski(int d, ScalarField gamma) {
    MetricSpec m = conformal(minkowski(d), std::move(gamma));
    m.name_ = "conformal_minkowski";
    return m;
}

MetricSpec MetricSpec::ultrastatic_sphere() {
    MetricSpec m;
    m.kind_ = Kind::UltrastaticSphere;
    m.d_ = 2;
    m.name_ = "ultrastatic_sphere";
    m.static_ = true;
    const double inf = std::numeric_limits<double>::infinity();
    m.domain_ = Box{Vec{{-inf, 1e-3, -inf}}, Vec{{inf, std::numbers::pi - 1e-3, inf}}};
    m.g_ = [](const Vec& x) {
        Mat g = Mat::Zero(3, 3);
        g(0, 0) = -1.0;
        g(1, 1) = 1.0;
        const double s = std::sin(x[1]);
        g(2, 2) = s * s;
        return g;
    };
    m.dg_ = [](const Vec& x, int k) {
        Mat dg = Mat::Zero(3, 3);
        if (k == 1) dg(2, 2) = 2.0 * std::sin(x[1]) * std::cos(x[1]);
        return dg;
    };
    return m;
}

MetricSpec MetricSpec::product(int d, ScalarField beta, std::vector<ScalarField> kappa) {
    check_space_dim(d);
    if (static_cast<int>(kappa.size()) != d * d) {
        throw Error(ErrorKind::InvalidArgument, "product metric needs d*d spatial coefficients");
    }
    MetricSpec m;
    m.kind_ = Kind::Product;
    m.d_ = d;
    m.name_ = "product";
    m.static_ = beta.static_in_time &&
                std::all_of(kappa.begin(), kappa.end(), [](const ScalarField& f) { return f.static_in_time; });
    m.domain_ = Box::unbounded(d + 1);
    m.g_ = [d, beta, kappa](const Vec& x) {
        Mat g = Mat::Zero(d + 1, d + 1);
        g(0, 0) = -beta(x);
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) g(a + 1, b + 1) = kappa[a * d + b](x);
        }
        return g;
    };
    m.dg_ = [d, beta, kappa](const Vec& x, int k) {
        Mat dg = Mat::Zero(d + 1, d + 1);
        dg(0, 0) = -beta.gradient(x)[k];
        for (int a = 0; a < d; ++a) {
            for (int b = 0; b < d; ++b) dg(a + 1, b + 1) = kappa[a * d + b].gradient(x)[k];
        }
        return dg;
    };
    return m;
}

MetricSpec MetricSpec::coefficient_table(int d, MatrixField g, bool static_in_time, double fd_step) {
    check_space_dim(d);
    MetricSpec m;
    m.kind_ = Kind::CoefficientTable;
    m.d_ = d;
    m.name_ = "coefficient_table";
    m.static_ = static_in_time;
    m.domain_ = Box::unbounded(d + 1);
    m.g_ = g;
    m.dg_ = [g, fd_step](const Vec& x, int k) {
        auto central = [&](double h) {
            Vec xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            return Mat((g(xp) - g(xm)) / (2.0 * h));
        };
        return Mat((4.0 * central(0.5 * fd_step) - central(fd_step)) / 3.0);
    };
    return m;
}

MetricSpec& MetricSpec::with_domain(Box box) {
    domain_ = std::move(box);
    return *this;
}

void MetricSpec::validate_at(const Vec& x) const {
    const Mat g = metric(x);
    const double scale = std::max(1.0, g.cwiseAbs().maxCoeff());
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
        throw Error(ErrorKind::InvalidArgument, "metric coefficients are not symmetric");
    }
    const double det = g.determinant();
    if (std::abs(det) < 1e-12) throw Error(ErrorKind::SingularMetric, "|det g| < 1e-12");
    if (det >= 0.0) throw Error(ErrorKind::InvalidArgument, "det g must be negative");
    Eigen::SelfAdjointEigenSolver<Mat> es(g);
    const int negative = static_cast<int>((es.eigenvalues().array() < 0.0).count());
    if (negative != 1) throw Error(ErrorKind::InvalidArgument, "metric must have exactly one negative eigenvalue");
    if (!(g.inverse()(0, 0) < 0.0)) throw Error(ErrorKind::InvalidArgument, "t is not a time function (g^00 >= 0)");
}

// ---------------------------------------------------------------------------
// Linear algebra on a tangent space

Mat dual_metric(const MetricSpec& m, const Point& x) {
    const Mat g = m.metric(x);
    if (std::abs(g.determinant()) < 1e-12) throw Error(ErrorKind::SingularMetric, "|det g| < 1e-12");
    Mat inv = g.inverse();
    return Mat(0.5 * (inv + inv.transpose()));
}

Vector raise(const MetricSpec& m, const Point& x, const Covector& xi) {
    return Vector{dual_metric(m, x) * xi.c};
}

Covector lower(const MetricSpec& m, const Point& x, const Vector& v) {
    return Covector{m.metric(x) * v.c};
}

double inner(const MetricSpec& m, const Point& x, const Vector& a, const Vector& b) {
    return a.c.dot(m.metric(x) * b.c);
}

double inner(const MetricSpec& m, const Point& x, const Covector& a, const Covector& b) {
    return a.c.dot(dual_metric(m, x) * b.c);
}

double inner(const MetricSpec& m, const Point& x, const AnyVector& a, const AnyVector& b) {
    if (a.index() != b.index()) throw Error(ErrorKind::KindMismatch, "inner product of a vector with a covector");
    if (const auto* va = std::get_if<Vector>(&a)) return inner(m, x, *va, std::get<Vector>(b));
    return inner(m, x, std::get<Covector>(a), std::get<Covector>(b));
}

CausalCharacter causal_character(const MetricSpec& m, const Point& x, const Vector& v, double tol_null) {
    const double norm2 = v.c.squaredNorm();
    if (norm2 == 0.0) throw Error(ErrorKind::ZeroVector, "causal character of the zero vector");
    const double q = inner(m, x, v, v);
    if (std::abs(q) <= tol_null * norm2) return CausalCharacter::Null;
    return q < 0.0 ? CausalCharacter::Timelike : CausalCharacter::Spacelike;
}

Vector future_null_vector(const MetricSpec& m, const Point& x, const Vec& spatial_dir) {
    const Mat g = m.metric(x);
    const int d = m.space_dim();
    double b = 0.0, c = 0.0;
    for (int a = 0; a < d; ++a) {
        b += g(0, a + 1) * spatial_dir[a];
        for (int e = 0; e < d; ++e) c += g(a + 1, e + 1) * spatial_dir[a] * spatial_dir[e];
    }
    const double disc = b * b - g(0, 0) * c;
    if (c <= 0.0 || disc < 0.0) throw Error(ErrorKind::ConeDegenerate, "no real null direction along e0 + lambda u");
    const double lambda = (-b + std::sqrt(disc)) / c;
    if (!(lambda > 0.0)) throw Error(ErrorKind::ConeDegenerate, "null root is not future pointing");
    Vec v(d + 1);
    v[0] = 1.0;
    v.tail(d) = lambda * spatial_dir;
    return Vector{v};
}

std::vector<Vec> direction_lattice(int d, int n, std::uint64_t seed) {
    std::vector<Vec> dirs;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (d == 1) {
        dirs.push_back(Vec::Constant(1, 1.0));
        dirs.push_back(Vec::Constant(1, -1.0));
        return dirs;
    }
    n = std::max(n, 4);
    if (d == 2) {
        const double offset = seed == 0 ? 0.0 : unif(rng);
        for (int k = 0; k < n; ++k) {
            const double a = 2.0 * std::numbers::pi * (k + offset) / n;
            dirs.push_back(Vec{{std::cos(a), std::sin(a)}});
        }
        return dirs;
    }
    Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
    if (seed != 0) {
        Eigen::Quaterniond q(unif(rng) - 0.5, unif(rng) - 0.5, unif(rng) - 0.5, unif(rng) - 0.5);
        rot = q.normalized().toRotationMatrix();
    }
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int k = 0; k < n; ++k) {
        const double z = 1.0 - 2.0 * (k + 0.5) / n;
        const double r = std::sqrt(1.0 - z * z);
        const Eigen::Vector3d p(r * std::cos(golden * k), r * std::sin(golden * k), z);
        const Eigen::Vector3d q = rot * p;
        dirs.push_back(Vec{{q[0], q[1], q[2]}});
    }
    return dirs;
}

// ---------------------------------------------------------------------------
// Christoffel symbols and geodesics

Vec Christoffel::contract(const Vec& a, const Vec& b) const {
    Vec out = Vec::Zero(n_);
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        for (int j = 0; j < n_; ++j) {
            for (int k = 0; k < n_; ++k) s += (*this)(i, j, k) * a[j] * b[k];
        }
        out[i] = s;
    }
    return out;
}

Christoffel christoffel(const MetricSpec& m, const Point& x) {
    const int n = m.dim();
    const Mat ginv = dual_metric(m, x);
    std::array<Mat, kMaxDim> dg;
    for (int k = 0; k < n; ++k) dg[k] = m.derivative(x, k);
    Christoffel gamma(n);
    for (int j = 0; j < n; ++j) {
        for (int k = j; k < n; ++k) {
            Vec lowered(n);  // Gamma_{l jk}
            for (int l = 0; l < n; ++l) lowered[l] = 0.5 * (dg[j](l, k) + dg[k](l, j) - dg[l](j, k));
            const Vec up = ginv * lowered;
            for (int i = 0; i < n; ++i) {
                gamma(i, j, k) = up[i];
                gamma(i, k, j) = up[i];
            }
        }
    }
    return gamma;
}

namespace {

struct PhaseState {
    Vec x;
    Vec v;
};

PhaseState geodesic_rhs(const MetricSpec& m, const PhaseState& s) {
    return PhaseState{s.v, -christoffel(m, s.x).contract(s.v, s.v)};
}

PhaseState rk4_step(const MetricSpec& m, const PhaseState& s, double h) {
    auto axpy = [](const PhaseState& a, double c, const PhaseState& k) {
        return PhaseState{a.x + c * k.x, a.v + c * k.v};
    };
    const PhaseState k1 = geodesic_rhs(m, s);
    const PhaseState k2 = geodesic_rhs(m, axpy(s, 0.5 * h, k1));
    const PhaseState k3 = geodesic_rhs(m, axpy(s, 0.5 * h, k2));
    const PhaseState k4 = geodesic_rhs(m, axpy(s, h, k3));
    return PhaseState{s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                      s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v)};
}

}  // namespace

double GeodesicPath::conservation_defect(const MetricSpec& m) const {
    double worst = 0.0;
    for (const auto& s : samples) {
        worst = std::max(worst, std::abs(inner(m, s.x, Vector{s.v}, Vector{s.v}) - initial_norm));
    }
    return worst;
}

void GeodesicPath::write_csv(std::ostream& os) const {
    if (samples.empty()) return;
    const int n = static_cast<int>(samples.front().x.size());
    os << "s";
    for (int i = 0; i < n; ++i) os << ",x" << i;
    for (int i = 0; i < n; ++i) os << ",v" << i;
    os << "\n";
    os.precision(17);
    for (const auto& s : samples) {
        os << s.s;
        for (int i = 0; i < n; ++i) os << "," << s.x[i];
        for (int i = 0; i < n; ++i) os << "," << s.v[i];
        os << "\n";
    }
}

GeodesicPath geodesic_trace(const MetricSpec& m, const Point& x0, const Vector& theta0, double s_max, double h,
                            const GeodesicStop& stop) {
    if (theta0.c.squaredNorm() == 0.0) throw Error(ErrorKind::ZeroVector, "geodesic with zero initial velocity");
    if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "step size must be positive");
    if (!m.domain().contains(x0)) throw Error(ErrorKind::StepOutOfDomain, "start point outside the coordinate box");

    GeodesicPath path;
    path.h = h;
    path.initial_norm = inner(m, x0, theta0, theta0);
    const double scale = theta0.c.squaredNorm();
    path.character = std::abs(path.initial_norm) <= 1e-10 * scale ? CausalCharacter::Null
                     : path.initial_norm < 0.0                    ? CausalCharacter::Timelike
                                                                  : CausalCharacter::Spacelike;
    const long steps = static_cast<long>(std::ceil(s_max / h - 1e-9));
    path.samples.reserve(static_cast<std::size_t>(std::max(0L, steps)) + 1);
    PhaseState state{x0, theta0.c};
    path.samples.push_back({0.0, state.x, state.v});
    for (long k = 1; k <= steps; ++k) {
        state = rk4_step(m, state, h);
        GeodesicSample sample{k * h, state.x, state.v};
        if (!state.x.allFinite()) throw Error(ErrorKind::NaNDetected, "non-finite geodesic state");
        if (stop && stop(sample)) {
            path.samples.push_back(std::move(sample));
            break;
        }
        if (!m.domain().contains(state.x)) {
            std::ostringstream msg;
            msg << "geodesic left the coordinate box at s = " << sample.s;
            throw Error(ErrorKind::StepOutOfDomain, msg.str());
        }
        path.samples.push_back(std::move(sample));
    }
    return path;
}

std::optional<Vec> point_at_time(const GeodesicPath& path, double t) {
    const auto& smp = path.samples;
    for (std::size_t k = 0; k + 1 < smp.size(); ++k) {
        const double ta = smp[k].x[0], tb = smp[k + 1].x[0];
        if (!((ta - t) * (tb - t) <= 0.0) || ta == tb) continue;
        if (t == ta) return smp[k].x;
        if (t == tb) return smp[k + 1].x;
        const double hs = smp[k + 1].s - smp[k].s;
        auto hermite = [&](double u) {
            const double h00 = 2 * u * u * u - 3 * u * u + 1, h10 = u * u * u - 2 * u * u + u;
            const double h01 = -2 * u * u * u + 3 * u * u, h11 = u * u * u - u * u;
            return Vec(h00 * smp[k].x + h10 * hs * smp[k].v + h01 * smp[k + 1].x + h11 * hs * smp[k + 1].v);
        };
        double lo = 0.0, hi = 1.0;
        const bool increasing = tb > ta;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            const bool below = hermite(mid)[0] < t;
            if (below == increasing) lo = mid; else hi = mid;
        }
        return hermite(0.5 * (lo + hi));
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Jacobi fields

namespace {

struct JacobiState {
    Vec x;
    Vec v;
    Mat J;
    Mat P;
};

JacobiState jacobi_rhs(const MetricSpec& m, const JacobiState& s) {
    const int n = m.dim();
    const Christoffel gam = christoffel(m, s.x);
    std::array<Christoffel, kMaxDim> dgam{Christoffel(n), Christoffel(n), Christoffel(n), Christoffel(n)};
    for (int q = 0; q < n; ++q) {
        const double eps = 1e-5 * std::max(1.0, std::abs(s.x[q]));
        Vec xp = s.x, xm = s.x;
        xp[q] += eps;
        xm[q] -= eps;
        const Christoffel gp = christoffel(m, xp), gm = christoffel(m, xm);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j)
                for (int k = 0; k < n; ++k) dgam[q](i, j, k) = (gp(i, j, k) - gm(i, j, k)) / (2.0 * eps);
    }
    JacobiState out{s.v, -gam.contract(s.v, s.v), s.P, Mat::Zero(n, n)};
    for (int c = 0; c < n; ++c) {
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int j = 0; j < n; ++j) {
                for (int k = 0; k < n; ++k) {
                    double dG = 0.0;
                    for (int q = 0; q < n; ++q) dG += dgam[q](i, j, k) * s.J(q, c);
                    acc -= dG * s.v[j] * s.v[k] + 2.0 * gam(i, j, k) * s.v[j] * s.P(k, c);
                }
            }
            out.P(i, c) = acc;
        }
    }
    return out;
}

JacobiState jacobi_step(const MetricSpec& m, const JacobiState& s, double h) {
    auto axpy = [](const JacobiState& a, double c, const JacobiState& k) {
        return JacobiState{a.x + c * k.x, a.v + c * k.v, a.J + c * k.J, a.P + c * k.P};
    };
    const JacobiState k1 = jacobi_rhs(m, s);
    const JacobiState k2 = jacobi_rhs(m, axpy(s, 0.5 * h, k1));
    const JacobiState k3 = jacobi_rhs(m, axpy(s, 0.5 * h, k2));
    const JacobiState k4 = jacobi_rhs(m, axpy(s, h, k3));
    return JacobiState{s.x + h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x),
                       s.v + h / 6.0 * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v),
                       s.J + h / 6.0 * (k1.J + 2.0 * k2.J + 2.0 * k3.J + k4.J),
                       s.P + h / 6.0 * (k1.P + 2.0 * k2.P + 2.0 * k3.P + k4.P)};
}

double normalized_det(const Mat& J, double s) {
    return (J / s).determinant();
}

}  // namespace

std::optional<double> first_conjugate_time(const MetricSpec& m, const GeodesicPath& path, double tol_conj) {
    if (path.samples.size() < 2) return std::nullopt;
    const int n = m.dim();
    const double h = path.h;
    const double s_end = path.samples.back().s;
    JacobiState state{path.samples.front().x, path.samples.front().v, Mat::Zero(n, n), Mat::Identity(n, n)};
    double s = 0.0;
    while (s < s_end - 1e-12) {
        const double step = std::min(h, s_end - s);
        const JacobiState next = jacobi_step(m, state, step);
        if (!m.domain().contains(next.x)) return std::nullopt;
        const double value = normalized_det(next.J, s + step);
        if (value <= tol_conj) {
            double lo = 0.0, hi = step;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                const JacobiState trial = jacobi_step(m, state, mid);
                if (normalized_det(trial.J, s + mid) <= tol_conj) hi = mid; else lo = mid;
            }
            return s + 0.5 * (lo + hi);
        }
        state = next;
        s += step;
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Flow-out surfaces

FlowoutSurface flowout_surface(const MetricSpec& m, const Point& x0, const Vector& theta0, double t0, double s0,
                               int n_dirs, double h, std::uint64_t seed) {
    if (!(t0 > 0.0) || !(s0 > 0.0) || n_dirs < 1) {
        throw Error(ErrorKind::InvalidArgument, "flowout needs t0 > 0, s0 > 0 and n_dirs >= 1");
    }
    if (causal_character(m, x0, theta0, 1e-8) != CausalCharacter::Null || theta0.c[0] <= 0.0) {
        throw Error(ErrorKind::InvalidArgument, "flowout base direction must be future-pointing null");
    }
    const int d = m.space_dim();
    const long steps = std::max(1L, static_cast<long>(std::ceil(t0 / h)));
    const double hb = t0 / static_cast<double>(steps);
    const GeodesicPath base = geodesic_trace(m, x0, theta0, t0, hb);
    if (const auto tau = first_conjugate_time(m, base); tau && *tau <= t0) {
        throw Error(ErrorKind::ConjugateBeforeT0, "t0 is not before the first conjugate point");
    }

    FlowoutSurface surf;
    surf.base_point = x0;
    surf.base_direction = theta0;
    surf.t0 = t0;
    surf.s0 = s0;
    surf.h = h;
    surf.x_prime = base.samples.back().x;
    surf.theta_prime = Vector{base.samples.back().v};

    const Vec& tp = surf.theta_prime.c;
    const Mat g = m.metric(surf.x_prime);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    surf.directions.push_back(surf.theta_prime);
    int attempts = 0;
    while (static_cast<int>(surf.directions.size()) < n_dirs) {
        if (++attempts > 1000 * n_dirs) throw Error(ErrorKind::SamplingExhausted, "flowout direction sampling");
        Vec delta(d);
        for (int a = 0; a < d; ++a) delta[a] = normal(rng);
        delta *= 0.5 * s0 * unif(rng) / delta.norm();
        const Vec w = tp.tail(d) + delta;
        // g00 T^2 + 2 T (g0a w^a) + g_ab w^a w^b = 0, root nearest theta'^0
        double b = 0.0, c = 0.0;
        for (int a = 0; a < d; ++a) {
            b += g(0, a + 1) * w[a];
            for (int e = 0; e < d; ++e) c += g(a + 1, e + 1) * w[a] * w[e];
        }
        const double disc = b * b - g(0, 0) * c;
        if (disc < 0.0) continue;
        const double r1 = (-b + std::sqrt(disc)) / g(0, 0), r2 = (-b - std::sqrt(disc)) / g(0, 0);
        const double t_comp = std::abs(r1 - tp[0]) < std::abs(r2 - tp[0]) ? r1 : r2;
        Vec theta(d + 1);
        theta[0] = t_comp;
        theta.tail(d) = w;
        if ((theta - tp).norm() >= s0 || theta[0] <= 0.0) continue;
        surf.directions.push_back(Vector{theta});
    }

    const double t_slice = 2.0 * t0;
    for (const auto& dir : surf.directions) {
        const double reach = std::max(t_slice - surf.x_prime[0], 0.0) / dir.c[0];
        auto stop = [&](const GeodesicSample& s) { return s.x[0] > t_slice + 2.0 * h; };
        GeodesicPath path = geodesic_trace(m, surf.x_prime, dir, 4.0 * reach + 10.0 * h, h, stop);
        if (auto p = point_at_time(path, t_slice)) surf.slice.push_back(*p);
        surf.paths.push_back(std::move(path));
    }
    return surf;
}

// ---------------------------------------------------------------------------
// Light cone bundles and causal relations

LightConeBundle::LightConeBundle(const MetricSpec& m, const Point& vertex, double t_end, int n_dirs, double h,
                                 std::uint64_t seed)
    : d_(m.space_dim()), vertex_(vertex), dirs_(direction_lattice(m.space_dim(), n_dirs, seed)) {
    const Box& dom = m.domain();
    auto stop = [&](const GeodesicSample& s) { return s.x[0] >= t_end + h || !dom.contains(s.x); };
    const double span = std::max(t_end - vertex[0], 0.0) + 2.0 * h;
    for (const auto& u : dirs_) {
        const Vector v = future_null_vector(m, vertex, u);
        GeodesicPath ray = geodesic_trace(m, vertex, v, 20.0 * span / v.c[0] + 10.0 * h, h, stop);
        if (!dom.contains(ray.samples.back().x)) ray.samples.pop_back();
        double limit = ray.samples.back().x[0];
        if (const auto tau = first_conjugate_time(m, ray)) {
            for (const auto& s : ray.samples) {
                if (s.s >= *tau) {
                    limit = std::min(limit, s.x[0]);
                    break;
                }
            }
        }
        limits_.push_back(limit);
        rays_.push_back(std::move(ray));
    }
}

std::optional<Vec> LightConeBundle::center_at(double t) const {
    Vec sum = Vec::Zero(d_ + 1);
    int count = 0;
    for (const auto& ray : rays_) {
        if (const auto p = point_at_time(ray, t)) {
            sum += *p;
            ++count;
        }
    }
    if (count == 0) return std::nullopt;
    return Vec(sum / count);
}

std::optional<double> LightConeBundle::radius_at(double t, const Vec& spatial_point) const {
    const auto c = center_at(t);
    if (!c) return std::nullopt;
    const Vec u = spatial_point - c->tail(d_);
    const double un = u.norm();
    struct Hit {
        Vec r;
        double angle;
    };
    std::vector<Hit> hits;
    for (std::size_t k = 0; k < rays_.size(); ++k) {
        if (limits_[k] < t) continue;
        const auto p = point_at_time(rays_[k], t);
        if (!p) continue;
        Vec r = p->tail(d_) - c->tail(d_);
        const double ang = d_ == 2 ? std::atan2(r[1], r[0]) : 0.0;
        hits.push_back({r, ang});
    }
    if (hits.empty()) return std::nullopt;
    if (d_ == 1) {
        for (const auto& hit : hits) {
            if (un == 0.0 || hit.r[0] * u[0] > 0.0) return std::abs(hit.r[0]);
        }
        return std::nullopt;
    }
    if (un == 0.0) return hits.front().r.norm();
    if (d_ == 2) {
        const double a = std::atan2(u[1], u[0]);
        const double two_pi = 2.0 * std::numbers::pi;
        auto wrap = [&](double x) { return x - two_pi * std::floor(x / two_pi); };
        const Hit* before = nullptr;
        const Hit* after = nullptr;
        double gap_before = two_pi, gap_after = two_pi;
        for (const auto& hit : hits) {
            const double db = wrap(a - hit.angle), da = wrap(hit.angle - a);
            if (db < gap_before) { gap_before = db; before = &hit; }
            if (da < gap_after) { gap_after = da; after = &hit; }
        }
        if (gap_before + gap_after > 0.5 * std::numbers::pi) return std::nullopt;
        const double span = gap_before + gap_after;
        if (span == 0.0) return before->r.norm();
        return (gap_after * before->r.norm() + gap_before * after->r.norm()) / span;
    }
    const Hit* best = nullptr;
    double best_cos = -2.0;
    for (const auto& hit : hits) {
        const double cs = hit.r.dot(u) / (hit.r.norm() * un);
        if (cs > best_cos) { best_cos = cs; best = &hit; }
    }
    return best->r.norm();
}

std::optional<double> LightConeBundle::radial_offset(double t, const Vec& spatial_point) const {
    const auto c = center_at(t);
    const auto r = radius_at(t, spatial_point);
    if (!c || !r) return std::nullopt;
    return (spatial_point - c->tail(d_)).norm() - *r;
}

Verdict causally_precedes(const MetricSpec& m, const Point& p, const Point& q, const CausalSearchConfig& cfg) {
    const int d = m.space_dim();
    if ((p - q).norm() <= cfg.tol) return Verdict::Yes;
    const double dt = q[0] - p[0];
    if (m.cone_exact()) {
        const double dx = (q.tail(d) - p.tail(d)).norm();
        return (dt >= -cfg.tol && dt + cfg.tol >= dx) ? Verdict::Yes : Verdict::No;
    }
    if (dt <= cfg.tol) return Verdict::No;
    const LightConeBundle bundle(m, p, q[0], cfg.n_dirs, cfg.h, cfg.seed);
    const auto offset = bundle.radial_offset(q[0], q.tail(d));
    if (!offset) return Verdict::Undecided;
    if (*offset < -cfg.margin) return Verdict::Yes;
    if (*offset > cfg.margin) return Verdict::No;
    return Verdict::Undecided;
}

}  // namespace qdnw
