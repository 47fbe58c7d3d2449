#include "qdnw/wavesolver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qdnw/errors.hpp"

namespace qdnw {

// ---------------------------------------------------------------------------
// Grid

namespace {

struct NodeCoefficients {
    double sqrtg = 1.0;
    double a00 = -1.0;
    double a11 = 1.0;
    double a22 = 1.0;
    double a12 = 0.0;
};

NodeCoefficients coefficients_at(const MetricSpec& m, const Point& p) {
    const Mat g = m.metric(p);
    const double det = g.determinant();
    if (!(det < 0.0) || std::abs(det) < 1e-12) throw Error(ErrorKind::SingularMetric, "metric degenerate on the grid");
    const Mat ginv = g.inverse();
    const int n = static_cast<int>(g.rows());
    const double scale = ginv.cwiseAbs().maxCoeff();
    for (int k = 1; k < n; ++k) {
        if (std::abs(ginv(0, k)) > 1e-12 * scale) {
            throw Error(ErrorKind::UnsupportedMetric, "the solver needs g^{0k} = 0 (no time-space cross terms)");
        }
    }
    NodeCoefficients c;
    c.sqrtg = std::sqrt(-det);
    c.a00 = c.sqrtg * ginv(0, 0);
    c.a11 = c.sqrtg * ginv(1, 1);
    if (n > 2) {
        c.a22 = c.sqrtg * ginv(2, 2);
        c.a12 = c.sqrtg * ginv(1, 2);
    }
    return c;
}

double local_speed2(const NodeCoefficients& c, int d) {
    double lmax = c.a11;
    if (d == 2) {
        const double tr = c.a11 + c.a22, det = c.a11 * c.a22 - c.a12 * c.a12;
        lmax = 0.5 * tr + std::sqrt(std::max(0.0, 0.25 * tr * tr - det));
    }
    return lmax / (-c.a00);
}

double max_speed(const MetricSpec& m, const Grid& g) {
    double c2 = 0.0;
    const int nt_samples = m.static_in_time() ? 1 : 5;
    for (int s = 0; s < nt_samples; ++s) {
        const double t = nt_samples == 1 ? 0.0 : g.T * s / (nt_samples - 1);
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) c2 = std::max(c2, local_speed2(coefficients_at(m, g.point(t, i, j)), g.d));
        }
    }
    return std::sqrt(c2);
}

Grid base_grid(const MetricSpec& m, double T, const std::vector<double>& lower, const std::vector<double>& upper,
               const std::vector<int>& cells, double collar, double sponge) {
    const int d = m.space_dim();
    if (d < 1 || d > 2) throw Error(ErrorKind::InvalidArgument, "the solver supports d = 1 or 2");
    if (static_cast<int>(lower.size()) != d || static_cast<int>(upper.size()) != d ||
        static_cast<int>(cells.size()) != d) {
        throw Error(ErrorKind::InvalidArgument, "grid box and cell counts must have d entries");
    }
    if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "final time must be positive");
    Grid g;
    g.d = d;
    g.T = T;
    g.collar = collar;
    g.sponge = sponge;
    for (int a = 0; a < d; ++a) {
        if (cells[a] < 4 || !(upper[a] > lower[a])) throw Error(ErrorKind::InvalidArgument, "degenerate grid axis");
        g.lower[a] = lower[a];
        g.upper[a] = upper[a];
        g.nodes[a] = cells[a] + 1;
        g.dx[a] = (upper[a] - lower[a]) / cells[a];
    }
    return g;
}

double inverse_dx_norm(const Grid& g) {
    double s = 0.0;
    for (int a = 0; a < g.d; ++a) s += 1.0 / (g.dx[a] * g.dx[a]);
    return std::sqrt(s);
}

}  // namespace

Grid Grid::make(const MetricSpec& m, double T, const std::vector<double>& lower, const std::vector<double>& upper,
                const std::vector<int>& cells, double cfl, double collar, double sponge) {
    if (!(cfl > 0.0) || cfl > 0.9) throw Error(ErrorKind::CourantViolation, "cfl must lie in (0, 0.9]");
    Grid g = base_grid(m, T, lower, upper, cells, collar, sponge);
    const double c = max_speed(m, g);
    const double dt = cfl / (c * inverse_dx_norm(g));
    g.nt = static_cast<int>(std::ceil(T / dt - 1e-12));
    g.dt = T / g.nt;
    return g;
}

Grid Grid::with_steps(const MetricSpec& m, double T, int nt, const std::vector<double>& lower,
                      const std::vector<double>& upper, const std::vector<int>& cells, double cfl_max, double collar,
                      double sponge) {
    if (nt < 2) throw Error(ErrorKind::InvalidArgument, "need at least two time steps");
    Grid g = base_grid(m, T, lower, upper, cells, collar, sponge);
    g.nt = nt;
    g.dt = T / nt;
    const double nu = g.courant(m);
    if (nu > std::min(cfl_max, 0.9)) {
        std::ostringstream msg;
        msg << "Courant number " << nu << " exceeds " << std::min(cfl_max, 0.9);
        throw Error(ErrorKind::CourantViolation, msg.str());
    }
    return g;
}

Point Grid::point(double t, int i, int j) const {
    Point p(d + 1);
    p[0] = t;
    p[1] = x(i);
    if (d == 2) p[2] = y(j);
    return p;
}

bool Grid::on_boundary(int i, int j) const {
    if (i == 0 || i == nodes[0] - 1) return true;
    return d == 2 && (j == 0 || j == nodes[1] - 1);
}

double Grid::face_distance(int i, int j) const {
    double dist = std::min(x(i) - lower[0], upper[0] - x(i));
    if (d == 2) dist = std::min({dist, y(j) - lower[1], upper[1] - y(j)});
    return dist;
}

bool Grid::interior(int i, int j) const {
    return !on_boundary(i, j) && face_distance(i, j) >= collar - 1e-12;
}

double Grid::courant(const MetricSpec& m) const {
    return max_speed(m, *this) * dt * inverse_dx_norm(*this);
}

void Grid::check_compatible(const Grid& o) const {
    if (d != o.d || nt != o.nt || nodes != o.nodes || dt != o.dt || dx != o.dx) {
        throw Error(ErrorKind::InvalidArgument, "fields live on different grids");
    }
}

// ---------------------------------------------------------------------------
// Grid fields

GridField GridField::zeros(const Grid& g) {
    return GridField{g, std::vector<double>(static_cast<std::size_t>(g.nt + 1) * g.level_size(), 0.0)};
}

GridField GridField::sample(const Grid& g, const std::function<double(const Point&)>& f) {
    GridField out = zeros(g);
    for (int n = 0; n <= g.nt; ++n) {
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) out.at(n, i, j) = f(g.point(g.t(n), i, j));
        }
    }
    return out;
}

double GridField::max_abs() const {
    double s = 0.0;
    for (double v : values) s = std::max(s, std::abs(v));
    return s;
}

double GridField::interior_l2() const {
    double s = 0.0;
    for (int n = 0; n <= grid.nt; ++n) {
        for (int i = 0; i < grid.nodes[0]; ++i) {
            for (int j = 0; j < grid.nodes[1]; ++j) {
                if (grid.interior(i, j)) s += at(n, i, j) * at(n, i, j);
            }
        }
    }
    double cell = grid.dt;
    for (int a = 0; a < grid.d; ++a) cell *= grid.dx[a];
    return std::sqrt(s * cell);
}

double GridField::interior_max() const {
    double s = 0.0;
    for (int n = 0; n <= grid.nt; ++n) {
        for (int i = 0; i < grid.nodes[0]; ++i) {
            for (int j = 0; j < grid.nodes[1]; ++j) {
                if (grid.interior(i, j)) s = std::max(s, std::abs(at(n, i, j)));
            }
        }
    }
    return s;
}

GridField& GridField::operator+=(const GridField& o) {
    grid.check_compatible(o.grid);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] += o.values[k];
    return *this;
}

GridField& GridField::operator-=(const GridField& o) {
    grid.check_compatible(o.grid);
    for (std::size_t k = 0; k < values.size(); ++k) values[k] -= o.values[k];
    return *this;
}

GridField& GridField::operator*=(double c) {
    for (double& v : values) v *= c;
    return *this;
}

GridField operator+(GridField a, const GridField& b) { return a += b; }
GridField operator-(GridField a, const GridField& b) { return a -= b; }
GridField operator*(double c, GridField a) { return a *= c; }

GridField hadamard(const GridField& a, const GridField& b) {
    a.grid.check_compatible(b.grid);
    GridField out = a;
    for (std::size_t k = 0; k < out.values.size(); ++k) out.values[k] *= b.values[k];
    return out;
}

// ---------------------------------------------------------------------------
// Closed-form profiles

namespace {

struct BumpLocal {
    double s = 1.0;
    double q = 0.0, dq = 0.0, d2q = 0.0;  // derivatives in s
};

BumpLocal bump_local(const Bump& b, const Point& x) {
    BumpLocal r;
    double s = 0.0;
    for (int k = 0; k < b.center.size(); ++k) {
        const double z = (x[k] - b.center[k]) / b.width[k];
        s += z * z;
    }
    r.s = s;
    if (s >= 1.0) return r;
    const double u = 1.0 / (1.0 - s);
    r.q = b.amplitude * std::exp(1.0 - u);
    r.dq = -r.q * u * u;
    r.d2q = r.q * (u * u * u * u - 2.0 * u * u * u);
    return r;
}

}  // namespace

double Bump::operator()(const Point& x) const {
    return bump_local(*this, x).q;
}

Vec Bump::gradient(const Point& x) const {
    const BumpLocal r = bump_local(*this, x);
    Vec g = Vec::Zero(center.size());
    if (r.s >= 1.0) return g;
    for (int k = 0; k < center.size(); ++k) g[k] = r.dq * 2.0 * (x[k] - center[k]) / (width[k] * width[k]);
    return g;
}

Mat Bump::hessian(const Point& x) const {
    const BumpLocal r = bump_local(*this, x);
    const int n = static_cast<int>(center.size());
    Mat h = Mat::Zero(n, n);
    if (r.s >= 1.0) return h;
    Vec ds(n);
    for (int k = 0; k < n; ++k) ds[k] = 2.0 * (x[k] - center[k]) / (width[k] * width[k]);
    for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) h(k, l) = r.d2q * ds[k] * ds[l];
        h(k, k) += r.dq * 2.0 / (width[k] * width[k]);
    }
    return h;
}

Box Bump::support() const {
    return Box{Vec(center - width), Vec(center + width)};
}

std::function<double(const Point&)> manufactured_source(const MetricSpec& m, const Bump& u) {
    const auto& gamma = m.conformal_exponent();
    if (m.kind() != MetricSpec::Kind::Minkowski &&
        !(m.kind() == MetricSpec::Kind::ConformalMinkowski && gamma && gamma->static_in_time)) {
        throw Error(ErrorKind::InvalidArgument, "manufactured sources need Minkowski or a static conformal factor");
    }
    const int d = m.space_dim();
    const ScalarField gam = gamma ? *gamma : ScalarField::constant(0.0);
    return [u, gam, d](const Point& x) {
        const Mat h = u.hessian(x);
        const Vec grad = u.gradient(x);
        const Vec dg = gam.gradient(x);
        double lap = -h(0, 0);
        double drift = 0.0;
        for (int a = 1; a <= d; ++a) {
            lap += h(a, a);
            drift += dg[a] * grad[a];
        }
        drift -= dg[0] * grad[0];
        return std::exp(-2.0 * gam(x)) * (lap + (d - 1) * drift);
    };
}

double ProgressingPulse::switch_value(double t, int derivative) const {
    const double tau = (t - t_on) / ramp;
    if (tau <= 0.0) return 0.0;
    if (tau >= 1.0) return derivative == 0 ? 1.0 : 0.0;
    const double L = 1.0 / tau - 1.0 / (1.0 - tau);
    if (L > 700.0) return 0.0;
    if (L < -700.0) return derivative == 0 ? 1.0 : 0.0;
    const double S = 1.0 / (1.0 + std::exp(L));
    if (derivative == 0) return S;
    const double om = 1.0 - tau;
    const double L1 = -1.0 / (tau * tau) - 1.0 / (om * om);
    const double S1 = -S * (1.0 - S) * L1;
    if (derivative == 1) return S1 / ramp;
    const double L2 = 2.0 / (tau * tau * tau) - 2.0 / (om * om * om);
    const double S2 = -S1 * (1.0 - 2.0 * S) * L1 - S * (1.0 - S) * L2;
    return S2 / (ramp * ramp);
}

double ProgressingPulse::value(const Point& x) const {
    const Vec z = Vec::Constant(1, x[0] - sigma * x[1]);
    return amplitude * phi(z) * switch_value(x[0], 0);
}

double ProgressingPulse::source(const Point& x) const {
    const Vec z = Vec::Constant(1, x[0] - sigma * x[1]);
    const double p0 = phi(z), p1 = phi.gradient(z)[0], p2 = phi.hessian(z)(0, 0);
    const double S0 = switch_value(x[0], 0), S1 = switch_value(x[0], 1), S2 = switch_value(x[0], 2);
    return amplitude * ((sigma * sigma - 1.0) * p2 * S0 - 2.0 * p1 * S1 - p0 * S2);
}

// ---------------------------------------------------------------------------
// Leapfrog core

namespace {

/// Coefficient caches for one metric on one grid; refreshed per level when
/// the metric depends on time.
class Leapfrog {
public:
    Leapfrog(const MetricSpec& m, const Grid& g) : m_(m), g_(g), n_(g.level_size()) {
        node_.resize(n_);
        a00_minus_.resize(n_);
        a00_plus_.resize(n_);
        sigma_.assign(n_, 0.0);
        if (g.collar > 0.0 && g.sponge > 0.0) {
            for (int i = 0; i < g.nodes[0]; ++i) {
                for (int j = 0; j < g.nodes[1]; ++j) {
                    const double depth = (g.collar - g.face_distance(i, j)) / g.collar;
                    if (depth > 0.0) sigma_[g.index(i, j)] = g.sponge * depth * depth;
                }
            }
        }
        fill(0);
    }

    /// u_next from the two previous levels and rhs = f - w at level n.
    void step(int n, const double* u_prev, const double* u_cur, const double* rhs, double* u_next) {
        if (!m_.static_in_time()) fill(n);
        const double dt2 = g_.dt * g_.dt;
        const int nx = g_.nodes[0], ny = g_.nodes[1];
        const double ix2 = 1.0 / (g_.dx[0] * g_.dx[0]);
        const double iy2 = g_.d == 2 ? 1.0 / (g_.dx[1] * g_.dx[1]) : 0.0;
        const double ixy = g_.d == 2 ? 1.0 / (4.0 * g_.dx[0] * g_.dx[1]) : 0.0;
        for (int i = 0; i < nx; ++i) {
            for (int j = 0; j < ny; ++j) {
                const std::size_t k = g_.index(i, j);
                if (g_.on_boundary(i, j)) {
                    u_next[k] = 0.0;
                    continue;
                }
                const NodeCoefficients& c = node_[k];
                const std::size_t kxp = g_.index(i + 1, j), kxm = g_.index(i - 1, j);
                const double axp = 0.5 * (c.a11 + node_[kxp].a11), axm = 0.5 * (c.a11 + node_[kxm].a11);
                double L = (axp * (u_cur[kxp] - u_cur[k]) - axm * (u_cur[k] - u_cur[kxm])) * ix2;
                if (g_.d == 2) {
                    const std::size_t kyp = g_.index(i, j + 1), kym = g_.index(i, j - 1);
                    const double ayp = 0.5 * (c.a22 + node_[kyp].a22), aym = 0.5 * (c.a22 + node_[kym].a22);
                    L += (ayp * (u_cur[kyp] - u_cur[k]) - aym * (u_cur[k] - u_cur[kym])) * iy2;
                    if (has_mixed_) {
                        const std::size_t kpp = g_.index(i + 1, j + 1), kpm = g_.index(i + 1, j - 1);
                        const std::size_t kmp = g_.index(i - 1, j + 1), kmm = g_.index(i - 1, j - 1);
                        L += (node_[kxp].a12 * (u_cur[kpp] - u_cur[kpm]) - node_[kxm].a12 * (u_cur[kmp] - u_cur[kmm]) +
                              node_[kyp].a12 * (u_cur[kpp] - u_cur[kmp]) - node_[kym].a12 * (u_cur[kpm] - u_cur[kmm])) *
                             ixy;
                    }
                }
                const double ap = a00_plus_[k] / dt2, am = a00_minus_[k] / dt2;
                const double damp = sigma_[k] * c.a00 / (2.0 * g_.dt);
                const double rhs_total =
                    c.sqrtg * rhs[k] - L + ap * u_cur[k] + am * (u_cur[k] - u_prev[k]) + damp * u_prev[k];
                u_next[k] = rhs_total / (ap + damp);
            }
        }
    }

private:
    void fill(int n) {
        const double t = g_.t(n);
        has_mixed_ = false;
        for (int i = 0; i < g_.nodes[0]; ++i) {
            for (int j = 0; j < g_.nodes[1]; ++j) {
                const std::size_t k = g_.index(i, j);
                node_[k] = coefficients_at(m_, g_.point(t, i, j));
                has_mixed_ = has_mixed_ || node_[k].a12 != 0.0;
                if (m_.static_in_time()) {
                    a00_minus_[k] = a00_plus_[k] = node_[k].a00;
                } else {
                    a00_minus_[k] = coefficients_at(m_, g_.point(t - 0.5 * g_.dt, i, j)).a00;
                    a00_plus_[k] = coefficients_at(m_, g_.point(t + 0.5 * g_.dt, i, j)).a00;
                }
            }
        }
    }

    const MetricSpec& m_;
    const Grid& g_;
    std::size_t n_;
    std::vector<NodeCoefficients> node_;
    std::vector<double> a00_minus_, a00_plus_, sigma_;
    bool has_mixed_ = false;
};

void check_level(const double* u, std::size_t n, double guard, int level) {
    for (std::size_t k = 0; k < n; ++k) {
        if (!std::isfinite(u[k])) {
            throw Error(ErrorKind::NaNDetected, "non-finite value at time level " + std::to_string(level));
        }
        if (std::abs(u[k]) > guard) {
            throw Error(ErrorKind::DivergenceDetected, "field exceeded the divergence guard at level " + std::to_string(level));
        }
    }
}

/// Marches levels 0..nt; rhs(n, u_nm2, u_nm1, u_n, out) fills f - w at level n.
template <class RhsFn>
void march(const MetricSpec& m, const Grid& g, RhsFn&& rhs, const LevelObserver& observe, double guard) {
    const std::size_t n = g.level_size();
    Leapfrog lf(m, g);
    std::vector<double> u0(n, 0.0), u1(n, 0.0), u2(n, 0.0), next(n, 0.0), r(n, 0.0);
    // u0 = level n-2, u1 = level n-1, u2 = level n
    observe(0, u2.data());
    for (int level = 0; level < g.nt; ++level) {
        rhs(level, u0.data(), u1.data(), u2.data(), r.data());
        lf.step(level, u1.data(), u2.data(), r.data(), next.data());
        check_level(next.data(), n, guard, level + 1);
        std::swap(u0, u1);
        std::swap(u1, u2);
        std::swap(u2, next);
        observe(level + 1, u2.data());
    }
}

/// g^{ij} at grid nodes, cached when the metric is static.
class NodeInverse {
public:
    NodeInverse(const MetricSpec& m, const Grid& g) : m_(m), g_(g) {
        if (m.static_in_time()) {
            cache_.resize(g.level_size());
            for (int i = 0; i < g.nodes[0]; ++i)
                for (int j = 0; j < g.nodes[1]; ++j) cache_[g.index(i, j)] = dual_metric(m, g.point(0.0, i, j));
        }
    }
    Mat operator()(int n, int i, int j) const {
        if (!cache_.empty()) return cache_[g_.index(i, j)];
        return dual_metric(m_, g_.point(g_.t(n), i, j));
    }

private:
    const MetricSpec& m_;
    const Grid& g_;
    std::vector<Mat> cache_;
};

/// Symmetric part of a form, evaluated once when constant.
class FormCache {
public:
    FormCache(const QuadraticForm& f, const Grid& g) : f_(f), g_(g) {
        if (f.is_constant()) {
            const Mat w = f.at(g.point(0.0, 0, 0));
            fixed_ = 0.5 * (w + w.transpose());
            zero_ = fixed_.cwiseAbs().maxCoeff() == 0.0;
        }
    }
    bool is_zero() const { return f_.is_constant() && zero_; }
    Mat operator()(int n, int i, int j) const {
        if (f_.is_constant()) return fixed_;
        const Mat w = f_.at(g_.point(g_.t(n), i, j));
        return Mat(0.5 * (w + w.transpose()));
    }

private:
    const QuadraticForm& f_;
    const Grid& g_;
    Mat fixed_;
    bool zero_ = false;
};

/// Covector of first derivatives of a stored field at a node.
Vec field_gradient(const GridField& u, int n, int i, int j) {
    const Grid& g = u.grid;
    Vec c = Vec::Zero(g.d + 1);
    if (g.on_boundary(i, j)) return c;
    if (n == 0) {
        c[0] = g.nt >= 2 ? (-3.0 * u.at(0, i, j) + 4.0 * u.at(1, i, j) - u.at(2, i, j)) / (2.0 * g.dt) : 0.0;
    } else if (n == g.nt) {
        c[0] = (3.0 * u.at(n, i, j) - 4.0 * u.at(n - 1, i, j) + u.at(n - 2, i, j)) / (2.0 * g.dt);
    } else {
        c[0] = (u.at(n + 1, i, j) - u.at(n - 1, i, j)) / (2.0 * g.dt);
    }
    c[1] = (u.at(n, i + 1, j) - u.at(n, i - 1, j)) / (2.0 * g.dx[0]);
    if (g.d == 2) c[2] = (u.at(n, i, j + 1) - u.at(n, i, j - 1)) / (2.0 * g.dx[1]);
    return c;
}

}  // namespace

void solve_linear_streaming(const MetricSpec& m, const Grid& grid, const std::function<double(const Point&)>& f,
                            const LevelObserver& observe) {
    auto rhs = [&](int n, const double*, const double*, const double*, double* out) {
        const double t = grid.t(n);
        for (int i = 0; i < grid.nodes[0]; ++i)
            for (int j = 0; j < grid.nodes[1]; ++j) out[grid.index(i, j)] = f(grid.point(t, i, j));
    };
    march(m, grid, rhs, observe, std::numeric_limits<double>::infinity());
}

GridField solve_linear(const MetricSpec& m, const GridField& f) {
    const Grid& grid = f.grid;
    GridField u = GridField::zeros(grid);
    auto rhs = [&](int n, const double*, const double*, const double*, double* out) {
        std::copy(f.level(n), f.level(n) + grid.level_size(), out);
    };
    auto store = [&](int n, const double* level) { std::copy(level, level + grid.level_size(), u.level(n)); };
    march(m, grid, rhs, store, std::numeric_limits<double>::infinity());
    return u;
}

GridField nonlinearity_field(const MetricSpec& m, const NonlinearTerm& nl, const GridField& u) {
    const Grid& g = u.grid;
    const NodeInverse ginv(m, g);
    const FormCache n0(nl.N0, g), n1(nl.N1, g), mm(nl.M, g);
    GridField w = GridField::zeros(g);
    for (int n = 0; n <= g.nt; ++n) {
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                const Vec xi = ginv(n, i, j) * field_gradient(u, n, i, j);
                const double val = u.at(n, i, j);
                double s = 0.0;
                if (!n0.is_zero()) s += xi.dot(n0(n, i, j) * xi);
                if (!n1.is_zero()) s += val * xi.dot(n1(n, i, j) * xi);
                if (!mm.is_zero()) s += val * val * xi.dot(mm(n, i, j) * xi);
                w.at(n, i, j) = s;
            }
        }
    }
    return w;
}

GridField form_field(const MetricSpec& m, const QuadraticForm& F, const GridField& a, const GridField& b) {
    a.grid.check_compatible(b.grid);
    const Grid& g = a.grid;
    const NodeInverse ginv(m, g);
    const FormCache form(F, g);
    GridField out = GridField::zeros(g);
    if (form.is_zero()) return out;
    for (int n = 0; n <= g.nt; ++n) {
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                const Mat G = ginv(n, i, j);
                const Vec xa = G * field_gradient(a, n, i, j);
                const Vec xb = G * field_gradient(b, n, i, j);
                out.at(n, i, j) = xa.dot(form(n, i, j) * xb);
            }
        }
    }
    return out;
}

GridField solve_nonlinear(const MetricSpec& m, const NonlinearTerm& nl, const GridField& f, const NonlinearOptions& opt) {
    const Grid& g = f.grid;
    if (opt.mode == NonlinearMode::Picard) {
        const GridField v = solve_linear(m, f);
        const double scale = std::max(v.max_abs(), std::numeric_limits<double>::min());
        GridField u = v;
        double last = std::numeric_limits<double>::infinity();
        for (int it = 0; it < opt.picard_max_iter; ++it) {
            GridField next = v - solve_linear(m, nonlinearity_field(m, nl, u));
            double res = 0.0;
            for (std::size_t k = 0; k < next.values.size(); ++k) res = std::max(res, std::abs(next.values[k] - u.values[k]));
            res /= scale;
            if (!std::isfinite(res)) throw Error(ErrorKind::NaNDetected, "non-finite Picard iterate");
            if (next.max_abs() > opt.divergence_guard) throw Error(ErrorKind::DivergenceDetected, "Picard iterate exceeded the guard");
            u = std::move(next);
            if (res <= opt.picard_tol) return u;
            if (it >= 2 && res >= last) {
                std::ostringstream msg;
                msg << "Picard residual stopped decreasing (" << last << " -> " << res << ") at iteration " << it;
                throw Error(ErrorKind::NonContraction, msg.str());
            }
            last = res;
        }
        throw Error(ErrorKind::NonContraction, "Picard iteration did not reach the tolerance");
    }

    const NodeInverse ginv(m, g);
    const FormCache n0(nl.N0, g), n1(nl.N1, g), mm(nl.M, g);
    const bool linear = n0.is_zero() && n1.is_zero() && mm.is_zero();
    GridField u = GridField::zeros(g);
    auto rhs = [&](int n, const double* u_nm2, const double* u_nm1, const double* u_n, double* out) {
        std::copy(f.level(n), f.level(n) + g.level_size(), out);
        if (linear) return;
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                if (g.on_boundary(i, j)) continue;
                const std::size_t k = g.index(i, j);
                Vec c(g.d + 1);
                // one-sided second-order time derivative: later levels are not known yet
                c[0] = (3.0 * u_n[k] - 4.0 * u_nm1[k] + u_nm2[k]) / (2.0 * g.dt);
                c[1] = (u_n[g.index(i + 1, j)] - u_n[g.index(i - 1, j)]) / (2.0 * g.dx[0]);
                if (g.d == 2) c[2] = (u_n[g.index(i, j + 1)] - u_n[g.index(i, j - 1)]) / (2.0 * g.dx[1]);
                if (c.cwiseAbs().maxCoeff() == 0.0) continue;
                const Vec xi = ginv(n, i, j) * c;
                const double val = u_n[k];
                double s = 0.0;
                if (!n0.is_zero()) s += xi.dot(n0(n, i, j) * xi);
                if (!n1.is_zero()) s += val * xi.dot(n1(n, i, j) * xi);
                if (!mm.is_zero()) s += val * val * xi.dot(mm(n, i, j) * xi);
                out[k] -= s;
            }
        }
    };
    auto store = [&](int n, const double* level) { std::copy(level, level + g.level_size(), u.level(n)); };
    march(m, g, rhs, store, opt.divergence_guard);
    return u;
}

std::vector<GridField> gradient_field(const MetricSpec& m, const GridField& u) {
    const Grid& g = u.grid;
    const NodeInverse ginv(m, g);
    std::vector<GridField> out(static_cast<std::size_t>(g.d + 1), GridField::zeros(g));
    for (int n = 0; n <= g.nt; ++n) {
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                const Vec up = ginv(n, i, j) * field_gradient(u, n, i, j);
                for (int a = 0; a <= g.d; ++a) out[a].at(n, i, j) = up[a];
            }
        }
    }
    return out;
}

GridField apply_box(const MetricSpec& m, const GridField& u) {
    const Grid& g = u.grid;
    GridField out = GridField::zeros(g);
    // one leapfrog step with zero right-hand side and unit-free bookkeeping:
    // box u^n = sqrtg^{-1} [A00+ (u^{n+1}-u^n) - A00- (u^n-u^{n-1})]/dt^2 + sqrtg^{-1} L u^n
    for (int n = 1; n < g.nt; ++n) {
        const double t = g.t(n);
        for (int i = 1; i + 1 < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                if (g.on_boundary(i, j)) continue;
                const Point p = g.point(t, i, j);
                const NodeCoefficients c = coefficients_at(m, p);
                double ap = c.a00, am = c.a00;
                if (!m.static_in_time()) {
                    ap = coefficients_at(m, g.point(t + 0.5 * g.dt, i, j)).a00;
                    am = coefficients_at(m, g.point(t - 0.5 * g.dt, i, j)).a00;
                }
                double acc = (ap * (u.at(n + 1, i, j) - u.at(n, i, j)) - am * (u.at(n, i, j) - u.at(n - 1, i, j))) /
                             (g.dt * g.dt);
                const NodeCoefficients cxp = coefficients_at(m, g.point(t, i + 1, j));
                const NodeCoefficients cxm = coefficients_at(m, g.point(t, i - 1, j));
                acc += (0.5 * (c.a11 + cxp.a11) * (u.at(n, i + 1, j) - u.at(n, i, j)) -
                        0.5 * (c.a11 + cxm.a11) * (u.at(n, i, j) - u.at(n, i - 1, j))) /
                       (g.dx[0] * g.dx[0]);
                if (g.d == 2) {
                    const NodeCoefficients cyp = coefficients_at(m, g.point(t, i, j + 1));
                    const NodeCoefficients cym = coefficients_at(m, g.point(t, i, j - 1));
                    acc += (0.5 * (c.a22 + cyp.a22) * (u.at(n, i, j + 1) - u.at(n, i, j)) -
                            0.5 * (c.a22 + cym.a22) * (u.at(n, i, j) - u.at(n, i, j - 1))) /
                           (g.dx[1] * g.dx[1]);
                    const double q = 1.0 / (4.0 * g.dx[0] * g.dx[1]);
                    acc += (cxp.a12 * (u.at(n, i + 1, j + 1) - u.at(n, i + 1, j - 1)) -
                            cxm.a12 * (u.at(n, i - 1, j + 1) - u.at(n, i - 1, j - 1)) +
                            cyp.a12 * (u.at(n, i + 1, j + 1) - u.at(n, i - 1, j + 1)) -
                            cym.a12 * (u.at(n, i + 1, j - 1) - u.at(n, i - 1, j - 1))) *
                           q;
                }
                out.at(n, i, j) = acc / c.sqrtg;
            }
        }
    }
    return out;
}

std::vector<char> support_mask(const GridField& f, double threshold) {
    std::vector<char> mask(f.values.size(), 0);
    for (std::size_t k = 0; k < f.values.size(); ++k) mask[k] = std::abs(f.values[k]) > threshold ? 1 : 0;
    return mask;
}

std::vector<char> discrete_causal_future(const Grid& g, const std::vector<char>& source) {
    const std::size_t L = g.level_size();
    std::vector<char> reach(source.size(), 0);
    std::vector<char> seed(L, 0);
    for (int n = 0; n <= g.nt; ++n) {
        // seed = union of the three previous reachable levels and the source at level n-1
        std::fill(seed.begin(), seed.end(), 0);
        for (int back = 1; back <= 3; ++back) {
            if (n - back < 0) break;
            for (std::size_t k = 0; k < L; ++k) seed[k] |= reach[(n - back) * L + k];
        }
        if (n >= 1) {
            for (std::size_t k = 0; k < L; ++k) seed[k] |= source[(n - 1) * L + k];
        }
        char* out = reach.data() + n * L;
        for (int i = 0; i < g.nodes[0]; ++i) {
            for (int j = 0; j < g.nodes[1]; ++j) {
                char hit = source[n * L + g.index(i, j)];
                for (int di = -1; di <= 1 && !hit; ++di) {
                    for (int dj = -1; dj <= 1 && !hit; ++dj) {
                        const int ii = i + di, jj = j + dj;
                        if (ii < 0 || ii >= g.nodes[0] || jj < 0 || jj >= g.nodes[1]) continue;
                        hit = seed[g.index(ii, jj)];
                    }
                }
                out[g.index(i, j)] = hit;
            }
        }
    }
    return reach;
}

double leakage_outside(const GridField& u, const std::vector<char>& mask, double f_scale) {
    double worst = 0.0;
    for (std::size_t k = 0; k < u.values.size(); ++k) {
        if (!mask[k]) worst = std::max(worst, std::abs(u.values[k]));
    }
    return f_scale > 0.0 ? worst / f_scale : worst;
}

std::vector<ConvergenceRow> convergence_study(const MetricSpec& m, const Bump& exact, double T,
                                              const std::vector<double>& lower, const std::vector<double>& upper,
                                              const std::vector<std::vector<int>>& resolutions, double cfl) {
    if (resolutions.size() < 3) throw Error(ErrorKind::InvalidArgument, "convergence study needs three resolutions");
    const auto f = manufactured_source(m, exact);
    std::vector<ConvergenceRow> rows;
    for (const auto& cells : resolutions) {
        const Grid g = Grid::make(m, T, lower, upper, cells, cfl);
        double sum = 0.0;
        auto observe = [&](int n, const double* level) {
            const double t = g.t(n);
            for (int i = 0; i < g.nodes[0]; ++i) {
                for (int j = 0; j < g.nodes[1]; ++j) {
                    if (!g.interior(i, j)) continue;
                    const double e = level[g.index(i, j)] - exact(g.point(t, i, j));
                    sum += e * e;
                }
            }
        };
        solve_linear_streaming(m, g, f, observe);
        double cell = g.dt;
        for (int a = 0; a < g.d; ++a) cell *= g.dx[a];
        ConvergenceRow row;
        row.cells = cells;
        row.error = std::sqrt(sum * cell);
        if (!rows.empty()) row.order = std::log2(rows.back().error / row.error);
        rows.push_back(row);
    }
    return rows;
}

}  // namespace qdnw
