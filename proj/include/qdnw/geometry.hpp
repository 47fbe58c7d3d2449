#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qdnw/linalg.hpp"
#include "qdnw/scalar_field.hpp"

namespace qdnw {

/// Coordinates (t, x^1, ..., x^d) of a space-time point.
using Point = Vec;

/// Tangent vector, components with upper indices.
struct Vector {
    Vec c;
};

/// Cotangent vector, components with lower indices.
struct Covector {
    Vec c;
};

using AnyVector = std::variant<Vector, Covector>;

enum class CausalCharacter { Timelike, Null, Spacelike };

std::string_view to_string(CausalCharacter c);

/// Axis-aligned coordinate box; unbounded by default.
struct Box {
    Vec lower;
    Vec upper;

    static Box unbounded(int n);
    bool contains(const Vec& x) const;
};

/// Lorentzian metric of signature (-, +, ..., +) on R^{1+d}, evaluable with
/// first derivatives at any coordinate point.
class MetricSpec {
public:
    enum class Kind { Minkowski, ConformalMinkowski, UltrastaticSphere, Product, CoefficientTable, Conformal };

    using MatrixField = std::function<Mat(const Vec&)>;
    using DerivativeField = std::function<Mat(const Vec&, int)>;

    static MetricSpec minkowski(int d);
    /// e^{2 gamma} times the Minkowski metric.
    static MetricSpec conformal_minkowski(int d, ScalarField gamma);
    /// e^{2 gamma} times an arbitrary base metric.
    static MetricSpec conformal(const MetricSpec& base, ScalarField gamma);
    /// -dt^2 + d theta^2 + sin^2(theta) d phi^2, coordinates (t, theta, phi).
    static MetricSpec ultrastatic_sphere();
    /// -beta dt^2 + kappa_{ab} dy^a dy^b with kappa given row-major (d*d entries).
    static MetricSpec product(int d, ScalarField beta, std::vector<ScalarField> kappa);
    /// Tabulated coefficients; derivatives by Richardson-extrapolated central differences.
    static MetricSpec coefficient_table(int d, MatrixField g, bool static_in_time = false,
                                        double fd_step = 1e-5);

    Kind kind() const { return kind_; }
    int space_dim() const { return d_; }
    int dim() const { return d_ + 1; }
    const std::string& name() const { return name_; }
    bool static_in_time() const { return static_; }
    /// Light cones coincide with those of Minkowski space.
    bool cone_exact() const { return cone_exact_; }
    const Box& domain() const { return domain_; }
    MetricSpec& with_domain(Box box);
    /// Conformal factor exponent when cone_exact() (zero for Minkowski).
    const std::optional<ScalarField>& conformal_exponent() const { return gamma_; }

    Mat metric(const Vec& x) const { return g_(x); }
    /// d g_{ij} / d x^k
    Mat derivative(const Vec& x, int k) const { return dg_(x, k); }

    /// Throws SingularMetric / InvalidArgument if the coefficients at x are not
    /// a symmetric Lorentzian matrix with t a time function.
    void validate_at(const Vec& x) const;

private:
    MetricSpec() = default;

    Kind kind_ = Kind::Minkowski;
    int d_ = 3;
    std::string name_;
    bool static_ = true;
    bool cone_exact_ = false;
    std::optional<ScalarField> gamma_;
    Box domain_;
    MatrixField g_;
    DerivativeField dg_;
};

Mat dual_metric(const MetricSpec& m, const Point& x);
Vector raise(const MetricSpec& m, const Point& x, const Covector& xi);
Covector lower(const MetricSpec& m, const Point& x, const Vector& v);

double inner(const MetricSpec& m, const Point& x, const Vector& a, const Vector& b);
double inner(const MetricSpec& m, const Point& x, const Covector& a, const Covector& b);
/// Runtime-tagged variant; throws KindMismatch when the kinds differ.
double inner(const MetricSpec& m, const Point& x, const AnyVector& a, const AnyVector& b);

CausalCharacter causal_character(const MetricSpec& m, const Point& x, const Vector& v,
                                 double tol_null = 1e-10);

/// Future-pointing null vector e_0 + lambda * u for a spatial direction u.
/// Throws ConeDegenerate when the quadratic for lambda has no positive root.
Vector future_null_vector(const MetricSpec& m, const Point& x, const Vec& spatial_dir);

/// Deterministic lattice of unit spatial directions in R^d.
std::vector<Vec> direction_lattice(int d, int n, std::uint64_t seed);

/// Gamma^i_{jk}, stored densely.
class Christoffel {
public:
    explicit Christoffel(int n) : n_(n) { data_.fill(0.0); }
    double operator()(int i, int j, int k) const { return data_[(i * kMaxDim + j) * kMaxDim + k]; }
    double& operator()(int i, int j, int k) { return data_[(i * kMaxDim + j) * kMaxDim + k]; }
    int dim() const { return n_; }
    /// Gamma^i_{jk} a^j b^k
    Vec contract(const Vec& a, const Vec& b) const;

private:
    int n_;
    std::array<double, kMaxDim * kMaxDim * kMaxDim> data_{};
};

Christoffel christoffel(const MetricSpec& m, const Point& x);

struct GeodesicSample {
    double s = 0.0;
    Vec x;
    Vec v;
};

struct GeodesicPath {
    std::vector<GeodesicSample> samples;
    CausalCharacter character = CausalCharacter::Null;
    double h = 0.0;
    /// g(v, v) at the start.
    double initial_norm = 0.0;

    /// Worst |g(v,v) - g(v0,v0)| along the path.
    double conservation_defect(const MetricSpec& m) const;
    /// CSV with columns s, x0..xd, v0..vd.
    void write_csv(std::ostream& os) const;
};

using GeodesicStop = std::function<bool(const GeodesicSample&)>;

/// Fixed-step classical Runge-Kutta integration of the geodesic equation.
/// Stops early when `stop` returns true for a sample (that sample is kept).
GeodesicPath geodesic_trace(const MetricSpec& m, const Point& x0, const Vector& theta0,
                            double s_max, double h, const GeodesicStop& stop = {});

/// Cubic Hermite interpolation of the path at coordinate time t, if the path
/// reaches it.
std::optional<Vec> point_at_time(const GeodesicPath& path, double t);

inline constexpr double kTolConj = 1e-8;

/// Smallest parameter where the Jacobi propagator J(s) (J(0)=0, J'(0)=I)
/// degenerates, measured by det(J(s)/s).
std::optional<double> first_conjugate_time(const MetricSpec& m, const GeodesicPath& path,
                                           double tol_conj = kTolConj);

struct FlowoutSurface {
    Point base_point;
    Vector base_direction;
    double t0 = 0.0;
    double s0 = 0.0;
    double h = 0.0;
    Point x_prime;
    Vector theta_prime;
    std::vector<Vector> directions;
    std::vector<GeodesicPath> paths;
    /// Crossing of every path with {t = 2 t0}.
    std::vector<Point> slice;
};

FlowoutSurface flowout_surface(const MetricSpec& m, const Point& x0, const Vector& theta0, double t0,
                               double s0, int n_dirs, double h = 1e-2, std::uint64_t seed = 1);

enum class Verdict { Yes, No, Undecided };

std::string_view to_string(Verdict v);

struct CausalSearchConfig {
    int n_dirs = 128;
    double h = 1e-2;
    /// Slack for the exact cone test.
    double tol = 1e-9;
    /// Radial margin separating yes/no from undecided in the shooting search.
    double margin = 1e-3;
    std::uint64_t seed = 0;
};

Verdict causally_precedes(const MetricSpec& m, const Point& p, const Point& q,
                          const CausalSearchConfig& cfg = {});

/// Future null rays from a vertex, traced in coordinate time and truncated at
/// their first conjugate point. Used for cone cross-sections.
class LightConeBundle {
public:
    LightConeBundle(const MetricSpec& m, const Point& vertex, double t_end, int n_dirs, double h,
                    std::uint64_t seed);

    /// Centroid of the ray cross-section at coordinate time t (all rays, conjugate limits ignored).
    std::optional<Vec> center_at(double t) const;
    /// Cross-section radius from the centre in the spatial direction of `dir`,
    /// interpolated between neighbouring rays; empty when no valid ray reaches t.
    std::optional<double> radius_at(double t, const Vec& spatial_point) const;
    /// Signed radial offset: |y - c(t)| - R(t, dir). Negative means inside.
    std::optional<double> radial_offset(double t, const Vec& spatial_point) const;

    const std::vector<GeodesicPath>& rays() const { return rays_; }
    const std::vector<double>& ray_limits() const { return limits_; }
    const Point& vertex() const { return vertex_; }

private:
    int d_;
    Point vertex_;
    std::vector<Vec> dirs_;
    std::vector<GeodesicPath> rays_;
    std::vector<double> limits_;  // coordinate time where each ray stops being valid
};

}  // namespace qdnw
