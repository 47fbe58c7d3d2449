#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qdnw/errors.hpp"
#include "qdnw/geometry.hpp"

namespace qdnw {

/// x-dependent bilinear form w(xi, eta) = W_ab xi^a eta^b on tangent vectors.
/// W is stored in full so antisymmetric parts survive.
class QuadraticForm {
public:
    using Evaluator = std::function<Mat(const Vec&)>;

    QuadraticForm() = default;
    QuadraticForm(Evaluator w, std::string label, bool constant = false)
        : w_(std::move(w)), label_(std::move(label)), constant_(constant) {}

    static QuadraticForm constant(const Mat& w, std::string label = "matrix");
    static QuadraticForm zero(int n);
    /// The metric itself, g_ab(x).
    static QuadraticForm metric(const MetricSpec& m);
    /// E^{ab}: +1 at (a, b), -1 at (b, a).
    static QuadraticForm E(int n, int a, int b);
    /// F^{ab}: +1 at (a, b) and (b, a), a != b.
    static QuadraticForm F(int n, int a, int b);
    /// G^a: +1 at (a, a).
    static QuadraticForm G(int n, int a);

    Mat at(const Vec& x) const { return w_(x); }
    bool is_constant() const { return constant_; }
    const std::string& label() const { return label_; }
    bool valid() const { return static_cast<bool>(w_); }

    friend QuadraticForm operator+(const QuadraticForm& a, const QuadraticForm& b);
    friend QuadraticForm operator*(double c, const QuadraticForm& a);

private:
    Evaluator w_;
    std::string label_;
    bool constant_ = false;
};

/// Bilinear evaluation on tangent vectors; covector inputs raise KindMismatch.
double evaluate(const QuadraticForm& w, const MetricSpec& m, const Point& x, const AnyVector& xi,
                const AnyVector& eta);

/// n future null tangent vectors e_0 + lambda u with u uniform on the unit sphere.
std::vector<Vector> sample_null_cone(const MetricSpec& m, const Point& x, int n, std::uint64_t seed = 0);

inline constexpr double kTolNull = 1e-10;
inline constexpr double kTolDec = 1e-9;

/// max |w(v, v)| / |v|^2 over sampled null vectors is <= tol_null.
bool is_null_form(const QuadraticForm& w, const MetricSpec& m, const Point& x, int n_samples = 64,
                  std::uint64_t seed = 0, double tol_null = kTolNull);

/// w = C0 g + sum_{a<b} a_ab E^{ab} at a point.
struct Decomposition {
    double C0 = 0.0;
    /// Strict upper triangle holds a_ab; the rest is zero.
    Mat a;
    Point x;
    /// Index pair of the g coefficient used as pivot.
    std::pair<int, int> pivot{0, 0};

    Mat reconstruct(const MetricSpec& m) const;
};

/// Raised when the symmetric residual after removing C0 g is too large.
class NotANullFormError : public Error {
public:
    NotANullFormError(const std::string& message, int a, int b, double residual)
        : Error(ErrorKind::NotANullForm, message), a_(a), b_(b), residual_(residual) {}
    int row() const { return a_; }
    int col() const { return b_; }
    double residual() const { return residual_; }

private:
    int a_, b_;
    double residual_;
};

/// Constructive decomposition. The pivot defaults to the g coefficient of
/// largest magnitude; a specific (a, b) with a <= b may be forced.
/// The residual test is |r| <= tol_dec * max(1, max |W|).
Decomposition decompose_null_form(const QuadraticForm& w, const MetricSpec& m, const Point& x,
                                  double tol_dec = kTolDec,
                                  std::optional<std::pair<int, int>> pivot = std::nullopt);

/// Taylor data of w(x, u, xi) = N0(xi, xi) + u N1(xi, xi) + u^2 M(xi, xi).
struct NonlinearTerm {
    QuadraticForm N0;
    QuadraticForm N1;
    QuadraticForm M;
    /// Filled by classify_nonlinearity when N0 and N1 decompose.
    std::function<double(const Vec&)> C0;
    std::function<double(const Vec&)> C1;

    static NonlinearTerm zero(int n);
    bool classified() const { return static_cast<bool>(C0) && static_cast<bool>(C1); }
};

struct PointVerdict {
    Point x;
    bool n0_null = false;
    bool n1_null = false;
    bool m_null = false;
    double C0 = 0.0;
    double C1 = 0.0;
    std::string witness;
};

struct AssumptionReport {
    bool satisfied = false;
    std::vector<PointVerdict> points;
    std::string summary;
};

/// Checks that N0 and N1 are null forms and M is not, at every sample point.
/// On decomposable N0, N1 the coefficient functions C0, C1 are stored in nl.
AssumptionReport classify_nonlinearity(NonlinearTerm& nl, const MetricSpec& m,
                                       const std::vector<Point>& sample_points);

/// Parses "3*g + 2*E01 - 1*E23 + F12 + G0" (or "0") into a form on m.
QuadraticForm parse_form(const std::string& text, const MetricSpec& m);

}  // namespace qdnw
