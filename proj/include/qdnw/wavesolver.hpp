#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "qdnw/geometry.hpp"
#include "qdnw/nullform.hpp"

namespace qdnw {

/// Uniform space-time grid on [0, T] x box, d in {1, 2}. Nodes include the
/// boundary, where the field is held at zero.
struct Grid {
    int d = 1;
    double T = 1.0;
    int nt = 1;
    double dt = 1.0;
    std::array<double, 2> lower{0.0, 0.0};
    std::array<double, 2> upper{1.0, 1.0};
    std::array<double, 2> dx{1.0, 1.0};
    /// Node counts per spatial axis (1 for unused axes).
    std::array<int, 2> nodes{1, 1};
    /// Width of the absorbing collar along each face, in coordinate units.
    double collar = 0.0;
    /// Peak damping rate inside the collar.
    double sponge = 0.0;

    /// Time step from the Courant bound dt = cfl * dx / c_max, rounded so nt * dt = T.
    static Grid make(const MetricSpec& m, double T, const std::vector<double>& lower, const std::vector<double>& upper,
                     const std::vector<int>& cells, double cfl = 0.5, double collar = 0.0, double sponge = 0.0);
    /// Explicit time step; throws CourantViolation when the Courant number exceeds cfl_max.
    static Grid with_steps(const MetricSpec& m, double T, int nt, const std::vector<double>& lower,
                           const std::vector<double>& upper, const std::vector<int>& cells, double cfl_max = 0.9,
                           double collar = 0.0, double sponge = 0.0);

    std::size_t level_size() const { return static_cast<std::size_t>(nodes[0]) * static_cast<std::size_t>(nodes[1]); }
    std::size_t index(int i, int j = 0) const { return static_cast<std::size_t>(i) * nodes[1] + j; }
    double t(int n) const { return n * dt; }
    double x(int i) const { return lower[0] + i * dx[0]; }
    double y(int j) const { return lower[1] + j * dx[1]; }
    Point point(double t, int i, int j = 0) const;
    bool on_boundary(int i, int j) const;
    /// Distance from the node to the nearest face of the box.
    double face_distance(int i, int j) const;
    /// Outside the collar and off the boundary.
    bool interior(int i, int j) const;
    /// Courant number c_max * dt * sqrt(sum 1/dx^2) sampled over the box.
    double courant(const MetricSpec& m) const;
    void check_compatible(const Grid& other) const;
};

/// Sampled field on all time levels, level-major.
struct GridField {
    Grid grid;
    std::vector<double> values;

    static GridField zeros(const Grid& g);
    static GridField sample(const Grid& g, const std::function<double(const Point&)>& f);

    double& at(int n, int i, int j = 0) { return values[n * grid.level_size() + grid.index(i, j)]; }
    double at(int n, int i, int j = 0) const { return values[n * grid.level_size() + grid.index(i, j)]; }
    double* level(int n) { return values.data() + n * grid.level_size(); }
    const double* level(int n) const { return values.data() + n * grid.level_size(); }

    double max_abs() const;
    /// Space-time L2 norm over interior nodes (collar excluded).
    double interior_l2() const;
    double interior_max() const;

    GridField& operator+=(const GridField& o);
    GridField& operator-=(const GridField& o);
    GridField& operator*=(double c);
};

GridField operator+(GridField a, const GridField& b);
GridField operator-(GridField a, const GridField& b);
GridField operator*(double c, GridField a);
/// Pointwise product.
GridField hadamard(const GridField& a, const GridField& b);

/// Smooth compactly supported bump exp(1 - 1/(1 - s)), s = sum ((x_k - c_k)/w_k)^2,
/// with all derivatives up to order two in closed form.
struct Bump {
    Vec center;
    Vec width;
    double amplitude = 1.0;

    double operator()(const Point& x) const;
    Vec gradient(const Point& x) const;
    Mat hessian(const Point& x) const;
    /// Box containing the support.
    Box support() const;
};

/// f = box_g of a bump, in closed form, for Minkowski or a static conformally
/// flat metric e^{2 gamma} eta.
std::function<double(const Point&)> manufactured_source(const MetricSpec& m, const Bump& u);

/// Progressing pulse v = phi(t - sigma x) S(t) in d = 1 with a smooth switch
/// S rising from 0 at t_on to 1 at t_on + ramp; source f = box v.
struct ProgressingPulse {
    Bump phi;  // profile in the single variable t - sigma x
    double sigma = 1.0;
    double t_on = 0.1;
    double ramp = 0.5;
    double amplitude = 1.0;

    double switch_value(double t, int derivative) const;
    double value(const Point& x) const;
    double source(const Point& x) const;
};

/// Time-level callback; receives the level index and its node values.
using LevelObserver = std::function<void(int n, const double* level)>;

/// Q_g f: leapfrog for box_g u = f with zero past data.
GridField solve_linear(const MetricSpec& m, const GridField& f);

/// Same scheme with the source evaluated on the fly; nothing is stored.
void solve_linear_streaming(const MetricSpec& m, const Grid& grid, const std::function<double(const Point&)>& f,
                            const LevelObserver& observe);

enum class NonlinearMode { Explicit, Picard };

struct NonlinearOptions {
    NonlinearMode mode = NonlinearMode::Explicit;
    /// Max |u| before DivergenceDetected.
    double divergence_guard = 1e6;
    double picard_tol = 1e-10;
    int picard_max_iter = 200;
};

/// box_g u + w(x, u, grad u) = f with w = N0(du, du) + u N1(du, du) + u^2 M(du, du).
GridField solve_nonlinear(const MetricSpec& m, const NonlinearTerm& nl, const GridField& f,
                          const NonlinearOptions& opt = {});

/// Raised gradient (grad_g u)^i = g^{ij} d_j u, second-order central differences;
/// zero on the boundary.
std::vector<GridField> gradient_field(const MetricSpec& m, const GridField& u);

/// Discrete box_g u at levels 1..nt-1 (zero on the first and last level and on the boundary).
GridField apply_box(const MetricSpec& m, const GridField& u);

/// Symmetrized F(grad a, grad b) at every node.
GridField form_field(const MetricSpec& m, const QuadraticForm& F, const GridField& a, const GridField& b);

/// w(x, u, grad u) evaluated on a stored field with central differences.
GridField nonlinearity_field(const MetricSpec& m, const NonlinearTerm& nl, const GridField& u);

/// Support of a field: |value| > threshold.
std::vector<char> support_mask(const GridField& f, double threshold = 0.0);

/// Discrete causal future: dilation by one cell (infinity norm) per time step.
std::vector<char> discrete_causal_future(const Grid& grid, const std::vector<char>& source_mask);

/// max |u| outside the mask divided by max |f|.
double leakage_outside(const GridField& u, const std::vector<char>& mask, double f_scale);

struct ConvergenceRow {
    std::vector<int> cells;
    double error = 0.0;
    /// log2(previous error / error); zero for the first row.
    double order = 0.0;
};

/// Manufactured bump solution on nested grids; errors are space-time L2 on the interior.
std::vector<ConvergenceRow> convergence_study(const MetricSpec& m, const Bump& exact, double T,
                                              const std::vector<double>& lower, const std::vector<double>& upper,
                                              const std::vector<std::vector<int>>& resolutions, double cfl = 0.5);

}  // namespace qdnw
