#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "qdnw/errors.hpp"
#include "qdnw/nullform.hpp"
#include "qdnw/obsets.hpp"
#include "qdnw/symbolcalc.hpp"
#include "qdnw/wavesolver.hpp"

using namespace qdnw;

namespace {

constexpr int kTrials = 40;

Vec uniform_vec(std::mt19937_64& rng, int n, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

/// Constant product metric with -beta dt^2 and a random SPD spatial block.
MetricSpec random_metric(std::mt19937_64& rng, int d) {
    std::uniform_real_distribution<double> u(0.5, 2.0);
    Mat a(d, d);
    for (int i = 0; i < d; ++i) a.row(i) = uniform_vec(rng, d, -0.4, 0.4).transpose();
    const Mat k = Mat::Identity(d, d) + a * a.transpose();
    std::vector<ScalarField> kappa;
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) kappa.push_back(ScalarField::constant(k(i, j)));
    }
    return MetricSpec::product(d, ScalarField::constant(u(rng)), kappa);
}

}  // namespace

TEST(Property, RaiseLowerAreInverse) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < kTrials; ++t) {
        const int d = 1 + t % 3;
        const auto m = random_metric(rng, d);
        const Point x = uniform_vec(rng, d + 1, -1, 1);
        const Covector xi{uniform_vec(rng, d + 1, -2, 2)};
        const Vector v{uniform_vec(rng, d + 1, -2, 2)};
        EXPECT_LT((lower(m, x, raise(m, x, xi)).c - xi.c).norm(), 1e-12 * (1 + xi.c.norm()));
        EXPECT_LT((raise(m, x, lower(m, x, v)).c - v.c).norm(), 1e-12 * (1 + v.c.norm()));
        EXPECT_NEAR(inner(m, x, xi, xi), inner(m, x, raise(m, x, xi), raise(m, x, xi)), 1e-11);
    }
}

TEST(Property, DecompositionRoundTrip) {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int t = 0; t < kTrials; ++t) {
        const int d = 1 + t % 3, n = d + 1;
        const auto m = MetricSpec::conformal_minkowski(d, ScalarField::affine(u(rng) * 0.1, uniform_vec(rng, n, -0.3, 0.3)));
        const Point x = uniform_vec(rng, n, -1, 1);
        const double c0 = u(rng);
        QuadraticForm w = c0 * QuadraticForm::metric(m);
        Mat a = Mat::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                a(i, j) = u(rng);
                w = w + a(i, j) * QuadraticForm::E(n, i, j);
            }
        }
        const Decomposition dec = decompose_null_form(w, m, x);
        EXPECT_NEAR(dec.C0, c0, 1e-11);
        EXPECT_LT((dec.a.triangularView<Eigen::StrictlyUpper>().toDenseMatrix() - a).cwiseAbs().maxCoeff(), 1e-11);
        EXPECT_LT((dec.reconstruct(m) - w.at(x)).cwiseAbs().maxCoeff(), 1e-11);
    }
}

TEST(Property, PIsHomogeneousOfDegreeTwo) {
    std::mt19937_64 rng(13);
    const auto m = MetricSpec::minkowski(3);
    const auto M = QuadraticForm::G(4, 0) + 0.3 * QuadraticForm::F(4, 1, 2);
    for (int t = 0; t < kTrials; ++t) {
        const auto quad = sample_quadruple(m, Vec::Zero(4), 1000 + t, false);
        const double s = std::uniform_real_distribution<double>(0.2, 5.0)(rng);
        CovectorQuadruple scaled = quad;
        for (auto& z : scaled.zeta) z.c *= s;
        const double p = interaction_P(m, M, quad);
        EXPECT_NEAR(interaction_P(m, M, scaled), s * s * p, 1e-10 * s * s * (1 + std::abs(p)));
    }
}

TEST(Property, CoefficientsProportionalToSumNorm) {
    std::mt19937_64 rng(14);
    int checked = 0;
    for (int t = 0; t < kTrials; ++t) {
        const auto m = random_metric(rng, 3);
        const Point q0 = uniform_vec(rng, 4, -1, 1);
        CovectorQuadruple quad;
        try {
            quad = sample_quadruple(m, q0, 2000 + t, false);
        } catch (const Error&) {
            continue;
        }
        const Covector z = quad.sum();
        const double gs = inner(m, q0, z, z);
        const double a = coefficient_A(m, quad), b = coefficient_B(m, quad);
        const double scale = quad.norm2();
        EXPECT_NEAR(a, kKappaA * gs, 1e-9 * scale) << t;
        EXPECT_NEAR(b, kKappaB * gs, 1e-9 * scale) << t;
        ++checked;
    }
    EXPECT_GE(checked, kTrials / 2);
}

TEST(Property, ConformalRatioMatchesExponent) {
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> u(-1, 1);
    const auto base = MetricSpec::minkowski(3);
    const auto M = QuadraticForm::G(4, 0);
    for (int t = 0; t < kTrials; ++t) {
        const double gamma = u(rng);
        const auto quad = sample_quadruple(base, Vec::Zero(4), 3000 + t, true);
        const ConformalReport rep = conformal_relation(base, ScalarField::constant(gamma), M, quad);
        EXPECT_TRUE(rep.ratio_ok) << gamma;
        EXPECT_NEAR(rep.ratio, std::exp(-4.0 * gamma), 1e-9 * std::exp(4.0));
    }
}

TEST(Property, SolverIsLinear) {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(-2, 2);
    const auto m = MetricSpec::conformal_minkowski(1, ScalarField::gaussian(0.3, Vec::Zero(2), 0.7, true));
    const Grid g = Grid::make(m, 1.0, {-2.0}, {2.0}, {80}, 0.7);
    for (int t = 0; t < 8; ++t) {
        Bump b1, b2;
        b1.center = uniform_vec(rng, 2, -0.3, 0.3);
        b1.center[0] = 0.4;
        b1.width = Vec::Constant(2, 0.3);
        b2 = b1;
        b2.center[1] = -b1.center[1];
        const GridField f1 = GridField::sample(g, [b1](const Point& p) { return b1(p); });
        const GridField f2 = GridField::sample(g, [b2](const Point& p) { return b2(p); });
        const double a = u(rng), c = u(rng);
        const GridField lhs = solve_linear(m, a * f1 + c * f2);
        const GridField rhs = a * solve_linear(m, f1) + c * solve_linear(m, f2);
        EXPECT_LT((lhs - rhs).max_abs(), 1e-12 * (1 + lhs.max_abs()));
    }
}

TEST(Property, HausdorffIsAMetric) {
    std::mt19937_64 rng(17);
    auto cloud = [&](int n) {
        std::vector<Point> out;
        for (int i = 0; i < n; ++i) out.push_back(uniform_vec(rng, 3, -1, 1));
        return out;
    };
    for (int t = 0; t < kTrials; ++t) {
        const auto a = cloud(5 + t % 7), b = cloud(3 + t % 5), c = cloud(4 + t % 3);
        EXPECT_EQ(hausdorff(a, a), 0.0);
        EXPECT_DOUBLE_EQ(hausdorff(a, b), hausdorff(b, a));
        EXPECT_LE(hausdorff(a, c), hausdorff(a, b) + hausdorff(b, c) + 1e-15);
    }
}
