#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <variant>

#include "qdnw/errors.hpp"
#include "qdnw/symbolcalc.hpp"

using namespace qdnw;
using boost::multiprecision::cpp_rational;

namespace {

using RVec = std::array<cpp_rational, 4>;

Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<int>(xs.size()));
    int k = 0;
    for (double x : xs) out[k++] = x;
    return out;
}

/// Minkowski dual metric in exact arithmetic.
cpp_rational eta(const RVec& a, const RVec& b) {
    return -a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3];
}

RVec add(const RVec& a, const RVec& b) {
    return {a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]};
}

/// Null covector from the inverse stereographic map of (a, b), scaled by s.
RVec rational_null(int a, int b, int s) {
    const cpp_rational d = a * a + b * b + 1;
    return {cpp_rational(s), cpp_rational(2 * a * s) / d, cpp_rational(2 * b * s) / d,
            cpp_rational((a * a + b * b - 1) * s) / d};
}

/// The two coefficient sums over all 24 orderings, written out independently of the library.
std::pair<cpp_rational, cpp_rational> exact_coefficients(const std::array<RVec, 4>& z) {
    cpp_rational A = 0, B = 0;
    std::array<int, 4> p{0, 1, 2, 3};
    do {
        const RVec &zi = z[p[0]], &zj = z[p[1]], &zk = z[p[2]], &zl = z[p[3]];
        const RVec kl = add(zk, zl), jkl = add(zj, kl), ij = add(zi, zj);
        A += 2 * eta(zi, jkl) / eta(jkl, jkl) * eta(zk, zl) + eta(zi, zj) / eta(ij, ij) * eta(zk, zl) +
             2 * eta(zk, zl) / eta(kl, kl) * eta(zj, kl);
        B += 4 * eta(zi, jkl) / eta(jkl, jkl) * eta(zj, kl) / eta(kl, kl) * eta(zk, zl) +
             eta(kl, ij) / (eta(kl, kl) * eta(ij, ij)) * eta(zi, zj) * eta(zk, zl);
    } while (std::next_permutation(p.begin(), p.end()));
    return {A, B};
}

Vec to_double(const RVec& r) {
    Vec out(4);
    for (int k = 0; k < 4; ++k) out[k] = static_cast<double>(r[k]);
    return out;
}

struct RationalCase {
    int a[4], b[4], s[4];
};

const RationalCase kCases[] = {
    {{1, -2, 3, 0}, {0, 1, -1, 2}, {1, 2, -1, 3}},
    {{2, 0, -3, 1}, {1, -2, 0, 3}, {1, 1, 2, -1}},
    {{-1, 4, 2, -3}, {3, 0, -2, 1}, {2, -1, 1, 1}},
    {{0, 1, -4, 2}, {-3, 2, 1, 5}, {3, 1, -2, 1}},
};

MetricSpec curved() {
    return MetricSpec::conformal_minkowski(3, ScalarField::affine(0.2, v({0.1, -0.3, 0.2, 0.4})));
}

}  // namespace

TEST(KappaOracle, ExactRationalRatios) {
    for (const auto& c : kCases) {
        std::array<RVec, 4> z;
        for (int i = 0; i < 4; ++i) z[i] = rational_null(c.a[i], c.b[i], c.s[i]);
        RVec sum = z[0];
        for (int i = 1; i < 4; ++i) sum = add(sum, z[i]);
        const cpp_rational gz = eta(sum, sum);
        ASSERT_NE(gz, 0);
        const auto [A, B] = exact_coefficients(z);
        EXPECT_EQ(A / gz, cpp_rational(static_cast<long>(kKappaA)));
        EXPECT_EQ(B / gz, cpp_rational(static_cast<long>(kKappaB)));
    }
}

TEST(KappaOracle, LibraryMatchesExactSums) {
    const auto m = MetricSpec::minkowski(3);
    for (const auto& c : kCases) {
        std::array<RVec, 4> z;
        std::array<Vec, 4> zd;
        for (int i = 0; i < 4; ++i) {
            z[i] = rational_null(c.a[i], c.b[i], c.s[i]);
            zd[i] = to_double(z[i]);
        }
        const auto quad = make_quadruple(m, Vec::Zero(4), zd);
        const auto [A, B] = exact_coefficients(z);
        const double a = static_cast<double>(A), b = static_cast<double>(B);
        EXPECT_NEAR(coefficient_A(m, quad), a, 1e-11 * std::max(1.0, std::abs(a)));
        EXPECT_NEAR(coefficient_B(m, quad), b, 1e-11 * std::max(1.0, std::abs(b)));
    }
}

TEST(Quadruple, RejectsNonNull) {
    const auto m = MetricSpec::minkowski(3);
    std::array<Vec, 4> z{v({1, 1, 0, 0}), v({1, 0, 1, 0}), v({1, 0, 0, 1}), v({1, 0.5, 0, 0})};
    EXPECT_THROW(make_quadruple(m, Vec::Zero(4), z), Error);
}

TEST(Quadruple, RejectsDependent) {
    const auto m = MetricSpec::minkowski(3);
    std::array<Vec, 4> z{v({1, 1, 0, 0}), v({2, 2, 0, 0}), v({1, 0, 0, 1}), v({1, 0, 1, 0})};
    EXPECT_THROW(make_quadruple(m, Vec::Zero(4), z), Error);
}

TEST(Quadruple, RequiresFourDimensions) {
    try {
        (void)sample_quadruple(MetricSpec::minkowski(2), Vec::Zero(3), 0, true);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(Quadruple, OrientationRecorded) {
    const auto m = MetricSpec::minkowski(3);
    std::array<Vec, 4> z{v({1, 1, 0, 0}), v({-1, 0, 1, 0}), v({1, 0, 0, 1}), v({2, 0, 0, -2})};
    const auto q = make_quadruple(m, Vec::Zero(4), z);
    // raised time component of (1, ...) is -1 under the Minkowski dual
    EXPECT_EQ(q.orientation[0], -1);
    EXPECT_EQ(q.orientation[1], 1);
}

TEST(Quadruple, SampledNullSum) {
    const auto m = curved();
    const Point q0 = v({0.1, 0.2, -0.1, 0.3});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto q = sample_quadruple(m, q0, seed, true);
        const Mat G = dual_metric(m, q0);
        for (const auto& z : q.zeta) EXPECT_LT(std::abs(z.c.dot(G * z.c)), 1e-10 * z.c.squaredNorm());
        const Vec s = q.sum().c;
        EXPECT_LT(std::abs(s.dot(G * s)), 1e-9 * q.norm2());
    }
}

TEST(Interaction, MetricFormVanishesOnNullSum) {
    const auto m = curved();
    const Point q0 = v({0.0, 0.3, 0.1, -0.2});
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const auto q = sample_quadruple(m, q0, seed, true);
        EXPECT_LT(std::abs(interaction_P(m, QuadraticForm::metric(m), q)) / q.norm2(), 1e-10);
    }
}

TEST(Interaction, ClosedFormForG0) {
    // P = 2[M(sum, sum) - sum M(z, z)] with raised covectors; for Minkowski and G0 it is 2[(sum_0)^2 - sum z_0^2]
    const auto m = MetricSpec::minkowski(3);
    std::array<Vec, 4> z{v({1, 1, 0, 0}), v({-1, 0, 1, 0}), v({1, 0, 0, 1}), v({2, 0, 0, -2})};
    const auto q = make_quadruple(m, Vec::Zero(4), z);
    EXPECT_DOUBLE_EQ(interaction_P(m, QuadraticForm::G(4, 0), q), 2.0 * (9.0 - (1 + 1 + 1 + 4)));
}

TEST(Interaction, Homogeneity) {
    const auto m = curved();
    const auto q = sample_quadruple(m, Vec::Zero(4), 3, false);
    CovectorQuadruple s = q;
    const double lambda = 1.7;
    for (auto& z : s.zeta) z.c *= lambda;
    const auto M = QuadraticForm::G(4, 0) + QuadraticForm::F(4, 1, 2);
    EXPECT_NEAR(interaction_P(m, M, s), lambda * lambda * interaction_P(m, M, q), 1e-12 * q.norm2() * 10);
    EXPECT_NEAR(coefficient_A(m, s), lambda * lambda * coefficient_A(m, q), 1e-9 * q.norm2() * 10);
    EXPECT_NEAR(coefficient_B(m, s), lambda * lambda * coefficient_B(m, q), 1e-9 * q.norm2() * 10);
}

TEST(Coefficients, DegenerateDenominator) {
    const auto m = MetricSpec::minkowski(3);
    // parallel legs make |zeta_1 + zeta_4|^2 vanish
    std::array<Vec, 4> bad{v({1, 1, 0, 0}), v({1, 0, 1, 0}), v({1, 0, 0, 1}), v({1, 1, 0, 0})};
    CovectorQuadruple q;
    q.q0 = Vec::Zero(4);
    for (int i = 0; i < 4; ++i) q.zeta[i] = Covector{bad[i]};
    try {
        (void)coefficient_A(m, q);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateDenominator);
    }
}

TEST(Rank, MetricMultipleIsRankOne) {
    const auto m = curved();
    const Point q0 = v({0.2, 0.0, 0.1, -0.1});
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto q = sample_quadruple(m, q0, seed, true);
        EXPECT_EQ(rank_certificate(m, 0.75 * QuadraticForm::metric(m), q).rank, 1);
        EXPECT_EQ(rank_certificate(m, QuadraticForm::G(4, 0), q).rank, 2);
    }
}

TEST(Rank, CertificateShapes) {
    const auto m = MetricSpec::minkowski(3);
    const auto q = sample_quadruple(m, Vec::Zero(4), 1, true);
    const auto cert = rank_certificate(m, QuadraticForm::G(4, 1), q);
    EXPECT_EQ(cert.jacobian.rows(), 2);
    EXPECT_EQ(cert.jacobian.cols(), 12);
    EXPECT_EQ(cert.ambient.cols(), 16);
    EXPECT_EQ(cert.singular_values.size(), 2);
}

TEST(Witness, NonNullMFound) {
    const auto m = MetricSpec::minkowski(3);
    const auto res = nonvanishing_witness(m, QuadraticForm::G(4, 0), Vec::Zero(4), 100, 1e-4, 9);
    ASSERT_TRUE(std::holds_alternative<CovectorQuadruple>(res));
    const auto& q = std::get<CovectorQuadruple>(res);
    EXPECT_GT(std::abs(interaction_P(m, QuadraticForm::G(4, 0), q)) / q.norm2(), 1e-4);
}

TEST(Witness, NullMCertified) {
    const auto m = curved();
    const auto res = nonvanishing_witness(m, 2.0 * QuadraticForm::metric(m) + QuadraticForm::E(4, 0, 1), Vec::Zero(4), 100,
                                          1e-4, 9);
    EXPECT_TRUE(std::holds_alternative<MNullCertificate>(res));
}

TEST(Witness, Deterministic) {
    const auto m = MetricSpec::minkowski(3);
    const auto a = std::get<CovectorQuadruple>(nonvanishing_witness(m, QuadraticForm::G(4, 2), Vec::Zero(4), 100, 1e-4, 4));
    const auto b = std::get<CovectorQuadruple>(nonvanishing_witness(m, QuadraticForm::G(4, 2), Vec::Zero(4), 100, 1e-4, 4));
    for (int i = 0; i < 4; ++i) EXPECT_EQ(a.zeta[i].c, b.zeta[i].c);
}

TEST(Conformal, LogTwoGivesOneSixteenth) {
    const auto m = MetricSpec::minkowski(3);
    const auto q = sample_quadruple(m, Vec::Zero(4), 2, true);
    const auto rep = conformal_relation(m, ScalarField::constant(std::log(2.0)), QuadraticForm::G(4, 0), q);
    EXPECT_NEAR(rep.expected_ratio, 1.0 / 16.0, 1e-15);
    EXPECT_NEAR(rep.ratio, 1.0 / 16.0, 1e-12);
    EXPECT_TRUE(rep.ratio_ok);
    EXPECT_EQ(rep.net_exponent(), -5);
}

TEST(Conformal, IdentityFactor) {
    const auto m = curved();
    const auto q = sample_quadruple(m, Vec::Zero(4), 5, true);
    const auto rep = conformal_relation(m, ScalarField::constant(0.0), QuadraticForm::G(4, 3), q);
    EXPECT_DOUBLE_EQ(rep.ratio, 1.0);
    EXPECT_TRUE(rep.ratio_ok);
}

TEST(Symbol, GradientIsImaginaryRaisedCovector) {
    const auto m = MetricSpec::minkowski(3);
    const CVec s = gradient_symbol(m, Vec::Zero(4), Covector{v({1, 2, 0, 0})});
    EXPECT_EQ(s[0], std::complex<double>(0.0, -1.0));
    EXPECT_EQ(s[1], std::complex<double>(0.0, 2.0));
}
