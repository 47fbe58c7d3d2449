#include <gtest/gtest.h>

#include <cmath>
#include <string>

#include "qdnw/errors.hpp"
#include "qdnw/nullform.hpp"

using namespace qdnw;

namespace {

Vec v(std::initializer_list<double> xs) {
    Vec out(static_cast<int>(xs.size()));
    int k = 0;
    for (double x : xs) out[k++] = x;
    return out;
}

MetricSpec curved() {
    return MetricSpec::conformal_minkowski(3, ScalarField::affine(0.1, v({0.0, 0.3, -0.2, 0.1})));
}

}  // namespace

TEST(Forms, BasisMatrices) {
    const Mat e = QuadraticForm::E(4, 0, 2).at(Vec::Zero(4));
    EXPECT_DOUBLE_EQ(e(0, 2), 1.0);
    EXPECT_DOUBLE_EQ(e(2, 0), -1.0);
    EXPECT_DOUBLE_EQ(e.cwiseAbs().sum(), 2.0);
    const Mat f = QuadraticForm::F(4, 1, 3).at(Vec::Zero(4));
    EXPECT_DOUBLE_EQ(f(1, 3), 1.0);
    EXPECT_DOUBLE_EQ(f(3, 1), 1.0);
    const Mat g = QuadraticForm::G(4, 2).at(Vec::Zero(4));
    EXPECT_DOUBLE_EQ(g(2, 2), 1.0);
    EXPECT_DOUBLE_EQ(g.cwiseAbs().sum(), 1.0);
}

TEST(Forms, BadIndices) {
    EXPECT_THROW(QuadraticForm::E(4, 1, 1), Error);
    EXPECT_THROW(QuadraticForm::F(4, 0, 4), Error);
    EXPECT_THROW(QuadraticForm::G(3, -1), Error);
}

TEST(Forms, EvaluateOnVectors) {
    const auto m = MetricSpec::minkowski(3);
    const auto g = QuadraticForm::metric(m);
    const Point x = Vec::Zero(4);
    EXPECT_DOUBLE_EQ(evaluate(g, m, x, Vector{v({1, 1, 0, 0})}, Vector{v({1, 1, 0, 0})}), 0.0);
    EXPECT_DOUBLE_EQ(evaluate(g, m, x, Vector{v({1, 0, 0, 0})}, Vector{v({1, 0, 0, 0})}), -1.0);
    EXPECT_DOUBLE_EQ(evaluate(QuadraticForm::E(4, 0, 1), m, x, Vector{v({1, 2, 0, 0})}, Vector{v({3, 5, 0, 0})}),
                     1.0 * 5.0 - 2.0 * 3.0);
}

TEST(Forms, EvaluateRejectsCovectors) {
    const auto m = MetricSpec::minkowski(1);
    try {
        (void)evaluate(QuadraticForm::G(2, 0), m, Vec::Zero(2), Covector{v({1, 0})}, Vector{v({1, 0})});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::KindMismatch);
    }
}

TEST(NullCone, SamplesAreNull) {
    const auto m = curved();
    const Point x = v({0.2, 0.1, 0.0, -0.3});
    const auto s = sample_null_cone(m, x, 20, 4);
    ASSERT_EQ(s.size(), 20u);
    for (const auto& n : s) EXPECT_NEAR(inner(m, x, n, n) / n.c.squaredNorm(), 0.0, 1e-14);
}

TEST(NullForm, Classification) {
    const auto m = curved();
    const Point x = v({0.0, 0.2, 0.1, 0.0});
    EXPECT_TRUE(is_null_form(QuadraticForm::metric(m), m, x));
    EXPECT_TRUE(is_null_form(QuadraticForm::E(4, 1, 3), m, x));
    EXPECT_TRUE(is_null_form(QuadraticForm::zero(4), m, x));
    EXPECT_FALSE(is_null_form(QuadraticForm::G(4, 0), m, x));
    EXPECT_FALSE(is_null_form(QuadraticForm::F(4, 1, 2), m, x));
}

TEST(Decompose, RecoversCoefficients) {
    const auto m = curved();
    const Point x = v({0.1, -0.2, 0.3, 0.4});
    const QuadraticForm w = 2.5 * QuadraticForm::metric(m) + (-1.25) * QuadraticForm::E(4, 0, 3) +
                            0.5 * QuadraticForm::E(4, 1, 2);
    const Decomposition dec = decompose_null_form(w, m, x);
    EXPECT_NEAR(dec.C0, 2.5, 1e-13);
    EXPECT_NEAR(dec.a(0, 3), -1.25, 1e-13);
    EXPECT_NEAR(dec.a(1, 2), 0.5, 1e-13);
    EXPECT_NEAR(dec.a(0, 1), 0.0, 1e-15);
    EXPECT_TRUE(dec.reconstruct(m).isApprox(w.at(x), 1e-13));
}

TEST(Decompose, RejectsNonNullWithWitness) {
    const auto m = MetricSpec::minkowski(3);
    try {
        (void)decompose_null_form(QuadraticForm::G(4, 0), m, Vec::Zero(4));
        FAIL();
    } catch (const NotANullFormError& e) {
        EXPECT_EQ(e.kind(), ErrorKind::NotANullForm);
        // pivot (0,0) gives C0 = -1, leaving residual 1 on the spatial diagonal
        EXPECT_EQ(e.row(), 1);
        EXPECT_EQ(e.col(), 1);
        EXPECT_DOUBLE_EQ(e.residual(), 1.0);
    }
}

TEST(Decompose, ForcedPivot) {
    const auto m = MetricSpec::minkowski(2);
    const Decomposition dec = decompose_null_form(3.0 * QuadraticForm::metric(m), m, Vec::Zero(3), kTolDec,
                                                  std::make_pair(2, 2));
    EXPECT_DOUBLE_EQ(dec.C0, 3.0);
    EXPECT_EQ(dec.pivot, std::make_pair(2, 2));
    try {
        (void)decompose_null_form(QuadraticForm::metric(m), m, Vec::Zero(3), kTolDec, std::make_pair(0, 1));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::InvalidArgument);
    }
}

TEST(Decompose, ZeroFormHasZeroCoefficients) {
    const auto m = MetricSpec::minkowski(3);
    const Decomposition dec = decompose_null_form(QuadraticForm::zero(4), m, Vec::Zero(4));
    EXPECT_EQ(dec.C0, 0.0);
    EXPECT_TRUE(dec.a.isZero(0.0));
}

TEST(Parse, GrammarExample) {
    const auto m = MetricSpec::minkowski(3);
    const QuadraticForm w = parse_form("3*g + 2*E01 - 1*E23 + F12 + G0", m);
    const Mat expect = 3.0 * m.metric(Vec::Zero(4)) + 2.0 * QuadraticForm::E(4, 0, 1).at(Vec()) -
                       QuadraticForm::E(4, 2, 3).at(Vec()) + QuadraticForm::F(4, 1, 2).at(Vec()) +
                       QuadraticForm::G(4, 0).at(Vec());
    EXPECT_TRUE(w.at(Vec::Zero(4)).isApprox(expect));
    EXPECT_TRUE(w.is_constant());
    EXPECT_TRUE(parse_form("0", m).at(Vec::Zero(4)).isZero(0.0));
    EXPECT_TRUE(parse_form("-0.5*g", m).at(Vec::Zero(4)).isApprox(-0.5 * m.metric(Vec::Zero(4))));
}

TEST(Parse, MetricFollowsPoint) {
    const auto m = curved();
    const QuadraticForm w = parse_form("g", m);
    const Point x = v({0.0, 1.0, 0.0, 0.0});
    EXPECT_TRUE(w.at(x).isApprox(m.metric(x)));
    EXPECT_FALSE(w.is_constant());
}

TEST(Parse, ErrorsCarryColumn) {
    const auto m = MetricSpec::minkowski(3);
    for (const std::string bad : {"3*q", "E0", "E05", "2*", "g +", "E11"}) {
        try {
            (void)parse_form(bad, m);
            FAIL() << bad;
        } catch (const Error& e) {
            if (bad == "E11") {
                EXPECT_TRUE(e.kind() == ErrorKind::ParseError || e.kind() == ErrorKind::InvalidArgument) << bad;
            } else {
                EXPECT_EQ(e.kind(), ErrorKind::ParseError) << bad;
                EXPECT_NE(std::string(e.what()).find("column"), std::string::npos) << e.what();
            }
        }
    }
    try {
        (void)parse_form("3*q", m);
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("column 3"), std::string::npos) << e.what();
    }
}

TEST(Assumption, NullPartsAndNonNullM) {
    const auto m = curved();
    NonlinearTerm nl{parse_form("2*g + E01", m), parse_form("-g", m), QuadraticForm::G(4, 0), {}, {}};
    const std::vector<Point> pts{Vec::Zero(4), v({0.3, 0.2, -0.1, 0.5})};
    const AssumptionReport rep = classify_nonlinearity(nl, m, pts);
    EXPECT_TRUE(rep.satisfied) << rep.summary;
    ASSERT_TRUE(nl.classified());
    EXPECT_NEAR(nl.C0(pts[1]), 2.0, 1e-12);
    EXPECT_NEAR(nl.C1(pts[1]), -1.0, 1e-12);
    for (const auto& pv : rep.points) EXPECT_FALSE(pv.m_null);
}

TEST(Assumption, NullMViolates) {
    const auto m = MetricSpec::minkowski(3);
    NonlinearTerm nl{QuadraticForm::metric(m), QuadraticForm::zero(4), QuadraticForm::metric(m), {}, {}};
    const AssumptionReport rep = classify_nonlinearity(nl, m, {Vec::Zero(4)});
    EXPECT_FALSE(rep.satisfied);
    EXPECT_NE(rep.summary.find("M is null"), std::string::npos);
}

TEST(Assumption, NonNullN0Violates) {
    const auto m = MetricSpec::minkowski(3);
    NonlinearTerm nl{QuadraticForm::G(4, 1), QuadraticForm::zero(4), QuadraticForm::G(4, 0), {}, {}};
    const AssumptionReport rep = classify_nonlinearity(nl, m, {Vec::Zero(4)});
    EXPECT_FALSE(rep.satisfied);
    EXPECT_FALSE(nl.classified());
    EXPECT_NE(rep.summary.find("N0 is not null"), std::string::npos);
}
