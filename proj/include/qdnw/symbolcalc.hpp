#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "qdnw/geometry.hpp"
#include "qdnw/nullform.hpp"

namespace qdnw {

/// i * xi^#, the symbol of the gradient with the sigma(u) factor left out.
CVec gradient_symbol(const MetricSpec& m, const Point& x, const Covector& xi);

/// Four null covectors at q0.
struct CovectorQuadruple {
    Point q0;
    std::array<Covector, 4> zeta;
    /// Sign of the time component of each raised covector (+1 future).
    std::array<int, 4> orientation{1, 1, 1, 1};

    Covector sum() const;
    /// sum_i |zeta_i|^2, Euclidean in coordinates.
    double norm2() const;
};

struct QuadrupleConfig {
    int max_attempts = 2000;
    /// |det Z| must exceed tol_indep * prod |zeta_i|.
    double tol_indep = 1e-3;
    /// Pair and triple sums need |.|^2_{g*} >= tol_denom * norm2().
    double tol_denom = 1e-8;
    /// Null check |g*(zeta_i, zeta_i)| <= tol_null |zeta_i|^2.
    double tol_null = 1e-10;
};

/// Validates user-provided covectors (null, independent, nondegenerate sums).
CovectorQuadruple make_quadruple(const MetricSpec& m, const Point& q0, const std::array<Vec, 4>& zeta,
                                 const QuadrupleConfig& cfg = {});

/// Rejection sampler. With require_null_sum the fourth covector is rescaled so
/// that the sum is null (the scale may be negative, flipping its orientation).
CovectorQuadruple sample_quadruple(const MetricSpec& m, const Point& q0, std::uint64_t seed,
                                   bool require_null_sum, const QuadrupleConfig& cfg = {});

/// 2 (M(zeta^#, zeta^#) - sum_i M(zeta_i^#, zeta_i^#)).
double interaction_P(const MetricSpec& m, const QuadraticForm& M, const CovectorQuadruple& quad);

/// Literal 24-term permutation sums; every pairing goes through g*.
/// Throw DegenerateDenominator naming the index set whose |.|^2 is below tol_denom * norm2().
double coefficient_A(const MetricSpec& m, const CovectorQuadruple& quad, double tol_denom = 1e-8);
double coefficient_B(const MetricSpec& m, const CovectorQuadruple& quad, double tol_denom = 1e-8);

/// coefficient_A = kKappaA g*(zeta, zeta) and coefficient_B = kKappaB g*(zeta, zeta) for null
/// quadruples. Measured with exact rational arithmetic over stereographic rational
/// null covectors (see tests/test_symbolcalc.cpp).
inline constexpr double kKappaA = 7.0;
inline constexpr double kKappaB = 6.0;

struct RankCertificate {
    int rank = 0;
    /// Rows DF and DP restricted to the tangent space of the null cone, 2 x 12.
    Eigen::MatrixXd jacobian;
    /// Ambient rows (2 x 16) before restriction.
    Eigen::MatrixXd ambient;
    Eigen::VectorXd singular_values;
};

/// Rank of D(F, P) on the product of null cones, threshold tol_rank * sigma_max
/// after row normalization.
RankCertificate rank_certificate(const MetricSpec& m, const QuadraticForm& M, const CovectorQuadruple& quad,
                                 double tol_rank = 1e-8);

struct MNullCertificate {
    std::string reason;
};

using WitnessResult = std::variant<CovectorQuadruple, MNullCertificate>;

/// Searches null-sum quadruples for |P| > threshold * norm2(). Returns
/// MNullCertificate when M is a null form at q0; throws SearchFailed otherwise.
WitnessResult nonvanishing_witness(const MetricSpec& m, const QuadraticForm& M, const Point& q0, int n_attempts,
                                   double threshold, std::uint64_t seed = 0, const QuadrupleConfig& cfg = {});

struct ConformalReport {
    double gamma_q0 = 0.0;
    double P_base = 0.0;
    double P_scaled = 0.0;
    double ratio = 0.0;
    double expected_ratio = 0.0;
    bool ratio_ok = false;
    /// Exponents of e^{gamma(q0)}: P, outgoing Q, incoming legs.
    int exponent_P = -4;
    int exponent_outgoing = 3;
    std::array<int, 4> exponent_incoming{-1, -1, -1, -1};
    int net_exponent() const;
};

/// P under m_base and under e^{2 gamma} m_base for the same quadruple.
ConformalReport conformal_relation(const MetricSpec& m_base, const ScalarField& gamma, const QuadraticForm& M,
                                   const CovectorQuadruple& quad, double tol = 1e-10);

}  // namespace qdnw
