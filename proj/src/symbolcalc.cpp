#include "qdnw/symbolcalc.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace qdnw {

CVec gradient_symbol(const MetricSpec& m, const Point& x, const Covector& xi) {
    const Vec up = raise(m, x, xi).c;
    return CVec(std::complex<double>(0.0, 1.0) * up.cast<std::complex<double>>());
}

Covector CovectorQuadruple::sum() const {
    return Covector{Vec(zeta[0].c + zeta[1].c + zeta[2].c + zeta[3].c)};
}

double CovectorQuadruple::norm2() const {
    double s = 0.0;
    for (const auto& z : zeta) s += z.c.squaredNorm();
    return s;
}

namespace {

/// Index sets {i, j} and {j, k, l} over which the coefficient formulas divide.
void check_denominators(const Mat& G, const CovectorQuadruple& quad, double tol_denom) {
    const double floor = tol_denom * quad.norm2();
    auto q = [&](const Vec& v) { return std::abs(v.dot(G * v)); };
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            if (q(quad.zeta[i].c + quad.zeta[j].c) < floor) {
                std::ostringstream msg;
                msg << "|zeta_" << i + 1 << " + zeta_" << j + 1 << "|^2 below " << floor;
                throw Error(ErrorKind::DegenerateDenominator, msg.str());
            }
        }
        const Vec triple = quad.sum().c - quad.zeta[i].c;
        if (q(triple) < floor) {
            std::ostringstream msg;
            msg << "triple sum without zeta_" << i + 1 << " has |.|^2 below " << floor;
            throw Error(ErrorKind::DegenerateDenominator, msg.str());
        }
    }
}

void validate_quadruple(const MetricSpec& m, CovectorQuadruple& quad, const QuadrupleConfig& cfg) {
    if (m.space_dim() != 3) throw Error(ErrorKind::InvalidArgument, "quadruples need space dimension 3");
    const Mat G = dual_metric(m, quad.q0);
    Eigen::Matrix4d Z;
    double prod = 1.0;
    for (int i = 0; i < 4; ++i) {
        const Vec& z = quad.zeta[i].c;
        if (z.size() != 4) throw Error(ErrorKind::InvalidArgument, "covector has the wrong dimension");
        if (std::abs(z.dot(G * z)) > cfg.tol_null * z.squaredNorm()) {
            throw Error(ErrorKind::InvalidArgument, "covector " + std::to_string(i + 1) + " is not null");
        }
        Z.col(i) = Eigen::Vector4d(z[0], z[1], z[2], z[3]);
        prod *= z.norm();
        quad.orientation[i] = (G * z)[0] > 0.0 ? 1 : -1;
    }
    if (std::abs(Z.determinant()) <= cfg.tol_indep * prod) {
        throw Error(ErrorKind::InvalidArgument, "covectors are not linearly independent");
    }
    check_denominators(G, quad, cfg.tol_denom);
}

}  // namespace

CovectorQuadruple make_quadruple(const MetricSpec& m, const Point& q0, const std::array<Vec, 4>& zeta,
                                 const QuadrupleConfig& cfg) {
    CovectorQuadruple quad;
    quad.q0 = q0;
    for (int i = 0; i < 4; ++i) quad.zeta[i] = Covector{zeta[i]};
    validate_quadruple(m, quad, cfg);
    return quad;
}

CovectorQuadruple sample_quadruple(const MetricSpec& m, const Point& q0, std::uint64_t seed, bool require_null_sum,
                                   const QuadrupleConfig& cfg) {
    if (m.space_dim() != 3) throw Error(ErrorKind::InvalidArgument, "quadruples need space dimension 3");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> scale(0.5, 2.0);
    std::uniform_int_distribution<std::uint64_t> sub;
    const Mat G = dual_metric(m, q0);
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        const auto vecs = sample_null_cone(m, q0, 4, sub(rng));
        CovectorQuadruple quad;
        quad.q0 = q0;
        for (int i = 0; i < 4; ++i) quad.zeta[i] = Covector{Vec(scale(rng) * lower(m, q0, vecs[i]).c)};
        if (require_null_sum) {
            const Vec s3 = quad.zeta[0].c + quad.zeta[1].c + quad.zeta[2].c;
            const Vec& z4 = quad.zeta[3].c;
            // g*(s3 + s z4, s3 + s z4) = g*(s3, s3) + 2 s g*(s3, z4) since z4 is null
            const double cross = s3.dot(G * z4);
            if (std::abs(cross) < 1e-12 * s3.squaredNorm()) continue;
            const double s = -s3.dot(G * s3) / (2.0 * cross);
            if (!std::isfinite(s) || std::abs(s) < 1e-3 || std::abs(s) > 1e3) continue;
            quad.zeta[3] = Covector{Vec(s * z4)};
        }
        try {
            validate_quadruple(m, quad, cfg);
        } catch (const Error&) {
            continue;
        }
        return quad;
    }
    throw Error(ErrorKind::SamplingExhausted,
                "no admissible quadruple after " + std::to_string(cfg.max_attempts) + " attempts");
}

double interaction_P(const MetricSpec& m, const QuadraticForm& M, const CovectorQuadruple& quad) {
    const Point& x = quad.q0;
    const Mat W = M.at(x);
    auto mm = [&](const Covector& z) {
        const Vec up = raise(m, x, z).c;
        return up.dot(W * up);
    };
    double s = mm(quad.sum());
    for (const auto& z : quad.zeta) s -= mm(z);
    return 2.0 * s;
}

namespace {

constexpr std::array<std::array<int, 4>, 24> kPermutations = [] {
    std::array<std::array<int, 4>, 24> out{};
    std::array<int, 4> p{0, 1, 2, 3};
    for (int n = 0; n < 24; ++n) {
        out[n] = p;
        // next lexicographic permutation
        int i = 2;
        while (i >= 0 && p[i] > p[i + 1]) --i;
        if (i < 0) break;
        int j = 3;
        while (p[j] < p[i]) --j;
        std::swap(p[i], p[j]);
        for (int a = i + 1, b = 3; a < b; ++a, --b) std::swap(p[a], p[b]);
    }
    return out;
}();

}  // namespace

double coefficient_A(const MetricSpec& m, const CovectorQuadruple& quad, double tol_denom) {
    const Mat G = dual_metric(m, quad.q0);
    check_denominators(G, quad, tol_denom);
    auto g = [&](const Vec& a, const Vec& b) { return a.dot(G * b); };
    double total = 0.0;
    for (const auto& p : kPermutations) {
        const Vec& zi = quad.zeta[p[0]].c;
        const Vec& zj = quad.zeta[p[1]].c;
        const Vec& zk = quad.zeta[p[2]].c;
        const Vec& zl = quad.zeta[p[3]].c;
        const Vec jkl = zj + zk + zl, kl = zk + zl, ij = zi + zj;
        total += 2.0 * g(zi, jkl) / g(jkl, jkl) * g(zk, zl);
        total += g(zi, zj) / g(ij, ij) * g(zk, zl);
        total += 2.0 * g(zk, zl) / g(kl, kl) * g(zj, kl);
    }
    return total;
}

double coefficient_B(const MetricSpec& m, const CovectorQuadruple& quad, double tol_denom) {
    const Mat G = dual_metric(m, quad.q0);
    check_denominators(G, quad, tol_denom);
    auto g = [&](const Vec& a, const Vec& b) { return a.dot(G * b); };
    double total = 0.0;
    for (const auto& p : kPermutations) {
        const Vec& zi = quad.zeta[p[0]].c;
        const Vec& zj = quad.zeta[p[1]].c;
        const Vec& zk = quad.zeta[p[2]].c;
        const Vec& zl = quad.zeta[p[3]].c;
        const Vec jkl = zj + zk + zl, kl = zk + zl, ij = zi + zj;
        total += 4.0 * g(zi, jkl) / g(jkl, jkl) * g(zj, kl) / g(kl, kl) * g(zk, zl);
        total += g(kl, ij) / (g(kl, kl) * g(ij, ij)) * g(zi, zj) * g(zk, zl);
    }
    return total;
}

RankCertificate rank_certificate(const MetricSpec& m, const QuadraticForm& M, const CovectorQuadruple& quad,
                                 double tol_rank) {
    const Mat G = dual_metric(m, quad.q0);
    const Mat W = M.at(quad.q0);
    const Mat GMG = G * (0.5 * (W + W.transpose())) * G;
    const Vec zeta = quad.sum().c;
    RankCertificate cert;
    cert.ambient = Eigen::MatrixXd::Zero(2, 16);
    cert.jacobian = Eigen::MatrixXd::Zero(2, 12);
    for (int a = 0; a < 4; ++a) {
        const Vec dF = 2.0 * G * zeta;
        const Vec dP = 4.0 * GMG * (zeta - quad.zeta[a].c);
        cert.ambient.block(0, 4 * a, 1, 4) = dF.transpose();
        cert.ambient.block(1, 4 * a, 1, 4) = dP.transpose();
        // tangent space of {g*(z, z) = 0} at zeta_a is the kernel of (G zeta_a)^T
        const Eigen::Vector4d normal = (G * quad.zeta[a].c).cast<double>();
        Eigen::JacobiSVD<Eigen::Matrix<double, 1, 4>> svd(normal.transpose(), Eigen::ComputeFullV);
        const Eigen::Matrix<double, 4, 3> basis = svd.matrixV().rightCols<3>();
        const Eigen::Vector4d f(dF[0], dF[1], dF[2], dF[3]);
        const Eigen::Vector4d p(dP[0], dP[1], dP[2], dP[3]);
        cert.jacobian.block(0, 3 * a, 1, 3) = (basis.transpose() * f).transpose();
        cert.jacobian.block(1, 3 * a, 1, 3) = (basis.transpose() * p).transpose();
    }
    Eigen::MatrixXd rows = cert.jacobian;
    for (int r = 0; r < 2; ++r) {
        const double n = rows.row(r).norm();
        if (n > 0.0) rows.row(r) /= n;
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows);
    cert.singular_values = svd.singularValues();
    const double smax = cert.singular_values.size() ? cert.singular_values[0] : 0.0;
    cert.rank = 0;
    for (int i = 0; i < cert.singular_values.size(); ++i) {
        if (cert.singular_values[i] > tol_rank * smax) ++cert.rank;
    }
    return cert;
}

WitnessResult nonvanishing_witness(const MetricSpec& m, const QuadraticForm& M, const Point& q0, int n_attempts,
                                   double threshold, std::uint64_t seed, const QuadrupleConfig& cfg) {
    if (is_null_form(M, m, q0)) {
        return MNullCertificate{"M is a null form at q0, so P = 2 g*(zeta, zeta) - 0 vanishes on null-sum quadruples"};
    }
    double best = 0.0;
    std::mt19937_64 rng(seed);
    for (int k = 0; k < n_attempts; ++k) {
        const CovectorQuadruple quad = sample_quadruple(m, q0, rng(), true, cfg);
        const double value = std::abs(interaction_P(m, M, quad)) / quad.norm2();
        if (value > threshold) return quad;
        best = std::max(best, value);
    }
    std::ostringstream msg;
    msg << "no quadruple with |P|/|quad|^2 > " << threshold << " in " << n_attempts << " draws; max seen " << best;
    throw Error(ErrorKind::SearchFailed, msg.str());
}

int ConformalReport::net_exponent() const {
    int s = exponent_P + exponent_outgoing;
    for (int e : exponent_incoming) s += e;
    return s;
}

ConformalReport conformal_relation(const MetricSpec& m_base, const ScalarField& gamma, const QuadraticForm& M,
                                   const CovectorQuadruple& quad, double tol) {
    const MetricSpec scaled = MetricSpec::conformal(m_base, gamma);
    ConformalReport rep;
    rep.gamma_q0 = gamma(quad.q0);
    rep.P_base = interaction_P(m_base, M, quad);
    rep.P_scaled = interaction_P(scaled, M, quad);
    rep.expected_ratio = std::exp(-4.0 * rep.gamma_q0);
    rep.ratio = rep.P_base != 0.0 ? rep.P_scaled / rep.P_base : 0.0;
    if (rep.P_base != 0.0) {
        rep.ratio_ok = std::abs(rep.ratio - rep.expected_ratio) <= tol * std::max(1.0, rep.expected_ratio);
    } else {
        rep.ratio_ok = std::abs(rep.P_scaled) <= tol;
    }
    return rep;
}

}  // namespace qdnw
