#include "qdnw/expansion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "qdnw/errors.hpp"

namespace qdnw {

std::vector<std::array<int, 4>> permutations4() {
    std::vector<std::array<int, 4>> out;
    std::array<int, 4> p{0, 1, 2, 3};
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

int distinct_quartic_products() {
    std::set<std::array<int, 4>> seen;
    for (const auto& p : permutations4()) {
        seen.insert({std::min(p[0], p[1]), std::max(p[0], p[1]), p[2], p[3]});
    }
    return static_cast<int>(seen.size());
}

namespace {

int pair_index(int a, int b) {
    if (a > b) std::swap(a, b);
    static constexpr int table[4][4] = {{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}};
    return table[a][b];
}

bool all_zero(const GridField& f) {
    return std::all_of(f.values.begin(), f.values.end(), [](double v) { return v == 0.0; });
}

/// Q f with a shortcut for identically zero sources.
GridField causal_inverse(const MetricSpec& m, const GridField& f, int& solves) {
    if (all_zero(f)) return GridField::zeros(f.grid);
    ++solves;
    return solve_linear(m, f);
}

bool form_is_zero(const QuadraticForm& f, int n) {
    if (!f.is_constant()) return false;
    return f.at(Vec::Zero(n)).cwiseAbs().maxCoeff() == 0.0;
}

}  // namespace

GridField order2_reference(const MetricSpec& m, const NonlinearTerm& nl, const GridField& v1, const GridField& v2) {
    int solves = 0;
    return -2.0 * causal_inverse(m, form_field(m, nl.N0, v1, v2), solves);
}

ExpansionTerms expansion_terms(const MetricSpec& m, const NonlinearTerm& nl, const std::array<GridField, 4>& v) {
    const Grid& g = v[0].grid;
    for (const auto& f : v) g.check_compatible(f.grid);
    const int n = m.dim();
    const bool b0_zero = form_is_zero(nl.N0, n);
    const bool b1_zero = form_is_zero(nl.N1, n);
    const bool bm_zero = form_is_zero(nl.M, n);
    const auto perms = permutations4();

    ExpansionTerms out;
    int& solves = out.solves;
    GridField s1 = GridField::zeros(g), s2 = GridField::zeros(g), s3 = GridField::zeros(g);

    // quartic term: -sum v_i v_j M(grad v_k, grad v_l)
    if (!bm_zero) {
        std::vector<GridField> bm(6, GridField::zeros(g));
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b) bm[pair_index(a, b)] = form_field(m, nl.M, v[a], v[b]);
        for (const auto& p : perms) {
            s1 -= hadamard(hadamard(v[p[0]], v[p[1]]), bm[pair_index(p[2], p[3])]);
        }
    }

    // Q[B0(v_k, v_l)] for the six unordered pairs
    std::vector<GridField> qpair(6, GridField::zeros(g));
    if (!b0_zero) {
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b)
                qpair[pair_index(a, b)] = causal_inverse(m, form_field(m, nl.N0, v[a], v[b]), solves);
    }

    if (!b1_zero) {
        std::vector<GridField> b1(6, GridField::zeros(g));
        for (int a = 0; a < 4; ++a)
            for (int b = a + 1; b < 4; ++b) b1[pair_index(a, b)] = form_field(m, nl.N1, v[a], v[b]);
        // 2 Q[B0(v_i, Q[v_j B1(v_k, v_l)])]: inner field depends on (j, {k, l}); i is the remaining index
        if (!b0_zero) {
            for (int j = 0; j < 4; ++j) {
                for (int k = 0; k < 4; ++k) {
                    for (int l = k + 1; l < 4; ++l) {
                        if (k == j || l == j) continue;
                        const int i = 6 - j - k - l;
                        const GridField inner = causal_inverse(m, hadamard(v[j], b1[pair_index(k, l)]), solves);
                        // (k, l) and (l, k) both occur among the permutations
                        s2 += 4.0 * form_field(m, nl.N0, v[i], inner);
                    }
                }
            }
            for (const auto& p : perms) {
                // Q[Q[B0(v_i, v_j)] B1(v_k, v_l)]
                s2 += hadamard(qpair[pair_index(p[0], p[1])], b1[pair_index(p[2], p[3])]);
            }
            // 2 Q[v_i B1(v_j, Q[B0(v_k, v_l)])]
            for (int i = 0; i < 4; ++i) {
                for (int j = 0; j < 4; ++j) {
                    if (j == i) continue;
                    const int k = (i != 0 && j != 0) ? 0 : (i != 1 && j != 1) ? 1 : 2;
                    const int l = 6 - i - j - k;
                    const GridField inner = form_field(m, nl.N1, v[j], qpair[pair_index(k, l)]);
                    s2 += 4.0 * hadamard(v[i], inner);
                }
            }
        }
    }

    if (!b0_zero) {
        // -4 Q[B0(v_i, Q[B0(v_j, Q[B0(v_k, v_l)])])]
        for (int j = 0; j < 4; ++j) {
            for (int k = 0; k < 4; ++k) {
                for (int l = k + 1; l < 4; ++l) {
                    if (k == j || l == j) continue;
                    const int i = 6 - j - k - l;
                    const GridField inner = causal_inverse(m, form_field(m, nl.N0, v[j], qpair[pair_index(k, l)]), solves);
                    s3 -= 8.0 * form_field(m, nl.N0, v[i], inner);
                }
            }
        }
        // -Q[B0(Q[B0(v_i, v_j)], Q[B0(v_k, v_l)])]
        for (const auto& p : perms) {
            s3 -= form_field(m, nl.N0, qpair[pair_index(p[0], p[1])], qpair[pair_index(p[2], p[3])]);
        }
    }

    out.M1 = causal_inverse(m, s1, solves);
    out.M2 = causal_inverse(m, s2, solves);
    out.M3 = causal_inverse(m, s3, solves);
    out.total = out.M1 + out.M2 + out.M3;
    return out;
}

namespace {

template <class Fn>
void parallel_for(int count, int threads, Fn&& fn) {
    threads = std::max(1, std::min(threads, count));
    if (threads == 1) {
        for (int k = 0; k < count; ++k) fn(k);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (int k = t; k < count; k += threads) fn(k);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// One stencil evaluation at step size delta.
GridField stencil(const MetricSpec& m, const NonlinearTerm& nl, const std::vector<GridField>& src, int order,
                  double delta, const MixedDifferenceOptions& opt, double& scale, int& solves) {
    const Grid& g = src[0].grid;
    std::vector<std::vector<double>> coeffs;  // per solve: amplitudes
    std::vector<double> weights;
    if (order == 2) {
        coeffs = {{delta, delta}, {delta, 0.0}, {0.0, delta}, {0.0, 0.0}};
        weights = {1.0, -1.0, -1.0, 1.0};
    } else {
        for (int mask = 0; mask < 16; ++mask) {
            std::vector<double> c(4);
            double w = 1.0;
            for (int b = 0; b < 4; ++b) {
                const double s = (mask >> b) & 1 ? -1.0 : 1.0;
                c[b] = s * delta;
                w *= s;
            }
            coeffs.push_back(c);
            weights.push_back(w);
        }
    }
    const double denom = order == 2 ? delta * delta : 16.0 * std::pow(delta, 4);
    std::vector<GridField> results(coeffs.size());
    parallel_for(static_cast<int>(coeffs.size()), opt.threads, [&](int k) {
        GridField f = GridField::zeros(g);
        bool any = false;
        for (std::size_t b = 0; b < coeffs[k].size(); ++b) {
            if (coeffs[k][b] == 0.0) continue;
            any = true;
            for (std::size_t q = 0; q < f.values.size(); ++q) f.values[q] += coeffs[k][b] * src[b].values[q];
        }
        results[k] = any ? solve_nonlinear(m, nl, f, opt.solver) : GridField::zeros(g);
    });
    solves += static_cast<int>(coeffs.size());
    GridField acc = GridField::zeros(g);
    for (std::size_t k = 0; k < results.size(); ++k) {
        scale = std::max(scale, results[k].max_abs());
        for (std::size_t q = 0; q < acc.values.size(); ++q) acc.values[q] += weights[k] * results[k].values[q];
    }
    acc *= 1.0 / denom;
    return acc;
}

}  // namespace

MixedDifference mixed_difference(const MetricSpec& m, const NonlinearTerm& nl, const std::vector<GridField>& sources,
                                 int order, const MixedDifferenceOptions& opt) {
    if (order != 2 && order != 4) throw Error(ErrorKind::InvalidArgument, "mixed differences of order 2 or 4 only");
    if (static_cast<int>(sources.size()) < order) throw Error(ErrorKind::InvalidArgument, "not enough sources");
    if (!(opt.delta > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta must be positive");
    for (const auto& s : sources) sources[0].grid.check_compatible(s.grid);

    MixedDifference out;
    double scale = 0.0;
    out.at_delta = stencil(m, nl, sources, order, opt.delta, opt, scale, out.solves);
    if (opt.richardson) {
        out.at_half_delta = stencil(m, nl, sources, order, 0.5 * opt.delta, opt, scale, out.solves);
        // forward stencil: O(delta) error; centred stencil: O(delta^2)
        out.estimate = order == 2 ? 2.0 * out.at_half_delta - out.at_delta
                                  : (1.0 / 3.0) * (4.0 * out.at_half_delta - out.at_delta);
        const double est = out.estimate.interior_l2();
        out.richardson_gap = est > 0.0 ? (out.at_delta - out.at_half_delta).interior_l2() / est : 0.0;
    } else {
        out.estimate = out.at_delta;
    }

    const double floor = 1e3 * std::numeric_limits<double>::epsilon() * scale;
    const double smallest_delta = opt.richardson ? 0.5 * opt.delta : opt.delta;
    if (out.estimate.max_abs() * std::pow(smallest_delta, order) < floor && !opt.allow_zero) {
        std::ostringstream msg;
        msg << "order-" << order << " stencil output " << out.estimate.max_abs() << " is below the rounding floor "
            << floor / std::pow(smallest_delta, order);
        throw Error(ErrorKind::CancellationLoss, msg.str());
    }
    return out;
}

double relative_interior_error(const GridField& a, const GridField& ref) {
    const double r = ref.interior_l2();
    const double e = (a - ref).interior_l2();
    return r > 0.0 ? e / r : e;
}

}  // namespace qdnw
