#pragma once

#include <array>
#include <vector>

#include "qdnw/wavesolver.hpp"

namespace qdnw {

/// The fourth-order interaction field split by origin: the quartic M term,
/// the cubic N1 terms and the twice-iterated quadratic N0 terms.
struct ExpansionTerms {
    GridField M1;
    GridField M2;
    GridField M3;
    GridField total;
    /// Number of linear solves spent.
    int solves = 0;
};

/// Literal permutation sums over S4, with every inner Q realized by solve_linear.
/// Bilinear pieces use the symmetric parts of N0, N1 and M (N0 sym = C0 g for a null N0).
ExpansionTerms expansion_terms(const MetricSpec& m, const NonlinearTerm& nl, const std::array<GridField, 4>& v);

/// Mixed second derivative d_{e1} d_{e2} u at zero amplitude: -2 Q[N0(grad v1, grad v2)].
GridField order2_reference(const MetricSpec& m, const NonlinearTerm& nl, const GridField& v1, const GridField& v2);

/// All 24 orderings of (0, 1, 2, 3).
std::vector<std::array<int, 4>> permutations4();

/// Distinct products v_i v_j M(grad v_k, grad v_l) among the 24 orderings, with
/// v_i v_j commuting and M taken as is.
int distinct_quartic_products();

struct MixedDifferenceOptions {
    double delta = 1e-2;
    /// Combine delta and delta / 2.
    bool richardson = true;
    /// Return the near-zero field instead of raising CancellationLoss.
    bool allow_zero = false;
    int threads = 1;
    NonlinearOptions solver;
};

struct MixedDifference {
    GridField estimate;
    GridField at_delta;
    GridField at_half_delta;
    /// Interior L2 of at_delta - at_half_delta relative to the estimate.
    double richardson_gap = 0.0;
    int solves = 0;
};

/// Finite-difference extraction of d_{e1}...d_{e_order} u from nonlinear solves with
/// source sum e_i f_i. order 2 uses the first two sources and the forward
/// four-point stencil; order 4 uses the centred 16-point tensor stencil.
MixedDifference mixed_difference(const MetricSpec& m, const NonlinearTerm& nl, const std::vector<GridField>& sources,
                                 int order, const MixedDifferenceOptions& opt = {});

/// |a - ref| / |ref| in interior space-time L2.
double relative_interior_error(const GridField& a, const GridField& ref);

}  // namespace qdnw
