#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stop_token>
#include <utility>
#include <variant>
#include <vector>

#include "symlab/matrix.hpp"

namespace symlab {

/// Convex relaxation of the layer-peeled problem in the block Gram variable
/// X = [[H^T H, H^T W^T], [W H, W W^T]] (size n + m) with trace budgets.
struct LiftedProblem {
    Matrix y;  // m x n
    double e_w = 1.0;
    double e_h = 1.0;
};

struct LiftedOptions {
    std::size_t max_iter = 500000;
    /// Target for the unit-step gradient-mapping residual.
    double tol = 1e-9;
    std::uint64_t seed = 0;
    std::size_t max_dim = 200;
    double dykstra_tol = 1e-12;
    std::size_t dykstra_max_iter = 20000;
    /// How often (in iterations) the residual is evaluated.
    std::size_t check_every = 10;
    std::stop_token stop{};
};

struct LiftedSolution {
    Matrix x;
    Matrix gram_h;  // n x n, top-left
    Matrix logits;  // m x n, bottom-left
    Matrix gram_w;  // m x m, bottom-right
    double objective = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    /// (trace(gram_h) / e_h, trace(gram_w) / e_w).
    std::pair<double, double> activity{0.0, 0.0};
    double min_eigenvalue = 0.0;
};

/// Projected accelerated gradient on X. The feasible set is the PSD cone
/// intersected with two trace half-spaces; each projection runs Dykstra's
/// algorithm between the cone (eigenvalue clipping) and the half-spaces
/// (exact uniform shift of the violating diagonal block).
LiftedSolution solve_lifted(const LiftedProblem& p, const LiftedOptions& options = {});

/// Dykstra projection onto {X PSD, trace of the leading n x n block <= e_h,
/// trace of the trailing block <= e_w}. Returns a PSD matrix; the trace
/// constraints hold to the Dykstra tolerance.
Matrix project_lifted_feasible(const Matrix& v, std::size_t n, double e_h, double e_w,
                               double tol = 1e-12, std::size_t max_iter = 20000);

namespace pattern {
/// Consecutive blocks of the given sizes. Diagonal blocks are fit by
/// a_i I + b_i (J - I), off-diagonal blocks by k_ij 1 1^T.
struct DirectSum {
    std::vector<std::size_t> sizes;
};
/// a x l grid, row-major: a diagonal blocks of size l sharing a I + b (J - I)
/// and all off-diagonal blocks sharing a' I + b' (J - I).
struct Grid {
    std::size_t a;
    std::size_t l;
};
/// b blocks of size s with the same two-level fit as Grid.
struct Wreath {
    std::size_t s;
    std::size_t b;
};
}  // namespace pattern

using PatternSpec = std::variant<pattern::DirectSum, pattern::Grid, pattern::Wreath>;

struct BlockPatternFit {
    std::vector<std::size_t> partition;
    /// Per diagonal block (one shared entry for Grid and Wreath).
    std::vector<double> alpha_diag;
    std::vector<double> beta_diag;
    /// Direct sum off-diagonal constants keyed by (i, j) with i < j.
    std::map<std::pair<std::size_t, std::size_t>, double> kappa;
    /// Shared off-diagonal block parameters (Grid and Wreath).
    double alpha_off = 0.0;
    double beta_off = 0.0;
    std::size_t parameter_count = 0;
    double relative_residual = 0.0;
    Matrix fitted;
    /// Set for Wreath: its fit is the same two-level pattern as Grid.
    bool coincides_with_grid = false;
};

/// Least-squares fit of the block pattern (class means of the entries).
BlockPatternFit fit_block_pattern(const Matrix& g, const PatternSpec& pattern);

}  // namespace symlab
