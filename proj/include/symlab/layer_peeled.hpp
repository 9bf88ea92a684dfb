#pragma once

#include <cstddef>
#include <cstdint>
#include <stop_token>
#include <utility>
#include <vector>

#include "symlab/matrix.hpp"

namespace symlab {

struct LayerPeeledProblem {
    Matrix y;  // m x n, columns are target distributions
    double e_w = 1.0;
    double e_h = 1.0;
    std::size_t d = 1;

    std::size_t m() const noexcept { return y.rows(); }
    std::size_t n() const noexcept { return y.cols(); }
    /// Throws InvalidInput on non-simplex columns, nonpositive budgets or d = 0.
    void validate() const;
};

struct FactorPair {
    Matrix w;  // m x d
    Matrix h;  // d x n

    Matrix logits() const { return w * h; }
};

/// Checks that every column of y lies on the probability simplex to `tol`.
void require_distribution_columns(const Matrix& y, double tol, const char* context);

Matrix softmax_columns(const Matrix& z);

/// Sum over columns of the cross-entropy between softmax(z_j) and y_j.
double cross_entropy(const Matrix& z, const Matrix& y);
/// Cross-entropy together with its gradient softmax(z) - y.
double cross_entropy_with_gradient(const Matrix& z, const Matrix& y, Matrix& grad);
/// Sum of the column entropies of y, the infimum of cross_entropy over z.
double entropy_floor(const Matrix& y);

double objective(const LayerPeeledProblem& p, const FactorPair& f);

struct Gradients {
    Matrix grad_w;
    Matrix grad_h;
};

Gradients gradients(const LayerPeeledProblem& p, const FactorPair& f);

/// Radial projection onto {||a||_F^2 <= budget_sq}.
Matrix project_frobenius_ball(const Matrix& a, double budget_sq);

struct StepSchedule {
    double initial = 1.0;
    double growth = 1.25;     // applied after every accepted step
    double backtrack = 0.5;   // applied on every rejected trial
};

struct PgdOptions {
    std::size_t restarts = 20;
    std::size_t max_iter = 200000;
    StepSchedule step{};
    std::uint64_t seed = 0;
    /// Stop once the objective dropped by less than rel_tol (relative) over
    /// the last `window` iterations.
    double rel_tol = 1e-12;
    std::size_t window = 50;
    /// 0 picks std::thread::hardware_concurrency().
    unsigned threads = 0;
    std::stop_token stop{};
};

struct SolveReport {
    FactorPair best;
    double objective = 0.0;
    std::size_t best_restart = 0;
    std::vector<double> restart_objectives;
    std::vector<std::size_t> iterations;
    std::vector<bool> converged;
    /// (||W||_F^2 / E_W, ||H||_F^2 / E_H) at the best iterate.
    std::pair<double, double> constraint_activity{0.0, 0.0};
    /// Largest pairwise gap between restart objectives.
    double consensus_gap = 0.0;
};

/// Multi-restart projected gradient with Armijo backtracking. Each restart
/// draws its own RNG stream from (seed, restart index), so the report is a
/// deterministic function of the options regardless of thread count.
SolveReport solve_pgd(const LayerPeeledProblem& p, const PgdOptions& options = {});

}  // namespace symlab
