#pragma once

#include <cstddef>
#include <cstdint>
#include <stop_token>
#include <string>
#include <utility>
#include <vector>

#include "symlab/layer_peeled.hpp"
#include "symlab/matrix.hpp"
#include "symlab/numerics.hpp"

namespace symlab {

/// Column j is z shifted cyclically by j places.
Matrix build_circulant(std::span<const double> z);

/// [circ(z_1) | ... | circ(z_b)].
Matrix build_block_circulant(const std::vector<Vector>& generators);

/// Replaces every m x m column block of z by its average over simultaneous
/// cyclic shifts of rows and columns, the orthogonal projection onto
/// block-circulant matrices.
Matrix block_circulant_average(const Matrix& z);

struct CyclicOptions {
    std::size_t max_iter = 200000;
    /// Target for the projected-gradient residual ||x - P(x - grad)||.
    double tol = 1e-10;
    /// Fixed-point tolerance of the alternating projection in the
    /// multi-block path.
    double dykstra_tol = 1e-10;
    std::size_t dykstra_max_iter = 10000;
    /// Rerun from a random feasible start and compare (non-uniqueness probe).
    bool second_start = true;
    std::uint64_t seed = 0;
    std::stop_token stop{};
};

struct CyclicSolution {
    std::vector<Vector> generators;
    Matrix z_matrix;
    Matrix gram_w;
    Matrix gram_h;
    /// Total cross-entropy of z_matrix against the block-circulant target.
    double objective = 0.0;
    double nuclear_norm_used = 0.0;
    double budget = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
    /// False when every block target is uniform; the solution is then the
    /// zero logit and carries no geometric content.
    bool hypotheses_met = true;
    std::string warning;
    /// Filled when CyclicOptions::second_start is set.
    double restart_iterate_gap = 0.0;
    double restart_objective_gap = 0.0;
    /// Iterates differ by more than 1e-6 while objectives agree to 1e-10.
    bool nonunique_flag = false;
};

/// Minimizes the total cross-entropy over block-circulant logits whose
/// nuclear norm is at most sqrt(e_w * e_h). A single block is solved in
/// Fourier coordinates with an exact projection; several blocks use
/// projected gradient with Dykstra's alternating projection between the
/// nuclear ball and the block-circulant subspace.
CyclicSolution solve_generating_vectors(const std::vector<Vector>& blocks, double e_w, double e_h,
                                        const CyclicOptions& options = {});

/// Gram matrices of the balanced factorization of z:
/// sqrt(e_w/e_h) (Z Z^T)^{1/2} and sqrt(e_h/e_w) (Z^T Z)^{1/2}.
std::pair<Matrix, Matrix> grams_from_logits(const Matrix& z, double e_w, double e_h);

/// Balanced factors W = (e_w/e_h)^{1/4} U S^{1/2} Q^T and
/// H = (e_h/e_w)^{1/4} Q S^{1/2} V^T with W H = z.
FactorPair factor_solution(const Matrix& z, double e_w, double e_h, std::size_t d,
                           const QMode& q_mode = QMode::canonical());

}  // namespace symlab
