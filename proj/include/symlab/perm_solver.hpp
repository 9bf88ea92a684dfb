#pragma once

#include <cstddef>
#include <vector>

#include "symlab/groups.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/matrix.hpp"
#include "symlab/numerics.hpp"

namespace symlab {

/// One orbit block of the stationarity system: its base distribution and
/// the number of columns it contributes to Y.
struct AlphaBlock {
    double weight = 1.0;
    Vector y;
};

struct AlphaOptions {
    /// Required system residual (stationarity equations and the k relation).
    double tol = 1e-10;
    std::size_t max_outer = 300;
    std::size_t max_inner = 200;
};

struct AlphaCertificate {
    std::vector<Vector> alphas;
    double k = 0.0;
    double gamma = 0.0;
    double residual = 0.0;
    std::vector<double> weights;
    std::vector<Vector> bases;
    double e_w = 0.0;
    double e_h = 0.0;
    std::size_t outer_iterations = 0;
};

/// Sum over blocks of weight * ||log y - mean(log y)||^2; infinite as soon
/// as a nonuniform base has a zero entry. The stationarity system has a
/// solution exactly when e_w * e_h / (m - 1) is below this value; at or
/// above it the targets are attained at the entropy floor.
double alpha_system_capacity(const std::vector<AlphaBlock>& blocks);

/// Solves k (a_i - y_i) + log a_i = mean_r log a_ir for every block jointly
/// with k = sqrt(e_w e_h) / ((m - 1) gamma). For fixed k each block is a
/// strictly concave maximization solved by damped Newton; k is the root of
/// k * gamma(k) = sqrt(e_w e_h) / (m - 1), found by safeguarded secant
/// steps in log k.
AlphaCertificate solve_alpha(const std::vector<AlphaBlock>& blocks, double e_w, double e_h,
                             const AlphaOptions& options = {});

/// Largest violation of the stationarity equations, the k relation and the
/// gamma definition (the latter two relative).
double alpha_system_residual(const AlphaCertificate& cert);

/// phi(alpha) = -sqrt(e_w e_h) gamma(alpha) - sum_i n_i sum_l a_il log a_il,
/// a lower bound on the layer-peeled objective for every alpha, attained at
/// the solution of the stationarity system.
double phi(const std::vector<AlphaBlock>& blocks, const std::vector<Vector>& alphas, double e_w,
           double e_h);

/// Alpha blocks of an orbit target, weighted by the actual column counts.
/// Throws HypothesisViolated when a block with a nonuniform base is acted on
/// by a group that is not 2-transitive.
std::vector<AlphaBlock> alpha_blocks(const TargetSpec& target, const OrbitMatrix& orbit);

/// C = A - Y with column (i, g) equal to g o alpha_i - g o y_i.
Matrix build_residual(const AlphaCertificate& cert, const OrbitMatrix& orbit);

struct EtfSolution {
    Matrix w;
    Matrix h;
    Matrix c;
    Matrix u;
    Matrix v;
    Vector c_singular_values;
    AlphaCertificate certificate;
    Matrix gram_w;
    Matrix gram_h;
    Matrix logits;
    double objective = 0.0;
    double lower_bound = 0.0;
};

/// W = sqrt(e_w/(m-1)) U Q^T and H = -sqrt(e_h/(m-1)) Q V^T from the compact
/// SVD C = U (gamma I) V^T. Requires d >= m.
EtfSolution construct_solution(const AlphaCertificate& cert, const OrbitMatrix& orbit,
                               std::size_t d, const QMode& q_mode = QMode::canonical());

/// sqrt(m/(m-1)) (I - J/m).
Matrix etf_reference(std::size_t m);

/// P_W = W^T (W W^T)^{+1/2}, computed as V U^T from W = U S V^T.
Matrix embedding_projector(const Matrix& w);

/// Max over same-block column pairs (i, j) of
/// |(g_j g_i^{-1}) o x_i - x_j|, relative to the largest column norm.
double orbit_equivariance_error(const Matrix& x, const OrbitMatrix& orbit);

/// Max over columns of the relative gap between softmax of the logits and
/// the alpha arrangement g o alpha_i the column should predict.
double prediction_alpha_error(const EtfSolution& sol, const OrbitMatrix& orbit);

}  // namespace symlab
