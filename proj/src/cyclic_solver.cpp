#include "symlab/cyclic_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "symlab/error.hpp"

namespace symlab {
namespace {

using ValueGrad = std::function<double(const Vector&, Vector&)>;
using Projector = std::function<Vector(const Vector&)>;

struct ApgResult {
    Vector x;
    double value = 0.0;
    double residual = 0.0;
    std::size_t iterations = 0;
};

double distance(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(s);
}

// Accelerated projected gradient with backtracking and function-value
// restarts. The residual is the norm of the unit-step gradient mapping,
// which vanishes exactly at the constrained minimizers.
ApgResult accelerated_projected_gradient(Vector x0, const ValueGrad& fg, const Projector& project,
                                         const CyclicOptions& opt) {
    const std::size_t n = x0.size();
    Vector x = project(x0);
    Vector gx(n), y = x, gy(n), xn(n), gn(n), trial(n);
    double fx = fg(x, gx);
    double t = 1.0;
    double step = 1.0;

    auto residual_at = [&](const Vector& p, const Vector& g) {
        for (std::size_t k = 0; k < n; ++k) trial[k] = p[k] - g[k];
        return distance(p, project(trial));
    };

    double residual = residual_at(x, gx);
    std::size_t it = 0;
    for (; it < opt.max_iter && residual > opt.tol; ++it) {
        if (opt.stop.stop_requested()) throw SolverFailure("cyclic solve cancelled", residual);
        const double fy = fg(y, gy);
        double fn = 0.0;
        for (int attempt = 0;; ++attempt) {
            for (std::size_t k = 0; k < n; ++k) trial[k] = y[k] - step * gy[k];
            xn = project(trial);
            fn = fg(xn, gn);
            double lin = 0.0, quad = 0.0;
            for (std::size_t k = 0; k < n; ++k) {
                const double d = xn[k] - y[k];
                lin += gy[k] * d;
                quad += d * d;
            }
            if (fn <= fy + lin + quad / (2.0 * step) + 1e-15 * std::abs(fy)) break;
            if (attempt > 60) throw SolverFailure("line search failed", residual);
            step *= 0.5;
        }
        // Gradient-based restart: drop momentum once it points against the
        // latest step. Function values are too flat near the optimum to decide.
        double align = 0.0;
        for (std::size_t k = 0; k < n; ++k) align += (y[k] - xn[k]) * (xn[k] - x[k]);
        if (align > 0.0) {
            t = 1.0;
            y = xn;
        } else {
            const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
            for (std::size_t k = 0; k < n; ++k) y[k] = xn[k] + ((t - 1.0) / tn) * (xn[k] - x[k]);
            t = tn;
        }
        std::swap(x, xn);
        std::swap(gx, gn);
        fx = fn;
        step *= 1.05;
        residual = residual_at(x, gx);
    }
    if (residual > opt.tol)
        throw SolverFailure("cyclic solver did not reach tolerance within " +
                                std::to_string(opt.max_iter) + " iterations",
                            residual);
    return {std::move(x), fx, residual, it};
}

Vector flatten(const Matrix& a) { return {a.data().begin(), a.data().end()}; }

Matrix unflatten(const Vector& v, std::size_t rows, std::size_t cols) {
    return Matrix(rows, cols, v);
}

Matrix project_nuclear_ball(const Matrix& z, double budget) {
    const SvdResult svd = svd_compact(z, 1e-15);
    const double total = std::accumulate(svd.singular_values.begin(), svd.singular_values.end(), 0.0);
    if (total <= budget) return z;
    SvdResult shrunk = svd;
    shrunk.singular_values = project_l1_nonneg(svd.singular_values, budget);
    return shrunk.reconstruct();
}

// Dykstra's alternating projection onto {nuclear norm <= budget} intersected
// with the block-circulant subspace. The returned point lies in the subspace.
Matrix dykstra_project(const Matrix& v, double budget, const CyclicOptions& opt) {
    Matrix x = v;
    Matrix p(v.rows(), v.cols()), q(v.rows(), v.cols());
    for (std::size_t it = 0; it < opt.dykstra_max_iter; ++it) {
        const Matrix y = project_nuclear_ball(x + p, budget);
        p = x + p - y;
        const Matrix xn = block_circulant_average(y + q);
        q = y + q - xn;
        const double change = frobenius_norm(xn - x);
        x = xn;
        if (change <= opt.dykstra_tol * std::max(1.0, frobenius_norm(x))) return x;
    }
    throw SolverFailure("alternating projection did not converge", frobenius_norm(p));
}

bool is_uniform(const Vector& y) {
    const double u = 1.0 / static_cast<double>(y.size());
    return std::all_of(y.begin(), y.end(), [u](double v) { return std::abs(v - u) <= 1e-12; });
}

struct Run {
    std::vector<Vector> generators;
    Matrix z_matrix;
    double residual = 0.0;
    std::size_t iterations = 0;
};

Run run_single(const Vector& y, double budget, const Vector& start, const CyclicOptions& opt) {
    const std::size_t m = y.size();
    const Matrix target = Matrix::from_columns({y});
    ValueGrad fg = [&](const Vector& z, Vector& g) {
        Matrix grad;
        const double f = cross_entropy_with_gradient(Matrix::from_columns({z}), target, grad);
        for (std::size_t i = 0; i < m; ++i) g[i] = grad(i, 0);
        return f;
    };
    Projector project = [budget](const Vector& z) {
        return idft(simplex_project_magnitudes(dft(z), budget));
    };
    ApgResult r = accelerated_projected_gradient(start, fg, project, opt);
    Run out;
    out.generators = {r.x};
    out.z_matrix = build_circulant(r.x);
    out.residual = r.residual;
    out.iterations = r.iterations;
    return out;
}

Run run_multi(const std::vector<Vector>& blocks, double budget, const Matrix& start,
              const CyclicOptions& opt) {
    const std::size_t m = blocks.front().size();
    const std::size_t cols = m * blocks.size();
    const Matrix target = build_block_circulant(blocks);
    ValueGrad fg = [&](const Vector& x, Vector& g) {
        Matrix grad;
        const double f = cross_entropy_with_gradient(unflatten(x, m, cols), target, grad);
        std::copy(grad.data().begin(), grad.data().end(), g.begin());
        return f;
    };
    Projector project = [&](const Vector& x) {
        return flatten(dykstra_project(unflatten(x, m, cols), budget, opt));
    };
    ApgResult r = accelerated_projected_gradient(flatten(start), fg, project, opt);

    const Matrix z = block_circulant_average(unflatten(r.x, m, cols));
    Run out;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        Vector g(m);
        for (std::size_t i = 0; i < m; ++i) g[i] = z(i, b * m);
        out.generators.push_back(std::move(g));
    }
    out.z_matrix = build_block_circulant(out.generators);
    const double nn = nuclear_norm(out.z_matrix);
    if (nn > budget) {
        // Alternating projection leaves an O(tol) violation; pull it back.
        const double s = budget / nn;
        for (auto& g : out.generators)
            for (double& v : g) v *= s;
        out.z_matrix = build_block_circulant(out.generators);
    }
    out.residual = r.residual;
    out.iterations = r.iterations;
    return out;
}

Run run(const std::vector<Vector>& blocks, double budget, std::uint64_t seed, bool random_start,
        const CyclicOptions& opt) {
    const std::size_t m = blocks.front().size();
    std::mt19937_64 rng(seed);
    if (blocks.size() == 1) {
        Vector start(m, 0.0);
        if (random_start) start = random_gaussian(m, 1, rng).col(0);
        return run_single(blocks.front(), budget, start, opt);
    }
    Matrix start(m, m * blocks.size());
    if (random_start) {
        std::vector<Vector> gens;
        for (std::size_t b = 0; b < blocks.size(); ++b) gens.push_back(random_gaussian(m, 1, rng).col(0));
        start = build_block_circulant(gens);
    }
    return run_multi(blocks, budget, start, opt);
}

}  // namespace

Matrix build_circulant(std::span<const double> z) {
    const std::size_t m = z.size();
    if (m == 0) throw InvalidInput("build_circulant: empty generator");
    Matrix c(m, m);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < m; ++i) c((i + j) % m, j) = z[i];
    return c;
}

Matrix build_block_circulant(const std::vector<Vector>& generators) {
    if (generators.empty()) throw InvalidInput("build_block_circulant: no generators");
    const std::size_t m = generators.front().size();
    Matrix out(m, m * generators.size());
    for (std::size_t b = 0; b < generators.size(); ++b) {
        if (generators[b].size() != m) throw InvalidInput("build_block_circulant: generator lengths differ");
        out.set_block(0, b * m, build_circulant(generators[b]));
    }
    return out;
}

Matrix block_circulant_average(const Matrix& z) {
    const std::size_t m = z.rows();
    if (m == 0 || z.cols() % m != 0)
        throw InvalidInput("block_circulant_average: column count must be a multiple of the row count");
    Matrix out(m, z.cols());
    for (std::size_t b = 0; b < z.cols() / m; ++b) {
        const std::size_t off = b * m;
        for (std::size_t shift = 0; shift < m; ++shift) {
            double s = 0.0;
            for (std::size_t j = 0; j < m; ++j) s += z((j + shift) % m, off + j);
            s /= static_cast<double>(m);
            for (std::size_t j = 0; j < m; ++j) out((j + shift) % m, off + j) = s;
        }
    }
    return out;
}

CyclicSolution solve_generating_vectors(const std::vector<Vector>& blocks, double e_w, double e_h,
                                        const CyclicOptions& options) {
    if (blocks.empty()) throw InvalidInput("solve_generating_vectors: no blocks");
    if (!(e_w > 0.0) || !(e_h > 0.0)) throw InvalidInput("solve_generating_vectors: budgets must be positive");
    const std::size_t m = blocks.front().size();
    if (m < 2) throw InvalidInput("solve_generating_vectors: need at least two classes");
    for (const auto& y : blocks) {
        if (y.size() != m) throw InvalidInput("solve_generating_vectors: block lengths differ");
        require_distribution_columns(Matrix::from_columns({y}), 1e-12, "solve_generating_vectors");
    }

    const double budget = std::sqrt(e_w * e_h);
    CyclicSolution sol;
    sol.budget = budget;
    sol.hypotheses_met = !std::all_of(blocks.begin(), blocks.end(), is_uniform);
    if (!sol.hypotheses_met)
        sol.warning = "every block target is uniform; the optimal logits are zero";

    Run primary = run(blocks, budget, options.seed, false, options);
    if (options.second_start && sol.hypotheses_met) {
        Run other = run(blocks, budget, options.seed, true, options);
        const Matrix target = build_block_circulant(blocks);
        sol.restart_iterate_gap = frobenius_norm(primary.z_matrix - other.z_matrix) /
                                  std::max(1.0, frobenius_norm(primary.z_matrix));
        sol.restart_objective_gap = std::abs(cross_entropy(primary.z_matrix, target) -
                                             cross_entropy(other.z_matrix, target));
        sol.nonunique_flag = sol.restart_iterate_gap > 1e-6 && sol.restart_objective_gap < 1e-10;
    }

    sol.generators = std::move(primary.generators);
    sol.z_matrix = std::move(primary.z_matrix);
    sol.kkt_residual = primary.residual;
    sol.iterations = primary.iterations;
    sol.objective = cross_entropy(sol.z_matrix, build_block_circulant(blocks));
    sol.nuclear_norm_used = nuclear_norm(sol.z_matrix);
    std::tie(sol.gram_w, sol.gram_h) = grams_from_logits(sol.z_matrix, e_w, e_h);
    return sol;
}

std::pair<Matrix, Matrix> grams_from_logits(const Matrix& z, double e_w, double e_h) {
    if (!(e_w > 0.0) || !(e_h > 0.0)) throw InvalidInput("grams_from_logits: budgets must be positive");
    // (Z Z^T)^{1/2} = U S U^T and (Z^T Z)^{1/2} = V S V^T. Going through the
    // SVD keeps full accuracy where the eigenvalues of Z Z^T reach the
    // rounding floor.
    const SvdResult svd = svd_compact(z);
    Matrix us = svd.u, vs = svd.v;
    for (std::size_t k = 0; k < svd.rank(); ++k) {
        for (std::size_t i = 0; i < us.rows(); ++i) us(i, k) *= svd.singular_values[k];
        for (std::size_t i = 0; i < vs.rows(); ++i) vs(i, k) *= svd.singular_values[k];
    }
    const double ratio = std::sqrt(e_w / e_h);
    Matrix gw = symmetrized(multiply_abt(us, svd.u)) * ratio;
    Matrix gh = symmetrized(multiply_abt(vs, svd.v)) * (1.0 / ratio);
    return {std::move(gw), std::move(gh)};
}

FactorPair factor_solution(const Matrix& z, double e_w, double e_h, std::size_t d, const QMode& q_mode) {
    if (!(e_w > 0.0) || !(e_h > 0.0)) throw InvalidInput("factor_solution: budgets must be positive");
    const SvdResult svd = svd_compact(z);
    const std::size_t r = svd.rank();
    if (d < r)
        throw InvalidInput("factor_solution: d = " + std::to_string(d) + " is below rank " +
                           std::to_string(r));
    const Matrix q = partial_isometry(d, r, q_mode);
    Matrix left = svd.u, right = svd.v;
    for (std::size_t k = 0; k < r; ++k) {
        const double root = std::sqrt(svd.singular_values[k]);
        for (std::size_t i = 0; i < left.rows(); ++i) left(i, k) *= root;
        for (std::size_t i = 0; i < right.rows(); ++i) right(i, k) *= root;
    }
    const double scale = std::pow(e_w / e_h, 0.25);
    FactorPair f;
    f.w = multiply_abt(left, q) * scale;
    f.h = multiply_abt(q, right) * (1.0 / scale);
    return f;
}

}  // namespace symlab
