#include "symlab/lifted_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "symlab/error.hpp"
#include "symlab/layer_peeled.hpp"
#include "symlab/numerics.hpp"

namespace symlab {
namespace {

double block_trace(const Matrix& x, std::size_t first, std::size_t count) {
    double s = 0.0;
    for (std::size_t k = first; k < first + count; ++k) s += x(k, k);
    return s;
}

// Exact projection onto the two trace half-spaces. Their normals have
// disjoint supports, so the two shifts commute.
void project_traces(Matrix& x, std::size_t n, double e_h, double e_w) {
    const std::size_t total = x.rows();
    const double th = block_trace(x, 0, n);
    if (th > e_h) {
        const double shift = (th - e_h) / static_cast<double>(n);
        for (std::size_t k = 0; k < n; ++k) x(k, k) -= shift;
    }
    const double tw = block_trace(x, n, total - n);
    if (tw > e_w) {
        const double shift = (tw - e_w) / static_cast<double>(total - n);
        for (std::size_t k = n; k < total; ++k) x(k, k) -= shift;
    }
}

class FeasibleProjector {
public:
    FeasibleProjector(std::size_t n, std::size_t dim, double e_h, double e_w, double tol,
                      std::size_t max_iter)
        : n_(n), e_h_(e_h), e_w_(e_w), tol_(tol), max_iter_(max_iter), basis_(Matrix::identity(dim)) {}

    Matrix operator()(const Matrix& v) {
        Matrix x = v;
        Matrix p(v.rows(), v.cols()), q(v.rows(), v.cols());
        for (std::size_t it = 0; it < max_iter_; ++it) {
            Matrix y = x + p;
            project_traces(y, n_, e_h_, e_w_);
            p = x + p - y;
            Matrix xn = psd(y + q);
            q = y + q - xn;
            const double change = frobenius_norm(xn - x);
            x = std::move(xn);
            if (change <= tol_ * std::max(1.0, frobenius_norm(x))) return x;
        }
        throw SolverFailure("lifted feasibility projection did not converge", frobenius_norm(p));
    }

private:
    Matrix psd(const Matrix& a) {
        EigResult e = sym_eig_warm(a, basis_);
        basis_ = e.vectors;
        const std::size_t dim = a.rows();
        Matrix out(dim, dim);
        for (std::size_t k = 0; k < dim; ++k) {
            const double lambda = e.values[k];
            if (lambda <= 0.0) break;
            for (std::size_t i = 0; i < dim; ++i) {
                const double vi = e.vectors(i, k) * lambda;
                for (std::size_t j = 0; j < dim; ++j) out(i, j) += vi * e.vectors(j, k);
            }
        }
        return symmetrized(out);
    }

    std::size_t n_;
    double e_h_, e_w_, tol_;
    std::size_t max_iter_;
    Matrix basis_;
};

Matrix logit_block(const Matrix& x, std::size_t n) { return x.block(n, 0, x.rows() - n, n); }

// Objective and its gradient in X. The logits appear in both off-diagonal
// blocks, so each carries half of softmax(Z) - Y.
double value_and_gradient(const Matrix& x, const Matrix& y, Matrix& grad) {
    const std::size_t n = y.cols();
    Matrix g;
    const double f = cross_entropy_with_gradient(logit_block(x, n), y, g);
    grad = Matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < n; ++j) {
            grad(n + i, j) = 0.5 * g(i, j);
            grad(j, n + i) = 0.5 * g(i, j);
        }
    return f;
}

// Congruence scaling of an over-budget diagonal block keeps X PSD while
// restoring the trace budget exactly.
void enforce_budgets(Matrix& x, std::size_t n, double e_h, double e_w) {
    const std::size_t dim = x.rows();
    Vector scale(dim, 1.0);
    const double th = block_trace(x, 0, n);
    const double tw = block_trace(x, n, dim - n);
    if (th > e_h)
        for (std::size_t k = 0; k < n; ++k) scale[k] = std::sqrt(e_h / th);
    if (tw > e_w)
        for (std::size_t k = n; k < dim; ++k) scale[k] = std::sqrt(e_w / tw);
    for (std::size_t i = 0; i < dim; ++i)
        for (std::size_t j = 0; j < dim; ++j) x(i, j) *= scale[i] * scale[j];
}

}  // namespace

Matrix project_lifted_feasible(const Matrix& v, std::size_t n, double e_h, double e_w, double tol,
                               std::size_t max_iter) {
    require_symmetric(v, 1e-10, "project_lifted_feasible");
    if (n == 0 || n >= v.rows()) throw InvalidInput("project_lifted_feasible: invalid split");
    FeasibleProjector proj(n, v.rows(), e_h, e_w, tol, max_iter);
    return proj(symmetrized(v));
}

LiftedSolution solve_lifted(const LiftedProblem& p, const LiftedOptions& options) {
    const std::size_t m = p.y.rows(), n = p.y.cols();
    if (m < 2 || n < 1) throw InvalidInput("solve_lifted: target must have at least 2 rows and 1 column");
    require_distribution_columns(p.y, 1e-12, "solve_lifted");
    if (!(p.e_w > 0.0) || !(p.e_h > 0.0)) throw InvalidInput("solve_lifted: budgets must be positive");
    const std::size_t dim = n + m;
    if (dim > options.max_dim)
        throw TooLarge("lifted dimension " + std::to_string(dim) + " exceeds " +
                       std::to_string(options.max_dim));

    FeasibleProjector project(n, dim, p.e_h, p.e_w, options.dykstra_tol, options.dykstra_max_iter);

    // Random PSD start at half of each budget.
    std::mt19937_64 rng(options.seed);
    Matrix r = random_gaussian(dim, dim, rng);
    Matrix x = multiply_abt(r, r);
    {
        const double th = block_trace(x, 0, n), tw = block_trace(x, n, m);
        Vector scale(dim);
        for (std::size_t k = 0; k < dim; ++k)
            scale[k] = k < n ? std::sqrt(0.5 * p.e_h / th) : std::sqrt(0.5 * p.e_w / tw);
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j) x(i, j) *= scale[i] * scale[j];
    }

    Matrix gx, gy, gn;
    double fx = value_and_gradient(x, p.y, gx);
    Matrix y = x;
    double t = 1.0;
    double step = 4.0;  // the gradient is 1/4-Lipschitz in X
    double residual = std::numeric_limits<double>::infinity();
    std::size_t it = 0;

    auto gradient_mapping = [&](const Matrix& point, const Matrix& grad) {
        return frobenius_norm(point - project(point - grad));
    };

    for (; it < options.max_iter; ++it) {
        if (options.stop.stop_requested()) throw SolverFailure("lifted solve cancelled", residual);
        if (it % options.check_every == 0) {
            residual = gradient_mapping(x, gx);
            if (residual <= options.tol) break;
        }
        const double fy = value_and_gradient(y, p.y, gy);
        Matrix xn;
        double fn = 0.0;
        for (int attempt = 0;; ++attempt) {
            xn = project(y - step * gy);
            fn = value_and_gradient(xn, p.y, gn);
            const Matrix d = xn - y;
            if (fn <= fy + frobenius_dot(gy, d) + frobenius_norm_sq(d) / (2.0 * step) +
                          1e-15 * std::abs(fy))
                break;
            if (attempt > 60) throw SolverFailure("lifted line search failed", residual);
            step *= 0.5;
        }
        if (!std::isfinite(fn)) throw SolverFailure("lifted objective became non-finite", residual);
        if (fn > fx) {
            y = x;
            t = 1.0;
            continue;
        }
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = xn + ((t - 1.0) / tn) * (xn - x);
        t = tn;
        x = std::move(xn);
        gx = std::move(gn);
        fx = fn;
    }
    if (residual > options.tol) {
        residual = gradient_mapping(x, gx);
        if (residual > options.tol)
            throw SolverFailure("lifted solver did not reach tolerance within " +
                                    std::to_string(options.max_iter) + " iterations",
                                residual);
    }

    enforce_budgets(x, n, p.e_h, p.e_w);
    LiftedSolution sol;
    sol.x = x;
    sol.gram_h = x.block(0, 0, n, n);
    sol.logits = logit_block(x, n);
    sol.gram_w = x.block(n, n, m, m);
    sol.objective = cross_entropy(sol.logits, p.y);
    sol.kkt_residual = residual;
    sol.iterations = it;
    sol.activity = {block_trace(x, 0, n) / p.e_h, block_trace(x, n, m) / p.e_w};
    sol.min_eigenvalue = sym_eig(x).values.back();
    return sol;
}

BlockPatternFit fit_block_pattern(const Matrix& g, const PatternSpec& spec) {
    if (!g.is_square()) throw InvalidInput("fit_block_pattern: matrix must be square");
    BlockPatternFit fit;
    bool shared = true;
    if (const auto* ds = std::get_if<pattern::DirectSum>(&spec)) {
        fit.partition = ds->sizes;
        shared = false;
    } else if (const auto* grid = std::get_if<pattern::Grid>(&spec)) {
        fit.partition.assign(grid->a, grid->l);
    } else {
        const auto& wr = std::get<pattern::Wreath>(spec);
        fit.partition.assign(wr.b, wr.s);
        fit.coincides_with_grid = true;
    }
    if (fit.partition.empty() ||
        std::any_of(fit.partition.begin(), fit.partition.end(), [](std::size_t s) { return s == 0; }) ||
        std::accumulate(fit.partition.begin(), fit.partition.end(), std::size_t{0}) != g.rows())
        throw InvalidInput("fit_block_pattern: partition does not match a " + std::to_string(g.rows()) +
                           "x" + std::to_string(g.cols()) + " matrix");

    const std::size_t r = fit.partition.size();
    std::vector<std::size_t> offset(r, 0);
    for (std::size_t i = 1; i < r; ++i) offset[i] = offset[i - 1] + fit.partition[i - 1];
    std::vector<std::size_t> owner(g.rows());
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t k = 0; k < fit.partition[i]; ++k) owner[offset[i] + k] = i;

    // Entry classes: diagonal of block i, off-diagonal of block i, block pair
    // (i, j). Shared patterns pool the classes across blocks, with the
    // off-block diagonal (position k in both blocks) as its own class.
    auto class_of = [&](std::size_t a, std::size_t b) -> std::pair<int, std::pair<std::size_t, std::size_t>> {
        const std::size_t i = owner[a], j = owner[b];
        if (i == j) {
            const std::size_t key = shared ? 0 : i;
            return {a == b ? 0 : 1, {key, key}};
        }
        if (shared) return {(a - offset[i]) == (b - offset[j]) ? 2 : 3, {0, 0}};
        return {4, {std::min(i, j), std::max(i, j)}};
    };

    std::map<std::pair<int, std::pair<std::size_t, std::size_t>>, std::pair<double, std::size_t>> acc;
    for (std::size_t a = 0; a < g.rows(); ++a)
        for (std::size_t b = 0; b < g.cols(); ++b) {
            auto& slot = acc[class_of(a, b)];
            slot.first += g(a, b);
            slot.second += 1;
        }
    auto mean = [&](int kind, std::size_t i, std::size_t j) {
        const auto it = acc.find({kind, {i, j}});
        return it == acc.end() ? 0.0 : it->second.first / static_cast<double>(it->second.second);
    };

    fit.fitted = Matrix(g.rows(), g.cols());
    for (std::size_t a = 0; a < g.rows(); ++a)
        for (std::size_t b = 0; b < g.cols(); ++b) {
            const auto c = class_of(a, b);
            fit.fitted(a, b) = mean(c.first, c.second.first, c.second.second);
        }
    fit.parameter_count = acc.size();

    if (shared) {
        fit.alpha_diag = {mean(0, 0, 0)};
        fit.beta_diag = {mean(1, 0, 0)};
        fit.alpha_off = mean(2, 0, 0);
        fit.beta_off = mean(3, 0, 0);
    } else {
        for (std::size_t i = 0; i < r; ++i) {
            fit.alpha_diag.push_back(mean(0, i, i));
            fit.beta_diag.push_back(mean(1, i, i));
            for (std::size_t j = i + 1; j < r; ++j) fit.kappa[{i, j}] = mean(4, i, j);
        }
    }
    const double norm = frobenius_norm(g);
    fit.relative_residual = norm > 0.0 ? frobenius_norm(g - fit.fitted) / norm : 0.0;
    return fit;
}

}  // namespace symlab
