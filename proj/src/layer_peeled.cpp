#include "symlab/layer_peeled.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <random>
#include <thread>

#include "symlab/error.hpp"
#include "symlab/numerics.hpp"

namespace symlab {
namespace {

// log-sum-exp of column j and the column's softmax written into `probs`.
double column_lse(const Matrix& z, std::size_t j, double* probs) {
    const std::size_t m = z.rows();
    double zmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) zmax = std::max(zmax, z(i, j));
    double sum = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double e = std::exp(z(i, j) - zmax);
        if (probs) probs[i] = e;
        sum += e;
    }
    if (probs)
        for (std::size_t i = 0; i < m; ++i) probs[i] /= sum;
    return zmax + std::log(sum);
}

struct RestartOutcome {
    FactorPair factors;
    double objective = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
};

RestartOutcome run_restart(const LayerPeeledProblem& p, const PgdOptions& opt, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint64_t>(opt.seed), static_cast<std::uint64_t>(index)};
    std::mt19937_64 rng(seq);

    FactorPair x{random_gaussian(p.m(), p.d, rng), random_gaussian(p.d, p.n(), rng)};
    x.w *= std::sqrt(0.5 * p.e_w) / std::max(frobenius_norm(x.w), 1e-300);
    x.h *= std::sqrt(0.5 * p.e_h) / std::max(frobenius_norm(x.h), 1e-300);

    Matrix resid;
    double f = cross_entropy_with_gradient(x.logits(), p.y, resid);
    double step = opt.step.initial;
    std::vector<double> history{f};
    RestartOutcome out;

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        if (opt.stop.stop_requested()) break;
        const Matrix gw = multiply_abt(resid, x.h);
        const Matrix gh = multiply_atb(x.w, resid);

        FactorPair trial;
        double f_trial = 0.0;
        Matrix resid_trial;
        bool accepted = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            trial.w = project_frobenius_ball(x.w - step * gw, p.e_w);
            trial.h = project_frobenius_ball(x.h - step * gh, p.e_h);
            f_trial = cross_entropy_with_gradient(trial.logits(), p.y, resid_trial);
            if (!std::isfinite(f_trial))
                throw SolverFailure("objective became non-finite", f_trial, index);
            const Matrix dw = trial.w - x.w;
            const Matrix dh = trial.h - x.h;
            const double model = f + frobenius_dot(gw, dw) + frobenius_dot(gh, dh) +
                                 (frobenius_norm_sq(dw) + frobenius_norm_sq(dh)) / (2.0 * step);
            if (f_trial <= model + 1e-15 * std::abs(f)) {
                accepted = true;
                break;
            }
            step *= opt.step.backtrack;
        }
        ++out.iterations;
        if (!accepted || f_trial > f) {
            // Line search exhausted: the iterate is stationary to working precision.
            out.converged = true;
            break;
        }
        x = std::move(trial);
        f = f_trial;
        resid = std::move(resid_trial);
        step *= opt.step.growth;

        history.push_back(f);
        if (history.size() > opt.window) {
            const double old = history[history.size() - 1 - opt.window];
            if (old - f <= opt.rel_tol * std::max(1.0, std::abs(f))) {
                out.converged = true;
                break;
            }
            if (history.size() > 4 * opt.window)
                history.erase(history.begin(), history.end() - static_cast<std::ptrdiff_t>(opt.window) - 1);
        }
    }
    out.factors = std::move(x);
    out.objective = f;
    return out;
}

}  // namespace

void require_distribution_columns(const Matrix& y, double tol, const char* context) {
    for (std::size_t j = 0; j < y.cols(); ++j) {
        double sum = 0.0;
        for (std::size_t i = 0; i < y.rows(); ++i) {
            if (y(i, j) < -tol)
                throw InvalidInput(std::string(context) + ": column " + std::to_string(j) +
                                   " has a negative entry");
            sum += y(i, j);
        }
        if (std::abs(sum - 1.0) > tol)
            throw InvalidInput(std::string(context) + ": column " + std::to_string(j) +
                               " sums to " + std::to_string(sum));
    }
}

void LayerPeeledProblem::validate() const {
    if (y.empty()) throw InvalidInput("layer-peeled problem: empty target");
    require_distribution_columns(y, 1e-12, "layer-peeled problem");
    if (!(e_w > 0.0) || !(e_h > 0.0)) throw InvalidInput("layer-peeled problem: budgets must be positive");
    if (d == 0) throw InvalidInput("layer-peeled problem: d must be at least 1");
}

Matrix softmax_columns(const Matrix& z) {
    Matrix out(z.rows(), z.cols());
    std::vector<double> probs(z.rows());
    for (std::size_t j = 0; j < z.cols(); ++j) {
        column_lse(z, j, probs.data());
        out.set_col(j, probs);
    }
    return out;
}

double cross_entropy(const Matrix& z, const Matrix& y) {
    if (z.rows() != y.rows() || z.cols() != y.cols())
        throw InvalidInput("cross_entropy: logits and targets differ in shape");
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
        double dot = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) dot += y(i, j) * z(i, j);
        total += column_lse(z, j, nullptr) - dot;
    }
    return total;
}

double cross_entropy_with_gradient(const Matrix& z, const Matrix& y, Matrix& grad) {
    if (z.rows() != y.rows() || z.cols() != y.cols())
        throw InvalidInput("cross_entropy: logits and targets differ in shape");
    grad = Matrix(z.rows(), z.cols());
    std::vector<double> probs(z.rows());
    double total = 0.0;
    for (std::size_t j = 0; j < z.cols(); ++j) {
        const double lse = column_lse(z, j, probs.data());
        double dot = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) {
            dot += y(i, j) * z(i, j);
            grad(i, j) = probs[i] - y(i, j);
        }
        total += lse - dot;
    }
    return total;
}

double entropy_floor(const Matrix& y) {
    double total = 0.0;
    for (double v : y.data())
        if (v > 0.0) total -= v * std::log(v);
    return total;
}

double objective(const LayerPeeledProblem& p, const FactorPair& f) {
    return cross_entropy(f.logits(), p.y);
}

Gradients gradients(const LayerPeeledProblem& p, const FactorPair& f) {
    Matrix resid;
    cross_entropy_with_gradient(f.logits(), p.y, resid);
    return {multiply_abt(resid, f.h), multiply_atb(f.w, resid)};
}

Matrix project_frobenius_ball(const Matrix& a, double budget_sq) {
    if (!(budget_sq > 0.0)) throw InvalidInput("project_frobenius_ball: budget must be positive");
    const double norm_sq = frobenius_norm_sq(a);
    if (norm_sq <= budget_sq) return a;
    return a * std::sqrt(budget_sq / norm_sq);
}

SolveReport solve_pgd(const LayerPeeledProblem& p, const PgdOptions& options) {
    p.validate();
    if (options.restarts == 0) throw InvalidInput("solve_pgd: restarts must be at least 1");
    if (!(options.step.initial > 0.0) || !(options.step.backtrack > 0.0 && options.step.backtrack < 1.0) ||
        !(options.step.growth >= 1.0))
        throw InvalidInput("solve_pgd: invalid step schedule");

    const std::size_t r = options.restarts;
    std::vector<RestartOutcome> outcomes(r);
    std::vector<std::exception_ptr> errors(r);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < r; i = next++) {
            try {
                outcomes[i] = run_restart(p, options, i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    unsigned threads = options.threads ? options.threads : std::thread::hardware_concurrency();
    threads = std::clamp<unsigned>(threads, 1, static_cast<unsigned>(r));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    SolveReport report;
    for (std::size_t i = 0; i < r; ++i) {
        report.restart_objectives.push_back(outcomes[i].objective);
        report.iterations.push_back(outcomes[i].iterations);
        report.converged.push_back(outcomes[i].converged);
        if (outcomes[i].objective < outcomes[report.best_restart].objective) report.best_restart = i;
    }
    const auto [lo, hi] =
        std::minmax_element(report.restart_objectives.begin(), report.restart_objectives.end());
    report.consensus_gap = *hi - *lo;
    report.best = std::move(outcomes[report.best_restart].factors);
    report.objective = objective(p, report.best);
    report.constraint_activity = {frobenius_norm_sq(report.best.w) / p.e_w,
                                  frobenius_norm_sq(report.best.h) / p.e_h};
    return report;
}

}  // namespace symlab
