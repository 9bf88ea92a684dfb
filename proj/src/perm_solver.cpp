#include "symlab/perm_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "symlab/error.hpp"

namespace symlab {
namespace {

bool is_uniform(const Vector& y) {
    const double u = 1.0 / static_cast<double>(y.size());
    return std::all_of(y.begin(), y.end(), [u](double v) { return std::abs(v - u) <= 1e-12; });
}

double mean_log(const Vector& a) {
    double s = 0.0;
    for (double v : a) s += std::log(v);
    return s / static_cast<double>(a.size());
}

// psi(a) = -(k/2) ||a - y||^2 - sum a log a, strictly concave on the simplex.
double psi(const Vector& a, const Vector& y, double k) {
    double out = 0.0;
    for (std::size_t l = 0; l < a.size(); ++l) {
        const double d = a[l] - y[l];
        out -= 0.5 * k * d * d + a[l] * std::log(a[l]);
    }
    return out;
}

// Entries of k (a - y) + log a measured from their mean. Zero exactly at the
// maximizer of psi over the simplex.
Vector stationarity_gap(const Vector& a, const Vector& y, double k) {
    const std::size_t m = a.size();
    Vector g(m);
    double mean = 0.0;
    for (std::size_t l = 0; l < m; ++l) {
        g[l] = k * (a[l] - y[l]) + std::log(a[l]);
        mean += g[l];
    }
    mean /= static_cast<double>(m);
    for (double& v : g) v -= mean;
    return g;
}

double max_abs(const Vector& v) {
    double out = 0.0;
    for (double x : v) out = std::max(out, std::abs(x));
    return out;
}

// Damped Newton on the reduced coordinates: the largest entry is eliminated
// through the simplex constraint and the Hessian -(D + d_p 1 1^T) is inverted
// with Sherman-Morrison.
Vector maximize_block(const Vector& y, double k, Vector a, std::size_t max_iter) {
    const std::size_t m = y.size();
    for (std::size_t it = 0; it < max_iter; ++it) {
        const std::size_t p = static_cast<std::size_t>(std::max_element(a.begin(), a.end()) - a.begin());
        // Gradient of psi in direction e_l - e_p.
        Vector grad(m, 0.0), dinv(m, 0.0);
        const double gp = -k * (a[p] - y[p]) - std::log(a[p]);
        for (std::size_t l = 0; l < m; ++l) {
            if (l == p) continue;
            grad[l] = -k * (a[l] - y[l]) - std::log(a[l]) - gp;
            dinv[l] = 1.0 / (k + 1.0 / a[l]);
        }
        const double gnorm = max_abs(grad);
        if (gnorm <= 1e-15 * (1.0 + k)) break;
        const double dp = k + 1.0 / a[p];
        double s_grad = 0.0, s_one = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            if (l == p) continue;
            s_grad += dinv[l] * grad[l];
            s_one += dinv[l];
        }
        const double coef = dp * s_grad / (1.0 + dp * s_one);
        Vector dir(m, 0.0);
        double total = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            if (l == p) continue;
            dir[l] = dinv[l] * grad[l] - dinv[l] * coef;
            total += dir[l];
        }
        dir[p] = -total;

        double t = 1.0;
        for (std::size_t l = 0; l < m; ++l)
            if (dir[l] < 0.0) t = std::min(t, 0.95 * a[l] / -dir[l]);
        const double base = psi(a, y, k);
        Vector next(m);
        bool moved = false;
        for (int attempt = 0; attempt < 60; ++attempt) {
            for (std::size_t l = 0; l < m; ++l) next[l] = a[l] + t * dir[l];
            if (std::all_of(next.begin(), next.end(), [](double v) { return v > 0.0; })) {
                const double value = psi(next, y, k);
                if (value >= base - 1e-15 * std::abs(base) ||
                    max_abs(stationarity_gap(next, y, k)) < max_abs(stationarity_gap(a, y, k))) {
                    moved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if (!moved) break;
        // Keep the sum exact; the eliminated coordinate absorbs rounding.
        double rest = 0.0;
        for (std::size_t l = 0; l < m; ++l)
            if (l != p) rest += next[l];
        next[p] = 1.0 - rest;
        if (next[p] <= 0.0) break;
        a = std::move(next);
    }
    return a;
}

struct OuterState {
    std::vector<Vector> alphas;
    double gamma = 0.0;
};

double gamma_of(const std::vector<AlphaBlock>& blocks, const std::vector<Vector>& alphas) {
    const std::size_t m = blocks.front().y.size();
    double s = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i)
        for (std::size_t l = 0; l < m; ++l) {
            const double d = alphas[i][l] - blocks[i].y[l];
            s += blocks[i].weight * d * d;
        }
    return std::sqrt(s / static_cast<double>(m - 1));
}

void validate_blocks(const std::vector<AlphaBlock>& blocks) {
    if (blocks.empty()) throw InvalidInput("alpha system: no blocks");
    const std::size_t m = blocks.front().y.size();
    if (m < 2) throw InvalidInput("alpha system: need at least two classes");
    for (const auto& b : blocks) {
        if (b.y.size() != m) throw InvalidInput("alpha system: block lengths differ");
        if (!(b.weight > 0.0)) throw InvalidInput("alpha system: block weights must be positive");
        require_distribution_columns(Matrix::from_columns({b.y}), 1e-12, "alpha system");
    }
}

}  // namespace

double alpha_system_capacity(const std::vector<AlphaBlock>& blocks) {
    validate_blocks(blocks);
    double total = 0.0;
    for (const auto& b : blocks) {
        if (is_uniform(b.y)) continue;
        if (std::any_of(b.y.begin(), b.y.end(), [](double v) { return v <= 0.0; }))
            return std::numeric_limits<double>::infinity();
        const double mean = mean_log(b.y);
        for (double v : b.y) total += b.weight * (std::log(v) - mean) * (std::log(v) - mean);
    }
    return total;
}

AlphaCertificate solve_alpha(const std::vector<AlphaBlock>& blocks, double e_w, double e_h,
                             const AlphaOptions& options) {
    validate_blocks(blocks);
    if (!(e_w > 0.0) || !(e_h > 0.0)) throw InvalidInput("solve_alpha: budgets must be positive");
    if (std::all_of(blocks.begin(), blocks.end(), [](const AlphaBlock& b) { return is_uniform(b.y); }))
        throw HypothesisViolated("every block base is uniform; gamma vanishes and k is undefined");

    const std::size_t m = blocks.front().y.size();
    const double target = std::sqrt(e_w * e_h) / static_cast<double>(m - 1);
    const double demand = e_w * e_h / static_cast<double>(m - 1);
    const double capacity = alpha_system_capacity(blocks);
    if (demand >= capacity)
        throw HypothesisViolated(
            "budget product e_w*e_h/(m-1) = " + std::to_string(demand) +
            " reaches the capacity " + std::to_string(capacity) +
            " of the targets; they are attained at the entropy floor and the stationarity "
            "system has no solution");

    std::vector<Vector> start;
    for (const auto& b : blocks) {
        Vector a(m);
        for (std::size_t l = 0; l < m; ++l) a[l] = 0.9 * b.y[l] + 0.1 / static_cast<double>(m);
        start.push_back(std::move(a));
    }

    // F(u) = k gamma(k) - target with k = exp(u); increasing in u.
    std::vector<Vector> warm = start;
    auto evaluate = [&](double u, OuterState& st) {
        const double k = std::exp(u);
        st.alphas.resize(blocks.size());
        for (std::size_t i = 0; i < blocks.size(); ++i)
            st.alphas[i] = maximize_block(blocks[i].y, k, warm[i], options.max_inner);
        warm = st.alphas;
        st.gamma = gamma_of(blocks, st.alphas);
        return k * st.gamma - target;
    };

    std::size_t evals = 0;
    OuterState state;
    double u0 = std::log(target / std::max(gamma_of(blocks, start), 1e-300));
    double f0 = evaluate(u0, state);
    ++evals;
    double lo = u0, flo = f0, hi = u0, fhi = f0;
    while (flo > 0.0) {
        lo -= 2.0;
        warm = start;
        flo = evaluate(lo, state);
        if (++evals > options.max_outer) throw SolverFailure("could not bracket k from below", flo);
    }
    while (fhi < 0.0) {
        hi += 2.0;
        fhi = evaluate(hi, state);
        if (++evals > options.max_outer || hi > std::log(1e15))
            throw SolverFailure("could not bracket k from above", fhi);
    }

    // Illinois variant of regula falsi, falling back to bisection when the
    // secant point lands too close to an end of the bracket.
    double u = hi, fu = fhi;
    int side = 0;
    while (hi - lo > 1e-15 * std::max(1.0, std::abs(hi)) && fu != 0.0) {
        if (++evals > options.max_outer) throw SolverFailure("k iteration did not converge", fu);
        double cand = hi - fhi * (hi - lo) / (fhi - flo);
        const double width = hi - lo;
        if (!(cand > lo + 1e-3 * width && cand < hi - 1e-3 * width)) cand = 0.5 * (lo + hi);
        u = cand;
        fu = evaluate(u, state);
        if (std::abs(fu) <= 1e-15 * target) break;
        if (fu < 0.0) {
            lo = u;
            flo = fu;
            if (side == -1) fhi *= 0.5;
            side = -1;
        } else {
            hi = u;
            fhi = fu;
            if (side == 1) flo *= 0.5;
            side = 1;
        }
    }
    if (state.alphas.empty()) evaluate(u, state);

    AlphaCertificate cert;
    cert.alphas = state.alphas;
    cert.gamma = state.gamma;
    // Close the k relation exactly; the stationarity equations absorb the
    // difference, which is at the level of the bracket width.
    cert.k = target / cert.gamma;
    for (const auto& b : blocks) {
        cert.weights.push_back(b.weight);
        cert.bases.push_back(b.y);
    }
    cert.e_w = e_w;
    cert.e_h = e_h;
    cert.outer_iterations = evals;
    cert.residual = alpha_system_residual(cert);
    if (!(cert.residual <= options.tol))
        throw SolverFailure("alpha system residual above tolerance", cert.residual);
    return cert;
}

double alpha_system_residual(const AlphaCertificate& cert) {
    const std::size_t m = cert.bases.front().size();
    double worst = 0.0;
    for (std::size_t i = 0; i < cert.alphas.size(); ++i)
        worst = std::max(worst, max_abs(stationarity_gap(cert.alphas[i], cert.bases[i], cert.k)));
    for (const auto& a : cert.alphas) {
        const double sum = std::accumulate(a.begin(), a.end(), 0.0);
        worst = std::max(worst, std::abs(sum - 1.0));
    }
    std::vector<AlphaBlock> blocks;
    for (std::size_t i = 0; i < cert.bases.size(); ++i) blocks.push_back({cert.weights[i], cert.bases[i]});
    const double gamma = gamma_of(blocks, cert.alphas);
    worst = std::max(worst, std::abs(gamma - cert.gamma) / cert.gamma);
    const double k = std::sqrt(cert.e_w * cert.e_h) / (static_cast<double>(m - 1) * cert.gamma);
    worst = std::max(worst, std::abs(k - cert.k) / k);
    return worst;
}

double phi(const std::vector<AlphaBlock>& blocks, const std::vector<Vector>& alphas, double e_w,
           double e_h) {
    if (alphas.size() != blocks.size()) throw InvalidInput("phi: one alpha per block expected");
    double entropy = 0.0;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        double h = 0.0;
        for (double a : alphas[i])
            if (a > 0.0) h -= a * std::log(a);
        entropy += blocks[i].weight * h;
    }
    return -std::sqrt(e_w * e_h) * gamma_of(blocks, alphas) + entropy;
}

std::vector<AlphaBlock> alpha_blocks(const TargetSpec& target, const OrbitMatrix& orbit) {
    if (orbit.block_columns.size() != target.blocks.size())
        throw InvalidInput("alpha_blocks: orbit does not belong to this target");
    std::vector<AlphaBlock> out;
    for (std::size_t i = 0; i < target.blocks.size(); ++i) {
        const auto& b = target.blocks[i];
        if (!is_uniform(b.base) && !is_two_transitive(b.group))
            throw HypothesisViolated("block " + std::to_string(i) + " group " + b.group.describe() +
                                     " is not 2-transitive");
        out.push_back({static_cast<double>(orbit.block_columns[i]), b.base});
    }
    return out;
}

Matrix build_residual(const AlphaCertificate& cert, const OrbitMatrix& orbit) {
    const std::size_t m = orbit.y.rows();
    if (orbit.labels.size() != orbit.y.cols())
        throw InvalidInput("build_residual: label count does not match the columns");
    Matrix c(m, orbit.y.cols());
    for (std::size_t j = 0; j < orbit.labels.size(); ++j) {
        const auto& label = orbit.labels[j];
        if (label.block >= cert.alphas.size() || label.element.degree() != m)
            throw InvalidInput("build_residual: column label does not fit the certificate");
        const Vector ga = act(label.element, cert.alphas[label.block]);
        const Vector gy = act(label.element, cert.bases[label.block]);
        for (std::size_t i = 0; i < m; ++i) {
            if (std::abs(gy[i] - orbit.y(i, j)) > 1e-12)
                throw InvalidInput("build_residual: column " + std::to_string(j) +
                                   " does not match its group element");
            c(i, j) = ga[i] - gy[i];
        }
    }
    return c;
}

EtfSolution construct_solution(const AlphaCertificate& cert, const OrbitMatrix& orbit,
                               std::size_t d, const QMode& q_mode) {
    const std::size_t m = orbit.y.rows();
    if (d < m) throw InvalidInput("construct_solution: d must be at least m");
    EtfSolution sol;
    sol.certificate = cert;
    sol.c = build_residual(cert, orbit);
    const SvdResult svd = svd_compact(sol.c, 1e-8);
    if (svd.rank() != m - 1)
        throw HypothesisViolated("residual matrix has rank " + std::to_string(svd.rank()) +
                                 ", expected " + std::to_string(m - 1));
    sol.u = svd.u;
    sol.v = svd.v;
    sol.c_singular_values = svd.singular_values;

    const double mm1 = static_cast<double>(m - 1);
    const Matrix q = partial_isometry(d, m - 1, q_mode);
    sol.w = multiply_abt(sol.u, q) * std::sqrt(cert.e_w / mm1);
    sol.h = multiply_abt(q, sol.v) * -std::sqrt(cert.e_h / mm1);
    sol.gram_w = multiply_abt(sol.w, sol.w);
    sol.gram_h = multiply_atb(sol.h, sol.h);
    sol.logits = sol.w * sol.h;
    sol.objective = cross_entropy(sol.logits, orbit.y);

    std::vector<AlphaBlock> blocks;
    for (std::size_t i = 0; i < cert.bases.size(); ++i) blocks.push_back({cert.weights[i], cert.bases[i]});
    sol.lower_bound = phi(blocks, cert.alphas, cert.e_w, cert.e_h);
    return sol;
}

Matrix etf_reference(std::size_t m) {
    if (m < 2) throw InvalidInput("etf_reference: m must be at least 2");
    return centering_projector(m) * std::sqrt(static_cast<double>(m) / static_cast<double>(m - 1));
}

Matrix embedding_projector(const Matrix& w) {
    if (!w.all_finite()) throw InvalidInput("embedding_projector: non-finite input");
    if (frobenius_norm(w) == 0.0) throw InvalidInput("embedding_projector: zero matrix");
    const SvdResult svd = svd_compact(w);
    return multiply_abt(svd.v, svd.u);
}

double orbit_equivariance_error(const Matrix& x, const OrbitMatrix& orbit) {
    if (x.cols() != orbit.labels.size() || x.rows() != orbit.y.rows())
        throw InvalidInput("orbit_equivariance_error: shape does not match the orbit");
    double scale = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, j) * x(i, j);
        scale = std::max(scale, std::sqrt(s));
    }
    if (scale == 0.0) return 0.0;
    double worst = 0.0;
    for (std::size_t a = 0; a < x.cols(); ++a) {
        const Vector xa = x.col(a);
        const Permutation inv = orbit.labels[a].element.inverse();
        for (std::size_t b = 0; b < x.cols(); ++b) {
            if (orbit.labels[a].block != orbit.labels[b].block) continue;
            const Vector moved = act(compose(orbit.labels[b].element, inv), xa);
            for (std::size_t i = 0; i < x.rows(); ++i)
                worst = std::max(worst, std::abs(moved[i] - x(i, b)));
        }
    }
    return worst / scale;
}

double prediction_alpha_error(const EtfSolution& sol, const OrbitMatrix& orbit) {
    const Matrix probs = softmax_columns(sol.logits);
    double worst = 0.0;
    for (std::size_t j = 0; j < orbit.labels.size(); ++j) {
        const auto& label = orbit.labels[j];
        const Vector expected = act(label.element, sol.certificate.alphas[label.block]);
        for (std::size_t i = 0; i < expected.size(); ++i)
            worst = std::max(worst, std::abs(probs(i, j) / expected[i] - 1.0));
    }
    return worst;
}

}  // namespace symlab
