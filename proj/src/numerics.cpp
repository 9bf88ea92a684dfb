#include "symlab/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "symlab/error.hpp"

namespace symlab {
namespace {

constexpr int kMaxSweeps = 100;

void require_finite(const Matrix& a, const char* context) {
    if (!a.all_finite()) throw InvalidInput(std::string(context) + ": non-finite input");
}

// Hestenes one-sided Jacobi on the columns of `work` (rows >= cols). On exit
// the columns of `work` are mutually orthogonal and `v` accumulates the
// rotations so that a = work * v^T.
void hestenes(Matrix& work, Matrix& v) {
    const std::size_t n = work.cols();
    const std::size_t m = work.rows();
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            for (std::size_t j = i + 1; j < n; ++j) {
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    const double wi = work(k, i), wj = work(k, j);
                    alpha += wi * wi;
                    beta += wj * wj;
                    gamma += wi * wj;
                }
                if (gamma == 0.0 || std::abs(gamma) <= 1e-15 * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = c * t;
                for (std::size_t k = 0; k < m; ++k) {
                    const double wi = work(k, i), wj = work(k, j);
                    work(k, i) = c * wi - s * wj;
                    work(k, j) = s * wi + c * wj;
                }
                for (std::size_t k = 0; v.cols() != 0 && k < v.rows(); ++k) {
                    const double vi = v(k, i), vj = v(k, j);
                    v(k, i) = c * vi - s * vj;
                    v(k, j) = s * vi + c * vj;
                }
            }
        }
        if (!rotated) return;
    }
}

// Cyclic Jacobi on a symmetric matrix in place; accumulates rotations into q.
void jacobi_eig_inplace(Matrix& a, Matrix& q) {
    const std::size_t n = a.rows();
    const double scale = frobenius_norm(a);
    if (scale == 0.0) return;
    const double target = 1e-14 * scale;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t r = p + 1; r < n; ++r) off += 2.0 * a(p, r) * a(p, r);
        if (std::sqrt(off) <= target) return;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t r = p + 1; r < n; ++r) {
                const double apr = a(p, r);
                if (std::abs(apr) <= 1e-300) continue;
                const double theta = (a(r, r) - a(p, p)) / (2.0 * apr);
                const double t =
                    std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
                const double c = 1.0 / std::hypot(1.0, t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p), akr = a(k, r);
                    a(k, p) = c * akp - s * akr;
                    a(k, r) = s * akp + c * akr;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k), ark = a(r, k);
                    a(p, k) = c * apk - s * ark;
                    a(r, k) = s * apk + c * ark;
                }
                a(p, r) = 0.0;
                a(r, p) = 0.0;
                for (std::size_t k = 0; k < n; ++k) {
                    const double qkp = q(k, p), qkr = q(k, r);
                    q(k, p) = c * qkp - s * qkr;
                    q(k, r) = s * qkp + c * qkr;
                }
            }
        }
    }
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
        for (std::size_t r = p + 1; r < n; ++r) off += 2.0 * a(p, r) * a(p, r);
    if (std::sqrt(off) > 1e-12 * scale)
        throw SolverFailure("Jacobi eigensolver did not converge", std::sqrt(off) / scale);
}

EigResult sorted_eig(const Matrix& diagonalized, const Matrix& q) {
    const std::size_t n = diagonalized.rows();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
        return diagonalized(x, x) > diagonalized(y, y);
    });
    EigResult out{Vector(n), Matrix(n, n)};
    for (std::size_t k = 0; k < n; ++k) {
        out.values[k] = diagonalized(order[k], order[k]);
        for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = q(i, order[k]);
    }
    return out;
}

Matrix reassemble(const EigResult& e, const Vector& values) {
    const std::size_t n = values.size();
    Matrix out(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        if (values[k] == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const double qik = e.vectors(i, k) * values[k];
            for (std::size_t j = 0; j < n; ++j) out(i, j) += qik * e.vectors(j, k);
        }
    }
    return symmetrized(out);
}

}  // namespace

Matrix SvdResult::reconstruct() const {
    Matrix us = u;
    for (std::size_t i = 0; i < us.rows(); ++i)
        for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= singular_values[k];
    return multiply_abt(us, v);
}

SvdResult svd_compact(const Matrix& a, double rank_tol) {
    require_finite(a, "svd_compact");
    if (!(rank_tol > 0.0)) throw InvalidInput("svd_compact: rank_tol must be positive");
    const bool flip = a.rows() < a.cols();
    Matrix work = flip ? a.transpose() : a;
    Matrix v = Matrix::identity(work.cols());
    hestenes(work, v);

    const std::size_t n = work.cols();
    Vector norms(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < work.rows(); ++k) s += work(k, j) * work(k, j);
        norms[j] = std::sqrt(s);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

    const double smax = n == 0 ? 0.0 : norms[order[0]];
    std::size_t r = 0;
    while (r < n && smax > 0.0 && norms[order[r]] > rank_tol * smax) ++r;

    Matrix left(work.rows(), r), right(v.rows(), r);
    Vector s(r);
    for (std::size_t k = 0; k < r; ++k) {
        const std::size_t j = order[k];
        s[k] = norms[j];
        for (std::size_t i = 0; i < work.rows(); ++i) left(i, k) = work(i, j) / norms[j];
        for (std::size_t i = 0; i < v.rows(); ++i) right(i, k) = v(i, j);
    }
    if (flip) return SvdResult{std::move(right), std::move(s), std::move(left)};
    return SvdResult{std::move(left), std::move(s), std::move(right)};
}

Vector singular_values(const Matrix& a) {
    require_finite(a, "singular_values");
    Matrix work = a.rows() < a.cols() ? a.transpose() : a;
    Matrix v(work.cols(), 0);
    hestenes(work, v);
    Vector s(work.cols());
    for (std::size_t j = 0; j < work.cols(); ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < work.rows(); ++k) acc += work(k, j) * work(k, j);
        s[j] = std::sqrt(acc);
    }
    std::sort(s.begin(), s.end(), std::greater<>());
    return s;
}

void require_symmetric(const Matrix& a, double rel_tol, const char* context) {
    if (!a.is_square()) throw InvalidInput(std::string(context) + ": matrix is not square");
    double scale = 1.0;
    for (double v : a.data()) scale = std::max(scale, std::abs(v));
    if (asymmetry(a) > rel_tol * scale)
        throw InvalidInput(std::string(context) + ": matrix is not symmetric");
}

EigResult sym_eig(const Matrix& a) {
    require_finite(a, "sym_eig");
    require_symmetric(a, 1e-10, "sym_eig");
    Matrix work = symmetrized(a);
    Matrix q = Matrix::identity(a.rows());
    jacobi_eig_inplace(work, q);
    return sorted_eig(work, q);
}

EigResult sym_eig_warm(const Matrix& a, const Matrix& basis) {
    require_finite(a, "sym_eig_warm");
    require_symmetric(a, 1e-10, "sym_eig_warm");
    if (basis.rows() != a.rows() || basis.cols() != a.cols())
        throw InvalidInput("sym_eig_warm: basis shape mismatch");
    Matrix work = symmetrized(multiply_atb(basis, a * basis));
    Matrix q = basis;
    jacobi_eig_inplace(work, q);
    return sorted_eig(work, q);
}

ComplexVector dft(std::span<const double> x) {
    const std::size_t m = x.size();
    if (m == 0) throw InvalidInput("dft: empty input");
    ComplexVector out(m);
    for (std::size_t k = 0; k < m; ++k) {
        Complex acc = 0.0;
        for (std::size_t l = 0; l < m; ++l) {
            const double angle =
                -2.0 * std::numbers::pi * static_cast<double>((k * l) % m) / static_cast<double>(m);
            acc += x[l] * Complex(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

Vector idft(const ComplexVector& c) {
    const std::size_t m = c.size();
    if (m == 0) throw InvalidInput("idft: empty input");
    double scale = 1.0;
    for (const auto& v : c) {
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag()))
            throw InvalidInput("idft: non-finite input");
        scale = std::max(scale, std::abs(v));
    }
    for (std::size_t k = 0; k < m; ++k) {
        const std::size_t mirror = (m - k) % m;
        if (std::abs(c[k] - std::conj(c[mirror])) > 1e-9 * scale)
            throw InvalidInput("idft: spectrum is not conjugate-symmetric");
    }
    Vector out(m);
    for (std::size_t l = 0; l < m; ++l) {
        double acc = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double angle =
                2.0 * std::numbers::pi * static_cast<double>((k * l) % m) / static_cast<double>(m);
            acc += c[k].real() * std::cos(angle) - c[k].imag() * std::sin(angle);
        }
        out[l] = acc / static_cast<double>(m);
    }
    return out;
}

Matrix principal_sqrt_psd(const Matrix& a) {
    EigResult e = sym_eig(a);
    const double opnorm = e.values.empty()
                              ? 0.0
                              : std::max(std::abs(e.values.front()), std::abs(e.values.back()));
    if (!e.values.empty() && e.values.back() < -1e-6 * opnorm)
        throw NotPsd("principal_sqrt_psd: minimum eigenvalue " + std::to_string(e.values.back()));
    // Eigenvalues at the rounding floor carry no information; taking their
    // square root would amplify eps-level noise to sqrt(eps).
    const double floor = 1e-14 * static_cast<double>(e.values.size()) * opnorm;
    Vector roots(e.values.size());
    for (std::size_t k = 0; k < roots.size(); ++k)
        roots[k] = e.values[k] > floor ? std::sqrt(e.values[k]) : 0.0;
    return reassemble(e, roots);
}

double nuclear_norm(const Matrix& a) {
    const Vector s = singular_values(a);
    return std::accumulate(s.begin(), s.end(), 0.0);
}

double operator_norm(const Matrix& a) {
    const Vector s = singular_values(a);
    return s.empty() ? 0.0 : s.front();
}

Matrix psd_project(const Matrix& a) {
    EigResult e = sym_eig(a);
    Vector clipped(e.values.size());
    for (std::size_t k = 0; k < clipped.size(); ++k) clipped[k] = std::max(0.0, e.values[k]);
    return reassemble(e, clipped);
}

Vector project_l1_nonneg(std::span<const double> magnitudes, double budget, double* tau) {
    if (!(budget > 0.0)) throw InvalidInput("projection budget must be positive");
    Vector out(magnitudes.begin(), magnitudes.end());
    const double total = std::accumulate(out.begin(), out.end(), 0.0);
    if (total <= budget) {
        if (tau) *tau = 0.0;
        return out;
    }
    Vector sorted = out;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    double cumulative = 0.0;
    double threshold = 0.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        cumulative += sorted[k];
        const double candidate = (cumulative - budget) / static_cast<double>(k + 1);
        if (k + 1 == sorted.size() || sorted[k + 1] <= candidate) {
            threshold = candidate;
            break;
        }
    }
    for (double& v : out) v = std::max(0.0, v - threshold);
    if (tau) *tau = threshold;
    return out;
}

ComplexVector simplex_project_magnitudes(const ComplexVector& c, double budget) {
    if (!(budget > 0.0)) throw InvalidInput("simplex_project_magnitudes: budget must be positive");
    Vector mags(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) mags[k] = std::abs(c[k]);
    const Vector shrunk = project_l1_nonneg(mags, budget);
    ComplexVector out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        out[k] = mags[k] > 0.0 ? c[k] * (shrunk[k] / mags[k]) : Complex(0.0, 0.0);
    return out;
}

Matrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double stddev) {
    std::normal_distribution<double> normal(0.0, stddev);
    Matrix out(rows, cols);
    for (double& v : out.data()) v = normal(rng);
    return out;
}

Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng) {
    Matrix q = random_gaussian(n, n, rng);
    for (std::size_t j = 0; j < n; ++j) {
        for (int pass = 0; pass < 2; ++pass) {
            for (std::size_t p = 0; p < j; ++p) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += q(i, j) * q(i, p);
                for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, p);
            }
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
    }
    return q;
}

Matrix partial_isometry(std::size_t d, std::size_t r, const QMode& mode) {
    if (r > d) throw InvalidInput("partial_isometry: r exceeds d");
    if (!mode.random) {
        Matrix q(d, r);
        for (std::size_t k = 0; k < r; ++k) q(k, k) = 1.0;
        return q;
    }
    std::mt19937_64 rng(mode.seed);
    return random_orthogonal(d, rng).col_block(0, r);
}

}  // namespace symlab
