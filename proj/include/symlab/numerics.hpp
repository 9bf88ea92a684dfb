#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "symlab/matrix.hpp"

namespace symlab {

using Complex = std::complex<double>;
using ComplexVector = std::vector<Complex>;

struct SvdResult {
    Matrix u;                    // rows x r, orthonormal columns
    Vector singular_values;      // nonincreasing, length r
    Matrix v;                    // cols x r, orthonormal columns

    std::size_t rank() const noexcept { return singular_values.size(); }
    Matrix reconstruct() const;
};

/// Compact SVD by one-sided (Hestenes) Jacobi rotations. Singular values not
/// exceeding rank_tol * s_max are dropped together with their vectors.
SvdResult svd_compact(const Matrix& a, double rank_tol = 1e-10);

/// All min(rows, cols) singular values, nonincreasing, zeros included.
Vector singular_values(const Matrix& a);

struct EigResult {
    Vector values;   // nonincreasing
    Matrix vectors;  // column k pairs with values[k]
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
EigResult sym_eig(const Matrix& a);

/// Same as sym_eig but rotates a into `basis` first. When basis nearly
/// diagonalizes a (consecutive iterates of a solver), only a sweep or two of
/// rotations remain.
EigResult sym_eig_warm(const Matrix& a, const Matrix& basis);

/// lambda_k = sum_l x_l w^{kl}, w = exp(-2 pi i / m), 0-based indices.
ComplexVector dft(std::span<const double> x);

/// Inverse of dft for conjugate-symmetric spectra. Rejects spectra whose
/// inverse would not be real.
Vector idft(const ComplexVector& c);

/// Symmetric PSD square root. Small negative eigenvalues from rounding are
/// clamped to zero; clearly indefinite input raises NotPsd.
Matrix principal_sqrt_psd(const Matrix& a);

double nuclear_norm(const Matrix& a);
double operator_norm(const Matrix& a);

/// Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped).
Matrix psd_project(const Matrix& a);

/// Euclidean projection of a nonnegative vector onto {x >= 0, sum x <= budget}
/// by soft thresholding. Returns the threshold through `tau` when provided.
Vector project_l1_nonneg(std::span<const double> magnitudes, double budget,
                         double* tau = nullptr);

/// Projects c onto {sum |c_k| <= budget} keeping every phase.
ComplexVector simplex_project_magnitudes(const ComplexVector& c, double budget);

/// Throws InvalidInput when a is not square or its asymmetry exceeds
/// rel_tol * max(1, max |a_ij|).
void require_symmetric(const Matrix& a, double rel_tol, const char* context);

/// How to pick the free partial isometry Q (d x r, orthonormal columns) in
/// factor constructions: the first r columns of I_d, or a random draw.
struct QMode {
    bool random = false;
    std::uint64_t seed = 0;

    static QMode canonical() { return {}; }
    static QMode random_with_seed(std::uint64_t seed) { return {true, seed}; }
};

Matrix partial_isometry(std::size_t d, std::size_t r, const QMode& mode);

Matrix random_gaussian(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                       double stddev = 1.0);
/// Haar-like orthogonal matrix from Gram-Schmidt on a Gaussian draw.
Matrix random_orthogonal(std::size_t n, std::mt19937_64& rng);

}  // namespace symlab
