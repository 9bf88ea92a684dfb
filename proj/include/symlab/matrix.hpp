#pragma once

#include <cstddef>
#include <initializer_list>
#include <iosfwd>
#include <span>
#include <vector>

namespace symlab {

using Vector = std::vector<double>;

/// Dense real matrix stored row-major.
///
/// Constructors that accept external data reject non-finite entries, so a
/// Matrix built from a file or a caller-provided buffer is always finite.
/// Element access is unchecked in release builds.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(std::size_t n);
    static Matrix ones(std::size_t rows, std::size_t cols);
    static Matrix diagonal(std::span<const double> d);
    static Matrix from_columns(const std::vector<Vector>& columns);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Vector col(std::size_t j) const;
    Vector row(std::size_t i) const;
    void set_col(std::size_t j, std::span<const double> values);
    Vector diag() const;

    /// Columns [first, first + count).
    Matrix col_block(std::size_t first, std::size_t count) const;
    /// Sub-matrix starting at (r0, c0).
    Matrix block(std::size_t r0, std::size_t c0, std::size_t nrows, std::size_t ncols) const;
    void set_block(std::size_t r0, std::size_t c0, const Matrix& src);

    Matrix transpose() const;
    bool all_finite() const noexcept;

    Matrix& operator+=(const Matrix& other);
    Matrix& operator-=(const Matrix& other);
    Matrix& operator*=(double s) noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix& b);
Matrix operator-(Matrix a, const Matrix& b);
Matrix operator-(Matrix a);
Matrix operator*(Matrix a, double s);
Matrix operator*(double s, Matrix a);
Matrix operator*(const Matrix& a, const Matrix& b);
Vector operator*(const Matrix& a, std::span<const double> x);

/// a * b^T without materializing the transpose.
Matrix multiply_abt(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix multiply_atb(const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a) noexcept;
double frobenius_norm_sq(const Matrix& a) noexcept;
double frobenius_dot(const Matrix& a, const Matrix& b);
double trace(const Matrix& a);
/// Largest |a_ij - a_ji|.
double asymmetry(const Matrix& a);
Matrix symmetrized(const Matrix& a);
/// ||a - b||_F / ||b||_F, or ||a - b||_F when b is zero.
double relative_error(const Matrix& a, const Matrix& b);
double max_abs_diff(const Matrix& a, const Matrix& b);

/// I - J/n, the projector onto the complement of the all-ones vector.
Matrix centering_projector(std::size_t n);

std::ostream& operator<<(std::ostream& os, const Matrix& a);

}  // namespace symlab
