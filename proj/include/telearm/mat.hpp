#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace telearm {

using Vec = std::vector<double>;

/// Small dense row-major matrix. Sizes in this project never exceed ~16x16,
/// so everything is done with plain loops.
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
    Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> row_major);

    static Mat identity(std::size_t n);
    /// Column vector view of v as an n x 1 matrix.
    static Mat column(std::span<const double> v);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }
    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    Vec col(std::size_t c) const;
    void set_col(std::size_t c, std::span<const double> v);

    std::span<const double> data() const noexcept { return data_; }

    Mat transpose() const;
    Mat& operator+=(const Mat& o);
    Mat& operator-=(const Mat& o);
    Mat& operator*=(double s);

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, double s) { return a *= s; }
    friend Mat operator*(double s, Mat a) { return a *= s; }
    friend Mat operator*(const Mat& a, const Mat& b);
    friend Vec operator*(const Mat& a, std::span<const double> v);
    friend bool operator==(const Mat&, const Mat&) = default;

    /// Aᵀ·B without forming the transpose.
    static Mat at_b(const Mat& a, const Mat& b);
    /// Aᵀ·v without forming the transpose.
    static Vec at_v(const Mat& a, std::span<const double> v);

    std::string to_string() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Throws std::domain_error when the matrix is not numerically PD.
class Cholesky {
public:
    explicit Cholesky(const Mat& a);

    Vec solve(std::span<const double> b) const;
    Mat solve(const Mat& b) const;
    const Mat& lower() const noexcept { return l_; }

private:
    Mat l_;
};

/// Solves A·x = b by Gaussian elimination with partial pivoting.
/// Throws std::domain_error when A is singular to working precision.
Vec solve_lu(Mat a, Vec b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
double norm_inf(std::span<const double> v);
Vec axpy(double alpha, std::span<const double> x, std::span<const double> y);

}  // namespace telearm
