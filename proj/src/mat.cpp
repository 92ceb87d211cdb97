#include "telearm/mat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace telearm {

namespace {

void require_same_shape(const Mat& a, const Mat& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    }
}

}  // namespace

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> row_major)
    : rows_(rows), cols_(cols), data_(row_major) {
    if (data_.size() != rows * cols) {
        throw std::invalid_argument("Mat: initializer size does not match dimensions");
    }
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::column(std::span<const double> v) {
    Mat m(v.size(), 1);
    std::copy(v.begin(), v.end(), m.data_.begin());
    return m;
}

Vec Mat::col(std::size_t c) const {
    Vec out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void Mat::set_col(std::size_t c, std::span<const double> v) {
    if (v.size() != rows_) throw std::invalid_argument("Mat::set_col: dimension mismatch");
    for (std::size_t r = 0; r < rows_; ++r) (*this)(r, c) = v[r];
}

Mat Mat::transpose() const {
    Mat t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

Mat& Mat::operator+=(const Mat& o) {
    require_same_shape(*this, o, "Mat::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
}

Mat& Mat::operator-=(const Mat& o) {
    require_same_shape(*this, o, "Mat::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
}

Mat& Mat::operator*=(double s) {
    for (auto& x : data_) x *= s;
    return *this;
}

Mat operator*(const Mat& a, const Mat& b) {
    if (a.cols_ != b.rows_) throw std::invalid_argument("Mat::operator*: dimension mismatch");
    Mat out(a.rows_, b.cols_);
    for (std::size_t i = 0; i < a.rows_; ++i)
        for (std::size_t k = 0; k < a.cols_; ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aik * b(k, j);
        }
    return out;
}

Vec operator*(const Mat& a, std::span<const double> v) {
    if (a.cols_ != v.size()) throw std::invalid_argument("Mat*Vec: dimension mismatch");
    Vec out(a.rows_, 0.0);
    for (std::size_t i = 0; i < a.rows_; ++i) out[i] = dot(a.row(i), v);
    return out;
}

Mat Mat::at_b(const Mat& a, const Mat& b) {
    if (a.rows_ != b.rows_) throw std::invalid_argument("Mat::at_b: dimension mismatch");
    Mat out(a.cols_, b.cols_);
    for (std::size_t k = 0; k < a.rows_; ++k)
        for (std::size_t i = 0; i < a.cols_; ++i) {
            const double aki = a(k, i);
            for (std::size_t j = 0; j < b.cols_; ++j) out(i, j) += aki * b(k, j);
        }
    return out;
}

Vec Mat::at_v(const Mat& a, std::span<const double> v) {
    if (a.rows_ != v.size()) throw std::invalid_argument("Mat::at_v: dimension mismatch");
    Vec out(a.cols_, 0.0);
    for (std::size_t k = 0; k < a.rows_; ++k)
        for (std::size_t i = 0; i < a.cols_; ++i) out[i] += a(k, i) * v[k];
    return out;
}

std::string Mat::to_string() const {
    std::ostringstream os;
    os.precision(6);
    for (std::size_t r = 0; r < rows_; ++r) {
        os << (r == 0 ? "[" : " ");
        for (std::size_t c = 0; c < cols_; ++c) os << (c ? ", " : "") << (*this)(r, c);
        os << (r + 1 == rows_ ? "]" : "\n");
    }
    return os.str();
}

Cholesky::Cholesky(const Mat& a) : l_(a.rows(), a.cols()) {
    const std::size_t n = a.rows();
    if (a.cols() != n) throw std::invalid_argument("Cholesky: matrix not square");
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    const double tiny = std::max(scale, 1.0) * 64.0 * std::numeric_limits<double>::epsilon();
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= l_(j, k) * l_(j, k);
        if (!(diag > tiny)) throw std::domain_error("Cholesky: matrix is not positive definite");
        const double ljj = std::sqrt(diag);
        l_(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
            l_(i, j) = s / ljj;
        }
    }
}

Vec Cholesky::solve(std::span<const double> b) const {
    const std::size_t n = l_.rows();
    if (b.size() != n) throw std::invalid_argument("Cholesky::solve: dimension mismatch");
    Vec y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < i; ++k) y[i] -= l_(i, k) * y[k];
        y[i] /= l_(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        for (std::size_t k = i + 1; k < n; ++k) y[i] -= l_(k, i) * y[k];
        y[i] /= l_(i, i);
    }
    return y;
}

Mat Cholesky::solve(const Mat& b) const {
    Mat out(b.rows(), b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) out.set_col(c, solve(b.col(c)));
    return out;
}

Vec solve_lu(Mat a, Vec b) {
    const std::size_t n = a.rows();
    if (a.cols() != n || b.size() != n) throw std::invalid_argument("solve_lu: dimension mismatch");
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < n; ++i)
            if (std::abs(a(i, k)) > std::abs(a(piv, k))) piv = i;
        if (std::abs(a(piv, k)) < 1e-300) throw std::domain_error("solve_lu: singular matrix");
        if (piv != k) {
            for (std::size_t c = 0; c < n; ++c) std::swap(a(k, c), a(piv, c));
            std::swap(b[k], b[piv]);
        }
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = a(i, k) / a(k, k);
            for (std::size_t c = k; c < n; ++c) a(i, c) -= m * a(k, c);
            b[i] -= m * b[k];
        }
    }
    Vec x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t c = i + 1; c < n; ++c) s -= a(i, c) * x[c];
        x[i] = s / a(i, i);
    }
    return x;
}

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(std::span<const double> v) { return std::sqrt(dot(v, v)); }

double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

Vec axpy(double alpha, std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("axpy: dimension mismatch");
    Vec out(y.begin(), y.end());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
    return out;
}

}  // namespace telearm
