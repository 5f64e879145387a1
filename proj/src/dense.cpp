#include "graphfb/dense.hpp"

#include <algorithm>
#include <cmath>

namespace graphfb {

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows * cols) {
        throw Error("dense matrix: buffer of " + std::to_string(data_.size()) +
                    " values does not match shape " + std::to_string(rows) + "x" +
                    std::to_string(cols));
    }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
    DenseMatrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

DenseMatrix DenseMatrix::column(std::span<const double> values) {
    return DenseMatrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

std::vector<double> DenseMatrix::col(std::size_t c) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
    return out;
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

DenseMatrix DenseMatrix::transposed() const {
    DenseMatrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
    return t;
}

namespace {
void require_same(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
    if (!a.same_shape(b)) {
        throw Error(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                    shape_str(b));
    }
}
}  // namespace

DenseMatrix& DenseMatrix::operator+=(const DenseMatrix& other) {
    require_same(*this, other, "add");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator-=(const DenseMatrix& other) {
    require_same(*this, other, "sub");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
    return *this;
}

DenseMatrix& DenseMatrix::operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
}

DenseMatrix operator+(DenseMatrix a, const DenseMatrix& b) { return a += b; }
DenseMatrix operator-(DenseMatrix a, const DenseMatrix& b) { return a -= b; }
DenseMatrix operator*(double s, DenseMatrix a) { return a *= s; }

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.rows()) {
        throw Error("matmul: inner dimension mismatch " + shape_str(a) + " * " + shape_str(b));
    }
    DenseMatrix out(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* dst = out.row(i).data();
        const auto arow = a.row(i);
        for (std::size_t k = 0; k < arow.size(); ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* src = b.row(k).data();
            for (std::size_t j = 0; j < n; ++j) dst[j] += aik * src[j];
        }
    }
    return out;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.rows() != b.rows()) {
        throw Error("matmul_tn: row mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    DenseMatrix out(a.cols(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto arow = a.row(r);
        const double* src = b.row(r).data();
        for (std::size_t i = 0; i < arow.size(); ++i) {
            const double ari = arow[i];
            if (ari == 0.0) continue;
            double* dst = out.row(i).data();
            for (std::size_t j = 0; j < n; ++j) dst[j] += ari * src[j];
        }
    }
    return out;
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
    if (a.cols() != b.cols()) {
        throw Error("matmul_nt: column mismatch " + shape_str(a) + " vs " + shape_str(b));
    }
    DenseMatrix out(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto arow = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto brow = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < arow.size(); ++k) s += arow[k] * brow[k];
            out(i, j) = s;
        }
    }
    return out;
}

double frobenius_sq(const DenseMatrix& a) {
    double s = 0.0;
    for (double v : a.data()) s += v * v;
    return s;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
    require_same(a, b, "max_abs_diff");
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

double max_abs(const DenseMatrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

std::string shape_str(const DenseMatrix& a) {
    return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

}  // namespace graphfb
