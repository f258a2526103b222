#include "salience/tensor.hpp"

#include "salience/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace salience::nn {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           std::multiplies<std::size_t>());
}

using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

ConstMapRM as_matrix(const Tensor& t) {
    if (t.rank() != 2) throw DataError("matmul operand must be 2-D");
    return ConstMapRM(t.data(), static_cast<Eigen::Index>(t.dim(0)),
                      static_cast<Eigen::Index>(t.dim(1)));
}

} // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != product(shape_)) throw DataError("tensor data does not match shape");
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Tensor Tensor::reshaped(std::vector<std::size_t> shape) const {
    if (product(shape) != size()) throw DataError("reshape changes element count");
    return Tensor(std::move(shape), data_);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    auto ma = as_matrix(a);
    auto mb = as_matrix(b);
    if (ma.cols() != mb.rows()) throw DataError("matmul inner dimensions disagree");
    Tensor c({a.dim(0), b.dim(1)});
    MapRM(c.data(), ma.rows(), mb.cols()).noalias() = ma * mb;
    return c;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    auto ma = as_matrix(a);
    auto mb = as_matrix(b);
    if (ma.cols() != mb.cols()) throw DataError("matmul_nt inner dimensions disagree");
    Tensor c({a.dim(0), b.dim(0)});
    MapRM(c.data(), ma.rows(), mb.rows()).noalias() = ma * mb.transpose();
    return c;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    auto ma = as_matrix(a);
    auto mb = as_matrix(b);
    if (ma.rows() != mb.rows()) throw DataError("matmul_tn inner dimensions disagree");
    Tensor c({a.dim(1), b.dim(1)});
    MapRM(c.data(), ma.cols(), mb.cols()).noalias() = ma.transpose() * mb;
    return c;
}

void axpy(double alpha, const Tensor& x, Tensor& y) {
    if (!x.same_shape(y)) throw DataError("axpy shape mismatch");
    const double* xs = x.data();
    double* ys = y.data();
    for (std::size_t i = 0; i < x.size(); ++i) ys[i] += alpha * xs[i];
}

} // namespace salience::nn
