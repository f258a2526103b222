#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace salience::nn {

/// Dense row-major tensor of doubles. Shapes are small (desk scale), so all
/// storage is a single contiguous vector and indexing is unchecked in release.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);
    Tensor(std::initializer_list<std::size_t> shape)
        : Tensor(std::vector<std::size_t>(shape)) {}

    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double value);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t dim(std::size_t i) const { return shape_[i]; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
    double& at(std::size_t i, std::size_t j, std::size_t k) {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }
    double at(std::size_t i, std::size_t j, std::size_t k) const {
        return data_[(i * shape_[1] + j) * shape_[2] + k];
    }

    void fill(double value);
    void zero() { fill(0.0); }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    /// Reinterpret as [rows, cols] without copying; product must match size().
    Tensor reshaped(std::vector<std::size_t> shape) const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

/// c = a @ b for 2-D tensors [m,k] x [k,n].
Tensor matmul(const Tensor& a, const Tensor& b);
/// c = a @ b^T for 2-D tensors [m,k] x [n,k].
Tensor matmul_nt(const Tensor& a, const Tensor& b);
/// c = a^T @ b for 2-D tensors [k,m] x [k,n].
Tensor matmul_tn(const Tensor& a, const Tensor& b);

void axpy(double alpha, const Tensor& x, Tensor& y); // y += alpha * x

} // namespace salience::nn
