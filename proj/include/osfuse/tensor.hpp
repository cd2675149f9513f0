#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace osf::num {

// Dense row-major tensor of doubles. Invariant: product(shape) == data.size().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape);  // zero-filled
    Tensor(std::vector<std::size_t> shape, std::vector<double> data);

    static Tensor scalar(double v);
    static Tensor zeros(std::vector<std::size_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<std::size_t> shape, double v);

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t size() const { return data_.size(); }
    std::size_t rank() const { return shape_.size(); }
    bool is_scalar() const { return data_.size() == 1; }

    // 2-D accessors; throw DimensionError when rank != 2.
    std::size_t rows() const;
    std::size_t cols() const;
    double& at(std::size_t r, std::size_t c);
    double at(std::size_t r, std::size_t c) const;

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;
    bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

    std::string shape_str() const;

private:
    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

// Spec'd numeric kernels. Both are shared by the autodiff layer.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_lastdim(const Tensor& x);
Tensor transpose(const Tensor& a);

}  // namespace osf::num
