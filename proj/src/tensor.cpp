#include "osfuse/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "osfuse/errors.hpp"

namespace osf::num {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) {
        if (d == 0) throw DimensionError("Tensor: zero dimension in shape");
        n *= d;
    }
    return n;
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_product(shape_) != data_.size())
        throw DimensionError("Tensor: shape " + shape_str() + " does not match data length " +
                             std::to_string(data_.size()));
}

Tensor Tensor::scalar(double v) { return Tensor({1}, {v}); }

Tensor Tensor::full(std::vector<std::size_t> shape, double v) {
    Tensor t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), v);
    return t;
}

std::size_t Tensor::rows() const {
    if (rank() != 2) throw DimensionError("Tensor: rows() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[0];
}

std::size_t Tensor::cols() const {
    if (rank() != 2) throw DimensionError("Tensor: cols() on rank-" + std::to_string(rank()) + " tensor");
    return shape_[1];
}

double& Tensor::at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
double Tensor::at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

bool Tensor::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

std::string Tensor::shape_str() const {
    std::string s = "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) {
        if (i) s += "x";
        s += std::to_string(shape_[i]);
    }
    return s + "]";
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
        throw DimensionError("matmul: incompatible shapes " + a.shape_str() + " and " + b.shape_str());
    const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            const double aij = a[i * k + j];
            if (aij == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) out[i * n + c] += aij * b[j * n + c];
        }
    return out;
}

Tensor softmax_lastdim(const Tensor& x) {
    if (x.rank() == 0 || x.shape().back() == 0)
        throw DimensionError("softmax_lastdim: empty last dimension in " + x.shape_str());
    const std::size_t d = x.shape().back();
    const std::size_t outer = x.size() / d;
    Tensor out(x.shape());
    for (std::size_t o = 0; o < outer; ++o) {
        const std::size_t base = o * d;
        double mx = x[base];
        for (std::size_t i = 1; i < d; ++i) mx = std::max(mx, x[base + i]);
        double sum = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            out[base + i] = std::exp(x[base + i] - mx);
            sum += out[base + i];
        }
        for (std::size_t i = 0; i < d; ++i) out[base + i] /= sum;
    }
    return out;
}

Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw DimensionError("transpose: expected rank-2, got " + a.shape_str());
    Tensor out({a.cols(), a.rows()});
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out.at(c, r) = a.at(r, c);
    return out;
}

}  // namespace osf::num
