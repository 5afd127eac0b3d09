#include "mdsnet/tensor.hpp"

#include <cmath>

#include "mdsnet/error.hpp"

namespace mdsnet {

std::string shape_to_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    out += "]";
    return out;
}

namespace {

std::size_t shape_product(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) {
        require(e > 0, "tensor shape has zero extent: ", shape_to_string(shape));
        n *= e;
    }
    return shape.empty() ? 0 : n;
}

}  // namespace

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
    require(shape_product(shape_) == data_.size(), "tensor data length ", data_.size(),
            " does not match shape ", shape_to_string(shape_));
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    for (double& v : t.data_) v = value;
    return t;
}

std::size_t Tensor::extent(std::size_t axis) const {
    require(axis < shape_.size(), "tensor axis ", axis, " out of range for shape ", shape_to_string(shape_));
    return shape_[axis];
}

std::vector<double>& Tensor::grad() {
    ensure_grad();
    return grad_;
}

const std::vector<double>& Tensor::grad() const {
    require(!grad_.empty(), "tensor gradient requested before allocation");
    return grad_;
}

void Tensor::ensure_grad() {
    if (grad_.size() != data_.size()) grad_.assign(data_.size(), 0.0);
}

void Tensor::zero_grad() {
    if (grad_.empty()) {
        grad_.assign(data_.size(), 0.0);
    } else {
        std::fill(grad_.begin(), grad_.end(), 0.0);
    }
}

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void check_finite(const Tensor& t, const std::string& where) {
    if (!t.all_finite()) fail("non-finite value in ", where);
}

void check_same_shape(const Tensor& a, const Tensor& b, const std::string& where) {
    if (a.shape() != b.shape()) {
        fail(where, ": shape mismatch ", shape_to_string(a.shape()), " vs ", shape_to_string(b.shape()));
    }
}

}  // namespace mdsnet
