#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace mdsnet {

using Shape = std::vector<std::size_t>;

std::string shape_to_string(const Shape& shape);

// Dense N-d array of doubles in row-major order, with an optional same-shape
// gradient buffer. This is the compute currency of the whole engine; layers
// and losses exchange Tensors and accumulate into grad().
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> values);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t extent(std::size_t axis) const;
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    // Indexed access for the common ranks.
    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data_[(c * shape_[1] + y) * shape_[2] + x];
    }
    double& at(std::size_t o, std::size_t c, std::size_t y, std::size_t x) {
        return data_[((o * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    double at(std::size_t o, std::size_t c, std::size_t y, std::size_t x) const {
        return data_[((o * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    // Gradient buffer, allocated lazily and always shaped like data.
    bool has_grad() const { return !grad_.empty(); }
    std::vector<double>& grad();
    const std::vector<double>& grad() const;
    void ensure_grad();
    void zero_grad();
    void drop_grad() { grad_.clear(); grad_.shrink_to_fit(); }

    bool all_finite() const;
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

private:
    Shape shape_;
    std::vector<double> data_;
    std::vector<double> grad_;
};

// Throws naming `where` when the tensor holds a NaN or Inf.
void check_finite(const Tensor& t, const std::string& where);

void check_same_shape(const Tensor& a, const Tensor& b, const std::string& where);

}  // namespace mdsnet
