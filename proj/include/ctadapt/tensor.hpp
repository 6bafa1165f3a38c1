#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace ctadapt {

/// Dense row-major float32 array. product(shape) == data.size() always holds.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> dims, float fill = 0.0f);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    float& operator[](std::size_t i) { return data[i]; }
    float operator[](std::size_t i) const { return data[i]; }

    std::span<float> span() { return data; }
    std::span<const float> span() const { return data; }

    void fill(float v);
    bool all_finite() const;
    std::string shape_string() const;
};

std::size_t element_count(const std::vector<std::size_t>& shape);

/// Same shape and identical bit patterns (distinguishes -0.0 from 0.0).
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace ctadapt
