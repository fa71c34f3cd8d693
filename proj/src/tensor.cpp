#include "attnroute/tensor.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace attnroute {

std::string Shape3::str() const {
    return "(" + std::to_string(batch) + "," + std::to_string(tokens) + "," + std::to_string(channels) + ")";
}

TensorF::TensorF(int batch, int tokens, int channels)
    : shape_{batch, tokens, channels} {
    if (batch < 0 || tokens < 0 || channels < 0) {
        throw std::invalid_argument("tensor shape must be non-negative, got " + shape_.str());
    }
    data_.assign(shape_.numel(), 0.0f);
}

TensorF::TensorF(Shape3 shape, std::vector<float> data)
    : shape_(shape), data_(std::move(data)) {
    if (data_.size() != shape_.numel()) {
        throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                    " does not match shape " + shape_.str());
    }
}

bool TensorF::same_bits(const TensorF& other) const {
    if (shape_ != other.shape_) {
        return false;
    }
    if (data_.empty()) {
        return true;
    }
    return std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

bool TensorF::all_finite() const {
    for (float v : data_) {
        if (!std::isfinite(v)) {
            return false;
        }
    }
    return true;
}

}  // namespace attnroute
