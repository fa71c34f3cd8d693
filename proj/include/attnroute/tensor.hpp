#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace attnroute {

struct Shape3 {
    int batch = 0;
    int tokens = 0;
    int channels = 0;

    bool operator==(const Shape3&) const = default;
    size_t numel() const {
        return static_cast<size_t>(batch) * static_cast<size_t>(tokens) * static_cast<size_t>(channels);
    }
    std::string str() const;
};

// Dense rank-3 f32 tensor, row-major (batch, tokens, channels). Carries
// every activation in the pipeline.
class TensorF {
  public:
    TensorF() = default;
    TensorF(int batch, int tokens, int channels);  // zero-filled
    TensorF(Shape3 shape, std::vector<float> data);

    const Shape3& shape() const { return shape_; }
    int batch() const { return shape_.batch; }
    int tokens() const { return shape_.tokens; }
    int channels() const { return shape_.channels; }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    std::vector<float>& flat() { return data_; }
    const std::vector<float>& flat() const { return data_; }

    float* row(int b, int t) {
        return data_.data() + (static_cast<size_t>(b) * shape_.tokens + t) * shape_.channels;
    }
    const float* row(int b, int t) const {
        return data_.data() + (static_cast<size_t>(b) * shape_.tokens + t) * shape_.channels;
    }
    float& at(int b, int t, int c) { return row(b, t)[c]; }
    float at(int b, int t, int c) const { return row(b, t)[c]; }

    // Bitwise equality (distinguishes -0.0 from 0.0 and NaN payloads).
    bool same_bits(const TensorF& other) const;
    bool all_finite() const;

  private:
    Shape3 shape_;
    std::vector<float> data_;
};

}  // namespace attnroute
