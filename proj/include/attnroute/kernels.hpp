#pragma once

#include "attnroute/tensor.hpp"

namespace attnroute {

// Deterministic f32 kernels. Every reduction runs sequentially over its
// axis, so identical inputs give bit-identical outputs on every run.

// Per-batch matrix product. Batch dims must match or broadcast from 1.
TensorF matmul(const TensorF& a, const TensorF& b);

// Row-wise softmax over the channel axis, stabilized by max-subtraction.
// Each output row sums to 1 within 1e-6.
TensorF softmax_rows(const TensorF& x);

// Per-row layer normalization over channels (no learned affine).
TensorF layernorm(const TensorF& x, float eps = 1e-5f);

// Multi-head scaled-dot-product attention. q: (B, Tq, C), k/v: (B, Tk, C),
// C divisible by heads. Per head: softmax(q k^T / sqrt(C/heads)) v.
// Note: scaling q by a positive scalar scales the logits, which softmax does
// not absorb; outputs change under uniform q rescaling.
TensorF sdpa(const TensorF& q, const TensorF& k, const TensorF& v, int heads);

TensorF silu(const TensorF& x);

// Concatenate along the token axis.
TensorF concat_tokens(const TensorF& a, const TensorF& b);
// Half-open token slice [t0, t1).
TensorF slice_tokens(const TensorF& x, int t0, int t1);

void add_inplace(TensorF& y, const TensorF& x);
// y += alpha * x
void axpy_inplace(TensorF& y, float alpha, const TensorF& x);
void scale_inplace(TensorF& x, float factor);

// Cosine similarity with double accumulation. Bitwise-equal inputs return
// exactly +1.0 and exact negations return exactly -1.0; a zero-norm input
// yields {0.0, degenerate=true}.
struct CosineResult {
    double value = 0.0;
    bool degenerate = false;
};
CosineResult cosine(const float* a, const float* b, size_t n);

}  // namespace attnroute
