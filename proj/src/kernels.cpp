#include "attnroute/kernels.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>

namespace attnroute {

namespace {

void require(bool cond, const std::string& msg) {
    if (!cond) {
        throw std::invalid_argument(msg);
    }
}

}  // namespace

TensorF matmul(const TensorF& a, const TensorF& b) {
    require(a.channels() == b.tokens(),
            "matmul: inner dimensions disagree, " + a.shape().str() + " x " + b.shape().str());
    require(a.batch() == b.batch() || a.batch() == 1 || b.batch() == 1,
            "matmul: batch dimensions disagree, " + a.shape().str() + " x " + b.shape().str());

    const int batch = a.batch() > b.batch() ? a.batch() : b.batch();
    const int rows = a.tokens();
    const int inner = a.channels();
    const int cols = b.channels();
    TensorF out(batch, rows, cols);
    for (int bi = 0; bi < batch; ++bi) {
        const int ab = a.batch() == 1 ? 0 : bi;
        const int bb = b.batch() == 1 ? 0 : bi;
        for (int t = 0; t < rows; ++t) {
            const float* arow = a.row(ab, t);
            float* orow = out.row(bi, t);
            for (int k = 0; k < inner; ++k) {
                const float av = arow[k];
                const float* brow = b.row(bb, k);
                for (int n = 0; n < cols; ++n) {
                    orow[n] += av * brow[n];
                }
            }
        }
    }
    return out;
}

TensorF softmax_rows(const TensorF& x) {
    TensorF out(x.batch(), x.tokens(), x.channels());
    const int c = x.channels();
    for (int b = 0; b < x.batch(); ++b) {
        for (int t = 0; t < x.tokens(); ++t) {
            const float* in = x.row(b, t);
            float* o = out.row(b, t);
            float mx = c > 0 ? in[0] : 0.0f;
            for (int i = 1; i < c; ++i) {
                if (in[i] > mx) {
                    mx = in[i];
                }
            }
            float sum = 0.0f;
            for (int i = 0; i < c; ++i) {
                o[i] = std::exp(in[i] - mx);
                sum += o[i];
            }
            const float inv = 1.0f / sum;
            for (int i = 0; i < c; ++i) {
                o[i] *= inv;
            }
        }
    }
    return out;
}

TensorF layernorm(const TensorF& x, float eps) {
    TensorF out(x.batch(), x.tokens(), x.channels());
    const int c = x.channels();
    for (int b = 0; b < x.batch(); ++b) {
        for (int t = 0; t < x.tokens(); ++t) {
            const float* in = x.row(b, t);
            float* o = out.row(b, t);
            float mean = 0.0f;
            for (int i = 0; i < c; ++i) {
                mean += in[i];
            }
            mean /= static_cast<float>(c);
            float var = 0.0f;
            for (int i = 0; i < c; ++i) {
                const float d = in[i] - mean;
                var += d * d;
            }
            var /= static_cast<float>(c);
            const float inv = 1.0f / std::sqrt(var + eps);
            for (int i = 0; i < c; ++i) {
                o[i] = (in[i] - mean) * inv;
            }
        }
    }
    return out;
}

TensorF sdpa(const TensorF& q, const TensorF& k, const TensorF& v, int heads) {
    require(heads > 0, "sdpa: heads must be positive");
    require(q.channels() % heads == 0,
            "sdpa: channel dim " + std::to_string(q.channels()) + " not divisible by " +
                std::to_string(heads) + " heads");
    require(q.channels() == k.channels() && k.shape() == v.shape(),
            "sdpa: q/k/v shapes disagree, q=" + q.shape().str() + " k=" + k.shape().str() +
                " v=" + v.shape().str());
    require(q.batch() == k.batch(),
            "sdpa: batch dims disagree, q=" + q.shape().str() + " k=" + k.shape().str());

    const int batch = q.batch();
    const int tq = q.tokens();
    const int tk = k.tokens();
    const int dh = q.channels() / heads;
    const float scale = 1.0f / std::sqrt(static_cast<float>(dh));

    TensorF out(batch, tq, q.channels());
    TensorF logits(1, tq, tk);
    for (int b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
            const int c0 = h * dh;
            for (int i = 0; i < tq; ++i) {
                const float* qi = q.row(b, i) + c0;
                float* lrow = logits.row(0, i);
                for (int j = 0; j < tk; ++j) {
                    const float* kj = k.row(b, j) + c0;
                    float acc = 0.0f;
                    for (int d = 0; d < dh; ++d) {
                        acc += qi[d] * kj[d];
                    }
                    lrow[j] = acc * scale;
                }
            }
            TensorF attn = softmax_rows(logits);
            for (int i = 0; i < tq; ++i) {
                const float* arow = attn.row(0, i);
                float* orow = out.row(b, i) + c0;
                for (int j = 0; j < tk; ++j) {
                    const float aij = arow[j];
                    const float* vj = v.row(b, j) + c0;
                    for (int d = 0; d < dh; ++d) {
                        orow[d] += aij * vj[d];
                    }
                }
            }
        }
    }
    return out;
}

TensorF silu(const TensorF& x) {
    TensorF out(x.batch(), x.tokens(), x.channels());
    const float* in = x.data();
    float* o = out.data();
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) {
        o[i] = in[i] / (1.0f + std::exp(-in[i]));
    }
    return out;
}

TensorF concat_tokens(const TensorF& a, const TensorF& b) {
    require(a.batch() == b.batch() && a.channels() == b.channels(),
            "concat_tokens: shapes disagree, " + a.shape().str() + " vs " + b.shape().str());
    TensorF out(a.batch(), a.tokens() + b.tokens(), a.channels());
    const size_t c = static_cast<size_t>(a.channels());
    for (int bi = 0; bi < a.batch(); ++bi) {
        std::memcpy(out.row(bi, 0), a.row(bi, 0), static_cast<size_t>(a.tokens()) * c * sizeof(float));
        std::memcpy(out.row(bi, a.tokens()), b.row(bi, 0), static_cast<size_t>(b.tokens()) * c * sizeof(float));
    }
    return out;
}

TensorF slice_tokens(const TensorF& x, int t0, int t1) {
    require(0 <= t0 && t0 <= t1 && t1 <= x.tokens(),
            "slice_tokens: invalid range [" + std::to_string(t0) + "," + std::to_string(t1) +
                ") for " + x.shape().str());
    TensorF out(x.batch(), t1 - t0, x.channels());
    const size_t c = static_cast<size_t>(x.channels());
    for (int b = 0; b < x.batch(); ++b) {
        std::memcpy(out.row(b, 0), x.row(b, t0), static_cast<size_t>(t1 - t0) * c * sizeof(float));
    }
    return out;
}

void add_inplace(TensorF& y, const TensorF& x) {
    require(y.shape() == x.shape(), "add_inplace: shapes disagree, " + y.shape().str() + " vs " + x.shape().str());
    float* yd = y.data();
    const float* xd = x.data();
    const size_t n = y.numel();
    for (size_t i = 0; i < n; ++i) {
        yd[i] += xd[i];
    }
}

void axpy_inplace(TensorF& y, float alpha, const TensorF& x) {
    require(y.shape() == x.shape(), "axpy_inplace: shapes disagree, " + y.shape().str() + " vs " + x.shape().str());
    float* yd = y.data();
    const float* xd = x.data();
    const size_t n = y.numel();
    for (size_t i = 0; i < n; ++i) {
        yd[i] += alpha * xd[i];
    }
}

void scale_inplace(TensorF& x, float factor) {
    float* d = x.data();
    const size_t n = x.numel();
    for (size_t i = 0; i < n; ++i) {
        d[i] *= factor;
    }
}

CosineResult cosine(const float* a, const float* b, size_t n) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    bool all_equal = n > 0;
    bool all_negated = n > 0;
    for (size_t i = 0; i < n; ++i) {
        const double x = a[i];
        const double y = b[i];
        dot += x * y;
        na += x * x;
        nb += y * y;
        all_equal = all_equal && std::bit_cast<uint32_t>(a[i]) == std::bit_cast<uint32_t>(b[i]);
        all_negated = all_negated && a[i] == -b[i];
    }
    if (na == 0.0 || nb == 0.0) {
        return {0.0, true};
    }
    // Identical or exactly negated vectors hit the poles with no rounding.
    if (all_equal) {
        return {1.0, false};
    }
    if (all_negated) {
        return {-1.0, false};
    }
    return {dot / (std::sqrt(na) * std::sqrt(nb)), false};
}

}  // namespace attnroute
