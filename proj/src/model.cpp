#include "attnroute/model.hpp"

#include "attnroute/embedding.hpp"
#include "attnroute/kernels.hpp"
#include "attnroute/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace attnroute {

namespace {

// Fixed salts so the independent random streams (weights, sampling noise,
// source tokens, text tokens) can never collide even with equal seeds.
const uint64_t kWeightSalt = fnv1a64("model.weights");
const uint64_t kNoiseSalt = fnv1a64("sample.noise");
const uint64_t kSourceSalt = fnv1a64("encode.source");
const uint64_t kTextSalt = fnv1a64("encode.text");

// Linear weight (1, d_in, d_out), entries uniform in (-1/sqrt(d_in),
// 1/sqrt(d_in)), drawn from a stream keyed by the matrix ordinal.
TensorF init_weight(int d_in, int d_out, uint64_t weight_seed, int& matrix_index) {
    SplitMix rng(mix64(mix64(kWeightSalt, weight_seed), static_cast<uint64_t>(matrix_index++)));
    const float bound = 1.0f / std::sqrt(static_cast<float>(d_in));
    TensorF w(1, d_in, d_out);
    float* d = w.data();
    const size_t n = w.numel();
    for (size_t i = 0; i < n; ++i) {
        d[i] = rng.next_uniform(-bound, bound);
    }
    return w;
}

void require_shape(const char* what, const TensorF& x, const Shape3& want) {
    if (!(x.shape() == want)) {
        throw std::runtime_error(std::string("forward: ") + what + " must be " + want.str() +
                                 ", got " + x.shape().str());
    }
}

}  // namespace

void ModelConfig::validate() const {
    if (num_layers <= 0 || d_model <= 0 || heads <= 0 || noise_tokens <= 0 ||
        source_tokens <= 0 || text_tokens <= 0) {
        throw std::invalid_argument("model config: all dimensions must be positive");
    }
    if (d_model % heads != 0) {
        throw std::invalid_argument("model config: d_model " + std::to_string(d_model) +
                                    " not divisible by heads " + std::to_string(heads));
    }
}

void SampleConfig::validate() const {
    if (steps < 1) {
        throw std::invalid_argument("sample config: steps must be >= 1");
    }
    if (!(cfg_scale >= 0.0)) {
        throw std::invalid_argument("sample config: cfg_scale must be >= 0");
    }
}

TensorF gaussian_tensor(const Shape3& shape, uint64_t seed) {
    SplitMix rng(seed);
    TensorF out(shape.batch, shape.tokens, shape.channels);
    float* d = out.data();
    const size_t n = out.numel();
    for (size_t i = 0; i < n; ++i) {
        d[i] = rng.next_gaussian();
    }
    return out;
}

LatentImage encode_source(const std::string& label, const ModelConfig& cfg, uint64_t seed) {
    cfg.validate();
    uint64_t key = mix64(mix64(kSourceSalt, fnv1a64(label)), seed);
    return {gaussian_tensor({1, cfg.source_tokens, cfg.d_model}, key), label};
}

TensorF encode_text(const std::string& prompt, const ModelConfig& cfg) {
    cfg.validate();
    TensorF out(1, cfg.text_tokens, cfg.d_model);
    std::vector<std::string> words = tokenize_words(prompt);
    const int n = std::min<int>(cfg.text_tokens, static_cast<int>(words.size()));
    for (int t = 0; t < n; ++t) {
        SplitMix rng(mix64(kTextSalt, fnv1a64(words[t])));
        float* row = out.row(0, t);
        double norm2 = 0.0;
        for (int c = 0; c < cfg.d_model; ++c) {
            row[c] = rng.next_gaussian();
            norm2 += static_cast<double>(row[c]) * row[c];
        }
        if (norm2 > 0.0) {
            const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
            for (int c = 0; c < cfg.d_model; ++c) {
                row[c] *= inv;
            }
        }
    }
    return out;  // remaining token rows stay zero
}

Model::Model(const ModelConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    const int d = cfg_.d_model;
    const int hidden = 4 * d;
    int matrix_index = 0;
    blocks_.reserve(cfg_.num_layers);
    for (int l = 0; l < cfg_.num_layers; ++l) {
        Block b;
        b.wq_img = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wk_img = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wv_img = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wq_txt = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wk_txt = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wv_txt = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wo = init_weight(d, d, cfg_.weight_seed, matrix_index);
        b.wff1 = init_weight(d, hidden, cfg_.weight_seed, matrix_index);
        b.wff2 = init_weight(hidden, d, cfg_.weight_seed, matrix_index);
        blocks_.push_back(std::move(b));
    }
    w_head_ = init_weight(d, d, cfg_.weight_seed, matrix_index);
}

TensorF Model::forward(const TensorF& noise, const LatentImage& source, const TensorF& text_emb,
                       int step_index, AttnHub* hub) const {
    const int d = cfg_.d_model;
    require_shape("noise half", noise, {1, cfg_.noise_tokens, d});
    require_shape("source tokens", source.tokens, {1, cfg_.source_tokens, d});
    require_shape("text embedding", text_emb, {1, cfg_.text_tokens, d});
    if (hub) {
        if (hub->current_step() != step_index) {
            throw std::logic_error("forward: hub is at step " +
                                   std::to_string(hub->current_step()) + ", caller expects " +
                                   std::to_string(step_index));
        }
        hub->begin_forward();
    }

    auto dispatch = [&](int layer, ProjKind kind, TensorF x) {
        return hub ? hub->dispatch({layer, kind}, std::move(x)) : std::move(x);
    };

    TensorF img = concat_tokens(noise, source.tokens);
    TensorF txt = text_emb;
    for (int l = 0; l < cfg_.num_layers; ++l) {
        const Block& b = blocks_[l];

        TensorF img_n = layernorm(img);
        TensorF txt_n = layernorm(txt);
        TensorF q_img = dispatch(l, ProjKind::ImgQ, matmul(img_n, b.wq_img));
        TensorF k_img = dispatch(l, ProjKind::ImgK, matmul(img_n, b.wk_img));
        TensorF v_img = dispatch(l, ProjKind::ImgV, matmul(img_n, b.wv_img));
        TensorF q_txt = dispatch(l, ProjKind::TxtQ, matmul(txt_n, b.wq_txt));
        TensorF k_txt = dispatch(l, ProjKind::TxtK, matmul(txt_n, b.wk_txt));
        TensorF v_txt = dispatch(l, ProjKind::TxtV, matmul(txt_n, b.wv_txt));

        // Joint attention over image tokens followed by text tokens.
        TensorF attn = sdpa(concat_tokens(q_img, q_txt), concat_tokens(k_img, k_txt),
                            concat_tokens(v_img, v_txt), cfg_.heads);
        add_inplace(img, matmul(slice_tokens(attn, 0, cfg_.image_tokens()), b.wo));
        add_inplace(txt, matmul(slice_tokens(attn, cfg_.image_tokens(), attn.tokens()), b.wo));

        add_inplace(img, matmul(silu(matmul(layernorm(img), b.wff1)), b.wff2));
        add_inplace(txt, matmul(silu(matmul(layernorm(txt), b.wff1)), b.wff2));
    }

    return matmul(layernorm(slice_tokens(img, 0, cfg_.noise_tokens)), w_head_);
}

TensorF Model::sample(const LatentImage& source, const std::string& prompt,
                      const SampleConfig& sc, AttnHub* hub,
                      std::vector<TensorF>* trajectory) const {
    sc.validate();
    TensorF cond_text = encode_text(prompt, cfg_);
    TensorF uncond_text = encode_text(sc.negative_prompt, cfg_);
    TensorF z = gaussian_tensor({1, cfg_.noise_tokens, cfg_.d_model},
                                mix64(kNoiseSalt, sc.seed));

    if (hub) {
        hub->begin_run();
    }
    const float dt = 1.0f / static_cast<float>(sc.steps);
    for (int step = 0; step < sc.steps; ++step) {
        TensorF cond = forward(z, source, cond_text, step, hub);
        TensorF uncond = forward(z, source, uncond_text, step, hub);

        // Guidance combine; the endpoints are taken verbatim so that
        // cfg 0 and 1 reproduce the single-forward results bit-exactly.
        TensorF v;
        if (sc.cfg_scale == 0.0) {
            v = std::move(uncond);
        } else if (sc.cfg_scale == 1.0) {
            v = std::move(cond);
        } else {
            v = std::move(uncond);
            const float g = static_cast<float>(sc.cfg_scale);
            float* vd = v.data();
            const float* cd = cond.data();
            const size_t n = v.numel();
            for (size_t i = 0; i < n; ++i) {
                vd[i] += g * (cd[i] - vd[i]);
            }
        }

        axpy_inplace(z, -dt, v);
        if (hub) {
            hub->advance_step();
        }
        if (trajectory) {
            trajectory->push_back(z);
        }
    }
    if (hub) {
        hub->end_run();
    }
    return z;
}

}  // namespace attnroute
