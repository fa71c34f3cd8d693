#pragma once

#include "attnroute/hub.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace attnroute {

struct ModelConfig {
    int num_layers = 12;
    int d_model = 32;
    int heads = 4;
    int noise_tokens = 16;
    int source_tokens = 16;
    int text_tokens = 8;
    uint64_t weight_seed = 1;

    // Token index where the source half starts inside the image stream.
    int source_start() const { return noise_tokens; }
    int image_tokens() const { return noise_tokens + source_tokens; }
    void validate() const;
};

struct SampleConfig {
    int steps = 28;
    double cfg_scale = 4.0;
    uint64_t seed = 0;
    std::string negative_prompt;

    void validate() const;
};

// Stand-in for an encoded source image: deterministic pseudo-random tokens
// keyed by (label, seed).
struct LatentImage {
    TensorF tokens;  // (1, source_tokens, d_model)
    std::string label;
};

// Gaussian-filled tensor from its own seeded stream.
TensorF gaussian_tensor(const Shape3& shape, uint64_t seed);

LatentImage encode_source(const std::string& label, const ModelConfig& cfg, uint64_t seed);

// Hashed per-word text tokens: one unit-norm d_model vector per word, up to
// text_tokens, zero-padded. Deterministic and vocabulary-free.
TensorF encode_text(const std::string& prompt, const ModelConfig& cfg);

// One joint-attention block: six hookable projections, a shared attention
// output projection, and a feed-forward sublayer shared by both streams.
struct Block {
    TensorF wq_img, wk_img, wv_img;
    TensorF wq_txt, wk_txt, wv_txt;
    TensorF wo;
    TensorF wff1, wff2;
};

// Toy MMDiT: an image stream of noise-half + source-half tokens and a
// parallel text stream, mixed by joint attention in every block. All
// weights are frozen at construction.
class Model {
  public:
    explicit Model(const ModelConfig& cfg);

    const ModelConfig& config() const { return cfg_; }
    const std::vector<Block>& blocks() const { return blocks_; }

    // One denoising forward. noise: (1, noise_tokens, d), text_emb:
    // (1, text_tokens, d). Returns the velocity over the noise half,
    // (1, noise_tokens, d). Every projection output passes through the
    // hub (when given) before attention; the hub's step counter must
    // already equal step_index.
    TensorF forward(const TensorF& noise, const LatentImage& source, const TensorF& text_emb,
                    int step_index, AttnHub* hub) const;

    // Euler sampling from seeded noise. Each step runs a conditional
    // forward (prompt) then an unconditional one (negative prompt),
    // combines them as uncond + cfg_scale * (cond - uncond), and advances
    // the hub once after both. Returns the final noise-half latent.
    // `trajectory` (when given) receives the latent after every step.
    TensorF sample(const LatentImage& source, const std::string& prompt, const SampleConfig& sc,
                   AttnHub* hub, std::vector<TensorF>* trajectory = nullptr) const;

  private:
    ModelConfig cfg_;
    std::vector<Block> blocks_;
    TensorF w_head_;
};

}  // namespace attnroute
