#pragma once

#include "attnroute/rng.hpp"
#include "attnroute/tensor.hpp"

#include <string>
#include <vector>

namespace attnroute {

// Lowercased alphanumeric runs; everything else separates words.
std::vector<std::string> tokenize_words(const std::string& text);

// Sign feature hashing: each word adds +-1 to a hashed bucket, then the
// vector is L2-normalized. Empty text gives the zero vector.
std::vector<float> hashed_bow_embed(const std::string& text, int dim);

// Gaussian random projection of a flat float block into dim outputs (one
// seeded stream per output row), L2-normalized. Identical inputs give
// bit-identical embeddings.
std::vector<float> random_projection_embed(const float* data, size_t n, int dim, uint64_t seed);

// The deterministic stand-ins for the metric embedding spaces: hashed
// bag-of-words on the text side, two independently seeded random
// projections on the image side so the two image spaces are not trivially
// coupled. The id string goes into report headers so scores are never
// compared across providers by accident.
struct EmbeddingProviders {
    int dim = 128;
    uint64_t clip_seed = fnv1a64("provider.clip");
    uint64_t dino_seed = fnv1a64("provider.dino");

    std::string id() const;
    std::vector<float> embed_text(const std::string& text) const;
    std::vector<float> embed_image_clip(const TensorF& image) const;
    std::vector<float> embed_image_dino(const TensorF& image) const;
};

}  // namespace attnroute
