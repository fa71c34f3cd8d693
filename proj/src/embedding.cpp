#include "attnroute/embedding.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace attnroute {

namespace {

void l2_normalize(std::vector<float>& v) {
    double norm2 = 0.0;
    for (float x : v) {
        norm2 += static_cast<double>(x) * x;
    }
    if (norm2 <= 0.0) {
        return;  // zero vector stays zero; cosine flags it as degenerate
    }
    const float inv = static_cast<float>(1.0 / std::sqrt(norm2));
    for (float& x : v) {
        x *= inv;
    }
}

}  // namespace

std::vector<std::string> tokenize_words(const std::string& text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        words.push_back(std::move(cur));
    }
    return words;
}

std::vector<float> hashed_bow_embed(const std::string& text, int dim) {
    if (dim <= 0) {
        throw std::invalid_argument("hashed_bow_embed: dim must be positive");
    }
    std::vector<float> out(static_cast<size_t>(dim), 0.0f);
    for (const std::string& word : tokenize_words(text)) {
        const uint64_t h = fnv1a64(word);
        const size_t bucket = h % static_cast<uint64_t>(dim);
        out[bucket] += (h >> 32) & 1 ? 1.0f : -1.0f;
    }
    l2_normalize(out);
    return out;
}

std::vector<float> random_projection_embed(const float* data, size_t n, int dim, uint64_t seed) {
    if (dim <= 0) {
        throw std::invalid_argument("random_projection_embed: dim must be positive");
    }
    std::vector<float> out(static_cast<size_t>(dim), 0.0f);
    for (int j = 0; j < dim; ++j) {
        SplitMix rng(mix64(seed, static_cast<uint64_t>(j)));
        double acc = 0.0;
        for (size_t i = 0; i < n; ++i) {
            acc += static_cast<double>(rng.next_gaussian()) * data[i];
        }
        out[j] = static_cast<float>(acc);
    }
    l2_normalize(out);
    return out;
}

std::string EmbeddingProviders::id() const {
    char buf[96];
    std::snprintf(buf, sizeof(buf), "bow+randproj/d%d/clip=%016llx/dino=%016llx", dim,
                  static_cast<unsigned long long>(clip_seed),
                  static_cast<unsigned long long>(dino_seed));
    return buf;
}

std::vector<float> EmbeddingProviders::embed_text(const std::string& text) const {
    return hashed_bow_embed(text, dim);
}

std::vector<float> EmbeddingProviders::embed_image_clip(const TensorF& image) const {
    return random_projection_embed(image.data(), image.numel(), dim, clip_seed);
}

std::vector<float> EmbeddingProviders::embed_image_dino(const TensorF& image) const {
    return random_projection_embed(image.data(), image.numel(), dim, dino_seed);
}

}  // namespace attnroute
