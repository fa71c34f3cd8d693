#pragma once

#include "attnroute/embedding.hpp"
#include "attnroute/model.hpp"

#include <optional>
#include <string>

namespace attnroute {

struct MetricsReport {
    double clip_t = 0.0;
    double dino_i = 0.0;
    std::optional<double> clip_d;
    double composite = 0.0;
    // Set when any embedding involved had zero norm.
    bool degenerate = false;
};

// The headline aggregate: equal-weight mean of the two similarities.
inline double composite(double clip_t, double dino_i) {
    return 0.5 * clip_t + 0.5 * dino_i;
}

// Prompt following: cosine of the edited latent's image embedding and the
// instruction's text embedding, both in the shared text/image space.
double clip_t(const TensorF& edit, const std::string& instruction,
              const EmbeddingProviders& providers, bool* degenerate = nullptr);

// Source preservation: cosine of the edit's and the source's image
// embeddings.
double dino_i(const TensorF& edit, const LatentImage& source, const EmbeddingProviders& providers,
              bool* degenerate = nullptr);

// Directional similarity cos(image delta, text delta). Needs a source
// caption; without one the metric is null.
std::optional<double> clip_d(const TensorF& edit, const LatentImage& source,
                             const std::string& instruction,
                             const std::optional<std::string>& source_caption,
                             const EmbeddingProviders& providers);

MetricsReport compute_metrics(const TensorF& edit, const LatentImage& source,
                              const std::string& instruction,
                              const std::optional<std::string>& source_caption,
                              const EmbeddingProviders& providers);

}  // namespace attnroute
