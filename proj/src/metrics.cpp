#include "attnroute/metrics.hpp"

#include "attnroute/kernels.hpp"

namespace attnroute {

namespace {

double checked_cosine(const std::vector<float>& a, const std::vector<float>& b,
                      bool* degenerate) {
    CosineResult r = cosine(a.data(), b.data(), a.size());
    if (degenerate && r.degenerate) {
        *degenerate = true;
    }
    return r.value;
}

}  // namespace

double clip_t(const TensorF& edit, const std::string& instruction,
              const EmbeddingProviders& providers, bool* degenerate) {
    return checked_cosine(providers.embed_image_clip(edit), providers.embed_text(instruction),
                          degenerate);
}

double dino_i(const TensorF& edit, const LatentImage& source, const EmbeddingProviders& providers,
              bool* degenerate) {
    return checked_cosine(providers.embed_image_dino(edit),
                          providers.embed_image_dino(source.tokens), degenerate);
}

std::optional<double> clip_d(const TensorF& edit, const LatentImage& source,
                             const std::string& instruction,
                             const std::optional<std::string>& source_caption,
                             const EmbeddingProviders& providers) {
    if (!source_caption) {
        return std::nullopt;
    }
    std::vector<float> img_edit = providers.embed_image_clip(edit);
    std::vector<float> img_src = providers.embed_image_clip(source.tokens);
    std::vector<float> txt_edit = providers.embed_text(instruction);
    std::vector<float> txt_src = providers.embed_text(*source_caption);
    for (size_t i = 0; i < img_edit.size(); ++i) {
        img_edit[i] -= img_src[i];
        txt_edit[i] -= txt_src[i];
    }
    return cosine(img_edit.data(), txt_edit.data(), img_edit.size()).value;
}

MetricsReport compute_metrics(const TensorF& edit, const LatentImage& source,
                              const std::string& instruction,
                              const std::optional<std::string>& source_caption,
                              const EmbeddingProviders& providers) {
    MetricsReport m;
    m.clip_t = clip_t(edit, instruction, providers, &m.degenerate);
    m.dino_i = dino_i(edit, source, providers, &m.degenerate);
    m.clip_d = clip_d(edit, source, instruction, source_caption, providers);
    m.composite = composite(m.clip_t, m.dino_i);
    return m;
}

}  // namespace attnroute
