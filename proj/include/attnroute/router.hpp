#pragma once

#include "attnroute/edit.hpp"
#include "attnroute/embedding.hpp"
#include "attnroute/ops.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace attnroute {

// The six edit categories, in routing ordinal order. The ordinal is part
// of the contract: classification ties break toward the lowest one.
enum class EditCategory { Replace = 0, Add, Remove, Attribute, Style, Background };
constexpr int kNumCategories = 6;

const char* to_string(EditCategory category);
EditCategory parse_category(const std::string& name);

// Total category -> op table.
struct RouteTable {
    std::array<OpSpec, kNumCategories> routes;

    const OpSpec& at(EditCategory c) const { return routes[static_cast<size_t>(c)]; }
    OpSpec& at(EditCategory c) { return routes[static_cast<size_t>(c)]; }
};

// One `category = <op spec>` line per category; every category must appear
// exactly once. '#' starts a comment.
RouteTable parse_route_table(const std::string& text);
RouteTable load_route_table(const std::string& path);
std::string format_route_table(const RouteTable& table);

// Hand-written anchor sentences per category, used to build the zero-shot
// centroids. provider_id names the text-embedding space they were tuned
// for.
struct AnchorSet {
    std::array<std::vector<std::string>, kNumCategories> anchors;
    std::string provider_id;

    const std::vector<std::string>& at(EditCategory c) const {
        return anchors[static_cast<size_t>(c)];
    }
    // Same set with at most k anchors per category (for K ablations).
    AnchorSet truncated(int k) const;
};

// `category | sentence` lines, '#' comments. Every category needs at least
// one anchor.
AnchorSet parse_anchors(const std::string& text);
AnchorSet load_anchors(const std::string& path);

struct CentroidSet {
    int dim = 0;
    std::string provider_id;
    std::array<std::vector<float>, kNumCategories> centroid;
};

// Mean of each category's anchor embeddings, re-normalized to unit length.
// A zero-norm mean (antipodal anchors) is rejected by category name.
CentroidSet build_centroids(const AnchorSet& anchors, const EmbeddingProviders& providers);

// Nearest centroid by cosine; ties (including the all-zero embedding of an
// empty instruction) break toward the lowest ordinal.
EditCategory classify(const std::string& instruction, const CentroidSet& centroids,
                      const EmbeddingProviders& providers);

// Pure table lookup.
const OpSpec& route(EditCategory category, const RouteTable& table);

struct RouterContext {
    RouteTable table;
    CentroidSet centroids;
    EmbeddingProviders providers;
};

struct RoutedEditInfo {
    EditCategory category = EditCategory::Replace;
    OpSpec spec;
    bool oracle = false;
};

// Classify (or take the oracle category), look up the route, run the edit.
TensorF routed_edit(const Model& model, const LatentImage& source, const std::string& instruction,
                    const RouterContext& router, std::optional<EditCategory> oracle_category,
                    const SampleConfig& sc, const EditRunOptions& opts = {},
                    EditRunStats* stats = nullptr, RoutedEditInfo* info = nullptr);

}  // namespace attnroute
