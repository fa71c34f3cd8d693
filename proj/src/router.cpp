#include "attnroute/router.hpp"

#include "attnroute/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace attnroute {

namespace {

const char* kCategoryNames[kNumCategories] = {"replace", "add",   "remove",
                                              "attribute", "style", "background"};

std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

// Yields stripped, comment-free lines.
std::vector<std::string> config_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = strip(line);
        if (!line.empty()) {
            lines.push_back(line);
        }
    }
    return lines;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

const char* to_string(EditCategory category) {
    return kCategoryNames[static_cast<size_t>(category)];
}

EditCategory parse_category(const std::string& name) {
    for (int i = 0; i < kNumCategories; ++i) {
        if (name == kCategoryNames[i]) {
            return static_cast<EditCategory>(i);
        }
    }
    throw SpecParseError("unknown edit category '" + name + "'");
}

RouteTable parse_route_table(const std::string& text) {
    RouteTable table;
    std::array<bool, kNumCategories> seen{};
    for (const std::string& line : config_lines(text)) {
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw SpecParseError("route table: expected 'category = <op spec>', got '" + line +
                                 "'");
        }
        EditCategory c = parse_category(strip(line.substr(0, eq)));
        if (seen[static_cast<size_t>(c)]) {
            throw SpecParseError(std::string("route table: duplicate category '") + to_string(c) +
                                 "'");
        }
        seen[static_cast<size_t>(c)] = true;
        table.at(c) = parse_op_spec(strip(line.substr(eq + 1)));
    }
    for (int i = 0; i < kNumCategories; ++i) {
        if (!seen[i]) {
            throw SpecParseError(std::string("route table: missing category '") +
                                 kCategoryNames[i] + "'");
        }
    }
    return table;
}

RouteTable load_route_table(const std::string& path) {
    return parse_route_table(read_text_file(path));
}

std::string format_route_table(const RouteTable& table) {
    std::string out;
    for (int i = 0; i < kNumCategories; ++i) {
        out += kCategoryNames[i];
        out += " = ";
        out += format_op_spec(table.routes[i]);
        out += "\n";
    }
    return out;
}

AnchorSet AnchorSet::truncated(int k) const {
    if (k < 1) {
        throw std::invalid_argument("anchor truncation needs k >= 1");
    }
    AnchorSet out;
    out.provider_id = provider_id;
    for (int i = 0; i < kNumCategories; ++i) {
        const auto& src = anchors[i];
        out.anchors[i].assign(src.begin(),
                              src.begin() + std::min<size_t>(src.size(), static_cast<size_t>(k)));
    }
    return out;
}

AnchorSet parse_anchors(const std::string& text) {
    AnchorSet set;
    set.provider_id = EmbeddingProviders{}.id();
    for (const std::string& line : config_lines(text)) {
        size_t bar = line.find('|');
        if (bar == std::string::npos) {
            throw SpecParseError("anchor file: expected 'category | sentence', got '" + line +
                                 "'");
        }
        EditCategory c = parse_category(strip(line.substr(0, bar)));
        std::string sentence = strip(line.substr(bar + 1));
        if (sentence.empty()) {
            throw SpecParseError(std::string("anchor file: empty sentence for '") + to_string(c) +
                                 "'");
        }
        set.anchors[static_cast<size_t>(c)].push_back(sentence);
    }
    for (int i = 0; i < kNumCategories; ++i) {
        if (set.anchors[i].empty()) {
            throw SpecParseError(std::string("anchor file: no anchors for '") + kCategoryNames[i] +
                                 "'");
        }
    }
    return set;
}

AnchorSet load_anchors(const std::string& path) {
    return parse_anchors(read_text_file(path));
}

CentroidSet build_centroids(const AnchorSet& anchors, const EmbeddingProviders& providers) {
    if (!anchors.provider_id.empty() && anchors.provider_id != providers.id()) {
        throw std::invalid_argument("centroids: anchors were tuned for provider '" +
                                    anchors.provider_id + "', got '" + providers.id() + "'");
    }
    CentroidSet set;
    set.dim = providers.dim;
    set.provider_id = providers.id();
    for (int i = 0; i < kNumCategories; ++i) {
        const auto& sentences = anchors.anchors[i];
        if (sentences.empty()) {
            throw std::invalid_argument(std::string("centroids: no anchors for '") +
                                        kCategoryNames[i] + "'");
        }
        std::vector<double> mean(static_cast<size_t>(providers.dim), 0.0);
        for (const std::string& s : sentences) {
            std::vector<float> e = providers.embed_text(s);
            for (size_t j = 0; j < mean.size(); ++j) {
                mean[j] += e[j];
            }
        }
        double norm2 = 0.0;
        for (double& v : mean) {
            v /= static_cast<double>(sentences.size());
            norm2 += v * v;
        }
        if (norm2 <= 0.0) {
            throw std::invalid_argument(std::string("centroids: zero-norm mean for '") +
                                        kCategoryNames[i] + "'");
        }
        const double inv = 1.0 / std::sqrt(norm2);
        std::vector<float>& c = set.centroid[i];
        c.resize(mean.size());
        for (size_t j = 0; j < mean.size(); ++j) {
            c[j] = static_cast<float>(mean[j] * inv);
        }
    }
    return set;
}

EditCategory classify(const std::string& instruction, const CentroidSet& centroids,
                      const EmbeddingProviders& providers) {
    if (centroids.provider_id != providers.id()) {
        throw std::logic_error("classify: centroids built for provider '" + centroids.provider_id +
                               "', got '" + providers.id() + "'");
    }
    std::vector<float> e = providers.embed_text(instruction);
    int best = 0;
    double best_sim = -2.0;
    for (int i = 0; i < kNumCategories; ++i) {
        // degenerate (zero) embeddings score 0 against every centroid, so
        // an empty instruction falls to the lowest ordinal below
        const double sim = cosine(e.data(), centroids.centroid[i].data(), e.size()).value;
        if (sim > best_sim) {
            best_sim = sim;
            best = i;
        }
    }
    return static_cast<EditCategory>(best);
}

const OpSpec& route(EditCategory category, const RouteTable& table) {
    return table.at(category);
}

TensorF routed_edit(const Model& model, const LatentImage& source, const std::string& instruction,
                    const RouterContext& router, std::optional<EditCategory> oracle_category,
                    const SampleConfig& sc, const EditRunOptions& opts, EditRunStats* stats,
                    RoutedEditInfo* info) {
    const EditCategory category =
        oracle_category ? *oracle_category : classify(instruction, router.centroids, router.providers);
    const OpSpec& spec = route(category, router.table);
    if (info) {
        info->category = category;
        info->spec = spec;
        info->oracle = oracle_category.has_value();
    }
    return run_edit(model, source, instruction, spec, sc, opts, stats);
}

}  // namespace attnroute
