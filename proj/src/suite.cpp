#include "attnroute/suite.hpp"

#include "attnroute/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <stdexcept>

namespace attnroute {

namespace {

const uint64_t kSuiteSalt = fnv1a64("suite.cases");

const char* kLabels[] = {"cat",   "dog",   "car",    "tree",  "house",    "bird",
                         "boat",  "chair", "apple",  "lamp",  "horse",    "bridge",
                         "clock", "guitar", "kettle", "river"};
const char* kAdjectives[] = {"red", "blue", "golden", "shiny", "striped", "wooden", "tiny",
                             "giant"};
const char* kStyles[] = {"watercolor", "oil", "charcoal", "pastel", "mosaic", "ink"};
const char* kScenes[] = {"beach",  "forest", "desert", "city street",
                         "snowy field", "night sky", "meadow", "harbor"};

template <size_t N>
const char* pick(const char* (&pool)[N], SplitMix& rng) {
    return pool[rng.next_u64() % N];
}

std::string instruction_for(EditCategory category, const std::string& label, SplitMix& rng) {
    switch (category) {
        case EditCategory::Replace: {
            std::string other = pick(kLabels, rng);
            if (other == label) {
                other = kLabels[(rng.next_u64() + 1) % std::size(kLabels)];
            }
            if (other == label) {
                other = label == "cat" ? "dog" : "cat";
            }
            return "Replace the " + label + " with a " + other;
        }
        case EditCategory::Add:
            return "Add a " + std::string(pick(kLabels, rng)) + " next to the " + label;
        case EditCategory::Remove:
            return "Remove the " + label + " from the picture";
        case EditCategory::Attribute:
            return "Make the " + label + " " + pick(kAdjectives, rng);
        case EditCategory::Style:
            return "Turn this into a " + std::string(pick(kStyles, rng)) + " painting";
        case EditCategory::Background:
            return "Change the background to a " + std::string(pick(kScenes, rng));
    }
    throw std::logic_error("unreachable edit category");
}

}  // namespace

std::vector<EditCase> generate_suite(int n_per_category, uint64_t master_seed) {
    if (n_per_category < 1) {
        throw std::invalid_argument("generate_suite: n_per_category must be >= 1");
    }
    std::vector<EditCase> cases;
    int ordinal = 0;
    for (int ci = 0; ci < kNumCategories; ++ci) {
        const auto category = static_cast<EditCategory>(ci);
        const bool smaller =
            category == EditCategory::Attribute || category == EditCategory::Background;
        const int count = smaller ? std::max(1, n_per_category - 1) : n_per_category;
        for (int k = 0; k < count; ++k, ++ordinal) {
            // One independent stream per case, keyed by suite ordinal, so
            // a case's content never depends on its neighbors.
            SplitMix rng(mix64(mix64(kSuiteSalt, master_seed), static_cast<uint64_t>(ordinal)));
            EditCase c;
            char id[32];
            std::snprintf(id, sizeof(id), "%s-%03d", to_string(category), k);
            c.id = id;
            c.category = category;
            c.source_label = pick(kLabels, rng);
            c.instruction = instruction_for(category, c.source_label, rng);
            c.seed = rng.next_u64();
            cases.push_back(std::move(c));
        }
    }
    return cases;
}

std::string format_suite(const std::vector<EditCase>& cases) {
    std::string out = "# id|category|source_label|seed|instruction\n";
    for (const EditCase& c : cases) {
        out += c.id;
        out += "|";
        out += to_string(c.category);
        out += "|";
        out += c.source_label;
        out += "|";
        out += std::to_string(c.seed);
        out += "|";
        out += c.instruction;
        out += "\n";
    }
    return out;
}

std::vector<EditCase> parse_suite(const std::string& text) {
    std::vector<EditCase> cases;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || line[0] == '#') {
            continue;
        }
        EditCase c;
        size_t p0 = line.find('|');
        size_t p1 = p0 == std::string::npos ? p0 : line.find('|', p0 + 1);
        size_t p2 = p1 == std::string::npos ? p1 : line.find('|', p1 + 1);
        size_t p3 = p2 == std::string::npos ? p2 : line.find('|', p2 + 1);
        if (p3 == std::string::npos) {
            throw SpecParseError("suite line " + std::to_string(lineno) +
                                 ": expected 5 |-separated fields");
        }
        c.id = line.substr(0, p0);
        c.category = parse_category(line.substr(p0 + 1, p1 - p0 - 1));
        c.source_label = line.substr(p1 + 1, p2 - p1 - 1);
        const std::string seed_text = line.substr(p2 + 1, p3 - p2 - 1);
        try {
            size_t used = 0;
            c.seed = std::stoull(seed_text, &used);
            if (used != seed_text.size()) {
                throw std::invalid_argument(seed_text);
            }
        } catch (const std::exception&) {
            throw SpecParseError("suite line " + std::to_string(lineno) + ": bad seed '" +
                                 seed_text + "'");
        }
        c.instruction = line.substr(p3 + 1);
        if (c.id.empty() || c.instruction.empty()) {
            throw SpecParseError("suite line " + std::to_string(lineno) +
                                 ": id and instruction must be non-empty");
        }
        cases.push_back(std::move(c));
    }
    return cases;
}

void save_suite(const std::string& path, const std::vector<EditCase>& cases) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << format_suite(cases);
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

std::vector<EditCase> load_suite(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_suite(buf.str());
}

}  // namespace attnroute
