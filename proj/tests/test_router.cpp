#include "attnroute/router.hpp"

#include "attnroute/harness.hpp"
#include "attnroute/kernels.hpp"
#include "attnroute/suite.hpp"

#include "testutil.hpp"

#include <doctest.h>

#include <algorithm>
#include <map>
#include <stdexcept>

using namespace attnroute;

namespace {

const EmbeddingProviders kProviders;

const AnchorSet& shipped_anchors() {
    static const AnchorSet anchors = load_anchors(data_file("anchors.txt"));
    return anchors;
}

const CentroidSet& shipped_centroids() {
    static const CentroidSet centroids = build_centroids(shipped_anchors(), kProviders);
    return centroids;
}

}  // namespace

TEST_CASE("category names round-trip") {
    for (int c = 0; c < kNumCategories; ++c) {
        const auto cat = static_cast<EditCategory>(c);
        CHECK(parse_category(to_string(cat)) == cat);
    }
    CHECK_THROWS_AS((void)parse_category("recolor"), SpecParseError);
    CHECK(static_cast<int>(EditCategory::Replace) == 0);
    CHECK(static_cast<int>(EditCategory::Background) == 5);
}

TEST_CASE("the shipped route table carries the documented mapping") {
    const RouteTable table = load_route_table(data_file("route_table.txt"));
    const OpSpec weak = parse_op_spec("kvinject:alpha=0.3,layers=frac:0.5-0.75,steps=0-28");
    const OpSpec strong = parse_op_spec("kvinject:alpha=0.5,layers=frac:0.5-0.75,steps=0-28");
    CHECK(table.at(EditCategory::Replace) == weak);
    CHECK(table.at(EditCategory::Attribute) == weak);
    CHECK(table.at(EditCategory::Background) == weak);
    CHECK(table.at(EditCategory::Remove) == strong);
    CHECK(table.at(EditCategory::Style) == strong);
    CHECK(table.at(EditCategory::Add).is_baseline());
}

TEST_CASE("route table text round-trips") {
    const RouteTable table = load_route_table(data_file("route_table.txt"));
    const RouteTable again = parse_route_table(format_route_table(table));
    for (int c = 0; c < kNumCategories; ++c) {
        CHECK(table.routes[c] == again.routes[c]);
    }
}

TEST_CASE("route table parsing rejects gaps, repeats, and junk") {
    CHECK_THROWS_AS((void)parse_route_table("replace = baseline"), SpecParseError);  // missing rest
    const std::string full = format_route_table(load_route_table(data_file("route_table.txt")));
    CHECK_THROWS_AS((void)parse_route_table(full + "\nreplace = baseline\n"), SpecParseError);
    CHECK_THROWS_AS((void)parse_route_table(full + "\nrecolor = baseline\n"), SpecParseError);
    CHECK_THROWS_AS((void)parse_route_table("replace baseline\n"), SpecParseError);
    CHECK_THROWS_AS((void)parse_route_table("replace = notanop\n"), SpecParseError);
}

TEST_CASE("anchor files parse and truncate") {
    const AnchorSet& anchors = shipped_anchors();
    CHECK(anchors.provider_id == kProviders.id());
    for (int c = 0; c < kNumCategories; ++c) {
        CHECK(anchors.anchors[c].size() == 5);
    }
    const AnchorSet one = anchors.truncated(1);
    for (int c = 0; c < kNumCategories; ++c) {
        REQUIRE(one.anchors[c].size() == 1);
        CHECK(one.anchors[c][0] == anchors.anchors[c][0]);
    }
    // Truncating past the list length keeps what exists.
    const AnchorSet big = anchors.truncated(99);
    CHECK(big.anchors[0].size() == 5);
    CHECK_THROWS_AS((void)anchors.truncated(0), std::invalid_argument);
}

TEST_CASE("anchor parsing rejects malformed files") {
    CHECK_THROWS_AS((void)parse_anchors("replace | only one category\n"), SpecParseError);
    CHECK_THROWS_AS((void)parse_anchors("recolor | sentence\n"), SpecParseError);
    CHECK_THROWS_AS((void)parse_anchors("replace just text\n"), SpecParseError);
    CHECK_THROWS_AS((void)parse_anchors("replace |   \n"), SpecParseError);
}

TEST_CASE("centroids are unit length in the provider space") {
    const CentroidSet& cents = shipped_centroids();
    CHECK(cents.dim == kProviders.dim);
    CHECK(cents.provider_id == kProviders.id());
    for (int c = 0; c < kNumCategories; ++c) {
        double norm2 = 0.0;
        for (float v : cents.centroid[c]) {
            norm2 += static_cast<double>(v) * v;
        }
        CHECK(norm2 == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("a single-anchor centroid is that anchor's embedding") {
    const AnchorSet one = shipped_anchors().truncated(1);
    const CentroidSet cents = build_centroids(one, kProviders);
    const std::vector<float> e = kProviders.embed_text(one.anchors[0][0]);
    const CosineResult r = cosine(cents.centroid[0].data(), e.data(), e.size());
    CHECK(r.value == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("centroids reject anchors tuned for another provider") {
    AnchorSet anchors = shipped_anchors();
    anchors.provider_id = "someone-else/v2";
    CHECK_THROWS_AS((void)build_centroids(anchors, kProviders), std::invalid_argument);
}

TEST_CASE("an antipodal anchor pair is rejected by category name") {
    // Single-word texts embed as one signed unit bucket, so two words that
    // hash to the same bucket with opposite signs cancel exactly.
    std::map<int, std::pair<std::string, float>> seen;
    std::string word_a, word_b;
    for (int i = 0; i < 20000 && word_a.empty(); ++i) {
        const std::string w = "w" + std::to_string(i);
        const std::vector<float> e = hashed_bow_embed(w, kProviders.dim);
        int bucket = -1;
        float sign = 0.0f;
        for (int j = 0; j < kProviders.dim; ++j) {
            if (e[j] != 0.0f) {
                bucket = j;
                sign = e[j];
            }
        }
        REQUIRE(bucket >= 0);
        auto [it, inserted] = seen.emplace(bucket, std::pair{w, sign});
        if (!inserted && it->second.second == -sign) {
            word_a = it->second.first;
            word_b = w;
        }
    }
    REQUIRE(!word_a.empty());

    AnchorSet anchors = shipped_anchors();
    anchors.anchors[static_cast<int>(EditCategory::Style)] = {word_a, word_b};
    bool threw = false;
    try {
        (void)build_centroids(anchors, kProviders);
    } catch (const std::invalid_argument& e) {
        threw = true;
        CHECK(std::string(e.what()).find("style") != std::string::npos);
    }
    CHECK(threw);
}

TEST_CASE("every shipped anchor classifies to its own category") {
    const AnchorSet& anchors = shipped_anchors();
    for (int c = 0; c < kNumCategories; ++c) {
        const auto cat = static_cast<EditCategory>(c);
        for (const std::string& sentence : anchors.at(cat)) {
            CAPTURE(sentence);
            CHECK(classify(sentence, shipped_centroids(), kProviders) == cat);
        }
    }
}

TEST_CASE("unseen phrasings land in the right category") {
    const CentroidSet& cents = shipped_centroids();
    CHECK(classify("make it a watercolor painting", cents, kProviders) == EditCategory::Style);
    CHECK(classify("replace the sky with a sunset", cents, kProviders) == EditCategory::Replace);
    CHECK(classify("add a red hat", cents, kProviders) == EditCategory::Add);
    CHECK(classify("make the car blue", cents, kProviders) == EditCategory::Attribute);
}

TEST_CASE("the empty instruction falls to the lowest ordinal") {
    CHECK(classify("", shipped_centroids(), kProviders) == EditCategory::Replace);
    // Same for text that tokenizes to nothing.
    CHECK(classify("!!! ???", shipped_centroids(), kProviders) == EditCategory::Replace);
}

TEST_CASE("classification ignores word order") {
    const CentroidSet& cents = shipped_centroids();
    const char* pairs[][2] = {
        {"remove the sign from the wall", "the wall from the sign remove the"},
        {"change the background to a beach", "a beach to the background change the"},
        {"make the house blue", "blue house the make"},
    };
    for (const auto& [fwd, shuffled] : pairs) {
        CHECK(classify(fwd, cents, kProviders) == classify(shuffled, cents, kProviders));
    }
}

TEST_CASE("anchor order within a category does not change decisions") {
    AnchorSet reversed = shipped_anchors();
    for (auto& list : reversed.anchors) {
        std::reverse(list.begin(), list.end());
    }
    const CentroidSet alt = build_centroids(reversed, kProviders);
    const auto suite = generate_suite(17, 42);
    for (const EditCase& ec : suite) {
        CHECK(classify(ec.instruction, alt, kProviders) ==
              classify(ec.instruction, shipped_centroids(), kProviders));
    }
}

TEST_CASE("classify refuses centroids from another provider") {
    CentroidSet cents = shipped_centroids();
    cents.provider_id = "someone-else/v2";
    CHECK_THROWS_AS((void)classify("add a hat", cents, kProviders), std::logic_error);
}

TEST_CASE("the zero-shot classifier is accurate on the stock suite") {
    const auto suite = generate_suite(17, 42);
    int correct = 0;
    for (const EditCase& ec : suite) {
        if (classify(ec.instruction, shipped_centroids(), kProviders) == ec.category) {
            ++correct;
        }
    }
    // Measured 100/100 with the shipped anchors; the contract floor is 90%.
    CHECK(correct >= 90);
}

TEST_CASE("one anchor per category already routes like five") {
    const CentroidSet one = build_centroids(shipped_anchors().truncated(1), kProviders);
    const auto suite = generate_suite(17, 42);
    int agree = 0;
    for (const EditCase& ec : suite) {
        if (classify(ec.instruction, one, kProviders) ==
            classify(ec.instruction, shipped_centroids(), kProviders)) {
            ++agree;
        }
    }
    CHECK(agree >= 90);
}

TEST_CASE("route is a plain table lookup") {
    const RouteTable table = load_route_table(data_file("route_table.txt"));
    for (int c = 0; c < kNumCategories; ++c) {
        const auto cat = static_cast<EditCategory>(c);
        CHECK(route(cat, table) == table.at(cat));
    }
}

TEST_CASE("a routed add edit is bit-identical to the baseline") {
    // The add route is baseline, so routing must add nothing on top.
    ModelConfig mc;
    mc.num_layers = 3;
    mc.d_model = 8;
    mc.heads = 2;
    mc.noise_tokens = 4;
    mc.source_tokens = 4;
    mc.text_tokens = 4;
    const Model model(mc);
    const LatentImage src = encode_source("a cat", mc, 5);
    SampleConfig sc;
    sc.steps = 3;
    sc.seed = 5;

    RouterContext router;
    router.table = load_route_table(data_file("route_table.txt"));
    router.centroids = shipped_centroids();
    router.providers = kProviders;

    RoutedEditInfo info;
    const TensorF routed = routed_edit(model, src, "add a hat to the cat", router,
                                       EditCategory::Add, sc, {}, nullptr, &info);
    CHECK(info.oracle);
    CHECK(info.category == EditCategory::Add);
    CHECK(info.spec.is_baseline());

    const TensorF plain = run_edit(model, src, "add a hat to the cat",
                                   parse_op_spec("baseline"), sc);
    CHECK(routed.same_bits(plain));
}

TEST_CASE("auto mode classifies and reports what it ran") {
    ModelConfig mc;
    mc.num_layers = 3;
    mc.d_model = 8;
    mc.heads = 2;
    mc.noise_tokens = 4;
    mc.source_tokens = 4;
    mc.text_tokens = 4;
    const Model model(mc);
    const LatentImage src = encode_source("a car", mc, 6);
    SampleConfig sc;
    sc.steps = 2;
    sc.seed = 6;

    RouterContext router;
    router.table = load_route_table(data_file("route_table.txt"));
    router.centroids = shipped_centroids();
    router.providers = kProviders;

    EditRunStats stats;
    RoutedEditInfo info;
    (void)routed_edit(model, src, "make the car red", router, std::nullopt, sc, {}, &stats, &info);
    CHECK(!info.oracle);
    CHECK(info.category == EditCategory::Attribute);
    CHECK(info.spec == router.table.at(EditCategory::Attribute));
    CHECK(stats.firings_total == 6 * mc.num_layers * 2 * sc.steps);
    CHECK(stats.modifications_total > 0);
}
