#pragma once

#include "attnroute/router.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace attnroute {

// One synthetic edit task. The seed is part of the case identity: every
// variant must consume exactly this (seed, source, instruction) triple.
struct EditCase {
    std::string id;
    EditCategory category = EditCategory::Replace;
    std::string source_label;
    std::string instruction;
    uint64_t seed = 0;

    bool operator==(const EditCase&) const = default;
};

// Deterministic stratified suite: templated instructions per category,
// source labels from a fixed pool, per-case seeds split off master_seed.
// Four categories get n_per_category cases; attribute and background get
// one fewer (floored at 1), so n_per_category=17 yields the 100-case
// 17/17/17/16/17/16 split.
std::vector<EditCase> generate_suite(int n_per_category, uint64_t master_seed);

// Pipe-delimited one-line-per-case form: id|category|source_label|seed|instruction.
std::string format_suite(const std::vector<EditCase>& cases);
std::vector<EditCase> parse_suite(const std::string& text);

void save_suite(const std::string& path, const std::vector<EditCase>& cases);
std::vector<EditCase> load_suite(const std::string& path);

}  // namespace attnroute
