#pragma once

#include "attnroute/config.hpp"
#include "attnroute/metrics.hpp"
#include "attnroute/router.hpp"
#include "attnroute/suite.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace attnroute {

enum class RouteMode { Oracle, Auto };

struct RoutedVariant {
    RouteMode mode = RouteMode::Auto;
};

// What a variant runs per case: one fixed op, or the router in one mode.
using VariantSpec = std::variant<OpSpec, RoutedVariant>;

// Everything one case consumed and produced under one variant. The
// (seed, source_label, instruction) triple is logged so paired-seed audits
// can diff what was actually consumed, not what was intended.
struct CaseRecord {
    std::string case_id;
    uint64_t seed = 0;
    std::string source_label;
    std::string instruction;
    MetricsReport metrics;
    long firings = 0;
    long modifications = 0;
    double seconds = 0.0;
    std::string error;  // non-empty marks the case as failed
};

struct VariantResult {
    std::string name;
    std::vector<CaseRecord> cases;
    MetricsReport mean;  // meaningful only when complete
    long firings_total = 0;
    double seconds_per_case = 0.0;
    // False when any case failed; incomplete variants are never averaged
    // into reports.
    bool complete = false;
};

struct RunOptions {
    int workers = 1;
    // Use source labels as captions, enabling the directional metric.
    bool captions = false;
    // Timing stays off by default so reports are byte-stable across runs
    // and worker counts.
    bool timing = false;
    EmbeddingProviders providers;
};

// Runs every suite case under one variant and aggregates. Case order in
// the result matches the suite regardless of worker count. Router-mode
// variants need a RouterContext.
VariantResult run_variant(const std::string& name, const VariantSpec& spec,
                          const std::vector<EditCase>& suite, const Model& model,
                          const SampleConfig& sc, const RunOptions& opts,
                          const RouterContext* router = nullptr);

enum class SweepAxis { Alpha, Layers, Steps, TextScale, KVScale, Main };

SweepAxis parse_axis(const std::string& name);
const char* to_string(SweepAxis axis);

struct SweepPoint {
    std::string name;
    VariantSpec spec;
};

// The stock grids: alpha {0.3,0.5,0.7} x two mid-depth fraction bands;
// three disjoint quarter-depth bands at alpha 0.3; four 7-step windows
// plus full steps; text scales {0.5,1.5,3}; the five (half, factor)
// rescale settings; and the main head-to-head table. `steps` sizes the
// full-step bands.
std::vector<SweepPoint> default_grid(SweepAxis axis, int steps);

// Baseline reference first, then one result per grid point in grid order.
// For the kvscale and main axes the best-composite kvscale variant gets a
// '*' suffix (the "best" setting is empirical, not hard-coded). Ends with
// a paired-seed audit.
std::vector<VariantResult> sweep(SweepAxis axis, const std::vector<SweepPoint>& grid,
                                 const std::vector<EditCase>& suite, const Model& model,
                                 const SampleConfig& sc, const RunOptions& opts,
                                 const RouterContext* router = nullptr);

// Verifies every variant consumed identical (seed, source, prompt)
// triples per case; throws naming the first divergence.
void audit_paired_seeds(const std::vector<VariantResult>& results);

// ============================================================================
// reports
// ============================================================================

struct ReportRow {
    std::string variant;
    double clip_t = 0.0;
    double dino_i = 0.0;
    std::optional<double> clip_d;
    double composite = 0.0;
    std::optional<double> delta_vs_baseline;
    long firings = 0;
    double seconds_per_case = 0.0;

    bool operator==(const ReportRow&) const = default;
};

enum class ReportFormat { Csv, Json, Text };
ReportFormat parse_report_format(const std::string& name);

// One row per complete variant; throws if any variant is incomplete.
// delta_vs_baseline is filled against the variant named "baseline" when
// present.
std::vector<ReportRow> to_rows(const std::vector<VariantResult>& results);

// Fixed 4-decimal formatting, byte-stable ordering. The header records the
// embedding provider and the directional-metric definition.
std::string emit_report(const std::vector<ReportRow>& rows, const std::string& provider_id,
                        ReportFormat format);

struct ParsedReport {
    std::string provider_id;
    std::vector<ReportRow> rows;
};
ParsedReport parse_report_csv(const std::string& text);

// 4-decimal fixed-point with no negative zero.
std::string format_fixed(double value, int decimals = 4);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

// Path of a shipped data file (route table, anchors, model config).
std::string data_file(const std::string& name);

}  // namespace attnroute
