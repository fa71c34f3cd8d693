#include "attnroute/harness.hpp"

#include "attnroute/edit.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <functional>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace attnroute {

namespace {

// Index-claiming worker pool; the output slot per index is fixed, so
// results are identical for any worker count.
void parallel_for(size_t n, int workers, const std::function<void(size_t)>& fn) {
    if (workers <= 1 || n <= 1) {
        for (size_t i = 0; i < n; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto body = [&] {
        while (true) {
            const size_t i = next.fetch_add(1);
            if (i >= n) {
                return;
            }
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) {
                    first_error = std::current_exception();
                }
            }
        }
    };
    std::vector<std::thread> pool;
    const size_t count = std::min<size_t>(static_cast<size_t>(workers), n);
    pool.reserve(count);
    for (size_t t = 0; t < count; ++t) {
        pool.emplace_back(body);
    }
    for (std::thread& t : pool) {
        t.join();
    }
    if (first_error) {
        std::rethrow_exception(first_error);
    }
}

OpSpec kvinject_spec(double alpha, double frac_lo, double frac_hi, int step_lo, int step_hi) {
    KVInjectSpec k;
    k.alpha = alpha;
    k.band.layers = {true, frac_lo, frac_hi};
    k.band.step_lo = step_lo;
    k.band.step_hi = step_hi;
    return {k};
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

}  // namespace

VariantResult run_variant(const std::string& name, const VariantSpec& spec,
                          const std::vector<EditCase>& suite, const Model& model,
                          const SampleConfig& sc, const RunOptions& opts,
                          const RouterContext* router) {
    if (std::holds_alternative<RoutedVariant>(spec) && !router) {
        throw std::logic_error("run_variant: variant '" + name + "' needs a router context");
    }

    VariantResult result;
    result.name = name;
    result.cases.resize(suite.size());

    parallel_for(suite.size(), opts.workers, [&](size_t i) {
        const EditCase& c = suite[i];
        CaseRecord rec;
        rec.case_id = c.id;
        rec.seed = c.seed;
        rec.source_label = c.source_label;
        rec.instruction = c.instruction;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            LatentImage source = encode_source(c.source_label, model.config(), c.seed);
            SampleConfig case_sc = sc;
            case_sc.seed = c.seed;
            EditRunStats stats;
            TensorF edit;
            if (const OpSpec* op = std::get_if<OpSpec>(&spec)) {
                edit = run_edit(model, source, c.instruction, *op, case_sc, {}, &stats);
            } else {
                const RoutedVariant& rv = std::get<RoutedVariant>(spec);
                std::optional<EditCategory> oracle;
                if (rv.mode == RouteMode::Oracle) {
                    oracle = c.category;
                }
                edit = routed_edit(model, source, c.instruction, *router, oracle, case_sc, {},
                                   &stats);
            }
            rec.firings = stats.firings_total;
            rec.modifications = stats.modifications_total;
            std::optional<std::string> caption;
            if (opts.captions) {
                caption = c.source_label;
            }
            rec.metrics = compute_metrics(edit, source, c.instruction, caption, opts.providers);
        } catch (const std::exception& e) {
            rec.error = e.what();
        }
        if (opts.timing) {
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                              .count();
        }
        result.cases[i] = std::move(rec);
    });

    // Aggregate sequentially in suite order so means are bit-stable.
    result.complete = !result.cases.empty();
    double sum_t = 0.0, sum_i = 0.0, sum_d = 0.0, sum_sec = 0.0;
    bool all_have_d = true;
    for (const CaseRecord& rec : result.cases) {
        if (!rec.error.empty()) {
            result.complete = false;
            continue;
        }
        sum_t += rec.metrics.clip_t;
        sum_i += rec.metrics.dino_i;
        if (rec.metrics.clip_d) {
            sum_d += *rec.metrics.clip_d;
        } else {
            all_have_d = false;
        }
        result.mean.degenerate = result.mean.degenerate || rec.metrics.degenerate;
        result.firings_total += rec.firings;
        sum_sec += rec.seconds;
    }
    if (result.complete) {
        const double n = static_cast<double>(result.cases.size());
        result.mean.clip_t = sum_t / n;
        result.mean.dino_i = sum_i / n;
        result.mean.composite = composite(result.mean.clip_t, result.mean.dino_i);
        if (all_have_d) {
            result.mean.clip_d = sum_d / n;
        }
        result.seconds_per_case = sum_sec / n;
    }
    return result;
}

SweepAxis parse_axis(const std::string& name) {
    if (name == "alpha") return SweepAxis::Alpha;
    if (name == "layers") return SweepAxis::Layers;
    if (name == "steps") return SweepAxis::Steps;
    if (name == "textscale") return SweepAxis::TextScale;
    if (name == "kvscale") return SweepAxis::KVScale;
    if (name == "main") return SweepAxis::Main;
    throw SpecParseError("unknown sweep axis '" + name + "'");
}

const char* to_string(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::Alpha: return "alpha";
        case SweepAxis::Layers: return "layers";
        case SweepAxis::Steps: return "steps";
        case SweepAxis::TextScale: return "textscale";
        case SweepAxis::KVScale: return "kvscale";
        case SweepAxis::Main: return "main";
    }
    return "?";
}

std::vector<SweepPoint> default_grid(SweepAxis axis, int steps) {
    std::vector<SweepPoint> grid;
    auto add_kvinject = [&](double alpha, double lo, double hi, int s_lo, int s_hi,
                            const std::string& name) {
        grid.push_back({name, kvinject_spec(alpha, lo, hi, s_lo, s_hi)});
    };
    auto add_kvscale = [&](ImgHalf half, double factor) {
        KVScaleSpec s;
        s.half = half;
        s.factor = factor;
        s.band = {{true, 0.0, 1.0}, 0, steps};
        grid.push_back({std::string("kvscale_") + to_string(half) + "_x" + num(factor),
                        VariantSpec{OpSpec{s}}});
    };

    switch (axis) {
        case SweepAxis::Alpha:
            for (double alpha : {0.3, 0.5, 0.7}) {
                for (auto [lo, hi] : {std::pair{0.25, 0.5}, std::pair{0.5, 0.75}}) {
                    add_kvinject(alpha, lo, hi, 0, steps,
                                 "kvinject_a" + num(alpha) + "_f" + num(lo) + "-" + num(hi));
                }
            }
            break;
        case SweepAxis::Layers:
            for (auto [lo, hi] : {std::pair{0.0, 0.25}, std::pair{0.5, 0.75},
                                  std::pair{0.75, 1.0}}) {
                add_kvinject(0.3, lo, hi, 0, steps,
                             "kvinject_a0.3_f" + num(lo) + "-" + num(hi));
            }
            break;
        case SweepAxis::Steps:
            for (auto [lo, hi] : {std::pair{0, 7}, std::pair{7, 14}, std::pair{14, 21},
                                  std::pair{21, 28}, std::pair{0, steps}}) {
                add_kvinject(0.3, 0.5, 0.75, lo, hi,
                             "kvinject_s" + std::to_string(lo) + "-" + std::to_string(hi));
            }
            break;
        case SweepAxis::TextScale:
            for (double factor : {0.5, 1.5, 3.0}) {
                TextScaleSpec s;
                s.factor = factor;
                s.band = {{true, 0.0, 1.0}, 0, steps};
                grid.push_back({"textscale_x" + num(factor), VariantSpec{OpSpec{s}}});
            }
            break;
        case SweepAxis::KVScale:
            add_kvscale(ImgHalf::Source, 0.0);
            add_kvscale(ImgHalf::Source, 0.5);
            add_kvscale(ImgHalf::Source, 2.0);
            add_kvscale(ImgHalf::Noise, 0.5);
            add_kvscale(ImgHalf::Noise, 2.0);
            break;
        case SweepAxis::Main: {
            add_kvscale(ImgHalf::Source, 0.0);
            add_kvscale(ImgHalf::Source, 0.5);
            add_kvscale(ImgHalf::Source, 2.0);
            add_kvscale(ImgHalf::Noise, 0.5);
            add_kvscale(ImgHalf::Noise, 2.0);
            TextScaleSpec t;
            t.factor = 3.0;
            t.band = {{true, 0.0, 1.0}, 0, steps};
            grid.push_back({"textscale_x3", VariantSpec{OpSpec{t}}});
            MasaCtrlSpec m;
            m.band = {{true, 0.0, 1.0}, 0, steps};
            m.neutral_prompt = "a photo";
            grid.push_back({"masactrl", VariantSpec{OpSpec{m}}});
            add_kvinject(0.3, 0.5, 0.75, 0, steps, "kvinject_best");
            grid.push_back({"router_auto", VariantSpec{RoutedVariant{RouteMode::Auto}}});
            grid.push_back({"router_oracle", VariantSpec{RoutedVariant{RouteMode::Oracle}}});
            break;
        }
    }
    return grid;
}

std::vector<VariantResult> sweep(SweepAxis axis, const std::vector<SweepPoint>& grid,
                                 const std::vector<EditCase>& suite, const Model& model,
                                 const SampleConfig& sc, const RunOptions& opts,
                                 const RouterContext* router) {
    if (grid.empty()) {
        throw std::invalid_argument("sweep: empty grid");
    }
    std::vector<VariantResult> results;
    results.reserve(grid.size() + 1);
    results.push_back(
        run_variant("baseline", VariantSpec{OpSpec{BaselineSpec{}}}, suite, model, sc, opts,
                    router));
    for (const SweepPoint& point : grid) {
        results.push_back(run_variant(point.name, point.spec, suite, model, sc, opts, router));
    }

    if (axis == SweepAxis::KVScale || axis == SweepAxis::Main) {
        // The "best" rescale setting is an empirical call, not a constant:
        // flag the winner instead of hard-coding it.
        int best = -1;
        for (size_t i = 1; i < results.size(); ++i) {
            if (results[i].complete && results[i].name.rfind("kvscale_", 0) == 0 &&
                (best < 0 || results[i].mean.composite > results[best].mean.composite)) {
                best = static_cast<int>(i);
            }
        }
        if (best >= 0) {
            results[best].name += "*";
        }
    }

    audit_paired_seeds(results);
    return results;
}

void audit_paired_seeds(const std::vector<VariantResult>& results) {
    if (results.size() < 2) {
        return;
    }
    const VariantResult& ref = results.front();
    for (size_t v = 1; v < results.size(); ++v) {
        const VariantResult& other = results[v];
        if (other.cases.size() != ref.cases.size()) {
            throw std::runtime_error("paired-seed audit: '" + other.name + "' ran " +
                                     std::to_string(other.cases.size()) + " cases, '" + ref.name +
                                     "' ran " + std::to_string(ref.cases.size()));
        }
        for (size_t i = 0; i < ref.cases.size(); ++i) {
            const CaseRecord& a = ref.cases[i];
            const CaseRecord& b = other.cases[i];
            if (a.case_id != b.case_id || a.seed != b.seed ||
                a.source_label != b.source_label || a.instruction != b.instruction) {
                throw std::runtime_error("paired-seed audit: case " + a.case_id +
                                         " consumed different (seed, source, prompt) under '" +
                                         other.name + "' vs '" + ref.name + "'");
            }
        }
    }
}

// ============================================================================
// reports
// ============================================================================

ReportFormat parse_report_format(const std::string& name) {
    if (name == "csv") return ReportFormat::Csv;
    if (name == "json") return ReportFormat::Json;
    if (name == "text") return ReportFormat::Text;
    throw SpecParseError("unknown report format '" + name + "'");
}

std::string format_fixed(double value, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    // "-0.0000" and "0.0000" are the same number; pick one spelling.
    if (buf[0] == '-') {
        bool all_zero = true;
        for (const char* p = buf + 1; *p; ++p) {
            if (*p != '0' && *p != '.') {
                all_zero = false;
                break;
            }
        }
        if (all_zero) {
            return buf + 1;
        }
    }
    return buf;
}

std::vector<ReportRow> to_rows(const std::vector<VariantResult>& results) {
    for (const VariantResult& r : results) {
        if (!r.complete) {
            std::string first_error = "no cases";
            for (const CaseRecord& c : r.cases) {
                if (!c.error.empty()) {
                    first_error = c.case_id + ": " + c.error;
                    break;
                }
            }
            throw std::runtime_error("variant '" + r.name + "' is incomplete (" + first_error +
                                     ")");
        }
    }
    std::optional<double> baseline_composite;
    for (const VariantResult& r : results) {
        if (r.name == "baseline") {
            baseline_composite = r.mean.composite;
            break;
        }
    }
    std::vector<ReportRow> rows;
    rows.reserve(results.size());
    for (const VariantResult& r : results) {
        ReportRow row;
        row.variant = r.name;
        row.clip_t = r.mean.clip_t;
        row.dino_i = r.mean.dino_i;
        row.clip_d = r.mean.clip_d;
        row.composite = r.mean.composite;
        if (baseline_composite) {
            row.delta_vs_baseline = r.mean.composite - *baseline_composite;
        }
        row.firings = r.firings_total;
        row.seconds_per_case = r.seconds_per_case;
        rows.push_back(std::move(row));
    }
    return rows;
}

static const char* kClipDNote =
    "directional cos(delta_image, delta_text); empty when no source captions";

std::string emit_report(const std::vector<ReportRow>& rows, const std::string& provider_id,
                        ReportFormat format) {
    auto opt4 = [](const std::optional<double>& v) {
        return v ? format_fixed(*v) : std::string();
    };

    if (format == ReportFormat::Csv) {
        std::string out;
        out += "# provider: " + provider_id + "\n";
        out += std::string("# clip_d: ") + kClipDNote + "\n";
        out += "variant,clip_t,dino_i,clip_d,composite,delta_vs_baseline,firings,seconds_per_case\n";
        for (const ReportRow& r : rows) {
            out += r.variant + "," + format_fixed(r.clip_t) + "," + format_fixed(r.dino_i) + "," +
                   opt4(r.clip_d) + "," + format_fixed(r.composite) + "," +
                   opt4(r.delta_vs_baseline) + "," + std::to_string(r.firings) + "," +
                   format_fixed(r.seconds_per_case) + "\n";
        }
        return out;
    }

    if (format == ReportFormat::Json) {
        nlohmann::ordered_json doc;
        doc["provider"] = provider_id;
        doc["clip_d"] = kClipDNote;
        doc["rows"] = nlohmann::ordered_json::array();
        for (const ReportRow& r : rows) {
            nlohmann::ordered_json row;
            row["variant"] = r.variant;
            row["clip_t"] = format_fixed(r.clip_t);
            row["dino_i"] = format_fixed(r.dino_i);
            row["clip_d"] = r.clip_d ? nlohmann::ordered_json(format_fixed(*r.clip_d))
                                     : nlohmann::ordered_json(nullptr);
            row["composite"] = format_fixed(r.composite);
            row["delta_vs_baseline"] =
                r.delta_vs_baseline ? nlohmann::ordered_json(format_fixed(*r.delta_vs_baseline))
                                    : nlohmann::ordered_json(nullptr);
            row["firings"] = r.firings;
            row["seconds_per_case"] = format_fixed(r.seconds_per_case);
            doc["rows"].push_back(std::move(row));
        }
        return doc.dump(2) + "\n";
    }

    // text
    std::string out;
    out += "provider: " + provider_id + "\n";
    out += std::string("clip_d: ") + kClipDNote + "\n";
    char line[256];
    std::snprintf(line, sizeof(line), "%-28s %8s %8s %8s %10s %10s %10s %10s\n", "variant",
                  "clip_t", "dino_i", "clip_d", "composite", "delta", "firings", "sec/case");
    out += line;
    for (const ReportRow& r : rows) {
        std::snprintf(line, sizeof(line), "%-28s %8s %8s %8s %10s %10s %10ld %10s\n",
                      r.variant.c_str(), format_fixed(r.clip_t).c_str(),
                      format_fixed(r.dino_i).c_str(),
                      r.clip_d ? format_fixed(*r.clip_d).c_str() : "-",
                      format_fixed(r.composite).c_str(),
                      r.delta_vs_baseline ? format_fixed(*r.delta_vs_baseline).c_str() : "-",
                      r.firings, format_fixed(r.seconds_per_case).c_str());
        out += line;
    }
    return out;
}

ParsedReport parse_report_csv(const std::string& text) {
    ParsedReport report;
    std::istringstream in(text);
    std::string line;
    bool saw_header = false;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        if (line[0] == '#') {
            const std::string provider_tag = "# provider: ";
            if (line.rfind(provider_tag, 0) == 0) {
                report.provider_id = line.substr(provider_tag.size());
            }
            continue;
        }
        if (!saw_header) {
            if (line.rfind("variant,", 0) != 0) {
                throw SpecParseError("report line " + std::to_string(lineno) +
                                     ": expected the column header");
            }
            saw_header = true;
            continue;
        }
        std::vector<std::string> fields;
        size_t pos = 0;
        while (true) {
            size_t comma = line.find(',', pos);
            fields.push_back(line.substr(pos, comma == std::string::npos ? comma : comma - pos));
            if (comma == std::string::npos) {
                break;
            }
            pos = comma + 1;
        }
        if (fields.size() != 8) {
            throw SpecParseError("report line " + std::to_string(lineno) + ": expected 8 fields");
        }
        auto real = [&](const std::string& f) {
            char* end = nullptr;
            double v = std::strtod(f.c_str(), &end);
            if (f.empty() || end != f.c_str() + f.size()) {
                throw SpecParseError("report line " + std::to_string(lineno) + ": bad number '" +
                                     f + "'");
            }
            return v;
        };
        auto opt_real = [&](const std::string& f) -> std::optional<double> {
            if (f.empty()) {
                return std::nullopt;
            }
            return real(f);
        };
        ReportRow row;
        row.variant = fields[0];
        row.clip_t = real(fields[1]);
        row.dino_i = real(fields[2]);
        row.clip_d = opt_real(fields[3]);
        row.composite = real(fields[4]);
        row.delta_vs_baseline = opt_real(fields[5]);
        row.firings = static_cast<long>(real(fields[6]));
        row.seconds_per_case = real(fields[7]);
        report.rows.push_back(std::move(row));
    }
    if (!saw_header) {
        throw SpecParseError("report: no column header found");
    }
    return report;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    out << content;
    out.flush();
    if (!out) {
        throw std::runtime_error("write failed: " + path);
    }
}

std::string data_file(const std::string& name) {
    return std::string(ATTNROUTE_DATA_DIR) + "/" + name;
}

}  // namespace attnroute
