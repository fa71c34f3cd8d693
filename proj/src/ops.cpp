#include "attnroute/ops.hpp"

#include "attnroute/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <map>
#include <sstream>

namespace attnroute {

namespace {

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_real(const std::string& tok, const std::string& what) {
    if (tok.empty()) {
        throw SpecParseError(what + ": empty number");
    }
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || !std::isfinite(v)) {
        throw SpecParseError(what + ": bad number '" + tok + "'");
    }
    return v;
}

int parse_int(const std::string& tok, const std::string& what) {
    if (tok.empty()) {
        throw SpecParseError(what + ": empty integer");
    }
    char* end = nullptr;
    long v = std::strtol(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size()) {
        throw SpecParseError(what + ": bad integer '" + tok + "'");
    }
    return static_cast<int>(v);
}

// "<lo>-<hi>"; both sides must be nonnegative, so the first '-' separates.
std::pair<std::string, std::string> split_range(const std::string& tok, const std::string& what) {
    size_t dash = tok.find('-');
    if (dash == std::string::npos) {
        throw SpecParseError(what + ": expected '<lo>-<hi>', got '" + tok + "'");
    }
    return {tok.substr(0, dash), tok.substr(dash + 1)};
}

LayerRange parse_layer_range(const std::string& value, const std::string& what) {
    LayerRange r;
    std::string body = value;
    if (body.rfind("frac:", 0) == 0) {
        r.fractional = true;
        body = body.substr(5);
    }
    auto [lo, hi] = split_range(body, what);
    if (r.fractional) {
        r.lo = parse_real(lo, what);
        r.hi = parse_real(hi, what);
    } else {
        r.lo = parse_int(lo, what);
        r.hi = parse_int(hi, what);
    }
    return r;
}

std::string fmt_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.15g", v);
    return buf;
}

std::string fmt_layer_range(const LayerRange& r) {
    if (r.fractional) {
        return "frac:" + fmt_real(r.lo) + "-" + fmt_real(r.hi);
    }
    return std::to_string(static_cast<int>(r.lo)) + "-" + std::to_string(static_cast<int>(r.hi));
}

// Splits "k1=v1,k2=v2,..." into an ordered key/value list. When
// neutral_tail is set, everything after "neutral=" (commas included) is the
// value of that final key.
std::vector<std::pair<std::string, std::string>> parse_fields(const std::string& body,
                                                              const std::string& op,
                                                              bool neutral_tail) {
    std::vector<std::pair<std::string, std::string>> fields;
    size_t pos = 0;
    while (pos <= body.size()) {
        if (neutral_tail && body.compare(pos, 8, "neutral=") == 0) {
            fields.emplace_back("neutral", body.substr(pos + 8));
            return fields;
        }
        size_t comma = body.find(',', pos);
        std::string field = body.substr(pos, comma == std::string::npos ? comma : comma - pos);
        size_t eq = field.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw SpecParseError(op + ": expected 'key=value', got '" + field + "'");
        }
        fields.emplace_back(trim(field.substr(0, eq)), trim(field.substr(eq + 1)));
        if (comma == std::string::npos) {
            break;
        }
        pos = comma + 1;
    }
    return fields;
}

// Enforces that exactly the expected keys appear, each once.
std::map<std::string, std::string> keyed(const std::vector<std::pair<std::string, std::string>>& fields,
                                         const std::vector<std::string>& expected,
                                         const std::string& op) {
    std::map<std::string, std::string> out;
    for (const auto& [k, v] : fields) {
        if (std::find(expected.begin(), expected.end(), k) == expected.end()) {
            throw SpecParseError(op + ": unknown key '" + k + "'");
        }
        if (!out.emplace(k, v).second) {
            throw SpecParseError(op + ": duplicate key '" + k + "'");
        }
    }
    for (const auto& k : expected) {
        if (!out.count(k)) {
            throw SpecParseError(op + ": missing key '" + k + "'");
        }
    }
    return out;
}

BandSpec band_from(const std::map<std::string, std::string>& kv, const std::string& op) {
    BandSpec band;
    band.layers = parse_layer_range(kv.at("layers"), op + ".layers");
    auto [slo, shi] = split_range(kv.at("steps"), op + ".steps");
    band.step_lo = parse_int(slo, op + ".steps");
    band.step_hi = parse_int(shi, op + ".steps");
    return band;
}

void validate_band(const BandSpec& band, const std::string& op) {
    const LayerRange& r = band.layers;
    if (r.lo < 0 || r.hi < r.lo) {
        throw SpecParseError(op + ": bad layer range " + fmt_layer_range(r));
    }
    if (r.fractional && r.hi > 1.0) {
        throw SpecParseError(op + ": fractional layer range must lie in [0,1], got " +
                             fmt_layer_range(r));
    }
    if (band.step_lo < 0 || band.step_hi < band.step_lo) {
        throw SpecParseError(op + ": bad step range " + std::to_string(band.step_lo) + "-" +
                             std::to_string(band.step_hi));
    }
}

void validate_impl(const OpSpec& spec, bool in_compose) {
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BaselineSpec>) {
                // nothing to check
            } else if constexpr (std::is_same_v<T, KVInjectSpec>) {
                if (!(s.alpha >= 0.0 && s.alpha <= 1.0)) {
                    throw SpecParseError("kvinject: alpha must lie in [0,1], got " +
                                         fmt_real(s.alpha));
                }
                validate_band(s.band, "kvinject");
            } else if constexpr (std::is_same_v<T, KVScaleSpec>) {
                if (!(s.factor >= 0.0) || !std::isfinite(s.factor)) {
                    throw SpecParseError("kvscale: factor must be finite and >= 0, got " +
                                         fmt_real(s.factor));
                }
                validate_band(s.band, "kvscale");
            } else if constexpr (std::is_same_v<T, TextScaleSpec>) {
                if (!(s.factor >= 0.0) || !std::isfinite(s.factor)) {
                    throw SpecParseError("textscale: factor must be finite and >= 0, got " +
                                         fmt_real(s.factor));
                }
                validate_band(s.band, "textscale");
            } else if constexpr (std::is_same_v<T, MasaCtrlSpec>) {
                if (in_compose) {
                    throw SpecParseError(
                        "masactrl cannot appear inside compose: its record pass does not chain");
                }
                validate_band(s.band, "masactrl");
            } else if constexpr (std::is_same_v<T, ComposeSpec>) {
                if (in_compose) {
                    throw SpecParseError("compose cannot be nested");
                }
                if (s.ops.empty()) {
                    throw SpecParseError("compose: needs at least one member");
                }
                for (const OpSpec& member : s.ops) {
                    validate_impl(member, true);
                }
            }
        },
        spec.value);
}

}  // namespace

const char* to_string(ImgHalf half) {
    return half == ImgHalf::Source ? "src" : "noi";
}

std::pair<int, int> LayerRange::resolve(int num_layers) const {
    if (fractional) {
        // floor at the low edge, ceil at the high edge: a fraction band
        // covers every layer it touches.
        int lo_i = static_cast<int>(std::floor(lo * num_layers));
        int hi_i = static_cast<int>(std::ceil(hi * num_layers));
        return {lo_i, hi_i};
    }
    return {static_cast<int>(lo), static_cast<int>(hi)};
}

Band BandSpec::resolve(int num_layers, int steps) const {
    auto [lo, hi] = layers.resolve(num_layers);
    Band band;
    band.layer_lo = std::clamp(lo, 0, num_layers);
    band.layer_hi = std::clamp(hi, band.layer_lo, num_layers);
    band.step_lo = std::clamp(step_lo, 0, steps);
    band.step_hi = std::clamp(step_hi, band.step_lo, steps);
    return band;
}

std::string BandSpec::str() const {
    return "layers=" + fmt_layer_range(layers) + ",steps=" + std::to_string(step_lo) + "-" +
           std::to_string(step_hi);
}

bool ComposeSpec::operator==(const ComposeSpec& other) const {
    return ops == other.ops;
}

bool OpSpec::needs_record_pass() const {
    if (std::holds_alternative<MasaCtrlSpec>(value)) {
        return true;
    }
    if (const auto* c = std::get_if<ComposeSpec>(&value)) {
        for (const OpSpec& member : c->ops) {
            if (member.needs_record_pass()) {
                return true;
            }
        }
    }
    return false;
}

std::optional<std::string> OpSpec::record_prompt() const {
    if (const auto* m = std::get_if<MasaCtrlSpec>(&value)) {
        return m->neutral_prompt;
    }
    if (const auto* c = std::get_if<ComposeSpec>(&value)) {
        for (const OpSpec& member : c->ops) {
            if (auto p = member.record_prompt()) {
                return p;
            }
        }
    }
    return std::nullopt;
}

OpSpec parse_op_spec(const std::string& text) {
    std::string s = trim(text);
    if (s.empty()) {
        throw SpecParseError("empty op spec");
    }

    OpSpec spec;
    if (s == "baseline") {
        spec.value = BaselineSpec{};
    } else if (s.rfind("compose(", 0) == 0) {
        if (s.back() != ')') {
            throw SpecParseError("compose: missing closing ')'");
        }
        ComposeSpec comp;
        std::string inner = s.substr(8, s.size() - 9);
        size_t pos = 0;
        while (true) {
            size_t semi = inner.find(';', pos);
            std::string member =
                inner.substr(pos, semi == std::string::npos ? semi : semi - pos);
            comp.ops.push_back(parse_op_spec(member));
            if (semi == std::string::npos) {
                break;
            }
            pos = semi + 1;
        }
        spec.value = std::move(comp);
    } else {
        size_t colon = s.find(':');
        if (colon == std::string::npos) {
            throw SpecParseError("unknown op spec '" + s + "'");
        }
        std::string op = s.substr(0, colon);
        std::string body = s.substr(colon + 1);
        if (op == "kvinject") {
            auto kv = keyed(parse_fields(body, op, false), {"alpha", "layers", "steps"}, op);
            KVInjectSpec k;
            k.alpha = parse_real(kv.at("alpha"), "kvinject.alpha");
            k.band = band_from(kv, op);
            spec.value = k;
        } else if (op == "kvscale") {
            auto kv =
                keyed(parse_fields(body, op, false), {"half", "factor", "layers", "steps"}, op);
            KVScaleSpec k;
            const std::string& half = kv.at("half");
            if (half == "src") {
                k.half = ImgHalf::Source;
            } else if (half == "noi") {
                k.half = ImgHalf::Noise;
            } else {
                throw SpecParseError("kvscale.half: expected 'src' or 'noi', got '" + half + "'");
            }
            k.factor = parse_real(kv.at("factor"), "kvscale.factor");
            k.band = band_from(kv, op);
            spec.value = k;
        } else if (op == "textscale") {
            auto kv = keyed(parse_fields(body, op, false), {"factor", "layers", "steps"}, op);
            TextScaleSpec t;
            t.factor = parse_real(kv.at("factor"), "textscale.factor");
            t.band = band_from(kv, op);
            spec.value = t;
        } else if (op == "masactrl") {
            auto kv = keyed(parse_fields(body, op, true), {"layers", "steps", "neutral"}, op);
            MasaCtrlSpec m;
            m.band = band_from(kv, op);
            m.neutral_prompt = kv.at("neutral");
            spec.value = m;
        } else {
            throw SpecParseError("unknown op '" + op + "'");
        }
    }

    validate_op_spec(spec);
    return spec;
}

std::string format_op_spec(const OpSpec& spec) {
    return std::visit(
        [](const auto& s) -> std::string {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BaselineSpec>) {
                return "baseline";
            } else if constexpr (std::is_same_v<T, KVInjectSpec>) {
                return "kvinject:alpha=" + fmt_real(s.alpha) + "," + s.band.str();
            } else if constexpr (std::is_same_v<T, KVScaleSpec>) {
                return std::string("kvscale:half=") + to_string(s.half) +
                       ",factor=" + fmt_real(s.factor) + "," + s.band.str();
            } else if constexpr (std::is_same_v<T, TextScaleSpec>) {
                return "textscale:factor=" + fmt_real(s.factor) + "," + s.band.str();
            } else if constexpr (std::is_same_v<T, MasaCtrlSpec>) {
                return "masactrl:" + s.band.str() + ",neutral=" + s.neutral_prompt;
            } else {
                std::string out = "compose(";
                for (size_t i = 0; i < s.ops.size(); ++i) {
                    if (i) {
                        out += ";";
                    }
                    out += format_op_spec(s.ops[i]);
                }
                return out + ")";
            }
        },
        spec.value);
}

void validate_op_spec(const OpSpec& spec) {
    validate_impl(spec, false);
}

// ============================================================================
// transforms
// ============================================================================

namespace {

void require_two_halves(const char* op, const ProjSite& site, const TensorF& x, int source_start) {
    if (source_start <= 0 || x.tokens() != 2 * source_start) {
        throw std::runtime_error(std::string(op) + " at " + site.str() +
                                 ": expected two image halves of " + std::to_string(source_start) +
                                 " tokens each, got " + x.shape().str());
    }
}

}  // namespace

TensorF kv_inject(const ProjSite& site, int step, TensorF x, double alpha, const Band& band,
                  int source_start, bool* modified) {
    if (modified) {
        *modified = false;
    }
    if (!is_image_kv(site.kind) || !band.contains(site.layer, step) || alpha == 0.0) {
        return x;
    }
    require_two_halves("kvinject", site, x, source_start);

    const float a = static_cast<float>(alpha);
    const size_t half_floats = static_cast<size_t>(source_start) * x.channels();
    for (int b = 0; b < x.batch(); ++b) {
        float* noise = x.row(b, 0);
        const float* src = x.row(b, source_start);
        if (alpha == 1.0) {
            // exact replacement, no rounding through the blend formula
            std::memcpy(noise, src, half_floats * sizeof(float));
        } else {
            for (size_t i = 0; i < half_floats; ++i) {
                noise[i] += a * (src[i] - noise[i]);
            }
        }
    }
    if (modified) {
        *modified = true;
    }
    return x;
}

TensorF simple_kv_scale(const ProjSite& site, int step, TensorF x, ImgHalf half, double factor,
                        const Band& band, int source_start, bool* modified) {
    if (modified) {
        *modified = false;
    }
    if (!is_image_kv(site.kind) || !band.contains(site.layer, step) || factor == 1.0) {
        return x;
    }
    if (source_start <= 0 || source_start >= x.tokens()) {
        throw std::runtime_error("kvscale at " + site.str() + ": source half starts at " +
                                 std::to_string(source_start) + ", outside " + x.shape().str());
    }

    const int t0 = half == ImgHalf::Noise ? 0 : source_start;
    const int t1 = half == ImgHalf::Noise ? source_start : x.tokens();
    const float f = static_cast<float>(factor);
    const size_t n = static_cast<size_t>(t1 - t0) * x.channels();
    for (int b = 0; b < x.batch(); ++b) {
        float* d = x.row(b, t0);
        for (size_t i = 0; i < n; ++i) {
            d[i] *= f;
        }
    }
    if (modified) {
        *modified = true;
    }
    return x;
}

TensorF text_scale(const ProjSite& site, int step, TensorF x, double factor, const Band& band,
                   bool* modified) {
    if (modified) {
        *modified = false;
    }
    if (!is_text_kv(site.kind) || !band.contains(site.layer, step) || factor == 1.0) {
        return x;
    }
    scale_inplace(x, static_cast<float>(factor));
    if (modified) {
        *modified = true;
    }
    return x;
}

// ============================================================================
// op-chain adapters
// ============================================================================

KVInjectOp::KVInjectOp(double alpha, Band band, int source_start)
    : alpha_(alpha), band_(band), source_start_(source_start) {}

TensorF KVInjectOp::apply(const DispatchCtx& ctx, TensorF x) {
    bool modified = false;
    TensorF out = kv_inject(ctx.site, ctx.step, std::move(x), alpha_, band_, source_start_, &modified);
    if (modified) {
        note_modified(ctx.site);
    }
    return out;
}

KVScaleOp::KVScaleOp(ImgHalf half, double factor, Band band, int source_start)
    : half_(half), factor_(factor), band_(band), source_start_(source_start) {}

TensorF KVScaleOp::apply(const DispatchCtx& ctx, TensorF x) {
    bool modified = false;
    TensorF out = simple_kv_scale(ctx.site, ctx.step, std::move(x), half_, factor_, band_,
                                  source_start_, &modified);
    if (modified) {
        note_modified(ctx.site);
    }
    return out;
}

TextScaleOp::TextScaleOp(double factor, Band band) : factor_(factor), band_(band) {}

TensorF TextScaleOp::apply(const DispatchCtx& ctx, TensorF x) {
    bool modified = false;
    TensorF out = text_scale(ctx.site, ctx.step, std::move(x), factor_, band_, &modified);
    if (modified) {
        note_modified(ctx.site);
    }
    return out;
}

MasaCtrlOp::MasaCtrlOp(Band band, int source_start, std::string neutral_prompt)
    : band_(band), source_start_(source_start), neutral_prompt_(std::move(neutral_prompt)) {}

TensorF MasaCtrlOp::apply(const DispatchCtx& ctx, TensorF x) {
    if (!is_image_kv(ctx.site.kind)) {
        return x;
    }
    if (ctx.pass < 0 || ctx.pass > 1) {
        throw std::runtime_error("masactrl at " + ctx.site.str() + " step " +
                                 std::to_string(ctx.step) + ": more than two forwards this step");
    }

    if (record_mode_) {
        // The recorder keys on layer only: it stores every step so a later
        // replay band can pick any window.
        if (!band_.contains_layer(ctx.site.layer)) {
            return x;
        }
        Entry& e = cache_[{ctx.site, ctx.step}];
        if (e.per_pass[ctx.pass]) {
            throw std::runtime_error("masactrl record at " + ctx.site.str() + " step " +
                                     std::to_string(ctx.step) + " pass " +
                                     std::to_string(ctx.pass) + ": duplicate entry");
        }
        e.per_pass[ctx.pass] = x;
        return x;
    }

    if (!band_.contains(ctx.site.layer, ctx.step)) {
        return x;
    }
    auto it = cache_.find({ctx.site, ctx.step});
    if (it == cache_.end() || !it->second.per_pass[ctx.pass]) {
        throw std::runtime_error("masactrl inject at " + ctx.site.str() + " step " +
                                 std::to_string(ctx.step) + " pass " + std::to_string(ctx.pass) +
                                 ": nothing recorded, run the record pass first");
    }
    const TensorF& rec = *it->second.per_pass[ctx.pass];
    if (!(rec.shape() == x.shape())) {
        throw std::runtime_error("masactrl inject at " + ctx.site.str() + ": recorded " +
                                 rec.shape().str() + " but got " + x.shape().str());
    }
    require_two_halves("masactrl", ctx.site, x, source_start_);

    const size_t half_floats = static_cast<size_t>(source_start_) * x.channels();
    for (int b = 0; b < x.batch(); ++b) {
        std::memcpy(x.row(b, 0), rec.row(b, 0), half_floats * sizeof(float));
    }
    note_modified(ctx.site);
    return x;
}

void MasaCtrlOp::on_reset() {
    cache_.clear();
    record_mode_ = true;
}

KProbeOp::KProbeOp(int source_start, Band band) : source_start_(source_start), band_(band) {}

TensorF KProbeOp::apply(const DispatchCtx& ctx, TensorF x) {
    if (ctx.site.kind != ProjKind::ImgK || !band_.contains(ctx.site.layer, ctx.step)) {
        return x;
    }
    require_two_halves("kprobe", ctx.site, x, source_start_);
    if (x.batch() != 1) {
        throw std::runtime_error("kprobe at " + ctx.site.str() + ": expected batch 1, got " +
                                 x.shape().str());
    }

    const size_t half_floats = static_cast<size_t>(source_start_) * x.channels();
    CosineResult cos = cosine(x.row(0, 0), x.row(0, source_start_), half_floats);
    log_.push_back({ctx.site.layer, ctx.step, ctx.pass, cos.value, cos.degenerate});
    return x;
}

void KProbeOp::dump(std::ostream& out) const {
    out << "layer,step,cos_sim,degenerate\n";
    char buf[32];
    for (const Entry& e : log_) {
        std::snprintf(buf, sizeof(buf), "%.6f", e.cos_sim);
        out << e.layer << "," << e.step << "," << buf << "," << (e.degenerate ? 1 : 0) << "\n";
    }
}

std::vector<std::shared_ptr<AttnOp>> make_ops(const OpSpec& spec, int num_layers, int steps,
                                              int source_start) {
    validate_op_spec(spec);
    std::vector<std::shared_ptr<AttnOp>> chain;
    std::visit(
        [&](const auto& s) {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, BaselineSpec>) {
                // empty chain
            } else if constexpr (std::is_same_v<T, KVInjectSpec>) {
                chain.push_back(std::make_shared<KVInjectOp>(
                    s.alpha, s.band.resolve(num_layers, steps), source_start));
            } else if constexpr (std::is_same_v<T, KVScaleSpec>) {
                chain.push_back(std::make_shared<KVScaleOp>(
                    s.half, s.factor, s.band.resolve(num_layers, steps), source_start));
            } else if constexpr (std::is_same_v<T, TextScaleSpec>) {
                chain.push_back(std::make_shared<TextScaleOp>(
                    s.factor, s.band.resolve(num_layers, steps)));
            } else if constexpr (std::is_same_v<T, MasaCtrlSpec>) {
                chain.push_back(std::make_shared<MasaCtrlOp>(
                    s.band.resolve(num_layers, steps), source_start, s.neutral_prompt));
            } else {
                for (const OpSpec& member : s.ops) {
                    auto sub = make_ops(member, num_layers, steps, source_start);
                    chain.insert(chain.end(), sub.begin(), sub.end());
                }
            }
        },
        spec.value);
    return chain;
}

}  // namespace attnroute
