#pragma once

#include "attnroute/hub.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace attnroute {

// Thrown by every text-format parser (op specs, config files, tables);
// the CLI maps it to a usage error.
struct SpecParseError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

enum class ImgHalf { Source, Noise };
const char* to_string(ImgHalf half);

// Layer interval of a band, either absolute block indices or fractions of
// model depth resolved at load time (floor at lo, ceil at hi).
struct LayerRange {
    bool fractional = false;
    double lo = 0.0;
    double hi = 0.0;

    bool operator==(const LayerRange&) const = default;
    std::pair<int, int> resolve(int num_layers) const;
};

struct BandSpec {
    LayerRange layers;
    int step_lo = 0;
    int step_hi = 0;

    bool operator==(const BandSpec&) const = default;
    // Clamps to [0, num_layers] x [0, steps] and validates ordering.
    Band resolve(int num_layers, int steps) const;
    std::string str() const;
};

struct OpSpec;

struct BaselineSpec {
    bool operator==(const BaselineSpec&) const = default;
};

struct KVInjectSpec {
    double alpha = 0.0;
    BandSpec band;
    bool operator==(const KVInjectSpec&) const = default;
};

struct KVScaleSpec {
    ImgHalf half = ImgHalf::Source;
    double factor = 1.0;
    BandSpec band;
    bool operator==(const KVScaleSpec&) const = default;
};

struct TextScaleSpec {
    double factor = 1.0;
    BandSpec band;
    bool operator==(const TextScaleSpec&) const = default;
};

struct MasaCtrlSpec {
    BandSpec band;
    std::string neutral_prompt;
    bool operator==(const MasaCtrlSpec&) const = default;
};

struct ComposeSpec {
    std::vector<OpSpec> ops;
    bool operator==(const ComposeSpec&) const;
};

// Tagged description of one attention manipulation (or Baseline, or an
// ordered composition). This is what routing tables and the CLI traffic in.
struct OpSpec {
    std::variant<BaselineSpec, KVInjectSpec, KVScaleSpec, TextScaleSpec, MasaCtrlSpec, ComposeSpec> value;

    bool operator==(const OpSpec&) const = default;
    bool is_baseline() const { return std::holds_alternative<BaselineSpec>(value); }
    // True if this spec (or any member of a composition) is a two-pass
    // record/replay op and therefore needs a record forward first.
    bool needs_record_pass() const;
    // Neutral prompt of the contained two-pass op, if any.
    std::optional<std::string> record_prompt() const;
};

// Textual form:
//   baseline
//   kvinject:alpha=<r>,layers=<lo>-<hi>,steps=<lo>-<hi>
//   kvscale:half=<src|noi>,factor=<r>,layers=...,steps=...
//   textscale:factor=<r>,layers=...,steps=...
//   masactrl:layers=...,steps=...,neutral=<text>
//   compose(<spec>;<spec>;...)
// Layer intervals may be written as fractions of depth: layers=frac:<lo>-<hi>.
// All intervals are half-open. Parse errors name the offending token.
OpSpec parse_op_spec(const std::string& text);
std::string format_op_spec(const OpSpec& spec);
// Alpha in [0,1], factors >= 0, compositions non-empty and flat, and no
// two-pass op inside a composition (its record protocol does not chain).
void validate_op_spec(const OpSpec& spec);

// --- Core transforms, pure functions of their arguments. `modified` (when
// --- given) reports whether the tensor was actually rewritten.

// In band on image K/V: noise-half <- noise + alpha * (source - noise),
// source-half and trailing tokens bit-unchanged. Everything else passes
// through bit-exact.
TensorF kv_inject(const ProjSite& site, int step, TensorF x, double alpha, const Band& band,
                  int source_start, bool* modified = nullptr);

// In band on image K/V: the selected half multiplied by factor.
TensorF simple_kv_scale(const ProjSite& site, int step, TensorF x, ImgHalf half, double factor,
                        const Band& band, int source_start, bool* modified = nullptr);

// In band on text K/V: whole tensor multiplied by factor.
TensorF text_scale(const ProjSite& site, int step, TensorF x, double factor, const Band& band,
                   bool* modified = nullptr);

// --- Op-chain adapters around the transforms above.

class KVInjectOp : public AttnOp {
  public:
    KVInjectOp(double alpha, Band band, int source_start);
    std::string name() const override { return "kvinject"; }
    TensorF apply(const DispatchCtx& ctx, TensorF x) override;
    bool may_modify(ProjKind kind) const override { return is_image_kv(kind); }
    const Band& band() const { return band_; }
    double alpha() const { return alpha_; }

  private:
    double alpha_;
    Band band_;
    int source_start_;
};

class KVScaleOp : public AttnOp {
  public:
    KVScaleOp(ImgHalf half, double factor, Band band, int source_start);
    std::string name() const override { return "kvscale"; }
    TensorF apply(const DispatchCtx& ctx, TensorF x) override;
    bool may_modify(ProjKind kind) const override { return is_image_kv(kind); }

  private:
    ImgHalf half_;
    double factor_;
    Band band_;
    int source_start_;
};

class TextScaleOp : public AttnOp {
  public:
    TextScaleOp(double factor, Band band);
    std::string name() const override { return "textscale"; }
    TensorF apply(const DispatchCtx& ctx, TensorF x) override;
    bool may_modify(ProjKind kind) const override { return is_text_kv(kind); }

  private:
    double factor_;
    Band band_;
};

// Two-pass record/replay. In record mode it caches image K/V tensors at
// in-band layers for every step (both guidance passes) and leaves outputs
// untouched; in inject mode it rewrites the noise-half from the cache
// inside the full band. The cache lives until the hub resets.
class MasaCtrlOp : public AttnOp {
  public:
    MasaCtrlOp(Band band, int source_start, std::string neutral_prompt);
    std::string name() const override { return "masactrl"; }
    TensorF apply(const DispatchCtx& ctx, TensorF x) override;
    bool may_modify(ProjKind kind) const override { return is_image_kv(kind); }
    void on_reset() override;
    void set_record_mode(bool record) override { record_mode_ = record; }

    bool record_mode() const { return record_mode_; }
    // Number of (site, step) keys held (each key carries both passes).
    size_t cache_size() const { return cache_.size(); }
    const std::string& neutral_prompt() const { return neutral_prompt_; }
    const Band& band() const { return band_; }

  private:
    struct Entry {
        std::optional<TensorF> per_pass[2];
    };
    using Key = std::pair<ProjSite, int>;  // (site, step)

    Band band_;
    int source_start_;
    std::string neutral_prompt_;
    bool record_mode_ = true;
    std::map<Key, Entry> cache_;
};

// Observer that logs cos(noise-half, source-half) of image K tensors.
// Never modifies anything.
class KProbeOp : public AttnOp {
  public:
    struct Entry {
        int layer = 0;
        int step = 0;
        int pass = 0;
        double cos_sim = 0.0;
        bool degenerate = false;
    };

    KProbeOp(int source_start, Band band);
    std::string name() const override { return "kprobe"; }
    TensorF apply(const DispatchCtx& ctx, TensorF x) override;
    bool may_modify(ProjKind) const override { return false; }
    void on_reset() override { log_.clear(); }

    const std::vector<Entry>& log() const { return log_; }
    // "layer,step,cos_sim,degenerate" rows in dispatch order.
    void dump(std::ostream& out) const;

  private:
    int source_start_;
    Band band_;
    std::vector<Entry> log_;
};

// Instantiates the op chain for a validated spec. Baseline yields an empty
// chain; compositions concatenate in order. Bands resolve against the
// model depth and step count here.
std::vector<std::shared_ptr<AttnOp>> make_ops(const OpSpec& spec, int num_layers, int steps,
                                              int source_start);

}  // namespace attnroute
