#pragma once

#include "attnroute/tensor.hpp"

#include <map>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

namespace attnroute {

// The six hookable projection outputs of every joint-attention block.
enum class ProjKind { ImgQ = 0, ImgK, ImgV, TxtQ, TxtK, TxtV };
constexpr int kNumProjKinds = 6;

const char* to_string(ProjKind kind);
bool is_image_kv(ProjKind kind);
bool is_text_kv(ProjKind kind);

// Addresses one hookable projection.
struct ProjSite {
    int layer = 0;
    ProjKind kind = ProjKind::ImgQ;

    auto operator<=>(const ProjSite&) const = default;
    std::string str() const;
};

// Half-open (layer, step) activity window. Ops self-gate with it; tensors
// dispatched outside the band pass through bit-exact.
struct Band {
    int layer_lo = 0;
    int layer_hi = 0;
    int step_lo = 0;
    int step_hi = 0;

    bool operator==(const Band&) const = default;
    bool contains_layer(int layer) const { return layer_lo <= layer && layer < layer_hi; }
    bool contains_step(int step) const { return step_lo <= step && step < step_hi; }
    bool contains(int layer, int step) const { return contains_layer(layer) && contains_step(step); }
    bool empty() const { return layer_lo >= layer_hi || step_lo >= step_hi; }
    std::string str() const;
};

inline Band full_band(int num_layers, int steps) { return Band{0, num_layers, 0, steps}; }

struct DispatchCtx {
    ProjSite site;
    int step = 0;
    // Index of the forward within the current denoising step (0 = first,
    // guidance-conditional pass; 1 = second, unconditional pass).
    int pass = 0;
};

// One attention manipulation in a hub chain. apply() is a pure transform
// that must preserve shape; lifecycle hooks cover run reset and the
// record/replay mode flip of two-pass ops.
class AttnOp {
  public:
    virtual ~AttnOp() = default;

    virtual std::string name() const = 0;
    virtual TensorF apply(const DispatchCtx& ctx, TensorF x) = 0;
    // True if the op can ever write to tensors of this projection kind.
    virtual bool may_modify(ProjKind kind) const = 0;

    virtual void on_reset() {}
    virtual void set_record_mode(bool) {}

    const std::map<ProjSite, long>& modification_log() const { return mods_; }
    long modifications_total() const;
    long modifications_at(const ProjSite& site) const;
    void clear_modifications() { mods_.clear(); }

  protected:
    void note_modified(const ProjSite& site) { ++mods_[site]; }

  private:
    std::map<ProjSite, long> mods_;
};

// Per-run hook registry. Intercepts every projection output at a
// (layer, kind, step) site, folds it through the attached op chain in
// attachment order, and counts firings per site. One hub serves one
// sampling run at a time.
class AttnHub {
  public:
    // Rejected while a run is active so firing accounting stays exact.
    void attach(std::shared_ptr<AttnOp> op);

    TensorF dispatch(const ProjSite& site, TensorF x);

    void begin_run();
    void end_run();
    // Marks the start of one forward pass within the current step.
    void begin_forward();
    // End-of-step advancement: called after all forwards of a step.
    void advance_step();
    // Clears step counter, firing log, trace, and per-run op caches.
    // The op chain is preserved.
    void reset();

    bool run_active() const { return active_; }
    int current_step() const { return current_step_; }
    int forwards_this_step() const { return forwards_this_step_; }

    long firings_at(const ProjSite& site) const;
    long firings_total() const;
    const std::map<ProjSite, long>& firing_log() const { return firing_log_; }

    const std::vector<std::shared_ptr<AttnOp>>& ops() const { return chain_; }

    // Per-step firing breakdown, kept only while tracing is enabled.
    void set_trace(bool enabled);
    bool trace_enabled() const { return trace_enabled_; }
    // Newline-delimited "step,layer,kind,fired" records.
    void dump_trace(std::ostream& out) const;

  private:
    std::vector<std::shared_ptr<AttnOp>> chain_;
    std::map<ProjSite, long> firing_log_;
    std::map<std::tuple<int, int, int>, long> trace_;  // (step, layer, kind index)
    int current_step_ = 0;
    int forwards_this_step_ = 0;
    bool active_ = false;
    bool trace_enabled_ = false;
};

}  // namespace attnroute
