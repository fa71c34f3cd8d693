#include "attnroute/hub.hpp"

#include <stdexcept>

namespace attnroute {

const char* to_string(ProjKind kind) {
    switch (kind) {
        case ProjKind::ImgQ: return "ImgQ";
        case ProjKind::ImgK: return "ImgK";
        case ProjKind::ImgV: return "ImgV";
        case ProjKind::TxtQ: return "TxtQ";
        case ProjKind::TxtK: return "TxtK";
        case ProjKind::TxtV: return "TxtV";
    }
    return "?";
}

bool is_image_kv(ProjKind kind) { return kind == ProjKind::ImgK || kind == ProjKind::ImgV; }
bool is_text_kv(ProjKind kind) { return kind == ProjKind::TxtK || kind == ProjKind::TxtV; }

std::string ProjSite::str() const {
    return "L" + std::to_string(layer) + "/" + to_string(kind);
}

std::string Band::str() const {
    return "layers[" + std::to_string(layer_lo) + "," + std::to_string(layer_hi) + ")/steps[" +
           std::to_string(step_lo) + "," + std::to_string(step_hi) + ")";
}

long AttnOp::modifications_total() const {
    long total = 0;
    for (const auto& [site, count] : mods_) {
        total += count;
    }
    return total;
}

long AttnOp::modifications_at(const ProjSite& site) const {
    auto it = mods_.find(site);
    return it == mods_.end() ? 0 : it->second;
}

void AttnHub::attach(std::shared_ptr<AttnOp> op) {
    if (active_) {
        throw std::logic_error("AttnHub::attach: cannot attach op '" + op->name() + "' while a run is active");
    }
    if (!op) {
        throw std::invalid_argument("AttnHub::attach: null op");
    }
    chain_.push_back(std::move(op));
}

TensorF AttnHub::dispatch(const ProjSite& site, TensorF x) {
    if (!active_) {
        throw std::logic_error("AttnHub::dispatch: no run in progress (call begin_run first)");
    }
    const DispatchCtx ctx{site, current_step_, forwards_this_step_ > 0 ? forwards_this_step_ - 1 : 0};
    const Shape3 expected = x.shape();
    for (const auto& op : chain_) {
        x = op->apply(ctx, std::move(x));
        if (x.shape() != expected) {
            throw std::runtime_error("AttnHub::dispatch: op '" + op->name() + "' at site " + site.str() +
                                     " changed tensor shape from " + expected.str() + " to " + x.shape().str());
        }
    }
    ++firing_log_[site];
    if (trace_enabled_) {
        ++trace_[{current_step_, site.layer, static_cast<int>(site.kind)}];
    }
    return x;
}

void AttnHub::begin_run() {
    if (active_) {
        throw std::logic_error("AttnHub::begin_run: a run is already active");
    }
    active_ = true;
    current_step_ = 0;
    forwards_this_step_ = 0;
}

void AttnHub::end_run() {
    active_ = false;
    forwards_this_step_ = 0;
}

void AttnHub::begin_forward() {
    if (!active_) {
        throw std::logic_error("AttnHub::begin_forward: no run in progress");
    }
    ++forwards_this_step_;
}

void AttnHub::advance_step() {
    if (!active_) {
        throw std::logic_error("AttnHub::advance_step: no run in progress");
    }
    ++current_step_;
    forwards_this_step_ = 0;
}

void AttnHub::reset() {
    active_ = false;
    current_step_ = 0;
    forwards_this_step_ = 0;
    firing_log_.clear();
    trace_.clear();
    for (const auto& op : chain_) {
        op->clear_modifications();
        op->on_reset();
    }
}

long AttnHub::firings_at(const ProjSite& site) const {
    auto it = firing_log_.find(site);
    return it == firing_log_.end() ? 0 : it->second;
}

long AttnHub::firings_total() const {
    long total = 0;
    for (const auto& [site, count] : firing_log_) {
        total += count;
    }
    return total;
}

void AttnHub::set_trace(bool enabled) {
    trace_enabled_ = enabled;
    if (!enabled) {
        trace_.clear();
    }
}

void AttnHub::dump_trace(std::ostream& out) const {
    out << "step,layer,kind,fired\n";
    for (const auto& [key, fired] : trace_) {
        const auto& [step, layer, kind] = key;
        out << step << "," << layer << "," << to_string(static_cast<ProjKind>(kind)) << "," << fired << "\n";
    }
}

}  // namespace attnroute
