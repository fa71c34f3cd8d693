#include "attnroute/edit.hpp"

namespace attnroute {

TensorF run_edit(const Model& model, const LatentImage& source, const std::string& prompt,
                 const OpSpec& spec, const SampleConfig& sc, const EditRunOptions& opts,
                 EditRunStats* stats) {
    validate_op_spec(spec);
    sc.validate();

    AttnHub local_hub;
    AttnHub* hub = opts.hub ? opts.hub : &local_hub;
    hub->reset();
    hub->set_trace(opts.trace);

    const ModelConfig& cfg = model.config();
    for (auto& op : make_ops(spec, cfg.num_layers, sc.steps, cfg.source_start())) {
        hub->attach(std::move(op));
    }
    for (const auto& op : opts.extra_ops) {
        hub->attach(op);
    }

    if (stats) {
        *stats = {};
    }
    if (spec.needs_record_pass()) {
        // Record run: same seed and sampler settings, the op's neutral
        // prompt, ops in record mode. Output is discarded; only the caches
        // matter.
        for (const auto& op : hub->ops()) {
            op->set_record_mode(true);
        }
        model.sample(source, spec.record_prompt().value(), sc, hub);
        for (const auto& op : hub->ops()) {
            op->set_record_mode(false);
        }
        if (stats) {
            stats->record_runs = 1;
        }
    }

    TensorF out = model.sample(source, prompt, sc, hub, opts.trajectory);

    if (stats) {
        stats->firings_total = hub->firings_total();
        for (const auto& op : hub->ops()) {
            stats->modifications_total += op->modifications_total();
        }
    }
    return out;
}

}  // namespace attnroute
