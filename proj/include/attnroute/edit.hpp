#pragma once

#include "attnroute/model.hpp"
#include "attnroute/ops.hpp"

#include <memory>
#include <string>
#include <vector>

namespace attnroute {

struct EditRunOptions {
    // Observers (e.g. the K probe) appended after the edit ops so they see
    // post-op tensors.
    std::vector<std::shared_ptr<AttnOp>> extra_ops;
    // Receives the latent after every step of the edit run.
    std::vector<TensorF>* trajectory = nullptr;
    // Optional caller-owned hub for post-run inspection. It is reset and
    // gets the op chain attached; pass a fresh hub.
    AttnHub* hub = nullptr;
    bool trace = false;
};

struct EditRunStats {
    long firings_total = 0;
    long modifications_total = 0;
    // 1 when the op needed a record pass (two-pass ops), else 0.
    int record_runs = 0;
};

// One edit end to end: builds the op chain for the spec, runs the record
// pass first when the spec needs one (same seed, the op's neutral prompt),
// then samples with the edit prompt. Returns the final latent.
TensorF run_edit(const Model& model, const LatentImage& source, const std::string& prompt,
                 const OpSpec& spec, const SampleConfig& sc, const EditRunOptions& opts = {},
                 EditRunStats* stats = nullptr);

}  // namespace attnroute
