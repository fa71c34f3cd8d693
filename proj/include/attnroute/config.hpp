#pragma once

#include "attnroute/model.hpp"

#include <string>

namespace attnroute {

// Model and sampler settings as read from the plain-text config file.
struct HarnessConfig {
    ModelConfig model;
    SampleConfig sample;
};

// key=value lines, '#' comments. Accepted keys: num_layers, d_model,
// heads, noise_tokens, source_tokens, text_tokens, steps, cfg_scale,
// weight_seed. Unknown keys are rejected; omitted keys keep their
// defaults.
HarnessConfig parse_config(const std::string& text);
HarnessConfig load_config(const std::string& path);
std::string format_config(const HarnessConfig& cfg);

}  // namespace attnroute
