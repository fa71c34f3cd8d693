#include "attnroute/config.hpp"

#include "attnroute/ops.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace attnroute {

namespace {

std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        int v = std::stoi(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw SpecParseError("config: bad integer for " + key + ": '" + value + "'");
    }
}

uint64_t to_u64(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        uint64_t v = std::stoull(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw SpecParseError("config: bad integer for " + key + ": '" + value + "'");
    }
}

double to_real(const std::string& key, const std::string& value) {
    try {
        size_t used = 0;
        double v = std::stod(value, &used);
        if (used != value.size() || !std::isfinite(v)) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw SpecParseError("config: bad number for " + key + ": '" + value + "'");
    }
}

}  // namespace

HarnessConfig parse_config(const std::string& text) {
    HarnessConfig cfg;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = strip(line);
        if (line.empty()) {
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw SpecParseError("config: expected 'key = value', got '" + line + "'");
        }
        const std::string key = strip(line.substr(0, eq));
        const std::string value = strip(line.substr(eq + 1));
        if (key == "num_layers") {
            cfg.model.num_layers = to_int(key, value);
        } else if (key == "d_model") {
            cfg.model.d_model = to_int(key, value);
        } else if (key == "heads") {
            cfg.model.heads = to_int(key, value);
        } else if (key == "noise_tokens") {
            cfg.model.noise_tokens = to_int(key, value);
        } else if (key == "source_tokens") {
            cfg.model.source_tokens = to_int(key, value);
        } else if (key == "text_tokens") {
            cfg.model.text_tokens = to_int(key, value);
        } else if (key == "steps") {
            cfg.sample.steps = to_int(key, value);
        } else if (key == "cfg_scale") {
            cfg.sample.cfg_scale = to_real(key, value);
        } else if (key == "weight_seed") {
            cfg.model.weight_seed = to_u64(key, value);
        } else {
            throw SpecParseError("config: unknown key '" + key + "'");
        }
    }
    cfg.model.validate();
    cfg.sample.validate();
    return cfg;
}

HarnessConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path);
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string format_config(const HarnessConfig& cfg) {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "num_layers = %d\n"
                  "d_model = %d\n"
                  "heads = %d\n"
                  "noise_tokens = %d\n"
                  "source_tokens = %d\n"
                  "text_tokens = %d\n"
                  "steps = %d\n"
                  "cfg_scale = %g\n"
                  "weight_seed = %llu\n",
                  cfg.model.num_layers, cfg.model.d_model, cfg.model.heads,
                  cfg.model.noise_tokens, cfg.model.source_tokens, cfg.model.text_tokens,
                  cfg.sample.steps, cfg.sample.cfg_scale,
                  static_cast<unsigned long long>(cfg.model.weight_seed));
    return buf;
}

}  // namespace attnroute
