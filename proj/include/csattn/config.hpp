#pragma once

#include <string>

#include "csattn/loss.hpp"
#include "csattn/net.hpp"
#include "csattn/synth.hpp"

namespace csattn {

struct DataConfig {
    std::string mode = "synth";  // "synth" or "dirs"
    RainSynthSpec synth;
    std::int64_t synth_count = 8;
    std::string degraded_dir;
    std::string clean_dir;
};

// Desk-scale defaults (patch 32, C=8, blocks [1,1,2], N=1); the full-scale
// recipe stays reachable through the config file.
struct TrainConfig {
    double lr_init = 5e-4;
    double lr_final = 1e-7;
    std::int64_t total_steps = 2000;
    std::int64_t patch = 32;
    std::int64_t batch = 2;
    std::uint64_t seed = 1;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    LossWeights loss;
    std::int64_t checkpoint_every = 500;
    std::int64_t log_every = 100;
    std::string out_dir = "run";
    NetConfig net;
    DataConfig data;

    TrainConfig() {
        net.base_channels = 8;
        net.blocks = {1, 1, 2};
        net.csattn.base_heads = 1;
    }

    void validate() const {
        if (!(lr_init > lr_final && lr_final > 0.0)) {
            throw std::runtime_error("train config: requires lr_init > lr_final > 0");
        }
        if (total_steps < 1) throw std::runtime_error("train config: total_steps must be >= 1");
        if (patch % 16 != 0) throw std::runtime_error("train config: patch must be divisible by 16");
        if (batch < 1) throw std::runtime_error("train config: batch must be >= 1");
        if (checkpoint_every < 1) throw std::runtime_error("train config: checkpoint_every must be >= 1");
        loss.validate();
        net.validate();
        if (data.mode != "synth" && data.mode != "dirs") {
            throw std::runtime_error("train config: data.mode must be 'synth' or 'dirs'");
        }
        if (data.mode == "synth") {
            data.synth.validate();
            if (data.synth_count < 1) throw std::runtime_error("train config: synth_count must be >= 1");
            if (data.synth.size < patch) throw std::runtime_error("train config: synth size smaller than patch");
        } else if (data.degraded_dir.empty() || data.clean_dir.empty()) {
            throw std::runtime_error("train config: dirs mode needs degraded_dir and clean_dir");
        }
    }
};

Activation activation_from_string(const std::string& s);

// Parses a JSON config document mirroring TrainConfig. Unknown keys anywhere
// are errors.
TrainConfig parse_train_config(const std::string& json_text);
TrainConfig load_train_config(const std::string& path);
std::string train_config_to_json(const TrainConfig& cfg);

}  // namespace csattn
