#include "csattn/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace csattn {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& where, const std::set<std::string>& known) {
    if (!j.is_object()) throw std::runtime_error("config: " + where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (known.find(it.key()) == known.end()) {
            throw std::runtime_error("config: unknown key '" + it.key() + "' in " + where);
        }
    }
}

template <typename T>
void get_to(const json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

void parse_csattn(const json& j, CSAttnConfig& c) {
    check_keys(j, "net.csattn",
               {"base_heads", "activation", "alpha_init", "alpha_divides", "use_nonlinear_activation",
                "use_value_nta", "use_aggregation", "progressive_heads", "intra_residual", "use_spatial_scaling",
                "attention_count", "baseline_stacked", "conv_bias", "ln_eps", "l2_eps"});
    get_to(j, "base_heads", c.base_heads);
    if (j.contains("activation")) c.activation = activation_from_string(j.at("activation").get<std::string>());
    get_to(j, "alpha_init", c.alpha_init);
    get_to(j, "alpha_divides", c.alpha_divides);
    get_to(j, "use_nonlinear_activation", c.use_nonlinear_activation);
    get_to(j, "use_value_nta", c.use_value_nta);
    get_to(j, "use_aggregation", c.use_aggregation);
    get_to(j, "progressive_heads", c.progressive_heads);
    get_to(j, "intra_residual", c.intra_residual);
    get_to(j, "use_spatial_scaling", c.use_spatial_scaling);
    get_to(j, "attention_count", c.attention_count);
    get_to(j, "baseline_stacked", c.baseline_stacked);
    get_to(j, "conv_bias", c.conv_bias);
    get_to(j, "ln_eps", c.ln_eps);
    get_to(j, "l2_eps", c.l2_eps);
}

void parse_net(const json& j, NetConfig& n) {
    check_keys(j, "net", {"base_channels", "blocks", "csattn"});
    get_to(j, "base_channels", n.base_channels);
    if (j.contains("blocks")) {
        const auto& b = j.at("blocks");
        if (!b.is_array() || b.size() != 3) throw std::runtime_error("config: net.blocks must be a 3-element array");
        for (int i = 0; i < 3; ++i) n.blocks[static_cast<std::size_t>(i)] = b[static_cast<std::size_t>(i)].get<std::int64_t>();
    }
    if (j.contains("csattn")) parse_csattn(j.at("csattn"), n.csattn);
}

void parse_synth(const json& j, RainSynthSpec& s) {
    check_keys(j, "data.synth",
               {"size", "streaks_min", "streaks_max", "angle_min_deg", "angle_max_deg", "length_min", "length_max",
                "width_min", "width_max", "intensity_min", "intensity_max"});
    get_to(j, "size", s.size);
    get_to(j, "streaks_min", s.streaks_min);
    get_to(j, "streaks_max", s.streaks_max);
    get_to(j, "angle_min_deg", s.angle_min_deg);
    get_to(j, "angle_max_deg", s.angle_max_deg);
    get_to(j, "length_min", s.length_min);
    get_to(j, "length_max", s.length_max);
    get_to(j, "width_min", s.width_min);
    get_to(j, "width_max", s.width_max);
    get_to(j, "intensity_min", s.intensity_min);
    get_to(j, "intensity_max", s.intensity_max);
}

void parse_data(const json& j, DataConfig& d) {
    check_keys(j, "data", {"mode", "synth", "synth_count", "degraded_dir", "clean_dir"});
    get_to(j, "mode", d.mode);
    get_to(j, "synth_count", d.synth_count);
    get_to(j, "degraded_dir", d.degraded_dir);
    get_to(j, "clean_dir", d.clean_dir);
    if (j.contains("synth")) parse_synth(j.at("synth"), d.synth);
}

void parse_loss(const json& j, LossWeights& w) {
    check_keys(j, "loss", {"lambda_freq", "scale_weights"});
    get_to(j, "lambda_freq", w.lambda_freq);
    if (j.contains("scale_weights")) {
        const auto& s = j.at("scale_weights");
        if (!s.is_array() || s.size() != 3) {
            throw std::runtime_error("config: loss.scale_weights must be a 3-element array");
        }
        for (int i = 0; i < 3; ++i) w.scale[static_cast<std::size_t>(i)] = s[static_cast<std::size_t>(i)].get<double>();
    }
}

}  // namespace

Activation activation_from_string(const std::string& s) {
    if (s == "gelu") return Activation::gelu;
    if (s == "relu") return Activation::relu;
    if (s == "leaky_relu") return Activation::leaky_relu;
    if (s == "silu") return Activation::silu;
    throw std::runtime_error("config: unknown activation '" + s + "' (gelu|relu|leaky_relu|silu)");
}

TrainConfig parse_train_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: JSON parse error: ") + e.what());
    }
    check_keys(j, "config root",
               {"lr_init", "lr_final", "total_steps", "patch", "batch", "seed", "beta1", "beta2", "eps",
                "weight_decay", "loss", "checkpoint_every", "log_every", "out_dir", "net", "data"});

    TrainConfig cfg;
    get_to(j, "lr_init", cfg.lr_init);
    get_to(j, "lr_final", cfg.lr_final);
    get_to(j, "total_steps", cfg.total_steps);
    get_to(j, "patch", cfg.patch);
    get_to(j, "batch", cfg.batch);
    get_to(j, "seed", cfg.seed);
    get_to(j, "beta1", cfg.beta1);
    get_to(j, "beta2", cfg.beta2);
    get_to(j, "eps", cfg.eps);
    get_to(j, "weight_decay", cfg.weight_decay);
    get_to(j, "checkpoint_every", cfg.checkpoint_every);
    get_to(j, "log_every", cfg.log_every);
    get_to(j, "out_dir", cfg.out_dir);
    if (j.contains("loss")) parse_loss(j.at("loss"), cfg.loss);
    if (j.contains("net")) parse_net(j.at("net"), cfg.net);
    if (j.contains("data")) parse_data(j.at("data"), cfg.data);
    cfg.validate();
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_train_config(ss.str());
}

std::string train_config_to_json(const TrainConfig& cfg) {
    json j;
    j["lr_init"] = cfg.lr_init;
    j["lr_final"] = cfg.lr_final;
    j["total_steps"] = cfg.total_steps;
    j["patch"] = cfg.patch;
    j["batch"] = cfg.batch;
    j["seed"] = cfg.seed;
    j["beta1"] = cfg.beta1;
    j["beta2"] = cfg.beta2;
    j["eps"] = cfg.eps;
    j["weight_decay"] = cfg.weight_decay;
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["log_every"] = cfg.log_every;
    j["out_dir"] = cfg.out_dir;
    j["loss"] = {{"lambda_freq", cfg.loss.lambda_freq},
                 {"scale_weights", {cfg.loss.scale[0], cfg.loss.scale[1], cfg.loss.scale[2]}}};
    const CSAttnConfig& c = cfg.net.csattn;
    j["net"] = {{"base_channels", cfg.net.base_channels},
                {"blocks", {cfg.net.blocks[0], cfg.net.blocks[1], cfg.net.blocks[2]}},
                {"csattn",
                 {{"base_heads", c.base_heads},
                  {"activation", activation_name(c.activation)},
                  {"alpha_init", c.alpha_init},
                  {"alpha_divides", c.alpha_divides},
                  {"use_nonlinear_activation", c.use_nonlinear_activation},
                  {"use_value_nta", c.use_value_nta},
                  {"use_aggregation", c.use_aggregation},
                  {"progressive_heads", c.progressive_heads},
                  {"intra_residual", c.intra_residual},
                  {"use_spatial_scaling", c.use_spatial_scaling},
                  {"attention_count", c.attention_count},
                  {"baseline_stacked", c.baseline_stacked},
                  {"conv_bias", c.conv_bias},
                  {"ln_eps", c.ln_eps},
                  {"l2_eps", c.l2_eps}}}};
    j["data"] = {{"mode", cfg.data.mode},
                 {"synth_count", cfg.data.synth_count},
                 {"degraded_dir", cfg.data.degraded_dir},
                 {"clean_dir", cfg.data.clean_dir},
                 {"synth",
                  {{"size", cfg.data.synth.size},
                   {"streaks_min", cfg.data.synth.streaks_min},
                   {"streaks_max", cfg.data.synth.streaks_max},
                   {"angle_min_deg", cfg.data.synth.angle_min_deg},
                   {"angle_max_deg", cfg.data.synth.angle_max_deg},
                   {"length_min", cfg.data.synth.length_min},
                   {"length_max", cfg.data.synth.length_max},
                   {"width_min", cfg.data.synth.width_min},
                   {"width_max", cfg.data.synth.width_max},
                   {"intensity_min", cfg.data.synth.intensity_min},
                   {"intensity_max", cfg.data.synth.intensity_max}}}};
    return j.dump(2);
}

}  // namespace csattn
