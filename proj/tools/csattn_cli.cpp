#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "csattn/checkpoint.hpp"
#include "csattn/config.hpp"
#include "csattn/gradcheck_battery.hpp"
#include "csattn/infer.hpp"
#include "csattn/svg_plot.hpp"
#include "csattn/trainer.hpp"

namespace fs = std::filesystem;
using namespace csattn;

namespace {

int run_train(const std::string& config_path, const std::string& out_override, std::int64_t steps_override,
              std::int64_t seed_override) {
    TrainConfig cfg = load_train_config(config_path);
    if (!out_override.empty()) cfg.out_dir = out_override;
    if (steps_override > 0) cfg.total_steps = steps_override;
    if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
    cfg.validate();

    TrainResult res = train(cfg);
    std::printf("training done: %lld steps\n", static_cast<long long>(cfg.total_steps));
    std::printf("final train-set eval: loss %.6f  psnr %.3f dB  ssim %.4f  mae %.5f\n", res.final_eval.loss,
                res.final_eval.psnr, res.final_eval.ssim, res.final_eval.mae);
    std::printf("checkpoint: %s\nmetrics:    %s\n", res.final_checkpoint.c_str(), res.csv_path.c_str());
    return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& in_path, const std::string& out_path,
              std::string config_path) {
    if (config_path.empty()) {
        const fs::path guess = fs::path(ckpt_path).parent_path() / "config.json";
        if (!fs::exists(guess)) {
            throw std::runtime_error("infer: no --config given and " + guess.string() + " not found");
        }
        config_path = guess.string();
    }
    TrainConfig cfg = load_train_config(config_path);
    Net<float> net = build_net<float>(cfg.net, cfg.seed);
    load_checkpoint_into(ckpt_path, net.params);

    Tensor<float> img = read_png_rgb(in_path);
    Tensor<float> restored = infer_image(net, img);
    write_png_rgb(out_path, restored);
    std::printf("restored %lldx%lld image -> %s\n", static_cast<long long>(img.shape[3]),
                static_cast<long long>(img.shape[2]), out_path.c_str());
    return 0;
}

int run_gradcheck(const std::string& module) {
    const auto results = gradcheck_battery(module);
    int failures = 0;
    for (const auto& r : results) {
        std::printf("[%s] %-44s max_rel_err %.3e (tol %.1e)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(),
                    r.max_rel_err, r.tol);
        if (!r.passed) ++failures;
    }
    std::printf("%zu checks, %d failures\n", results.size(), failures);
    return failures == 0 ? 0 : 1;
}

void print_cost(std::FILE* f, const CostReport& rep, std::int64_t params_exact) {
    std::fprintf(f, "params                  %lld\n", static_cast<long long>(params_exact));
    std::fprintf(f, "flops (multiply-adds)   %lld\n", static_cast<long long>(rep.flops));
    std::fprintf(f, "  attention scores      %lld\n", static_cast<long long>(rep.attn_score_flops));
    std::fprintf(f, "  attention apply       %lld\n", static_cast<long long>(rep.attn_apply_flops));
    std::fprintf(f, "softmax evals           %lld\n", static_cast<long long>(rep.softmax_evals));
    std::fprintf(f, "peak activation bytes   %lld\n", static_cast<long long>(rep.peak_activation_bytes));
}

int run_count(const std::string& config_path, std::int64_t h, std::int64_t w, const std::string& csv_path) {
    TrainConfig cfg = load_train_config(config_path);
    Net<float> net = build_net<float>(cfg.net, cfg.seed);
    const std::int64_t params_exact = count_params(net.params);
    CostReport rep = count_flops(cfg.net, h, w);
    if (rep.params != params_exact) {
        throw std::runtime_error("count: analytic parameter count disagrees with the built network");
    }
    std::printf("cost report at input 1x3x%lldx%lld\n", static_cast<long long>(h), static_cast<long long>(w));
    print_cost(stdout, rep, params_exact);

    // Per-stage score-term decomposition (scaled vs unscaled).
    for (int stage = 2; stage <= cfg.net.csattn.attention_count; ++stage) {
        const CSAttnConfig bc = cfg.net.level_csattn(1);
        const std::int64_t scaled = attention_score_flops(bc, stage, h, w, true);
        const std::int64_t unscaled = attention_score_flops(bc, stage, h, w, false);
        std::printf("stage-%d score flops (level 1): scaled %lld, unscaled %lld, ratio %.1f\n", stage,
                    static_cast<long long>(scaled), static_cast<long long>(unscaled),
                    static_cast<double>(unscaled) / static_cast<double>(scaled));
    }

    if (!csv_path.empty()) {
        std::ofstream csv(csv_path, std::ios::trunc);
        csv << "params,flops,attn_score_flops,attn_apply_flops,softmax_evals,peak_activation_bytes\n";
        csv << params_exact << "," << rep.flops << "," << rep.attn_score_flops << "," << rep.attn_apply_flops << ","
            << rep.softmax_evals << "," << rep.peak_activation_bytes << "\n";
    }
    return 0;
}

TrainConfig config_for_row(TrainConfig base, const std::string& row) {
    CSAttnConfig& c = base.net.csattn;
    if (row == "a") {
        c.use_nonlinear_activation = false;
    } else if (row == "b") {
        c.use_value_nta = false;
    } else if (row == "c") {
        c.use_aggregation = false;
    } else if (row == "d") {
        c.progressive_heads = false;
    } else if (row == "e") {
        c.intra_residual = false;
    } else if (row == "f") {
        // full model
    } else if (row == "stacked") {
        c.baseline_stacked = true;
    } else {
        throw std::runtime_error("ablate: unknown row '" + row + "' (a,b,c,d,e,f,stacked)");
    }
    return base;
}

int run_ablate(const std::string& config_path, const std::string& rows_arg, const std::string& out_dir) {
    TrainConfig base = load_train_config(config_path);
    const std::string base_out = out_dir.empty() ? base.out_dir : out_dir;

    std::vector<std::string> rows;
    {
        std::stringstream ss(rows_arg);
        std::string item;
        while (std::getline(ss, item, ',')) {
            if (!item.empty()) rows.push_back(item);
        }
    }
    if (rows.empty()) throw std::runtime_error("ablate: empty row list");

    fs::create_directories(base_out);
    std::ofstream summary(fs::path(base_out) / "ablate_summary.csv", std::ios::trunc);
    summary << "row,params,flops,attn_score_flops,softmax_evals,peak_activation_bytes,"
               "final_loss,final_psnr,final_ssim,final_mae\n";

    for (const auto& row : rows) {
        TrainConfig cfg = config_for_row(base, row);
        cfg.out_dir = (fs::path(base_out) / ("row_" + row)).string();
        std::printf("=== ablation row %s -> %s ===\n", row.c_str(), cfg.out_dir.c_str());

        Net<float> net = build_net<float>(cfg.net, cfg.seed);
        CostReport rep = count_flops(cfg.net, cfg.patch, cfg.patch);
        TrainResult res = train(cfg);

        summary << row << "," << count_params(net.params) << "," << rep.flops << "," << rep.attn_score_flops << ","
                << rep.softmax_evals << "," << rep.peak_activation_bytes << "," << res.final_eval.loss << ","
                << res.final_eval.psnr << "," << res.final_eval.ssim << "," << res.final_eval.mae << "\n";
        summary.flush();
        std::printf("row %s: params %lld, final loss %.6f, psnr %.3f dB\n", row.c_str(),
                    static_cast<long long>(count_params(net.params)), res.final_eval.loss, res.final_eval.psnr);
    }
    std::printf("summary: %s\n", (fs::path(base_out) / "ablate_summary.csv").string().c_str());
    return 0;
}

int run_plot(const std::string& csv_path, const std::string& x_col, const std::string& y_cols,
             const std::string& out_path) {
    std::vector<double> x = csv_column(csv_path, x_col);
    std::vector<PlotSeries> series;
    std::stringstream ss(y_cols);
    std::string col;
    while (std::getline(ss, col, ',')) {
        if (col.empty()) continue;
        PlotSeries s;
        s.name = col;
        s.y = csv_column(csv_path, col);
        s.x = x;
        s.x.resize(std::min(s.x.size(), s.y.size()));
        s.y.resize(s.x.size());
        series.push_back(std::move(s));
    }
    write_svg_chart(out_path, series, x_col, y_cols);
    std::printf("chart written to %s\n", out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"CSAttn restoration network: training, inference and analysis"};
    app.require_subcommand(1);

    std::string config_path, out_dir, ckpt_path, in_path, out_path, module = "all";
    std::string rows = "a,b,c,d,e,f,stacked", csv_path, x_col = "step", y_cols = "loss";
    std::int64_t steps_override = -1, seed_override = -1;
    std::vector<std::int64_t> hw;

    CLI::App* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
    train_cmd->add_option("--config", config_path, "config file")->required();
    train_cmd->add_option("--out", out_dir, "override output directory");
    train_cmd->add_option("--steps", steps_override, "override total steps");
    train_cmd->add_option("--seed", seed_override, "override seed");

    CLI::App* infer_cmd = app.add_subcommand("infer", "restore one PNG with a trained checkpoint");
    infer_cmd->add_option("--ckpt", ckpt_path, "checkpoint file")->required();
    infer_cmd->add_option("--in", in_path, "input PNG")->required();
    infer_cmd->add_option("--out", out_path, "output PNG")->required();
    infer_cmd->add_option("--config", config_path, "config file (default: config.json next to the checkpoint)");

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference verification battery");
    grad_cmd->add_option("--module", module, "all|tensor|nn|block|loss|net");

    CLI::App* count_cmd = app.add_subcommand("count", "parameter/FLOPs/memory cost report");
    count_cmd->add_option("--config", config_path, "config file")->required();
    count_cmd->add_option("--hw", hw, "input height and width (one value for square)")
        ->required()
        ->expected(1, 2);
    count_cmd->add_option("--csv", csv_path, "also write the report as CSV");

    CLI::App* ablate_cmd = app.add_subcommand("ablate", "run the component toggle matrix");
    ablate_cmd->add_option("--config", config_path, "config file")->required();
    ablate_cmd->add_option("--rows", rows, "comma list from a,b,c,d,e,f,stacked");
    ablate_cmd->add_option("--out", out_dir, "output directory (default: config out_dir)");

    CLI::App* plot_cmd = app.add_subcommand("plot", "render CSV columns as an SVG line chart");
    plot_cmd->add_option("--csv", csv_path, "metrics CSV")->required();
    plot_cmd->add_option("--x", x_col, "x column");
    plot_cmd->add_option("--y", y_cols, "comma list of y columns");
    plot_cmd->add_option("--out", out_path, "output SVG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train_cmd->parsed()) return run_train(config_path, out_dir, steps_override, seed_override);
        if (infer_cmd->parsed()) return run_infer(ckpt_path, in_path, out_path, config_path);
        if (grad_cmd->parsed()) return run_gradcheck(module);
        if (count_cmd->parsed()) return run_count(config_path, hw[0], hw.size() > 1 ? hw[1] : hw[0], csv_path);
        if (ablate_cmd->parsed()) return run_ablate(config_path, rows, out_dir);
        if (plot_cmd->parsed()) return run_plot(csv_path, x_col, y_cols, out_path);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
