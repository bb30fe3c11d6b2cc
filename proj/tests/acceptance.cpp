// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavier than the unit tests; the desk-scale training criterion
// runs nine full recipes.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "csattn/checkpoint.hpp"
#include "csattn/gradcheck_battery.hpp"
#include "csattn/infer.hpp"
#include "csattn/optim.hpp"
#include "csattn/trainer.hpp"

using namespace csattn;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int num, const char* name, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %d: %s — %s\n", ok ? "PASS" : "FAIL", num, name, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

fs::path scratch(const std::string& name) {
    fs::path p = fs::temp_directory_path() / "csattn_acceptance" / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// --- criterion 1: gradient fidelity ---------------------------------------

void criterion_gradients() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto results = gradcheck_battery("all");
    const double secs = seconds_since(t0);
    int failures = 0;
    double worst = 0;
    std::string worst_name = "-";
    for (const auto& r : results) {
        if (!r.passed) ++failures;
        if (r.max_rel_err > worst) {
            worst = r.max_rel_err;
            worst_name = r.name;
        }
    }
    std::ostringstream d;
    d << results.size() << " finite-difference checks (step 1e-5, tol 1e-4), " << failures
      << " failures, worst " << worst << " (" << worst_name << "), " << secs << " s";
    report(1, "gradient fidelity", failures == 0 && secs < 300.0, d.str());
}

// --- criterion 2: structural invariants ------------------------------------

void criterion_structure() {
    bool ok = true;
    std::ostringstream d;

    // softmax rows sum to 1 +- 1e-6
    Rng rng(21);
    for (int trial = 0; trial < 20 && ok; ++trial) {
        const std::int64_t rows = 1 + rng.uniform_int(6), cols = 1 + rng.uniform_int(7);
        Tape<double> tape;
        const Tensor<double>& y =
            tape.val(softmax_lastdim(tape.leaf(rng.uniform_tensor<double>({rows, cols}, -9, 9))));
        for (std::int64_t r = 0; r < rows; ++r) {
            double sum = 0;
            for (std::int64_t c = 0; c < cols; ++c) sum += y[r * cols + c];
            if (std::abs(sum - 1.0) > 1e-6) ok = false;
        }
    }
    d << "softmax row sums";

    // pixel shuffle round trip, bitwise
    for (int trial = 0; trial < 10 && ok; ++trial) {
        const std::int64_t r = 1 + rng.uniform_int(3);
        Tensor<float> x = rng.uniform_tensor<float>(
            {1 + rng.uniform_int(2), 1 + rng.uniform_int(3), r * (1 + rng.uniform_int(4)), r * (1 + rng.uniform_int(4))},
            -1, 1);
        Tape<float> tape;
        if (!bitwise_equal(tape.val(pixel_shuffle(pixel_unshuffle(tape.leaf(x), r), r)), x)) ok = false;
    }
    d << ", shuffle round trip";

    // block output shape across every toggle combination and attention count
    int combos = 0;
    Tensor<double> x = rng.uniform_tensor<double>({1, 4, 8, 8}, -1, 1);
    for (int mask = 0; mask < 64 && ok; ++mask) {
        for (int count = 1; count <= 3; ++count) {
            CSAttnConfig cfg;
            cfg.channels = 4;
            cfg.base_heads = 1;
            cfg.use_nonlinear_activation = mask & 1;
            cfg.use_value_nta = mask & 2;
            cfg.use_aggregation = mask & 4;
            cfg.progressive_heads = mask & 8;
            cfg.intra_residual = mask & 16;
            cfg.use_spatial_scaling = mask & 32;
            cfg.attention_count = count;
            ParamStore<double> ps;
            Rng prng(1000 + mask * 4 + count);
            BlockIdx idx = build_block_params(ps, "blk", cfg, prng);
            Tape<double> tape;
            auto leaves = make_leaves(tape, ps, false);
            if (tape.val(csattn_forward(tape.leaf(x), idx, leaves, cfg)).shape != x.shape) ok = false;
            ++combos;
        }
    }
    d << ", " << combos << " toggle combinations";

    // d = 1 attention reduces to identity on V
    for (int trial = 0; trial < 5 && ok; ++trial) {
        const std::int64_t c = 1 + rng.uniform_int(6);
        Tensor<double> q = rng.uniform_tensor<double>({1, c, 3, 3}, -2, 2);
        Tensor<double> k = rng.uniform_tensor<double>({1, c, 3, 3}, -2, 2);
        Tensor<double> v = rng.uniform_tensor<double>({1, c, 2, 5}, -2, 2);
        Tensor<double> alpha = rng.uniform_tensor<double>({c}, 0.2, 3.0);
        Tape<double> tape;
        Var<double> out = channel_attention(tape.leaf(q), tape.leaf(k), tape.leaf(v), tape.leaf(alpha), c);
        if (!bitwise_equal(tape.val(out), v)) ok = false;
    }
    d << ", d=1 identity-on-V";
    report(2, "structural invariants", ok, d.str());
}

// --- criterion 3: cost-model checks -----------------------------------------

void criterion_cost_model() {
    NetConfig full;
    full.base_channels = 8;
    full.blocks = {1, 1, 2};
    full.csattn.base_heads = 1;

    NetConfig no_nta = full, no_agg = full, no_act = full, no_scale = full;
    no_nta.csattn.use_value_nta = false;
    no_agg.csattn.use_aggregation = false;
    no_act.csattn.use_nonlinear_activation = false;
    no_scale.csattn.use_spatial_scaling = false;

    const CostReport rep_full = count_flops(full, 32, 32);
    const CostReport rep_no_nta = count_flops(no_nta, 32, 32);
    const CostReport rep_no_agg = count_flops(no_agg, 32, 32);
    const CostReport rep_no_act = count_flops(no_act, 32, 32);
    const CostReport rep_no_scale = count_flops(no_scale, 32, 32);

    const bool params_ok = rep_full.params > rep_no_nta.params && rep_full.params > rep_no_agg.params;
    const bool act_rows_ok = rep_no_act.flops == rep_full.flops && rep_no_act.params == rep_full.params;

    CSAttnConfig bc = full.csattn;
    bc.channels = 8;
    const bool ratio_ok = attention_score_flops(bc, 2, 64, 64, false) == 4 * attention_score_flops(bc, 2, 64, 64, true) &&
                          attention_score_flops(bc, 3, 64, 64, false) == 16 * attention_score_flops(bc, 3, 64, 64, true);
    const bool memory_ok = rep_full.peak_activation_bytes < rep_no_scale.peak_activation_bytes;

    std::ostringstream d;
    d << "params full=" << rep_full.params << " > w/o-NTA=" << rep_no_nta.params << " > ... w/o-agg="
      << rep_no_agg.params << "; activation-toggle flops " << rep_no_act.flops << " == " << rep_full.flops
      << "; score ratios 4/16 exact; activation bytes scaled " << rep_full.peak_activation_bytes << " < unscaled "
      << rep_no_scale.peak_activation_bytes;
    report(3, "cost model", params_ok && act_rows_ok && ratio_ok && memory_ok, d.str());
}

// --- criterion 4: optimizer and schedule ------------------------------------

void criterion_optimizer() {
    const bool endpoints_ok = cosine_lr(0, 2000, 5e-4, 1e-7) == 5e-4 && cosine_lr(2000, 2000, 5e-4, 1e-7) == 1e-7;

    // first AdamW step against the closed form
    ParamStore<double> ps;
    ps.add("theta", Tensor<double>::zeros(Shape{1}));
    AdamW<double> opt(ps, AdamWConfig{});
    std::vector<Tensor<double>> grads = {Tensor<double>::ones(Shape{1})};
    opt.step(ps, grads, 1e-3);
    const double m_hat = (0.1 * 1.0) / (1.0 - 0.9);
    const double v_hat = (0.001 * 1.0) / (1.0 - 0.999);
    const double expected = -1e-3 * (m_hat / (std::sqrt(v_hat) + 1e-8));
    const bool adamw_ok = std::abs(ps.tensors[0][0] - expected) < 1e-12;

    // ten-step training reproducibility, bitwise
    auto ten_steps = [](const std::string& dir) {
        TrainConfig cfg;
        cfg.total_steps = 10;
        cfg.batch = 1;
        cfg.log_every = 0;
        cfg.out_dir = dir;
        return train(cfg).step_losses;
    };
    const auto a = ten_steps(scratch("repro_a").string());
    const auto b = ten_steps(scratch("repro_b").string());
    bool repro_ok = a.size() == 10 && b.size() == 10;
    for (std::size_t i = 0; repro_ok && i < a.size(); ++i) repro_ok = a[i] == b[i];

    std::ostringstream d;
    d << "cosine endpoints exact; AdamW first step err " << std::abs(ps.tensors[0][0] - expected)
      << "; 10-step loss sequence bitwise equal";
    report(4, "optimizer and schedule", endpoints_ok && adamw_ok && repro_ok, d.str());
}

// --- criterion 5: desk-scale learning ----------------------------------------

struct ArmResult {
    double loss = -1;
    double psnr = -1;
    bool failed = true;
};

void criterion_desk_training() {
    const auto t0 = std::chrono::steady_clock::now();
    const char* variants[3] = {"full", "count1", "stacked"};
    ArmResult arm[3][3];

    for (int s = 0; s < 3; ++s) {
        std::thread workers[3];
        for (int v = 0; v < 3; ++v) {
            workers[v] = std::thread([&, v, s]() {
                try {
                    TrainConfig cfg;  // desk defaults: C=8, N=1, blocks [1,1,2], patch 32
                    cfg.total_steps = 2000;
                    cfg.batch = 1;
                    cfg.seed = static_cast<std::uint64_t>(1 + s);
                    cfg.log_every = 0;
                    cfg.data.synth_count = 8;
                    cfg.out_dir = scratch(std::string("desk_") + variants[v] + "_s" + std::to_string(1 + s)).string();
                    if (v == 1) cfg.net.csattn.attention_count = 1;
                    if (v == 2) cfg.net.csattn.baseline_stacked = true;
                    TrainResult r = train(cfg);
                    arm[v][s].loss = r.final_eval.loss;
                    arm[v][s].psnr = r.final_eval.psnr;
                    arm[v][s].failed = false;
                } catch (const std::exception& e) {
                    std::fprintf(stderr, "desk arm %s seed %d failed: %s\n", variants[v], 1 + s, e.what());
                }
            });
        }
        for (auto& w : workers) w.join();
    }
    const double secs = seconds_since(t0);

    int psnr_pass = 0, count1_pass = 0, stacked_pass = 0;
    bool ran = true;
    for (int s = 0; s < 3; ++s) {
        for (int v = 0; v < 3; ++v) ran = ran && !arm[v][s].failed;
        if (arm[0][s].psnr >= 35.0) ++psnr_pass;
        // ordering only: a single attention and the stacked baseline must
        // not beat the full continuous chain
        if (arm[1][s].loss > arm[0][s].loss) ++count1_pass;
        if (arm[2][s].loss >= arm[0][s].loss) ++stacked_pass;
    }

    std::ostringstream d;
    d.precision(4);
    for (int s = 0; s < 3; ++s) {
        d << "seed" << 1 + s << "(full " << arm[0][s].loss << "/" << arm[0][s].psnr << "dB, 1-attn "
          << arm[1][s].loss << ", stacked " << arm[2][s].loss << ") ";
    }
    d << "| psnr>=35dB " << psnr_pass << "/3, 1-attn ordering " << count1_pass << "/3, stacked ordering "
      << stacked_pass << "/3, " << static_cast<int>(secs) << " s";
    const bool ok = ran && psnr_pass >= 2 && count1_pass >= 2 && stacked_pass >= 2 && secs <= 900.0;
    report(5, "desk-scale learning", ok, d.str());
}

// --- criterion 6: metric correctness ------------------------------------------

void criterion_metrics() {
    Rng rng(61);
    Tensor<double> a = rng.uniform_tensor<double>({1, 3, 16, 16}, 0.0, 0.9);
    Tensor<double> b = a;
    for (auto& v : b.data) v += 0.1;
    const bool psnr_ok = std::abs(psnr(a, b) - 20.0) < 1e-9 && std::isinf(psnr(a, a));
    const bool ssim_ok = std::abs(ssim(a, a) - 1.0) < 1e-9;

    Tape<double> tape;
    const double fq_same = tape.val(frequency_loss(tape.leaf(a), tape.leaf(a)))[0];
    const double fq_diff = tape.val(frequency_loss(tape.leaf(a), tape.leaf(b)))[0];
    const bool freq_ok = fq_same == 0.0 && fq_diff > 0.0;

    Tensor<double> pred = rng.uniform_tensor<double>({1, 2, 16, 8}, 0, 1);
    Tensor<double> gt = rng.uniform_tensor<double>({1, 2, 16, 8}, 0, 1);
    const double fast = tape.val(frequency_loss(tape.leaf(pred), tape.leaf(gt), false))[0];
    const double slow = tape.val(frequency_loss(tape.leaf(pred), tape.leaf(gt), true))[0];
    const bool dft_ok = std::abs(fast - slow) < 1e-6;

    std::ostringstream d;
    d << "psnr(a,a+0.1)=" << psnr(a, b) << " dB; ssim(identical)=" << ssim(a, a) << "; freq zero-iff-identical; |fft-dft|="
      << std::abs(fast - slow);
    report(6, "metric correctness", psnr_ok && ssim_ok && freq_ok && dft_ok, d.str());
}

// --- criterion 7: persistence ---------------------------------------------------

void criterion_persistence() {
    const fs::path dir = scratch("persist");
    Rng rng(71);

    NetConfig cfg;
    cfg.base_channels = 4;
    cfg.blocks = {1, 1, 1};
    cfg.csattn.base_heads = 1;
    Net<float> net = build_net<float>(cfg, 9);

    const std::string path = (dir / "net.ckpt").string();
    save_checkpoint(path, net.params);
    ParamStore<float> loaded = load_checkpoint(path);
    bool round_ok = loaded.count() == net.params.count();
    for (std::size_t i = 0; round_ok && i < loaded.count(); ++i) {
        round_ok = loaded.names[i] == net.params.names[i] && bitwise_equal(loaded.tensors[i], net.params.tensors[i]);
    }

    // flip one byte in the middle: the CRC must reject the file
    bool corrupt_ok = false;
    {
        std::ifstream in(path, std::ios::binary);
        std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 0x08);
        const std::string cpath = (dir / "corrupt.ckpt").string();
        std::ofstream out(cpath, std::ios::binary);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.close();
        try {
            load_checkpoint(cpath);
        } catch (const std::exception&) {
            corrupt_ok = true;
        }
    }

    // arbitrary-size inference via reflect pad + crop
    Tensor<float> odd = rng.uniform_tensor<float>({1, 3, 37, 41}, 0, 1);
    Tensor<float> restored = infer_image(net, odd);
    const bool pad_ok = restored.shape == Shape{1, 3, 37, 41};

    std::ostringstream d;
    d << "checkpoint round trip bitwise; corrupted byte rejected; 37x41 infer kept 37x41";
    report(7, "persistence", round_ok && corrupt_ok && pad_ok, d.str());
}

// --- criterion 8: informational stretch targets --------------------------------

void criterion_stretch_targets() {
    NetConfig reference;
    reference.base_channels = 32;
    reference.blocks = {3, 6, 8};
    reference.csattn.base_heads = 1;
    const CostReport rep = count_flops(reference, 256, 256);
    std::ostringstream d;
    d.precision(4);
    d << "ablation-scale config (C=32, blocks 3/6/8 at 256x256): params " << rep.params / 1e6 << " M, flops "
      << rep.flops / 1e9 << " G multiply-adds; the original method's reported 7.023 M / 46.110 G are reference "
         "targets only (its backbone differs internally)";
    report(8, "stretch targets (informational)", true, d.str());
}

}  // namespace

int main() {
    std::printf("csattn acceptance suite\n");
    const auto t0 = std::chrono::steady_clock::now();
    criterion_gradients();
    criterion_structure();
    criterion_cost_model();
    criterion_optimizer();
    criterion_desk_training();
    criterion_metrics();
    criterion_persistence();
    criterion_stretch_targets();
    std::printf("%s (%d failures, %.0f s total)\n", g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES PRESENT",
                g_failures, seconds_since(t0));
    return g_failures == 0 ? 0 : 1;
}
