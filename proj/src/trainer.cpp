#include "csattn/trainer.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "csattn/checkpoint.hpp"
#include "csattn/infer.hpp"
#include "csattn/loss.hpp"
#include "csattn/optim.hpp"

namespace csattn {

namespace {

std::string format_metric(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

constexpr std::uint64_t kSamplerSalt = 0x9E3779B97F4A7C15ull;

struct Batch {
    Tensor<float> degraded, clean;
};

Batch assemble_batch(const PairDataset& ds, Rng& sampler, const TrainConfig& cfg) {
    std::vector<Sample> items;
    items.reserve(static_cast<std::size_t>(cfg.batch));
    for (std::int64_t b = 0; b < cfg.batch; ++b) items.push_back(ds.sample_patch(sampler, cfg.patch));
    std::vector<const Tensor<float>*> deg, cln;
    for (const auto& s : items) {
        deg.push_back(&s.degraded);
        cln.push_back(&s.clean);
    }
    return Batch{stack_batch(deg), stack_batch(cln)};
}

}  // namespace

PairDataset build_dataset(const TrainConfig& cfg) {
    if (cfg.data.mode == "synth") {
        return PairDataset::synth(cfg.data.synth, cfg.data.synth_count, cfg.seed);
    }
    return PairDataset::from_dirs(cfg.data.degraded_dir, cfg.data.clean_dir, cfg.patch);
}

EvalSummary evaluate_on_dataset(const Net<float>& net, const PairDataset& ds, const LossWeights& weights) {
    EvalSummary sum;
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const Sample& s = ds.at(i);
        const std::int64_t h = s.degraded.shape[2], w = s.degraded.shape[3];
        Tensor<float> deg = pad_reflect_to_multiple(s.degraded, 16);
        Tensor<float> cln = pad_reflect_to_multiple(s.clean, 16);

        Tape<float> tape;
        std::vector<Var<float>> leaves = make_leaves(tape, net.params, false);
        Var<float> in = tape.leaf(deg, false);
        NetOutputs<float> out = forward_multiscale(in, net.idx, leaves, net.cfg);

        std::array<Var<float>, 3> preds = {out.full, out.half, out.quarter};
        std::array<Var<float>, 3> gts = {tape.leaf(cln, false), tape.leaf(downsample_area_tensor(cln, 2), false),
                                         tape.leaf(downsample_area_tensor(cln, 4), false)};
        MultiscaleLoss<float> loss = multiscale_loss(preds, gts, weights);
        sum.loss += static_cast<double>(tape.val(loss.total)[0]);

        Tensor<float> restored = crop_topleft(tape.val(out.full), h, w);
        sum.psnr += psnr(restored, s.clean);
        sum.ssim += ssim(restored, s.clean);
        sum.mae += mae(restored, s.clean);
    }
    const double n = static_cast<double>(ds.size());
    sum.loss /= n;
    sum.psnr /= n;
    sum.ssim /= n;
    sum.mae /= n;
    return sum;
}

TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.out_dir);

    PairDataset ds = build_dataset(cfg);
    Net<float> net = build_net<float>(cfg.net, cfg.seed);

    TrainResult result;
    result.init_checkpoint = (fs::path(cfg.out_dir) / "init.ckpt").string();
    result.final_checkpoint = (fs::path(cfg.out_dir) / "final.ckpt").string();
    result.csv_path = (fs::path(cfg.out_dir) / "metrics.csv").string();
    save_checkpoint(result.init_checkpoint, net.params);
    {
        std::ofstream cfg_out(fs::path(cfg.out_dir) / "config.json");
        cfg_out << train_config_to_json(cfg) << "\n";
    }

    AdamWConfig opt_cfg;
    opt_cfg.beta1 = cfg.beta1;
    opt_cfg.beta2 = cfg.beta2;
    opt_cfg.eps = cfg.eps;
    opt_cfg.weight_decay = cfg.weight_decay;
    AdamW<float> opt(net.params, opt_cfg);

    std::ofstream csv(result.csv_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("train: cannot open " + result.csv_path);
    csv << "step,lr,loss,l1,freq,psnr,ssim,mae\n";

    Rng sampler(cfg.seed ^ kSamplerSalt);
    result.step_losses.reserve(static_cast<std::size_t>(cfg.total_steps));

    for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
        Batch batch = assemble_batch(ds, sampler, cfg);
        Tensor<float>& deg = batch.degraded;
        Tensor<float>& cln = batch.clean;

        const double lr = cosine_lr(step, cfg.total_steps, cfg.lr_init, cfg.lr_final);
        float loss_val = 0, l1_val = 0, freq_val = 0;
        double m_psnr = 0, m_ssim = 0, m_mae = 0;
        try {
            Tape<float> tape;
            std::vector<Var<float>> leaves = make_leaves(tape, net.params, true);
            Var<float> in = tape.leaf(deg, false);
            NetOutputs<float> out = forward_multiscale(in, net.idx, leaves, net.cfg);
            std::array<Var<float>, 3> preds = {out.full, out.half, out.quarter};
            std::array<Var<float>, 3> gts = {tape.leaf(cln, false),
                                             tape.leaf(downsample_area_tensor(cln, 2), false),
                                             tape.leaf(downsample_area_tensor(cln, 4), false)};
            MultiscaleLoss<float> loss = multiscale_loss(preds, gts, cfg.loss);
            loss_val = tape.val(loss.total)[0];
            l1_val = tape.val(loss.l1_part)[0];
            freq_val = tape.val(loss.freq_part)[0];
            if (!std::isfinite(loss_val)) throw std::runtime_error("train: non-finite loss");

            tape.backward(loss.total);
            std::vector<Tensor<float>> grads;
            grads.reserve(leaves.size());
            for (const auto& v : leaves) grads.push_back(tape.grad(v));

            m_psnr = psnr(tape.val(out.full), cln);
            m_ssim = ssim(tape.val(out.full), cln);
            m_mae = mae(tape.val(out.full), cln);

            opt.step(net.params, grads, lr);
        } catch (const std::exception&) {
            // Dump the last consistent state before surfacing the failure.
            save_checkpoint((fs::path(cfg.out_dir) / "abort.ckpt").string(), net.params);
            throw;
        }

        result.step_losses.push_back(loss_val);
        csv << step << "," << format_metric(lr) << "," << format_metric(loss_val) << "," << format_metric(l1_val)
            << "," << format_metric(freq_val) << "," << format_metric(m_psnr) << "," << format_metric(m_ssim)
            << "," << format_metric(m_mae) << "\n";

        if (cfg.log_every > 0 && (step % cfg.log_every == 0 || step == cfg.total_steps - 1)) {
            std::fprintf(stderr, "step %6lld  lr %.3e  loss %.6f\n", static_cast<long long>(step), lr,
                         static_cast<double>(loss_val));
        }
        if ((step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.total_steps) {
            save_checkpoint((fs::path(cfg.out_dir) / ("ckpt_" + std::to_string(step + 1) + ".ckpt")).string(),
                            net.params);
        }
    }

    save_checkpoint(result.final_checkpoint, net.params);
    result.final_eval = evaluate_on_dataset(net, ds, cfg.loss);
    csv << "# final_eval loss=" << format_metric(result.final_eval.loss)
        << " psnr=" << format_metric(result.final_eval.psnr) << " ssim=" << format_metric(result.final_eval.ssim)
        << " mae=" << format_metric(result.final_eval.mae) << "\n";
    return result;
}

float first_batch_loss(const TrainConfig& cfg, const ParamStore<float>& params) {
    cfg.validate();
    PairDataset ds = build_dataset(cfg);
    Rng sampler(cfg.seed ^ kSamplerSalt);
    Batch batch = assemble_batch(ds, sampler, cfg);

    Net<float> net = build_net<float>(cfg.net, cfg.seed);
    if (params.count() != net.params.count()) throw std::runtime_error("first_batch_loss: parameter count mismatch");
    net.params = params;

    Tape<float> tape;
    std::vector<Var<float>> leaves = make_leaves(tape, net.params, false);
    Var<float> in = tape.leaf(batch.degraded, false);
    NetOutputs<float> out = forward_multiscale(in, net.idx, leaves, net.cfg);
    std::array<Var<float>, 3> preds = {out.full, out.half, out.quarter};
    std::array<Var<float>, 3> gts = {tape.leaf(batch.clean, false),
                                     tape.leaf(downsample_area_tensor(batch.clean, 2), false),
                                     tape.leaf(downsample_area_tensor(batch.clean, 4), false)};
    return tape.val(multiscale_loss(preds, gts, cfg.loss).total)[0];
}

}  // namespace csattn
