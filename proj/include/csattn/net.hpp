#pragma once

#include "csattn/block.hpp"

namespace csattn {

// ---------------------------------------------------------------------------
// Three-level multi-input/multi-output encoder-decoder. Levels run at scales
// 1, 1/2, 1/4 with channels C, 2C, 4C; levels 2 and 3 also ingest downsampled
// input images; each decoder level emits a 3-channel residual added to the
// same-scale input.
// ---------------------------------------------------------------------------

struct NetConfig {
    std::int64_t base_channels = 32;
    std::array<std::int64_t, 3> blocks = {6, 6, 12};
    CSAttnConfig csattn;  // per-level template; channels are set per level

    void validate() const {
        if (base_channels <= 0) throw std::runtime_error("net config: base_channels must be positive");
        for (auto b : blocks) {
            if (b < 1) throw std::runtime_error("net config: blocks_per_level must all be >= 1");
        }
        CSAttnConfig c = csattn;
        for (int level = 1; level <= 3; ++level) {
            c.channels = level_channels(level);
            c.validate();
        }
    }

    std::int64_t level_channels(int level) const { return base_channels << (level - 1); }

    CSAttnConfig level_csattn(int level) const {
        CSAttnConfig c = csattn;
        c.channels = level_channels(level);
        return c;
    }
};

struct NetIdx {
    ConvIdx stem;              // 3 -> C
    ConvIdx embed2, embed3;    // 3 -> 2C, 3 -> 4C at the reduced scales
    std::vector<BlockIdx> enc1, enc2, enc3, dec2, dec1;
    ConvIdx down1, down2;      // stride-2 3x3, doubling channels
    ConvIdx fuse2, fuse3;      // 1x1 after image-embed concat
    ConvIdx up2, up1;          // 1x1 expansion feeding pixel_shuffle(2)
    ConvIdx skip2, skip1;      // 1x1 after skip concat
    ConvIdx head1, head2, head4;  // per-scale 3-channel residual heads
};

template <typename T>
struct Net {
    NetConfig cfg;
    ParamStore<T> params;
    NetIdx idx;
};

// Deterministic build: same seed, bitwise-identical parameters. Creation
// order follows the forward pass and is the checkpoint order.
template <typename T>
Net<T> build_net(const NetConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Net<T> net;
    net.cfg = cfg;
    Rng rng(seed);
    ParamStore<T>& ps = net.params;
    NetIdx& idx = net.idx;

    const std::int64_t c1 = cfg.level_channels(1);
    const std::int64_t c2 = cfg.level_channels(2);
    const std::int64_t c3 = cfg.level_channels(3);
    const bool bias = cfg.csattn.conv_bias;

    idx.stem = detail::add_conv(ps, "stem", c1, 3, 3, 3 * 9, bias, rng);
    idx.embed2 = detail::add_conv(ps, "embed2", c2, 3, 3, 3 * 9, bias, rng);
    idx.embed3 = detail::add_conv(ps, "embed3", c3, 3, 3, 3 * 9, bias, rng);

    auto add_blocks = [&](std::vector<BlockIdx>& dst, const char* name, int level, std::int64_t count) {
        const CSAttnConfig bc = cfg.level_csattn(level);
        for (std::int64_t i = 0; i < count; ++i) {
            dst.push_back(build_block_params(ps, std::string(name) + std::to_string(i), bc, rng));
        }
    };

    add_blocks(idx.enc1, "enc1.", 1, cfg.blocks[0]);
    idx.down1 = detail::add_conv(ps, "down1", c2, c1, 3, c1 * 9, bias, rng);
    idx.fuse2 = detail::add_conv(ps, "fuse2", c2, 2 * c2, 1, 2 * c2, bias, rng);
    add_blocks(idx.enc2, "enc2.", 2, cfg.blocks[1]);
    idx.down2 = detail::add_conv(ps, "down2", c3, c2, 3, c2 * 9, bias, rng);
    idx.fuse3 = detail::add_conv(ps, "fuse3", c3, 2 * c3, 1, 2 * c3, bias, rng);
    add_blocks(idx.enc3, "enc3.", 3, cfg.blocks[2]);
    idx.head4 = detail::add_conv(ps, "head4", 3, c3, 3, c3 * 9, bias, rng);
    idx.up2 = detail::add_conv(ps, "up2", 4 * c2, c3, 1, c3, bias, rng);
    idx.skip2 = detail::add_conv(ps, "skip2", c2, 2 * c2, 1, 2 * c2, bias, rng);
    add_blocks(idx.dec2, "dec2.", 2, cfg.blocks[1]);
    idx.head2 = detail::add_conv(ps, "head2", 3, c2, 3, c2 * 9, bias, rng);
    idx.up1 = detail::add_conv(ps, "up1", 4 * c1, c2, 1, c2, bias, rng);
    idx.skip1 = detail::add_conv(ps, "skip1", c1, 2 * c1, 1, 2 * c1, bias, rng);
    add_blocks(idx.dec1, "dec1.", 1, cfg.blocks[0]);
    idx.head1 = detail::add_conv(ps, "head1", 3, c1, 3, c1 * 9, bias, rng);

    // Residual heads start at zero so every scale opens as the identity
    // restoration of its input.
    for (const ConvIdx* head : {&idx.head1, &idx.head2, &idx.head4}) {
        auto zero = [&](std::int64_t i) {
            if (i < 0) return;
            auto& t = ps.tensors[static_cast<std::size_t>(i)];
            std::fill(t.data.begin(), t.data.end(), T(0));
        };
        zero(head->w);
        zero(head->b);
    }
    return net;
}

template <typename T>
struct NetOutputs {
    Var<T> full, half, quarter;
};

// Restored estimates at scales 1, 1/2 and 1/4; each is the corresponding
// downsampled input plus a learned residual. H and W must be divisible by 16.
template <typename T>
NetOutputs<T> forward_multiscale(Var<T> img, const NetIdx& idx, const std::vector<Var<T>>& P,
                                 const NetConfig& cfg) {
    Tape<T>& tape = *img.tape;
    const Tensor<T>& iv = tape.val(img);
    if (iv.rank() != 4 || iv.shape[1] != 3) throw std::runtime_error("forward_multiscale: input must be (N,3,H,W)");
    if (iv.shape[2] % 16 != 0 || iv.shape[3] % 16 != 0) {
        throw std::runtime_error("forward_multiscale: H and W must be divisible by 16, got " + shape_str(iv.shape));
    }

    const CSAttnConfig bc1 = cfg.level_csattn(1);
    const CSAttnConfig bc2 = cfg.level_csattn(2);
    const CSAttnConfig bc3 = cfg.level_csattn(3);

    Var<T> x2 = downsample_area(img, 2);
    Var<T> x4 = downsample_area(img, 4);

    auto run_blocks = [&](Var<T> t, const std::vector<BlockIdx>& blocks, const CSAttnConfig& bc) {
        for (const auto& b : blocks) t = block_forward(t, b, P, bc);
        return t;
    };

    Var<T> f = conv3x3(img, detail::pvar(P, idx.stem.w), detail::pvar(P, idx.stem.b));
    Var<T> e1 = run_blocks(f, idx.enc1, bc1);

    Var<T> t = conv3x3(e1, detail::pvar(P, idx.down1.w), detail::pvar(P, idx.down1.b), 2);
    Var<T> em2 = conv3x3(x2, detail::pvar(P, idx.embed2.w), detail::pvar(P, idx.embed2.b));
    t = pointwise_conv(concat_channel<T>({t, em2}), detail::pvar(P, idx.fuse2.w), detail::pvar(P, idx.fuse2.b));
    Var<T> e2 = run_blocks(t, idx.enc2, bc2);

    t = conv3x3(e2, detail::pvar(P, idx.down2.w), detail::pvar(P, idx.down2.b), 2);
    Var<T> em3 = conv3x3(x4, detail::pvar(P, idx.embed3.w), detail::pvar(P, idx.embed3.b));
    t = pointwise_conv(concat_channel<T>({t, em3}), detail::pvar(P, idx.fuse3.w), detail::pvar(P, idx.fuse3.b));
    Var<T> e3 = run_blocks(t, idx.enc3, bc3);

    NetOutputs<T> out;
    out.quarter = add(x4, conv3x3(e3, detail::pvar(P, idx.head4.w), detail::pvar(P, idx.head4.b)));

    Var<T> u = pixel_shuffle(pointwise_conv(e3, detail::pvar(P, idx.up2.w), detail::pvar(P, idx.up2.b)), 2);
    u = pointwise_conv(concat_channel<T>({u, e2}), detail::pvar(P, idx.skip2.w), detail::pvar(P, idx.skip2.b));
    Var<T> d2 = run_blocks(u, idx.dec2, bc2);
    out.half = add(x2, conv3x3(d2, detail::pvar(P, idx.head2.w), detail::pvar(P, idx.head2.b)));

    u = pixel_shuffle(pointwise_conv(d2, detail::pvar(P, idx.up1.w), detail::pvar(P, idx.up1.b)), 2);
    u = pointwise_conv(concat_channel<T>({u, e1}), detail::pvar(P, idx.skip1.w), detail::pvar(P, idx.skip1.b));
    Var<T> d1 = run_blocks(u, idx.dec1, bc1);
    out.full = add(img, conv3x3(d1, detail::pvar(P, idx.head1.w), detail::pvar(P, idx.head1.b)));
    return out;
}

// ---------------------------------------------------------------------------
// Cost accounting. params is the exact tensor-element sum; flops are analytic
// multiply-adds at the stated input size (formula sheet: docs/cost_model.md).
// ---------------------------------------------------------------------------

struct CostReport {
    std::int64_t params = 0;
    std::int64_t flops = 0;
    std::int64_t attn_score_flops = 0;
    std::int64_t attn_apply_flops = 0;
    std::int64_t softmax_evals = 0;
    std::int64_t peak_activation_bytes = 0;
};

template <typename T>
std::int64_t count_params(const ParamStore<T>& ps) {
    return ps.total_elements();
}

inline CostReport count_flops(const NetConfig& cfg, std::int64_t h, std::int64_t w,
                              std::int64_t scalar_bytes = 4) {
    cfg.validate();
    if (h % 16 != 0 || w % 16 != 0) {
        throw std::runtime_error("count_flops: H and W must be divisible by 16");
    }
    const std::int64_t c1 = cfg.level_channels(1);
    const std::int64_t c2 = cfg.level_channels(2);
    const std::int64_t c3 = cfg.level_channels(3);
    const std::int64_t hw1 = h * w, hw2 = hw1 / 4, hw4 = hw1 / 16;
    const bool bias = cfg.csattn.conv_bias;

    BlockCost total;
    std::int64_t act = 0;

    auto plumb_conv = [&](std::int64_t co, std::int64_t ci, std::int64_t k, std::int64_t hw_out) {
        total.params += conv_param_count(co, ci, k, bias);
        total.conv_flops += co * ci * k * k * hw_out;
        act += co * hw_out;
    };

    act += 3 * hw2 + 3 * hw4;  // input pyramid

    plumb_conv(c1, 3, 3, hw1);  // stem
    for (std::int64_t i = 0; i < cfg.blocks[0]; ++i) {
        BlockCost b = block_cost(cfg.level_csattn(1), h, w);
        total += b;
    }
    plumb_conv(c2, c1, 3, hw2);      // down1
    plumb_conv(c2, 3, 3, hw2);       // embed2
    plumb_conv(c2, 2 * c2, 1, hw2);  // fuse2
    for (std::int64_t i = 0; i < cfg.blocks[1]; ++i) total += block_cost(cfg.level_csattn(2), h / 2, w / 2);
    plumb_conv(c3, c2, 3, hw4);      // down2
    plumb_conv(c3, 3, 3, hw4);       // embed3
    plumb_conv(c3, 2 * c3, 1, hw4);  // fuse3
    for (std::int64_t i = 0; i < cfg.blocks[2]; ++i) total += block_cost(cfg.level_csattn(3), h / 4, w / 4);
    plumb_conv(3, c3, 3, hw4);       // head4
    act += 3 * hw4;                  // quarter-scale residual add
    plumb_conv(4 * c2, c3, 1, hw4);  // up2 (pixel_shuffle is movement only)
    act += 4 * c2 * hw4;
    plumb_conv(c2, 2 * c2, 1, hw2);  // skip2
    for (std::int64_t i = 0; i < cfg.blocks[1]; ++i) total += block_cost(cfg.level_csattn(2), h / 2, w / 2);
    plumb_conv(3, c2, 3, hw2);       // head2
    act += 3 * hw2;
    plumb_conv(4 * c1, c2, 1, hw2);  // up1
    act += 4 * c1 * hw2;
    plumb_conv(c1, 2 * c1, 1, hw1);  // skip1
    for (std::int64_t i = 0; i < cfg.blocks[0]; ++i) total += block_cost(cfg.level_csattn(1), h, w);
    plumb_conv(3, c1, 3, hw1);       // head1
    act += 3 * hw1;

    CostReport rep;
    rep.params = total.params;
    rep.flops = total.flops();
    rep.attn_score_flops = total.attn_score_flops;
    rep.attn_apply_flops = total.attn_apply_flops;
    rep.softmax_evals = total.softmax_evals;
    rep.peak_activation_bytes = (total.activation_elements + act) * scalar_bytes;
    return rep;
}

}  // namespace csattn
