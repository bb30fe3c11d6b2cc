#pragma once

#include <array>

#include "csattn/nn.hpp"
#include "csattn/params.hpp"

namespace csattn {

// ---------------------------------------------------------------------------
// Block configuration. One boolean per ablation component plus the continuous
// attention count; parameter shapes are fully determined by this struct.
// ---------------------------------------------------------------------------

struct CSAttnConfig {
    std::int64_t channels = 32;
    std::int64_t base_heads = 1;  // N; stages use N, 2N, 2N when progressive
    Activation activation = Activation::gelu;
    double alpha_init = 1.0;
    bool alpha_divides = false;  // score / alpha instead of score * alpha

    bool use_nonlinear_activation = true;
    bool use_value_nta = true;
    bool use_aggregation = true;
    bool progressive_heads = true;
    bool intra_residual = true;
    bool use_spatial_scaling = true;
    int attention_count = 3;
    bool baseline_stacked = false;

    bool conv_bias = true;
    double ln_eps = 1e-6;
    double l2_eps = 1e-12;

    void validate() const {
        if (channels <= 0) throw std::runtime_error("csattn config: channels must be positive");
        if (base_heads <= 0) throw std::runtime_error("csattn config: base_heads must be positive");
        if (channels % base_heads != 0 || channels % (2 * base_heads) != 0) {
            throw std::runtime_error("csattn config: channels must be divisible by N and 2N");
        }
        if (attention_count < 1 || attention_count > 3) {
            throw std::runtime_error("csattn config: attention_count must be 1, 2 or 3");
        }
        if (!(alpha_init != 0.0) && alpha_divides) {
            throw std::runtime_error("csattn config: alpha_init must be nonzero when alpha divides");
        }
    }

    std::int64_t heads_at(int stage) const {
        if (stage <= 1) return base_heads;
        return progressive_heads ? 2 * base_heads : base_heads;
    }

    // Q, K plus one value stream per attention stage.
    std::int64_t proj_streams() const { return 2 + attention_count; }

    static std::int64_t scale_factor(int stage) { return stage == 2 ? 2 : 4; }
};

// ---------------------------------------------------------------------------
// Parameter layout. Indices point into a ParamStore; -1 means absent.
// ---------------------------------------------------------------------------

struct ConvIdx {
    std::int64_t w = -1, b = -1;
};
struct NormIdx {
    std::int64_t gain = -1, offset = -1;
};
struct ScalePathIdx {
    ConvIdx pre, dw, post;
};

struct BlockIdx {
    bool stacked = false;

    NormIdx ln;
    ConvIdx qkv_pw, qkv_dw;
    std::int64_t alpha1 = -1, alpha2 = -1, alpha3 = -1;
    ConvIdx nta2, nta3;
    ScalePathIdx scale2, scale3;
    ConvIdx agg;

    struct Unit {
        NormIdx ln;
        ConvIdx pw, dw;
        std::int64_t alpha = -1;
    };
    std::array<Unit, 3> units{};
};

namespace detail {

template <typename T>
ConvIdx add_conv(ParamStore<T>& ps, const std::string& name, std::int64_t co, std::int64_t ci, std::int64_t k,
                 std::int64_t fan_in, bool bias, Rng& rng) {
    ConvIdx idx;
    idx.w = ps.add(name + ".weight", fan_in_uniform<T>(rng, Shape{co, ci, k, k}, fan_in));
    if (bias) idx.b = ps.add(name + ".bias", fan_in_uniform<T>(rng, Shape{co}, fan_in));
    return idx;
}

template <typename T>
NormIdx add_norm(ParamStore<T>& ps, const std::string& name, std::int64_t c) {
    NormIdx idx;
    idx.gain = ps.add(name + ".gain", Tensor<T>::ones(Shape{c}));
    idx.offset = ps.add(name + ".offset", Tensor<T>::zeros(Shape{c}));
    return idx;
}

template <typename T>
ScalePathIdx add_scale_path(ParamStore<T>& ps, const std::string& name, const CSAttnConfig& cfg, int stage,
                            Rng& rng) {
    const std::int64_t c = cfg.channels;
    const std::int64_t r = CSAttnConfig::scale_factor(stage);
    const std::int64_t mid = cfg.use_spatial_scaling ? r * r * c : c;
    ScalePathIdx idx;
    idx.pre = add_conv(ps, name + ".pre", c, c, 1, c, cfg.conv_bias, rng);
    idx.dw = add_conv(ps, name + ".dw", mid, 1, 3, 9, cfg.conv_bias, rng);
    idx.post = add_conv(ps, name + ".post", 2 * c, mid, 1, mid, cfg.conv_bias, rng);
    return idx;
}

}  // namespace detail

// Parameters in fixed creation order (the checkpoint order). Shapes depend
// only on the config, never on input resolution.
template <typename T>
BlockIdx build_block_params(ParamStore<T>& ps, const std::string& prefix, const CSAttnConfig& cfg, Rng& rng) {
    cfg.validate();
    const std::int64_t c = cfg.channels;
    BlockIdx idx;
    idx.stacked = cfg.baseline_stacked;

    if (cfg.baseline_stacked) {
        for (int u = 0; u < 3; ++u) {
            const std::string base = prefix + ".unit" + std::to_string(u);
            idx.units[static_cast<std::size_t>(u)].ln = detail::add_norm(ps, base + ".ln", c);
            idx.units[static_cast<std::size_t>(u)].pw =
                detail::add_conv(ps, base + ".qkv_pw", 3 * c, c, 1, c, cfg.conv_bias, rng);
            idx.units[static_cast<std::size_t>(u)].dw =
                detail::add_conv(ps, base + ".qkv_dw", 3 * c, 1, 3, 9, cfg.conv_bias, rng);
            idx.units[static_cast<std::size_t>(u)].alpha =
                ps.add(base + ".alpha", Tensor<T>::full(Shape{cfg.base_heads}, static_cast<T>(cfg.alpha_init)));
        }
        return idx;
    }

    const std::int64_t streams = cfg.proj_streams();
    idx.ln = detail::add_norm(ps, prefix + ".ln", c);
    idx.qkv_pw = detail::add_conv(ps, prefix + ".qkv_pw", streams * c, c, 1, c, cfg.conv_bias, rng);
    idx.qkv_dw = detail::add_conv(ps, prefix + ".qkv_dw", streams * c, 1, 3, 9, cfg.conv_bias, rng);
    idx.alpha1 = ps.add(prefix + ".alpha1", Tensor<T>::full(Shape{cfg.heads_at(1)}, static_cast<T>(cfg.alpha_init)));

    if (cfg.attention_count >= 2) {
        if (cfg.use_value_nta) idx.nta2 = detail::add_conv(ps, prefix + ".nta2", c, c, 1, c, cfg.conv_bias, rng);
        idx.scale2 = detail::add_scale_path(ps, prefix + ".scale2", cfg, 2, rng);
        idx.alpha2 =
            ps.add(prefix + ".alpha2", Tensor<T>::full(Shape{cfg.heads_at(2)}, static_cast<T>(cfg.alpha_init)));
    }
    if (cfg.attention_count >= 3) {
        if (cfg.use_value_nta) idx.nta3 = detail::add_conv(ps, prefix + ".nta3", c, c, 1, c, cfg.conv_bias, rng);
        idx.scale3 = detail::add_scale_path(ps, prefix + ".scale3", cfg, 3, rng);
        idx.alpha3 =
            ps.add(prefix + ".alpha3", Tensor<T>::full(Shape{cfg.heads_at(3)}, static_cast<T>(cfg.alpha_init)));
    }
    if (cfg.use_aggregation) {
        idx.agg = detail::add_conv(ps, prefix + ".agg", c, cfg.attention_count * c, 1, cfg.attention_count * c,
                                   cfg.conv_bias, rng);
    }
    return idx;
}

namespace detail {

template <typename T>
inline Var<T> pvar(const std::vector<Var<T>>& P, std::int64_t i) {
    return i >= 0 ? P[static_cast<std::size_t>(i)] : Var<T>{};
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-head temperature on the (B, d, d) score stack, B = n*heads; batch item b
// uses alpha[b % heads].
// ---------------------------------------------------------------------------

template <typename T>
Var<T> head_scale(Var<T> scores, Var<T> alpha, std::int64_t heads, bool divide) {
    Tape<T>& tape = detail::same_tape(scores, alpha);
    const Tensor<T>& sv = tape.val(scores);
    const Tensor<T>& av = tape.val(alpha);
    if (sv.rank() != 3) throw std::runtime_error("head_scale: scores must be (B,d,d)");
    if (av.size() != heads || sv.shape[0] % heads != 0) {
        throw std::runtime_error("head_scale: alpha length does not match head count");
    }
    const std::int64_t batch = sv.shape[0];
    const std::int64_t mat = sv.shape[1] * sv.shape[2];

    Tensor<T> out(sv.shape);
    for (std::int64_t b = 0; b < batch; ++b) {
        const T a = av[b % heads];
        const T f = divide ? T(1) / a : a;
        const T* sp = sv.data.data() + b * mat;
        T* op = out.data.data() + b * mat;
        for (std::int64_t i = 0; i < mat; ++i) op[i] = sp[i] * f;
    }

    const bool rs = tape.requires_grad(scores), ra = tape.requires_grad(alpha);
    std::function<void(Tape<T>&)> bwd;
    if (rs || ra) {
        const std::int32_t oid = tape.next_id(), sid = scores.id, aid = alpha.id;
        bwd = [oid, sid, aid, rs, ra, heads, batch, mat, divide](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const Tensor<T>& aval = t.value_of(aid);
            if (rs) {
                Tensor<T>& gs = t.grad_slot(sid);
                for (std::int64_t b = 0; b < batch; ++b) {
                    const T a = aval[b % heads];
                    const T f = divide ? T(1) / a : a;
                    const T* gp = g.data.data() + b * mat;
                    T* gsp = gs.data.data() + b * mat;
                    for (std::int64_t i = 0; i < mat; ++i) gsp[i] += gp[i] * f;
                }
            }
            if (ra) {
                const Tensor<T>& sval = t.value_of(sid);
                Tensor<T>& gal = t.grad_slot(aid);
                for (std::int64_t b = 0; b < batch; ++b) {
                    const std::int64_t hh = b % heads;
                    const T a = aval[hh];
                    const T* gp = g.data.data() + b * mat;
                    const T* sp = sval.data.data() + b * mat;
                    T acc = T(0);
                    for (std::int64_t i = 0; i < mat; ++i) acc += gp[i] * sp[i];
                    gal[hh] += divide ? -acc / (a * a) : acc;
                }
            }
        };
    }
    return tape.emit(std::move(out), rs || ra, std::move(bwd), "head_scale");
}

// ---------------------------------------------------------------------------
// Channel (transposed) attention. Q and K share a token count; V may carry a
// different one -- the d x d score matrix is resolution independent, which is
// what makes the scaled Q/K legal. Q and K are L2-normalized along tokens,
// the score matrix is tempered per head and softmaxed over its last axis.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> channel_attention(Var<T> q, Var<T> k, Var<T> v, Var<T> alpha, std::int64_t heads, bool alpha_divides = false,
                         T l2_eps = T(1e-12)) {
    Tape<T>& tape = *q.tape;
    const Tensor<T>& qv = tape.val(q);
    const Tensor<T>& kv = tape.val(k);
    const Tensor<T>& vv = tape.val(v);
    if (qv.rank() != 4 || kv.rank() != 4 || vv.rank() != 4) {
        throw std::runtime_error("channel_attention: inputs must be NCHW");
    }
    if (!qv.same_shape(kv)) throw std::runtime_error("channel_attention: Q and K shapes differ");
    const std::int64_t n = qv.shape[0], c = qv.shape[1];
    if (vv.shape[0] != n || vv.shape[1] != c) {
        throw std::runtime_error("channel_attention: V batch/channel mismatch");
    }
    if (heads <= 0 || c % heads != 0) {
        throw std::runtime_error("channel_attention: head-dimension mismatch, C=" + std::to_string(c) +
                                 " heads=" + std::to_string(heads));
    }
    const std::int64_t d = c / heads;
    const std::int64_t tq = qv.shape[2] * qv.shape[3];
    const std::int64_t tv = vv.shape[2] * vv.shape[3];

    Var<T> qh = reshape(q, Shape{n * heads, d, tq});
    Var<T> kh = reshape(k, Shape{n * heads, d, tq});
    Var<T> vh = reshape(v, Shape{n * heads, d, tv});
    Var<T> qn = l2_normalize_lastdim(qh, l2_eps);
    Var<T> kn = l2_normalize_lastdim(kh, l2_eps);
    Var<T> scores = matmul(qn, permute(kn, {0, 2, 1}));
    scores = head_scale(scores, alpha, heads, alpha_divides);
    Var<T> attn = softmax_lastdim(scores);
    Var<T> out = matmul(attn, vh);
    return reshape(out, Shape{n, c, vv.shape[2], vv.shape[3]});
}

// ---------------------------------------------------------------------------
// Block forward pieces.
// ---------------------------------------------------------------------------

// Shared projection: point-wise to (2 + attention_count) * C channels,
// depth-wise 3x3, then channel split in declared order Q, K, V, V2, V3.
template <typename T>
std::vector<Var<T>> qkv_split(Var<T> x_norm, const BlockIdx& idx, const std::vector<Var<T>>& P,
                              const CSAttnConfig& cfg) {
    const std::int64_t c = cfg.channels;
    Var<T> t = pointwise_conv(x_norm, detail::pvar(P, idx.qkv_pw.w), detail::pvar(P, idx.qkv_pw.b));
    t = depthwise_conv3x3(t, detail::pvar(P, idx.qkv_dw.w), detail::pvar(P, idx.qkv_dw.b));
    return split_channel(t, std::vector<std::int64_t>(static_cast<std::size_t>(cfg.proj_streams()), c));
}

// Value nonlinear transformation adjustment: 1x1 conv + activation. Disabled
// toggles return V untouched / skip the activation.
template <typename T>
Var<T> value_adjust(Var<T> v, const ConvIdx& nta, const std::vector<Var<T>>& P, const CSAttnConfig& cfg) {
    if (!cfg.use_value_nta) return v;
    Var<T> t = pointwise_conv(v, detail::pvar(P, nta.w), detail::pvar(P, nta.b));
    if (cfg.use_nonlinear_activation) t = activation(cfg.activation, t);
    return t;
}

// Scaling path: 1x1 conv, shuffle-down, depth-wise 3x3, activation, 1x1 conv
// to 2C, split into (Q_i, K_i). With spatial scaling off the same sequence
// runs at full resolution.
template <typename T>
std::vector<Var<T>> spatial_scaling(Var<T> x, int stage, const ScalePathIdx& sp, const std::vector<Var<T>>& P,
                                    const CSAttnConfig& cfg) {
    const std::int64_t c = cfg.channels;
    const std::int64_t r = CSAttnConfig::scale_factor(stage);
    Var<T> t = pointwise_conv(x, detail::pvar(P, sp.pre.w), detail::pvar(P, sp.pre.b));
    if (cfg.use_spatial_scaling) t = pixel_unshuffle(t, r);
    t = depthwise_conv3x3(t, detail::pvar(P, sp.dw.w), detail::pvar(P, sp.dw.b));
    if (cfg.use_nonlinear_activation) t = activation(cfg.activation, t);
    t = pointwise_conv(t, detail::pvar(P, sp.post.w), detail::pvar(P, sp.post.b));
    return split_channel(t, {c, c});
}

// Full block: three chained channel attentions over one shared projection,
// aggregated by concat + 1x1 conv, residual back to the normalized input.
template <typename T>
Var<T> csattn_forward(Var<T> x, const BlockIdx& idx, const std::vector<Var<T>>& P, const CSAttnConfig& cfg) {
    if (idx.stacked) throw std::runtime_error("csattn_forward: params were built for the stacked baseline");
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 4 || xv.shape[1] != cfg.channels) {
        throw std::runtime_error("csattn_forward: input channels do not match config");
    }
    if (cfg.attention_count >= 2 && cfg.use_spatial_scaling &&
        (xv.shape[2] % 4 != 0 || xv.shape[3] % 4 != 0)) {
        throw std::runtime_error("csattn_forward: spatial scaling requires H,W divisible by 4, got " +
                                 shape_str(xv.shape));
    }

    Var<T> xn = layer_norm_channel(x, detail::pvar(P, idx.ln.gain), detail::pvar(P, idx.ln.offset),
                                   static_cast<T>(cfg.ln_eps));
    std::vector<Var<T>> streams = qkv_split(xn, idx, P, cfg);

    std::vector<Var<T>> stage_out;
    stage_out.push_back(channel_attention(streams[0], streams[1], streams[2], detail::pvar(P, idx.alpha1),
                                          cfg.heads_at(1), cfg.alpha_divides, static_cast<T>(cfg.l2_eps)));

    if (cfg.attention_count >= 2) {
        Var<T> in2 = cfg.intra_residual ? add(stage_out[0], xn) : stage_out[0];
        auto qk2 = spatial_scaling(in2, 2, idx.scale2, P, cfg);
        Var<T> v2 = value_adjust(streams[3], idx.nta2, P, cfg);
        stage_out.push_back(channel_attention(qk2[0], qk2[1], v2, detail::pvar(P, idx.alpha2), cfg.heads_at(2),
                                              cfg.alpha_divides, static_cast<T>(cfg.l2_eps)));
    }
    if (cfg.attention_count >= 3) {
        Var<T> in3 = cfg.intra_residual ? add(stage_out[1], xn) : stage_out[1];
        auto qk3 = spatial_scaling(in3, 3, idx.scale3, P, cfg);
        Var<T> v3 = value_adjust(streams[4], idx.nta3, P, cfg);
        stage_out.push_back(channel_attention(qk3[0], qk3[1], v3, detail::pvar(P, idx.alpha3), cfg.heads_at(3),
                                              cfg.alpha_divides, static_cast<T>(cfg.l2_eps)));
    }

    Var<T> y;
    if (cfg.use_aggregation) {
        y = pointwise_conv(concat_channel(stage_out), detail::pvar(P, idx.agg.w), detail::pvar(P, idx.agg.b));
    } else {
        y = stage_out.back();
    }
    return add(y, xn);
}

// Baseline arm: three independent layer-norm -> single attention -> residual
// units in sequence. No NTA, scaling, aggregation or progressive heads.
template <typename T>
Var<T> stacked_attention_baseline(Var<T> x, const BlockIdx& idx, const std::vector<Var<T>>& P,
                                  const CSAttnConfig& cfg) {
    if (!idx.stacked) throw std::runtime_error("stacked_attention_baseline: params were built for csattn");
    const std::int64_t c = cfg.channels;
    Var<T> cur = x;
    for (const auto& u : idx.units) {
        Var<T> xn = layer_norm_channel(cur, detail::pvar(P, u.ln.gain), detail::pvar(P, u.ln.offset),
                                       static_cast<T>(cfg.ln_eps));
        Var<T> t = pointwise_conv(xn, detail::pvar(P, u.pw.w), detail::pvar(P, u.pw.b));
        t = depthwise_conv3x3(t, detail::pvar(P, u.dw.w), detail::pvar(P, u.dw.b));
        auto parts = split_channel(t, {c, c, c});
        Var<T> attn = channel_attention(parts[0], parts[1], parts[2], detail::pvar(P, u.alpha), cfg.base_heads,
                                        cfg.alpha_divides, static_cast<T>(cfg.l2_eps));
        cur = add(attn, xn);
    }
    return cur;
}

// Dispatches on the configured block form.
template <typename T>
Var<T> block_forward(Var<T> x, const BlockIdx& idx, const std::vector<Var<T>>& P, const CSAttnConfig& cfg) {
    return idx.stacked ? stacked_attention_baseline(x, idx, P, cfg) : csattn_forward(x, idx, P, cfg);
}

// ---------------------------------------------------------------------------
// Analytic cost model for one block at a given resolution. flops counts
// multiply-adds only; softmax lookups are reported separately because they
// are exponentials, not MACs. activation_elements approximates the stored
// forward activations (see docs/cost_model.md).
// ---------------------------------------------------------------------------

struct BlockCost {
    std::int64_t params = 0;
    std::int64_t conv_flops = 0;
    std::int64_t attn_score_flops = 0;
    std::int64_t attn_apply_flops = 0;
    std::int64_t softmax_evals = 0;
    std::int64_t activation_elements = 0;

    std::int64_t flops() const { return conv_flops + attn_score_flops + attn_apply_flops; }

    BlockCost& operator+=(const BlockCost& o) {
        params += o.params;
        conv_flops += o.conv_flops;
        attn_score_flops += o.attn_score_flops;
        attn_apply_flops += o.attn_apply_flops;
        softmax_evals += o.softmax_evals;
        activation_elements += o.activation_elements;
        return *this;
    }
};

inline std::int64_t conv_param_count(std::int64_t co, std::int64_t ci_per_group, std::int64_t k, bool bias) {
    return co * ci_per_group * k * k + (bias ? co : 0);
}

// Score-product multiply-adds for one attention stage: heads * d^2 * T_qk.
inline std::int64_t attention_score_flops(const CSAttnConfig& cfg, int stage, std::int64_t h, std::int64_t w,
                                          bool scaled) {
    const std::int64_t heads = cfg.heads_at(stage);
    const std::int64_t d = cfg.channels / heads;
    std::int64_t tq = h * w;
    if (stage > 1 && scaled) {
        const std::int64_t r = CSAttnConfig::scale_factor(stage);
        tq /= r * r;
    }
    return heads * d * d * tq;
}

inline BlockCost block_cost(const CSAttnConfig& cfg, std::int64_t h, std::int64_t w) {
    cfg.validate();
    const std::int64_t c = cfg.channels;
    const std::int64_t hw = h * w;
    BlockCost cost;

    if (cfg.baseline_stacked) {
        for (int u = 0; u < 3; ++u) {
            cost.params += 2 * c;  // layer norm
            cost.params += conv_param_count(3 * c, c, 1, cfg.conv_bias);
            cost.params += conv_param_count(3 * c, 1, 3, cfg.conv_bias);
            cost.params += cfg.base_heads;
            cost.conv_flops += 3 * c * c * hw + 9 * 3 * c * hw;
            const std::int64_t d = c / cfg.base_heads;
            cost.attn_score_flops += cfg.base_heads * d * d * hw;
            cost.attn_apply_flops += cfg.base_heads * d * d * hw;
            cost.softmax_evals += cfg.base_heads * d * d;
            // ln + qkv(pw,dw) + 3 splits + 2 normalized + scores*3 + attn out + residual
            cost.activation_elements += c * hw + 2 * (3 * c * hw) + 3 * c * hw + 2 * c * hw +
                                        3 * cfg.base_heads * d * d + c * hw + c * hw;
        }
        return cost;
    }

    const std::int64_t streams = cfg.proj_streams();
    cost.params += 2 * c;
    cost.params += conv_param_count(streams * c, c, 1, cfg.conv_bias);
    cost.params += conv_param_count(streams * c, 1, 3, cfg.conv_bias);
    cost.params += cfg.heads_at(1);
    cost.conv_flops += streams * c * c * hw + 9 * streams * c * hw;
    cost.activation_elements += c * hw;                          // layer norm
    cost.activation_elements += 2 * streams * c * hw;            // qkv pw + dw
    cost.activation_elements += streams * c * hw;                // splits

    auto attention_cost = [&](int stage, std::int64_t tq) {
        const std::int64_t heads = cfg.heads_at(stage);
        const std::int64_t d = c / heads;
        cost.attn_score_flops += heads * d * d * tq;
        cost.attn_apply_flops += heads * d * d * hw;
        cost.softmax_evals += heads * d * d;
        // normalized q/k, score stack (scaled + softmaxed), output
        cost.activation_elements += 2 * d * heads * tq + 3 * heads * d * d + c * hw;
    };

    attention_cost(1, hw);

    for (int stage = 2; stage <= cfg.attention_count; ++stage) {
        const std::int64_t r = CSAttnConfig::scale_factor(stage);
        const std::int64_t tq = cfg.use_spatial_scaling ? hw / (r * r) : hw;
        const std::int64_t mid = cfg.use_spatial_scaling ? r * r * c : c;
        if (cfg.use_value_nta) {
            cost.params += conv_param_count(c, c, 1, cfg.conv_bias);
            cost.conv_flops += c * c * hw;
            cost.activation_elements += c * hw + (cfg.use_nonlinear_activation ? c * hw : 0);
        }
        cost.params += conv_param_count(c, c, 1, cfg.conv_bias);        // scaling pre
        cost.params += conv_param_count(mid, 1, 3, cfg.conv_bias);      // scaling dw
        cost.params += conv_param_count(2 * c, mid, 1, cfg.conv_bias);  // scaling post
        cost.params += cfg.heads_at(stage);
        // pre at full res; dw and post act on mid channels at tq pixels
        cost.conv_flops += c * c * hw;
        cost.conv_flops += 9 * mid * tq;
        cost.conv_flops += 2 * c * mid * tq;
        if (cfg.intra_residual) cost.activation_elements += c * hw;
        cost.activation_elements += c * hw;                                        // pre
        cost.activation_elements += mid * tq;                                      // shuffled / dw input
        cost.activation_elements += mid * tq;                                      // dw out
        if (cfg.use_nonlinear_activation) cost.activation_elements += mid * tq;    // act
        cost.activation_elements += 2 * c * tq;                                    // post
        cost.activation_elements += 2 * c * tq;                                    // q/k split
        attention_cost(stage, tq);
    }

    if (cfg.use_aggregation) {
        cost.params += conv_param_count(c, cfg.attention_count * c, 1, cfg.conv_bias);
        cost.conv_flops += static_cast<std::int64_t>(cfg.attention_count) * c * c * hw;
        cost.activation_elements += cfg.attention_count * c * hw + c * hw;
    }
    cost.activation_elements += c * hw;  // block residual
    return cost;
}

}  // namespace csattn
