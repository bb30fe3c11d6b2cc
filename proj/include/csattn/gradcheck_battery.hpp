#pragma once

#include "csattn/block.hpp"
#include "csattn/gradcheck.hpp"
#include "csattn/loss.hpp"
#include "csattn/net.hpp"

namespace csattn {

struct CheckResult {
    std::string name;
    double max_rel_err = 0.0;
    double tol = 1e-4;
    bool passed = false;
};

namespace detail {

using ScalarFn = std::function<Var<double>(Tape<double>&, Var<double>)>;

inline void run_check(std::vector<CheckResult>& out, const std::string& name, const Tensor<double>& x,
                      const ScalarFn& f, double tol = 1e-4) {
    CheckResult r;
    r.name = name;
    r.tol = tol;
    const GradCheckReport rep = grad_check(f, x, 1e-5, tol);
    r.max_rel_err = rep.max_rel_err;
    r.passed = rep.passed;
    out.push_back(std::move(r));
}

inline void run_check_coords(std::vector<CheckResult>& out, const std::string& name, const Tensor<double>& x,
                             const std::vector<std::int64_t>& coords, const ScalarFn& f, double tol = 1e-4) {
    CheckResult r;
    r.name = name;
    r.tol = tol;
    const GradCheckReport rep = grad_check_coords(f, x, coords, 1e-5, tol);
    r.max_rel_err = rep.max_rel_err;
    r.passed = rep.passed;
    out.push_back(std::move(r));
}

// sum(y * w) with a fixed random weighting makes the probe sensitive to every
// output coordinate.
inline ScalarFn weighted(std::function<Var<double>(Tape<double>&, Var<double>)> op, Tensor<double> w) {
    return [op = std::move(op), w = std::move(w)](Tape<double>& t, Var<double> x) {
        Var<double> y = op(t, x);
        Var<double> wv = t.leaf(w, false);
        return sum_all(mul(y, wv));
    };
}

inline Tensor<double> rand_t(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
    return rng.uniform_tensor<double>(std::move(shape), lo, hi);
}

inline std::vector<std::int64_t> sample_coords(Rng& rng, std::int64_t size, std::int64_t want) {
    std::vector<std::int64_t> coords;
    if (size <= want) {
        for (std::int64_t i = 0; i < size; ++i) coords.push_back(i);
        return coords;
    }
    for (std::int64_t i = 0; i < want; ++i) coords.push_back(rng.uniform_int(size));
    return coords;
}

inline void battery_tensor(std::vector<CheckResult>& out) {
    Rng rng(11);
    const std::vector<Shape> shapes = {{2, 3}, {5}, {2, 2, 3}};
    for (std::size_t si = 0; si < shapes.size(); ++si) {
        const std::string tag = "#" + std::to_string(si);
        const Shape& s = shapes[si];
        Tensor<double> x = rand_t(rng, s);
        Tensor<double> other = rand_t(rng, s);
        Tensor<double> w = rand_t(rng, s);

        run_check(out, "tensor.add" + tag, x,
                  weighted([other](Tape<double>& t, Var<double> v) { return add(v, t.leaf(other, false)); }, w));
        run_check(out, "tensor.sub" + tag, x,
                  weighted([other](Tape<double>& t, Var<double> v) { return sub(t.leaf(other, false), v); }, w));
        run_check(out, "tensor.mul" + tag, x,
                  weighted([other](Tape<double>& t, Var<double> v) { return mul(v, t.leaf(other, false)); }, w));
        run_check(out, "tensor.scale" + tag, x,
                  weighted([](Tape<double>&, Var<double> v) { return scale(v, 1.7); }, w));
        run_check(out, "tensor.softmax_lastdim" + tag, x,
                  weighted([](Tape<double>&, Var<double> v) { return softmax_lastdim(v); }, w));
        run_check(out, "tensor.reduce_sum" + tag, x, [](Tape<double>&, Var<double> v) { return sum_all(v); });
        run_check(out, "tensor.reduce_mean" + tag, x,
                  weighted([](Tape<double>&, Var<double> v) { return reduce(Reduce::mean, v, {0}); },
                           [&] {
                               Shape os;
                               for (std::size_t d = 1; d < s.size(); ++d) os.push_back(s[d]);
                               if (os.empty()) os = Shape{1};
                               return rand_t(rng, os);
                           }()));
    }

    const std::vector<std::array<std::int64_t, 4>> mm = {{1, 3, 4, 2}, {2, 2, 3, 4}, {3, 4, 2, 5}};
    for (std::size_t si = 0; si < mm.size(); ++si) {
        const auto [b, m, k, n] = mm[si];
        const std::string tag = "#" + std::to_string(si);
        Tensor<double> a = rand_t(rng, {b, m, k});
        Tensor<double> bmat = rand_t(rng, {b, k, n});
        Tensor<double> w = rand_t(rng, {b, m, n});
        run_check(out, "tensor.matmul_lhs" + tag, a,
                  weighted([bmat](Tape<double>& t, Var<double> v) { return matmul(v, t.leaf(bmat, false)); }, w));
        run_check(out, "tensor.matmul_rhs" + tag, bmat,
                  weighted([a](Tape<double>& t, Var<double> v) { return matmul(t.leaf(a, false), v); }, w));
    }

    const std::vector<Shape> im = {{1, 2, 2, 3}, {2, 3, 2, 2}, {1, 4, 3, 3}};
    for (std::size_t si = 0; si < im.size(); ++si) {
        const std::string tag = "#" + std::to_string(si);
        const Shape& s = im[si];
        Tensor<double> x = rand_t(rng, s);
        Tensor<double> w = rand_t(rng, s);
        run_check(out, "tensor.permute_roundabout" + tag, x,
                  weighted(
                      [](Tape<double>&, Var<double> v) {
                          return permute(permute(v, {0, 2, 3, 1}), {0, 3, 1, 2});
                      },
                      w));
        run_check(out, "tensor.split_concat" + tag, x, weighted(
                                                           [](Tape<double>& t, Var<double> v) {
                                                               const std::int64_t c = t.val(v).shape[1];
                                                               auto parts = split_channel(v, {1, c - 1});
                                                               return concat_channel<double>({parts[1], parts[0]});
                                                           },
                                                           w));
        run_check(out, "tensor.reshape" + tag, x,
                  weighted(
                      [](Tape<double>& t, Var<double> v) {
                          return reshape(v, {t.val(v).size()});
                      },
                      Tensor<double>(Shape{numel(s)}, std::vector<double>(w.data))));
    }
}

inline void battery_nn(std::vector<CheckResult>& out) {
    Rng rng(22);
    const std::vector<std::array<std::int64_t, 4>> shapes = {{1, 3, 4, 4}, {2, 2, 5, 5}, {1, 4, 4, 6}};
    for (std::size_t si = 0; si < shapes.size(); ++si) {
        const std::string tag = "#" + std::to_string(si);
        const auto [n, c, h, w] = shapes[si];
        const std::int64_t co = c + 1;
        Tensor<double> x = rand_t(rng, {n, c, h, w});
        Tensor<double> pw_w = rand_t(rng, {co, c, 1, 1});
        Tensor<double> pw_b = rand_t(rng, {co});
        Tensor<double> wpw = rand_t(rng, {n, co, h, w});
        auto pconv_x = [pw_w, pw_b](Tape<double>& t, Var<double> v) {
            return pointwise_conv(v, t.leaf(pw_w, false), t.leaf(pw_b, false));
        };
        run_check(out, "nn.pointwise_conv_x" + tag, x, weighted(pconv_x, wpw));
        run_check(out, "nn.pointwise_conv_w" + tag, pw_w,
                  weighted([x, pw_b](Tape<double>& t, Var<double> v) {
                      return pointwise_conv(t.leaf(x, false), v, t.leaf(pw_b, false));
                  },
                           wpw));
        run_check(out, "nn.pointwise_conv_b" + tag, pw_b,
                  weighted([x, pw_w](Tape<double>& t, Var<double> v) {
                      return pointwise_conv(t.leaf(x, false), t.leaf(pw_w, false), v);
                  },
                           wpw));

        Tensor<double> dw_w = rand_t(rng, {c, 1, 3, 3});
        Tensor<double> dw_b = rand_t(rng, {c});
        Tensor<double> wdw = rand_t(rng, {n, c, h, w});
        run_check(out, "nn.depthwise_x" + tag, x,
                  weighted([dw_w, dw_b](Tape<double>& t, Var<double> v) {
                      return depthwise_conv3x3(v, t.leaf(dw_w, false), t.leaf(dw_b, false));
                  },
                           wdw));
        run_check(out, "nn.depthwise_w" + tag, dw_w,
                  weighted([x, dw_b](Tape<double>& t, Var<double> v) {
                      return depthwise_conv3x3(t.leaf(x, false), v, t.leaf(dw_b, false));
                  },
                           wdw));
        run_check(out, "nn.depthwise_b" + tag, dw_b,
                  weighted([x, dw_w](Tape<double>& t, Var<double> v) {
                      return depthwise_conv3x3(t.leaf(x, false), t.leaf(dw_w, false), v);
                  },
                           wdw));

        for (std::int64_t stride : {1, 2}) {
            Tensor<double> cw = rand_t(rng, {co, c, 3, 3});
            Tensor<double> cb = rand_t(rng, {co});
            const std::int64_t oh = (h - 1) / stride + 1, ow = (w - 1) / stride + 1;
            Tensor<double> wfc = rand_t(rng, {n, co, oh, ow});
            const std::string sname = stride == 1 ? "_s1" : "_s2";
            run_check(out, "nn.conv3x3_x" + sname + tag, x,
                      weighted([cw, cb, stride](Tape<double>& t, Var<double> v) {
                          return conv3x3(v, t.leaf(cw, false), t.leaf(cb, false), stride);
                      },
                               wfc));
            run_check(out, "nn.conv3x3_w" + sname + tag, cw,
                      weighted([x, cb, stride](Tape<double>& t, Var<double> v) {
                          return conv3x3(t.leaf(x, false), v, t.leaf(cb, false), stride);
                      },
                               wfc));
            run_check(out, "nn.conv3x3_b" + sname + tag, cb,
                      weighted([x, cw, stride](Tape<double>& t, Var<double> v) {
                          return conv3x3(t.leaf(x, false), t.leaf(cw, false), v, stride);
                      },
                               wfc));
        }

        // Layer norm needs >= 3 channels to be non-degenerate (at C=2 the
        // normalized output saturates at +-1 and input gradients collapse to
        // the epsilon correction), and spread channels so the per-location
        // variance stays away from zero.
        const std::int64_t cl = std::max<std::int64_t>(3, c);
        Tensor<double> gain = rand_t(rng, {cl}, 0.5, 1.5);
        Tensor<double> offset = rand_t(rng, {cl});
        Tensor<double> wln = rand_t(rng, {n, cl, h, w});
        Tensor<double> xln = rand_t(rng, {n, cl, h, w}, -0.5, 0.5);
        for (std::int64_t i = 0; i < xln.size(); ++i) xln[i] += 2.0 * static_cast<double>((i / (h * w)) % cl);
        run_check(out, "nn.layer_norm_x" + tag, xln,
                  weighted([gain, offset](Tape<double>& t, Var<double> v) {
                      return layer_norm_channel(v, t.leaf(gain, false), t.leaf(offset, false), 1e-6);
                  },
                           wln));
        run_check(out, "nn.layer_norm_gain" + tag, gain,
                  weighted([xln, offset](Tape<double>& t, Var<double> v) {
                      return layer_norm_channel(t.leaf(xln, false), v, t.leaf(offset, false), 1e-6);
                  },
                           wln));
        run_check(out, "nn.layer_norm_offset" + tag, offset,
                  weighted([xln, gain](Tape<double>& t, Var<double> v) {
                      return layer_norm_channel(t.leaf(xln, false), t.leaf(gain, false), v, 1e-6);
                  },
                           wln));

        Tensor<double> wact = rand_t(rng, {n, c, h, w});
        for (Activation a : {Activation::gelu, Activation::relu, Activation::leaky_relu, Activation::silu}) {
            run_check(out, std::string("nn.activation_") + activation_name(a) + tag, x,
                      weighted([a](Tape<double>&, Var<double> v) { return activation(a, v); }, wact));
        }

        run_check(out, "nn.l2_normalize" + tag, x,
                  weighted([](Tape<double>&, Var<double> v) { return l2_normalize_lastdim(v, 1e-12); }, wact));
    }

    // Shuffle/unshuffle and area downsampling need divisible extents.
    const std::vector<std::array<std::int64_t, 4>> div_shapes = {{1, 2, 4, 4}, {2, 1, 4, 6}, {1, 3, 6, 4}};
    for (std::size_t si = 0; si < div_shapes.size(); ++si) {
        const std::string tag = "#" + std::to_string(si);
        const auto [n, c, h, w] = div_shapes[si];
        Tensor<double> x = rand_t(rng, {n, c, h, w});
        Tensor<double> wun = rand_t(rng, {n, c * 4, h / 2, w / 2});
        run_check(out, "nn.pixel_unshuffle" + tag, x,
                  weighted([](Tape<double>&, Var<double> v) { return pixel_unshuffle(v, 2); }, wun));
        Tensor<double> xs = rand_t(rng, {n, c * 4, h / 2, w / 2});
        Tensor<double> wsh = rand_t(rng, {n, c, h, w});
        run_check(out, "nn.pixel_shuffle" + tag, xs,
                  weighted([](Tape<double>&, Var<double> v) { return pixel_shuffle(v, 2); }, wsh));
        Tensor<double> wds = rand_t(rng, {n, c, h / 2, w / 2});
        run_check(out, "nn.downsample_area" + tag, x,
                  weighted([](Tape<double>&, Var<double> v) { return downsample_area(v, 2); }, wds));
    }
}

inline CSAttnConfig small_block_config() {
    CSAttnConfig cfg;
    cfg.channels = 8;
    cfg.base_heads = 1;
    return cfg;
}

inline void battery_block(std::vector<CheckResult>& out) {
    Rng rng(33);

    // head_scale both orientations, three shapes each.
    for (int si = 0; si < 3; ++si) {
        const std::int64_t heads = 1 + si, d = 2 + si;
        Tensor<double> s = rand_t(rng, {2 * heads, d, d});
        Tensor<double> alpha = rand_t(rng, {heads}, 0.5, 1.5);
        Tensor<double> w = rand_t(rng, {2 * heads, d, d});
        for (bool divide : {false, true}) {
            const std::string nm =
                (divide ? std::string("block.head_scale_div") : std::string("block.head_scale_mul")) + "#" +
                std::to_string(si);
            run_check(out, nm + "_scores", s,
                      weighted([alpha, divide, heads](Tape<double>& t, Var<double> v) {
                          return head_scale(v, t.leaf(alpha, false), heads, divide);
                      },
                               w));
            run_check(out, nm + "_alpha", alpha,
                      weighted([s, divide, heads](Tape<double>& t, Var<double> v) {
                          return head_scale(t.leaf(s, false), v, heads, divide);
                      },
                               w));
        }
    }

    // channel_attention w.r.t. each operand, V at its own resolution.
    for (int si = 0; si < 3; ++si) {
        const std::int64_t heads = 1 + si % 2, d = 2 + si, c = heads * d;
        Tensor<double> q = rand_t(rng, {1, c, 2, 2});
        Tensor<double> k = rand_t(rng, {1, c, 2, 2});
        Tensor<double> v = rand_t(rng, {1, c, 4, 4});
        Tensor<double> alpha = rand_t(rng, {heads}, 0.5, 1.5);
        Tensor<double> w = rand_t(rng, {1, c, 4, 4});
        const std::string tag = "#" + std::to_string(si);
        auto attn = [alpha, heads](Tape<double>& t, Var<double> qq, Var<double> kk, Var<double> vv) {
            return channel_attention(qq, kk, vv, t.leaf(alpha, false), heads);
        };
        run_check(out, "block.attention_q" + tag, q,
                  weighted([k, v, attn](Tape<double>& t, Var<double> x) {
                      return attn(t, x, t.leaf(k, false), t.leaf(v, false));
                  },
                           w));
        run_check(out, "block.attention_k" + tag, k,
                  weighted([q, v, attn](Tape<double>& t, Var<double> x) {
                      return attn(t, t.leaf(q, false), x, t.leaf(v, false));
                  },
                           w));
        run_check(out, "block.attention_v" + tag, v,
                  weighted([q, k, attn](Tape<double>& t, Var<double> x) {
                      return attn(t, t.leaf(q, false), t.leaf(k, false), x);
                  },
                           w));
        run_check(out, "block.attention_alpha" + tag, alpha,
                  weighted([q, k, v, heads](Tape<double>& t, Var<double> x) {
                      return channel_attention(t.leaf(q, false), t.leaf(k, false), t.leaf(v, false), x, heads);
                  },
                           w));
    }

    // Full block w.r.t. the input on three shapes and configs.
    struct Case {
        Shape shape;
        CSAttnConfig cfg;
        const char* name;
    };
    std::vector<Case> cases;
    {
        Case a{Shape{1, 8, 8, 8}, small_block_config(), "block.csattn_full_input"};
        Case b{Shape{2, 4, 4, 8}, small_block_config(), "block.csattn_c4_input"};
        b.cfg.channels = 4;
        Case c{Shape{1, 6, 8, 4}, small_block_config(), "block.csattn_noscale_count2_input"};
        c.cfg.channels = 6;
        c.cfg.use_spatial_scaling = false;
        c.cfg.attention_count = 2;
        cases = {a, b, c};
    }
    for (const auto& cs : cases) {
        ParamStore<double> ps;
        Rng prng(44);
        BlockIdx idx = build_block_params(ps, "blk", cs.cfg, prng);
        Tensor<double> x = rand_t(rng, cs.shape);
        Tensor<double> w = rand_t(rng, cs.shape);
        CSAttnConfig cfg = cs.cfg;
        run_check(out, cs.name, x, weighted(
                                       [ps, idx, cfg](Tape<double>& t, Var<double> v) {
                                           auto leaves = make_leaves(t, ps, false);
                                           return csattn_forward(v, idx, leaves, cfg);
                                       },
                                       w));
    }

    // Full block w.r.t. every parameter tensor (sampled coordinates).
    {
        const CSAttnConfig cfg = small_block_config();
        ParamStore<double> ps;
        Rng prng(55);
        BlockIdx idx = build_block_params(ps, "blk", cfg, prng);
        Tensor<double> x = rand_t(rng, {1, 8, 8, 8});
        Tensor<double> w = rand_t(rng, {1, 8, 8, 8});
        for (std::size_t pi = 0; pi < ps.count(); ++pi) {
            auto coords = sample_coords(rng, ps.tensors[pi].size(), 6);
            auto f = weighted(
                [ps, idx, cfg, pi, x](Tape<double>& t, Var<double> v) {
                    std::vector<Var<double>> leaves;
                    leaves.reserve(ps.count());
                    for (std::size_t i = 0; i < ps.count(); ++i) {
                        leaves.push_back(i == pi ? v : t.leaf(ps.tensors[i], false));
                    }
                    Var<double> in = t.leaf(x, false);
                    return csattn_forward(in, idx, leaves, cfg);
                },
                w);
            run_check_coords(out, "block.csattn_param." + ps.names[pi], ps.tensors[pi], coords, f);
        }
    }

    // Stacked baseline w.r.t. input on three shapes.
    {
        const std::vector<Shape> shapes = {{1, 8, 8, 8}, {2, 4, 4, 8}, {1, 6, 4, 4}};
        for (std::size_t si = 0; si < shapes.size(); ++si) {
            CSAttnConfig cfg = small_block_config();
            cfg.channels = shapes[si][1];
            cfg.baseline_stacked = true;
            ParamStore<double> ps;
            Rng prng(66 + static_cast<std::uint64_t>(si));
            BlockIdx idx = build_block_params(ps, "blk", cfg, prng);
            Tensor<double> x = rand_t(rng, shapes[si]);
            Tensor<double> w = rand_t(rng, shapes[si]);
            run_check(out, "block.stacked_baseline_input#" + std::to_string(si), x,
                      weighted(
                          [ps, idx, cfg](Tape<double>& t, Var<double> v) {
                              auto leaves = make_leaves(t, ps, false);
                              return stacked_attention_baseline(v, idx, leaves, cfg);
                          },
                          w));
        }
    }
}

inline void battery_loss(std::vector<CheckResult>& out) {
    Rng rng(77);
    // Ground truth sits a small one-sided offset below the prediction. The
    // losses are piecewise linear, so this leaves every gradient magnitude
    // unchanged while (a) keeping pred-gt bounded away from the |.| kinks at
    // every scale, including after area averaging, and (b) keeping the loss
    // value small enough that difference-quotient roundoff stays below the
    // 1e-8 denominator floor at zero-gradient coordinates.
    for (int si = 0; si < 3; ++si) {
        const std::string tag = "#" + std::to_string(si);
        const std::int64_t h = si == 1 ? 3 : 4, w = si == 2 ? 6 : 4;  // mixes pow2 and not
        Tensor<double> pred = rand_t(rng, {1, 2, h, w});
        Tensor<double> gt = pred;
        for (auto& v : gt.data) v -= rng.uniform(0.005, 0.015);
        run_check(out, "loss.l1" + tag, pred,
                  [gt](Tape<double>& t, Var<double> v) { return l1_loss(v, t.leaf(gt, false)); });
        run_check(out, "loss.frequency" + tag, pred,
                  [gt](Tape<double>& t, Var<double> v) { return frequency_loss(v, t.leaf(gt, false)); });
        run_check(out, "loss.frequency_direct" + tag, pred,
                  [gt](Tape<double>& t, Var<double> v) { return frequency_loss(v, t.leaf(gt, false), true); });
    }
    {
        Tensor<double> pred = rand_t(rng, {1, 3, 16, 16}, 0.0, 1.0);
        Tensor<double> gt = pred;
        for (auto& v : gt.data) v -= rng.uniform(0.005, 0.015);
        LossWeights lw;
        run_check(out, "loss.multiscale", pred, [gt, lw](Tape<double>& t, Var<double> v) {
            std::array<Var<double>, 3> preds = {v, downsample_area(v, 2), downsample_area(v, 4)};
            Var<double> g = t.leaf(gt, false);
            std::array<Var<double>, 3> gts = {g, downsample_area(g, 2), downsample_area(g, 4)};
            return multiscale_loss(preds, gts, lw).total;
        });
    }
}

inline NetConfig tiny_net_config() {
    NetConfig cfg;
    cfg.base_channels = 4;
    cfg.blocks = {1, 1, 1};
    cfg.csattn.base_heads = 1;
    return cfg;
}

inline void battery_net(std::vector<CheckResult>& out) {
    Rng rng(88);
    const NetConfig cfg = tiny_net_config();
    Net<double> net = build_net<double>(cfg, 123);

    // Probe through a smooth weighted sum of the three outputs. The training
    // losses are piecewise linear and checked separately in battery_loss; a
    // kink-free functional keeps the full-network probe well posed at step
    // 1e-5 while exercising every backward rule in the net.
    auto make_probe = [cfg](Tensor<double> w1, Tensor<double> w2, Tensor<double> w4) {
        return [cfg, w1 = std::move(w1), w2 = std::move(w2), w4 = std::move(w4)](
                   Tape<double>& t, const NetIdx& idx, const std::vector<Var<double>>& leaves, Var<double> in) {
            NetOutputs<double> o = forward_multiscale(in, idx, leaves, cfg);
            Var<double> s1 = sum_all(mul(o.full, t.leaf(w1, false)));
            Var<double> s2 = sum_all(mul(o.half, t.leaf(w2, false)));
            Var<double> s4 = sum_all(mul(o.quarter, t.leaf(w4, false)));
            return add(s1, add(s2, s4));
        };
    };

    // End-to-end input gradient on three shapes.
    const std::vector<std::array<std::int64_t, 2>> sizes = {{16, 16}, {32, 16}, {16, 32}};
    for (std::size_t si = 0; si < sizes.size(); ++si) {
        const auto [h, w] = sizes[si];
        Tensor<double> img = rand_t(rng, {1, 3, h, w}, 0.0, 1.0);
        auto probe = make_probe(rand_t(rng, {1, 3, h, w}), rand_t(rng, {1, 3, h / 2, w / 2}),
                                rand_t(rng, {1, 3, h / 4, w / 4}));
        run_check(out, "net.end_to_end_input#" + std::to_string(si), img,
                  [net, probe](Tape<double>& t, Var<double> v) {
                      auto leaves = make_leaves(t, net.params, false);
                      return probe(t, net.idx, leaves, v);
                  });
    }

    // Parameter gradients, sampled coordinates. 32x32 keeps the level-3
    // scaling path above one token, where its Q/K normalization saturates
    // and true gradients vanish.
    Tensor<double> img = rand_t(rng, {1, 3, 32, 32}, 0.0, 1.0);
    auto probe = make_probe(rand_t(rng, {1, 3, 32, 32}), rand_t(rng, {1, 3, 16, 16}),
                            rand_t(rng, {1, 3, 8, 8}));
    for (std::size_t pi = 0; pi < net.params.count(); ++pi) {
        auto coords = sample_coords(rng, net.params.tensors[pi].size(), 3);
        auto f = [net, probe, img, pi](Tape<double>& t, Var<double> v) {
            std::vector<Var<double>> leaves;
            leaves.reserve(net.params.count());
            for (std::size_t i = 0; i < net.params.count(); ++i) {
                leaves.push_back(i == pi ? v : t.leaf(net.params.tensors[i], false));
            }
            Var<double> in = t.leaf(img, false);
            return probe(t, net.idx, leaves, in);
        };
        run_check_coords(out, "net.param." + net.params.names[pi], net.params.tensors[pi], coords, f);
    }
}

}  // namespace detail

// Runs the finite-difference battery for one module group ("all", "tensor",
// "nn", "block", "loss" or "net"). tol 1e-4, central differences, step 1e-5.
inline std::vector<CheckResult> gradcheck_battery(const std::string& module) {
    std::vector<CheckResult> out;
    const bool all = module == "all";
    if (all || module == "tensor") detail::battery_tensor(out);
    if (all || module == "nn") detail::battery_nn(out);
    if (all || module == "block") detail::battery_block(out);
    if (all || module == "loss") detail::battery_loss(out);
    if (all || module == "net") detail::battery_net(out);
    if (out.empty()) throw std::runtime_error("gradcheck: unknown module '" + module + "'");
    return out;
}

}  // namespace csattn
