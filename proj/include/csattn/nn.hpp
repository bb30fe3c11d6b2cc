#pragma once

#include <memory>

#include "csattn/tape.hpp"

namespace csattn {

// ---------------------------------------------------------------------------
// 1x1 point-wise convolution: per-pixel linear map across channels.
// weight (Cout, Cin, 1, 1), bias (Cout) optional (pass Var{} for none).
// ---------------------------------------------------------------------------

template <typename T>
Var<T> pointwise_conv(Var<T> x, Var<T> w, Var<T> b = {}) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    const Tensor<T>& wv = tape.val(w);
    if (xv.rank() != 4) throw std::runtime_error("pointwise_conv: input must be NCHW");
    if (wv.rank() != 4 || wv.shape[2] != 1 || wv.shape[3] != 1) {
        throw std::runtime_error("pointwise_conv: weight must be (Cout,Cin,1,1)");
    }
    const std::int64_t n = xv.shape[0], ci = xv.shape[1], h = xv.shape[2], ww = xv.shape[3];
    const std::int64_t co = wv.shape[0];
    if (wv.shape[1] != ci) {
        throw std::runtime_error("pointwise_conv: channel mismatch, input has " + std::to_string(ci) +
                                 ", weight expects " + std::to_string(wv.shape[1]));
    }
    const bool has_bias = b.tape != nullptr;
    if (has_bias && (tape.val(b).rank() != 1 || tape.val(b).shape[0] != co)) {
        throw std::runtime_error("pointwise_conv: bias must be (Cout)");
    }
    const std::int64_t plane = h * ww;

    Tensor<T> out(Shape{n, co, h, ww});
    {
        const T* xd = xv.data.data();
        const T* wd = wv.data.data();
        const T* bd = has_bias ? tape.val(b).data.data() : nullptr;
        T* od = out.data.data();
#pragma omp parallel for schedule(static) collapse(2) if (n * co * plane > 2097152)
        for (std::int64_t ni = 0; ni < n; ++ni) {
            for (std::int64_t o = 0; o < co; ++o) {
                T* orow = od + (ni * co + o) * plane;
                const T bias = bd ? bd[o] : T(0);
                for (std::int64_t p = 0; p < plane; ++p) orow[p] = bias;
                for (std::int64_t c = 0; c < ci; ++c) {
                    const T wv1 = wd[o * ci + c];
                    const T* xrow = xd + (ni * ci + c) * plane;
                    for (std::int64_t p = 0; p < plane; ++p) orow[p] += wv1 * xrow[p];
                }
            }
        }
    }

    const bool rx = tape.requires_grad(x), rw = tape.requires_grad(w);
    const bool rb = has_bias && tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (rx || rw || rb) {
        const std::int32_t oid = tape.next_id(), xid = x.id, wid = w.id;
        const std::int32_t bid = has_bias ? b.id : -1;
        bwd = [oid, xid, wid, bid, rx, rw, rb, n, ci, co, plane](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const T* gd = g.data.data();
            if (rx) {
                const T* wd = t.value_of(wid).data.data();
                T* gx = t.grad_slot(xid).data.data();
#pragma omp parallel for schedule(static) collapse(2) if (n * ci * plane > 2097152)
                for (std::int64_t ni = 0; ni < n; ++ni) {
                    for (std::int64_t c = 0; c < ci; ++c) {
                        T* gxrow = gx + (ni * ci + c) * plane;
                        for (std::int64_t o = 0; o < co; ++o) {
                            const T wv1 = wd[o * ci + c];
                            const T* grow = gd + (ni * co + o) * plane;
                            for (std::int64_t p = 0; p < plane; ++p) gxrow[p] += wv1 * grow[p];
                        }
                    }
                }
            }
            if (rw) {
                const T* xd = t.value_of(xid).data.data();
                T* gw = t.grad_slot(wid).data.data();
#pragma omp parallel for schedule(static) if (co * ci * plane > 2097152)
                for (std::int64_t o = 0; o < co; ++o) {
                    for (std::int64_t c = 0; c < ci; ++c) {
                        T acc = T(0);
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            const T* grow = gd + (ni * co + o) * plane;
                            const T* xrow = xd + (ni * ci + c) * plane;
                            for (std::int64_t p = 0; p < plane; ++p) acc += grow[p] * xrow[p];
                        }
                        gw[o * ci + c] += acc;
                    }
                }
            }
            if (rb) {
                T* gb = t.grad_slot(bid).data.data();
                for (std::int64_t o = 0; o < co; ++o) {
                    T acc = T(0);
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* grow = gd + (ni * co + o) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) acc += grow[p];
                    }
                    gb[o] += acc;
                }
            }
        };
    }
    return tape.emit(std::move(out), rx || rw || rb, std::move(bwd), "pointwise_conv");
}

// ---------------------------------------------------------------------------
// 3x3 depth-wise convolution, stride 1, zero padding 1, groups == channels.
// weight (C, 1, 3, 3), bias (C) optional.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> depthwise_conv3x3(Var<T> x, Var<T> w, Var<T> b = {}) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    const Tensor<T>& wv = tape.val(w);
    if (xv.rank() != 4) throw std::runtime_error("depthwise_conv3x3: input must be NCHW");
    const std::int64_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], ww = xv.shape[3];
    if (h < 1 || ww < 1) throw std::runtime_error("depthwise_conv3x3: empty spatial extents");
    if (wv.rank() != 4 || wv.shape[0] != c || wv.shape[1] != 1 || wv.shape[2] != 3 || wv.shape[3] != 3) {
        throw std::runtime_error("depthwise_conv3x3: weight must be (C,1,3,3) with C == input channels");
    }
    const bool has_bias = b.tape != nullptr;
    if (has_bias && (tape.val(b).rank() != 1 || tape.val(b).shape[0] != c)) {
        throw std::runtime_error("depthwise_conv3x3: bias must be (C)");
    }
    const std::int64_t plane = h * ww;

    Tensor<T> out(Shape{n, c, h, ww});
    {
        const T* xd = xv.data.data();
        const T* wd = wv.data.data();
        const T* bd = has_bias ? tape.val(b).data.data() : nullptr;
        T* od = out.data.data();
#pragma omp parallel for schedule(static) collapse(2) if (n * c * plane > 2097152)
        for (std::int64_t ni = 0; ni < n; ++ni) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T* xp = xd + (ni * c + ch) * plane;
                const T* k = wd + ch * 9;
                T* op = od + (ni * c + ch) * plane;
                const T bias = bd ? bd[ch] : T(0);
                for (std::int64_t y = 0; y < h; ++y) {
                    for (std::int64_t xo = 0; xo < ww; ++xo) {
                        T acc = bias;
                        for (std::int64_t dy = 0; dy < 3; ++dy) {
                            const std::int64_t iy = y + dy - 1;
                            if (iy < 0 || iy >= h) continue;
                            for (std::int64_t dx = 0; dx < 3; ++dx) {
                                const std::int64_t ix = xo + dx - 1;
                                if (ix < 0 || ix >= ww) continue;
                                acc += k[dy * 3 + dx] * xp[iy * ww + ix];
                            }
                        }
                        op[y * ww + xo] = acc;
                    }
                }
            }
        }
    }

    const bool rx = tape.requires_grad(x), rw = tape.requires_grad(w);
    const bool rb = has_bias && tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (rx || rw || rb) {
        const std::int32_t oid = tape.next_id(), xid = x.id, wid = w.id;
        const std::int32_t bid = has_bias ? b.id : -1;
        bwd = [oid, xid, wid, bid, rx, rw, rb, n, c, h, ww, plane](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const T* gd = g.data.data();
            if (rx) {
                const T* wd = t.value_of(wid).data.data();
                T* gx = t.grad_slot(xid).data.data();
#pragma omp parallel for schedule(static) collapse(2) if (n * c * plane > 2097152)
                for (std::int64_t ni = 0; ni < n; ++ni) {
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T* k = wd + ch * 9;
                        const T* gp = gd + (ni * c + ch) * plane;
                        T* gxp = gx + (ni * c + ch) * plane;
                        for (std::int64_t iy = 0; iy < h; ++iy) {
                            for (std::int64_t ix = 0; ix < ww; ++ix) {
                                T acc = T(0);
                                for (std::int64_t dy = 0; dy < 3; ++dy) {
                                    const std::int64_t oy = iy - dy + 1;
                                    if (oy < 0 || oy >= h) continue;
                                    for (std::int64_t dx = 0; dx < 3; ++dx) {
                                        const std::int64_t ox = ix - dx + 1;
                                        if (ox < 0 || ox >= ww) continue;
                                        acc += k[dy * 3 + dx] * gp[oy * ww + ox];
                                    }
                                }
                                gxp[iy * ww + ix] += acc;
                            }
                        }
                    }
                }
            }
            if (rw) {
                const T* xd = t.value_of(xid).data.data();
                T* gw = t.grad_slot(wid).data.data();
#pragma omp parallel for schedule(static) if (c * plane > 2097152)
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    for (std::int64_t dy = 0; dy < 3; ++dy) {
                        for (std::int64_t dx = 0; dx < 3; ++dx) {
                            T acc = T(0);
                            for (std::int64_t ni = 0; ni < n; ++ni) {
                                const T* xp = xd + (ni * c + ch) * plane;
                                const T* gp = gd + (ni * c + ch) * plane;
                                for (std::int64_t y = 0; y < h; ++y) {
                                    const std::int64_t iy = y + dy - 1;
                                    if (iy < 0 || iy >= h) continue;
                                    for (std::int64_t xo = 0; xo < ww; ++xo) {
                                        const std::int64_t ix = xo + dx - 1;
                                        if (ix < 0 || ix >= ww) continue;
                                        acc += xp[iy * ww + ix] * gp[y * ww + xo];
                                    }
                                }
                            }
                            gw[ch * 9 + dy * 3 + dx] += acc;
                        }
                    }
                }
            }
            if (rb) {
                T* gb = t.grad_slot(bid).data.data();
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    T acc = T(0);
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* gp = gd + (ni * c + ch) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) acc += gp[p];
                    }
                    gb[ch] += acc;
                }
            }
        };
    }
    return tape.emit(std::move(out), rx || rw || rb, std::move(bwd), "depthwise_conv3x3");
}

// ---------------------------------------------------------------------------
// Full 3x3 convolution, padding 1, stride 1 or 2. Used by the encoder/decoder
// plumbing (stem, scale embeds, downsampling, output heads).
// weight (Cout, Cin, 3, 3), bias (Cout) optional.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> conv3x3(Var<T> x, Var<T> w, Var<T> b = {}, std::int64_t stride = 1) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    const Tensor<T>& wv = tape.val(w);
    if (xv.rank() != 4) throw std::runtime_error("conv3x3: input must be NCHW");
    if (stride != 1 && stride != 2) throw std::runtime_error("conv3x3: stride must be 1 or 2");
    const std::int64_t n = xv.shape[0], ci = xv.shape[1], h = xv.shape[2], ww = xv.shape[3];
    if (wv.rank() != 4 || wv.shape[1] != ci || wv.shape[2] != 3 || wv.shape[3] != 3) {
        throw std::runtime_error("conv3x3: weight must be (Cout,Cin,3,3) with Cin == input channels");
    }
    const std::int64_t co = wv.shape[0];
    const bool has_bias = b.tape != nullptr;
    if (has_bias && (tape.val(b).rank() != 1 || tape.val(b).shape[0] != co)) {
        throw std::runtime_error("conv3x3: bias must be (Cout)");
    }
    const std::int64_t oh = (h - 1) / stride + 1;
    const std::int64_t ow = (ww - 1) / stride + 1;
    const std::int64_t iplane = h * ww, oplane = oh * ow;

    Tensor<T> out(Shape{n, co, oh, ow});
    {
        const T* xd = xv.data.data();
        const T* wd = wv.data.data();
        const T* bd = has_bias ? tape.val(b).data.data() : nullptr;
        T* od = out.data.data();
#pragma omp parallel for schedule(static) collapse(2) if (n * co * oplane * ci > 2097152)
        for (std::int64_t ni = 0; ni < n; ++ni) {
            for (std::int64_t o = 0; o < co; ++o) {
                T* op = od + (ni * co + o) * oplane;
                const T bias = bd ? bd[o] : T(0);
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        T acc = bias;
                        for (std::int64_t c = 0; c < ci; ++c) {
                            const T* xp = xd + (ni * ci + c) * iplane;
                            const T* k = wd + (o * ci + c) * 9;
                            for (std::int64_t dy = 0; dy < 3; ++dy) {
                                const std::int64_t iy = oy * stride + dy - 1;
                                if (iy < 0 || iy >= h) continue;
                                for (std::int64_t dx = 0; dx < 3; ++dx) {
                                    const std::int64_t ix = ox * stride + dx - 1;
                                    if (ix < 0 || ix >= ww) continue;
                                    acc += k[dy * 3 + dx] * xp[iy * ww + ix];
                                }
                            }
                        }
                        op[oy * ow + ox] = acc;
                    }
                }
            }
        }
    }

    const bool rx = tape.requires_grad(x), rw = tape.requires_grad(w);
    const bool rb = has_bias && tape.requires_grad(b);
    std::function<void(Tape<T>&)> bwd;
    if (rx || rw || rb) {
        const std::int32_t oid = tape.next_id(), xid = x.id, wid = w.id;
        const std::int32_t bid = has_bias ? b.id : -1;
        bwd = [oid, xid, wid, bid, rx, rw, rb, n, ci, co, h, ww, oh, ow, stride, iplane, oplane](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const T* gd = g.data.data();
            if (rx) {
                const T* wd = t.value_of(wid).data.data();
                T* gx = t.grad_slot(xid).data.data();
#pragma omp parallel for schedule(static) collapse(2) if (n * ci * iplane * co > 2097152)
                for (std::int64_t ni = 0; ni < n; ++ni) {
                    for (std::int64_t c = 0; c < ci; ++c) {
                        T* gxp = gx + (ni * ci + c) * iplane;
                        for (std::int64_t iy = 0; iy < h; ++iy) {
                            for (std::int64_t ix = 0; ix < ww; ++ix) {
                                T acc = T(0);
                                for (std::int64_t o = 0; o < co; ++o) {
                                    const T* k = wd + (o * ci + c) * 9;
                                    const T* gp = gd + (ni * co + o) * oplane;
                                    for (std::int64_t dy = 0; dy < 3; ++dy) {
                                        const std::int64_t ty = iy - dy + 1;
                                        if (ty < 0 || ty % stride != 0) continue;
                                        const std::int64_t oy = ty / stride;
                                        if (oy >= oh) continue;
                                        for (std::int64_t dx = 0; dx < 3; ++dx) {
                                            const std::int64_t tx = ix - dx + 1;
                                            if (tx < 0 || tx % stride != 0) continue;
                                            const std::int64_t ox = tx / stride;
                                            if (ox >= ow) continue;
                                            acc += k[dy * 3 + dx] * gp[oy * ow + ox];
                                        }
                                    }
                                }
                                gxp[iy * ww + ix] += acc;
                            }
                        }
                    }
                }
            }
            if (rw) {
                const T* xd = t.value_of(xid).data.data();
                T* gw = t.grad_slot(wid).data.data();
#pragma omp parallel for schedule(static) if (co * ci * oplane > 2097152)
                for (std::int64_t o = 0; o < co; ++o) {
                    for (std::int64_t c = 0; c < ci; ++c) {
                        for (std::int64_t dy = 0; dy < 3; ++dy) {
                            for (std::int64_t dx = 0; dx < 3; ++dx) {
                                T acc = T(0);
                                for (std::int64_t ni = 0; ni < n; ++ni) {
                                    const T* xp = xd + (ni * ci + c) * iplane;
                                    const T* gp = gd + (ni * co + o) * oplane;
                                    for (std::int64_t oy = 0; oy < oh; ++oy) {
                                        const std::int64_t iy = oy * stride + dy - 1;
                                        if (iy < 0 || iy >= h) continue;
                                        for (std::int64_t ox = 0; ox < ow; ++ox) {
                                            const std::int64_t ix = ox * stride + dx - 1;
                                            if (ix < 0 || ix >= ww) continue;
                                            acc += xp[iy * ww + ix] * gp[oy * ow + ox];
                                        }
                                    }
                                }
                                gw[(o * ci + c) * 9 + dy * 3 + dx] += acc;
                            }
                        }
                    }
                }
            }
            if (rb) {
                T* gb = t.grad_slot(bid).data.data();
                for (std::int64_t o = 0; o < co; ++o) {
                    T acc = T(0);
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* gp = gd + (ni * co + o) * oplane;
                        for (std::int64_t p = 0; p < oplane; ++p) acc += gp[p];
                    }
                    gb[o] += acc;
                }
            }
        };
    }
    return tape.emit(std::move(out), rx || rw || rb, std::move(bwd), "conv3x3");
}

// ---------------------------------------------------------------------------
// Layer normalization across the channel axis at each spatial location
// (the Restormer convention). gain/offset are per-channel.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> layer_norm_channel(Var<T> x, Var<T> gain, Var<T> offset, T eps) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 4) throw std::runtime_error("layer_norm_channel: input must be NCHW");
    const std::int64_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], ww = xv.shape[3];
    const Tensor<T>& gv = tape.val(gain);
    const Tensor<T>& ov = tape.val(offset);
    if (gv.size() != c || ov.size() != c) {
        throw std::runtime_error("layer_norm_channel: gain/offset length must equal channels");
    }
    if (!(eps > T(0))) throw std::runtime_error("layer_norm_channel: eps must be positive");
    const std::int64_t plane = h * ww;

    Tensor<T> out(xv.shape);
    // Saved for backward: normalized values and per-location inverse stddev.
    auto xhat = std::make_shared<Tensor<T>>(xv.shape);
    auto istd = std::make_shared<Tensor<T>>(Shape{n, 1, h, ww});
    {
        const T* xd = xv.data.data();
        const T* gd2 = gv.data.data();
        const T* od2 = ov.data.data();
        T* yd = out.data.data();
        T* xh = xhat->data.data();
        T* is = istd->data.data();
        const T invc = T(1) / static_cast<T>(c);
#pragma omp parallel for schedule(static) if (n * plane > 65536)
        for (std::int64_t np = 0; np < n * plane; ++np) {
            const std::int64_t ni = np / plane, p = np % plane;
            const T* xcol = xd + ni * c * plane + p;
            T mu = T(0);
            for (std::int64_t ch = 0; ch < c; ++ch) mu += xcol[ch * plane];
            mu *= invc;
            T var = T(0);
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T d = xcol[ch * plane] - mu;
                var += d * d;
            }
            var *= invc;
            const T inv = T(1) / std::sqrt(var + eps);
            is[np] = inv;
            T* ycol = yd + ni * c * plane + p;
            T* xhcol = xh + ni * c * plane + p;
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const T v = (xcol[ch * plane] - mu) * inv;
                xhcol[ch * plane] = v;
                ycol[ch * plane] = gd2[ch] * v + od2[ch];
            }
        }
    }

    const bool rx = tape.requires_grad(x), rg = tape.requires_grad(gain), ro = tape.requires_grad(offset);
    std::function<void(Tape<T>&)> bwd;
    if (rx || rg || ro) {
        const std::int32_t oid = tape.next_id(), xid = x.id, gid = gain.id, ooid = offset.id;
        bwd = [oid, xid, gid, ooid, rx, rg, ro, xhat, istd, n, c, plane](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const T* gd = g.data.data();
            const T* xh = xhat->data.data();
            if (rx) {
                const T* gainv = t.value_of(gid).data.data();
                const T* is = istd->data.data();
                T* gx = t.grad_slot(xid).data.data();
                const T invc = T(1) / static_cast<T>(c);
#pragma omp parallel for schedule(static) if (n * plane > 65536)
                for (std::int64_t np = 0; np < n * plane; ++np) {
                    const std::int64_t ni = np / plane, p = np % plane;
                    const T* gcol = gd + ni * c * plane + p;
                    const T* xhcol = xh + ni * c * plane + p;
                    T m1 = T(0), m2 = T(0);
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T dxh = gcol[ch * plane] * gainv[ch];
                        m1 += dxh;
                        m2 += dxh * xhcol[ch * plane];
                    }
                    m1 *= invc;
                    m2 *= invc;
                    T* gxcol = gx + ni * c * plane + p;
                    const T inv = is[np];
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const T dxh = gcol[ch * plane] * gainv[ch];
                        gxcol[ch * plane] += inv * (dxh - m1 - xhcol[ch * plane] * m2);
                    }
                }
            }
            if (rg) {
                T* gg = t.grad_slot(gid).data.data();
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    T acc = T(0);
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* gp = gd + (ni * c + ch) * plane;
                        const T* xp = xh + (ni * c + ch) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) acc += gp[p] * xp[p];
                    }
                    gg[ch] += acc;
                }
            }
            if (ro) {
                T* go = t.grad_slot(ooid).data.data();
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    T acc = T(0);
                    for (std::int64_t ni = 0; ni < n; ++ni) {
                        const T* gp = gd + (ni * c + ch) * plane;
                        for (std::int64_t p = 0; p < plane; ++p) acc += gp[p];
                    }
                    go[ch] += acc;
                }
            }
        };
    }
    return tape.emit(std::move(out), rx || rg || ro, std::move(bwd), "layer_norm_channel");
}

// ---------------------------------------------------------------------------
// Activations. GELU uses the exact Gaussian-CDF form.
// ---------------------------------------------------------------------------

enum class Activation { gelu, relu, leaky_relu, silu };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::gelu: return "gelu";
        case Activation::relu: return "relu";
        case Activation::leaky_relu: return "leaky_relu";
        case Activation::silu: return "silu";
    }
    return "?";
}

inline constexpr double kLeakySlope = 0.2;

namespace detail {

template <typename T>
inline T act_forward(Activation kind, T x) {
    switch (kind) {
        case Activation::gelu:
            return T(0.5) * x * (T(1) + std::erf(x * T(0.7071067811865475244)));
        case Activation::relu:
            return x > T(0) ? x : T(0);
        case Activation::leaky_relu:
            return x > T(0) ? x : T(kLeakySlope) * x;
        case Activation::silu: {
            const T s = T(1) / (T(1) + std::exp(-x));
            return x * s;
        }
    }
    return x;
}

template <typename T>
inline T act_derivative(Activation kind, T x) {
    switch (kind) {
        case Activation::gelu: {
            const T phi_cdf = T(0.5) * (T(1) + std::erf(x * T(0.7071067811865475244)));
            const T phi_pdf = std::exp(T(-0.5) * x * x) * T(0.3989422804014326779);
            return phi_cdf + x * phi_pdf;
        }
        case Activation::relu:
            return x > T(0) ? T(1) : T(0);
        case Activation::leaky_relu:
            return x > T(0) ? T(1) : T(kLeakySlope);
        case Activation::silu: {
            const T s = T(1) / (T(1) + std::exp(-x));
            return s * (T(1) + x * (T(1) - s));
        }
    }
    return T(1);
}

}  // namespace detail

template <typename T>
Var<T> activation(Activation kind, Var<T> x) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    Tensor<T> out(xv.shape);
    for (std::int64_t i = 0; i < xv.size(); ++i) out[i] = detail::act_forward(kind, xv[i]);

    const bool rx = tape.requires_grad(x);
    std::function<void(Tape<T>&)> bwd;
    if (rx) {
        const std::int32_t oid = tape.next_id(), xid = x.id;
        bwd = [oid, xid, kind](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const Tensor<T>& xval = t.value_of(xid);
            Tensor<T>& gx = t.grad_slot(xid);
            for (std::int64_t i = 0; i < g.size(); ++i) {
                gx[i] += g[i] * detail::act_derivative(kind, xval[i]);
            }
        };
    }
    return tape.emit(std::move(out), rx, std::move(bwd), "activation");
}

// ---------------------------------------------------------------------------
// Pixel unshuffle / shuffle (space-to-depth and inverse). Output channel index
// is c*r^2 + dy*r + dx for the source offset (dy,dx) within each r x r block;
// data movement only.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> pixel_unshuffle(Var<T> x, std::int64_t r) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 4) throw std::runtime_error("pixel_unshuffle: input must be NCHW");
    if (r < 1) throw std::runtime_error("pixel_unshuffle: factor must be >= 1");
    const std::int64_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
    if (h % r != 0 || w % r != 0) {
        throw std::runtime_error("pixel_unshuffle: extents " + shape_str(xv.shape) + " not divisible by " +
                                 std::to_string(r));
    }
    const std::int64_t oh = h / r, ow = w / r;

    Tensor<T> out(Shape{n, c * r * r, oh, ow});
    {
        const T* xd = xv.data.data();
        T* od = out.data.data();
        for (std::int64_t ni = 0; ni < n; ++ni) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                for (std::int64_t dy = 0; dy < r; ++dy) {
                    for (std::int64_t dx = 0; dx < r; ++dx) {
                        const std::int64_t oc = ch * r * r + dy * r + dx;
                        T* op = od + ((ni * c * r * r + oc) * oh) * ow;
                        const T* xp = xd + ((ni * c + ch) * h + dy) * w + dx;
                        for (std::int64_t y = 0; y < oh; ++y) {
                            for (std::int64_t xo = 0; xo < ow; ++xo) {
                                op[y * ow + xo] = xp[y * r * w + xo * r];
                            }
                        }
                    }
                }
            }
        }
    }

    const bool rx = tape.requires_grad(x);
    std::function<void(Tape<T>&)> bwd;
    if (rx) {
        const std::int32_t oid = tape.next_id(), xid = x.id;
        bwd = [oid, xid, n, c, h, w, r, oh, ow](Tape<T>& t) {
            const T* gd = t.grad_slot(oid).data.data();
            T* gx = t.grad_slot(xid).data.data();
            for (std::int64_t ni = 0; ni < n; ++ni) {
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    for (std::int64_t dy = 0; dy < r; ++dy) {
                        for (std::int64_t dx = 0; dx < r; ++dx) {
                            const std::int64_t oc = ch * r * r + dy * r + dx;
                            const T* gp = gd + ((ni * c * r * r + oc) * oh) * ow;
                            T* gxp = gx + ((ni * c + ch) * h + dy) * w + dx;
                            for (std::int64_t y = 0; y < oh; ++y) {
                                for (std::int64_t xo = 0; xo < ow; ++xo) {
                                    gxp[y * r * w + xo * r] += gp[y * ow + xo];
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return tape.emit(std::move(out), rx, std::move(bwd), "pixel_unshuffle", false);
}

template <typename T>
Var<T> pixel_shuffle(Var<T> x, std::int64_t r) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 4) throw std::runtime_error("pixel_shuffle: input must be NCHW");
    if (r < 1) throw std::runtime_error("pixel_shuffle: factor must be >= 1");
    const std::int64_t n = xv.shape[0], cin = xv.shape[1], ih = xv.shape[2], iw = xv.shape[3];
    if (cin % (r * r) != 0) {
        throw std::runtime_error("pixel_shuffle: channels " + std::to_string(cin) + " not divisible by r^2");
    }
    const std::int64_t c = cin / (r * r);
    const std::int64_t oh = ih * r, ow = iw * r;

    Tensor<T> out(Shape{n, c, oh, ow});
    {
        const T* xd = xv.data.data();
        T* od = out.data.data();
        for (std::int64_t ni = 0; ni < n; ++ni) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                for (std::int64_t dy = 0; dy < r; ++dy) {
                    for (std::int64_t dx = 0; dx < r; ++dx) {
                        const std::int64_t ic = ch * r * r + dy * r + dx;
                        const T* xp = xd + ((ni * cin + ic) * ih) * iw;
                        T* op = od + ((ni * c + ch) * oh + dy) * ow + dx;
                        for (std::int64_t y = 0; y < ih; ++y) {
                            for (std::int64_t xo = 0; xo < iw; ++xo) {
                                op[y * r * ow + xo * r] = xp[y * iw + xo];
                            }
                        }
                    }
                }
            }
        }
    }

    const bool rx = tape.requires_grad(x);
    std::function<void(Tape<T>&)> bwd;
    if (rx) {
        const std::int32_t oid = tape.next_id(), xid = x.id;
        bwd = [oid, xid, n, c, cin, ih, iw, r, oh, ow](Tape<T>& t) {
            const T* gd = t.grad_slot(oid).data.data();
            T* gx = t.grad_slot(xid).data.data();
            for (std::int64_t ni = 0; ni < n; ++ni) {
                for (std::int64_t ch = 0; ch < c; ++ch) {
                    for (std::int64_t dy = 0; dy < r; ++dy) {
                        for (std::int64_t dx = 0; dx < r; ++dx) {
                            const std::int64_t ic = ch * r * r + dy * r + dx;
                            T* gxp = gx + ((ni * cin + ic) * ih) * iw;
                            const T* gp = gd + ((ni * c + ch) * oh + dy) * ow + dx;
                            for (std::int64_t y = 0; y < ih; ++y) {
                                for (std::int64_t xo = 0; xo < iw; ++xo) {
                                    gxp[y * iw + xo] += gp[y * r * ow + xo * r];
                                }
                            }
                        }
                    }
                }
            }
        };
    }
    return tape.emit(std::move(out), rx, std::move(bwd), "pixel_shuffle", false);
}

// ---------------------------------------------------------------------------
// L2 normalization along the last axis: each slice divided by max(||s||, eps).
// ---------------------------------------------------------------------------

template <typename T>
Var<T> l2_normalize_lastdim(Var<T> x, T eps = T(1e-12)) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() < 1) throw std::runtime_error("l2_normalize_lastdim: rank must be >= 1");
    const std::int64_t n = xv.shape.back();
    const std::int64_t slices = xv.size() / n;

    Tensor<T> out(xv.shape);
    auto norms = std::make_shared<std::vector<T>>(static_cast<std::size_t>(slices));
    for (std::int64_t s = 0; s < slices; ++s) {
        const T* xi = xv.data.data() + s * n;
        T* yi = out.data.data() + s * n;
        T sq = T(0);
        for (std::int64_t j = 0; j < n; ++j) sq += xi[j] * xi[j];
        const T norm = std::sqrt(sq);
        (*norms)[static_cast<std::size_t>(s)] = norm;
        const T inv = T(1) / std::max(norm, eps);
        for (std::int64_t j = 0; j < n; ++j) yi[j] = xi[j] * inv;
    }

    const bool rx = tape.requires_grad(x);
    std::function<void(Tape<T>&)> bwd;
    if (rx) {
        const std::int32_t oid = tape.next_id(), xid = x.id;
        bwd = [oid, xid, norms, slices, n, eps](Tape<T>& t) {
            const Tensor<T>& g = t.grad_slot(oid);
            const Tensor<T>& y = t.value_of(oid);
            Tensor<T>& gx = t.grad_slot(xid);
            for (std::int64_t s = 0; s < slices; ++s) {
                const T* gi = g.data.data() + s * n;
                const T* yi = y.data.data() + s * n;
                T* gxi = gx.data.data() + s * n;
                const T norm = (*norms)[static_cast<std::size_t>(s)];
                if (norm > eps) {
                    T dot = T(0);
                    for (std::int64_t j = 0; j < n; ++j) dot += gi[j] * yi[j];
                    const T inv = T(1) / norm;
                    for (std::int64_t j = 0; j < n; ++j) gxi[j] += (gi[j] - yi[j] * dot) * inv;
                } else {
                    const T inv = T(1) / eps;
                    for (std::int64_t j = 0; j < n; ++j) gxi[j] += gi[j] * inv;
                }
            }
        };
    }
    return tape.emit(std::move(out), rx, std::move(bwd), "l2_normalize_lastdim");
}

// ---------------------------------------------------------------------------
// Area-average downsampling by an integer factor (used for the input image
// pyramid; deterministic and alias-free).
// ---------------------------------------------------------------------------

template <typename T>
Var<T> downsample_area(Var<T> x, std::int64_t factor) {
    Tape<T>& tape = *x.tape;
    const Tensor<T>& xv = tape.val(x);
    if (xv.rank() != 4) throw std::runtime_error("downsample_area: input must be NCHW");
    if (factor < 1) throw std::runtime_error("downsample_area: factor must be >= 1");
    const std::int64_t n = xv.shape[0], c = xv.shape[1], h = xv.shape[2], w = xv.shape[3];
    if (h % factor != 0 || w % factor != 0) {
        throw std::runtime_error("downsample_area: extents not divisible by factor " + std::to_string(factor));
    }
    const std::int64_t oh = h / factor, ow = w / factor;

    Tensor<T> out(Shape{n, c, oh, ow});
    const T inv = T(1) / static_cast<T>(factor * factor);
    {
        const T* xd = xv.data.data();
        T* od = out.data.data();
        for (std::int64_t nc = 0; nc < n * c; ++nc) {
            const T* xp = xd + nc * h * w;
            T* op = od + nc * oh * ow;
            for (std::int64_t oy = 0; oy < oh; ++oy) {
                for (std::int64_t ox = 0; ox < ow; ++ox) {
                    T acc = T(0);
                    for (std::int64_t dy = 0; dy < factor; ++dy) {
                        const T* row = xp + (oy * factor + dy) * w + ox * factor;
                        for (std::int64_t dx = 0; dx < factor; ++dx) acc += row[dx];
                    }
                    op[oy * ow + ox] = acc * inv;
                }
            }
        }
    }

    const bool rx = tape.requires_grad(x);
    std::function<void(Tape<T>&)> bwd;
    if (rx) {
        const std::int32_t oid = tape.next_id(), xid = x.id;
        bwd = [oid, xid, n, c, h, w, factor, oh, ow, inv](Tape<T>& t) {
            const T* gd = t.grad_slot(oid).data.data();
            T* gx = t.grad_slot(xid).data.data();
            for (std::int64_t nc = 0; nc < n * c; ++nc) {
                const T* gp = gd + nc * oh * ow;
                T* gxp = gx + nc * h * w;
                for (std::int64_t oy = 0; oy < oh; ++oy) {
                    for (std::int64_t ox = 0; ox < ow; ++ox) {
                        const T gval = gp[oy * ow + ox] * inv;
                        for (std::int64_t dy = 0; dy < factor; ++dy) {
                            T* row = gxp + (oy * factor + dy) * w + ox * factor;
                            for (std::int64_t dx = 0; dx < factor; ++dx) row[dx] += gval;
                        }
                    }
                }
            }
        };
    }
    return tape.emit(std::move(out), rx, std::move(bwd), "downsample_area");
}

// Plain-tensor variant for building ground-truth pyramids.
template <typename T>
Tensor<T> downsample_area_tensor(const Tensor<T>& x, std::int64_t factor) {
    Tape<T> tape;
    Var<T> v = tape.leaf(x, false);
    return tape.val(downsample_area(v, factor));
}

}  // namespace csattn
