#pragma once

#include <memory>

#include "csattn/dft.hpp"
#include "csattn/tape.hpp"

namespace csattn {

// ---------------------------------------------------------------------------
// L1 loss: mean absolute difference, gradient sign/n.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> l1_loss(Var<T> pred, Var<T> gt) {
    Tape<T>& tape = detail::same_tape(pred, gt);
    const Tensor<T>& p = tape.val(pred);
    const Tensor<T>& g = tape.val(gt);
    if (!p.same_shape(g)) {
        throw std::runtime_error("l1_loss: shape mismatch " + shape_str(p.shape) + " vs " + shape_str(g.shape));
    }
    const std::int64_t n = p.size();
    T acc = T(0);
    for (std::int64_t i = 0; i < n; ++i) acc += std::abs(p[i] - g[i]);
    Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(n));

    const bool rp = tape.requires_grad(pred), rg = tape.requires_grad(gt);
    std::function<void(Tape<T>&)> bwd;
    if (rp || rg) {
        const std::int32_t oid = tape.next_id(), pid = pred.id, gid = gt.id;
        bwd = [oid, pid, gid, rp, rg, n](Tape<T>& t) {
            const T gscale = t.grad_slot(oid)[0] / static_cast<T>(n);
            const Tensor<T>& pv = t.value_of(pid);
            const Tensor<T>& gv = t.value_of(gid);
            Tensor<T>* gp = rp ? &t.grad_slot(pid) : nullptr;
            Tensor<T>* gg = rg ? &t.grad_slot(gid) : nullptr;
            for (std::int64_t i = 0; i < n; ++i) {
                const T d = pv[i] - gv[i];
                const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
                if (gp) (*gp)[i] += gscale * s;
                if (gg) (*gg)[i] -= gscale * s;
            }
        };
    }
    return tape.emit(std::move(out), rp || rg, std::move(bwd), "l1_loss");
}

// ---------------------------------------------------------------------------
// Frequency loss: mean over all frequency bins and channels of |Re D| + |Im D|
// where D is the 2-D DFT of (pred - gt). FFT path on power-of-two extents,
// direct transform otherwise; force_direct pins the reference path.
// ---------------------------------------------------------------------------

template <typename T>
Var<T> frequency_loss(Var<T> pred, Var<T> gt, bool force_direct = false) {
    Tape<T>& tape = detail::same_tape(pred, gt);
    const Tensor<T>& p = tape.val(pred);
    const Tensor<T>& g = tape.val(gt);
    if (!p.same_shape(g)) {
        throw std::runtime_error("frequency_loss: shape mismatch " + shape_str(p.shape) + " vs " +
                                 shape_str(g.shape));
    }
    if (p.rank() != 4) throw std::runtime_error("frequency_loss: expects NCHW");
    const std::int64_t n = p.shape[0], c = p.shape[1], h = p.shape[2], w = p.shape[3];
    const std::int64_t plane = h * w;
    const std::int64_t planes = n * c;

    // Spectra of the difference, kept for the backward pass.
    auto spec_re = std::make_shared<std::vector<T>>(static_cast<std::size_t>(planes * plane));
    auto spec_im = std::make_shared<std::vector<T>>(static_cast<std::size_t>(planes * plane));
    std::vector<T> diff(static_cast<std::size_t>(plane));
    T acc = T(0);
    for (std::int64_t pl = 0; pl < planes; ++pl) {
        const T* pp = p.data.data() + pl * plane;
        const T* gp = g.data.data() + pl * plane;
        for (std::int64_t i = 0; i < plane; ++i) diff[static_cast<std::size_t>(i)] = pp[i] - gp[i];
        T* re = spec_re->data() + pl * plane;
        T* im = spec_im->data() + pl * plane;
        dft2d(diff.data(), static_cast<const T*>(nullptr), h, w, re, im, force_direct);
        for (std::int64_t i = 0; i < plane; ++i) acc += std::abs(re[i]) + std::abs(im[i]);
    }
    const std::int64_t total = planes * plane;
    Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(total));

    const bool rp = tape.requires_grad(pred), rg = tape.requires_grad(gt);
    std::function<void(Tape<T>&)> bwd;
    if (rp || rg) {
        const std::int32_t oid = tape.next_id(), pid = pred.id, gid = gt.id;
        bwd = [oid, pid, gid, rp, rg, spec_re, spec_im, planes, plane, h, w, total, force_direct](Tape<T>& t) {
            const T gscale = t.grad_slot(oid)[0] / static_cast<T>(total);
            Tensor<T>* gp = rp ? &t.grad_slot(pid) : nullptr;
            Tensor<T>* gg = rg ? &t.grad_slot(gid) : nullptr;
            std::vector<T> sgn_re(static_cast<std::size_t>(plane));
            std::vector<T> sgn_im(static_cast<std::size_t>(plane));
            std::vector<T> adj_re(static_cast<std::size_t>(plane));
            std::vector<T> adj_im(static_cast<std::size_t>(plane));
            for (std::int64_t pl = 0; pl < planes; ++pl) {
                const T* re = spec_re->data() + pl * plane;
                const T* im = spec_im->data() + pl * plane;
                for (std::int64_t i = 0; i < plane; ++i) {
                    sgn_re[static_cast<std::size_t>(i)] = re[i] > T(0) ? T(1) : (re[i] < T(0) ? T(-1) : T(0));
                    // conjugated sign spectrum feeds the forward transform;
                    // Re(DFT(conj S)) equals the adjoint we need.
                    sgn_im[static_cast<std::size_t>(i)] = -(im[i] > T(0) ? T(1) : (im[i] < T(0) ? T(-1) : T(0)));
                }
                dft2d(sgn_re.data(), sgn_im.data(), h, w, adj_re.data(), adj_im.data(), force_direct);
                for (std::int64_t i = 0; i < plane; ++i) {
                    const T v = gscale * adj_re[static_cast<std::size_t>(i)];
                    if (gp) (*gp)[pl * plane + i] += v;
                    if (gg) (*gg)[pl * plane + i] -= v;
                }
            }
        };
    }
    return tape.emit(std::move(out), rp || rg, std::move(bwd), "frequency_loss");
}

// ---------------------------------------------------------------------------
// Multi-scale training loss: sum_s w_s * (l1 + lambda * freq).
// ---------------------------------------------------------------------------

struct LossWeights {
    double lambda_freq = 0.1;
    std::array<double, 3> scale = {1.0, 1.0, 1.0};

    void validate() const {
        if (lambda_freq < 0.0) throw std::runtime_error("loss weights: lambda_freq must be >= 0");
        for (double wv : scale) {
            if (wv < 0.0) throw std::runtime_error("loss weights: scale weights must be >= 0");
        }
    }
};

template <typename T>
struct MultiscaleLoss {
    Var<T> total;    // sum_s w_s * (l1_s + lambda * freq_s)
    Var<T> l1_part;  // sum_s w_s * l1_s
    Var<T> freq_part;
};

template <typename T>
MultiscaleLoss<T> multiscale_loss(const std::array<Var<T>, 3>& preds, const std::array<Var<T>, 3>& gts,
                                  const LossWeights& w) {
    w.validate();
    Var<T> l1_part, freq_part;
    for (int s = 0; s < 3; ++s) {
        Var<T> l1s = scale(l1_loss(preds[static_cast<std::size_t>(s)], gts[static_cast<std::size_t>(s)]),
                           static_cast<T>(w.scale[static_cast<std::size_t>(s)]));
        Var<T> fqs = scale(frequency_loss(preds[static_cast<std::size_t>(s)], gts[static_cast<std::size_t>(s)]),
                           static_cast<T>(w.scale[static_cast<std::size_t>(s)]));
        l1_part = s == 0 ? l1s : add(l1_part, l1s);
        freq_part = s == 0 ? fqs : add(freq_part, fqs);
    }
    MultiscaleLoss<T> out;
    out.l1_part = l1_part;
    out.freq_part = freq_part;
    out.total = add(l1_part, scale(freq_part, static_cast<T>(w.lambda_freq)));
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation metrics on plain tensors (computed in double).
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
double clamped_mse(const Tensor<T>& a, const Tensor<T>& b, double max_val) {
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double av = std::clamp(static_cast<double>(a[i]), 0.0, max_val);
        const double bv = std::clamp(static_cast<double>(b[i]), 0.0, max_val);
        acc += (av - bv) * (av - bv);
    }
    return acc / static_cast<double>(a.size());
}

}  // namespace detail

// Peak signal-to-noise ratio in dB; values clamped to [0, max_val] first.
// Identical inputs report the +inf sentinel.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double max_val = 1.0) {
    if (!a.same_shape(b)) throw std::runtime_error("psnr: shape mismatch");
    const double mse = detail::clamped_mse(a, b, max_val);
    if (mse == 0.0) return std::numeric_limits<double>::infinity();
    return 10.0 * std::log10(max_val * max_val / mse);
}

template <typename T>
double mae(const Tensor<T>& a, const Tensor<T>& b, double max_val = 1.0) {
    if (!a.same_shape(b)) throw std::runtime_error("mae: shape mismatch");
    double acc = 0.0;
    for (std::int64_t i = 0; i < a.size(); ++i) {
        const double av = std::clamp(static_cast<double>(a[i]), 0.0, max_val);
        const double bv = std::clamp(static_cast<double>(b[i]), 0.0, max_val);
        acc += std::abs(av - bv);
    }
    return acc / static_cast<double>(a.size());
}

// Single-scale SSIM, 11x11 Gaussian window sigma 1.5, K1=0.01, K2=0.03, L=1.
// Valid-window mean, averaged over channels and batch.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
    if (!a.same_shape(b)) throw std::runtime_error("ssim: shape mismatch");
    if (a.rank() != 4) throw std::runtime_error("ssim: expects NCHW");
    const std::int64_t n = a.shape[0], c = a.shape[1], h = a.shape[2], w = a.shape[3];
    constexpr std::int64_t win = 11;
    if (h < win || w < win) throw std::runtime_error("ssim: image smaller than 11x11 window");

    double kernel[win * win];
    {
        const double sigma = 1.5;
        double sum = 0.0;
        for (std::int64_t y = 0; y < win; ++y) {
            for (std::int64_t x = 0; x < win; ++x) {
                const double dy = static_cast<double>(y - win / 2);
                const double dx = static_cast<double>(x - win / 2);
                const double v = std::exp(-(dy * dy + dx * dx) / (2.0 * sigma * sigma));
                kernel[y * win + x] = v;
                sum += v;
            }
        }
        for (auto& v : kernel) v /= sum;
    }

    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    const std::int64_t plane = h * w;
    double total = 0.0;
    std::int64_t windows = 0;
    for (std::int64_t pl = 0; pl < n * c; ++pl) {
        const T* pa = a.data.data() + pl * plane;
        const T* pb = b.data.data() + pl * plane;
        for (std::int64_t oy = 0; oy + win <= h; ++oy) {
            for (std::int64_t ox = 0; ox + win <= w; ++ox) {
                double mu_a = 0.0, mu_b = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
                for (std::int64_t y = 0; y < win; ++y) {
                    for (std::int64_t x = 0; x < win; ++x) {
                        const double kv = kernel[y * win + x];
                        const double av = static_cast<double>(pa[(oy + y) * w + ox + x]);
                        const double bv = static_cast<double>(pb[(oy + y) * w + ox + x]);
                        mu_a += kv * av;
                        mu_b += kv * bv;
                        saa += kv * av * av;
                        sbb += kv * bv * bv;
                        sab += kv * av * bv;
                    }
                }
                const double var_a = saa - mu_a * mu_a;
                const double var_b = sbb - mu_b * mu_b;
                const double cov = sab - mu_a * mu_b;
                const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
                const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
                total += num / den;
                ++windows;
            }
        }
    }
    return total / static_cast<double>(windows);
}

// ITU-R BT.601 full-range luma.
template <typename T>
Tensor<T> rgb_to_y(const Tensor<T>& img) {
    if (img.rank() != 4 || img.shape[1] != 3) throw std::runtime_error("rgb_to_y: expects (N,3,H,W)");
    const std::int64_t n = img.shape[0], h = img.shape[2], w = img.shape[3];
    const std::int64_t plane = h * w;
    Tensor<T> out(Shape{n, 1, h, w});
    for (std::int64_t ni = 0; ni < n; ++ni) {
        const T* r = img.data.data() + (ni * 3 + 0) * plane;
        const T* g = img.data.data() + (ni * 3 + 1) * plane;
        const T* b = img.data.data() + (ni * 3 + 2) * plane;
        T* y = out.data.data() + ni * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            y[i] = static_cast<T>(0.299) * r[i] + static_cast<T>(0.587) * g[i] + static_cast<T>(0.114) * b[i];
        }
    }
    return out;
}

}  // namespace csattn
