#pragma once

#include "csattn/net.hpp"

namespace csattn {

namespace detail {

// Reflected index without edge repetition (period 2n-2); degenerates to
// clamping for n == 1.
inline std::int64_t mirror_index(std::int64_t i, std::int64_t n) {
    if (n == 1) return 0;
    const std::int64_t period = 2 * (n - 1);
    std::int64_t m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - m;
}

}  // namespace detail

// Reflect-pads the right/bottom edges so H and W become multiples of `mult`.
template <typename T>
Tensor<T> pad_reflect_to_multiple(const Tensor<T>& img, std::int64_t mult) {
    const std::int64_t n = img.shape[0], c = img.shape[1], h = img.shape[2], w = img.shape[3];
    const std::int64_t ph = (h + mult - 1) / mult * mult;
    const std::int64_t pw = (w + mult - 1) / mult * mult;
    if (ph == h && pw == w) return img;
    Tensor<T> out(Shape{n, c, ph, pw});
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
        const T* src = img.data.data() + nc * h * w;
        T* dst = out.data.data() + nc * ph * pw;
        for (std::int64_t y = 0; y < ph; ++y) {
            const std::int64_t sy = detail::mirror_index(y, h);
            for (std::int64_t x = 0; x < pw; ++x) {
                dst[y * pw + x] = src[sy * w + detail::mirror_index(x, w)];
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> crop_topleft(const Tensor<T>& img, std::int64_t h, std::int64_t w) {
    const std::int64_t n = img.shape[0], c = img.shape[1], ph = img.shape[2], pw = img.shape[3];
    if (h == ph && w == pw) return img;
    Tensor<T> out(Shape{n, c, h, w});
    for (std::int64_t nc = 0; nc < n * c; ++nc) {
        const T* src = img.data.data() + nc * ph * pw;
        T* dst = out.data.data() + nc * h * w;
        for (std::int64_t y = 0; y < h; ++y) {
            std::memcpy(dst + y * w, src + y * pw, static_cast<std::size_t>(w) * sizeof(T));
        }
    }
    return out;
}

// Full-resolution restoration of one image of arbitrary size: reflect-pad to
// divisibility by 16, run the network, crop back.
template <typename T>
Tensor<T> infer_image(const Net<T>& net, const Tensor<T>& img) {
    if (img.rank() != 4 || img.shape[1] != 3) throw std::runtime_error("infer: expects (N,3,H,W)");
    const std::int64_t h = img.shape[2], w = img.shape[3];
    Tensor<T> padded = pad_reflect_to_multiple(img, 16);
    Tape<T> tape;
    std::vector<Var<T>> leaves = make_leaves(tape, net.params, false);
    Var<T> in = tape.leaf(std::move(padded), false);
    NetOutputs<T> out = forward_multiscale(in, net.idx, leaves, net.cfg);
    return crop_topleft(tape.val(out.full), h, w);
}

}  // namespace csattn
