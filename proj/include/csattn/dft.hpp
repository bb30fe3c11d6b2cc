#pragma once

#include <complex>

#include "csattn/tensor.hpp"

namespace csattn {

inline bool is_pow2(std::int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

namespace detail {

// Iterative radix-2 Cooley-Tukey, unnormalized, in place.
template <typename T>
void fft_pow2(std::complex<T>* a, std::int64_t n, bool inverse) {
    for (std::int64_t i = 1, j = 0; i < n; ++i) {
        std::int64_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::int64_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 2.0 : -2.0) * 3.14159265358979323846 / static_cast<double>(len);
        const std::complex<T> wl(static_cast<T>(std::cos(ang)), static_cast<T>(std::sin(ang)));
        for (std::int64_t i = 0; i < n; i += len) {
            std::complex<T> w(T(1), T(0));
            for (std::int64_t j = 0; j < len / 2; ++j) {
                const std::complex<T> u = a[i + j];
                const std::complex<T> v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

// 2-D unnormalized forward DFT of a complex plane, straightforward O(N^2)
// quadruple loop. Reference path; also the general-size fallback.
template <typename T>
void dft2d_direct(const T* re_in, const T* im_in, std::int64_t h, std::int64_t w, T* re_out, T* im_out) {
    const double two_pi = 2.0 * 3.14159265358979323846;
    for (std::int64_t u = 0; u < h; ++u) {
        for (std::int64_t v = 0; v < w; ++v) {
            double acc_re = 0.0, acc_im = 0.0;
            for (std::int64_t y = 0; y < h; ++y) {
                for (std::int64_t x = 0; x < w; ++x) {
                    const double theta = two_pi * (static_cast<double>(u * y) / static_cast<double>(h) +
                                                   static_cast<double>(v * x) / static_cast<double>(w));
                    const double c = std::cos(theta), s = std::sin(theta);
                    const double xr = static_cast<double>(re_in[y * w + x]);
                    const double xi = im_in ? static_cast<double>(im_in[y * w + x]) : 0.0;
                    // (xr + i xi) * (cos - i sin)
                    acc_re += xr * c + xi * s;
                    acc_im += -xr * s + xi * c;
                }
            }
            re_out[u * w + v] = static_cast<T>(acc_re);
            im_out[u * w + v] = static_cast<T>(acc_im);
        }
    }
}

// 2-D unnormalized forward DFT via row/column radix-2 FFTs. Power-of-two
// extents only.
template <typename T>
void dft2d_fft(const T* re_in, const T* im_in, std::int64_t h, std::int64_t w, T* re_out, T* im_out) {
    if (!is_pow2(h) || !is_pow2(w)) throw std::runtime_error("dft2d_fft: extents must be powers of two");
    std::vector<std::complex<T>> buf(static_cast<std::size_t>(h * w));
    for (std::int64_t i = 0; i < h * w; ++i) {
        buf[static_cast<std::size_t>(i)] = std::complex<T>(re_in[i], im_in ? im_in[i] : T(0));
    }
    for (std::int64_t y = 0; y < h; ++y) detail::fft_pow2(buf.data() + y * w, w, false);
    std::vector<std::complex<T>> col(static_cast<std::size_t>(h));
    for (std::int64_t x = 0; x < w; ++x) {
        for (std::int64_t y = 0; y < h; ++y) col[static_cast<std::size_t>(y)] = buf[static_cast<std::size_t>(y * w + x)];
        detail::fft_pow2(col.data(), h, false);
        for (std::int64_t y = 0; y < h; ++y) buf[static_cast<std::size_t>(y * w + x)] = col[static_cast<std::size_t>(y)];
    }
    for (std::int64_t i = 0; i < h * w; ++i) {
        re_out[i] = buf[static_cast<std::size_t>(i)].real();
        im_out[i] = buf[static_cast<std::size_t>(i)].imag();
    }
}

// Production dispatch: FFT when both extents are powers of two, otherwise
// the direct transform.
template <typename T>
void dft2d(const T* re_in, const T* im_in, std::int64_t h, std::int64_t w, T* re_out, T* im_out,
           bool force_direct = false) {
    if (!force_direct && is_pow2(h) && is_pow2(w)) {
        dft2d_fft(re_in, im_in, h, w, re_out, im_out);
    } else {
        dft2d_direct(re_in, im_in, h, w, re_out, im_out);
    }
}

}  // namespace csattn
