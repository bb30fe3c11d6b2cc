#pragma once

#include "csattn/tensor.hpp"

namespace csattn {

// Procedural rain on a smooth value-noise background. Deterministic per
// (spec, seed); the degraded image is clamp(clean + streak layer).
struct RainSynthSpec {
    std::int64_t size = 32;  // square images
    int streaks_min = 4;
    int streaks_max = 12;
    double angle_min_deg = 60.0;
    double angle_max_deg = 120.0;
    double length_min = 8.0;
    double length_max = 24.0;
    double width_min = 0.6;
    double width_max = 1.4;
    double intensity_min = 0.15;
    double intensity_max = 0.45;

    void validate() const {
        if (size < 1) throw std::runtime_error("rain spec: size must be positive");
        if (streaks_min < 0 || streaks_max < streaks_min) throw std::runtime_error("rain spec: bad streak range");
        if (length_max < length_min || width_max < width_min || intensity_max < intensity_min ||
            angle_max_deg < angle_min_deg) {
            throw std::runtime_error("rain spec: empty parameter range");
        }
        if (width_min <= 0.0 || intensity_min < 0.0) throw std::runtime_error("rain spec: nonpositive width/intensity");
    }
};

template <typename T>
struct SynthPair {
    Tensor<T> degraded;  // (1,3,H,W)
    Tensor<T> clean;
};

namespace detail {

// Bilinear value noise on a coarse grid with ~8 px spacing.
template <typename T>
void value_noise_plane(Rng& rng, std::int64_t size, T* out) {
    const std::int64_t cell = 8;
    const std::int64_t nodes = size / cell + 2;
    std::vector<double> grid(static_cast<std::size_t>(nodes * nodes));
    for (auto& v : grid) v = rng.uniform(0.15, 0.85);
    for (std::int64_t y = 0; y < size; ++y) {
        const double gy = static_cast<double>(y) / static_cast<double>(cell);
        const std::int64_t y0 = static_cast<std::int64_t>(gy);
        const double fy = gy - static_cast<double>(y0);
        for (std::int64_t x = 0; x < size; ++x) {
            const double gx = static_cast<double>(x) / static_cast<double>(cell);
            const std::int64_t x0 = static_cast<std::int64_t>(gx);
            const double fx = gx - static_cast<double>(x0);
            const double v00 = grid[static_cast<std::size_t>(y0 * nodes + x0)];
            const double v01 = grid[static_cast<std::size_t>(y0 * nodes + x0 + 1)];
            const double v10 = grid[static_cast<std::size_t>((y0 + 1) * nodes + x0)];
            const double v11 = grid[static_cast<std::size_t>((y0 + 1) * nodes + x0 + 1)];
            const double top = v00 + (v01 - v00) * fx;
            const double bot = v10 + (v11 - v10) * fx;
            out[y * size + x] = static_cast<T>(top + (bot - top) * fy);
        }
    }
}

inline double dist_to_segment(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

}  // namespace detail

template <typename T>
SynthPair<T> synth_rain_pair(const RainSynthSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    const std::int64_t s = spec.size;
    const std::int64_t plane = s * s;

    SynthPair<T> pair;
    pair.clean = Tensor<T>(Shape{1, 3, s, s});
    for (int ch = 0; ch < 3; ++ch) {
        detail::value_noise_plane(rng, s, pair.clean.data.data() + ch * plane);
    }

    // Additive streak layer, shared across channels (rain is achromatic).
    std::vector<double> rain(static_cast<std::size_t>(plane), 0.0);
    const int count =
        spec.streaks_min + static_cast<int>(rng.uniform_int(static_cast<std::int64_t>(spec.streaks_max) -
                                                            spec.streaks_min + 1));
    for (int k = 0; k < count; ++k) {
        const double cx = rng.uniform(0.0, static_cast<double>(s));
        const double cy = rng.uniform(0.0, static_cast<double>(s));
        const double ang = rng.uniform(spec.angle_min_deg, spec.angle_max_deg) * 3.14159265358979323846 / 180.0;
        const double len = rng.uniform(spec.length_min, spec.length_max);
        const double width = rng.uniform(spec.width_min, spec.width_max);
        const double inten = rng.uniform(spec.intensity_min, spec.intensity_max);
        const double dx = std::cos(ang) * 0.5 * len, dy = -std::sin(ang) * 0.5 * len;
        const double ax = cx - dx, ay = cy - dy, bx = cx + dx, by = cy + dy;

        const std::int64_t x_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(ax, bx) - width - 1)));
        const std::int64_t x_hi = std::min<std::int64_t>(s - 1, static_cast<std::int64_t>(std::ceil(std::max(ax, bx) + width + 1)));
        const std::int64_t y_lo = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor(std::min(ay, by) - width - 1)));
        const std::int64_t y_hi = std::min<std::int64_t>(s - 1, static_cast<std::int64_t>(std::ceil(std::max(ay, by) + width + 1)));
        for (std::int64_t y = y_lo; y <= y_hi; ++y) {
            for (std::int64_t x = x_lo; x <= x_hi; ++x) {
                const double d = detail::dist_to_segment(static_cast<double>(x) + 0.5, static_cast<double>(y) + 0.5,
                                                         ax, ay, bx, by);
                const double cover = 1.0 - d / width;
                if (cover > 0.0) rain[static_cast<std::size_t>(y * s + x)] += inten * cover;
            }
        }
    }

    pair.degraded = Tensor<T>(Shape{1, 3, s, s});
    for (int ch = 0; ch < 3; ++ch) {
        const T* cp = pair.clean.data.data() + ch * plane;
        T* dp = pair.degraded.data.data() + ch * plane;
        for (std::int64_t i = 0; i < plane; ++i) {
            const double v = static_cast<double>(cp[i]) + rain[static_cast<std::size_t>(i)];
            dp[i] = static_cast<T>(std::clamp(v, 0.0, 1.0));
        }
    }
    return pair;
}

}  // namespace csattn
