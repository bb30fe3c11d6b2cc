#pragma once

#include <filesystem>

#include "csattn/png_io.hpp"
#include "csattn/synth.hpp"

namespace csattn {

struct Sample {
    Tensor<float> degraded;  // (1,3,H,W)
    Tensor<float> clean;
};

// Paired degraded/clean images, either generated on the fly or loaded from
// two directories with matching PNG filenames.
class PairDataset {
public:
    static PairDataset synth(const RainSynthSpec& spec, std::int64_t count, std::uint64_t seed) {
        spec.validate();
        if (count < 1) throw std::runtime_error("dataset: synth count must be >= 1");
        PairDataset ds;
        for (std::int64_t i = 0; i < count; ++i) {
            auto pair = synth_rain_pair<float>(spec, seed + static_cast<std::uint64_t>(i));
            ds.items_.push_back(Sample{std::move(pair.degraded), std::move(pair.clean)});
        }
        return ds;
    }

    static PairDataset from_dirs(const std::string& degraded_dir, const std::string& clean_dir,
                                 std::int64_t min_size) {
        namespace fs = std::filesystem;
        if (!fs::is_directory(degraded_dir)) throw std::runtime_error("dataset: not a directory: " + degraded_dir);
        if (!fs::is_directory(clean_dir)) throw std::runtime_error("dataset: not a directory: " + clean_dir);

        std::vector<std::string> names;
        for (const auto& entry : fs::directory_iterator(degraded_dir)) {
            if (entry.is_regular_file() && entry.path().extension() == ".png") {
                names.push_back(entry.path().filename().string());
            }
        }
        std::sort(names.begin(), names.end());
        if (names.empty()) throw std::runtime_error("dataset: no PNG files in " + degraded_dir + " (empty dataset)");

        PairDataset ds;
        for (const auto& name : names) {
            const fs::path clean_path = fs::path(clean_dir) / name;
            if (!fs::exists(clean_path)) {
                throw std::runtime_error("dataset: unmatched filename, no clean pair for " + name);
            }
            Sample s;
            s.degraded = read_png_rgb((fs::path(degraded_dir) / name).string());
            s.clean = read_png_rgb(clean_path.string());
            if (!s.degraded.same_shape(s.clean)) {
                throw std::runtime_error("dataset: size mismatch between degraded and clean " + name);
            }
            if (s.degraded.shape[2] < min_size || s.degraded.shape[3] < min_size) {
                throw std::runtime_error("dataset: image " + name + " smaller than patch size " +
                                         std::to_string(min_size));
            }
            ds.items_.push_back(std::move(s));
        }
        return ds;
    }

    std::size_t size() const { return items_.size(); }
    const Sample& at(std::size_t i) const { return items_[i]; }

    // Seeded random image pick, crop and horizontal flip. Draw order is
    // fixed: index, y offset, x offset, flip.
    Sample sample_patch(Rng& rng, std::int64_t patch) const {
        const std::size_t idx = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(items_.size())));
        const Sample& src = items_[idx];
        const std::int64_t h = src.degraded.shape[2], w = src.degraded.shape[3];
        const std::int64_t oy = rng.uniform_int(h - patch + 1);
        const std::int64_t ox = rng.uniform_int(w - patch + 1);
        const bool flip = rng.coin();

        Sample out;
        out.degraded = crop_flip(src.degraded, oy, ox, patch, flip);
        out.clean = crop_flip(src.clean, oy, ox, patch, flip);
        return out;
    }

private:
    static Tensor<float> crop_flip(const Tensor<float>& img, std::int64_t oy, std::int64_t ox, std::int64_t patch,
                                   bool flip) {
        const std::int64_t c = img.shape[1], h = img.shape[2], w = img.shape[3];
        (void)h;
        Tensor<float> out(Shape{1, c, patch, patch});
        for (std::int64_t ch = 0; ch < c; ++ch) {
            for (std::int64_t y = 0; y < patch; ++y) {
                const float* src = img.data.data() + (ch * h + oy + y) * w + ox;
                float* dst = out.data.data() + (ch * patch + y) * patch;
                if (flip) {
                    for (std::int64_t x = 0; x < patch; ++x) dst[x] = src[patch - 1 - x];
                } else {
                    std::memcpy(dst, src, static_cast<std::size_t>(patch) * sizeof(float));
                }
            }
        }
        return out;
    }

    std::vector<Sample> items_;
};

// Stacks (1,C,H,W) samples into one (B,C,H,W) batch.
inline Tensor<float> stack_batch(const std::vector<const Tensor<float>*>& items) {
    if (items.empty()) throw std::runtime_error("stack_batch: empty batch");
    const Shape& s0 = items[0]->shape;
    Tensor<float> out(Shape{static_cast<std::int64_t>(items.size()), s0[1], s0[2], s0[3]});
    const std::int64_t per = s0[1] * s0[2] * s0[3];
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i]->shape != s0) throw std::runtime_error("stack_batch: inconsistent shapes");
        std::memcpy(out.data.data() + static_cast<std::int64_t>(i) * per, items[i]->data.data(),
                    static_cast<std::size_t>(per) * sizeof(float));
    }
    return out;
}

}  // namespace csattn
