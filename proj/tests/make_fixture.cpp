// Tiny helper for the CLI smoke test: writes a synthetic rainy PNG, or
// verifies the shape of an existing one.

#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "csattn/png_io.hpp"
#include "csattn/synth.hpp"

using namespace csattn;

int main(int argc, char** argv) {
    try {
        if (argc == 5 && std::strcmp(argv[1], "--check") == 0) {
            Tensor<float> img = read_png_rgb(argv[2]);
            const std::int64_t h = std::atoll(argv[3]), w = std::atoll(argv[4]);
            if (img.shape[2] != h || img.shape[3] != w) {
                std::fprintf(stderr, "shape mismatch: got %lldx%lld, want %lldx%lld\n",
                             static_cast<long long>(img.shape[2]), static_cast<long long>(img.shape[3]),
                             static_cast<long long>(h), static_cast<long long>(w));
                return 1;
            }
            return 0;
        }
        if (argc == 3) {
            RainSynthSpec spec;
            spec.size = std::atoll(argv[2]);
            auto pair = synth_rain_pair<float>(spec, 2024);
            write_png_rgb(argv[1], pair.degraded, 8);
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "fixture error: %s\n", e.what());
        return 1;
    }
    std::fprintf(stderr, "usage: make_fixture <out.png> <size> | make_fixture --check <png> <h> <w>\n");
    return 2;
}
