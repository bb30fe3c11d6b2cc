#pragma once

#include <string>

#include "csattn/tensor.hpp"

namespace csattn {

// Reads an 8- or 16-bit PNG (grayscale, RGB, with or without alpha) into a
// (1,3,H,W) tensor in [0,1]. Palette and interlaced images are rejected.
Tensor<float> read_png_rgb(const std::string& path);

// Writes a (1,3,H,W) tensor in [0,1] as an RGB PNG, 8 or 16 bits per sample.
// Values are clamped before quantization.
void write_png_rgb(const std::string& path, const Tensor<float>& img, int bit_depth = 8);

}  // namespace csattn
