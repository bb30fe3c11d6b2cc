#include "csattn/png_io.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace csattn {

namespace {

constexpr unsigned char kSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

std::uint32_t be32(const unsigned char* p) {
    return (static_cast<std::uint32_t>(p[0]) << 24) | (static_cast<std::uint32_t>(p[1]) << 16) |
           (static_cast<std::uint32_t>(p[2]) << 8) | static_cast<std::uint32_t>(p[3]);
}

void put_be32(std::vector<unsigned char>& v, std::uint32_t x) {
    v.push_back(static_cast<unsigned char>((x >> 24) & 0xFF));
    v.push_back(static_cast<unsigned char>((x >> 16) & 0xFF));
    v.push_back(static_cast<unsigned char>((x >> 8) & 0xFF));
    v.push_back(static_cast<unsigned char>(x & 0xFF));
}

std::vector<unsigned char> zlib_inflate(const std::vector<unsigned char>& in, std::size_t expected) {
    std::vector<unsigned char> out(expected);
    uLongf out_len = static_cast<uLongf>(expected);
    const int rc = uncompress(out.data(), &out_len, in.data(), static_cast<uLong>(in.size()));
    if (rc != Z_OK || out_len != expected) throw std::runtime_error("png: corrupt compressed data");
    return out;
}

std::vector<unsigned char> zlib_deflate(const std::vector<unsigned char>& in) {
    uLongf bound = compressBound(static_cast<uLong>(in.size()));
    std::vector<unsigned char> out(bound);
    const int rc = compress2(out.data(), &bound, in.data(), static_cast<uLong>(in.size()), 6);
    if (rc != Z_OK) throw std::runtime_error("png: deflate failed");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

// Undo per-scanline filters in place; bpp = bytes per pixel.
void unfilter(std::vector<unsigned char>& raw, std::int64_t height, std::int64_t row_bytes, std::int64_t bpp,
              std::vector<unsigned char>& out) {
    out.resize(static_cast<std::size_t>(height * row_bytes));
    for (std::int64_t y = 0; y < height; ++y) {
        const unsigned char filter = raw[static_cast<std::size_t>(y * (row_bytes + 1))];
        const unsigned char* src = raw.data() + y * (row_bytes + 1) + 1;
        unsigned char* dst = out.data() + y * row_bytes;
        const unsigned char* prev = y > 0 ? out.data() + (y - 1) * row_bytes : nullptr;
        switch (filter) {
            case 0:
                std::memcpy(dst, src, static_cast<std::size_t>(row_bytes));
                break;
            case 1:
                for (std::int64_t i = 0; i < row_bytes; ++i) {
                    const int left = i >= bpp ? dst[i - bpp] : 0;
                    dst[i] = static_cast<unsigned char>((src[i] + left) & 0xFF);
                }
                break;
            case 2:
                for (std::int64_t i = 0; i < row_bytes; ++i) {
                    const int up = prev ? prev[i] : 0;
                    dst[i] = static_cast<unsigned char>((src[i] + up) & 0xFF);
                }
                break;
            case 3:
                for (std::int64_t i = 0; i < row_bytes; ++i) {
                    const int left = i >= bpp ? dst[i - bpp] : 0;
                    const int up = prev ? prev[i] : 0;
                    dst[i] = static_cast<unsigned char>((src[i] + (left + up) / 2) & 0xFF);
                }
                break;
            case 4:
                for (std::int64_t i = 0; i < row_bytes; ++i) {
                    const int left = i >= bpp ? dst[i - bpp] : 0;
                    const int up = prev ? prev[i] : 0;
                    const int ul = (prev && i >= bpp) ? prev[i - bpp] : 0;
                    dst[i] = static_cast<unsigned char>((src[i] + paeth(left, up, ul)) & 0xFF);
                }
                break;
            default:
                throw std::runtime_error("png: unknown filter type " + std::to_string(filter));
        }
    }
}

void write_chunk(std::ofstream& f, const char type[4], const std::vector<unsigned char>& payload) {
    std::vector<unsigned char> head;
    put_be32(head, static_cast<std::uint32_t>(payload.size()));
    f.write(reinterpret_cast<const char*>(head.data()), 4);
    std::vector<unsigned char> body(type, type + 4);
    body.insert(body.end(), payload.begin(), payload.end());
    f.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    const std::uint32_t crc = static_cast<std::uint32_t>(::crc32(0L, body.data(), static_cast<uInt>(body.size())));
    std::vector<unsigned char> tail;
    put_be32(tail, crc);
    f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

Tensor<float> read_png_rgb(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("png: cannot open " + path);
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> buf(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(buf.data()), size);
    if (!f || size < 8 || std::memcmp(buf.data(), kSignature, 8) != 0) {
        throw std::runtime_error("png: not a PNG file: " + path);
    }

    std::int64_t width = 0, height = 0;
    int bit_depth = 0, color_type = 0;
    std::vector<unsigned char> idat;
    std::size_t pos = 8;
    bool saw_iend = false;
    while (pos + 8 <= buf.size()) {
        const std::uint32_t len = be32(buf.data() + pos);
        const char* type = reinterpret_cast<const char*>(buf.data() + pos + 4);
        if (pos + 12 + len > buf.size()) throw std::runtime_error("png: truncated chunk in " + path);
        const unsigned char* payload = buf.data() + pos + 8;
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw std::runtime_error("png: bad IHDR");
            width = be32(payload);
            height = be32(payload + 4);
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[10] != 0 || payload[11] != 0) throw std::runtime_error("png: unsupported compression/filter");
            if (payload[12] != 0) throw std::runtime_error("png: interlaced images are not supported");
            if (bit_depth != 8 && bit_depth != 16) {
                throw std::runtime_error("png: only 8/16-bit depths supported, got " + std::to_string(bit_depth));
            }
            if (color_type == 3) throw std::runtime_error("png: palette images are not supported");
            if (color_type != 0 && color_type != 2 && color_type != 4 && color_type != 6) {
                throw std::runtime_error("png: unsupported color type " + std::to_string(color_type));
            }
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), payload, payload + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0) throw std::runtime_error("png: missing IHDR in " + path);
    if (!saw_iend || idat.empty()) throw std::runtime_error("png: missing image data in " + path);

    const std::int64_t channels = color_type == 0 ? 1 : color_type == 2 ? 3 : color_type == 4 ? 2 : 4;
    const std::int64_t bytes_per_sample = bit_depth / 8;
    const std::int64_t bpp = channels * bytes_per_sample;
    const std::int64_t row_bytes = width * bpp;

    std::vector<unsigned char> raw = zlib_inflate(idat, static_cast<std::size_t>(height * (row_bytes + 1)));
    std::vector<unsigned char> pixels;
    unfilter(raw, height, row_bytes, bpp, pixels);

    Tensor<float> img(Shape{1, 3, height, width});
    const float scale = bit_depth == 8 ? 1.0f / 255.0f : 1.0f / 65535.0f;
    const std::int64_t plane = height * width;
    for (std::int64_t y = 0; y < height; ++y) {
        for (std::int64_t x = 0; x < width; ++x) {
            const unsigned char* px = pixels.data() + y * row_bytes + x * bpp;
            float rgb[3];
            auto sample = [&](std::int64_t c) {
                const unsigned char* sp = px + c * bytes_per_sample;
                const std::uint32_t v = bit_depth == 8
                                            ? sp[0]
                                            : (static_cast<std::uint32_t>(sp[0]) << 8) | sp[1];
                return static_cast<float>(v) * scale;
            };
            if (channels <= 2) {
                rgb[0] = rgb[1] = rgb[2] = sample(0);
            } else {
                rgb[0] = sample(0);
                rgb[1] = sample(1);
                rgb[2] = sample(2);
            }
            for (int c = 0; c < 3; ++c) img.data[static_cast<std::size_t>(c * plane + y * width + x)] = rgb[c];
        }
    }
    return img;
}

void write_png_rgb(const std::string& path, const Tensor<float>& img, int bit_depth) {
    if (img.rank() != 4 || img.shape[0] != 1 || img.shape[1] != 3) {
        throw std::runtime_error("png: writer expects a (1,3,H,W) tensor");
    }
    if (bit_depth != 8 && bit_depth != 16) throw std::runtime_error("png: bit depth must be 8 or 16");
    const std::int64_t height = img.shape[2], width = img.shape[3];
    const std::int64_t plane = height * width;
    const std::int64_t bytes_per_sample = bit_depth / 8;
    const std::int64_t row_bytes = width * 3 * bytes_per_sample;

    std::vector<unsigned char> raw(static_cast<std::size_t>(height * (row_bytes + 1)));
    const double maxv = bit_depth == 8 ? 255.0 : 65535.0;
    for (std::int64_t y = 0; y < height; ++y) {
        unsigned char* row = raw.data() + y * (row_bytes + 1);
        row[0] = 0;  // filter: none
        for (std::int64_t x = 0; x < width; ++x) {
            for (int c = 0; c < 3; ++c) {
                const double v = std::clamp(
                    static_cast<double>(img.data[static_cast<std::size_t>(c * plane + y * width + x)]), 0.0, 1.0);
                const std::uint32_t q = static_cast<std::uint32_t>(v * maxv + 0.5);
                unsigned char* dst = row + 1 + (x * 3 + c) * bytes_per_sample;
                if (bit_depth == 8) {
                    dst[0] = static_cast<unsigned char>(q);
                } else {
                    dst[0] = static_cast<unsigned char>((q >> 8) & 0xFF);
                    dst[1] = static_cast<unsigned char>(q & 0xFF);
                }
            }
        }
    }

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("png: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(kSignature), 8);

    std::vector<unsigned char> ihdr;
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr, static_cast<std::uint32_t>(height));
    ihdr.push_back(static_cast<unsigned char>(bit_depth));
    ihdr.push_back(2);  // RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    write_chunk(f, "IHDR", ihdr);
    write_chunk(f, "IDAT", zlib_deflate(raw));
    write_chunk(f, "IEND", {});
    if (!f) throw std::runtime_error("png: write failed: " + path);
}

}  // namespace csattn
