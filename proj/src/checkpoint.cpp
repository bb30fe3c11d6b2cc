#include "csattn/checkpoint.hpp"

#include <zlib.h>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>

namespace csattn {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'A', 'T'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

void put_u32(std::vector<unsigned char>& buf, std::uint32_t v) {
    buf.push_back(static_cast<unsigned char>(v & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    buf.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

void put_f32(std::vector<unsigned char>& buf, float f) {
    put_u32(buf, std::bit_cast<std::uint32_t>(f));
}

struct Reader {
    const unsigned char* p;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > len) throw std::runtime_error("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = static_cast<std::uint32_t>(p[pos]) | (static_cast<std::uint32_t>(p[pos + 1]) << 8) |
                          (static_cast<std::uint32_t>(p[pos + 2]) << 16) |
                          (static_cast<std::uint32_t>(p[pos + 3]) << 24);
        pos += 4;
        return v;
    }
    std::uint8_t u8() {
        need(1);
        return p[pos++];
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string str(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(p + pos), n);
        pos += n;
        return s;
    }
};

std::vector<unsigned char> serialize(const ParamStore<float>& params) {
    std::vector<unsigned char> buf;
    buf.insert(buf.end(), kMagic, kMagic + 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(params.count()));
    for (std::size_t i = 0; i < params.count(); ++i) {
        const std::string& name = params.names[i];
        const Tensor<float>& t = params.tensors[i];
        put_u32(buf, static_cast<std::uint32_t>(name.size()));
        buf.insert(buf.end(), name.begin(), name.end());
        put_u32(buf, static_cast<std::uint32_t>(t.shape.size()));
        for (std::int64_t e : t.shape) put_u32(buf, static_cast<std::uint32_t>(e));
        buf.push_back(kDtypeF32);
        for (float v : t.data) put_f32(buf, v);
    }
    const std::uint32_t crc =
        static_cast<std::uint32_t>(::crc32(0L, buf.data(), static_cast<uInt>(buf.size())));
    put_u32(buf, crc);
    return buf;
}

ParamStore<float> deserialize(const std::vector<unsigned char>& buf, const std::string& path) {
    if (buf.size() < 16) throw std::runtime_error("checkpoint: file too small: " + path);
    const std::uint32_t stored_crc = static_cast<std::uint32_t>(buf[buf.size() - 4]) |
                                     (static_cast<std::uint32_t>(buf[buf.size() - 3]) << 8) |
                                     (static_cast<std::uint32_t>(buf[buf.size() - 2]) << 16) |
                                     (static_cast<std::uint32_t>(buf[buf.size() - 1]) << 24);
    const std::uint32_t actual_crc =
        static_cast<std::uint32_t>(::crc32(0L, buf.data(), static_cast<uInt>(buf.size() - 4)));
    if (stored_crc != actual_crc) throw std::runtime_error("checkpoint: CRC mismatch, file is corrupt: " + path);

    Reader r{buf.data(), buf.size() - 4};
    if (std::memcmp(r.p, kMagic, 4) != 0) throw std::runtime_error("checkpoint: bad magic: " + path);
    r.pos = 4;
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
        throw std::runtime_error("checkpoint: unsupported format version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    ParamStore<float> ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.str(name_len);
        const std::uint32_t rank = r.u32();
        Shape shape;
        std::int64_t n = 1;
        for (std::uint32_t d = 0; d < rank; ++d) {
            const std::uint32_t e = r.u32();
            if (e == 0) throw std::runtime_error("checkpoint: zero extent in tensor " + name);
            shape.push_back(static_cast<std::int64_t>(e));
            n *= e;
        }
        const std::uint8_t dtype = r.u8();
        if (dtype != kDtypeF32) {
            throw std::runtime_error("checkpoint: unsupported dtype code " + std::to_string(dtype));
        }
        Tensor<float> t(shape);
        for (std::int64_t j = 0; j < n; ++j) t[j] = r.f32();
        ps.add(std::move(name), std::move(t));
    }
    if (r.pos != r.len) throw std::runtime_error("checkpoint: trailing bytes: " + path);
    return ps;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore<float>& params) {
    const std::vector<unsigned char> buf = serialize(params);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw std::runtime_error("checkpoint: write failed: " + path);
}

ParamStore<float> load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    if (!f) throw std::runtime_error("checkpoint: cannot open: " + path);
    const std::streamsize size = f.tellg();
    f.seekg(0);
    std::vector<unsigned char> buf(static_cast<std::size_t>(size));
    f.read(reinterpret_cast<char*>(buf.data()), size);
    if (!f) throw std::runtime_error("checkpoint: read failed: " + path);
    return deserialize(buf, path);
}

void load_checkpoint_into(const std::string& path, ParamStore<float>& params) {
    ParamStore<float> loaded = load_checkpoint(path);
    if (loaded.count() != params.count()) {
        throw std::runtime_error("checkpoint: tensor count mismatch (" + std::to_string(loaded.count()) + " vs " +
                                 std::to_string(params.count()) + ")");
    }
    for (std::size_t i = 0; i < loaded.count(); ++i) {
        const std::int64_t dst = params.find(loaded.names[i]);
        if (dst < 0) throw std::runtime_error("checkpoint: unknown tensor name " + loaded.names[i]);
        if (params.tensors[static_cast<std::size_t>(dst)].shape != loaded.tensors[i].shape) {
            throw std::runtime_error("checkpoint: shape mismatch for " + loaded.names[i]);
        }
        params.tensors[static_cast<std::size_t>(dst)] = std::move(loaded.tensors[i]);
    }
}

}  // namespace csattn
