#pragma once

#include <cstring>
#include <map>
#include <string>

#include "npprov/io.hpp"
#include "npprov/params.hpp"
#include "npprov/tensor.hpp"

namespace npprov {

// Binary checkpoint layout, all integers little-endian:
//   "NPPV" | u32 version=1 | u32 config length | config bytes (key=value\n)
//   | u32 tensor count | per tensor: u16 name length, name bytes, u8 rank,
//     u32 dims..., u8 dtype (0=f32, 1=f64), raw little-endian payload

namespace ckptdetail {

inline void put_u16(std::string& out, uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}
inline void put_u32(std::string& out, uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
inline void put_f64(std::string& out, double d) {
    uint64_t v;
    std::memcpy(&v, &d, 8);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

struct Reader {
    const std::string& buf;
    size_t pos = 0;
    void need(size_t n) const {
        if (pos + n > buf.size())
            throw TruncatedError("checkpoint truncated at offset " + std::to_string(buf.size()) + ", need " +
                                 std::to_string(pos + n));
    }
    uint8_t u8() {
        need(1);
        return static_cast<uint8_t>(buf[pos++]);
    }
    uint16_t u16() {
        need(2);
        uint16_t v = static_cast<uint8_t>(buf[pos]) | (static_cast<uint16_t>(static_cast<uint8_t>(buf[pos + 1])) << 8);
        pos += 2;
        return v;
    }
    uint32_t u32() {
        need(4);
        uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)]);
        pos += 4;
        return v;
    }
    double f64() {
        need(8);
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)]);
        pos += 8;
        double d;
        std::memcpy(&d, &v, 8);
        return d;
    }
    float f32() {
        need(4);
        uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<uint8_t>(buf[pos + static_cast<size_t>(i)]);
        pos += 4;
        float f;
        std::memcpy(&f, &v, 4);
        return f;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace ckptdetail

inline void save_checkpoint(const ParamStore& params, const std::map<std::string, std::string>& config,
                            const std::string& path) {
    using namespace ckptdetail;
    std::string out;
    out += "NPPV";
    put_u32(out, 1);
    std::string cfg;
    for (const auto& [k, v] : config) cfg += k + "=" + v + "\n";
    put_u32(out, static_cast<uint32_t>(cfg.size()));
    out += cfg;
    put_u32(out, static_cast<uint32_t>(params.size()));
    for (size_t i = 0; i < params.size(); ++i) {
        const std::string& name = params.name(i);
        const Tensor& t = params.tensor(i);
        put_u16(out, static_cast<uint16_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.rank()));
        for (int64_t d : t.shape) put_u32(out, static_cast<uint32_t>(d));
        out.push_back(1);  // f64
        for (double v : t.data) put_f64(out, v);
    }
    atomic_write(path, out, /*binary=*/true);
}

struct Checkpoint {
    ParamStore params;
    std::map<std::string, std::string> config;
};

inline Checkpoint load_checkpoint(const std::string& path) {
    using namespace ckptdetail;
    const std::string raw = read_file(path, true);
    Reader r{raw};
    if (r.bytes(4) != "NPPV") throw BadMagicError("'" + path + "': not a checkpoint (bad magic)");
    const uint32_t version = r.u32();
    if (version != 1) throw BadVersionError("'" + path + "': unknown checkpoint version " + std::to_string(version));
    Checkpoint ck;
    const uint32_t cfg_len = r.u32();
    const std::string cfg = r.bytes(cfg_len);
    size_t start = 0;
    while (start < cfg.size()) {
        size_t nl = cfg.find('\n', start);
        if (nl == std::string::npos) nl = cfg.size();
        const std::string line = cfg.substr(start, nl - start);
        start = nl + 1;
        if (line.empty()) continue;
        const size_t eq = line.find('=');
        if (eq == std::string::npos) throw BadVersionError("'" + path + "': malformed config line '" + line + "'");
        ck.config[line.substr(0, eq)] = line.substr(eq + 1);
    }
    const uint32_t count = r.u32();
    for (uint32_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        const std::string name = r.bytes(name_len);
        const uint8_t rank = r.u8();
        Shape shape;
        for (uint8_t d = 0; d < rank; ++d) shape.push_back(static_cast<int64_t>(r.u32()));
        const uint8_t dtype = r.u8();
        if (dtype > 1) throw BadVersionError("'" + path + "': unknown dtype " + std::to_string(dtype));
        Tensor t(shape);
        for (int64_t j = 0; j < t.numel(); ++j) t[j] = dtype == 1 ? r.f64() : static_cast<double>(r.f32());
        ck.params.add(name, std::move(t));
    }
    return ck;
}

}  // namespace npprov
