#include "floodbench/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace floodbench {

namespace {

constexpr char kMagic[8] = {'N', 'T', 'C', 'K', 'P', 'T', '0', '1'};

void put_bytes(std::string& buf, const void* p, size_t n) {
    buf.append(static_cast<const char*>(p), n);
}

void put_u16(std::string& buf, uint16_t v) {
    const char b[2] = {static_cast<char>(v & 0xff), static_cast<char>(v >> 8)};
    buf.append(b, 2);
}

void put_u32(std::string& buf, uint32_t v) {
    const char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                       static_cast<char>((v >> 16) & 0xff),
                       static_cast<char>((v >> 24) & 0xff)};
    buf.append(b, 4);
}

void put_f32(std::string& buf, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(buf, bits);
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    void bytes(void* out, size_t n) {
        if (pos_ + n > buf_.size())
            throw DataError("checkpoint " + path_ + " is truncated");
        std::memcpy(out, buf_.data() + pos_, n);
        pos_ += n;
    }
    uint16_t u16() {
        uint8_t b[2];
        bytes(b, 2);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
    uint32_t u32() {
        uint8_t b[4];
        bytes(b, 4);
        return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
               (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    }
    uint8_t u8() {
        uint8_t b;
        bytes(&b, 1);
        return b;
    }
    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    bool done() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string path_;
    size_t pos_ = 0;
};

}  // namespace

template <typename S>
void save_checkpoint(const std::string& path, const NamedParams<S>& tensors) {
    std::string buf;
    put_bytes(buf, kMagic, 8);
    put_u32(buf, static_cast<uint32_t>(tensors.size()));
    for (const auto& [name, t] : tensors) {
        if (name.size() > 0xffff)
            throw ContractError("checkpoint tensor name too long: " + name);
        put_u16(buf, static_cast<uint16_t>(name.size()));
        put_bytes(buf, name.data(), name.size());
        const auto& shape = t.shape();
        if (shape.size() > 0xff)
            throw ContractError("checkpoint tensor rank too large for " + name);
        buf.push_back(static_cast<char>(shape.size()));
        for (int64_t d : shape) put_u32(buf, static_cast<uint32_t>(d));
        for (S v : t.value()) put_f32(buf, static_cast<float>(v));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot open " + path + " for writing");
    f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!f) throw DataError("short write to " + path);
}

std::vector<RawTensor> read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open checkpoint " + path);
    std::string buf((std::istreambuf_iterator<char>(f)),
                    std::istreambuf_iterator<char>());
    Reader r(buf, path);
    char magic[8];
    r.bytes(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw DataError("checkpoint " + path + " has a bad magic header");
    const uint32_t count = r.u32();
    std::vector<RawTensor> out;
    out.reserve(count);
    for (uint32_t i = 0; i < count; ++i) {
        RawTensor t;
        const uint16_t nlen = r.u16();
        t.name.resize(nlen);
        if (nlen) r.bytes(t.name.data(), nlen);
        const uint8_t rank = r.u8();
        int64_t numel = 1;
        for (uint8_t d = 0; d < rank; ++d) {
            const uint32_t dim = r.u32();
            if (dim == 0) throw DataError("checkpoint " + path + " has a zero dim");
            t.shape.push_back(static_cast<int64_t>(dim));
            numel *= dim;
        }
        t.data.resize(static_cast<size_t>(numel));
        for (int64_t j = 0; j < numel; ++j) t.data[static_cast<size_t>(j)] = r.f32();
        out.push_back(std::move(t));
    }
    if (!r.done()) throw DataError("checkpoint " + path + " has trailing bytes");
    return out;
}

template <typename S>
void load_checkpoint(const std::string& path, NamedParams<S>& tensors) {
    const std::vector<RawTensor> raw = read_checkpoint(path);
    if (raw.size() != tensors.size())
        throw ContractError("checkpoint " + path + " holds " +
                            std::to_string(raw.size()) + " tensors, model expects " +
                            std::to_string(tensors.size()));
    for (size_t i = 0; i < raw.size(); ++i) {
        auto& [name, t] = tensors[i];
        if (raw[i].name != name)
            throw ContractError("checkpoint tensor " + std::to_string(i) + " is '" +
                                raw[i].name + "', model expects '" + name + "'");
        if (raw[i].shape != t.shape())
            throw ContractError("checkpoint tensor '" + name + "' has shape " +
                                shape_str(raw[i].shape) + ", model expects " +
                                shape_str(t.shape()));
        std::vector<S>& v = t.value();
        for (size_t j = 0; j < v.size(); ++j) v[j] = static_cast<S>(raw[i].data[j]);
    }
}

template void save_checkpoint<float>(const std::string&, const NamedParams<float>&);
template void save_checkpoint<double>(const std::string&, const NamedParams<double>&);
template void load_checkpoint<float>(const std::string&, NamedParams<float>&);
template void load_checkpoint<double>(const std::string&, NamedParams<double>&);

}  // namespace floodbench
