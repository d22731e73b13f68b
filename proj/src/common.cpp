#include "floodbench/common.hpp"

#include <cstdlib>
#include <sstream>

namespace floodbench {

namespace {

uint64_t splitmix64(uint64_t& x) {
    uint64_t z = (x += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(uint64_t seed) {
    uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
}

uint64_t Rng::next() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

uint64_t Rng::index(uint64_t n) {
    // Rejection sampling over the largest multiple of n.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
        v = next();
    } while (v >= limit);
    return v % n;
}

double Rng::uniform(double a, double b) {
    const double u = static_cast<double>(next() >> 11) * 0x1.0p-53;
    return a + (b - a) * u;
}

int Rng::uniform_int(int lo, int hi) {
    return lo + static_cast<int>(index(static_cast<uint64_t>(hi - lo + 1)));
}

int max_threads() {
    static const int cached = [] {
        const char* env = std::getenv("FLOODBENCH_THREADS");
        if (!env) return 1;
        int v = std::atoi(env);
        return v < 1 ? 1 : v;
    }();
    return cached;
}

void Fnv1a::update(const void* data, size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h_ ^= p[i];
        h_ *= 1099511628211ull;
    }
}

void Fnv1a::update_u64(uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
    update(b, 8);
}

void Fnv1a::update_str(const std::string& s) {
    update_u64(s.size());
    update(s.data(), s.size());
}

std::string Fnv1a::hex() const {
    static const char* digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 0; i < 16; ++i) out[15 - i] = digits[(h_ >> (4 * i)) & 0xf];
    return out;
}

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

}  // namespace floodbench
