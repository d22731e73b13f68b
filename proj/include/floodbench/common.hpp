#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace floodbench {

// Error taxonomy. The CLI maps these onto exit codes:
// ConfigError -> 2, DataError -> 3, NumericError -> 4.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};
struct ContractError : std::runtime_error {
    explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// Deterministic RNG (splitmix64 seeding + xoshiro256**). Self-contained so
// that seeded outputs are identical across standard library versions.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next();
    // Uniform in [0, n), n > 0. Unbiased via rejection.
    uint64_t index(uint64_t n);
    // Uniform real in [a, b).
    double uniform(double a, double b);
    int uniform_int(int lo, int hi);  // inclusive bounds

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t s_[4];
};

// Intra-op parallelism cap from FLOODBENCH_THREADS. The implementation is
// single-threaded (the contract's baseline); the cap is parsed and clamped so
// configs carry it without effect on results.
int max_threads();

// FNV-1a 64-bit streaming hash for dataset digests.
class Fnv1a {
public:
    void update(const void* data, size_t n);
    void update_u64(uint64_t v);
    void update_str(const std::string& s);
    uint64_t digest() const { return h_; }
    std::string hex() const;

private:
    uint64_t h_ = 1469598103934665603ull;
};

std::string shape_str(const std::vector<int64_t>& shape);

}  // namespace floodbench
