#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace mmgcd {

// ---------------------------------------------------------------------------
// Error types
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

struct NotSpdError : Error {
    explicit NotSpdError(const std::string& what) : Error(what) {}
};
struct DimensionMismatchError : Error {
    explicit DimensionMismatchError(const std::string& what) : Error(what) {}
};
struct DegenerateInputError : Error {
    explicit DegenerateInputError(const std::string& what) : Error(what) {}
};
struct DegenerateBatchError : Error {
    explicit DegenerateBatchError(const std::string& what) : Error(what) {}
};
struct InvalidSpecError : Error {
    explicit InvalidSpecError(const std::string& what) : Error(what) {}
};
struct InvalidConfigError : Error {
    explicit InvalidConfigError(const std::string& what) : Error(what) {}
};
struct InvalidMappingError : Error {
    explicit InvalidMappingError(const std::string& what) : Error(what) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& what) : Error(what) {}
};
struct IoError : Error {
    explicit IoError(const std::string& what) : Error(what) {}
};
struct EmptyInputError : Error {
    explicit EmptyInputError(const std::string& what) : Error(what) {}
};
struct NonFiniteLossError : Error {
    explicit NonFiniteLossError(const std::string& what) : Error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG
//
// splitmix64 core with Box-Muller normals. The stream is fully specified
// here, so identical seeds give bit-identical draws on every platform.
// ---------------------------------------------------------------------------

struct RngSeed {
    std::uint64_t value = 0;
};

class Rng {
public:
    explicit Rng(RngSeed seed) : state_(seed.value) {}
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Multiply-shift; bias is negligible for the n used here (< 2^32).
        return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // Box-Muller; u1 is kept strictly positive so the log is finite.
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    // Independent deterministic substream, e.g. one per grid point or epoch.
    Rng substream(std::uint64_t id) const {
        Rng r(state_ ^ (0xA0761D6478BD642Full + id * 0xE7037ED1A0B428DBull));
        r.next_u64();
        return r;
    }

private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace mmgcd
