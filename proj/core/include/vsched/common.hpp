#pragma once

#include <charconv>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace vsched {

// Discrete simulation time. All durations and timestamps are integral slices.
using Slice = long long;

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Input text could not be parsed. line/col are 1-based.
struct ParseError : Error {
    int line = 0;
    int col = 0;
    ParseError(int line_, int col_, const std::string& msg)
        : Error("parse error at " + std::to_string(line_) + ":" + std::to_string(col_) + ": " + msg),
          line(line_), col(col_) {}
};

// Well-formed input that violates a domain invariant. The message names the invariant.
struct ValidationError : Error {
    using Error::Error;
};

// Shortest decimal string that round-trips the exact double; used everywhere
// numbers are persisted so that re-reading a file reproduces the value bit
// for bit.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG. mt19937_64 output is bit-exact across platforms; the
// helpers below avoid std distributions, whose sequences are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform integer in [lo, hi], inclusive.
    long long uniform_int(long long lo, long long hi) {
        if (hi < lo) throw Error("Rng::uniform_int: empty range");
        std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<long long>(next() % span);
    }

    double uniform01() {
        return static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
    }

    bool chance(double p) { return uniform01() < p; }

private:
    std::mt19937_64 gen_;
};

}  // namespace vsched
