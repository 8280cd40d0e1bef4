#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mobsynth {

/// Error type for all contract violations and recoverable failures.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string &msg) { throw Error(msg); }

inline void require(bool cond, const std::string &msg) {
    if (!cond) {
        fail(msg);
    }
}

// FNV-1a, used for config/content fingerprints in manifests. Not cryptographic.
inline uint64_t fnv1a64(const void *data, size_t len, uint64_t seed = 0xcbf29ce484222325ULL) {
    const auto *p = static_cast<const unsigned char *>(data);
    uint64_t h = seed;
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline uint64_t fnv1a64(std::string_view s) { return fnv1a64(s.data(), s.size()); }

inline std::string to_hex(uint64_t v) {
    static const char *digits = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<size_t>(i)] = digits[v & 0xF];
        v >>= 4;
    }
    return out;
}

} // namespace mobsynth
