#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace sls {

// FNV-1a 64-bit. Used for content hashes of datasets, parameters and traces
// so reports can assert that paired arms consumed identical inputs.
class Fnv64 {
public:
    void update(const void* bytes, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(bytes);
        for (std::size_t i = 0; i < n; ++i) {
            state_ ^= static_cast<uint64_t>(p[i]);
            state_ *= 0x100000001B3ULL;
        }
    }

    void update_u64(uint64_t v) { update(&v, sizeof(v)); }

    void update_double(double v) {
        uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        update_u64(bits);
    }

    void update_doubles(const std::vector<double>& vs) {
        for (double v : vs) update_double(v);
    }

    uint64_t value() const { return state_; }

    std::string hex() const {
        static const char* digits = "0123456789abcdef";
        std::string out(16, '0');
        uint64_t v = state_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = digits[v & 0xF];
            v >>= 4;
        }
        return out;
    }

private:
    uint64_t state_ = 0xCBF29CE484222325ULL;
};

} // namespace sls
