#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace rilt {

// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
// Output is a pure function of (key, counter): replicas keyed by (seed, stream)
// reproduce bit-exactly under any parallel schedule.
struct Philox4x32 {
    static constexpr uint32_t kW32A = 0x9E3779B9u;
    static constexpr uint32_t kW32B = 0xBB67AE85u;
    static constexpr uint32_t kM4x32A = 0xD2511F53u;
    static constexpr uint32_t kM4x32B = 0xCD9E8D57u;

    struct Block {
        uint32_t v[4];
    };

    static void round(uint32_t ctr[4], const uint32_t key[2]) {
        const uint64_t p0 = uint64_t(kM4x32A) * ctr[0];
        const uint64_t p1 = uint64_t(kM4x32B) * ctr[2];
        const uint32_t lo0 = uint32_t(p0), hi0 = uint32_t(p0 >> 32);
        const uint32_t lo1 = uint32_t(p1), hi1 = uint32_t(p1 >> 32);
        ctr[0] = hi1 ^ ctr[1] ^ key[0];
        ctr[1] = lo1;
        ctr[2] = hi0 ^ ctr[3] ^ key[1];
        ctr[3] = lo0;
    }

    static Block generate(uint64_t key, uint64_t stream, uint64_t index) {
        uint32_t c[4] = {uint32_t(index), uint32_t(index >> 32), uint32_t(stream),
                         uint32_t(stream >> 32)};
        uint32_t k[2] = {uint32_t(key), uint32_t(key >> 32)};
        for (int r = 0; r < 10; ++r) {
            round(c, k);
            if (r < 9) {
                k[0] += kW32A;
                k[1] += kW32B;
            }
        }
        return Block{{c[0], c[1], c[2], c[3]}};
    }
};

// Sequential view over one (seed, stream) Philox lane.
class RandomStream {
public:
    RandomStream(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {}

    uint64_t next_u64() {
        if (phase_ == 0) {
            block_ = Philox4x32::generate(seed_, stream_, index_++);
            phase_ = 1;
            return (uint64_t(block_.v[1]) << 32) | block_.v[0];
        }
        phase_ = 0;
        return (uint64_t(block_.v[3]) << 32) | block_.v[2];
    }

    // Value addressed by absolute draw index, independent of cursor state.
    static uint64_t u64_at(uint64_t seed, uint64_t stream, uint64_t i) {
        Philox4x32::Block b = Philox4x32::generate(seed, stream, i >> 1);
        return (i & 1) ? ((uint64_t(b.v[3]) << 32) | b.v[2])
                       : ((uint64_t(b.v[1]) << 32) | b.v[0]);
    }

    // Uniform in (0,1]; never returns 0 so log() is safe.
    double uniform() { return (double(next_u64() >> 11) + 1.0) * 0x1p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi_v<double> * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    uint64_t seed() const { return seed_; }
    uint64_t stream() const { return stream_; }

private:
    uint64_t seed_, stream_;
    uint64_t index_ = 0;
    Philox4x32::Block block_{};
    int phase_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Derive a child stream id; tags separate logical uses of the same replica.
inline uint64_t substream(uint64_t stream, uint64_t tag) {
    uint64_t z = stream * 0x9E3779B97F4A7C15ULL + tag + 1;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Walker/Vose alias table for O(1) categorical sampling.
class AliasTable {
public:
    explicit AliasTable(const std::vector<double>& probs) {
        const size_t n = probs.size();
        if (n == 0) throw std::invalid_argument("alias table needs atoms");
        prob_.assign(n, 0.0);
        alias_.assign(n, 0);
        std::vector<double> scaled(n);
        std::vector<size_t> small, large;
        for (size_t i = 0; i < n; ++i) {
            scaled[i] = probs[i] * double(n);
            (scaled[i] < 1.0 ? small : large).push_back(i);
        }
        while (!small.empty() && !large.empty()) {
            size_t s = small.back(), l = large.back();
            small.pop_back();
            large.pop_back();
            prob_[s] = scaled[s];
            alias_[s] = uint32_t(l);
            scaled[l] = (scaled[l] + scaled[s]) - 1.0;
            (scaled[l] < 1.0 ? small : large).push_back(l);
        }
        for (size_t s : small) prob_[s] = 1.0;
        for (size_t l : large) prob_[l] = 1.0;
    }

    size_t sample(RandomStream& rs) const {
        const __uint128_t m = __uint128_t(rs.next_u64()) * prob_.size();
        const size_t i = size_t(m >> 64);
        // fractional part of the bucket position: uniform and independent of i
        const double u = double(uint64_t(m)) * 0x1p-64;
        return u < prob_[i] ? i : alias_[i];
    }

private:
    std::vector<double> prob_;
    std::vector<uint32_t> alias_;
};

}  // namespace rilt
