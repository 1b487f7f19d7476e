#pragma once

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace rilt {

struct LatticePoint {
    int32_t x = 0;
    int32_t y = 0;

    friend LatticePoint operator+(LatticePoint a, LatticePoint b) { return {a.x + b.x, a.y + b.y}; }
    friend LatticePoint operator-(LatticePoint a, LatticePoint b) { return {a.x - b.x, a.y - b.y}; }
    LatticePoint operator-() const { return {-x, -y}; }
    friend bool operator==(LatticePoint a, LatticePoint b) { return a.x == b.x && a.y == b.y; }
    friend bool operator!=(LatticePoint a, LatticePoint b) { return !(a == b); }
    // lexicographic, for canonical orderings
    friend bool operator<(LatticePoint a, LatticePoint b) {
        return a.x != b.x ? a.x < b.x : a.y < b.y;
    }

    double norm() const { return std::hypot(double(x), double(y)); }
    int64_t norm2() const { return int64_t(x) * x + int64_t(y) * y; }
};

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    double norm() const { return std::hypot(x, y); }
    double norm2() const { return x * x + y * y; }
};

// Sites are packed into 48 bits; coordinates must stay in (-2^23, 2^23).
// Key 0 is reserved as the empty-slot sentinel of SiteCountMap.
inline constexpr int32_t kCoordLimit = 1 << 23;

inline uint64_t pack_site(LatticePoint p) {
    assert(p.x > -kCoordLimit && p.x < kCoordLimit && p.y > -kCoordLimit && p.y < kCoordLimit);
    return (uint64_t(uint32_t(p.x + kCoordLimit)) << 24) | uint64_t(uint32_t(p.y + kCoordLimit));
}

inline LatticePoint unpack_site(uint64_t key) {
    return {int32_t(key >> 24) - kCoordLimit, int32_t(key & 0xffffff) - kCoordLimit};
}

inline uint64_t mix64(uint64_t z) {
    z ^= z >> 33;
    z *= 0xff51afd7ed558ccdULL;
    z ^= z >> 33;
    z *= 0xc4ceb9fe1a85ec53ULL;
    z ^= z >> 33;
    return z;
}

// Open-addressing site -> int64 counter map with linear probing.
// Walk tallies hit a few distinct sites per step, so this is the hot container.
class SiteCountMap {
public:
    explicit SiteCountMap(size_t expected = 64) { rehash(capacity_for(expected)); }

    int64_t get(LatticePoint p) const {
        const uint64_t key = pack_site(p);
        size_t i = mix64(key) & mask_;
        while (true) {
            if (keys_[i] == key) return vals_[i];
            if (keys_[i] == 0) return 0;
            i = (i + 1) & mask_;
        }
    }

    void add(LatticePoint p, int64_t delta) {
        const uint64_t key = pack_site(p);
        size_t i = mix64(key) & mask_;
        while (true) {
            if (keys_[i] == key) {
                vals_[i] += delta;
                return;
            }
            if (keys_[i] == 0) {
                keys_[i] = key;
                vals_[i] = delta;
                if (++count_ * 10 > keys_.size() * 7) grow();
                return;
            }
            i = (i + 1) & mask_;
        }
    }

    size_t size() const { return count_; }

    // (site, count) pairs sorted by packed key; deterministic independent of
    // insertion order, which reproducible reductions rely on.
    std::vector<std::pair<uint64_t, int64_t>> sorted_entries() const {
        std::vector<std::pair<uint64_t, int64_t>> out;
        out.reserve(count_);
        for (size_t i = 0; i < keys_.size(); ++i)
            if (keys_[i] != 0) out.push_back({keys_[i], vals_[i]});
        std::sort(out.begin(), out.end());
        return out;
    }

    template <typename F>
    void for_each(F&& f) const {
        for (size_t i = 0; i < keys_.size(); ++i)
            if (keys_[i] != 0) f(unpack_site(keys_[i]), vals_[i]);
    }

private:
    static size_t capacity_for(size_t expected) {
        size_t c = 64;
        while (c * 7 < expected * 10) c <<= 1;
        return c;
    }
    void rehash(size_t cap) {
        keys_.assign(cap, 0);
        vals_.assign(cap, 0);
        mask_ = cap - 1;
        count_ = 0;
    }
    void grow() {
        std::vector<uint64_t> ok = std::move(keys_);
        std::vector<int64_t> ov = std::move(vals_);
        rehash(ok.size() * 2);
        for (size_t i = 0; i < ok.size(); ++i) {
            if (ok[i] == 0) continue;
            size_t j = mix64(ok[i]) & mask_;
            while (keys_[j] != 0) j = (j + 1) & mask_;
            keys_[j] = ok[i];
            vals_[j] = ov[i];
            ++count_;
        }
    }

    std::vector<uint64_t> keys_;
    std::vector<int64_t> vals_;
    size_t mask_ = 0;
    size_t count_ = 0;
};

// Nearest lattice point, ties toward -inf per coordinate.
inline int32_t round_half_down(double v) { return int32_t(std::ceil(v - 0.5)); }
inline LatticePoint round_half_down(double vx, double vy) {
    return {round_half_down(vx), round_half_down(vy)};
}

// Compensated accumulator for long float reductions.
struct KahanSum {
    double sum = 0.0, c = 0.0;
    void add(double v) {
        double y = v - c;
        double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    double value() const { return sum; }
};

}  // namespace rilt
