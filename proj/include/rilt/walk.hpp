#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rilt/increment_law.hpp"
#include "rilt/lattice.hpp"

namespace rilt {

struct WalkPath {
    std::vector<LatticePoint> positions;  // length n+1, positions[0] = (0,0)
    uint64_t law_hash = 0;
    uint64_t seed = 0;
    uint64_t stream = 0;

    int64_t steps() const { return int64_t(positions.size()) - 1; }
    LatticePoint at(int64_t i) const { return positions[size_t(i)]; }
};

// X_0 = 0, X_i = xi_1 + ... + xi_i with the increments drawn from an alias
// table keyed by (seed, stream).
WalkPath simulate(const IncrementLaw& law, int64_t n, uint64_t seed, uint64_t stream);

// X_{floor(n t)} / sqrt(n) for t in [0,1]
Vec2 scaled_position(const WalkPath& path, double t);

// little-endian int32 (x, y) pairs
void dump_path(const WalkPath& path, const std::string& file);
std::vector<LatticePoint> load_path_dump(const std::string& file);

}  // namespace rilt
