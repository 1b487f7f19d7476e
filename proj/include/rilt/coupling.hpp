#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rilt/increment_law.hpp"
#include "rilt/lattice.hpp"
#include "rilt/walk.hpp"

namespace rilt {

// Walk and planar Brownian path on one probability space, built by
// per-coordinate Skorokhod embedding: each coordinate draws an exit level b
// from the symmetric two-point mixture representing the 1D factor (P(b) =
// q(0) for b=0, 2 q(b) otherwise, so E[exit time] = Var = 1), then runs its
// own Brownian coordinate until |W - anchor| first reaches b on the scan grid.
// The crossing sign is symmetric, so the walk's law is exact; overshoot noise
// lands in the coupling distance, which is what gets measured.
struct CoupledPath {
    WalkPath walk;
    double delta_scan = 0.0;  // simulation grid step
    double delta_grid = 0.0;  // stored grid step (multiple of delta_scan)
    std::vector<double> bm_x, bm_y;  // W at t = idx * delta_grid
    std::vector<double> clock_x, clock_y;  // embedding clocks T^c_k, size n+1
    uint64_t seed = 0, stream = 0;

    double stored_horizon() const { return (double(bm_x.size()) - 1.0) * delta_grid; }
    Vec2 bm_at_index(size_t i) const { return {bm_x[i], bm_y[i]}; }
};

// delta_scan must be <= 2^-6 (and a power of two keeps downstream grid strides
// exact). The law must be a product of two copies of a unit-variance 1D
// factor; anything else is refused.
CoupledPath couple(const IncrementLaw& law, int64_t n, double delta_scan, uint64_t seed,
                   uint64_t stream);

// sup over the stored grid of |X^n_s - W^n_s|, s in [0,1]
double sup_scaled_distance(const CoupledPath& cp);

// W^n on [0,1]: samples W(j * stride * delta_grid)/sqrt(n); returned step in
// rescaled time is stride * delta_grid / n. Throws if the stored grid does
// not reach time n.
std::vector<Vec2> rescaled_bm(const CoupledPath& cp, int64_t stride);

// largest stride with step <= h_target (at least 1)
int64_t stride_for(const CoupledPath& cp, int64_t n, double h_target);

// binary dump: little-endian float64 (x, y) pairs of the stored grid
void dump_bm(const CoupledPath& cp, const std::string& file);

}  // namespace rilt
