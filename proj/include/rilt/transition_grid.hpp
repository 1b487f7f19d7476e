#pragma once

#include <cstdint>
#include <vector>

#include "rilt/increment_law.hpp"
#include "rilt/lattice.hpp"

namespace rilt {

// n-step transition probabilities p(n, 0, x) by repeated convolution of the
// finite-support law. Slices are stored densely on the reachable box; the box
// guard refuses builds beyond 4096^2 cells per slice.
class TransitionGrid {
public:
    TransitionGrid(const IncrementLaw& law, int horizon);

    int horizon() const { return horizon_; }
    double p(int n, LatticePoint x) const;
    double slice_sum(int n) const;

    // p(n, 0, 0). For product-form laws this is available for n far beyond the
    // stored horizon through the one-dimensional factor convolution.
    static std::vector<double> return_probabilities(const IncrementLaw& law, int n_max);

private:
    IncrementLaw law_;
    int horizon_;
    std::vector<std::vector<double>> slices_;  // slices_[n], box radius n*max_jump
    int radius_of(int n) const { return n * law_.max_jump(); }
};

// One-dimensional m-step distributions of a product factor; slice m covers
// offsets [-m*J, m*J] where J is the factor's max jump.
std::vector<std::vector<double>> convolve_1d(
    const std::vector<std::pair<int32_t, Rational>>& factor, int n_max);

// Reference value of G(x) = sum_{n>=1} [p(n,0,x) - p(n,0,e1)] by direct time
// summation to n_max plus a Richardson tail fitted to the ~A/n^2 + B/n^3 decay
// of the summand. Product laws go through the 1D factor and support large
// n_max; general laws convolve in 2D (keep n_max modest).
double time_sum_kernel_reference(const IncrementLaw& law, LatticePoint x, int n_max);

// one sweep for many targets (shares the slice convolution)
std::vector<double> time_sum_kernel_references(const IncrementLaw& law,
                                               const std::vector<LatticePoint>& xs, int n_max);

}  // namespace rilt
