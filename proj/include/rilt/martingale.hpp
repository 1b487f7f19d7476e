#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "rilt/chain_counts.hpp"
#include "rilt/increment_law.hpp"
#include "rilt/potential_kernel.hpp"
#include "rilt/walk.hpp"

namespace rilt {

// Corrector U-tilde_2(j, x) = sum_{i=0}^{j-1} G_n(X_j - X_i - x) at fixed
// horizon n = path length, and the martingale M_j = U-tilde_2 + B-tilde_2.
// Internally M is evaluated in the shift-free form
//   M_j = sum_{i<j} G(X_j - X_i - x) + B_2(j, x) - j G(x),
// which is the same sequence: the G_hat(sqrt(n) e1) constants cancel.
struct MartingaleSeries {
    int k = 2;
    int64_t m = 0;               // renormalization horizon (n for k = 2)
    std::vector<double> U;       // corrector values, index j = 0..n
    std::vector<double> M;       // martingale values, index j = 0..n
    bool exact_g = true;         // exact kernel lookups vs fast far-field
};

// G accessor used by the martingale evaluations; `perturb` supports the
// fault-injection control.
struct KernelAccess {
    const KernelTable* table = nullptr;
    bool exact = true;
    LatticePoint perturb_site{0, 0};
    double perturb_eps = 0.0;

    double g(LatticePoint p) const {
        double v = exact ? table->at(p) : table->at_fast(p);
        if (perturb_eps != 0.0 && p == perturb_site) v += perturb_eps;
        return v;
    }
};

MartingaleSeries martingale_series_k2(const WalkPath& path, LatticePoint x,
                                      const KernelAccess& ka);
double martingale_final_k2(const WalkPath& path, LatticePoint x, const KernelAccess& ka);

// k > 2: M_{j,m} = U-tilde_{k,m}(j,x) + B-tilde_{k,m}(j,x) with
// U-tilde_{k,m}(j,x) = sum_{i=1}^{j} G_m(X_j - X_i - x_k) *
//                      [B-tilde_{k-1,m}(i) - B-tilde_{k-1,m}(i-1)].
MartingaleSeries martingale_series_k(const WalkPath& path, const ChainSpec& spec, int64_t m,
                                     const KernelAccess& ka);
double martingale_final_k(const WalkPath& path, const ChainSpec& spec, int64_t m,
                          const KernelAccess& ka);

// Corrector series alone (k = 2 statement form), with the G_n shift applied.
std::vector<double> corrector_u2(const WalkPath& path, LatticePoint x, const KernelTable& kernel,
                                 bool exact = true);
// General-k corrector for a fixed m; needs the (k-1, x_{k^c}) renormalized
// series, which is built internally.
std::vector<double> corrector_uk(const WalkPath& path, const ChainSpec& spec,
                                 const KernelTable& kernel, int64_t m, bool exact = true);

// Exact one-step check: |E[M_n - M_{n-1} | F_{n-1}]| by enumeration over the
// increment atoms, evaluated at the end of the given prefix. k = 2 uses the
// shift-free form; k >= 3 uses M_{n,m}. Residuals are bounded by kernel
// quadrature error when the identity holds.
double exact_onestep_residual(const WalkPath& prefix, const ChainSpec& spec, int64_t m,
                              const KernelAccess& ka);

}  // namespace rilt
