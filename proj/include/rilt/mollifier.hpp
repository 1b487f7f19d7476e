#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rilt/lattice.hpp"

namespace rilt {

// Radial bump f(y) = c exp(-1/((|y|-1/2)(1-|y|))) on 1/2 < |y| < 1, integral 1.
// f_tau(x) = tau^-2 f(x/tau) keeps integral 1 and support in the annulus
// tau/2 <= |x| <= tau. l(f) = (1/pi) Int f(y) log(1/|y|) dy.
class Mollifier {
public:
    Mollifier();

    double f(double r) const;                       // radial profile, unit tau
    double f_tau(double tau, double r) const {      // radial, scaled
        return f(r / tau) / (tau * tau);
    }
    double f_tau(double tau, Vec2 v) const { return f_tau(tau, v.norm()); }
    double l_f() const { return l_f_; }
    double l_f_tau(double tau) const;  // l(f) + log(1/tau)/pi
    double norm_const() const { return c_; }

private:
    double c_ = 0.0;
    double l_f_ = 0.0;
};

// Estimate of Int F_tau(x) gamma-tilde_k(1, x) dx from a Brownian grid path on
// [0,1]: the alternating binomial sum of l(f_tau)^j times the time-ordered
// (k-j)-fold integrals of prod f_tau(W_{t_i} - W_{t_{i-1}}).
struct MollifiedEstimate {
    int k = 2;
    double tau = 0.0;
    double h = 0.0;            // time grid step
    double value = 0.0;
    double l_f_tau = 0.0;
    std::vector<double> components;  // j = 0..k-1 terms, already signed
};

// points = W path samples at t_j = j*h, j = 0..m with m*h = 1. Requires
// tau / sqrt(h) >= 8 so the mollifier is resolved by the grid.
MollifiedEstimate mollified_gamma(std::span<const Vec2> points, double h, double tau, int k,
                                  const Mollifier& moll);

// O(m^2) pair-sum reference for the k = 2 double integral (test oracle).
double mollified_double_integral_direct(std::span<const Vec2> points, double h, double tau,
                                        const Mollifier& moll);

// Time-ordered m-fold chain integrals T_2..T_k in one sweep (T_1 := 1), used
// by mollified_gamma and by the walk-side general-k route.
std::vector<double> chain_integrals(std::span<const Vec2> points, double h, double tau, int k,
                                    const Mollifier& moll);

}  // namespace rilt
