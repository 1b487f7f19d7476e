#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "rilt/chain_counts.hpp"
#include "rilt/coupling.hpp"
#include "rilt/increment_law.hpp"
#include "rilt/mollifier.hpp"
#include "rilt/potential_kernel.hpp"
#include "rilt/stats.hpp"
#include "rilt/walk.hpp"

namespace rilt {

// --------------------------------------------------------------------------
// walk-side mollified sums

// (1/n^2) sum_{0<=i<j<=n} f_tau((X_j - X_i)/sqrt(n)) for every tau at once:
// occupation counts bucketed into cells of side tau_max*sqrt(n), so only site
// pairs within mollifier range are visited.
std::vector<double> walk_pair_sums(const WalkPath& path, std::span<const double> taus,
                                   const Mollifier& moll);

// time-ordered walk chain sums T_m = n^-m sum_{0<=i_1<...<i_m<=n}
// prod f_tau((X_{i_l} - X_{i_{l-1}})/sqrt(n)) for m = 2..k; T_1 := 1,
// matching B_1(n) = n.
std::vector<double> walk_chain_integrals(const WalkPath& path, double tau, int k,
                                         const Mollifier& moll);

// g_n(f_tau) = (1/n) sum_{v} f_tau(v/sqrt(n)) G_n(v) over the lattice annulus
double g_n_sum(const KernelTable& kernel, int64_t n, double tau, const Mollifier& moll);
// psi_n = (1/n) sum_v f_tau(v/sqrt(n)); tends to 1 as the lattice resolves f
double psi_n(int64_t n, double tau, const Mollifier& moll);

// sum_x F_tau(x) beta-tilde_k(n, x) / n^{k-1}: binomial-signed combination of
// g_n powers and walk chain sums. Requires tau*sqrt(n) >= 4 so the mollifier
// is resolved on the lattice.
double walk_mollified_beta(const WalkPath& path, const KernelTable& kernel, double tau, int k,
                           const Mollifier& moll);
// independent route: materializes B-tilde per offset vector over the mollifier
// support (k = 2 or 3; oracle for the accumulation route)
double walk_mollified_beta_per_x(const WalkPath& path, const KernelTable& kernel, double tau,
                                 int k, const Mollifier& moll);

// --------------------------------------------------------------------------
// experiment plans and reports

struct Provenance {
    uint64_t seed = 0;
    uint64_t config_hash = 0;
    uint64_t law_hash = 0;
    int kernel_disc_radius = 0;
    double kernel_kappa = 0.0;
    std::string code_version;
};

struct InvariancePlan {
    int k = 2;
    std::string law = "default";
    std::vector<int64_t> n_grid = {1 << 10, 1 << 12, 1 << 14, 1 << 16};
    int replicas = 64;
    std::vector<double> tau_grid = {0.2, 0.1, 0.05};
    double delta = 0x1p-10;
    uint64_t seed = 20240801;
    std::string extrapolation = "linear";  // none | linear | quadratic
    std::string out_dir;                   // empty: no files, no checkpointing
    int threads = 0;

    uint64_t hash() const;
};

struct InvarianceRow {
    int64_t n = 0;
    int replica = 0;
    double beta = 0.0;
    std::vector<double> gamma_tau;
    double gamma_hat = 0.0;
};

struct InvarianceReport {
    InvariancePlan plan;
    std::vector<InvarianceRow> rows;                  // sorted by (n, replica)
    std::vector<double> median_d, median_d_indep, l2_d;  // per n-grid entry
    SlopeFit slope_median, slope_l2, slope_indep;
    double control_exceed_prob = 0.0;  // P(median indep > median coupled) at n_max
    bool pass_coupled_slope = false;
    bool pass_l2_slope = false;
    bool pass_control = false;
    double elapsed_seconds = 0.0;
    Provenance provenance;

    std::string to_json() const;
    uint64_t report_hash() const;
};

InvarianceReport run_invariance(const InvariancePlan& plan, KernelTable& kernel);

struct HolderPlan {
    int k = 2;
    std::string law = "default";
    std::vector<int64_t> n_values = {1 << 12, 1 << 13};
    std::vector<int32_t> ladder = {1, 2, 4, 8, 16};  // offsets d*e1
    int replicas = 4000;
    uint64_t seed = 20240802;
    std::string out_dir;
    int threads = 0;

    uint64_t hash() const;
};

struct HolderReport {
    HolderPlan plan;
    // moment2[n_idx][ladder_idx] = mean |beta(n, d e1/sqrt n) - beta(n, 0)|^2
    std::vector<std::vector<double>> moment2;
    std::vector<double> exponent;        // per n: slope of log m2 vs log d
    std::vector<double> exponent_ci_lo;  // bootstrap
    std::vector<double> exponent_ci_hi;
    double envelope_const_ratio = 0.0;   // stability across the two n values
    bool pass_exponent = false;          // exponent at n_values[0] >= 0.53
    double elapsed_seconds = 0.0;
    Provenance provenance;

    std::string to_json() const;
};

HolderReport run_holder(const HolderPlan& plan, KernelTable& kernel);

struct CouplingRatePlan {
    std::string law = "default";
    std::vector<int64_t> n_grid = {1 << 10, 1 << 11, 1 << 12, 1 << 13,
                                   1 << 14, 1 << 15, 1 << 16};
    int replicas = 32;
    double delta = 0x1p-10;
    uint64_t seed = 20240803;
    std::string out_dir;
    int threads = 0;

    uint64_t hash() const;
};

struct CouplingRateReport {
    CouplingRatePlan plan;
    std::vector<std::vector<double>> sup_distances;  // [n_idx][replica]
    std::vector<double> medians;
    SlopeFit slope;
    bool pass = false;  // slope <= -0.15 and CI excludes 0
    double elapsed_seconds = 0.0;
    Provenance provenance;

    std::string to_json() const;
};

CouplingRateReport run_coupling_rate(const CouplingRatePlan& plan);

struct MartingaleMeanReport {
    std::vector<int64_t> m_n_values, beta_n_values;
    std::vector<double> m_means, m_stderrs;        // martingale M_n means
    std::vector<double> beta_means, beta_stderrs;  // beta-tilde_2(n, 0) means
    std::vector<double> beta_exact;                // transition-grid oracle
    bool pass_m_centered = false;
    bool pass_beta_matches = false;
    double elapsed_seconds = 0.0;
};

MartingaleMeanReport run_martingale_mean(const IncrementLaw& law, KernelTable& kernel,
                                         LatticePoint x, std::vector<int64_t> m_n_values,
                                         std::vector<int64_t> beta_n_values, int replicas,
                                         uint64_t seed, int threads);

struct MomentTrendReport {
    int64_t n_lo = 0, n_hi = 0;
    // statistic name -> {ratio at n_lo, ratio at n_hi, growth factor}
    struct Entry {
        double ratio_lo = 0.0, ratio_hi = 0.0, growth = 0.0;
        bool pass = false;
    };
    std::map<std::string, Entry> entries;
    bool pass_all = false;
    double elapsed_seconds = 0.0;
};

// p = 2 statistics of W_2, Y_2, Z-tilde_2 and W_3 across one n-doubling,
// each compared with its envelope; pass if growth factor <= 3.
MomentTrendReport run_moment_trend(const IncrementLaw& law, KernelTable& kernel, int64_t n_lo,
                                   int replicas_count, int replicas_corrector, uint64_t seed,
                                   int threads);

// gamma-hat extrapolation over the tau grid (values aligned with taus,
// descending tau not required; smallest taus are used)
double extrapolate_gamma(std::span<const double> taus, std::span<const double> values,
                         const std::string& mode);

// time grid step for the Brownian-side estimator: largest power of two
// <= tau^2/64, identical across n so discretization bias cancels in slopes
double gamma_grid_step(double tau);

uint64_t fnv_hash_str(const std::string& s);
std::string version_string();

}  // namespace rilt
