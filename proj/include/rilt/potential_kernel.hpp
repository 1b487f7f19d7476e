#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "rilt/increment_law.hpp"
#include "rilt/lattice.hpp"

namespace rilt {

// Quadrature for G(x) = (2 pi)^-2 Int_{[-pi,pi]^2} phi/(1-phi) *
// (cos(theta.x) - cos(theta.e1)) dtheta. The square is split into a small box
// at the origin, integrated in polar coordinates where the 1/|theta|^2 pole of
// phi/(1-phi) is neutralized by the r Jacobian and the O(r^2) numerator, and
// tensor Gauss-Legendre panels elsewhere. Panel sizes track the oscillation of
// cos(theta.x), so rules are keyed by a bucketed |x|.
struct QuadratureSpec {
    double origin_box = 0.5;      // half-side of the polar-handled box
    int gl_order = 16;            // nodes per panel and direction
    double phase_per_node = 0.55; // radians of cos(theta.x) phase per node
    double smooth_cap = 0.35;     // panel size cap relative to distance from 0
    int radius_bucket = 16;       // rule radius = |x| rounded up to this grain
    int version = 1;

    int rule_radius(double r) const {
        int b = int(r) / radius_bucket + 1;
        return b * radius_bucket;
    }
    bool operator==(const QuadratureSpec&) const = default;
};

class SpectralEvaluator;  // internal; caches per-bucket node grids

double spectral_kernel(const IncrementLaw& law, LatticePoint x,
                       const QuadratureSpec& spec = {});

struct KappaFit {
    double kappa = 0.0;
    double r_min = 0.0, r_max = 0.0;
    int points = 0;
    // shell index (= rounded |x|) -> max |G(x) + log(|x|)/pi - kappa|
    std::map<int, double> residual_profile;
};

// Cached kernel values. Exact values live on a dense disc plus a sparse
// overlay (rings, on-demand singles); outside them `at` falls back to an
// on-demand spectral evaluation and `at_fast` to a far-field expansion
// kappa_hat + c_log log r + harmonic corrections fitted on the disc rim.
class KernelTable {
public:
    KernelTable(IncrementLaw law, QuadratureSpec spec = {});
    ~KernelTable();
    KernelTable(KernelTable&&) noexcept;

    // test fixtures: a table with prescribed values and constants
    static KernelTable synthetic(IncrementLaw law, int radius,
                                 const std::vector<std::pair<LatticePoint, double>>& values,
                                 double kappa);

    void build_disc(int radius, int threads = 0);
    void extend_disc(int radius, int threads = 0);  // no-op if already covered
    // sparse exact ring, at most max_points of them, deterministic selection
    void add_ring(double r_min, double r_max, int max_points, int threads = 0);

    const IncrementLaw& law() const { return law_; }
    const QuadratureSpec& spec() const { return spec_; }
    int disc_radius() const { return disc_radius_; }

    bool has(LatticePoint x) const;
    // exact: disc/overlay hit, else on-demand spectral (memoized + counted)
    double at(LatticePoint x) const;
    // fast: disc/overlay hit, else far-field expansion
    double at_fast(LatticePoint x) const;
    uint64_t slow_path_evals() const { return slow_evals_; }

    // G_n(x) = G(x) - G_hat(sqrt(n) e1) with G_hat = kappa - log(n)/(2 pi)
    double scaled(int64_t n, LatticePoint x) const {
        return at_fast(x) - kappa_ + std::log(double(n)) / two_pi();
    }
    double scaled_shift(int64_t n) const {  // G_hat(sqrt(n) e1)
        return kappa_ - std::log(double(n)) / two_pi();
    }

    double kappa() const { return kappa_; }
    const KappaFit& kappa_fit() const { return kappa_fit_; }
    void set_kappa(const KappaFit& fit) {
        kappa_fit_ = fit;
        kappa_ = fit.kappa;
    }

    void fit_far_field();
    bool far_field_ready() const { return !far_coeffs_.empty(); }
    // measured against spectral probes beyond the disc
    double far_field_probe_error(int threads = 0) const;

    void save(const std::string& file) const;
    static KernelTable load(const std::string& file, const IncrementLaw& law);

    std::vector<LatticePoint> cached_points() const;

private:
    static double two_pi();
    double far_field_value(double rx, double ry) const;
    std::optional<double> lookup(LatticePoint x) const;
    void store(LatticePoint x, double g);

    IncrementLaw law_;
    QuadratureSpec spec_;
    int disc_radius_ = -1;
    std::vector<double> disc_;  // (2R+1)^2 row-major, NaN = not computed
    mutable std::mutex overlay_mu_;
    mutable std::map<uint64_t, double> overlay_;
    mutable uint64_t slow_evals_ = 0;
    double kappa_ = 0.0;
    KappaFit kappa_fit_;
    std::vector<double> far_coeffs_;
    mutable std::shared_ptr<SpectralEvaluator> eval_;
    SpectralEvaluator& evaluator() const;
};

// kappa = mean of G(x) + log(|x|)/pi over cached points in the ring, residual
// profile per integer shell. Needs at least 50 cached ring points.
KappaFit fit_kappa(const KernelTable& table, double r_min, double r_max);

struct HolderCheckReport {
    double max_ratio = 0.0;        // max |G(x)-G(y)| / h(x,y)^{2/3}
    LatticePoint arg_x, arg_y;     // attaining pair
    int pairs = 0;
};

// h(x,y) = |x-y| / ((1+|x|) ^ (1+|y|)); samples deterministic pairs inside the
// cached disc.
HolderCheckReport kernel_holder_check(const KernelTable& table, int pairs, uint64_t seed);

// Builds (or loads from cache_dir, keyed by law hash + spec) a disc of the
// requested radius. cache_dir empty = no persistence; the RILT_CACHE_DIR
// environment variable supplies the default.
KernelTable ensure_kernel(const IncrementLaw& law, int radius, const std::string& cache_dir,
                          int threads = 0, QuadratureSpec spec = {});

}  // namespace rilt
