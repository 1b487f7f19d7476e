#include "rilt/coupling.hpp"

#include <cmath>
#include <numbers>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rilt/rng.hpp"

namespace rilt {

namespace {

// Grid crossing detection lags the true hitting time; a discretely monitored
// barrier behaves like a continuous one shifted outward by beta*sqrt(delta)
// with beta = -zeta(1/2)/sqrt(2 pi) (Broadie-Glasserman-Kou). Detecting at
// level b - beta*sqrt(delta) cancels that shift, so the embedding clock has
// mean 1 per unit variance up to O(delta) and the recorded crossing value
// centers on the intended level. No path values between grid points are ever
// sampled.
constexpr double kBarrierBeta = 0.5826371391;

// One Brownian coordinate scanned on the fine grid, decimated into storage.
// Fine-grid increments come from a position-keyed counter stream, so extending
// the path is deterministic.
class CoordinateScan {
public:
    CoordinateScan(uint64_t seed, uint64_t stream, double delta_scan, int keep)
        : seed_(seed),
          stream_(stream),
          sqrt_delta_(std::sqrt(delta_scan)),
          keep_mask_(uint64_t(keep) - 1),
          barrier_shift_(kBarrierBeta * std::sqrt(delta_scan)) {
        stored_.push_back(0.0);
    }

    // advance one fine step; normals are keyed by fine-grid position (one
    // Philox block and one Box-Muller pair serve two consecutive steps)
    inline void step() {
        double z;
        if ((pos_ & 1) == 0) {
            const Philox4x32::Block b = Philox4x32::generate(seed_, stream_, pos_ >> 1);
            const uint64_t r1 = (uint64_t(b.v[1]) << 32) | b.v[0];
            const uint64_t r2 = (uint64_t(b.v[3]) << 32) | b.v[2];
            const double u1 = (double(r1 >> 11) + 1.0) * 0x1p-53;
            const double u2 = (double(r2 >> 11) + 1.0) * 0x1p-53;
            const double rad = std::sqrt(-2.0 * std::log(u1));
            const double ang = 2.0 * std::numbers::pi_v<double> * u2;
            z = rad * std::cos(ang);
            spare_ = rad * std::sin(ang);
        } else {
            z = spare_;
        }
        value_ += sqrt_delta_ * z;
        ++pos_;
        if ((pos_ & keep_mask_) == 0) stored_.push_back(value_);
    }

    // run until |value - anchor| >= level - barrier shift; returns the signed
    // level (the crossing sign is exactly symmetric, so the walk law is exact)
    int32_t embed_level(int32_t level) {
        const double anchor = value_;
        const double threshold = double(level) - barrier_shift_;
        while (std::abs(value_ - anchor) < threshold) step();
        return value_ > anchor ? level : -level;
    }

    void run_to(uint64_t fine_index) {
        while (pos_ < fine_index) step();
    }

    uint64_t pos() const { return pos_; }
    double value() const { return value_; }
    std::vector<double>&& take_stored() { return std::move(stored_); }

private:
    uint64_t seed_, stream_;
    double sqrt_delta_;
    uint64_t keep_mask_;  // keep is a power of two
    double barrier_shift_;
    uint64_t pos_ = 0;
    double value_ = 0.0;
    double spare_ = 0.0;
    std::vector<double> stored_;
};

}  // namespace

CoupledPath couple(const IncrementLaw& law, int64_t n, double delta_scan, uint64_t seed,
                   uint64_t stream) {
    if (n < 0) throw std::invalid_argument("couple: n must be >= 0");
    bool pow2 = false;
    for (int k = 6; k <= 20; ++k)
        if (delta_scan == std::ldexp(1.0, -k)) pow2 = true;
    if (!pow2)
        throw std::invalid_argument(
            "couple: delta must be 2^-k with 6 <= k <= 20 (grid strides stay exact)");
    if (!law.one_d_factor())
        throw std::invalid_argument(
            "couple: the per-coordinate embedding needs a product-form law (one-dimensional "
            "factor times itself); law '" + law.name() + "' is not product-form");
    const auto& factor = *law.one_d_factor();
    {
        Rational var(0);
        for (const auto& [d, p] : factor) var = var + p * Rational(d) * Rational(d);
        if (!var.is_one())
            throw std::invalid_argument("couple: 1D factor must have unit variance, has " +
                                        var.str());
    }
    // level mixture: P(0) = q(0), P(b) = 2 q(b) for b >= 1
    std::vector<int32_t> levels;
    std::vector<double> level_probs;
    for (const auto& [d, p] : factor) {
        if (d < 0) continue;
        levels.push_back(d);
        level_probs.push_back(d == 0 ? p.to_double() : 2.0 * p.to_double());
    }
    AliasTable level_table(level_probs);

    CoupledPath cp;
    cp.seed = seed;
    cp.stream = stream;
    cp.delta_scan = delta_scan;
    const double keep_target = 0.015625;  // stored grid step 2^-6
    const int keep = std::max(1, int(std::llround(keep_target / delta_scan)));
    cp.delta_grid = delta_scan * keep;

    CoordinateScan sx(seed, substream(stream, 1), delta_scan, keep);
    CoordinateScan sy(seed, substream(stream, 2), delta_scan, keep);
    RandomStream level_rs_x(seed, substream(stream, 3));
    RandomStream level_rs_y(seed, substream(stream, 4));

    cp.walk.law_hash = law.hash();
    cp.walk.seed = seed;
    cp.walk.stream = stream;
    cp.walk.positions.resize(size_t(n) + 1);
    cp.walk.positions[0] = {0, 0};
    cp.clock_x.assign(size_t(n) + 1, 0.0);
    cp.clock_y.assign(size_t(n) + 1, 0.0);
    LatticePoint pos{0, 0};
    for (int64_t k = 1; k <= n; ++k) {
        const int32_t bx = levels[level_table.sample(level_rs_x)];
        const int32_t by = levels[level_table.sample(level_rs_y)];
        if (bx != 0) pos.x += sx.embed_level(bx);
        if (by != 0) pos.y += sy.embed_level(by);
        cp.walk.positions[size_t(k)] = pos;
        cp.clock_x[size_t(k)] = double(sx.pos()) * delta_scan;
        cp.clock_y[size_t(k)] = double(sy.pos()) * delta_scan;
    }
    // cover [0, n] for the rescaled views and the sup distance
    const uint64_t need = uint64_t(std::ceil(double(n) / delta_scan)) + uint64_t(keep);
    const uint64_t target = ((std::max({sx.pos(), sy.pos(), need}) + keep - 1) / keep) * keep;
    sx.run_to(target);
    sy.run_to(target);
    cp.bm_x = sx.take_stored();
    cp.bm_y = sy.take_stored();
    return cp;
}

double sup_scaled_distance(const CoupledPath& cp) {
    const int64_t n = cp.walk.steps();
    if (n < 1) return 0.0;
    if (cp.stored_horizon() + 1e-9 < double(n))
        throw std::runtime_error("sup_scaled_distance: stored grid too short");
    const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
    const double per_unit = 1.0 / cp.delta_grid;  // grid samples per unit time
    double worst = 0.0;
    for (int64_t k = 0; k < n; ++k) {
        const size_t lo = size_t(std::llround(double(k) * per_unit));
        const size_t hi = size_t(std::llround(double(k + 1) * per_unit));
        const double wx = double(cp.walk.at(k).x), wy = double(cp.walk.at(k).y);
        for (size_t g = lo; g <= hi && g < cp.bm_x.size(); ++g) {
            const double dx = wx - cp.bm_x[g], dy = wy - cp.bm_y[g];
            worst = std::max(worst, dx * dx + dy * dy);
        }
    }
    {  // endpoint s = 1
        const size_t g = size_t(std::llround(double(n) * per_unit));
        if (g < cp.bm_x.size()) {
            const double dx = double(cp.walk.at(n).x) - cp.bm_x[g];
            const double dy = double(cp.walk.at(n).y) - cp.bm_y[g];
            worst = std::max(worst, dx * dx + dy * dy);
        }
    }
    return std::sqrt(worst) * inv_sqrt_n;
}

std::vector<Vec2> rescaled_bm(const CoupledPath& cp, int64_t stride) {
    const int64_t n = cp.walk.steps();
    if (stride < 1) throw std::invalid_argument("rescaled_bm: stride must be >= 1");
    if (cp.stored_horizon() + 1e-9 < double(n))
        throw std::runtime_error("rescaled_bm: stored grid too short");
    const double inv_sqrt_n = 1.0 / std::sqrt(double(n));
    const int64_t count = int64_t(std::floor(double(n) / (cp.delta_grid * double(stride))));
    std::vector<Vec2> out;
    out.reserve(size_t(count) + 1);
    for (int64_t j = 0; j * stride < int64_t(cp.bm_x.size()) && j <= count; ++j) {
        const size_t g = size_t(j * stride);
        out.push_back({cp.bm_x[g] * inv_sqrt_n, cp.bm_y[g] * inv_sqrt_n});
    }
    return out;
}

int64_t stride_for(const CoupledPath& cp, int64_t n, double h_target) {
    const double step = cp.delta_grid / double(n);
    return std::max<int64_t>(1, int64_t(std::floor(h_target / step + 1e-12)));
}

void dump_bm(const CoupledPath& cp, const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open bm dump for writing: " + file);
    for (size_t i = 0; i < cp.bm_x.size(); ++i) {
        os.write(reinterpret_cast<const char*>(&cp.bm_x[i]), 8);
        os.write(reinterpret_cast<const char*>(&cp.bm_y[i]), 8);
    }
}

}  // namespace rilt
