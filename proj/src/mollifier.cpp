#include "rilt/mollifier.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <unordered_map>

namespace rilt {

namespace {
constexpr double kPi = std::numbers::pi_v<double>;

double raw_profile(double r) {
    if (r <= 0.5 || r >= 1.0) return 0.0;
    return std::exp(-1.0 / ((r - 0.5) * (1.0 - r)));
}

// composite Gauss-Legendre over [0.5, 1]; the integrand is smooth and flat at
// both ends
template <typename F>
double radial_integral(F&& f) {
    static const double gx[8] = {-0.9602898564975363, -0.7966664774136267,
                                 -0.5255324099163290, -0.1834346424956498,
                                 0.1834346424956498,  0.5255324099163290,
                                 0.7966664774136267,  0.9602898564975363};
    static const double gw[8] = {0.1012285362903763, 0.2223810344533745,
                                 0.3137066458778873, 0.3626837833783620,
                                 0.3626837833783620, 0.3137066458778873,
                                 0.2223810344533745, 0.1012285362903763};
    const int panels = 64;
    double total = 0.0;
    for (int p = 0; p < panels; ++p) {
        const double a = 0.5 + 0.5 * p / panels, b = 0.5 + 0.5 * (p + 1) / panels;
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int i = 0; i < 8; ++i) total += half * gw[i] * f(mid + half * gx[i]);
    }
    return total;
}
}  // namespace

Mollifier::Mollifier() {
    const double mass = 2.0 * kPi * radial_integral([](double r) { return r * raw_profile(r); });
    c_ = 1.0 / mass;
    l_f_ = (2.0 * kPi / kPi) * c_ *
           radial_integral([](double r) { return r * raw_profile(r) * std::log(1.0 / r); });
}

double Mollifier::f(double r) const { return c_ * raw_profile(r); }

double Mollifier::l_f_tau(double tau) const {
    if (tau <= 0.0 || tau > 1.0) throw std::domain_error("mollifier: tau must be in (0, 1]");
    return l_f_ + std::log(1.0 / tau) / kPi;
}

namespace {

// spatial cells of side tau over the continuous points; queries scan the 3x3
// neighborhood
struct CellIndex {
    double inv_side;
    std::unordered_map<uint64_t, std::vector<uint32_t>> cells;

    explicit CellIndex(double side) : inv_side(1.0 / side) {}
    static uint64_t key(int32_t cx, int32_t cy) {
        return (uint64_t(uint32_t(cx + (1 << 20))) << 24) | uint64_t(uint32_t(cy + (1 << 20)));
    }
    std::pair<int32_t, int32_t> cell_of(Vec2 p) const {
        return {int32_t(std::floor(p.x * inv_side)), int32_t(std::floor(p.y * inv_side))};
    }
    void insert(Vec2 p, uint32_t idx) {
        auto [cx, cy] = cell_of(p);
        cells[key(cx, cy)].push_back(idx);
    }
    template <typename F>
    void visit_neighbors(Vec2 p, F&& f) const {
        auto [cx, cy] = cell_of(p);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
                auto it = cells.find(key(cx + dx, cy + dy));
                if (it == cells.end()) continue;
                for (uint32_t idx : it->second) f(idx);
            }
    }
};

}  // namespace

std::vector<double> chain_integrals(std::span<const Vec2> points, double h, double tau, int k,
                                    const Mollifier& moll) {
    if (k < 2) throw std::invalid_argument("chain_integrals: k must be >= 2");
    if (tau / std::sqrt(h) < 8.0)
        throw std::invalid_argument("chain_integrals: grid too coarse, need tau/sqrt(h) >= 8");
    const size_t m = points.size();
    // C_l[j]: weight of l-chains ending at grid index j; C_1 = 1
    std::vector<std::vector<double>> C(size_t(k) + 1);
    for (int l = 2; l <= k; ++l) C[size_t(l)].assign(m, 0.0);
    CellIndex cells(tau);
    const double tau2 = tau * tau;
    for (size_t j = 0; j < m; ++j) {
        const Vec2 pj = points[j];
        cells.visit_neighbors(pj, [&](uint32_t i) {
            const Vec2 d = pj - points[i];
            const double r2 = d.norm2();
            if (r2 >= tau2 || r2 <= 0.25 * tau2) return;
            const double w = moll.f_tau(tau, std::sqrt(r2)) * h;
            for (int l = k; l >= 2; --l) {
                const double prev = (l == 2) ? 1.0 : C[size_t(l) - 1][i];
                if (prev != 0.0) C[size_t(l)][j] += w * prev;
            }
        });
        cells.insert(pj, uint32_t(j));
    }
    std::vector<double> T(size_t(k) + 1, 0.0);
    T[1] = 1.0;
    for (int l = 2; l <= k; ++l) {
        KahanSum s;
        for (size_t j = 0; j < m; ++j) s.add(C[size_t(l)][j]);
        T[size_t(l)] = h * s.value();
    }
    return T;
}

MollifiedEstimate mollified_gamma(std::span<const Vec2> points, double h, double tau, int k,
                                  const Mollifier& moll) {
    MollifiedEstimate est;
    est.k = k;
    est.tau = tau;
    est.h = h;
    est.l_f_tau = moll.l_f_tau(tau);
    const std::vector<double> T = chain_integrals(points, h, tau, k, moll);
    est.components.resize(size_t(k));
    double binom = 1.0;  // C(k-1, j)
    double lpow = 1.0;   // l(f_tau)^j
    double value = 0.0;
    for (int j = 0; j <= k - 1; ++j) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        est.components[size_t(j)] = sign * binom * lpow * T[size_t(k - j)];
        value += est.components[size_t(j)];
        binom = binom * double(k - 1 - j) / double(j + 1);
        lpow *= est.l_f_tau;
    }
    est.value = value;
    return est;
}

double mollified_double_integral_direct(std::span<const Vec2> points, double h, double tau,
                                        const Mollifier& moll) {
    KahanSum s;
    for (size_t j = 0; j < points.size(); ++j)
        for (size_t i = 0; i < j; ++i) s.add(moll.f_tau(tau, points[j] - points[i]));
    return s.value() * h * h;
}

}  // namespace rilt
