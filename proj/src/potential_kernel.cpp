#include "rilt/potential_kernel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "rilt/parallel.hpp"
#include "rilt/rng.hpp"

namespace rilt {

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

void gauss_legendre(int q, std::vector<double>& x, std::vector<double>& w) {
    x.resize(size_t(q));
    w.resize(size_t(q));
    for (int k = 0; k < (q + 1) / 2; ++k) {
        double z = std::cos(kPi * (k + 0.75) / (q + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < q; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * z * p1 - j * p2) / (j + 1.0);
            }
            pp = q * (z * p0 - p1) / (z * z - 1.0);
            double dz = p0 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-15) break;
        }
        x[size_t(k)] = -z;
        x[size_t(q - 1 - k)] = z;
        w[size_t(k)] = w[size_t(q - 1 - k)] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
}

// panel edges over [lo, hi] (0 <= lo < hi); sizes limited by the oscillation
// budget and, near the origin, by a fraction of the distance from it
std::vector<double> panel_edges(double lo, double hi, double osc_cap, double smooth_frac,
                                double origin_box) {
    std::vector<double> edges{lo};
    double cur = lo;
    while (cur < hi - 1e-12) {
        double cap = std::min(osc_cap, smooth_frac * std::max(cur, origin_box));
        cur = std::min(hi, cur + cap);
        edges.push_back(cur);
    }
    edges.back() = hi;
    return edges;
}

struct Axis {
    std::vector<double> nodes, weights;
};

void append_axis(Axis& ax, double lo, double hi, bool flip, double osc_cap, double smooth_frac,
                 double origin_box, const std::vector<double>& gx,
                 const std::vector<double>& gw) {
    auto edges = panel_edges(lo, hi, osc_cap, smooth_frac, origin_box);
    for (size_t p = 0; p + 1 < edges.size(); ++p) {
        const double a = edges[p], b = edges[p + 1];
        const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (size_t k = 0; k < gx.size(); ++k) {
            double t = mid + half * gx[k];
            ax.nodes.push_back(flip ? -t : t);
            ax.weights.push_back(half * gw[k]);
        }
    }
}

Axis make_axis(double lo, double hi, double osc_cap, double smooth_frac, double origin_box,
               const std::vector<double>& gx, const std::vector<double>& gw) {
    Axis ax;
    if (lo < 0.0 && hi > 0.0) {
        append_axis(ax, 0.0, -lo, true, osc_cap, smooth_frac, origin_box, gx, gw);
        append_axis(ax, 0.0, hi, false, osc_cap, smooth_frac, origin_box, gx, gw);
    } else if (hi <= 0.0) {
        append_axis(ax, -hi, -lo, true, osc_cap, smooth_frac, origin_box, gx, gw);
    } else {
        append_axis(ax, lo, hi, false, osc_cap, smooth_frac, origin_box, gx, gw);
    }
    return ax;
}

}  // namespace

// ---------------------------------------------------------------------------
// SpectralEvaluator

class SpectralEvaluator {
public:
    SpectralEvaluator(const IncrementLaw& law, QuadratureSpec spec)
        : law_(law), spec_(spec) {
        if (!law.is_symmetric())
            throw std::domain_error("spectral kernel requires a symmetric law: " + law.name());
        LawValidationReport rep = validate(law, 256);
        if (rep.aperiodicity_margin <= 0.0)
            throw std::domain_error("spectral kernel requires strong aperiodicity (margin 0): " +
                                    law.name());
        quarter_ = law.is_coordinate_symmetric();
        if (law.one_d_factor()) {
            for (const auto& [d, p] : *law.one_d_factor())
                if (d != 0) factor_.push_back({double(d), p.to_double()});
        } else {
            for (const auto& a : law.atoms()) {
                if (a.step == LatticePoint{0, 0}) continue;
                LatticePoint m = -a.step;
                if (m < a.step) continue;  // keep one of each +-v pair
                pairs_.push_back({double(a.step.x), double(a.step.y), 2.0 * a.prob.to_double()});
            }
        }
        gauss_legendre(spec_.gl_order, gx_, gw_);
    }

    double eval(LatticePoint x) {
        const Bucket& bk = bucket_for(std::max(1.0, x.norm()));
        double total;
        if (quarter_) {
            const double ax1 = std::abs(double(x.x)), ax2 = std::abs(double(x.y));
            KahanSum acc;
            for (const auto& reg : bk.regions) {
                fill_tables(reg.a1, ax1, c1_, nullptr);
                fill_tables(reg.a2, ax2, c2_, nullptr);
                acc.add(contract(reg, c1_, c2_));
            }
            double pol = 0.0;
            for (size_t i = 0; i < bk.polar_t1.size(); ++i)
                pol += bk.polar_wg[i] * std::cos(bk.polar_t1[i] * ax1) *
                       std::cos(bk.polar_t2[i] * ax2);
            acc.add(pol);
            total = acc.value() - bk.e1_term;
            return total / (kPi * kPi);
        }
        const double x1 = double(x.x), x2 = double(x.y);
        KahanSum acc;
        for (const auto& reg : bk.regions) {
            fill_tables(reg.a1, x1, c1_, &s1_);
            fill_tables(reg.a2, x2, c2_, &s2_);
            acc.add(contract2(reg, c1_, s1_, c2_, s2_));
        }
        double pol = 0.0;
        for (size_t i = 0; i < bk.polar_t1.size(); ++i)
            pol += bk.polar_wg[i] * std::cos(bk.polar_t1[i] * x1 + bk.polar_t2[i] * x2);
        acc.add(pol);
        total = acc.value() - bk.e1_term;
        return total / (2.0 * kPi * kPi);
    }

    double one_minus_phi(double t1, double t2) const {
        if (!factor_.empty()) {
            const double f1 = one_minus_phi1(t1), f2 = one_minus_phi1(t2);
            return f1 + f2 - f1 * f2;
        }
        double s = 0.0;
        for (const auto& pr : pairs_) {
            const double h = std::sin(0.5 * (pr.vx * t1 + pr.vy * t2));
            s += pr.p2 * 2.0 * h * h;
        }
        return s;
    }

private:
    struct Pair {
        double vx, vy, p2;
    };
    struct Region {
        Axis a1, a2;
        std::vector<double> g;  // row-major [i][j] = w_i w_j phi/(1-phi)
    };
    struct Bucket {
        std::vector<Region> regions;
        std::vector<double> polar_t1, polar_t2, polar_wg;
        double e1_term = 0.0;  // integral of g * cos(theta_1) over everything
    };

    double one_minus_phi1(double t) const {
        double s = 0.0;
        for (const auto& [a, q] : factor_) {
            const double h = std::sin(0.5 * a * t);
            s += q * 2.0 * h * h;
        }
        return s;
    }

    double g_of(double t1, double t2) const {
        const double f = one_minus_phi(t1, t2);
        return (1.0 - f) / f;
    }

    void fill_tables(const Axis& ax, double coord, std::vector<double>& c,
                     std::vector<double>* s) const {
        c.resize(ax.nodes.size());
        if (s) s->resize(ax.nodes.size());
        for (size_t i = 0; i < ax.nodes.size(); ++i) {
            const double t = ax.nodes[i] * coord;
            c[i] = std::cos(t);
            if (s) (*s)[i] = std::sin(t);
        }
    }

    static double contract(const Region& reg, const std::vector<double>& c1,
                           const std::vector<double>& c2) {
        const size_t n1 = reg.a1.nodes.size(), n2 = reg.a2.nodes.size();
        double out = 0.0;
        for (size_t i = 0; i < n1; ++i) {
            const double* row = reg.g.data() + i * n2;
            double dot = 0.0;
            for (size_t j = 0; j < n2; ++j) dot += row[j] * c2[j];
            out += c1[i] * dot;
        }
        return out;
    }

    static double contract2(const Region& reg, const std::vector<double>& c1,
                            const std::vector<double>& s1, const std::vector<double>& c2,
                            const std::vector<double>& s2) {
        const size_t n1 = reg.a1.nodes.size(), n2 = reg.a2.nodes.size();
        double out = 0.0;
        for (size_t i = 0; i < n1; ++i) {
            const double* row = reg.g.data() + i * n2;
            double dc = 0.0, ds = 0.0;
            for (size_t j = 0; j < n2; ++j) {
                dc += row[j] * c2[j];
                ds += row[j] * s2[j];
            }
            out += c1[i] * dc - s1[i] * ds;
        }
        return out;
    }

    const Bucket& bucket_for(double r) {
        const int rule = spec_.rule_radius(r);
        {
            std::lock_guard<std::mutex> lk(mu_);
            auto it = buckets_.find(rule);
            if (it != buckets_.end()) return *it->second;
        }
        auto bk = std::make_unique<Bucket>(build_bucket(rule));
        std::lock_guard<std::mutex> lk(mu_);
        auto [it, inserted] = buckets_.emplace(rule, std::move(bk));
        return *it->second;
    }

    Bucket build_bucket(int rule) const {
        Bucket bk;
        const double b = spec_.origin_box;
        const double osc = spec_.phase_per_node * spec_.gl_order / double(rule + 4);
        auto region = [&](double l1, double h1, double l2, double h2) {
            Region reg;
            reg.a1 = make_axis(l1, h1, osc, spec_.smooth_cap, b, gx_, gw_);
            reg.a2 = make_axis(l2, h2, osc, spec_.smooth_cap, b, gx_, gw_);
            const size_t n1 = reg.a1.nodes.size(), n2 = reg.a2.nodes.size();
            reg.g.resize(n1 * n2);
            for (size_t i = 0; i < n1; ++i)
                for (size_t j = 0; j < n2; ++j)
                    reg.g[i * n2 + j] = reg.a1.weights[i] * reg.a2.weights[j] *
                                        g_of(reg.a1.nodes[i], reg.a2.nodes[j]);
            bk.regions.push_back(std::move(reg));
        };
        if (quarter_) {
            region(b, kPi, 0.0, kPi);
            region(0.0, b, b, kPi);
        } else {
            region(b, kPi, -kPi, kPi);
            region(0.0, b, b, kPi);
            region(0.0, b, -kPi, -b);
        }

        // polar box: theta_1 in [0,b], |theta_2| <= b (quarter keeps theta_2 >= 0)
        const double omega_lo = quarter_ ? 0.0 : -0.5 * kPi;
        const double omega_hi = 0.5 * kPi;
        const double r_osc = std::min(osc, 0.35);
        const double w_osc = std::min(osc / (b * std::numbers::sqrt2_v<double>), 0.35);
        const int octants = quarter_ ? 2 : 4;
        for (int oct = 0; oct < octants; ++oct) {
            const double wa = omega_lo + (omega_hi - omega_lo) * oct / octants;
            const double wb = omega_lo + (omega_hi - omega_lo) * (oct + 1) / octants;
            const int wp = std::max<int>(1, int(std::ceil((wb - wa) / w_osc)));
            for (int p = 0; p < wp; ++p) {
                const double pa = wa + (wb - wa) * p / wp, pb = wa + (wb - wa) * (p + 1) / wp;
                const double wmid = 0.5 * (pa + pb), whalf = 0.5 * (pb - pa);
                for (int k = 0; k < spec_.gl_order; ++k) {
                    const double om = wmid + whalf * gx_[size_t(k)];
                    const double wom = whalf * gw_[size_t(k)];
                    const double co = std::cos(om), so = std::sin(om);
                    const double R = b / std::max(std::abs(co), std::abs(so));
                    const int rp = std::max<int>(1, int(std::ceil(R / r_osc)));
                    for (int q = 0; q < rp; ++q) {
                        const double ra = R * q / rp, rb = R * (q + 1) / rp;
                        const double rmid = 0.5 * (ra + rb), rhalf = 0.5 * (rb - ra);
                        for (int l = 0; l < spec_.gl_order; ++l) {
                            const double r = rmid + rhalf * gx_[size_t(l)];
                            const double wr = rhalf * gw_[size_t(l)];
                            const double t1 = r * co, t2 = r * so;
                            bk.polar_t1.push_back(t1);
                            bk.polar_t2.push_back(t2);
                            bk.polar_wg.push_back(wom * wr * r * g_of(t1, t2));
                        }
                    }
                }
            }
        }

        // e1 term: same nodes applied to cos(theta_1)
        KahanSum e1;
        for (const auto& reg : bk.regions) {
            const size_t n1 = reg.a1.nodes.size(), n2 = reg.a2.nodes.size();
            for (size_t i = 0; i < n1; ++i) {
                const double c = std::cos(reg.a1.nodes[i]);
                const double* row = reg.g.data() + i * n2;
                double rowsum = 0.0;
                for (size_t j = 0; j < n2; ++j) rowsum += row[j];
                e1.add(c * rowsum);
            }
        }
        for (size_t i = 0; i < bk.polar_t1.size(); ++i)
            e1.add(bk.polar_wg[i] * std::cos(bk.polar_t1[i]));
        bk.e1_term = e1.value();
        return bk;
    }

    IncrementLaw law_;
    QuadratureSpec spec_;
    bool quarter_ = false;
    std::vector<std::pair<double, double>> factor_;  // (offset, prob), offset != 0
    std::vector<Pair> pairs_;
    std::vector<double> gx_, gw_;
    std::mutex mu_;
    std::map<int, std::unique_ptr<Bucket>> buckets_;
    // scratch (eval is called from multiple threads through thread-local
    // evaluators; see KernelTable)
    std::vector<double> c1_, s1_, c2_, s2_;
};

double spectral_kernel(const IncrementLaw& law, LatticePoint x, const QuadratureSpec& spec) {
    SpectralEvaluator ev(law, spec);
    return ev.eval(x);
}

// ---------------------------------------------------------------------------
// KernelTable

double KernelTable::two_pi() { return 2.0 * kPi; }

KernelTable::KernelTable(IncrementLaw law, QuadratureSpec spec)
    : law_(std::move(law)), spec_(spec) {}

KernelTable::~KernelTable() = default;

KernelTable::KernelTable(KernelTable&& o) noexcept
    : law_(std::move(o.law_)),
      spec_(o.spec_),
      disc_radius_(o.disc_radius_),
      disc_(std::move(o.disc_)),
      overlay_(std::move(o.overlay_)),
      slow_evals_(o.slow_evals_),
      kappa_(o.kappa_),
      kappa_fit_(std::move(o.kappa_fit_)),
      far_coeffs_(std::move(o.far_coeffs_)),
      eval_(std::move(o.eval_)) {}

SpectralEvaluator& KernelTable::evaluator() const {
    if (!eval_) eval_ = std::make_shared<SpectralEvaluator>(law_, spec_);
    return *eval_;
}

KernelTable KernelTable::synthetic(IncrementLaw law, int radius,
                                   const std::vector<std::pair<LatticePoint, double>>& values,
                                   double kappa) {
    KernelTable t(std::move(law));
    t.disc_radius_ = radius;
    const int w = 2 * radius + 1;
    t.disc_.assign(size_t(w) * w, std::numeric_limits<double>::quiet_NaN());
    for (const auto& [p, g] : values) t.store(p, g);
    t.kappa_ = kappa;
    return t;
}

std::optional<double> KernelTable::lookup(LatticePoint x) const {
    if (disc_radius_ >= 0 && std::abs(x.x) <= disc_radius_ && std::abs(x.y) <= disc_radius_) {
        const int w = 2 * disc_radius_ + 1;
        const double v = disc_[size_t(x.x + disc_radius_) * w + size_t(x.y + disc_radius_)];
        if (!std::isnan(v)) return v;
    }
    std::lock_guard<std::mutex> lk(overlay_mu_);
    auto it = overlay_.find(pack_site(x));
    if (it != overlay_.end()) return it->second;
    return std::nullopt;
}

void KernelTable::store(LatticePoint x, double g) {
    if (disc_radius_ >= 0 && std::abs(x.x) <= disc_radius_ && std::abs(x.y) <= disc_radius_) {
        const int w = 2 * disc_radius_ + 1;
        disc_[size_t(x.x + disc_radius_) * w + size_t(x.y + disc_radius_)] = g;
        return;
    }
    std::lock_guard<std::mutex> lk(overlay_mu_);
    overlay_[pack_site(x)] = g;
}

bool KernelTable::has(LatticePoint x) const { return lookup(x).has_value(); }

double KernelTable::at(LatticePoint x) const {
    if (auto v = lookup(x)) return *v;
    // slow path is fully serialized, so sharing one evaluator is safe
    std::lock_guard<std::mutex> lk(overlay_mu_);
    auto it = overlay_.find(pack_site(x));
    if (it != overlay_.end()) return it->second;
    const double g = evaluator().eval(x);
    overlay_[pack_site(x)] = g;
    ++slow_evals_;
    return g;
}

double KernelTable::at_fast(LatticePoint x) const {
    if (auto v = lookup(x)) return *v;
    if (!far_coeffs_.empty()) return far_field_value(double(x.x), double(x.y));
    return at(x);
}

void KernelTable::build_disc(int radius, int threads) { extend_disc(radius, threads); }

void KernelTable::extend_disc(int radius, int threads) {
    if (threads <= 0) threads = default_threads();
    if (radius <= disc_radius_) return;
    const int w = 2 * radius + 1;
    std::vector<double> fresh(size_t(w) * w, std::numeric_limits<double>::quiet_NaN());
    if (disc_radius_ >= 0) {
        const int ow = 2 * disc_radius_ + 1;
        for (int i = -disc_radius_; i <= disc_radius_; ++i)
            for (int j = -disc_radius_; j <= disc_radius_; ++j)
                fresh[size_t(i + radius) * w + size_t(j + radius)] =
                    disc_[size_t(i + disc_radius_) * ow + size_t(j + disc_radius_)];
    }
    disc_ = std::move(fresh);
    const int old_radius = disc_radius_;
    disc_radius_ = radius;

    std::vector<LatticePoint> todo;
    for (int i = -radius; i <= radius; ++i)
        for (int j = -radius; j <= radius; ++j) {
            if (double(i) * i + double(j) * j > double(radius) * radius) continue;
            if (old_radius >= 0 && std::abs(i) <= old_radius && std::abs(j) <= old_radius &&
                double(i) * i + double(j) * j <= double(old_radius) * old_radius)
                continue;
            todo.push_back({i, j});
        }
    std::sort(todo.begin(), todo.end(), [](LatticePoint a, LatticePoint b) {
        return a.norm2() < b.norm2() || (a.norm2() == b.norm2() && a < b);
    });
    // one evaluator per worker: the scratch tables are not shareable
    std::vector<std::shared_ptr<SpectralEvaluator>> evs;
    evs.resize(size_t(threads));
    parallel_for_worker(int64_t(todo.size()), threads, [&](int wid, int64_t k) {
        auto& ev = evs[size_t(wid)];
        if (!ev) ev = std::make_shared<SpectralEvaluator>(law_, spec_);
        const LatticePoint p = todo[size_t(k)];
        const double g = ev->eval(p);
        const int ww = 2 * disc_radius_ + 1;
        disc_[size_t(p.x + disc_radius_) * ww + size_t(p.y + disc_radius_)] = g;
    });
}

void KernelTable::add_ring(double r_min, double r_max, int max_points, int threads) {
    if (threads <= 0) threads = default_threads();
    std::vector<LatticePoint> cand;
    const int hi = int(std::ceil(r_max));
    for (int i = -hi; i <= hi; ++i)
        for (int j = -hi; j <= hi; ++j) {
            const double r = std::hypot(double(i), double(j));
            if (r < r_min || r > r_max) continue;
            if (has({i, j})) continue;
            cand.push_back({i, j});
        }
    std::sort(cand.begin(), cand.end(), [](LatticePoint a, LatticePoint b) {
        if (a.norm2() != b.norm2()) return a.norm2() < b.norm2();
        const double aa = std::atan2(double(a.y), double(a.x));
        const double ab = std::atan2(double(b.y), double(b.x));
        if (aa != ab) return aa < ab;
        return a < b;
    });
    std::vector<LatticePoint> pick;
    if (int(cand.size()) <= max_points) {
        pick = std::move(cand);
    } else {
        const double stride = double(cand.size()) / double(max_points);
        for (int k = 0; k < max_points; ++k) pick.push_back(cand[size_t(k * stride)]);
    }
    std::vector<double> vals(pick.size());
    std::vector<std::shared_ptr<SpectralEvaluator>> evs;
    evs.resize(size_t(threads));
    parallel_for_worker(int64_t(pick.size()), threads, [&](int wid, int64_t k) {
        auto& ev = evs[size_t(wid)];
        if (!ev) ev = std::make_shared<SpectralEvaluator>(law_, spec_);
        vals[size_t(k)] = ev->eval(pick[size_t(k)]);
    });
    for (size_t k = 0; k < pick.size(); ++k) store(pick[k], vals[k]);
}

// far field: G ~ c0 + cL log r + (r^-2 and r^-4 harmonics)
namespace {
constexpr int kFarBasis = 12;
void far_basis(double rx, double ry, double* b) {
    const double r2 = rx * rx + ry * ry;
    const double lr = 0.5 * std::log(r2);
    const double ir2 = 1.0 / r2, ir4 = ir2 * ir2;
    const double c2 = (rx * rx - ry * ry) * ir2, s2 = 2.0 * rx * ry * ir2;
    const double c4 = c2 * c2 - s2 * s2, s4 = 2.0 * c2 * s2;
    b[0] = 1.0;
    b[1] = lr;
    b[2] = ir2;
    b[3] = ir2 * c2;
    b[4] = ir2 * s2;
    b[5] = ir2 * c4;
    b[6] = ir2 * s4;
    b[7] = ir4;
    b[8] = ir4 * c2;
    b[9] = ir4 * s2;
    b[10] = ir4 * c4;
    b[11] = ir4 * s4;
}

// solve A x = rhs in place, A is n x n row major
void solve_dense(std::vector<double>& A, std::vector<double>& rhs, int n) {
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[size_t(r) * n + col]) > std::abs(A[size_t(piv) * n + col])) piv = r;
        if (std::abs(A[size_t(piv) * n + col]) < 1e-300)
            throw std::runtime_error("far-field fit: singular normal equations");
        if (piv != col) {
            for (int c = 0; c < n; ++c) std::swap(A[size_t(piv) * n + c], A[size_t(col) * n + c]);
            std::swap(rhs[size_t(piv)], rhs[size_t(col)]);
        }
        for (int r = col + 1; r < n; ++r) {
            const double f = A[size_t(r) * n + col] / A[size_t(col) * n + col];
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c) A[size_t(r) * n + c] -= f * A[size_t(col) * n + c];
            rhs[size_t(r)] -= f * rhs[size_t(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double v = rhs[size_t(r)];
        for (int c = r + 1; c < n; ++c) v -= A[size_t(r) * n + c] * rhs[size_t(c)];
        rhs[size_t(r)] = v / A[size_t(r) * n + r];
    }
}
}  // namespace

double KernelTable::far_field_value(double rx, double ry) const {
    double b[kFarBasis];
    far_basis(rx, ry, b);
    double v = 0.0;
    for (int i = 0; i < kFarBasis; ++i) v += far_coeffs_[size_t(i)] * b[i];
    return v;
}

void KernelTable::fit_far_field() {
    if (disc_radius_ < 16) throw std::runtime_error("far-field fit needs a disc of radius >= 16");
    const double hi = double(disc_radius_);
    const double lo = std::max(4.0, std::min(hi - 12.0, 0.75 * hi));
    std::vector<double> ata(kFarBasis * kFarBasis, 0.0), atb(kFarBasis, 0.0);
    int npts = 0;
    for (int i = -disc_radius_; i <= disc_radius_; ++i)
        for (int j = -disc_radius_; j <= disc_radius_; ++j) {
            const double r = std::hypot(double(i), double(j));
            if (r < lo || r > hi) continue;
            auto v = lookup({i, j});
            if (!v) continue;
            double b[kFarBasis];
            far_basis(double(i), double(j), b);
            for (int a = 0; a < kFarBasis; ++a) {
                for (int c = 0; c < kFarBasis; ++c) ata[size_t(a) * kFarBasis + c] += b[a] * b[c];
                atb[size_t(a)] += b[a] * *v;
            }
            ++npts;
        }
    if (npts < 50) throw std::runtime_error("far-field fit: not enough rim points");
    solve_dense(ata, atb, kFarBasis);
    far_coeffs_ = std::move(atb);
}

double KernelTable::far_field_probe_error(int threads) const {
    if (far_coeffs_.empty()) throw std::runtime_error("far field not fitted");
    std::vector<LatticePoint> probes;
    for (double f : {1.25, 1.6, 2.0}) {
        const double r = f * disc_radius_;
        for (int k = 0; k < 8; ++k) {
            const double a = (2.0 * kPi * k) / 8.0 + 0.19;
            probes.push_back(round_half_down(r * std::cos(a), r * std::sin(a)));
        }
    }
    double worst = 0.0;
    for (const auto& p : probes) {
        const double exact = at(p);  // slow path, memoized
        worst = std::max(worst, std::abs(exact - far_field_value(double(p.x), double(p.y))));
    }
    (void)threads;
    return worst;
}

std::vector<LatticePoint> KernelTable::cached_points() const {
    std::vector<LatticePoint> pts;
    if (disc_radius_ >= 0) {
        const int w = 2 * disc_radius_ + 1;
        for (int i = -disc_radius_; i <= disc_radius_; ++i)
            for (int j = -disc_radius_; j <= disc_radius_; ++j)
                if (!std::isnan(disc_[size_t(i + disc_radius_) * w + size_t(j + disc_radius_)]))
                    pts.push_back({i, j});
    }
    std::lock_guard<std::mutex> lk(overlay_mu_);
    for (const auto& [key, g] : overlay_) pts.push_back(unpack_site(key));
    return pts;
}

// ---------------------------------------------------------------------------
// cache file: magic, law hash, spec, kappa, far-field, records

namespace {
constexpr char kMagic[8] = {'R', 'I', 'L', 'T', 'K', 'R', 'N', '1'};
template <typename T>
void put(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <typename T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
}
}  // namespace

void KernelTable::save(const std::string& file) const {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write kernel cache: " + file);
    os.write(kMagic, 8);
    put(os, law_.hash());
    put(os, spec_.origin_box);
    put(os, int32_t(spec_.gl_order));
    put(os, spec_.phase_per_node);
    put(os, spec_.smooth_cap);
    put(os, int32_t(spec_.radius_bucket));
    put(os, int32_t(spec_.version));
    put(os, kappa_);
    put(os, kappa_fit_.r_min);
    put(os, kappa_fit_.r_max);
    put(os, int32_t(disc_radius_));
    put(os, int32_t(far_coeffs_.size()));
    for (double c : far_coeffs_) put(os, c);
    auto pts = cached_points();
    put(os, uint64_t(pts.size()));
    for (const auto& p : pts) {
        put(os, int32_t(p.x));
        put(os, int32_t(p.y));
        put(os, *lookup(p));
    }
}

KernelTable KernelTable::load(const std::string& file, const IncrementLaw& law) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open kernel cache: " + file);
    char magic[8];
    is.read(magic, 8);
    if (std::memcmp(magic, kMagic, 8) != 0)
        throw std::runtime_error("bad kernel cache magic: " + file);
    const uint64_t hash = get<uint64_t>(is);
    if (hash != law.hash())
        throw std::runtime_error("kernel cache was built for a different law: " + file);
    QuadratureSpec spec;
    spec.origin_box = get<double>(is);
    spec.gl_order = get<int32_t>(is);
    spec.phase_per_node = get<double>(is);
    spec.smooth_cap = get<double>(is);
    spec.radius_bucket = get<int32_t>(is);
    spec.version = get<int32_t>(is);
    KernelTable t(law, spec);
    t.kappa_ = get<double>(is);
    t.kappa_fit_.kappa = t.kappa_;
    t.kappa_fit_.r_min = get<double>(is);
    t.kappa_fit_.r_max = get<double>(is);
    const int radius = get<int32_t>(is);
    const int nfar = get<int32_t>(is);
    t.far_coeffs_.resize(size_t(nfar));
    for (int i = 0; i < nfar; ++i) t.far_coeffs_[size_t(i)] = get<double>(is);
    if (radius >= 0) {
        t.disc_radius_ = radius;
        const int w = 2 * radius + 1;
        t.disc_.assign(size_t(w) * w, std::numeric_limits<double>::quiet_NaN());
    }
    const uint64_t n = get<uint64_t>(is);
    for (uint64_t k = 0; k < n; ++k) {
        const int32_t x = get<int32_t>(is);
        const int32_t y = get<int32_t>(is);
        const double g = get<double>(is);
        if (!is) throw std::runtime_error("truncated kernel cache: " + file);
        t.store({x, y}, g);
    }
    return t;
}

// ---------------------------------------------------------------------------

KappaFit fit_kappa(const KernelTable& table, double r_min, double r_max) {
    KappaFit fit;
    fit.r_min = r_min;
    fit.r_max = r_max;
    KahanSum sum;
    std::vector<std::pair<int, double>> resid;  // (shell, G + log|x|/pi)
    for (const auto& p : table.cached_points()) {
        const double r = p.norm();
        if (r < r_min || r > r_max || r <= 0.0) continue;
        const double v = table.at(p) + std::log(r) / kPi;
        sum.add(v);
        resid.push_back({int(std::lround(r)), v});
        ++fit.points;
    }
    if (fit.points < 50)
        throw std::runtime_error("fit_kappa: fewer than 50 cached points in the ring");
    fit.kappa = sum.value() / fit.points;
    for (const auto& [shell, v] : resid) {
        double& worst = fit.residual_profile[shell];
        worst = std::max(worst, std::abs(v - fit.kappa));
    }
    return fit;
}

HolderCheckReport kernel_holder_check(const KernelTable& table, int pairs, uint64_t seed) {
    HolderCheckReport rep;
    RandomStream rs(seed, 0x601d);
    const int R = table.disc_radius();
    if (R < 4) throw std::runtime_error("kernel_holder_check: disc too small");
    auto draw_point = [&](int radius) {
        while (true) {
            const int x = int(rs.next_u64() % uint64_t(2 * radius + 1)) - radius;
            const int y = int(rs.next_u64() % uint64_t(2 * radius + 1)) - radius;
            if (double(x) * x + double(y) * y <= double(radius) * radius) return LatticePoint{x, y};
        }
    };
    while (rep.pairs < pairs) {
        LatticePoint x = draw_point(R);
        // mix short and long separations
        LatticePoint y;
        if (rep.pairs % 2 == 0) {
            y = x + LatticePoint{int(rs.next_u64() % 7) - 3, int(rs.next_u64() % 7) - 3};
            if (std::abs(y.x) > R || std::abs(y.y) > R || y.norm2() > double(R) * R) continue;
        } else {
            y = draw_point(R);
        }
        if (x == y) continue;
        const double denom = std::min(1.0 + x.norm(), 1.0 + y.norm());
        const double h = (x - y).norm() / denom;
        const double ratio = std::abs(table.at(x) - table.at(y)) / std::pow(h, 2.0 / 3.0);
        if (ratio > rep.max_ratio) {
            rep.max_ratio = ratio;
            rep.arg_x = x;
            rep.arg_y = y;
        }
        ++rep.pairs;
    }
    return rep;
}

KernelTable ensure_kernel(const IncrementLaw& law, int radius, const std::string& cache_dir,
                          int threads, QuadratureSpec spec) {
    std::string dir = cache_dir;
    if (dir.empty()) {
        if (const char* env = std::getenv("RILT_CACHE_DIR")) dir = env;
    }
    std::string file;
    if (!dir.empty()) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "kernel_%016llx_b%.3f_q%d_p%.3f_s%.3f_r%d_v%d.bin",
                      (unsigned long long)law.hash(), spec.origin_box, spec.gl_order,
                      spec.phase_per_node, spec.smooth_cap, spec.radius_bucket, spec.version);
        std::filesystem::create_directories(dir);
        file = dir + "/" + buf;
        if (std::filesystem::exists(file)) {
            KernelTable t = KernelTable::load(file, law);
            if (t.disc_radius() >= radius) return t;
            t.extend_disc(radius, threads);
            t.set_kappa(fit_kappa(t, 0.55 * radius, 0.92 * radius));
            if (radius >= 16) t.fit_far_field();
            t.save(file);
            return t;
        }
    }
    KernelTable t(law, spec);
    t.build_disc(radius, threads);
    t.set_kappa(fit_kappa(t, 0.55 * radius, 0.92 * radius));
    if (radius >= 16) t.fit_far_field();
    if (!file.empty()) t.save(file);
    return t;
}

}  // namespace rilt
