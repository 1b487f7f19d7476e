#include "rilt/increment_law.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace rilt {

namespace {

uint64_t fnv1a(const void* data, size_t len, uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

IncrementLaw::IncrementLaw(std::string name, std::vector<LawAtom> atoms)
    : name_(std::move(name)), atoms_(std::move(atoms)) {
    finalize();
}

void IncrementLaw::finalize() {
    if (atoms_.empty()) throw std::invalid_argument("law has no atoms");
    std::sort(atoms_.begin(), atoms_.end(),
              [](const LawAtom& a, const LawAtom& b) { return a.step < b.step; });
    for (size_t i = 0; i + 1 < atoms_.size(); ++i)
        if (atoms_[i].step == atoms_[i + 1].step)
            throw std::invalid_argument("duplicate atom in law " + name_);
    Rational total(0);
    for (const auto& a : atoms_) {
        if (a.prob.num <= 0) throw std::invalid_argument("atom probability must be positive");
        total = total + a.prob;
        max_jump_ = std::max({max_jump_, std::abs(a.step.x), std::abs(a.step.y)});
    }
    if (!total.is_one())
        throw std::invalid_argument("law " + name_ + " probabilities sum to " + total.str() +
                                    ", not 1");
    uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& a : atoms_) {
        int64_t rec[4] = {a.step.x, a.step.y, a.prob.num, a.prob.den};
        h = fnv1a(rec, sizeof rec, h);
    }
    hash_ = h;
}

IncrementLaw IncrementLaw::product_of_1d(
    std::string name, const std::vector<std::pair<int32_t, Rational>>& factor) {
    std::vector<LawAtom> atoms;
    for (const auto& [dx, px] : factor)
        for (const auto& [dy, py] : factor) atoms.push_back({{dx, dy}, px * py});
    IncrementLaw law(std::move(name), std::move(atoms));
    law.factor_ = factor;
    return law;
}

IncrementLaw IncrementLaw::named(const std::string& name) {
    if (name == "default") {
        // One-dimensional factor q(0)=3/16, q(+-1)=3/8, q(+-2)=1/32: unit
        // variance, symmetric, |phi_1(t)| < 1 off 2*pi*Z, so the product law is
        // mean 0, identity covariance, symmetric and strongly aperiodic.
        std::vector<std::pair<int32_t, Rational>> q = {
            {-2, {1, 32}}, {-1, {3, 8}}, {0, {3, 16}}, {1, {3, 8}}, {2, {1, 32}}};
        return product_of_1d("default", q);
    }
    if (name == "srw") {
        // covariance (1/2) I and phi(pi,pi) = -1: fails two hypotheses
        return IncrementLaw("srw", {{{1, 0}, {1, 4}},
                                    {{-1, 0}, {1, 4}},
                                    {{0, 1}, {1, 4}},
                                    {{0, -1}, {1, 4}}});
    }
    if (name == "diagonal") {
        // identity covariance but lives on the even sublattice: phi(pi,pi) = 1
        return IncrementLaw("diagonal", {{{1, 1}, {1, 4}},
                                         {{1, -1}, {1, 4}},
                                         {{-1, 1}, {1, 4}},
                                         {{-1, -1}, {1, 4}}});
    }
    if (name == "king") {
        // strongly aperiodic but covariance (3/4) I
        std::vector<LawAtom> atoms;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                if (dx || dy) atoms.push_back({{dx, dy}, {1, 8}});
        return IncrementLaw("king", std::move(atoms));
    }
    throw std::invalid_argument("unknown law name: " + name);
}

IncrementLaw IncrementLaw::from_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open law file: " + path);
    nlohmann::json j;
    in >> j;
    if (!j.is_array()) throw std::runtime_error("law file must be a JSON array");
    std::vector<LawAtom> atoms;
    for (const auto& e : j) {
        LawAtom a;
        a.step = {e.at("dx").get<int32_t>(), e.at("dy").get<int32_t>()};
        a.prob = Rational(e.at("num").get<int64_t>(), e.at("den").get<int64_t>());
        atoms.push_back(a);
    }
    return IncrementLaw(path, std::move(atoms));
}

IncrementLaw IncrementLaw::resolve(const std::string& spec) {
    if (spec == "default" || spec == "srw" || spec == "diagonal" || spec == "king")
        return named(spec);
    return from_json_file(spec);
}

Rational IncrementLaw::prob_of(LatticePoint p) const {
    auto it = std::lower_bound(atoms_.begin(), atoms_.end(), p,
                               [](const LawAtom& a, LatticePoint q) { return a.step < q; });
    if (it != atoms_.end() && it->step == p) return it->prob;
    return Rational(0);
}

bool IncrementLaw::is_symmetric() const {
    for (const auto& a : atoms_)
        if (prob_of(-a.step) != a.prob) return false;
    return true;
}

bool IncrementLaw::is_coordinate_symmetric() const {
    for (const auto& a : atoms_) {
        if (prob_of({-a.step.x, a.step.y}) != a.prob) return false;
        if (prob_of({a.step.x, -a.step.y}) != a.prob) return false;
    }
    return true;
}

std::array<Rational, 2> IncrementLaw::mean() const {
    Rational mx(0), my(0);
    for (const auto& a : atoms_) {
        mx = mx + a.prob * Rational(a.step.x);
        my = my + a.prob * Rational(a.step.y);
    }
    return {mx, my};
}

std::array<Rational, 4> IncrementLaw::covariance() const {
    auto m = mean();
    Rational xx(0), xy(0), yy(0);
    for (const auto& a : atoms_) {
        Rational dx = Rational(a.step.x) - m[0];
        Rational dy = Rational(a.step.y) - m[1];
        xx = xx + a.prob * dx * dx;
        xy = xy + a.prob * dx * dy;
        yy = yy + a.prob * dy * dy;
    }
    return {xx, xy, xy, yy};
}

namespace {
// extended gcd: returns g = gcd(a,b) and s,t with s*a + t*b = g
int64_t ext_gcd(int64_t a, int64_t b, int64_t& s, int64_t& t) {
    if (b == 0) {
        s = (a >= 0) ? 1 : -1;
        t = 0;
        return std::abs(a);
    }
    int64_t s1, t1;
    int64_t g = ext_gcd(b, a % b, s1, t1);
    s = t1;
    t = s1 - (a / b) * t1;
    return g;
}
}  // namespace

bool IncrementLaw::generates_z2() const {
    // Hermite form of the subgroup generated by the support, kept as rows
    // (a, b) and (0, d); the subgroup is Z^2 iff the index |a*d| is 1.
    int64_t a = 0, b = 0, d = 0;
    for (const auto& atom : atoms_) {
        int64_t vx = atom.step.x, vy = atom.step.y;
        if (a == 0 && vx != 0) {
            std::swap(a, vx);
            std::swap(b, vy);
        }
        if (vx != 0) {
            int64_t s, t;
            int64_t g = ext_gcd(a, vx, s, t);
            int64_t nb = s * b + t * vy;
            int64_t leftover = (a / g) * vy - (vx / g) * b;  // y-part of eliminated row
            a = g;
            b = nb;
            d = std::gcd(d, std::abs(leftover));
        } else {
            d = std::gcd(d, std::abs(vy));
        }
    }
    return a != 0 && d != 0 && std::abs(a) * d == 1;
}

double IncrementLaw::characteristic_function(double t1, double t2) const {
    if (!is_symmetric())
        throw std::domain_error("characteristic_function: law must be symmetric (phi real)");
    double s = 0.0;
    for (const auto& a : atoms_)
        s += a.prob.to_double() * std::cos(t1 * a.step.x + t2 * a.step.y);
    return s;
}

std::string LawValidationReport::summary() const {
    std::ostringstream os;
    os << "mean=(" << mean[0].str() << "," << mean[1].str() << ")"
       << " cov=[" << covariance[0].str() << "," << covariance[1].str() << ";"
       << covariance[2].str() << "," << covariance[3].str() << "]"
       << " symmetric=" << (symmetric ? "yes" : "no")
       << " generates_Z2=" << (generates_lattice ? "yes" : "no")
       << " aperiodicity_margin=" << aperiodicity_margin << " (grid " << phi_grid_resolution
       << ")" << " compliant=" << (paper_compliant() ? "yes" : "no");
    return os.str();
}

LawValidationReport validate(const IncrementLaw& law, int grid_resolution) {
    if (grid_resolution < 64) throw std::invalid_argument("grid_resolution must be >= 64");
    LawValidationReport rep;
    rep.mean = law.mean();
    rep.covariance = law.covariance();
    rep.symmetric = law.is_symmetric();
    rep.generates_lattice = law.generates_z2();
    rep.phi_grid_resolution = grid_resolution;
    if (!rep.symmetric) {
        rep.aperiodicity_margin = 0.0;  // phi not real; margin not defined
        return rep;
    }
    const double pi = std::numbers::pi_v<double>;
    const double h = 2.0 * pi / grid_resolution;
    const double excl2 = h * h;  // ball radius 2*pi/resolution around 2*pi*Z^2
    double max_abs = 0.0;
    for (int i = -grid_resolution / 2; i <= grid_resolution / 2; ++i) {
        const double t1 = i * h;
        for (int j = -grid_resolution / 2; j <= grid_resolution / 2; ++j) {
            const double t2 = j * h;
            bool excluded = false;
            for (int lx = -1; lx <= 1 && !excluded; ++lx)
                for (int ly = -1; ly <= 1 && !excluded; ++ly) {
                    const double dx = t1 - 2.0 * pi * lx, dy = t2 - 2.0 * pi * ly;
                    if (dx * dx + dy * dy < excl2) excluded = true;
                }
            if (excluded) continue;
            max_abs = std::max(max_abs, std::abs(law.characteristic_function(t1, t2)));
        }
    }
    rep.aperiodicity_margin = 1.0 - max_abs;
    if (std::abs(rep.aperiodicity_margin) < 1e-15) rep.aperiodicity_margin = 0.0;
    return rep;
}

}  // namespace rilt
