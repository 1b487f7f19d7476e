#include "rilt/walk.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "rilt/rng.hpp"

namespace rilt {

WalkPath simulate(const IncrementLaw& law, int64_t n, uint64_t seed, uint64_t stream) {
    if (n < 0) throw std::invalid_argument("simulate: n must be >= 0");
    std::vector<double> probs;
    probs.reserve(law.atoms().size());
    for (const auto& a : law.atoms()) probs.push_back(a.prob.to_double());
    AliasTable alias(probs);
    RandomStream rs(seed, stream);

    WalkPath path;
    path.law_hash = law.hash();
    path.seed = seed;
    path.stream = stream;
    path.positions.resize(size_t(n) + 1);
    path.positions[0] = {0, 0};
    LatticePoint cur{0, 0};
    for (int64_t i = 1; i <= n; ++i) {
        cur = cur + law.atoms()[alias.sample(rs)].step;
        path.positions[size_t(i)] = cur;
    }
    return path;
}

Vec2 scaled_position(const WalkPath& path, double t) {
    if (t < 0.0 || t > 1.0) throw std::domain_error("scaled_position: t outside [0,1]");
    const int64_t n = path.steps();
    if (n < 1) throw std::domain_error("scaled_position: path must have n >= 1");
    const int64_t i = std::min<int64_t>(int64_t(std::floor(t * double(n))), n);
    const double s = std::sqrt(double(n));
    const LatticePoint p = path.at(i);
    return {p.x / s, p.y / s};
}

namespace {
void put_i32_le(std::ostream& os, int32_t v) {
    unsigned char b[4] = {(unsigned char)(v & 0xff), (unsigned char)((v >> 8) & 0xff),
                          (unsigned char)((v >> 16) & 0xff), (unsigned char)((v >> 24) & 0xff)};
    os.write(reinterpret_cast<const char*>(b), 4);
}
int32_t get_i32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return int32_t(uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
                   (uint32_t(b[3]) << 24));
}
}  // namespace

void dump_path(const WalkPath& path, const std::string& file) {
    std::ofstream os(file, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open path dump for writing: " + file);
    for (const auto& p : path.positions) {
        put_i32_le(os, p.x);
        put_i32_le(os, p.y);
    }
}

std::vector<LatticePoint> load_path_dump(const std::string& file) {
    std::ifstream is(file, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open path dump: " + file);
    std::vector<LatticePoint> pts;
    while (true) {
        int32_t x = get_i32_le(is);
        if (!is) break;
        int32_t y = get_i32_le(is);
        if (!is) throw std::runtime_error("truncated path dump: " + file);
        pts.push_back({x, y});
    }
    return pts;
}

}  // namespace rilt
