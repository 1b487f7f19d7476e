#include "rilt/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "json.hpp"
#include "rilt/martingale.hpp"
#include "rilt/transition_grid.hpp"
#include "rilt/parallel.hpp"
#include "rilt/rng.hpp"

namespace rilt {

namespace {
using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}
}  // namespace

uint64_t fnv_hash_str(const std::string& s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string version_string() { return "rilt 0.1.0"; }

// --------------------------------------------------------------------------
// walk-side sums

std::vector<double> walk_pair_sums(const WalkPath& path, std::span<const double> taus,
                                   const Mollifier& moll) {
    const int64_t n = path.steps();
    if (n < 1) throw std::invalid_argument("walk_pair_sums: empty path");
    const double sqrt_n = std::sqrt(double(n));
    double tau_max = 0.0;
    for (double t : taus) tau_max = std::max(tau_max, t);
    const double r_max = tau_max * sqrt_n;

    SiteCountMap occupancy(size_t(n) + 1);
    for (int64_t i = 0; i <= n; ++i) occupancy.add(path.at(i), 1);
    const auto sites = occupancy.sorted_entries();

    // cell buckets of side ~ r_max over site indices
    const int32_t side = std::max<int32_t>(1, int32_t(std::ceil(r_max)));
    std::unordered_map<uint64_t, std::vector<uint32_t>> cells;
    auto cell_key = [&](LatticePoint p) {
        const int32_t cx = p.x >= 0 ? p.x / side : (p.x - side + 1) / side;
        const int32_t cy = p.y >= 0 ? p.y / side : (p.y - side + 1) / side;
        return (uint64_t(uint32_t(cx + (1 << 20))) << 24) | uint64_t(uint32_t(cy + (1 << 20)));
    };
    auto cell_of = [&](LatticePoint p) {
        return std::pair<int32_t, int32_t>{p.x >= 0 ? p.x / side : (p.x - side + 1) / side,
                                           p.y >= 0 ? p.y / side : (p.y - side + 1) / side};
    };
    for (uint32_t idx = 0; idx < sites.size(); ++idx)
        cells[cell_key(unpack_site(sites[idx].first))].push_back(idx);

    std::vector<KahanSum> acc(taus.size());
    const double r2_max = r_max * r_max;
    for (uint32_t ia = 0; ia < sites.size(); ++ia) {
        const LatticePoint a = unpack_site(sites[ia].first);
        const double la = double(sites[ia].second);
        auto [cx, cy] = cell_of(a);
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
                auto it = cells.find((uint64_t(uint32_t(cx + dx + (1 << 20))) << 24) |
                                     uint64_t(uint32_t(cy + dy + (1 << 20))));
                if (it == cells.end()) continue;
                for (uint32_t ib : it->second) {
                    if (ib <= ia) continue;  // unordered pairs once; v=0 skipped
                    const LatticePoint b = unpack_site(sites[ib].first);
                    const double ddx = double(b.x - a.x), ddy = double(b.y - a.y);
                    const double r2 = ddx * ddx + ddy * ddy;
                    if (r2 >= r2_max) continue;
                    const double r = std::sqrt(r2) / sqrt_n;
                    const double w = la * double(sites[ib].second);
                    for (size_t t = 0; t < taus.size(); ++t) {
                        const double f = moll.f_tau(taus[t], r);
                        if (f != 0.0) acc[t].add(w * f);
                    }
                }
            }
    }
    std::vector<double> out(taus.size());
    for (size_t t = 0; t < taus.size(); ++t) out[t] = acc[t].value() / (double(n) * double(n));
    return out;
}

std::vector<double> walk_chain_integrals(const WalkPath& path, double tau, int k,
                                         const Mollifier& moll) {
    if (k < 2) throw std::invalid_argument("walk_chain_integrals: k must be >= 2");
    const int64_t n = path.steps();
    const double sqrt_n = std::sqrt(double(n));
    const double r_max = tau * sqrt_n;
    const int32_t side = std::max<int32_t>(1, int32_t(std::ceil(r_max)));
    // cells hold time indices, inserted as j advances so queries see i < j
    std::unordered_map<uint64_t, std::vector<uint32_t>> cells;
    auto cell_key = [&](LatticePoint p) {
        const int32_t cx = p.x >= 0 ? p.x / side : (p.x - side + 1) / side;
        const int32_t cy = p.y >= 0 ? p.y / side : (p.y - side + 1) / side;
        return (uint64_t(uint32_t(cx + (1 << 20))) << 24) | uint64_t(uint32_t(cy + (1 << 20)));
    };
    std::vector<std::vector<double>> C(size_t(k) + 1);
    for (int l = 2; l <= k; ++l) C[size_t(l)].assign(size_t(n) + 1, 0.0);
    const double r2_max = r_max * r_max;
    for (int64_t j = 0; j <= n; ++j) {
        const LatticePoint pj = path.at(j);
        const int32_t cx = pj.x >= 0 ? pj.x / side : (pj.x - side + 1) / side;
        const int32_t cy = pj.y >= 0 ? pj.y / side : (pj.y - side + 1) / side;
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy) {
                auto it = cells.find((uint64_t(uint32_t(cx + dx + (1 << 20))) << 24) |
                                     uint64_t(uint32_t(cy + dy + (1 << 20))));
                if (it == cells.end()) continue;
                for (uint32_t i : it->second) {
                    const LatticePoint pi = path.at(i);
                    const double ddx = double(pj.x - pi.x), ddy = double(pj.y - pi.y);
                    const double r2 = ddx * ddx + ddy * ddy;
                    if (r2 >= r2_max || r2 == 0.0) continue;
                    const double f = moll.f_tau(tau, std::sqrt(r2) / sqrt_n);
                    if (f == 0.0) continue;
                    for (int l = k; l >= 2; --l) {
                        const double prev = (l == 2) ? 1.0 : C[size_t(l) - 1][i];
                        if (prev != 0.0) C[size_t(l)][size_t(j)] += f * prev;
                    }
                }
            }
        cells[cell_key(pj)].push_back(uint32_t(j));
    }
    std::vector<double> T(size_t(k) + 1, 0.0);
    T[1] = 1.0;
    for (int l = 2; l <= k; ++l) {
        KahanSum s;
        for (double v : C[size_t(l)]) s.add(v);
        T[size_t(l)] = s.value() / std::pow(double(n), double(l));
    }
    return T;
}

double g_n_sum(const KernelTable& kernel, int64_t n, double tau, const Mollifier& moll) {
    const double sqrt_n = std::sqrt(double(n));
    const int32_t hi = int32_t(std::ceil(tau * sqrt_n));
    KahanSum s;
    for (int32_t i = -hi; i <= hi; ++i)
        for (int32_t j = -hi; j <= hi; ++j) {
            const double r = std::hypot(double(i), double(j)) / sqrt_n;
            const double f = moll.f_tau(tau, r);
            if (f == 0.0) continue;
            s.add(f * kernel.scaled(n, {i, j}));
        }
    return s.value() / double(n);
}

double psi_n(int64_t n, double tau, const Mollifier& moll) {
    const double sqrt_n = std::sqrt(double(n));
    const int32_t hi = int32_t(std::ceil(tau * sqrt_n));
    KahanSum s;
    for (int32_t i = -hi; i <= hi; ++i)
        for (int32_t j = -hi; j <= hi; ++j)
            s.add(moll.f_tau(tau, std::hypot(double(i), double(j)) / sqrt_n));
    return s.value() / double(n);
}

double walk_mollified_beta(const WalkPath& path, const KernelTable& kernel, double tau, int k,
                           const Mollifier& moll) {
    const int64_t n = path.steps();
    if (tau * std::sqrt(double(n)) < 4.0)
        throw std::invalid_argument(
            "walk_mollified_beta: tau too small for n, mollifier unresolved on the lattice");
    std::vector<double> T;
    if (k == 2) {
        const double taus[1] = {tau};
        T = {0.0, 1.0, walk_pair_sums(path, taus, moll)[0]};
    } else {
        T = walk_chain_integrals(path, tau, k, moll);
    }
    const double gn = g_n_sum(kernel, n, tau, moll);
    double binom = 1.0, gpow = 1.0, value = 0.0;
    for (int j = 0; j <= k - 1; ++j) {
        const double sign = (j % 2 == 0) ? 1.0 : -1.0;
        value += sign * binom * gpow * T[size_t(k - j)];
        binom = binom * double(k - 1 - j) / double(j + 1);
        gpow *= gn;
    }
    return value;
}

double walk_mollified_beta_per_x(const WalkPath& path, const KernelTable& kernel, double tau,
                                 int k, const Mollifier& moll) {
    const int64_t n = path.steps();
    const double sqrt_n = std::sqrt(double(n));
    const int32_t hi = int32_t(std::ceil(tau * sqrt_n));
    std::vector<LatticePoint> annulus;
    std::vector<double> fvals;
    for (int32_t i = -hi; i <= hi; ++i)
        for (int32_t j = -hi; j <= hi; ++j) {
            const double f = moll.f_tau(tau, std::hypot(double(i), double(j)) / sqrt_n);
            if (f != 0.0) {
                annulus.push_back({i, j});
                fvals.push_back(f);
            }
        }
    KahanSum s;
    if (k == 2) {
        for (size_t a = 0; a < annulus.size(); ++a) {
            const double b2 = double(count_chains_total(path, ChainSpec(2, {annulus[a]})));
            const double beta = b2 / double(n) - kernel.scaled(n, annulus[a]);
            s.add(fvals[a] * beta);
        }
        return s.value() / double(n);
    }
    if (k == 3) {
        for (size_t a = 0; a < annulus.size(); ++a)
            for (size_t b = 0; b < annulus.size(); ++b) {
                const ChainSpec spec(3, {annulus[a], annulus[b]});
                const double bt = renormalize(path, spec, kernel, n).final_value();
                s.add(fvals[a] * fvals[b] * (bt / double(n)));
            }
        return s.value() / (double(n) * double(n));
    }
    throw std::invalid_argument("walk_mollified_beta_per_x: only k = 2 or 3");
}

// --------------------------------------------------------------------------
// extrapolation

double gamma_grid_step(double tau) {
    const double target = tau * tau / 64.0;
    return std::ldexp(1.0, int(std::floor(std::log2(target))));
}

double extrapolate_gamma(std::span<const double> taus, std::span<const double> values,
                         const std::string& mode) {
    if (taus.size() != values.size() || taus.empty())
        throw std::invalid_argument("extrapolate_gamma: bad inputs");
    std::vector<size_t> order(taus.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return taus[a] < taus[b]; });
    if (mode == "none" || taus.size() == 1) return values[order[0]];
    if (mode == "linear" || taus.size() == 2) {
        const double t0 = taus[order[0]], t1 = taus[order[1]];
        const double v0 = values[order[0]], v1 = values[order[1]];
        return v0 + (v0 - v1) * t0 / (t1 - t0);
    }
    if (mode == "quadratic") {
        const double t0 = taus[order[0]], t1 = taus[order[1]], t2 = taus[order[2]];
        const double v0 = values[order[0]], v1 = values[order[1]], v2 = values[order[2]];
        const double l0 = (0.0 - t1) * (0.0 - t2) / ((t0 - t1) * (t0 - t2));
        const double l1 = (0.0 - t0) * (0.0 - t2) / ((t1 - t0) * (t1 - t2));
        const double l2 = (0.0 - t0) * (0.0 - t1) / ((t2 - t0) * (t2 - t1));
        return l0 * v0 + l1 * v1 + l2 * v2;
    }
    throw std::invalid_argument("extrapolate_gamma: unknown mode " + mode);
}

// --------------------------------------------------------------------------
// invariance experiment

uint64_t InvariancePlan::hash() const {
    std::ostringstream os;
    os << "invariance|k=" << k << "|law=" << law << "|R=" << replicas << "|delta=" << delta
       << "|seed=" << seed << "|extrap=" << extrapolation << "|n=";
    for (auto n : n_grid) os << n << ",";
    os << "|tau=";
    for (auto t : tau_grid) os << t << ",";
    return fnv_hash_str(os.str());
}

namespace {

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

// per-replica checkpoint rows: n,replica,beta,gamma_hat,gamma_tau...
class RowCheckpoint {
public:
    RowCheckpoint(const std::string& out_dir, const std::string& name, uint64_t config_hash,
                  size_t tau_count)
        : tau_count_(tau_count) {
        if (out_dir.empty()) return;
        dir_ = out_dir + "/" + name + "_" + hash_hex(config_hash);
        std::filesystem::create_directories(dir_);
        path_ = dir_ + "/replicas.csv";
        load();
        out_.open(path_, std::ios::app);
        if (existing_.empty() && out_)
            out_ << "# n,replica,beta,gamma_hat,gamma_tau...\n" << std::flush;
    }

    const std::string& dir() const { return dir_; }
    bool enabled() const { return !path_.empty(); }

    bool lookup(int64_t n, int replica, InvarianceRow& row) const {
        auto it = existing_.find(key(n, replica));
        if (it == existing_.end()) return false;
        row = it->second;
        return true;
    }

    void append(const InvarianceRow& row) {
        if (!out_) return;
        std::lock_guard<std::mutex> lk(mu_);
        out_ << row.n << "," << row.replica;
        char buf[40];
        std::snprintf(buf, sizeof buf, ",%.17g", row.beta);
        out_ << buf;
        std::snprintf(buf, sizeof buf, ",%.17g", row.gamma_hat);
        out_ << buf;
        for (double g : row.gamma_tau) {
            std::snprintf(buf, sizeof buf, ",%.17g", g);
            out_ << buf;
        }
        out_ << "\n" << std::flush;
    }

private:
    static uint64_t key(int64_t n, int replica) {
        return (uint64_t(n) << 20) | uint64_t(replica);
    }
    void load() {
        std::ifstream in(path_);
        if (!in) return;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::istringstream ls(line);
            std::string tok;
            std::vector<std::string> parts;
            while (std::getline(ls, tok, ',')) parts.push_back(tok);
            if (parts.size() < 4 + tau_count_) continue;
            InvarianceRow row;
            row.n = std::stoll(parts[0]);
            row.replica = std::stoi(parts[1]);
            row.beta = std::stod(parts[2]);
            row.gamma_hat = std::stod(parts[3]);
            for (size_t t = 0; t < tau_count_; ++t)
                row.gamma_tau.push_back(std::stod(parts[4 + t]));
            existing_[key(row.n, row.replica)] = row;
        }
    }

    size_t tau_count_;
    std::string dir_, path_;
    std::unordered_map<uint64_t, InvarianceRow> existing_;
    std::ofstream out_;
    std::mutex mu_;
};

double beta_at_zero(const WalkPath& walk, const KernelTable& kernel, int k) {
    const int64_t n = walk.steps();
    if (k == 1) return 1.0;
    if (k == 2) {
        // B_2(n, 0) from occupation multiplicities
        SiteCountMap occ(size_t(n) + 1);
        for (int64_t i = 0; i <= n; ++i) occ.add(walk.at(i), 1);
        int64_t pairs = 0;
        occ.for_each([&](LatticePoint, int64_t c) { pairs += c * (c - 1) / 2; });
        return double(pairs) / double(n) - kernel.scaled(n, {0, 0});
    }
    ChainSpec spec(k, std::vector<LatticePoint>(size_t(k - 1), LatticePoint{0, 0}));
    return renormalize(walk, spec, kernel, n).final_value() / double(n);
}

Provenance make_provenance(uint64_t seed, uint64_t config_hash, const KernelTable& kernel) {
    Provenance p;
    p.seed = seed;
    p.config_hash = config_hash;
    p.law_hash = kernel.law().hash();
    p.kernel_disc_radius = kernel.disc_radius();
    p.kernel_kappa = kernel.kappa();
    p.code_version = version_string();
    return p;
}

}  // namespace

InvarianceReport run_invariance(const InvariancePlan& plan, KernelTable& kernel) {
    const auto t0 = Clock::now();
    if (plan.n_grid.empty() || plan.replicas < 1)
        throw std::invalid_argument("invariance plan: empty n_grid or replicas");
    for (size_t i = 1; i < plan.n_grid.size(); ++i)
        if (plan.n_grid[i] <= plan.n_grid[i - 1])
            throw std::invalid_argument("invariance plan: n_grid must be strictly increasing");
    if (plan.replicas < 30)
        throw std::invalid_argument("invariance plan: replicas must be >= 30 for CIs");
    const IncrementLaw law = IncrementLaw::resolve(plan.law);
    const Mollifier moll;
    const uint64_t config_hash = plan.hash();
    const int threads = plan.threads > 0 ? plan.threads : default_threads();

    InvarianceReport rep;
    rep.plan = plan;
    RowCheckpoint ckpt(plan.out_dir, "inv", config_hash, plan.tau_grid.size());

    const size_t total = plan.n_grid.size() * size_t(plan.replicas);
    std::vector<InvarianceRow> rows(total);
    // big n first: better load balance
    std::vector<size_t> order(total);
    for (size_t i = 0; i < total; ++i) order[i] = total - 1 - i;
    parallel_for(int64_t(total), threads, [&](int64_t idx) {
        const size_t task = order[size_t(idx)];
        const size_t n_idx = task / size_t(plan.replicas);
        const int replica = int(task % size_t(plan.replicas));
        const int64_t n = plan.n_grid[n_idx];
        InvarianceRow row;
        if (ckpt.lookup(n, replica, row)) {
            rows[task] = row;
            return;
        }
        row.n = n;
        row.replica = replica;
        const uint64_t stream = (uint64_t(n_idx + 1) << 32) | uint64_t(replica + 1);
        const CoupledPath cp = couple(law, n, plan.delta, plan.seed, stream);
        row.beta = beta_at_zero(cp.walk, kernel, plan.k);
        if (plan.k == 1) {
            row.gamma_tau.assign(plan.tau_grid.size(), 1.0);
            row.gamma_hat = 1.0;
        } else {
            for (double tau : plan.tau_grid) {
                const int64_t stride = stride_for(cp, n, gamma_grid_step(tau));
                const auto pts = rescaled_bm(cp, stride);
                const double h = double(stride) * cp.delta_grid / double(n);
                row.gamma_tau.push_back(mollified_gamma(pts, h, tau, plan.k, moll).value);
            }
            row.gamma_hat = extrapolate_gamma(plan.tau_grid, row.gamma_tau, plan.extrapolation);
        }
        rows[task] = row;
        ckpt.append(row);
    });
    rep.rows = std::move(rows);

    // per-n statistics
    std::vector<std::vector<double>> d(plan.n_grid.size()), d_ind(plan.n_grid.size());
    for (size_t ni = 0; ni < plan.n_grid.size(); ++ni) {
        d[ni].resize(size_t(plan.replicas));
        d_ind[ni].resize(size_t(plan.replicas));
        for (int r = 0; r < plan.replicas; ++r) {
            const auto& row = rep.rows[ni * size_t(plan.replicas) + size_t(r)];
            const auto& other =
                rep.rows[ni * size_t(plan.replicas) + size_t((r + 1) % plan.replicas)];
            d[ni][size_t(r)] = std::abs(row.beta - row.gamma_hat);
            d_ind[ni][size_t(r)] = std::abs(row.beta - other.gamma_hat);
        }
        rep.median_d.push_back(median_of(d[ni]));
        rep.median_d_indep.push_back(median_of(d_ind[ni]));
        rep.l2_d.push_back(rms_of(d[ni]));
    }
    std::vector<double> log_n;
    for (int64_t n : plan.n_grid) log_n.push_back(std::log(double(n)));
    if (plan.k == 1) {
        // degenerate: D identically 0, no slopes to fit
        rep.pass_coupled_slope = rep.pass_l2_slope = rep.pass_control = true;
    } else {
        rep.slope_median = fit_slope_bootstrap(log_n, d, SlopeStat::Median, 1000, plan.seed);
        rep.slope_l2 = fit_slope_bootstrap(log_n, d, SlopeStat::Rms, 1000, plan.seed);
        rep.slope_indep = fit_slope_bootstrap(log_n, d_ind, SlopeStat::Median, 1000, plan.seed);
        rep.control_exceed_prob =
            bootstrap_median_exceeds(d_ind.back(), d.back(), 1000, plan.seed);
        rep.pass_coupled_slope = rep.slope_median.slope < 0.0 && rep.slope_median.ci_hi < 0.0;
        rep.pass_l2_slope = rep.slope_l2.slope < 0.0 && rep.slope_l2.ci_hi < 0.0;
        rep.pass_control = rep.control_exceed_prob >= 0.95;
    }
    rep.provenance = make_provenance(plan.seed, config_hash, kernel);
    rep.elapsed_seconds = seconds_since(t0);

    if (ckpt.enabled()) {
        {
            std::ofstream tsv(ckpt.dir() + "/rates.tsv");
            tsv << "log_n\tlog_median_d\tlog_l2_d\tlog_median_d_indep\n";
            for (size_t ni = 0; ni < plan.n_grid.size(); ++ni)
                tsv << log_n[ni] << "\t" << std::log(rep.median_d[ni]) << "\t"
                    << std::log(rep.l2_d[ni]) << "\t" << std::log(rep.median_d_indep[ni]) << "\n";
        }
        std::ofstream js(ckpt.dir() + "/summary.json");
        js << rep.to_json();
    }
    return rep;
}

std::string InvarianceReport::to_json() const {
    nlohmann::json j;
    j["experiment"] = "invariance";
    j["plan"] = {{"k", plan.k},
                 {"law", plan.law},
                 {"n_grid", plan.n_grid},
                 {"replicas", plan.replicas},
                 {"tau_grid", plan.tau_grid},
                 {"delta", plan.delta},
                 {"seed", plan.seed},
                 {"extrapolation", plan.extrapolation}};
    j["median_d"] = median_d;
    j["median_d_indep"] = median_d_indep;
    j["l2_d"] = l2_d;
    auto slope_json = [](const SlopeFit& s) {
        return nlohmann::json{
            {"slope", s.slope}, {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi}};
    };
    j["slope_median"] = slope_json(slope_median);
    j["slope_l2"] = slope_json(slope_l2);
    j["slope_indep"] = slope_json(slope_indep);
    j["control_exceed_prob"] = control_exceed_prob;
    j["flags"] = {{"coupled_slope_negative", pass_coupled_slope},
                  {"l2_slope_negative", pass_l2_slope},
                  {"independent_control", pass_control}};
    j["provenance"] = {{"seed", provenance.seed},
                       {"config_hash", hash_hex(provenance.config_hash)},
                       {"law_hash", hash_hex(provenance.law_hash)},
                       {"kernel_disc_radius", provenance.kernel_disc_radius},
                       {"kernel_kappa", provenance.kernel_kappa},
                       {"code_version", provenance.code_version}};
    j["elapsed_seconds"] = elapsed_seconds;
    j["report_hash"] = hash_hex(report_hash());
    return j.dump(2) + "\n";
}

uint64_t InvarianceReport::report_hash() const {
    std::ostringstream os;
    os << hash_hex(plan.hash()) << "|" << provenance.code_version << "|";
    for (const auto& row : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%lld:%d:%.17g:%.17g|", (long long)row.n, row.replica,
                      row.beta, row.gamma_hat);
        os << buf;
    }
    return fnv_hash_str(os.str());
}

// --------------------------------------------------------------------------
// Hoelder experiment

uint64_t HolderPlan::hash() const {
    std::ostringstream os;
    os << "holder|k=" << k << "|law=" << law << "|R=" << replicas << "|seed=" << seed << "|n=";
    for (auto n : n_values) os << n << ",";
    os << "|ladder=";
    for (auto d : ladder) os << d << ",";
    return fnv_hash_str(os.str());
}

HolderReport run_holder(const HolderPlan& plan, KernelTable& kernel) {
    const auto t0 = Clock::now();
    if (plan.k != 2) throw std::invalid_argument("holder experiment: only k = 2 implemented");
    const IncrementLaw law = IncrementLaw::resolve(plan.law);
    const int threads = plan.threads > 0 ? plan.threads : default_threads();
    HolderReport rep;
    rep.plan = plan;

    const size_t L = plan.ladder.size();
    // sq[ni][li][replica] = |beta(n, d e1/sqrt n) - beta(n, 0)|^2
    std::vector<std::vector<std::vector<double>>> sq(plan.n_values.size());
    for (size_t ni = 0; ni < plan.n_values.size(); ++ni) {
        sq[ni].assign(L, std::vector<double>(size_t(plan.replicas)));
        const int64_t n = plan.n_values[ni];
        std::vector<double> gdiff(L);
        for (size_t li = 0; li < L; ++li)
            gdiff[li] = kernel.scaled(n, {plan.ladder[li], 0}) - kernel.scaled(n, {0, 0});
        parallel_for(plan.replicas, threads, [&](int64_t r) {
            const WalkPath path =
                simulate(law, n, plan.seed, (uint64_t(ni + 1) << 32) | uint64_t(r + 1));
            // one occupation pass gives B_2(n, v) for every ladder offset:
            // query before inserting the current position keeps i < j
            SiteCountMap occ(size_t(n) + 1);
            std::vector<int64_t> b2(L + 1, 0);  // slot 0 = offset (0,0)
            for (int64_t i = 0; i <= n; ++i) {
                const LatticePoint p = path.at(i);
                b2[0] += occ.get(p);
                for (size_t li = 0; li < L; ++li)
                    b2[li + 1] += occ.get(p - LatticePoint{plan.ladder[li], 0});
                occ.add(p, 1);
            }
            for (size_t li = 0; li < L; ++li) {
                const double dbeta =
                    double(b2[li + 1] - b2[0]) / double(n) - gdiff[li];
                sq[ni][li][size_t(r)] = dbeta * dbeta;
            }
        });

        std::vector<double> log_d, log_m2;
        rep.moment2.emplace_back();
        for (size_t li = 0; li < L; ++li) {
            const double m2 = mean_of(sq[ni][li]);
            rep.moment2.back().push_back(m2);
            log_d.push_back(std::log(double(plan.ladder[li])));
            log_m2.push_back(std::log(m2));
        }
        rep.exponent.push_back(ols_slope(log_d, log_m2));

        // bootstrap over replicas
        RandomStream rs(plan.seed, 0xb010);
        std::vector<double> slopes;
        for (int b = 0; b < 1000; ++b) {
            std::vector<double> yb(L);
            for (size_t li = 0; li < L; ++li) {
                double s = 0.0;
                for (int r = 0; r < plan.replicas; ++r)
                    s += sq[ni][li][size_t(rs.next_u64() % uint64_t(plan.replicas))];
                yb[li] = std::log(s / double(plan.replicas));
            }
            slopes.push_back(ols_slope(log_d, yb));
        }
        rep.exponent_ci_lo.push_back(quantile_of(slopes, 0.025));
        rep.exponent_ci_hi.push_back(quantile_of(slopes, 0.975));
    }

    // envelope constant stability across the n values (reported, not gated)
    double worst_ratio = 1.0;
    if (plan.n_values.size() >= 2) {
        for (size_t li = 0; li < L; ++li) {
            std::vector<double> consts;
            for (size_t ni = 0; ni < plan.n_values.size(); ++ni) {
                const double n = double(plan.n_values[ni]);
                const double env = std::log(n) * std::log(n) * n *
                                   std::pow(double(plan.ladder[li]) / std::sqrt(n), 2.0 / 3.0);
                consts.push_back(rep.moment2[ni][li] / env);
            }
            const auto [lo, hi] = std::minmax_element(consts.begin(), consts.end());
            worst_ratio = std::max(worst_ratio, *hi / *lo);
        }
    }
    rep.envelope_const_ratio = worst_ratio;
    rep.pass_exponent = rep.exponent[0] >= 0.53;
    rep.provenance = make_provenance(plan.seed, plan.hash(), kernel);
    rep.elapsed_seconds = seconds_since(t0);

    if (!plan.out_dir.empty()) {
        std::filesystem::create_directories(plan.out_dir);
        std::ofstream js(plan.out_dir + "/holder_" + hash_hex(plan.hash()) + ".json");
        js << rep.to_json();
    }
    return rep;
}

std::string HolderReport::to_json() const {
    nlohmann::json j;
    j["experiment"] = "holder";
    j["plan"] = {{"k", plan.k},
                 {"law", plan.law},
                 {"n_values", plan.n_values},
                 {"ladder", plan.ladder},
                 {"replicas", plan.replicas},
                 {"seed", plan.seed}};
    j["moment2"] = moment2;
    j["exponent"] = exponent;
    j["exponent_ci_lo"] = exponent_ci_lo;
    j["exponent_ci_hi"] = exponent_ci_hi;
    j["envelope_const_ratio"] = envelope_const_ratio;
    j["pass_exponent"] = pass_exponent;
    j["elapsed_seconds"] = elapsed_seconds;
    return j.dump(2) + "\n";
}

// --------------------------------------------------------------------------

uint64_t CouplingRatePlan::hash() const {
    std::ostringstream os;
    os << "couplingrate|law=" << law << "|R=" << replicas << "|delta=" << delta
       << "|seed=" << seed << "|n=";
    for (auto n : n_grid) os << n << ",";
    return fnv_hash_str(os.str());
}

CouplingRateReport run_coupling_rate(const CouplingRatePlan& plan) {
    const auto t0 = Clock::now();
    const IncrementLaw law = IncrementLaw::resolve(plan.law);
    const int threads = plan.threads > 0 ? plan.threads : default_threads();
    CouplingRateReport rep;
    rep.plan = plan;
    rep.sup_distances.assign(plan.n_grid.size(), std::vector<double>(size_t(plan.replicas)));
    const size_t total = plan.n_grid.size() * size_t(plan.replicas);
    parallel_for(int64_t(total), threads, [&](int64_t idx) {
        const size_t task = total - 1 - size_t(idx);
        const size_t ni = task / size_t(plan.replicas);
        const int r = int(task % size_t(plan.replicas));
        const uint64_t stream = (uint64_t(ni + 101) << 32) | uint64_t(r + 1);
        const CoupledPath cp = couple(law, plan.n_grid[ni], plan.delta, plan.seed, stream);
        rep.sup_distances[ni][size_t(r)] = sup_scaled_distance(cp);
    });
    std::vector<double> log_n;
    for (int64_t n : plan.n_grid) log_n.push_back(std::log(double(n)));
    for (auto& v : rep.sup_distances) rep.medians.push_back(median_of(v));
    rep.slope = fit_slope_bootstrap(log_n, rep.sup_distances, SlopeStat::Median, 1000, plan.seed);
    rep.pass = rep.slope.slope <= -0.15 && rep.slope.ci_hi < 0.0;
    rep.elapsed_seconds = seconds_since(t0);
    return rep;
}

std::string CouplingRateReport::to_json() const {
    nlohmann::json j;
    j["experiment"] = "coupling_rate";
    j["n_grid"] = plan.n_grid;
    j["replicas"] = plan.replicas;
    j["delta"] = plan.delta;
    j["medians"] = medians;
    j["slope"] = {{"slope", slope.slope}, {"ci_lo", slope.ci_lo}, {"ci_hi", slope.ci_hi}};
    j["pass"] = pass;
    j["elapsed_seconds"] = elapsed_seconds;
    return j.dump(2) + "\n";
}

// --------------------------------------------------------------------------

MartingaleMeanReport run_martingale_mean(const IncrementLaw& law, KernelTable& kernel,
                                         LatticePoint x, std::vector<int64_t> m_n_values,
                                         std::vector<int64_t> beta_n_values, int replicas,
                                         uint64_t seed, int threads) {
    const auto t0 = Clock::now();
    if (threads <= 0) threads = default_threads();
    MartingaleMeanReport rep;
    rep.m_n_values = m_n_values;
    rep.beta_n_values = beta_n_values;
    const KernelAccess ka{&kernel, /*exact=*/false, {0, 0}, 0.0};

    rep.pass_m_centered = true;
    for (size_t ni = 0; ni < m_n_values.size(); ++ni) {
        const int64_t n = m_n_values[ni];
        std::vector<double> vals(std::size_t(replicas), 0.0);
        parallel_for(replicas, threads, [&](int64_t r) {
            const WalkPath path =
                simulate(law, n, seed, (uint64_t(ni + 11) << 32) | uint64_t(r + 1));
            vals[size_t(r)] = martingale_final_k2(path, x, ka);
        });
        const double m = mean_of(vals);
        const double se = std::sqrt(variance_of(vals) / double(replicas));
        rep.m_means.push_back(m);
        rep.m_stderrs.push_back(se);
        if (std::abs(m) > 3.0 * se) rep.pass_m_centered = false;
    }

    rep.pass_beta_matches = true;
    for (size_t ni = 0; ni < beta_n_values.size(); ++ni) {
        const int64_t n = beta_n_values[ni];
        // exact E[B_2(n,0)] = sum_{m=1}^{n} (n+1-m) p(m,0,0)
        const auto p0 = TransitionGrid::return_probabilities(law, int(n));
        KahanSum eb;
        for (int64_t m = 1; m <= n; ++m) eb.add(double(n + 1 - m) * p0[size_t(m)]);
        const double exact = eb.value() / double(n) - kernel.scaled(n, {0, 0});
        rep.beta_exact.push_back(exact);
        std::vector<double> vals(std::size_t(replicas), 0.0);
        parallel_for(replicas, threads, [&](int64_t r) {
            const WalkPath path =
                simulate(law, n, seed, (uint64_t(ni + 51) << 32) | uint64_t(r + 1));
            vals[size_t(r)] = beta_at_zero(path, kernel, 2);
        });
        const double m = mean_of(vals);
        const double se = std::sqrt(variance_of(vals) / double(replicas));
        rep.beta_means.push_back(m);
        rep.beta_stderrs.push_back(se);
        if (std::abs(m - exact) > 3.0 * se) rep.pass_beta_matches = false;
    }
    rep.elapsed_seconds = seconds_since(t0);
    return rep;
}

// --------------------------------------------------------------------------

MomentTrendReport run_moment_trend(const IncrementLaw& law, KernelTable& kernel, int64_t n_lo,
                                   int replicas_count, int replicas_corrector, uint64_t seed,
                                   int threads) {
    const auto t0 = Clock::now();
    if (threads <= 0) threads = default_threads();
    MomentTrendReport rep;
    rep.n_lo = n_lo;
    rep.n_hi = 2 * n_lo;
    const LatticePoint x{0, 0}, xp{1, 0};

    auto mean_sq = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double a : v) s += a * a;
        return s / double(v.size());
    };
    const double log_dx = 1.0;  // |x - x'| = 1

    for (int which = 0; which < 2; ++which) {
        const int64_t n = which == 0 ? rep.n_lo : rep.n_hi;
        const double logn = std::log(double(n));
        std::vector<double> w2(std::size_t(replicas_count), 0.0);
        std::vector<double> y2(std::size_t(replicas_count), 0.0);
        std::vector<double> w3(std::size_t(replicas_count), 0.0);
        parallel_for(replicas_count, threads, [&](int64_t r) {
            const WalkPath path = simulate(law, n, seed,
                                           (uint64_t(which + 21) << 32) | uint64_t(r + 1));
            const ChainCounter cx = count_chains(path, ChainSpec(2, {x}));
            const ChainCounter cxp = count_chains(path, ChainSpec(2, {xp}));
            w2[size_t(r)] = double(cx.total() + cxp.total());
            int64_t worst = 0;
            for (size_t i = 0; i < cx.increments.size(); ++i)
                worst = std::max(worst, cx.increments[i] + cxp.increments[i]);
            y2[size_t(r)] = double(worst);
            const int64_t b3 = count_chains_total(path, ChainSpec(3, {x, x}));
            const int64_t b3p = count_chains_total(path, ChainSpec(3, {xp, x}));
            w3[size_t(r)] = double(b3 + b3p);
        });
        std::vector<double> z2(std::size_t(replicas_corrector), 0.0);
        parallel_for(replicas_corrector, threads, [&](int64_t r) {
            const WalkPath path = simulate(law, n, seed,
                                           (uint64_t(which + 31) << 32) | uint64_t(r + 1));
            // sup_j |U~2(j,x) - U~2(j,x')|; the G_n shift cancels in the diff
            double worst = 0.0;
            for (int64_t j = 1; j <= n; ++j) {
                KahanSum diff;
                const LatticePoint pj = path.at(j);
                for (int64_t i = 0; i < j; ++i) {
                    const LatticePoint base = pj - path.at(i);
                    diff.add(kernel.at_fast(base - x) - kernel.at_fast(base - xp));
                }
                worst = std::max(worst, std::abs(diff.value()));
            }
            z2[size_t(r)] = worst;
        });

        auto put = [&](const std::string& name, double stat, double envelope) {
            auto& e = rep.entries[name];
            (which == 0 ? e.ratio_lo : e.ratio_hi) = stat / envelope;
        };
        put("W2", mean_sq(w2), logn * logn * double(n) * double(n));
        put("Y2", mean_sq(y2), double(n) * logn * logn);
        put("W3", mean_sq(w3), std::pow(logn, 4.0) * double(n) * double(n));
        put("Z2", mean_sq(z2),
            double(n) * double(n) * std::pow(log_dx / std::sqrt(double(n)), 4.0 / 3.0));
    }
    rep.pass_all = true;
    for (auto& [name, e] : rep.entries) {
        e.growth = e.ratio_hi / e.ratio_lo;
        e.pass = e.growth <= 3.0;
        if (!e.pass) rep.pass_all = false;
    }
    rep.elapsed_seconds = seconds_since(t0);
    return rep;
}

}  // namespace rilt
