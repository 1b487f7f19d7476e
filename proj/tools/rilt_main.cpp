#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "rilt/chain_counts.hpp"
#include "rilt/coupling.hpp"
#include "rilt/experiments.hpp"
#include "rilt/martingale.hpp"
#include "rilt/mollifier.hpp"
#include "rilt/parallel.hpp"
#include "rilt/potential_kernel.hpp"
#include "rilt/rng.hpp"
#include "rilt/walk.hpp"

namespace {

using namespace rilt;

std::string cache_dir_from_env() {
    if (const char* env = std::getenv("RILT_CACHE_DIR")) return env;
    return "";
}

std::vector<LatticePoint> parse_offsets(const std::string& text, int k) {
    std::vector<LatticePoint> offs;
    std::istringstream is(text);
    std::string part;
    while (std::getline(is, part, ';')) {
        if (part.empty()) continue;
        int x, y;
        if (std::sscanf(part.c_str(), "%d,%d", &x, &y) != 2)
            throw CLI::ValidationError("--offsets", "expected \"x2,y2;x3,y3;...\"");
        offs.push_back({x, y});
    }
    if (int(offs.size()) != k - 1)
        throw CLI::ValidationError("--offsets", "need exactly k-1 offsets");
    return offs;
}

template <typename T>
T get_checked(const nlohmann::json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const std::exception&) {
        throw std::runtime_error("config key '" + key + "' has the wrong type");
    }
}

void reject_unknown_keys(const nlohmann::json& j, std::initializer_list<const char*> known) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known)
            if (key == k) ok = true;
        if (!ok) throw std::runtime_error("unknown config key '" + key + "'");
    }
}

InvariancePlan load_invariance_plan(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config: " + file);
    nlohmann::json j;
    in >> j;
    reject_unknown_keys(j, {"experiment", "k", "law", "n_grid", "replicas", "tau_grid", "delta",
                            "seed", "extrapolation", "out_dir", "threads"});
    InvariancePlan plan;
    plan.k = get_checked<int>(j, "k", plan.k);
    plan.law = get_checked<std::string>(j, "law", plan.law);
    plan.n_grid = get_checked<std::vector<int64_t>>(j, "n_grid", plan.n_grid);
    plan.replicas = get_checked<int>(j, "replicas", plan.replicas);
    plan.tau_grid = get_checked<std::vector<double>>(j, "tau_grid", plan.tau_grid);
    plan.delta = get_checked<double>(j, "delta", plan.delta);
    plan.seed = get_checked<uint64_t>(j, "seed", plan.seed);
    plan.extrapolation = get_checked<std::string>(j, "extrapolation", plan.extrapolation);
    plan.out_dir = get_checked<std::string>(j, "out_dir", std::string("runs"));
    plan.threads = get_checked<int>(j, "threads", plan.threads);
    return plan;
}

HolderPlan load_holder_plan(const std::string& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config: " + file);
    nlohmann::json j;
    in >> j;
    reject_unknown_keys(j, {"experiment", "k", "law", "n_values", "ladder", "replicas", "seed",
                            "out_dir", "threads"});
    HolderPlan plan;
    plan.k = get_checked<int>(j, "k", plan.k);
    plan.law = get_checked<std::string>(j, "law", plan.law);
    plan.n_values = get_checked<std::vector<int64_t>>(j, "n_values", plan.n_values);
    plan.ladder = get_checked<std::vector<int32_t>>(j, "ladder", plan.ladder);
    plan.replicas = get_checked<int>(j, "replicas", plan.replicas);
    plan.seed = get_checked<uint64_t>(j, "seed", plan.seed);
    plan.out_dir = get_checked<std::string>(j, "out_dir", std::string("runs"));
    plan.threads = get_checked<int>(j, "threads", plan.threads);
    return plan;
}

KernelTable kernel_for(const IncrementLaw& law, int radius, int threads) {
    return ensure_kernel(law, radius, cache_dir_from_env(), threads);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rilt: renormalized intersection local time toolkit"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker pool size (default: hardware)");

    std::string law_name = "default";
    int grid_res = 256;
    auto* sc_validate = app.add_subcommand("law-validate", "check walk hypotheses for a law");
    sc_validate->add_option("--law", law_name, "built-in name or law JSON file");
    sc_validate->add_option("--grid", grid_res, "phi grid resolution (>= 64)");

    std::string kr_law = "default", kr_out = "kernel.bin";
    int kr_radius = 64;
    auto* sc_kernel = app.add_subcommand("kernel", "build a potential kernel cache");
    sc_kernel->add_option("--law", kr_law);
    sc_kernel->add_option("--radius", kr_radius);
    sc_kernel->add_option("--out", kr_out);

    int ct_k = 2;
    int64_t ct_n = 100000;
    std::string ct_offsets = "0,0", ct_law = "default", ct_csv, ct_dump;
    uint64_t ct_seed = 1, ct_stream = 0;
    auto* sc_count = app.add_subcommand("count", "simulate a walk and count chains");
    sc_count->add_option("--k", ct_k);
    sc_count->add_option("--offsets", ct_offsets, "\"x2,y2;x3,y3;...\"");
    sc_count->add_option("--n", ct_n);
    sc_count->add_option("--law", ct_law);
    sc_count->add_option("--seed", ct_seed);
    sc_count->add_option("--stream", ct_stream);
    sc_count->add_option("--csv", ct_csv, "series CSV output path");
    sc_count->add_option("--dump-path", ct_dump, "binary path dump (int32 LE pairs)");

    int mc_k = 2, mc_replicas = 100;
    int64_t mc_n = 200;
    double mc_tol = 1e-8;
    std::string mc_law = "default", mc_json;
    uint64_t mc_seed = 7;
    auto* sc_mart = app.add_subcommand("martingale-check", "exact one-step conditional checks");
    sc_mart->add_option("--k", mc_k);
    sc_mart->add_option("--n", mc_n, "max prefix length");
    sc_mart->add_option("--replicas", mc_replicas);
    sc_mart->add_option("--tolerance", mc_tol);
    sc_mart->add_option("--law", mc_law);
    sc_mart->add_option("--seed", mc_seed);
    sc_mart->add_option("--json", mc_json, "residual report output path");

    int64_t cp_n = 65536;
    double cp_delta = 0x1p-10;
    int cp_replicas = 8;
    uint64_t cp_seed = 11;
    std::string cp_law = "default", cp_dump;
    auto* sc_couple = app.add_subcommand("couple", "walk-Brownian coupling diagnostics");
    sc_couple->add_option("--n", cp_n);
    sc_couple->add_option("--delta", cp_delta, "scan grid step (power of two <= 2^-6)");
    sc_couple->add_option("--replicas", cp_replicas);
    sc_couple->add_option("--seed", cp_seed);
    sc_couple->add_option("--law", cp_law);
    sc_couple->add_option("--dump-bm", cp_dump, "binary dump of replica 0 grid (f64 LE pairs)");

    int gm_k = 2;
    int64_t gm_n = 16384;
    double gm_tau = 0.1, gm_delta = 0x1p-10;
    uint64_t gm_seed = 13, gm_stream = 1;
    std::string gm_law = "default";
    auto* sc_gamma = app.add_subcommand("gamma", "mollified Brownian estimate on a coupled path");
    sc_gamma->add_option("--n", gm_n);
    sc_gamma->add_option("--tau", gm_tau);
    sc_gamma->add_option("--k", gm_k);
    sc_gamma->add_option("--delta", gm_delta);
    sc_gamma->add_option("--seed", gm_seed);
    sc_gamma->add_option("--stream", gm_stream);
    sc_gamma->add_option("--law", gm_law);

    std::string inv_config;
    auto* sc_inv = app.add_subcommand("invariance", "walk vs Brownian closeness experiment");
    sc_inv->add_option("--config", inv_config)->required();

    std::string hl_config;
    auto* sc_holder = app.add_subcommand("holder", "beta-tilde increment moment experiment");
    sc_holder->add_option("--config", hl_config)->required();

    std::string rp_config;
    auto* sc_report = app.add_subcommand("report", "re-print the summary for a finished run");
    sc_report->add_option("--config", rp_config)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n" << app.help() << "\n";
        return 64;
    }

    try {
        if (sc_validate->parsed()) {
            const IncrementLaw law = IncrementLaw::resolve(law_name);
            const auto rep = validate(law, grid_res);
            std::printf("law %s: %s\n", law.name().c_str(), rep.summary().c_str());
            return 0;
        }
        if (sc_kernel->parsed()) {
            const IncrementLaw law = IncrementLaw::resolve(kr_law);
            const auto rep = validate(law, 256);
            if (!rep.symmetric || rep.aperiodicity_margin <= 0.0) {
                std::fprintf(stderr,
                             "refusing to build kernel for '%s': aperiodicity margin is %g "
                             "(needs > 0)\n",
                             law.name().c_str(), rep.aperiodicity_margin);
                return 1;
            }
            KernelTable table(law);
            table.build_disc(kr_radius, threads);
            if (kr_radius >= 16) {
                table.set_kappa(fit_kappa(table, 0.55 * kr_radius, 0.92 * kr_radius));
                table.fit_far_field();
            }
            table.save(kr_out);
            std::printf("kernel: law=%s radius=%d kappa=%.9f points=%zu -> %s\n",
                        law.name().c_str(), kr_radius, table.kappa(),
                        table.cached_points().size(), kr_out.c_str());
            return 0;
        }
        if (sc_count->parsed()) {
            const IncrementLaw law = IncrementLaw::resolve(ct_law);
            const ChainSpec spec(ct_k, parse_offsets(ct_offsets, ct_k));
            const WalkPath path = simulate(law, ct_n, ct_seed, ct_stream);
            if (!ct_dump.empty()) dump_path(path, ct_dump);
            const ChainCounter counter = count_chains(path, spec);
            KernelTable table = kernel_for(law, 64, threads);
            const RenormalizedSeries series = renormalize(path, spec, table, ct_n);
            std::printf("B_k(n)=%lld  B~_k(n)=%.6f  beta~_k=%.6f\n",
                        (long long)counter.total(), series.final_value(),
                        ct_k == 1 ? 1.0 : series.beta(ct_n));
            if (!ct_csv.empty()) {
                export_series_csv(counter, series, ct_csv);
                std::printf("series -> %s\n", ct_csv.c_str());
            }
            return 0;
        }
        if (sc_mart->parsed()) {
            const IncrementLaw law = IncrementLaw::resolve(mc_law);
            KernelTable table = kernel_for(law, 64, threads);
            std::vector<LatticePoint> offs;
            if (mc_k == 2) offs = {{1, 1}};
            else
                for (int j = 0; j < mc_k - 1; ++j) offs.push_back({j % 2, (j + 1) % 2});
            const ChainSpec spec(mc_k, offs);
            std::vector<double> residuals;
            double worst = 0.0;
            for (int r = 0; r < mc_replicas; ++r) {
                RandomStream rs(mc_seed, uint64_t(r) + 1000);
                const int64_t len = 2 + int64_t(rs.next_u64() % uint64_t(mc_n - 1));
                const WalkPath prefix = simulate(law, len, mc_seed, uint64_t(r));
                // make sure every site the enumeration touches has an exact value
                int64_t reach = 0;
                for (const auto& p : prefix.positions)
                    reach = std::max<int64_t>(reach, std::max(std::abs(p.x), std::abs(p.y)));
                table.extend_disc(int(std::min<int64_t>(reach + 6, 192)), threads);
                KernelAccess ka{&table, true, {0, 0}, 0.0};
                const double res = exact_onestep_residual(prefix, spec, len, ka);
                residuals.push_back(res);
                worst = std::max(worst, res);
            }
            std::printf("martingale-check k=%d: %d prefixes, worst |E[dM|F]| = %.3e "
                        "(tolerance %.1e)\n",
                        mc_k, mc_replicas, worst, mc_tol);
            if (!mc_json.empty()) {
                nlohmann::json j;
                j["k"] = mc_k;
                j["tolerance"] = mc_tol;
                j["residuals"] = residuals;
                j["worst"] = worst;
                std::ofstream os(mc_json);
                os << j.dump(2) << "\n";
            }
            return worst <= mc_tol ? 0 : 2;
        }
        if (sc_couple->parsed()) {
            const IncrementLaw law = IncrementLaw::resolve(cp_law);
            std::vector<double> sups(std::size_t(cp_replicas), 0.0);
            parallel_for(cp_replicas, threads ? threads : default_threads(), [&](int64_t r) {
                const CoupledPath cp = couple(law, cp_n, cp_delta, cp_seed, uint64_t(r) + 1);
                sups[size_t(r)] = sup_scaled_distance(cp);
                if (r == 0 && !cp_dump.empty()) dump_bm(cp, cp_dump);
            });
            std::printf("couple n=%lld delta=%g replicas=%d: sup|X^n - W^n| median=%.4f "
                        "min=%.4f max=%.4f\n",
                        (long long)cp_n, cp_delta, cp_replicas, median_of(sups),
                        *std::min_element(sups.begin(), sups.end()),
                        *std::max_element(sups.begin(), sups.end()));
            return 0;
        }
        if (sc_gamma->parsed()) {
            const IncrementLaw law = IncrementLaw::resolve(gm_law);
            const Mollifier moll;
            const CoupledPath cp = couple(law, gm_n, gm_delta, gm_seed, gm_stream);
            const int64_t stride = stride_for(cp, gm_n, gamma_grid_step(gm_tau));
            const auto pts = rescaled_bm(cp, stride);
            const double h = double(stride) * cp.delta_grid / double(gm_n);
            const auto est = mollified_gamma(pts, h, gm_tau, gm_k, moll);
            nlohmann::json j;
            j["k"] = est.k;
            j["tau"] = est.tau;
            j["h"] = est.h;
            j["value"] = est.value;
            j["l_f_tau"] = est.l_f_tau;
            j["components"] = est.components;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (sc_inv->parsed()) {
            InvariancePlan plan = load_invariance_plan(inv_config);
            if (threads > 0) plan.threads = threads;
            const IncrementLaw law = IncrementLaw::resolve(plan.law);
            KernelTable table = kernel_for(law, 64, plan.threads);
            const auto rep = run_invariance(plan, table);
            std::cout << rep.to_json();
            return (rep.pass_coupled_slope && rep.pass_l2_slope && rep.pass_control) ? 0 : 2;
        }
        if (sc_holder->parsed()) {
            HolderPlan plan = load_holder_plan(hl_config);
            if (threads > 0) plan.threads = threads;
            const IncrementLaw law = IncrementLaw::resolve(plan.law);
            KernelTable table = kernel_for(law, 64, plan.threads);
            const auto rep = run_holder(plan, table);
            std::cout << rep.to_json();
            return rep.pass_exponent ? 0 : 2;
        }
        if (sc_report->parsed()) {
            std::ifstream in(rp_config);
            if (!in) throw std::runtime_error("cannot open config: " + rp_config);
            nlohmann::json j;
            in >> j;
            const std::string kind = get_checked<std::string>(j, "experiment", "invariance");
            std::string summary_path;
            if (kind == "invariance") {
                InvariancePlan plan = load_invariance_plan(rp_config);
                char buf[17];
                std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)plan.hash());
                summary_path = plan.out_dir + "/inv_" + buf + "/summary.json";
            } else if (kind == "holder") {
                HolderPlan plan = load_holder_plan(rp_config);
                char buf[17];
                std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)plan.hash());
                summary_path = plan.out_dir + "/holder_" + buf + ".json";
            } else {
                throw std::runtime_error("unknown experiment kind '" + kind + "'");
            }
            std::ifstream sj(summary_path);
            if (!sj)
                throw std::runtime_error("no summary at " + summary_path +
                                         " (run the experiment first)");
            std::cout << sj.rdbuf();
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
