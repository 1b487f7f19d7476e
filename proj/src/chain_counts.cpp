#include "rilt/chain_counts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace rilt {

ChainSpec::ChainSpec(int k_, std::vector<LatticePoint> offs) : k(k_), offsets(std::move(offs)) {
    if (k < 1) throw std::invalid_argument("ChainSpec: k must be >= 1");
    if (int(offsets.size()) != k - 1)
        throw std::invalid_argument("ChainSpec: expected " + std::to_string(k - 1) +
                                    " offsets, got " + std::to_string(offsets.size()));
}

ChainSpec ChainSpec::without(const std::vector<int>& drop_labels) const {
    std::vector<LatticePoint> kept;
    for (int label = 2; label <= k; ++label) {
        if (std::find(drop_labels.begin(), drop_labels.end(), label) == drop_labels.end())
            kept.push_back(offsets[size_t(label - 2)]);
    }
    return ChainSpec(k - int(drop_labels.size()), std::move(kept));
}

std::string ChainSpec::str() const {
    std::ostringstream os;
    os << "k=" << k << " offsets=[";
    for (size_t i = 0; i < offsets.size(); ++i)
        os << (i ? ";" : "") << offsets[i].x << "," << offsets[i].y;
    os << "]";
    return os.str();
}

int64_t ChainCounter::max_increment() const {
    int64_t m = 0;
    for (int64_t v : increments) m = std::max(m, v);
    return m;
}

namespace {

// Shared DP: time i adds, level by level from k down to 2,
// H_j[X_i] += H_{j-1}[X_i - x_j], then H_1[X_i] += 1. The level-k addition is
// the increment of B_k at time i. Strictness of the time tuple is exactly the
// descending update order.
template <typename Sink>
void run_chain_dp(const WalkPath& path, const ChainSpec& spec, Sink&& sink) {
    const int64_t n = path.steps();
    const int k = spec.k;
    if (k == 1) {
        // B_1(i) = i by convention
        for (int64_t i = 0; i <= n; ++i) sink(i, i > 0 ? 1 : 0);
        return;
    }
    std::vector<SiteCountMap> tally;  // levels 1..k-1 (level k is never read)
    tally.reserve(size_t(k) - 1);
    for (int j = 1; j <= k - 1; ++j)
        tally.emplace_back(size_t(std::min<int64_t>(n + 1, 1 << 16)));
    for (int64_t i = 0; i <= n; ++i) {
        const LatticePoint pos = path.at(i);
        int64_t top = tally[size_t(k - 2)].get(pos - spec.offsets[size_t(k - 2)]);
        for (int j = k - 1; j >= 2; --j) {
            const int64_t inc = tally[size_t(j - 2)].get(pos - spec.offsets[size_t(j - 2)]);
            if (inc) tally[size_t(j - 1)].add(pos, inc);
        }
        tally[0].add(pos, 1);
        sink(i, top);
    }
}

}  // namespace

ChainCounter count_chains(const WalkPath& path, const ChainSpec& spec) {
    ChainCounter c;
    c.spec = spec;
    const int64_t n = path.steps();
    c.running.resize(size_t(n) + 1);
    c.increments.resize(size_t(n) + 1);
    int64_t acc = 0;
    run_chain_dp(path, spec, [&](int64_t i, int64_t inc) {
        acc += inc;
        c.increments[size_t(i)] = inc;
        c.running[size_t(i)] = acc;
    });
    return c;
}

int64_t count_chains_total(const WalkPath& path, const ChainSpec& spec) {
    int64_t acc = 0;
    run_chain_dp(path, spec, [&](int64_t, int64_t inc) { acc += inc; });
    return acc;
}

std::vector<std::vector<int>> label_subsets(int k) {
    std::vector<std::vector<int>> out;
    const int bits = k - 1;
    for (int mask = 0; mask < (1 << bits); ++mask) {
        std::vector<int> labels;
        for (int b = 0; b < bits; ++b)
            if (mask & (1 << b)) labels.push_back(b + 2);
        out.push_back(std::move(labels));
    }
    return out;
}

double RenormalizedSeries::beta(int64_t n) const {
    if (n <= 0) throw std::domain_error("beta: n must be positive");
    if (m != n)
        throw std::domain_error("beta: series was renormalized at m=" + std::to_string(m) +
                                ", need m=n=" + std::to_string(n));
    if (int64_t(values.size()) != n + 1)
        throw std::domain_error("beta: series length does not match n");
    return values.back() / double(n);
}

RenormalizedSeries renormalize(const std::map<ChainSpec, ChainCounter>& counters,
                               const ChainSpec& spec, const KernelTable& kernel, int64_t m) {
    if (m <= 0) throw std::domain_error("renormalize: m must be positive");
    RenormalizedSeries out;
    out.spec = spec;
    out.m = m;
    const auto base = counters.find(spec);
    if (base == counters.end())
        throw std::runtime_error("renormalize: missing counter for " + spec.str());
    const size_t len = base->second.running.size();
    out.values.assign(len, 0.0);
    for (const auto& dropped : label_subsets(spec.k)) {
        double coeff = (dropped.size() % 2 == 0) ? 1.0 : -1.0;
        for (int label : dropped)
            coeff *= kernel.scaled(m, spec.offsets[size_t(label - 2)]);
        const ChainSpec sub = spec.without(dropped);
        const auto it = counters.find(sub);
        if (it == counters.end())
            throw std::runtime_error("renormalize: missing sub-counter for " + sub.str() +
                                     " (x_{A^c} of " + spec.str() + ")");
        const auto& running = it->second.running;
        if (running.size() != len)
            throw std::runtime_error("renormalize: sub-counter length mismatch for " + sub.str());
        for (size_t j = 0; j < len; ++j) out.values[j] += coeff * double(running[j]);
    }
    return out;
}

RenormalizedSeries renormalize(const WalkPath& path, const ChainSpec& spec,
                               const KernelTable& kernel, int64_t m) {
    std::map<ChainSpec, ChainCounter> counters;
    for (const auto& dropped : label_subsets(spec.k)) {
        ChainSpec sub = spec.without(dropped);
        if (!counters.count(sub)) counters.emplace(sub, count_chains(path, sub));
    }
    return renormalize(counters, spec, kernel, m);
}

double beta_k(const WalkPath& path, const ChainSpec& spec, const KernelTable& kernel) {
    const int64_t n = path.steps();
    if (n <= 0) throw std::domain_error("beta_k: path must have n >= 1");
    if (spec.k == 1) return 1.0;
    return renormalize(path, spec, kernel, n).beta(n);
}

void export_series_csv(const ChainCounter& counter, const RenormalizedSeries& series,
                       const std::string& file) {
    if (counter.running.size() != series.values.size())
        throw std::invalid_argument("export_series_csv: length mismatch");
    std::ofstream os(file);
    if (!os) throw std::runtime_error("cannot open for writing: " + file);
    os << "i,B_k,B_tilde_k\n";
    for (size_t i = 0; i < counter.running.size(); ++i) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu,%lld,%.17g\n", i,
                      (long long)counter.running[i], series.values[i]);
        os << buf;
    }
}

}  // namespace rilt
