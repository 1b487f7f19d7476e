#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rilt/lattice.hpp"
#include "rilt/potential_kernel.hpp"
#include "rilt/walk.hpp"

namespace rilt {

// k-th order chain pattern: offsets x_2..x_k (empty for k = 1).
struct ChainSpec {
    int k = 1;
    std::vector<LatticePoint> offsets;

    ChainSpec() = default;
    ChainSpec(int k_, std::vector<LatticePoint> offs);
    // x with the offsets at the (1-based, in 2..k) labels in `drop` removed
    ChainSpec without(const std::vector<int>& drop_labels) const;
    std::string str() const;
    friend bool operator<(const ChainSpec& a, const ChainSpec& b) {
        return a.offsets < b.offsets;
    }
    friend bool operator==(const ChainSpec& a, const ChainSpec& b) {
        return a.offsets == b.offsets;
    }
};

// Running intersection counts B_k(i, x) for i = 0..n and their per-step
// increments, computed by level tallies: H_j[site] = number of j-chains
// matching (x_2..x_j) that end at `site`.
struct ChainCounter {
    ChainSpec spec;
    std::vector<int64_t> running;     // B_k(i, x), size n+1
    std::vector<int64_t> increments;  // running[i] - running[i-1], size n+1

    int64_t total() const { return running.empty() ? 0 : running.back(); }
    int64_t max_increment() const;
};

ChainCounter count_chains(const WalkPath& path, const ChainSpec& spec);
// final count only, O(distinct sites) memory
int64_t count_chains_total(const WalkPath& path, const ChainSpec& spec);

// B-tilde_{k,m}(j, x) = sum over subsets A of {2..k} of (-1)^|A|
// (prod_{i in A} G_m(x_i)) B_{k-|A|}(j, x_{A^c}).
struct RenormalizedSeries {
    ChainSpec spec;
    int64_t m = 0;
    std::vector<double> values;  // index j = 0..n

    double at(int64_t j) const { return values[size_t(j)]; }
    double final_value() const { return values.back(); }
    // beta-tilde_k(n, x/sqrt(n)) = B-tilde_{k,n}(n, x) / n; requires m == n
    double beta(int64_t n) const;
};

// Subset-reduced counters must cover every x_{A^c}; the keyed overload throws
// listing any missing sub-spec.
RenormalizedSeries renormalize(const std::map<ChainSpec, ChainCounter>& counters,
                               const ChainSpec& spec, const KernelTable& kernel, int64_t m);
// builds all 2^{k-1} counters internally
RenormalizedSeries renormalize(const WalkPath& path, const ChainSpec& spec,
                               const KernelTable& kernel, int64_t m);

// beta-tilde_k(n, y/sqrt(n)) for lattice offsets y, evaluated at m = n.
double beta_k(const WalkPath& path, const ChainSpec& spec, const KernelTable& kernel);

// CSV of (i, B_k, B-tilde_{k,n}) rows.
void export_series_csv(const ChainCounter& counter, const RenormalizedSeries& series,
                       const std::string& file);

// all subsets of labels {2..k}; each entry lists the dropped labels
std::vector<std::vector<int>> label_subsets(int k);

}  // namespace rilt
