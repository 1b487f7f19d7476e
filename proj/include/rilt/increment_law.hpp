#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "rilt/lattice.hpp"
#include "rilt/rational.hpp"

namespace rilt {

struct LawAtom {
    LatticePoint step;
    Rational prob;
};

// Step distribution of the walk, probabilities kept as exact rationals.
// Floating conversion happens only at simulation time.
class IncrementLaw {
public:
    IncrementLaw(std::string name, std::vector<LawAtom> atoms);

    // Product of two independent copies of a one-dimensional symmetric law.
    static IncrementLaw product_of_1d(std::string name,
                                      const std::vector<std::pair<int32_t, Rational>>& factor);

    // Built-ins: "default" satisfies every walk hypothesis; "srw", "diagonal"
    // and "king" each violate one and back the negative tests.
    static IncrementLaw named(const std::string& name);
    static IncrementLaw from_json_file(const std::string& path);
    // `spec` is a built-in name or a path to a law definition file.
    static IncrementLaw resolve(const std::string& spec);

    const std::string& name() const { return name_; }
    const std::vector<LawAtom>& atoms() const { return atoms_; }
    int32_t max_jump() const { return max_jump_; }
    Rational prob_of(LatticePoint p) const;  // 0 when p is not an atom
    double prob_of_d(LatticePoint p) const { return prob_of(p).to_double(); }

    bool is_symmetric() const;             // invariant under x -> -x
    bool is_coordinate_symmetric() const;  // invariant under each axis flip
    // 1D factor when the law was built as a product; coupling needs it.
    const std::optional<std::vector<std::pair<int32_t, Rational>>>& one_d_factor() const {
        return factor_;
    }

    std::array<Rational, 2> mean() const;
    std::array<Rational, 4> covariance() const;  // row-major 2x2 about the mean
    bool generates_z2() const;                   // support generates Z^2 as a group

    // phi(theta) = sum_v p(v) cos(theta . v); requires a symmetric law.
    double characteristic_function(double t1, double t2) const;

    uint64_t hash() const { return hash_; }

private:
    std::string name_;
    std::vector<LawAtom> atoms_;  // sorted by step, unique
    std::optional<std::vector<std::pair<int32_t, Rational>>> factor_;
    int32_t max_jump_ = 0;
    uint64_t hash_ = 0;
    void finalize();
};

struct LawValidationReport {
    std::array<Rational, 2> mean;
    std::array<Rational, 4> covariance;
    bool symmetric = false;
    bool generates_lattice = false;
    double aperiodicity_margin = 0.0;  // 1 - max |phi| off a neighborhood of 2*pi*Z^2
    int phi_grid_resolution = 0;

    bool mean_zero() const { return mean[0].is_zero() && mean[1].is_zero(); }
    bool identity_covariance() const {
        return covariance[0].is_one() && covariance[3].is_one() && covariance[1].is_zero() &&
               covariance[2].is_zero();
    }
    // mean 0, identity covariance, symmetric, strongly aperiodic
    bool paper_compliant() const {
        return mean_zero() && identity_covariance() && symmetric && aperiodicity_margin > 0.0;
    }
    std::string summary() const;
};

// Scans phi on the (resolution+1)^2 grid over [-pi,pi]^2, excluding the ball of
// radius 2*pi/resolution around lattice points of 2*pi*Z^2.
LawValidationReport validate(const IncrementLaw& law, int grid_resolution);

}  // namespace rilt
