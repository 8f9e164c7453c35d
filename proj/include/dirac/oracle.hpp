#pragma once

#include "dirac/phase_space.hpp"

#include <complex>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirac {

/// Raised when a functional cannot be evaluated under a lattice configuration.
class ConfigurationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

enum class DifferenceScheme { Spectral, Central };

/// Periodic cubic lattice of side 2*pi with `lattice` sites per direction.
///
/// Fields are real sums of Fourier modes with |k| <= `band` per direction
/// (`band` <= 0 gives independent Gaussian values per site). Difference operators
/// obey the Leibniz rule only up to aliased modes, so exact agreement with the
/// symbolic brackets needs every cubic integrand to stay clear of them: at band 1
/// this holds for `lattice` >= 4 with either scheme, and fails at `lattice` = 3.
struct LatticeConfig {
    int lattice = 4;
    int group_n = 2;
    int band = 1;
    DifferenceScheme scheme = DifferenceScheme::Central;
    std::uint64_t seed = 1;
    /// Values of the model constants; missing ones are drawn at random (nonzero).
    std::map<std::string, double> constants;
};

using Grid = std::vector<std::complex<double>>;
using Components = std::vector<int>;

/// Field values per (name, component) over all sites. Also used for smearing functions.
struct FieldAssignment {
    std::map<std::string, std::map<Components, Grid>> values;
};

/// Random real fields for every coordinate and momentum (and, if
/// requested, multiplier) of the model. Antisymmetric slot pairs are respected.
FieldAssignment random_assignment(const ModelDef &m, const LatticeConfig &cfg, std::uint64_t seed,
                                  bool include_multipliers = false);
/// Random smearing functions for the given parameters.
FieldAssignment random_smearings(const ModelDef &m, const std::vector<Parameter> &params, const LatticeConfig &cfg,
                                 std::uint64_t seed);

/// Compiled form of a model under a concrete lattice configuration. Evaluation
/// expands every index over its concrete range; no canonicalization is involved.
class Lattice {
  public:
    Lattice(const ModelDef &m, LatticeConfig cfg);

    const LatticeConfig &config() const { return cfg_; }
    int sites() const { return sites_; }
    double cell_volume() const { return cell_; }
    int dimension(int family) const { return dims_.at(static_cast<std::size_t>(family)); }
    std::complex<double> constant(const std::string &name) const;
    /// f_{abc} of su(N) in an orthonormal basis (f = eps at N = 2).
    double structure_constant(int a, int b, int c) const;

    /// Integral of the functional's body.
    std::complex<double> functional(const SmearedFunctional &f, const FieldAssignment &fields,
                                    const FieldAssignment &smearings) const;

    /// Gradient of the functional with respect to every field component value,
    /// keyed by field name and full component list; entries are per site.
    std::map<std::string, std::map<Components, Grid>> gradient(const SmearedFunctional &f,
                                                               const FieldAssignment &fields,
                                                               const FieldAssignment &smearings) const;

    const ModelDef &model() const { return *m_; }

  private:
    friend struct LatticeEval;
    const ModelDef *m_;
    LatticeConfig cfg_;
    int sites_ = 0;
    double cell_ = 0;
    std::vector<int> dims_;
    std::map<std::string, std::complex<double>> constants_;
    std::vector<double> f_; // structure constants, dense
    std::vector<double> d1_; // 1-D derivative matrix, lattice x lattice
};

struct NumericBracket {
    std::complex<double> value;
    /// Sum of the magnitudes of all contributions; the scale for relative errors.
    double scale = 0;
};

/// Lattice bracket: sum over pairings, independent components and sites of
/// coeff * (dF/dq dG/dp - dF/dp dG/dq), with exact gradients.
NumericBracket numeric_bracket(const Lattice &lat, const SymplecticStructure &s, const SmearedFunctional &f,
                               const SmearedFunctional &g, const FieldAssignment &fields,
                               const FieldAssignment &smearings);

/// |a - b| relative to max(|a|, |b|, scale).
double relative_error(std::complex<double> a, std::complex<double> b, double scale);

struct RankVerdict {
    bool full_rank = true;
    /// Smallest ratio of extreme singular values over all trials (1 for an empty block).
    double margin = 1;
    std::vector<double> ratios;
    int size = 0;
};

/// Numeric bracket matrix of the listed constraints over all independent components
/// and sites; full rank iff sigma_min / sigma_max > 1e-8 on every trial.
RankVerdict rank_check(const ModelDef &m, const SymplecticStructure &s, const std::vector<std::string> &labels,
                       const LatticeConfig &cfg, int trials);

} // namespace dirac
