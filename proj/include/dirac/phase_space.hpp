#pragma once

#include "dirac/dsl.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dirac {

/// {q(x), p(y)} = coefficient * prod(delta over paired slots) * delta3(x,y).
struct Pairing {
    std::string coordinate;
    std::string momentum;
    Scalar coefficient;
    /// momentum_slot[k] is the momentum slot contracted with coordinate slot k.
    std::vector<int> momentum_slot;
    std::vector<int> families; // coordinate slot families
    std::vector<std::pair<int, int>> antisymmetric;
};

struct SymplecticStructure {
    std::vector<Pairing> pairings;
    /// Pairing containing `field`, or nullptr.
    const Pairing *find(const std::string &field) const;
};

/// Reads the Darboux pairings off the kinetic term. The bracket coefficient is the
/// inverse kinetic coefficient; under the paper convention a printed `@bracket`
/// value replaces it.
SymplecticStructure extract_symplectic(const ModelDef &m, std::optional<SignConvention> convention = std::nullopt);

/// Number of independent components of a field with the given slot families and
/// antisymmetric pairs.
DimPoly component_count(const Algebra &alg, const std::vector<int> &families,
                        const std::vector<std::pair<int, int>> &antisymmetric);
/// Phase-space variable count of the model.
DimPoly phase_space_dimension(const ModelDef &m);

struct Parameter {
    std::string name;
    std::vector<int> families;
};

/// Integral over the spatial slice of `body`, linear in each parameter.
struct SmearedFunctional {
    std::vector<Parameter> params;
    Expression body;
};

/// Integration-by-parts normal form: in every term, the first parameter (in list
/// order) that occurs carries no derivative. Boundary terms are dropped.
Expression normal_form(const Algebra &alg, const Expression &body, const std::vector<Parameter> &params);
SmearedFunctional normalized(const Algebra &alg, SmearedFunctional f);

/// Smears a constraint with a parameter tensor carrying the constraint's free indices.
SmearedFunctional smear_constraint(const ModelDef &m, const ConstraintDef &c, const std::string &param);
/// Smears a field occurrence with a parameter carrying the field's slots.
SmearedFunctional smear_field(const ModelDef &m, const std::string &field, const std::string &param);

/// Variational derivative of the functional with respect to `field`, evaluated at the
/// integration point. `targets` name the result's free indices, one per field slot.
/// Antisymmetric slot pairs are antisymmetrized.
Expression variational_derivative(const Algebra &alg, const SmearedFunctional &f, const std::string &field,
                                  const std::vector<Index> &targets);

SmearedFunctional poisson_bracket(const Algebra &alg, const SmearedFunctional &f, const SmearedFunctional &g,
                                  const SymplecticStructure &s);

/// Distributional kernel of a functional bilinear in its first two parameters. The
/// result carries `first` and `second` as free indices for the two parameters' slots
/// and delta3(x,y) with derivatives acting on x.
Expression localize(const Algebra &alg, const SmearedFunctional &f, const std::vector<Index> &first,
                    const std::vector<Index> &second);
/// Inverse of localize.
SmearedFunctional smear(const Algebra &alg, const Expression &kernel, const Parameter &p, const std::vector<Index> &first,
                        const Parameter &q, const std::vector<Index> &second);

/// Kernel of a functional linear in its first parameter: strips the parameter and
/// leaves `slots` as free indices.
Expression strip_parameter(const Algebra &alg, const SmearedFunctional &f, const std::vector<Index> &slots);

/// Standard index names for a list of families, avoiding `taken`.
std::vector<Index> fresh_indices(const Algebra &alg, const std::vector<int> &families,
                                 std::vector<std::string> &taken);

} // namespace dirac
