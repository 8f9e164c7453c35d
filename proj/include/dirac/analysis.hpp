#pragma once

#include "dirac/phase_space.hpp"

#include <map>
#include <string>
#include <vector>

namespace dirac {

/// Bounds of the coefficient ansatz used by weak projection.
struct AnsatzOptions {
    bool allow_derivative = true;  // one spatial derivative on a non-leading parameter or on the constraint
    bool allow_structure = true;   // at most one eps or f factor
    /// Optional extra factors; each ansatz term carries at most one of them (exactly
    /// one if `require_coefficient_tensor`). Slots are contracted like the rest.
    std::vector<std::string> coefficient_tensors;
    bool require_coefficient_tensor = false;
    std::vector<std::string> exclude; // constraint labels left out of the ansatz
};

AnsatzOptions bracket_ansatz();
AnsatzOptions hamiltonian_ansatz(const ModelDef &m);
AnsatzOptions reducibility_ansatz(const ModelDef &m);

/// F = sum over labels of coefficients[label] + remainder, where each coefficient is
/// rendered with the constraint as a placeholder tensor named by its label.
struct ProjectionResult {
    std::map<std::string, Expression> coefficients;
    Expression remainder;
    bool weakly_zero() const { return remainder.is_zero(); }
};

ProjectionResult project_weakly(const ModelDef &m, const SmearedFunctional &f, const std::vector<ConstraintDef> &constraints,
                                const AnsatzOptions &opts);

/// Replaces every placeholder by its constraint body and adds the remainder.
Expression reconstruct(const ModelDef &m, const ProjectionResult &r, const std::vector<ConstraintDef> &constraints,
                       const std::vector<Parameter> &params);

/// Linear relations among expressions that the canonical form does not apply on its
/// own (the Jacobi identity of f); returned as expressions equal to zero.
std::vector<Expression> jacobi_relations(const Algebra &alg, const Term &t);
/// Schouten relations of eps: antisymmetrizing four indices of a three-dimensional
/// family gives zero. One relation per eps factor and same-family tensor slot.
std::vector<Expression> schouten_relations(const Algebra &alg, const Term &t);
/// True if `e` vanishes modulo the Jacobi and Schouten identities.
bool zero_modulo_identities(const Algebra &alg, const Expression &e);

/// Number of independent components of a constraint, accounting for antisymmetric
/// label index pairs detected in its body.
DimPoly constraint_multiplicity(const ModelDef &m, const ConstraintDef &c);

struct BracketEntry {
    std::string first;
    std::string second;
    SmearedFunctional bracket; // parameters lam (first) and mu (second)
    ProjectionResult projection;
};

struct BracketMatrix {
    std::vector<std::string> labels;
    std::vector<BracketEntry> entries; // row-major over labels x labels
    const BracketEntry &at(const std::string &a, const std::string &b) const;
};

BracketMatrix bracket_matrix(const ModelDef &m, const SymplecticStructure &s);
BracketEntry bracket_entry(const ModelDef &m, const SymplecticStructure &s, const std::string &a, const std::string &b);

struct Reducibility {
    std::string constraint;      // constraint whose divergence (or itself) is expressed
    std::string operator_name;   // "div" or "identity"
    int slot = -1;               // label slot carrying the divergence
    SmearedFunctional functional; // parameter lam smeared over the remaining slots
    ProjectionResult projection;
    DimPoly count;
};

std::vector<Reducibility> find_reducibility(const ModelDef &m, const std::vector<ConstraintDef> &constraints);

struct ClassificationReport {
    std::vector<std::string> first_class;
    std::vector<std::string> second_class;
    BracketMatrix matrix;
    std::vector<Reducibility> reducibilities;
    std::vector<std::string> assumptions;
};

ClassificationReport classify_constraints(const ModelDef &m, const SymplecticStructure &s);

struct DofReport {
    DimPoly variables;
    DimPoly first_class;
    DimPoly second_class;
    DimPoly reducibilities;
    DimPoly dof;
};

class InconsistentCountError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

DofReport count_dof(const ModelDef &m, const ClassificationReport &report);

/// One generator term: a first-class constraint smeared with a named parameter.
struct GeneratorTerm {
    std::string constraint;
    std::string parameter;
};

/// delta(field) = {field, G}, localized; free indices are standard letters of the
/// field's families (see fresh_indices).
Expression gauge_transform(const ModelDef &m, const SymplecticStructure &s, const ClassificationReport &report,
                           const std::vector<GeneratorTerm> &generator, const std::string &field);
SmearedFunctional generator_functional(const ModelDef &m, const std::vector<GeneratorTerm> &generator);

/// Hamiltonian density as a parameter-free functional.
SmearedFunctional hamiltonian_functional(const ModelDef &m);

} // namespace dirac
