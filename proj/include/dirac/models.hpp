#pragma once

#include "dirac/analysis.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirac {

class UnknownModelError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Raised when a model path cannot be read.
class InputError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

const std::vector<std::string> &builtin_names();
const std::string &builtin_source(const std::string &name);
/// Parsed and validated built-in model.
ModelDef builtin(const std::string &name);
/// `builtin:<name>` or a path to a model file.
ModelDef load_model(const std::string &spec);

/// Every expected value carries the place in the source tables it was read from.
struct Cited {
    std::string cite;
    std::string note;
};

struct ExpectedPairing : Cited {
    std::string coordinate;
    std::string momentum;
    std::string coefficient;
    bool antisymmetric = false;
};

/// Smeared bracket of `first` (parameter lam) with `second` (parameter mu).
/// Coefficients use the constraint labels as placeholder tensors; an empty map
/// means the bracket vanishes.
struct ExpectedBracket : Cited {
    std::string first;
    std::string second;
    bool weakly_zero = true;
    std::map<std::string, std::string> coefficients;
};

struct ExpectedClassification : Cited {
    std::vector<std::string> first_class;
    std::vector<std::string> second_class;
};

/// A relation found by find_reducibility; only the listed coefficients are compared.
struct ExpectedReducibility : Cited {
    std::string constraint;
    std::string operator_name;
    std::string count;
    std::map<std::string, std::string> coefficients;
};

struct ExpectedDof : Cited {
    std::string variables;
    std::string first_class;
    std::string reducibilities;
    std::string second_class;
    std::string dof;
};

struct ExpectedHamiltonian : Cited {
    std::map<std::string, std::string> coefficients;
    std::string remainder;
    /// Optional alternative Hamiltonian text whose projection must (not) be weakly zero.
    std::string printed;
    bool printed_weakly_zero = true;
};

/// Strong substitution of `field` by `replacement` in the Hamiltonian remainder.
struct ExpectedSubstitution : Cited {
    std::string field;
    std::vector<std::string> formal;
    std::string replacement;
    std::string result;
};

struct ExpectedGauge : Cited {
    std::string field;
    std::vector<GeneratorTerm> generator;
    std::string variation;
};

struct Fixture {
    std::string model;
    std::vector<ExpectedPairing> pairings;
    std::vector<ExpectedBracket> brackets;
    std::optional<ExpectedClassification> classification;
    std::optional<std::vector<ExpectedReducibility>> reducibilities; // complete list when present
    std::optional<ExpectedDof> dof;
    std::optional<ExpectedHamiltonian> hamiltonian;
    std::optional<ExpectedSubstitution> substitution;
    std::vector<ExpectedGauge> gauge;
};

/// The fixture table shipped with the built-in models (JSON text).
const std::string &builtin_fixture_source();
/// Parses a fixture table; throws InputError on malformed documents.
std::map<std::string, Fixture> parse_fixtures(const std::string &json_text);
Fixture fixture(const std::string &name);

struct Check {
    std::string model;
    std::string name;
    std::string cite;
    bool passed = false;
    std::string expected;
    std::string actual;
};

/// Everything the symbolic checks need, computed once per model.
struct ModelAnalysis {
    ModelDef model;
    SymplecticStructure symplectic;
    ClassificationReport report;
    DofReport dof;
    ProjectionResult hamiltonian;
};

ModelAnalysis analyze_model(const ModelDef &m, std::optional<SignConvention> convention = std::nullopt);

/// Compares an analysis against a fixture; one Check per expected value.
std::vector<Check> check_fixture(const ModelAnalysis &a, const Fixture &f);

} // namespace dirac
