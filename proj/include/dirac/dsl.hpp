#pragma once

#include "dirac/expr.hpp"

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dirac {

struct SourcePos {
    int line = 0;
    int column = 0;
    std::string str() const { return std::to_string(line) + ":" + std::to_string(column); }
};

class ParseError : public std::runtime_error {
  public:
    ParseError(SourcePos pos, const std::string &msg)
        : std::runtime_error(pos.str() + ": " + msg), pos_(pos), message_(msg) {}
    SourcePos pos() const { return pos_; }
    const std::string &message() const { return message_; }

  private:
    SourcePos pos_;
    std::string message_;
};

struct Diagnostic {
    SourcePos pos;
    std::string message;
};

enum class FieldKind { Coordinate, Momentum, Multiplier };
std::string to_string(FieldKind k);

enum class SignConvention { Kinetic, Paper };
std::string to_string(SignConvention s);

struct FieldDecl {
    std::string name;
    FieldKind kind = FieldKind::Coordinate;
    std::vector<int> families;
    std::vector<std::pair<int, int>> antisymmetric; // 0-based slot pairs
    std::string weight;                             // informational density weight
    SourcePos pos;
};

/// One `coeff * dt(q) * p` line of the kinetic term.
struct KineticTerm {
    Scalar coeff;
    Factor coordinate; // carries the slot labels contracted with `momentum`
    Factor momentum;
    std::optional<Scalar> printed_bracket; // bracket coefficient as printed, for the paper convention
    SourcePos pos;
};

struct ConstraintDef {
    std::string label;
    std::vector<Index> indices; // free indices as declared on the label
    Expression body;
    SourcePos pos;
};

struct ModelDef {
    std::string name;
    SignConvention sign_convention = SignConvention::Kinetic;
    std::vector<std::string> constants;
    Algebra algebra;
    std::vector<FieldDecl> fields;
    std::vector<KineticTerm> kinetic;
    std::vector<ConstraintDef> constraints;
    Expression hamiltonian; // extended Hamiltonian density, multipliers included
    SourcePos name_pos;
    SourcePos hamiltonian_pos;

    const FieldDecl *field(const std::string &name) const;
    const ConstraintDef *constraint(const std::string &label) const;
    std::vector<std::string> constraint_labels() const;
};

/// Multiplier-free part of the Hamiltonian density.
Expression hamiltonian_remainder(const ModelDef &m);
/// Pairs (multiplier name, co-factor expression) read off the Hamiltonian. The co-factor
/// carries the multiplier's slot indices as free indices.
struct MultiplierCoupling {
    std::string multiplier;
    Expression term; // all Hamiltonian terms containing the multiplier
};
std::vector<MultiplierCoupling> multiplier_couplings(const ModelDef &m);

struct ExprParseOptions {
    bool allow_undeclared_tensors = false; // families inferred from index letters
    bool allow_time_derivative = false;    // dt(q[...]) marks the factor's point as "dt"
};

/// Parses a single DSL expression against an algebra; the result is canonical.
Expression parse_expression(const std::string &text, const Algebra &alg, const std::vector<std::string> &constants,
                            const ExprParseOptions &opts = {}, SourcePos origin = {1, 1});

ModelDef parse_model(const std::string &text);
std::vector<Diagnostic> validate_model(const ModelDef &m);
std::string serialize_model(const ModelDef &m);
bool structurally_equal(const ModelDef &a, const ModelDef &b);

} // namespace dirac
