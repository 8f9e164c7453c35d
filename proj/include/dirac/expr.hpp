#pragma once

#include "dirac/scalar.hpp"

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dirac {

/// Raised on malformed expressions: wrong index arity, an index used three times,
/// family mismatches, unsupported traces, derivative cap exceeded.
class StructuralError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct IndexFamily {
    std::string name;
    DimPoly dimension;
    bool epsilon = false;   // totally antisymmetric eps available (needs concrete dimension 3)
    bool structure = false; // totally antisymmetric f with Jacobi identity
    bool spatial = false;   // family of the spatial derivative index
    std::string letters;    // index names start with one of these characters

    std::optional<int> concrete_dimension() const;
};

struct TensorDecl {
    std::string name;
    std::vector<int> families;
    std::vector<std::pair<int, int>> antisymmetric; // slot pairs, 0-based
};

/// Registry of index families and tensor signatures an expression lives in.
class Algebra {
  public:
    int add_family(IndexFamily family);
    void declare_tensor(TensorDecl decl);

    const IndexFamily &family(int id) const { return families_.at(static_cast<std::size_t>(id)); }
    int family_count() const { return static_cast<int>(families_.size()); }
    std::optional<int> find_family(const std::string &name) const;
    /// Family whose letter set contains the first character of `index_name`.
    std::optional<int> family_of_index(const std::string &index_name) const;
    std::optional<int> spatial_family() const;
    std::optional<int> structure_family() const;

    const TensorDecl *tensor(const std::string &name) const;
    const std::map<std::string, TensorDecl> &tensors() const { return tensors_; }
    const std::vector<IndexFamily> &families() const { return families_; }

    /// Canonical dummy name: first letter of the family followed by a number.
    std::string dummy_name(int family, int n) const;

  private:
    std::vector<IndexFamily> families_;
    std::map<std::string, TensorDecl> tensors_;
};

struct Index {
    int family = 0;
    std::string name;

    auto operator<=>(const Index &) const = default;
};

enum class FactorKind { Tensor = 0, Epsilon = 1, Structure = 2, Kronecker = 3, Distribution = 4 };

/// One multiplicative factor of a term.
///
/// Tensor: a field or parameter occurrence `name[slots]` with commuting spatial
/// derivatives `derivs` (kept sorted) and an optional point label.
/// Epsilon/Structure: antisymmetric symbols over their slot family.
/// Kronecker: delta(slots[0], slots[1]).
/// Distribution: delta3(x,y) with derivatives acting on the first point.
struct Factor {
    FactorKind kind = FactorKind::Tensor;
    std::string name;
    std::vector<Index> slots;
    std::vector<Index> derivs;
    std::string point;

    auto operator<=>(const Factor &) const = default;

    static Factor tensor(std::string name, std::vector<Index> slots, std::vector<Index> derivs = {});
    static Factor epsilon(std::vector<Index> slots);
    static Factor structure(std::vector<Index> slots);
    static Factor kronecker(Index a, Index b);
    static Factor distribution(std::string x, std::string y, std::vector<Index> derivs = {});
};

struct Term {
    Scalar coeff{1};
    std::vector<Factor> factors;

    bool operator==(const Term &) const = default;
};

/// A finite sum of terms. Instances returned by the free functions below are in
/// canonical form; `from_terms` builds an unnormalized one for `canonicalize`.
class Expression {
  public:
    Expression() = default;
    static Expression from_terms(std::vector<Term> terms);
    static Expression scalar(const Scalar &s);
    static Expression factor(const Factor &f, const Scalar &c = Scalar(1));

    const std::vector<Term> &terms() const { return terms_; }
    bool is_zero() const { return terms_.empty(); }
    bool operator==(const Expression &) const = default;

  private:
    std::vector<Term> terms_;
};

/// Indices occurring exactly once in the term (slots and derivative indices).
std::vector<Index> free_indices(const Term &t);
/// Free indices shared by every term; throws StructuralError if terms disagree.
std::vector<Index> free_indices(const Expression &e);
bool has_tensor(const Expression &e, const std::string &name);
std::set<std::string> tensor_names(const Expression &e);

Expression canonicalize(const Algebra &alg, const Expression &e);
Expression add(const Algebra &alg, const Expression &a, const Expression &b);
Expression subtract(const Algebra &alg, const Expression &a, const Expression &b);
Expression scale(const Algebra &alg, const Expression &a, const Scalar &s);
Expression multiply(const Algebra &alg, const Expression &a, const Expression &b);
/// Total spatial derivative d_index(e), Leibniz rule over tensor factors.
Expression derivative(const Algebra &alg, const Expression &e, const Index &index);
/// Renames free indices per `mapping` (old -> new). Dummies are left alone.
Expression rename_free(const Algebra &alg, const Expression &e, const std::map<Index, Index> &mapping);

/// Replaces every occurrence of tensor `field` by `replacement`, whose free indices
/// `formal` correspond positionally to the field's slots. Derivative occurrences get
/// the derivative of the replacement.
Expression substitute_field(const Algebra &alg, const Expression &e, const std::string &field,
                            const Expression &replacement, const std::vector<Index> &formal);

/// Maximum derivative order on a single factor.
inline constexpr std::size_t kMaxDerivativeOrder = 2;

std::string render(const Algebra &alg, const Expression &e);
std::string render_term(const Algebra &alg, const Term &t, bool leading);
std::string render_factor(const Factor &f);

} // namespace dirac
