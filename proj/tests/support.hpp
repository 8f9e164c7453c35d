#pragma once

// Shared test helpers: a brute-force component evaluator written independently of
// the kernel, and random well-formed expressions.

#include "dirac/expr.hpp"

#include <complex>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace testing {

using dirac::Algebra;
using dirac::Expression;
using dirac::Factor;
using dirac::FactorKind;
using dirac::Index;
using dirac::Scalar;
using dirac::Term;
using cplx = std::complex<double>;

/// Levi-Civita symbol on {0,1,2}.
inline int levi(int a, int b, int c) {
    if (a == b || b == c || a == c)
        return 0;
    return ((b - a + 3) % 3 == 1) ? 1 : -1;
}

/// Three families of concrete dimension 3: space (eps, spatial), so3 (eps) and adj
/// (structure constants, evaluated as eps). Tensors: A[so3], B[so3],
/// M[so3,so3] antisymmetric, T[so3,so3], C[space,so3], G[adj], H[adj,space].
Algebra test_algebra();

/// Random component values per tensor; antisymmetric slots and commuting derivatives
/// are respected.
class Values {
  public:
    Values(const Algebra &alg, std::uint64_t seed);
    cplx tensor(const Factor &f, const std::vector<int> &slot_values, const std::vector<int> &deriv_values) const;
    cplx constant(const std::string &name) const;

  private:
    const Algebra *alg_;
    std::uint64_t seed_;
    std::map<std::string, double> constants_;
};

/// Sum over all dummy values of the expression with the free indices fixed.
cplx evaluate(const Algebra &alg, const Expression &e, const Values &v, const std::map<std::string, int> &free);

/// Maximum |difference| over all free-index assignments.
double max_difference(const Algebra &alg, const Expression &a, const Expression &b, const Values &v);

struct RandomExpressionOptions {
    int max_terms = 3;
    int max_factors = 4;
    bool derivatives = true;
    bool free_index = false; // one free so3 index named p
};

/// Unnormalized random expression (build with Expression::from_terms); every index
/// occurs at most twice per term.
Expression random_expression(const Algebra &alg, std::mt19937_64 &rng, const RandomExpressionOptions &opts);

} // namespace testing
