#include "doctest.h"

#include "dirac/dsl.hpp"
#include "support.hpp"

using namespace dirac;
using testing::max_difference;
using testing::random_expression;
using testing::Values;

namespace {

Expression parse(const Algebra &alg, const std::string &text) {
    ExprParseOptions opts;
    opts.allow_undeclared_tensors = true;
    return parse_expression(text, alg, {"g"}, opts);
}

} // namespace

TEST_CASE("eps eps contraction equals the delta identity and the component sum") {
    Algebra alg = testing::test_algebra();
    Expression lhs = parse(alg, "eps(i,j,k)*eps(i,m,n)");
    Expression rhs = parse(alg, "delta(j,m)*delta(k,n) - delta(j,n)*delta(k,m)");
    CHECK(lhs == rhs);
    Values v(alg, 1);
    Term t{Scalar(1), {Factor::epsilon({{1, "i"}, {1, "j"}, {1, "k"}}), Factor::epsilon({{1, "i"}, {1, "m"}, {1, "n"}})}};
    CHECK(max_difference(alg, Expression::from_terms({t}), lhs, v) < 1e-12);
}

TEST_CASE("full and single eps contractions") {
    Algebra alg = testing::test_algebra();
    CHECK(parse(alg, "eps(i,j,k)*eps(i,j,n)") == parse(alg, "2*delta(k,n)"));
    CHECK(parse(alg, "eps(i,j,k)*eps(i,j,k)") == parse(alg, "6"));
    CHECK(parse(alg, "delta(i,i)") == parse(alg, "3"));
}

TEST_CASE("identity cases") {
    Algebra alg = testing::test_algebra();
    Expression e = parse(alg, "A[i]*B[i] + g*M[i,j]*T[i,j]");
    CHECK(add(alg, e, Expression{}) == e);
    CHECK(scale(alg, e, Scalar(1)) == e);
    CHECK(multiply(alg, Expression{}, e).is_zero());
    CHECK(multiply(alg, e, Expression::scalar(Scalar(0))).is_zero());
}

TEST_CASE("relabeled eps terms merge") {
    Algebra alg = testing::test_algebra();
    Expression sum = parse(alg, "eps(p,j,k)*A[j]*B[k] + eps(p,k,j)*A[k]*B[j]");
    CHECK(sum == parse(alg, "2*eps(p,j,k)*A[j]*B[k]"));
    Values v(alg, 3);
    Term t1{Scalar(1), {Factor::epsilon({{1, "p"}, {1, "j"}, {1, "k"}}), Factor::tensor("A", {{1, "j"}}),
                        Factor::tensor("B", {{1, "k"}})}};
    Term t2{Scalar(1), {Factor::epsilon({{1, "p"}, {1, "k"}, {1, "j"}}), Factor::tensor("A", {{1, "k"}}),
                        Factor::tensor("B", {{1, "j"}})}};
    CHECK(max_difference(alg, Expression::from_terms({t1, t2}), sum, v) < 1e-12);
}

TEST_CASE("Kronecker contraction and products of eps factors") {
    Algebra alg = testing::test_algebra();
    CHECK(parse(alg, "delta(p,j)*A[j]") == parse(alg, "A[p]"));
    Expression a = parse(alg, "eps(i,j,k)*A[k]");
    Expression b = parse(alg, "eps(i,m,n)*B[n]");
    Expression prod = multiply(alg, a, b);
    CHECK(prod == parse(alg, "delta(j,m)*A[k]*B[k] - A[m]*B[j]"));
    Values v(alg, 4);
    Term t{Scalar(1), {Factor::epsilon({{1, "i"}, {1, "j"}, {1, "k"}}), Factor::tensor("A", {{1, "k"}}),
                       Factor::epsilon({{1, "i"}, {1, "m"}, {1, "n"}}), Factor::tensor("B", {{1, "n"}})}};
    CHECK(max_difference(alg, Expression::from_terms({t}), prod, v) < 1e-12);
}

TEST_CASE("dummy collisions in multiply are renamed") {
    Algebra alg = testing::test_algebra();
    Expression a = parse(alg, "A[i]*B[i]");
    Expression sq = multiply(alg, a, a);
    Values v(alg, 5);
    auto x = testing::evaluate(alg, a, v, {});
    CHECK(std::abs(testing::evaluate(alg, sq, v, {}) - x * x) < 1e-12);
}

TEST_CASE("repeated index on an antisymmetric factor vanishes") {
    Algebra alg = testing::test_algebra();
    CHECK(parse(alg, "eps(i,i,k)*A[k]").is_zero());
    CHECK(parse(alg, "f(r,r,s)*G[s]").is_zero());
    CHECK(parse(alg, "M[i,i]").is_zero());
    CHECK(parse(alg, "M[i,j]*A[i]*A[j]").is_zero());
}

TEST_CASE("structural errors name the offending factor") {
    Algebra alg = testing::test_algebra();
    Expression bad = Expression::from_terms({Term{Scalar(1), {Factor::tensor("A", {{1, "i"}, {1, "j"}})}}});
    CHECK_THROWS_WITH_AS(canonicalize(alg, bad), doctest::Contains("A"), StructuralError);
    Expression thrice = Expression::from_terms(
        {Term{Scalar(1), {Factor::tensor("A", {{1, "i"}}), Factor::tensor("B", {{1, "i"}}), Factor::tensor("A", {{1, "i"}})}}});
    CHECK_THROWS_AS(canonicalize(alg, thrice), StructuralError);
}

TEST_CASE("canonicalization matches component expansion and is idempotent on random expressions") {
    Algebra alg = testing::test_algebra();
    std::mt19937_64 rng(20240611);
    int nonzero = 0;
    for (int n = 0; n < 1200; ++n) {
        testing::RandomExpressionOptions opts;
        opts.free_index = n % 2 == 1;
        Expression e = random_expression(alg, rng, opts);
        Expression c = canonicalize(alg, e);
        CHECK(canonicalize(alg, c) == c);
        Values v(alg, static_cast<std::uint64_t>(n));
        double diff = max_difference(alg, e, c, v);
        CHECK_MESSAGE(diff < 1e-9, render(alg, c));
        nonzero += !c.is_zero();
    }
    CHECK(nonzero > 600);
}

TEST_CASE("rendering separates distinct canonical forms") {
    Algebra alg = testing::test_algebra();
    std::mt19937_64 rng(7);
    std::map<std::string, Expression> seen;
    for (int n = 0; n < 400; ++n) {
        Expression c = canonicalize(alg, random_expression(alg, rng, {}));
        auto [it, inserted] = seen.emplace(render(alg, c), c);
        if (!inserted)
            CHECK(it->second == c);
    }
}

TEST_CASE("ring axioms hold up to canonical equality") {
    Algebra alg = testing::test_algebra();
    std::mt19937_64 rng(99);
    testing::RandomExpressionOptions opts;
    opts.max_factors = 3;
    opts.max_terms = 2;
    for (int n = 0; n < 150; ++n) {
        Expression a = canonicalize(alg, random_expression(alg, rng, opts));
        Expression b = canonicalize(alg, random_expression(alg, rng, opts));
        Expression c = canonicalize(alg, random_expression(alg, rng, opts));
        CHECK(add(alg, a, b) == add(alg, b, a));
        CHECK(add(alg, add(alg, a, b), c) == add(alg, a, add(alg, b, c)));
        CHECK(multiply(alg, a, b) == multiply(alg, b, a));
        CHECK(multiply(alg, multiply(alg, a, b), c) == multiply(alg, a, multiply(alg, b, c)));
        CHECK(multiply(alg, a, add(alg, b, c)) == add(alg, multiply(alg, a, b), multiply(alg, a, c)));
        CHECK(subtract(alg, a, a).is_zero());
    }
}

TEST_CASE("free-index signature is preserved") {
    Algebra alg = testing::test_algebra();
    std::mt19937_64 rng(11);
    testing::RandomExpressionOptions opts;
    opts.free_index = true;
    opts.derivatives = false;
    for (int n = 0; n < 100; ++n) {
        Expression c = canonicalize(alg, random_expression(alg, rng, opts));
        if (c.is_zero())
            continue;
        CHECK(free_indices(c) == std::vector<Index>{{1, "p"}});
        Expression s = parse(alg, "A[i]*B[i]");
        CHECK(free_indices(multiply(alg, c, s)) == std::vector<Index>{{1, "p"}});
    }
}

TEST_CASE("scalar arithmetic folds the imaginary unit and keeps a unique zero") {
    Scalar i = Scalar::symbol(kImaginary);
    CHECK(i * i == Scalar(-1));
    CHECK((i * i * i) == -i);
    Scalar xi = Scalar::symbol("Xi");
    Scalar om = Scalar::symbol("Omega");
    CHECK((xi / om) * (om / xi) == Scalar(1));
    CHECK(Scalar(Rational(0), {{"Xi", 2}}) == Scalar(0));
    CHECK(render(Algebra{}, Expression::scalar(xi / om)) == "Omega^-1*Xi");
}

TEST_CASE("dimension polynomials render and parse") {
    DimPoly n = DimPoly::n();
    DimPoly adj = n * n - DimPoly(1);
    CHECK((adj * Rational(20)).render() == "20*N^2 - 20");
    CHECK(DimPoly::parse("20*N^2 - 20") == adj * Rational(20));
    CHECK(DimPoly::parse("N^2-1") == adj);
    CHECK(DimPoly().render() == "0");
    CHECK(adj.evaluate(2) == 3);
}

TEST_CASE("substitute_field") {
    Algebra alg = testing::test_algebra();
    Expression e = parse(alg, "A[i]*B[i] + d_a(C[a,i])*A[i]");
    SUBCASE("absent field leaves the expression unchanged") {
        CHECK(substitute_field(alg, e, "T", parse(alg, "M[i,j]"), {{1, "i"}, {1, "j"}}) == e);
    }
    SUBCASE("identity substitution") {
        CHECK(substitute_field(alg, e, "A", parse(alg, "A[k]"), {{1, "k"}}) == e);
    }
    SUBCASE("replacement with a derivative occurrence") {
        Expression r = substitute_field(alg, e, "C", parse(alg, "V[a]*B[i]"), {{0, "a"}, {1, "i"}});
        CHECK(r == parse(alg, "A[i]*B[i] + d_a(V[a]*B[i])*A[i]"));
    }
    SUBCASE("signature mismatch") {
        CHECK_THROWS_AS(substitute_field(alg, e, "A", parse(alg, "M[i,j]"), {{1, "i"}}), StructuralError);
    }
}

TEST_CASE("derivatives commute and obey Leibniz") {
    Algebra alg = testing::test_algebra();
    CHECK(parse(alg, "d_a(d_b(V[c]))*eps(a,b,c)").is_zero());
    CHECK(parse(alg, "d_a(A[i]*B[i])") == parse(alg, "d_a(A[i])*B[i] + A[i]*d_a(B[i])"));
    CHECK_THROWS_AS(parse(alg, "d_a(d_b(d_c(V[e])))*eps(a,b,c)"), ParseError);
}
