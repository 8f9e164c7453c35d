#include "doctest.h"

#include "dirac/report.hpp"
#include "json.hpp"

#include <map>

using namespace dirac;

namespace {

Expression parse(const ModelDef &m, const std::string &text) {
    ExprParseOptions opts;
    opts.allow_undeclared_tensors = true;
    return parse_expression(text, m.algebra, m.constants, opts);
}

const ModelAnalysis &analysis(const std::string &name) {
    static std::map<std::string, ModelAnalysis> cache;
    auto it = cache.find(name);
    if (it == cache.end())
        it = cache.emplace(name, analyze_model(builtin(name))).first;
    return it->second;
}

std::vector<std::string> sorted(std::vector<std::string> v) {
    std::sort(v.begin(), v.end());
    return v;
}

const char *kOneConstraint = "model t\nindices\n  space dim 3 eps spatial letters abc\nfields\n"
                             "  coordinate q[space]\n  momentum p[space]\nkinetic\n  dt(q[a])*p[a]\n"
                             "constraint C := d_a(p[a])\nhamiltonian\n  0\n";

} // namespace

TEST_CASE("every fixture entry of every built-in model passes") {
    for (const auto &name : builtin_names()) {
        auto checks = check_fixture(analysis(name), fixture(name));
        CHECK(checks.size() > 5);
        for (const auto &c : checks) {
            CAPTURE(name);
            CAPTURE(c.name);
            CAPTURE(c.expected);
            CAPTURE(c.actual);
            CHECK(c.passed);
            CHECK(!c.cite.empty());
        }
    }
}

TEST_CASE("a fixture with one flipped sign fails exactly that check") {
    auto doc = nlohmann::json::parse(builtin_fixture_source());
    auto &coeff = doc["models"]["second_chern"]["brackets"][0]["coefficients"]["psi"];
    coeff = "-" + coeff.get<std::string>();
    Fixture f = parse_fixtures(doc.dump()).at("second_chern");
    auto checks = check_fixture(analysis("second_chern"), f);
    int failed = 0;
    for (const auto &c : checks) {
        if (c.passed)
            continue;
        ++failed;
        CHECK(c.name == "bracket {phi,psi}");
        CHECK(c.expected != c.actual);
    }
    CHECK(failed == 1);
}

TEST_CASE("malformed fixture documents are input errors") {
    CHECK_THROWS_AS(parse_fixtures("{"), InputError);
    CHECK_THROWS_AS(parse_fixtures(R"({"version": 1, "models": {"x": {"brackets": [{"first": 1}]}}})"), InputError);
}

TEST_CASE("classification of the built-in models") {
    CHECK(sorted(analysis("second_chern").report.first_class) == sorted({"phi", "psi", "Phi", "Psi"}));
    CHECK(analysis("second_chern").report.second_class.empty());
    CHECK(analysis("euler").report.second_class.empty());
    CHECK(sorted(analysis("bf_ym").report.first_class) == sorted({"gamma0", "gamma"}));
    CHECK(sorted(analysis("bf_ym").report.second_class) == sorted({"chi", "chi0", "chiij", "phiij"}));
    CHECK(sorted(analysis("martellini").report.first_class) == sorted({"gamma0", "gamma"}));
    CHECK(sorted(analysis("martellini").report.second_class) == sorted({"phi", "phi0", "phiij", "psi0"}));
    for (const auto &name : builtin_names()) {
        const auto &r = analysis(name).report;
        CHECK(r.first_class.size() + r.second_class.size() == r.matrix.labels.size());
        for (const auto &l : r.first_class)
            for (const auto &other : r.matrix.labels)
                CHECK(r.matrix.at(l, other).projection.weakly_zero());
        if (!r.second_class.empty())
            CHECK(!r.assumptions.empty());
    }
}

TEST_CASE("first-class closure and the role swap between second_chern and euler") {
    for (const char *name : {"second_chern", "euler"})
        for (const auto &e : analysis(name).report.matrix.entries)
            CHECK(e.projection.weakly_zero());
    CHECK(closes_on(analysis("second_chern").report.matrix.at("phi", "psi").projection) ==
          std::vector<std::string>{"psi"});
    CHECK(closes_on(analysis("euler").report.matrix.at("phi", "psi").projection) == std::vector<std::string>{"phi"});
    const ModelDef &m = analysis("euler").model;
    CHECK(analysis("euler").report.matrix.at("phi", "phi").projection.coefficients.at("psi") ==
          parse(m, "-Xi/Omega*eps(i,j,k)*lam[i]*mu[j]*psi[k]"));
}

TEST_CASE("diagonal bracket entries vanish for equal smearings") {
    for (const auto &name : builtin_names()) {
        const ModelAnalysis &a = analysis(name);
        for (const auto &l : a.report.matrix.labels) {
            const BracketEntry &e = a.report.matrix.at(l, l);
            std::vector<std::string> taken;
            auto idx = fresh_indices(a.model.algebra, e.bracket.params[1].families, taken);
            Expression same = substitute_field(a.model.algebra, e.bracket.body, "mu",
                                               Expression::factor(Factor::tensor("lam", idx)), idx);
            CAPTURE(name);
            CAPTURE(l);
            CHECK(zero_modulo_identities(a.model.algebra, normal_form(a.model.algebra, same, {e.bracket.params[0]})));
        }
    }
}

TEST_CASE("reconstruction identity of every projection") {
    for (const auto &name : builtin_names()) {
        const ModelAnalysis &a = analysis(name);
        const Algebra &alg = a.model.algebra;
        for (const auto &e : a.report.matrix.entries) {
            CAPTURE(name);
            CAPTURE(e.first + "," + e.second);
            Expression rebuilt = reconstruct(a.model, e.projection, a.model.constraints, e.bracket.params);
            Expression diff = normal_form(alg, subtract(alg, rebuilt, e.bracket.body), e.bracket.params);
            CHECK(zero_modulo_identities(alg, diff));
        }
        Expression h = reconstruct(a.model, a.hamiltonian, a.model.constraints, {});
        CHECK(zero_modulo_identities(alg, normal_form(alg, subtract(alg, h, a.model.hamiltonian), {})));
    }
}

TEST_CASE("projecting a constraint onto the constraint set") {
    for (const auto &name : builtin_names()) {
        ModelDef m = builtin(name);
        for (const auto &c : m.constraints) {
            CAPTURE(name);
            CAPTURE(c.label);
            ProjectionResult p = project_weakly(m, smear_constraint(m, c, "lam"), m.constraints, bracket_ansatz());
            CHECK(p.weakly_zero());
            Term t{Scalar(1), {Factor::tensor("lam", c.indices), Factor::tensor(c.label, c.indices)}};
            CHECK(p.coefficients.at(c.label) == canonicalize(m.algebra, Expression::from_terms({t})));
            CHECK(closes_on(p) == std::vector<std::string>{c.label});
        }
    }
}

TEST_CASE("extended Hamiltonian linearity") {
    CHECK(analysis("second_chern").hamiltonian.weakly_zero());
    CHECK(analysis("euler").hamiltonian.weakly_zero());
    CHECK(!analysis("bf_ym").hamiltonian.weakly_zero());
    CHECK(!analysis("martellini").hamiltonian.weakly_zero());
    const ModelDef &m = analysis("bf_ym").model;
    CHECK(analysis("bf_ym").hamiltonian.remainder == normal_form(m.algebra, hamiltonian_remainder(m), {}));
}

TEST_CASE("classification is invariant under relabeling and rescaling") {
    for (const char *name : {"second_chern", "bf_ym"}) {
        ModelDef m = builtin(name);
        const auto &base = analysis(name).report;
        ModelDef r = m;
        const Scalar factors[] = {Scalar(3), Scalar(Rational(-1, 2)), Scalar::symbol(r.constants.empty() ? "g" : r.constants[0])};
        int k = 0;
        for (auto &c : r.constraints) {
            c.label = "K" + c.label;
            c.body = scale(r.algebra, c.body, factors[k++ % 3]);
        }
        ClassificationReport rr = classify_constraints(r, extract_symplectic(r));
        std::vector<std::string> first, second;
        for (const auto &l : base.first_class)
            first.push_back("K" + l);
        for (const auto &l : base.second_class)
            second.push_back("K" + l);
        CHECK(sorted(rr.first_class) == sorted(first));
        CHECK(sorted(rr.second_class) == sorted(second));
        CHECK(count_dof(r, rr).dof == analysis(name).dof.dof);
    }
}

TEST_CASE("reducibility relations") {
    const auto &sc = analysis("second_chern").report.reducibilities;
    std::vector<std::string> found;
    for (const auto &r : sc) {
        CHECK(r.operator_name == "div");
        CHECK(r.projection.weakly_zero());
        CHECK(r.count == DimPoly(3));
        found.push_back(r.constraint);
    }
    CHECK(sorted(found) == sorted({"Phi", "Psi"}));
    CHECK(analysis("bf_ym").report.reducibilities.empty());
    CHECK(analysis("martellini").report.reducibilities.empty());
    ModelDef one = parse_model(kOneConstraint);
    CHECK(find_reducibility(one, one.constraints).empty());
}

TEST_CASE("degree-of-freedom counts") {
    for (const char *name : {"second_chern", "euler"}) {
        const DofReport &d = analysis(name).dof;
        CHECK(d.variables == DimPoly(36));
        CHECK(d.first_class == DimPoly(24));
        CHECK(d.reducibilities == DimPoly(6));
        CHECK(d.second_class == DimPoly(0));
        CHECK(d.dof == DimPoly(0));
    }
    DimPoly adj = DimPoly::parse("N^2 - 1");
    for (const char *name : {"bf_ym", "martellini"}) {
        const DofReport &d = analysis(name).dof;
        CHECK(d.variables == adj * Rational(20));
        CHECK(d.first_class == adj * Rational(2));
        CHECK(d.second_class == adj * Rational(12));
        CHECK(d.reducibilities == DimPoly(0));
        CHECK(d.dof == adj * Rational(2));
        for (int n = 2; n <= 5; ++n)
            CHECK(d.dof.evaluate(n) == 2 * (n * n - 1));
    }
    SUBCASE("empty model") {
        ModelDef m = parse_model("model e\n");
        CHECK(count_dof(m, classify_constraints(m, extract_symplectic(m))).dof == DimPoly(0));
    }
    SUBCASE("single divergence constraint") {
        ModelDef m = parse_model(kOneConstraint);
        DofReport d = count_dof(m, classify_constraints(m, extract_symplectic(m)));
        CHECK(d.first_class == DimPoly(1));
        CHECK(d.dof == DimPoly(2));
    }
    SUBCASE("over-constrained model is inconsistent") {
        ModelDef m = parse_model("model t\nindices\n  space dim 3 eps spatial letters abc\nfields\n"
                                 "  coordinate q[space]\n  momentum p[space]\nkinetic\n  dt(q[a])*p[a]\n"
                                 "constraint C[a] := p[a]\nconstraint D[a] := eps(a,b,c)*d_b(p[c])\nhamiltonian\n  0\n");
        CHECK_THROWS_AS(count_dof(m, classify_constraints(m, extract_symplectic(m))), InconsistentCountError);
    }
}

TEST_CASE("gauge transformations") {
    const ModelAnalysis &a = analysis("bf_ym");
    const ModelDef &m = a.model;
    std::vector<GeneratorTerm> g = {{"gamma0", "e0dot"}, {"gamma", "e"}};
    SUBCASE("A transforms as a covariant derivative") {
        Expression dA = gauge_transform(m, a.symplectic, a.report, g, "A");
        CHECK(dA == parse(m, "-A[b,i]*e[c]*f(a,b,c) - d_i(e[a])"));
        Expression dPi = gauge_transform(m, a.symplectic, a.report, g, "Pi");
        CHECK(dPi == parse(m, "-Pi[b,i]*e[c]*f(a,b,c)"));
        CHECK(gauge_transform(m, a.symplectic, a.report, g, "A0") == parse(m, "e0dot[a]"));
        CHECK(gauge_transform(m, a.symplectic, a.report, g, "Pi0").is_zero());
    }
    SUBCASE("martellini gives the same law for A") {
        const ModelAnalysis &b = analysis("martellini");
        CHECK(gauge_transform(b.model, b.symplectic, b.report, g, "A") ==
              parse(b.model, "-A[b,i]*e[c]*f(a,b,c) - d_i(e[a])"));
    }
    SUBCASE("empty generator") {
        for (const auto &f : m.fields)
            if (f.kind != FieldKind::Multiplier)
                CHECK(gauge_transform(m, a.symplectic, a.report, {}, f.name).is_zero());
    }
    SUBCASE("second-class generators are rejected") {
        CHECK_THROWS_AS(gauge_transform(m, a.symplectic, a.report, {{"chi", "e"}}, "A"), StructuralError);
    }
    SUBCASE("unknown field") {
        CHECK_THROWS_AS(gauge_transform(m, a.symplectic, a.report, g, "Q"), StructuralError);
    }
    SUBCASE("default generator") {
        auto d = default_generator(a.report, std::nullopt);
        REQUIRE(d.size() == 2);
        for (const auto &t : d)
            CHECK(t.parameter == "e_" + t.constraint);
    }
}
