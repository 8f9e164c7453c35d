#include "doctest.h"

#include "dirac/analysis.hpp"
#include "dirac/models.hpp"
#include "generators.hpp"

#include <random>
#include <sstream>

using namespace dirac;

namespace {

ParseError parse_failure(const std::string &text) {
    try {
        parse_model(text);
    } catch (const ParseError &e) {
        return e;
    }
    FAIL("expected a parse error");
    return ParseError({}, "");
}

const char *kHeader = "model t\nindices\n  space dim 3 eps spatial letters abc\n";

} // namespace

TEST_CASE("built-in models parse, validate and round-trip") {
    for (const auto &name : builtin_names()) {
        CAPTURE(name);
        ModelDef m = parse_model(builtin_source(name));
        CHECK(validate_model(m).empty());
        std::string once = serialize_model(m);
        ModelDef back = parse_model(once);
        CHECK(structurally_equal(m, back));
        CHECK(serialize_model(back) == once);
        CHECK(serialize_model(m) == once);
    }
}

TEST_CASE("second_chern has 36 canonical variables in 18 pairs") {
    ModelDef m = builtin("second_chern");
    CHECK(phase_space_dimension(m) == DimPoly(36));
    CHECK(m.kinetic.size() == 2);
    std::vector<std::string> mult;
    for (const auto &f : m.fields)
        if (f.kind == FieldKind::Multiplier)
            mult.push_back(f.name);
    CHECK(mult == std::vector<std::string>{"tau", "Lambda", "vs", "chi"});
    CHECK(m.constraint_labels() == std::vector<std::string>{"phi", "psi", "Phi", "Psi"});
}

TEST_CASE("bf_ym has 10(N^2-1) pairs and the six constraint families") {
    ModelDef m = builtin("bf_ym");
    CHECK(phase_space_dimension(m) == DimPoly::parse("20*N^2 - 20"));
    CHECK(m.constraint_labels() == std::vector<std::string>{"gamma0", "gamma", "chi", "chi0", "chiij", "phiij"});
}

TEST_CASE("euler shares the second_chern fields with kinetic coefficients -Omega/Xi") {
    ModelDef sc = builtin("second_chern");
    ModelDef eu = builtin("euler");
    REQUIRE(sc.fields.size() == eu.fields.size());
    for (std::size_t k = 0; k < sc.fields.size(); ++k)
        CHECK(sc.fields[k].name == eu.fields[k].name);
    Scalar want = -(Scalar::symbol("Omega") / Scalar::symbol("Xi"));
    for (const auto &kt : eu.kinetic)
        CHECK(kt.coeff == want);
}

TEST_CASE("randomized models round-trip") {
    std::mt19937_64 rng(424242);
    int parsed = 0;
    for (int id = 0; id < 80; ++id) {
        std::string text = testing::random_model(rng, id);
        CAPTURE(text);
        ModelDef m = parse_model(text);
        CHECK(validate_model(m).empty());
        std::string s = serialize_model(m);
        ModelDef back = parse_model(s);
        CHECK(structurally_equal(m, back));
        CHECK(serialize_model(back) == s);
        ++parsed;
    }
    CHECK(parsed >= 50);
}

TEST_CASE("empty model is valid and has no degrees of freedom") {
    ModelDef m = parse_model("model empty\n");
    CHECK(validate_model(m).empty());
    SymplecticStructure s = extract_symplectic(m);
    ClassificationReport r = classify_constraints(m, s);
    DofReport d = count_dof(m, r);
    CHECK(d.dof.is_zero());
    CHECK(d.variables.is_zero());
    CHECK(structurally_equal(m, parse_model(serialize_model(m))));
}

TEST_CASE("unpaired momentum is rejected with a position") {
    std::string text = std::string(kHeader) + "fields\n  coordinate q[space]\n  momentum p[space]\n  momentum r[space]\n"
                                              "kinetic\n  dt(q[a])*p[a]\n";
    ParseError e = parse_failure(text);
    CHECK(e.message().find("unpaired momentum") != std::string::npos);
    CHECK(e.pos().line == 7);
    CHECK(e.pos().column == 3);
}

TEST_CASE("validation diagnostics") {
    SUBCASE("multiplier inside constraint") {
        std::string text = std::string(kHeader) + "fields\n  coordinate q[space]\n  momentum p[space]\n"
                                                  "  multiplier m[space]\nkinetic\n  dt(q[a])*p[a]\n"
                                                  "constraint C[a] := p[a] + m[a]\nhamiltonian\n  0\n";
        ModelDef m = parse_model(text);
        auto d = validate_model(m);
        REQUIRE(d.size() == 1);
        CHECK(d[0].message.find("multiplier inside constraint") != std::string::npos);
        CHECK(d[0].pos.line == 10);
    }
    SUBCASE("free index in a coupling") {
        std::string text = std::string(kHeader) + "fields\n  coordinate q[space]\n  momentum p[space]\n"
                                                  "  multiplier m[space]\nkinetic\n  dt(q[a])*p[a]\n"
                                                  "hamiltonian\n  m[a]*p[b]*p[b]\n";
        ModelDef m = parse_model(text);
        auto d = validate_model(m);
        REQUIRE(d.size() == 1);
        CHECK(d[0].message.find("free index 'a'") != std::string::npos);
        CHECK(d[0].pos.line == 11);
        CHECK(d[0].pos.column == 3);
    }
    SUBCASE("builtins are clean") {
        for (const auto &name : builtin_names())
            CHECK(validate_model(parse_model(builtin_source(name))).empty());
    }
}

TEST_CASE("parse errors carry line and column") {
    struct Case {
        std::string text;
        std::string message;
        int line;
        int column;
    };
    const std::string f = std::string(kHeader) + "fields\n  coordinate q[space]\n  momentum p[space]\n";
    const std::vector<Case> cases = {
        {"modle x\n", "must start with 'model", 1, 1},
        {std::string(kHeader) + "fields\n  coordinate q[colour]\n", "unknown index family", 5, 14},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C := u[a]*p[a]\n", "unknown field 'u'", 9, 17},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C := p[a,b]*q[a]\n", "arity mismatch", 9, 17},
        {f + "  coordinate q[space]\n", "duplicate declaration", 7, 14},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C := p[a] $ q[a]\n", "unexpected character", 9, 22},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C := p[x]\n", "belongs to no index family", 9, 19},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C[a] := p[b]\n", "free indices", 9, 1},
        {f + "kinetic\n  dt(q[a])*p[a]\nhamiltonian\n  dt(q[a])*p[a]\n", "time derivative outside", 10, 3},
        {f + "kinetic\n  q[b]*q[b]*dt(q[a])*p[a]\n", "non-Darboux", 8, 3},
        {f + "constants\n  eps\n", "invalid constant name", 8, 3},
        {f + "bogus\n", "unknown section", 7, 1},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C := p[a]*q[a]*p[a]\n", "occurs more than twice", 9, 27},
        {f + "kinetic\n  dt(q[a])*p[a]\nconstraint C := d_a(p[a]*q[a])\n", "occurs more than twice", 9, 19},
    };
    for (const auto &c : cases) {
        CAPTURE(c.text);
        ParseError e = parse_failure(c.text);
        CHECK(e.message().find(c.message) != std::string::npos);
        CHECK(e.pos().line == c.line);
        CHECK(e.pos().column == c.column);
    }
}

TEST_CASE("serialization is deterministic and stable under canonicalization") {
    for (const auto &name : builtin_names()) {
        ModelDef m = builtin(name);
        std::string a = serialize_model(m);
        CHECK(serialize_model(m) == a);
        for (auto &c : m.constraints)
            c.body = canonicalize(m.algebra, c.body);
        m.hamiltonian = canonicalize(m.algebra, m.hamiltonian);
        CHECK(serialize_model(m) == a);
    }
}

TEST_CASE("unknown builtin and missing files") {
    CHECK_THROWS_AS(builtin("nope"), UnknownModelError);
    CHECK_THROWS_WITH_AS(load_model("/nonexistent/x.model"), doctest::Contains("file not found"), InputError);
    CHECK(load_model("builtin:euler").name == "euler");
}
