#include "dirac/models.hpp"

#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace dirac {

namespace detail {
extern const std::vector<std::pair<std::string, std::string>> kBuiltinModels;
extern const std::string kFixtureJson;
} // namespace detail

namespace {

using nlohmann::json;

const std::pair<std::string, std::string> *find_builtin(const std::string &name) {
    for (const auto &entry : detail::kBuiltinModels)
        if (entry.first == name)
            return &entry;
    return nullptr;
}

std::string known_names() {
    std::string out;
    for (const auto &n : builtin_names())
        out += (out.empty() ? "" : ", ") + n;
    return out;
}

// ---- fixture parsing ----

std::string opt_string(const json &j, const char *key) {
    auto it = j.find(key);
    return it == j.end() ? std::string() : it->get<std::string>();
}

void read_cited(const json &j, Cited &c) {
    c.cite = opt_string(j, "cite");
    c.note = opt_string(j, "note");
}

std::map<std::string, std::string> read_map(const json &j, const char *key) {
    std::map<std::string, std::string> out;
    if (auto it = j.find(key); it != j.end())
        for (const auto &[k, v] : it->items())
            out[k] = v.get<std::string>();
    return out;
}

Fixture read_fixture(const std::string &model, const json &j) {
    Fixture f;
    f.model = model;
    for (const auto &p : j.value("pairings", json::array())) {
        ExpectedPairing e;
        read_cited(p, e);
        e.coordinate = p.at("coordinate");
        e.momentum = p.at("momentum");
        e.coefficient = p.at("coefficient");
        e.antisymmetric = p.value("antisymmetric", false);
        f.pairings.push_back(e);
    }
    for (const auto &b : j.value("brackets", json::array())) {
        ExpectedBracket e;
        read_cited(b, e);
        e.first = b.at("first");
        e.second = b.at("second");
        e.weakly_zero = b.value("weakly_zero", true);
        e.coefficients = read_map(b, "coefficients");
        f.brackets.push_back(e);
    }
    if (j.contains("classification")) {
        const auto &c = j.at("classification");
        ExpectedClassification e;
        read_cited(c, e);
        e.first_class = c.at("first_class").get<std::vector<std::string>>();
        e.second_class = c.at("second_class").get<std::vector<std::string>>();
        f.classification = e;
    }
    if (j.contains("reducibilities")) {
        std::vector<ExpectedReducibility> list;
        for (const auto &r : j.at("reducibilities")) {
            ExpectedReducibility e;
            read_cited(r, e);
            e.constraint = r.at("constraint");
            e.operator_name = r.at("operator");
            e.count = r.at("count");
            e.coefficients = read_map(r, "coefficients");
            list.push_back(e);
        }
        f.reducibilities = list;
    }
    if (j.contains("dof")) {
        const auto &d = j.at("dof");
        ExpectedDof e;
        read_cited(d, e);
        e.variables = d.at("variables");
        e.first_class = d.at("first_class");
        e.reducibilities = d.at("reducibilities");
        e.second_class = d.at("second_class");
        e.dof = d.at("dof");
        f.dof = e;
    }
    if (j.contains("hamiltonian")) {
        const auto &h = j.at("hamiltonian");
        ExpectedHamiltonian e;
        read_cited(h, e);
        e.coefficients = read_map(h, "coefficients");
        e.remainder = h.at("remainder");
        e.printed = opt_string(h, "printed");
        e.printed_weakly_zero = h.value("printed_weakly_zero", true);
        f.hamiltonian = e;
    }
    if (j.contains("substitution")) {
        const auto &s = j.at("substitution");
        ExpectedSubstitution e;
        read_cited(s, e);
        e.field = s.at("field");
        e.formal = s.at("formal").get<std::vector<std::string>>();
        e.replacement = s.at("replacement");
        e.result = s.at("result");
        f.substitution = e;
    }
    for (const auto &g : j.value("gauge", json::array())) {
        ExpectedGauge e;
        read_cited(g, e);
        e.field = g.at("field");
        for (const auto &t : g.at("generator"))
            e.generator.push_back({t.at(0).get<std::string>(), t.at(1).get<std::string>()});
        e.variation = g.at("variation");
        f.gauge.push_back(e);
    }
    return f;
}

// ---- comparison helpers ----

Expression parse_expected(const ModelDef &m, const std::string &text) {
    ExprParseOptions opts;
    opts.allow_undeclared_tensors = true;
    return parse_expression(text, m.algebra, m.constants, opts);
}

bool same(const Algebra &alg, const Expression &a, const Expression &b) {
    return zero_modulo_identities(alg, subtract(alg, a, b));
}

std::string render_map(const Algebra &alg, const std::map<std::string, Expression> &m) {
    std::string out;
    for (const auto &[label, e] : m) {
        if (e.is_zero())
            continue;
        out += (out.empty() ? "" : "; ") + label + ": " + render(alg, e);
    }
    return out.empty() ? "0" : out;
}

std::string join(const std::vector<std::string> &v) {
    std::string out;
    for (const auto &s : v)
        out += (out.empty() ? "" : " ") + s;
    return out;
}

/// Compares coefficient maps; labels absent on one side count as zero.
bool same_coefficients(const ModelDef &m, const std::map<std::string, Expression> &actual,
                       const std::map<std::string, Expression> &expected, bool subset) {
    std::set<std::string> labels;
    for (const auto &[l, e] : expected)
        labels.insert(l);
    if (!subset)
        for (const auto &[l, e] : actual)
            labels.insert(l);
    for (const auto &l : labels) {
        auto a = actual.count(l) ? actual.at(l) : Expression();
        auto e = expected.count(l) ? expected.at(l) : Expression();
        if (!same(m.algebra, a, e))
            return false;
    }
    return true;
}

std::map<std::string, Expression> parse_map(const ModelDef &m, const std::map<std::string, std::string> &texts) {
    std::map<std::string, Expression> out;
    for (const auto &[l, t] : texts)
        out[l] = parse_expected(m, t);
    return out;
}

std::map<std::string, Expression> restrict(const std::map<std::string, Expression> &m,
                                           const std::map<std::string, std::string> &keys) {
    std::map<std::string, Expression> out;
    for (const auto &[l, t] : keys)
        if (m.count(l))
            out[l] = m.at(l);
    return out;
}

} // namespace

const std::vector<std::string> &builtin_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const auto &entry : detail::kBuiltinModels)
            v.push_back(entry.first);
        return v;
    }();
    return names;
}

const std::string &builtin_source(const std::string &name) {
    if (const auto *entry = find_builtin(name))
        return entry->second;
    throw UnknownModelError("unknown built-in model '" + name + "' (available: " + known_names() + ")");
}

ModelDef builtin(const std::string &name) {
    ModelDef m = parse_model(builtin_source(name));
    auto diags = validate_model(m);
    if (!diags.empty())
        throw std::logic_error("built-in model '" + name + "' is invalid: " + diags.front().message);
    return m;
}

ModelDef load_model(const std::string &spec) {
    const std::string prefix = "builtin:";
    if (spec.rfind(prefix, 0) == 0)
        return builtin(spec.substr(prefix.size()));
    if (!std::filesystem::is_regular_file(spec))
        throw InputError("file not found: " + spec);
    std::ifstream in(spec);
    if (!in)
        throw InputError("cannot read " + spec);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

const std::string &builtin_fixture_source() { return detail::kFixtureJson; }

std::map<std::string, Fixture> parse_fixtures(const std::string &json_text) {
    try {
        json doc = json::parse(json_text);
        std::map<std::string, Fixture> out;
        for (const auto &[name, body] : doc.at("models").items())
            out[name] = read_fixture(name, body);
        return out;
    } catch (const json::exception &e) {
        throw InputError(std::string("malformed fixture table: ") + e.what());
    }
}

Fixture fixture(const std::string &name) {
    static const std::map<std::string, Fixture> table = parse_fixtures(builtin_fixture_source());
    auto it = table.find(name);
    if (it == table.end())
        throw UnknownModelError("no fixture for model '" + name + "' (available: " + known_names() + ")");
    return it->second;
}

ModelAnalysis analyze_model(const ModelDef &m, std::optional<SignConvention> convention) {
    ModelAnalysis a;
    a.model = m;
    a.symplectic = extract_symplectic(m, convention);
    a.report = classify_constraints(m, a.symplectic);
    a.dof = count_dof(m, a.report);
    a.hamiltonian = project_weakly(m, hamiltonian_functional(m), m.constraints, hamiltonian_ansatz(m));
    return a;
}

std::vector<Check> check_fixture(const ModelAnalysis &a, const Fixture &f) {
    const ModelDef &m = a.model;
    const Algebra &alg = m.algebra;
    std::vector<Check> out;
    auto add = [&](std::string name, const Cited &c, bool passed, std::string expected, std::string actual) {
        out.push_back({f.model, std::move(name), c.cite, passed, std::move(expected), std::move(actual)});
    };
    // Checks must not abort the whole run; a malformed expectation fails on its own line.
    auto guarded = [&](const std::string &name, const Cited &c, auto &&fn) {
        try {
            fn();
        } catch (const std::exception &e) {
            add(name, c, false, "(evaluable expectation)", std::string("error: ") + e.what());
        }
    };

    for (const auto &p : f.pairings) {
        std::string name = "pairing " + p.coordinate + "/" + p.momentum;
        guarded(name, p, [&] {
            const Pairing *actual = a.symplectic.find(p.coordinate);
            std::string expected = p.momentum + " " + render(alg, parse_expected(m, p.coefficient)) +
                                   (p.antisymmetric ? " antisymmetric" : "");
            if (!actual) {
                add(name, p, false, expected, "(no pairing)");
                return;
            }
            std::string got = actual->momentum + " " + render(alg, Expression::scalar(actual->coefficient)) +
                              (actual->antisymmetric.empty() ? "" : " antisymmetric");
            add(name, p, expected == got, expected, got);
        });
    }

    for (const auto &b : f.brackets) {
        std::string name = "bracket {" + b.first + "," + b.second + "}";
        guarded(name, b, [&] {
            const auto &entry = a.report.matrix.at(b.first, b.second);
            const auto &proj = entry.projection;
            std::string got = render_map(alg, proj.coefficients);
            if (!proj.weakly_zero())
                got += " + remainder " + render(alg, proj.remainder);
            if (!b.weakly_zero) {
                add(name, b, !proj.weakly_zero(), "nonzero remainder", got);
                return;
            }
            auto expected = parse_map(m, b.coefficients);
            bool ok = proj.weakly_zero() && same_coefficients(m, proj.coefficients, expected, false);
            add(name, b, ok, render_map(alg, expected), got);
        });
    }

    if (const auto &c = f.classification) {
        guarded("classification", *c, [&] {
            auto sorted = [](std::vector<std::string> v) {
                std::sort(v.begin(), v.end());
                return v;
            };
            std::string expected = "first: " + join(c->first_class) + " | second: " + join(c->second_class);
            std::string got =
                "first: " + join(a.report.first_class) + " | second: " + join(a.report.second_class);
            bool ok = sorted(c->first_class) == sorted(a.report.first_class) &&
                      sorted(c->second_class) == sorted(a.report.second_class);
            add("classification", *c, ok, expected, got);
        });
    }

    if (const auto &reds = f.reducibilities) {
        Cited summary{reds->empty() ? "no reducibility relations" : reds->front().cite, ""};
        guarded("reducibility list", summary, [&] {
            std::vector<std::string> expected, got;
            for (const auto &r : *reds)
                expected.push_back(r.operator_name + " " + r.constraint);
            for (const auto &r : a.report.reducibilities)
                got.push_back(r.operator_name + " " + r.constraint);
            std::sort(expected.begin(), expected.end());
            std::sort(got.begin(), got.end());
            add("reducibility list", summary, expected == got, expected.empty() ? "none" : join(expected),
                got.empty() ? "none" : join(got));
        });
        for (const auto &r : *reds) {
            std::string name = "reducibility " + r.operator_name + " " + r.constraint;
            guarded(name, r, [&] {
                auto expected = parse_map(m, r.coefficients);
                std::string expected_text = render_map(alg, expected) + " x" + DimPoly::parse(r.count).render();
                for (const auto &actual : a.report.reducibilities) {
                    if (actual.constraint != r.constraint || actual.operator_name != r.operator_name)
                        continue;
                    auto shown = restrict(actual.projection.coefficients, r.coefficients);
                    bool ok = actual.projection.weakly_zero() && actual.count == DimPoly::parse(r.count) &&
                              same_coefficients(m, actual.projection.coefficients, expected, true);
                    add(name, r, ok, expected_text, render_map(alg, shown) + " x" + actual.count.render());
                    return;
                }
                add(name, r, false, expected_text, "(not found)");
            });
        }
    }

    if (const auto &d = f.dof) {
        auto row = [](const std::string &v, const std::string &fc, const std::string &r, const std::string &sc,
                      const std::string &dof) {
            return "vars " + v + ", first " + fc + ", reducible " + r + ", second " + sc + ", dof " + dof;
        };
        guarded("dof", *d, [&] {
            std::string expected =
                row(DimPoly::parse(d->variables).render(), DimPoly::parse(d->first_class).render(),
                    DimPoly::parse(d->reducibilities).render(), DimPoly::parse(d->second_class).render(),
                    DimPoly::parse(d->dof).render());
            std::string got = row(a.dof.variables.render(), a.dof.first_class.render(),
                                  a.dof.reducibilities.render(), a.dof.second_class.render(), a.dof.dof.render());
            add("dof", *d, expected == got, expected, got);
        });
    }

    if (const auto &h = f.hamiltonian) {
        guarded("hamiltonian", *h, [&] {
            auto expected = parse_map(m, h->coefficients);
            Expression rem = parse_expected(m, h->remainder);
            bool ok = same_coefficients(m, a.hamiltonian.coefficients, expected, false) &&
                      same(alg, a.hamiltonian.remainder, rem);
            add("hamiltonian", *h, ok, render_map(alg, expected) + " | remainder " + render(alg, rem),
                render_map(alg, a.hamiltonian.coefficients) + " | remainder " + render(alg, a.hamiltonian.remainder));
        });
        if (!h->printed.empty()) {
            guarded("printed hamiltonian", *h, [&] {
                SmearedFunctional printed{{}, parse_expected(m, h->printed)};
                auto proj = project_weakly(m, normalized(alg, printed), m.constraints, hamiltonian_ansatz(m));
                std::string want = h->printed_weakly_zero ? "weakly zero remainder" : "nonzero remainder";
                std::string got = proj.weakly_zero() ? "weakly zero remainder"
                                                     : "nonzero remainder " + render(alg, proj.remainder);
                add("printed hamiltonian", *h, proj.weakly_zero() == h->printed_weakly_zero, want, got);
            });
        }
    }

    if (const auto &s = f.substitution) {
        std::string name = "substitution " + s->field;
        guarded(name, *s, [&] {
            std::vector<Index> formal;
            for (const auto &n : s->formal) {
                auto fam = alg.family_of_index(n);
                if (!fam)
                    throw StructuralError("index '" + n + "' belongs to no family");
                formal.push_back({*fam, n});
            }
            Expression result =
                substitute_field(alg, a.hamiltonian.remainder, s->field, parse_expected(m, s->replacement), formal);
            Expression expected = parse_expected(m, s->result);
            add(name, *s, same(alg, result, expected), render(alg, expected), render(alg, result));
        });
    }

    for (const auto &g : f.gauge) {
        std::string name = "gauge " + g.field;
        guarded(name, g, [&] {
            Expression got = gauge_transform(m, a.symplectic, a.report, g.generator, g.field);
            Expression expected = parse_expected(m, g.variation);
            add(name, g, same(alg, got, expected), render(alg, expected), render(alg, got));
        });
    }
    return out;
}

} // namespace dirac
