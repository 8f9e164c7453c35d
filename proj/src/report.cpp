#include "dirac/report.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace dirac {

namespace {

using ojson = nlohmann::ordered_json;

std::string join(const std::vector<std::string> &v, const std::string &sep = ", ") {
    std::string out;
    for (const auto &s : v)
        out += (out.empty() ? "" : sep) + s;
    return out;
}

std::string number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3e", x);
    return buf;
}

std::string indices_text(const std::vector<Index> &idx) {
    std::vector<std::string> names;
    for (const auto &i : idx)
        names.push_back(i.name);
    return names.empty() ? "" : "[" + join(names, ",") + "]";
}

ojson coefficients_json(const Algebra &alg, const std::map<std::string, Expression> &c) {
    ojson out = ojson::object();
    for (const auto &[label, e] : c)
        out[label] = render(alg, e);
    return out;
}

std::string coefficients_text(const Algebra &alg, const ProjectionResult &p) {
    std::string out;
    for (const auto &[label, e] : p.coefficients) {
        if (e.is_zero())
            continue;
        std::string r = render(alg, e);
        if (out.empty())
            out = r;
        else
            out += r.front() == '-' ? " - " + r.substr(1) : " + " + r;
    }
    if (out.empty())
        out = "0";
    if (!p.weakly_zero())
        out += "  [remainder " + render(alg, p.remainder) + "]";
    return out;
}

} // namespace

std::string to_string(DifferenceScheme s) { return s == DifferenceScheme::Central ? "central" : "spectral"; }

std::vector<std::string> closes_on(const ProjectionResult &p) {
    std::vector<std::string> out;
    for (const auto &[label, e] : p.coefficients)
        if (!e.is_zero())
            out.push_back(label);
    return out;
}

OracleResult run_oracle(const ModelAnalysis &a, const OracleOptions &opts) {
    const ModelDef &m = a.model;
    OracleResult r;
    r.lattice = opts.config.lattice;
    r.rank_lattice = opts.rank_lattice.value_or(std::min(opts.config.lattice, 3));
    r.group_n = opts.config.group_n;
    r.seeds = opts.seeds;
    r.scheme = opts.config.scheme;

    std::vector<SmearedFunctional> first, second;
    for (const auto &e : a.report.matrix.entries) {
        first.push_back(smear_constraint(m, *m.constraint(e.first), "lam"));
        second.push_back(smear_constraint(m, *m.constraint(e.second), "mu"));
        r.entries.push_back({e.first, e.second, 0.0});
    }
    for (int k = 0; k < opts.seeds; ++k) {
        LatticeConfig cfg = opts.config;
        cfg.seed = opts.config.seed + static_cast<std::uint64_t>(k);
        Lattice lat(m, cfg);
        FieldAssignment fields = random_assignment(m, cfg, 1000 * cfg.seed + 1);
        for (std::size_t i = 0; i < a.report.matrix.entries.size(); ++i) {
            const auto &e = a.report.matrix.entries[i];
            FieldAssignment sm = random_smearings(m, e.bracket.params, cfg, 1000 * cfg.seed + 2);
            NumericBracket nb = numeric_bracket(lat, a.symplectic, first[i], second[i], fields, sm);
            auto sym = lat.functional(e.bracket, fields, sm);
            SmearedFunctional rec{e.bracket.params, reconstruct(m, e.projection, m.constraints, e.bracket.params)};
            auto back = lat.functional(rec, fields, sm);
            double err = std::max(relative_error(nb.value, sym, nb.scale), relative_error(nb.value, back, nb.scale));
            r.entries[i].worst = std::max(r.entries[i].worst, err);
        }
    }
    for (const auto &e : r.entries)
        r.worst = std::max(r.worst, e.worst);
    r.brackets_passed = r.worst <= kOracleTolerance;

    r.rank_labels = a.report.second_class;
    LatticeConfig rank_cfg = opts.config;
    rank_cfg.lattice = r.rank_lattice;
    r.rank = rank_check(m, a.symplectic, r.rank_labels, rank_cfg, opts.seeds);
    return r;
}

std::vector<GeneratorTerm> default_generator(const ClassificationReport &r, const std::optional<Fixture> &f) {
    if (f && !f->gauge.empty())
        return f->gauge.front().generator;
    std::vector<GeneratorTerm> g;
    for (const auto &label : r.first_class)
        g.push_back({label, "e_" + label});
    return g;
}

AnalysisReport build_report(const ModelDef &m, const std::string &source, const ReportOptions &opts) {
    AnalysisReport r;
    r.source = source;
    r.analysis = analyze_model(m, opts.convention);
    const ModelAnalysis &a = r.analysis;
    r.generator = default_generator(a.report, opts.fixture);
    for (const auto &fd : m.fields) {
        if (fd.kind == FieldKind::Multiplier)
            continue;
        r.gauge.push_back({fd.name, gauge_transform(m, a.symplectic, a.report, r.generator, fd.name)});
    }
    if (opts.fixture)
        r.checks = check_fixture(a, *opts.fixture);
    if (opts.oracle)
        r.oracle = run_oracle(a, *opts.oracle);
    return r;
}

std::string to_json(const AnalysisReport &r) {
    const ModelAnalysis &a = r.analysis;
    const ModelDef &m = a.model;
    const Algebra &alg = m.algebra;
    ojson doc;
    doc["schema_version"] = kReportSchemaVersion;
    doc["engine"] = {{"name", "dirac"}, {"version", kEngineVersion}};

    ojson model;
    model["name"] = m.name;
    model["source"] = r.source;
    model["sign_convention"] = to_string(m.sign_convention);
    model["constants"] = m.constants;
    ojson fams = ojson::array();
    for (const auto &f : alg.families())
        fams.push_back({{"name", f.name},
                        {"dimension", f.dimension.render()},
                        {"eps", f.epsilon},
                        {"structure", f.structure},
                        {"spatial", f.spatial},
                        {"letters", f.letters}});
    model["indices"] = fams;
    ojson fields = ojson::array();
    for (const auto &fd : m.fields) {
        std::vector<std::string> fam_names;
        for (int f : fd.families)
            fam_names.push_back(alg.family(f).name);
        ojson anti = ojson::array();
        for (auto [p, q] : fd.antisymmetric)
            anti.push_back({p + 1, q + 1});
        fields.push_back({{"name", fd.name}, {"kind", to_string(fd.kind)}, {"indices", fam_names},
                          {"antisymmetric", anti}});
    }
    model["fields"] = fields;
    doc["model"] = model;

    ojson sym = ojson::array();
    for (const auto &p : a.symplectic.pairings)
        sym.push_back({{"coordinate", p.coordinate},
                       {"momentum", p.momentum},
                       {"coefficient", render(alg, Expression::scalar(p.coefficient))},
                       {"antisymmetric", !p.antisymmetric.empty()}});
    doc["symplectic"] = sym;

    ojson cons = ojson::array();
    for (const auto &c : m.constraints)
        cons.push_back({{"label", c.label},
                        {"indices", indices_text(c.indices)},
                        {"body", render(alg, c.body)},
                        {"components", constraint_multiplicity(m, c).render()}});
    doc["constraints"] = cons;

    ojson brackets = ojson::array();
    for (const auto &e : a.report.matrix.entries)
        brackets.push_back({{"first", e.first},
                            {"second", e.second},
                            {"smeared", render(alg, e.bracket.body)},
                            {"weakly_zero", e.projection.weakly_zero()},
                            {"closes_on", closes_on(e.projection)},
                            {"coefficients", coefficients_json(alg, e.projection.coefficients)},
                            {"remainder", render(alg, e.projection.remainder)}});
    doc["brackets"] = brackets;

    doc["classification"] = {{"first_class", a.report.first_class}, {"second_class", a.report.second_class}};

    ojson reds = ojson::array();
    for (const auto &red : a.report.reducibilities)
        reds.push_back({{"constraint", red.constraint},
                        {"operator", red.operator_name},
                        {"count", red.count.render()},
                        {"coefficients", coefficients_json(alg, red.projection.coefficients)},
                        {"remainder", render(alg, red.projection.remainder)}});
    doc["reducibilities"] = reds;

    doc["dof"] = {{"variables", a.dof.variables.render()},
                  {"first_class", a.dof.first_class.render()},
                  {"reducibilities", a.dof.reducibilities.render()},
                  {"second_class", a.dof.second_class.render()},
                  {"dof", a.dof.dof.render()}};

    doc["hamiltonian"] = {{"density", render(alg, m.hamiltonian)},
                          {"coefficients", coefficients_json(alg, a.hamiltonian.coefficients)},
                          {"remainder", render(alg, a.hamiltonian.remainder)},
                          {"weakly_zero", a.hamiltonian.weakly_zero()}};

    ojson gen = ojson::array();
    for (const auto &g : r.generator)
        gen.push_back({{"constraint", g.constraint}, {"parameter", g.parameter}});
    ojson laws = ojson::array();
    for (const auto &g : r.gauge)
        laws.push_back({{"field", g.field}, {"variation", render(alg, g.variation)}});
    doc["gauge"] = {{"generator", gen}, {"laws", laws}};

    if (r.oracle) {
        const OracleResult &o = *r.oracle;
        ojson entries = ojson::array();
        for (const auto &e : o.entries)
            entries.push_back({{"first", e.first}, {"second", e.second}, {"relative_error", e.worst}});
        doc["oracle"] = {{"lattice", o.lattice},
                         {"rank_lattice", o.rank_lattice},
                         {"group_n", o.group_n},
                         {"scheme", to_string(o.scheme)},
                         {"seeds", o.seeds},
                         {"tolerance", kOracleTolerance},
                         {"entries", entries},
                         {"worst_relative_error", o.worst},
                         {"brackets_passed", o.brackets_passed},
                         {"rank_check",
                          {{"labels", o.rank_labels},
                           {"size", o.rank.size},
                           {"full_rank", o.rank.full_rank},
                           {"margin", o.rank.margin}}},
                         {"passed", o.passed()}};
    } else {
        doc["oracle"] = nullptr;
    }

    if (r.checks) {
        ojson checks = ojson::array();
        for (const auto &c : *r.checks)
            checks.push_back({{"name", c.name},
                              {"cite", c.cite},
                              {"passed", c.passed},
                              {"expected", c.expected},
                              {"actual", c.actual}});
        doc["checks"] = checks;
    } else {
        doc["checks"] = nullptr;
    }

    doc["assumptions"] = a.report.assumptions;
    return doc.dump(2) + "\n";
}

std::string to_text(const AnalysisReport &r) {
    const ModelAnalysis &a = r.analysis;
    const ModelDef &m = a.model;
    const Algebra &alg = m.algebra;
    std::ostringstream os;
    os << "model " << m.name << " (" << r.source << "), sign convention " << to_string(m.sign_convention) << "\n\n";

    os << "pairings\n";
    for (const auto &p : a.symplectic.pairings)
        os << "  {" << p.coordinate << ", " << p.momentum << "} = " << render(alg, Expression::scalar(p.coefficient))
           << (p.antisymmetric.empty() ? "" : "  (antisymmetric)") << "\n";

    os << "\nconstraints\n";
    for (const auto &c : m.constraints)
        os << "  " << c.label << indices_text(c.indices) << " = " << render(alg, c.body) << "   ["
           << constraint_multiplicity(m, c).render() << "]\n";

    os << "\nbrackets (lam on the first, mu on the second)\n";
    for (const auto &e : a.report.matrix.entries)
        os << "  {" << e.first << ", " << e.second << "} = " << coefficients_text(alg, e.projection) << "\n";

    os << "\nclassification\n  first class:  " << join(a.report.first_class)
       << "\n  second class: " << join(a.report.second_class) << "\n";

    os << "\nreducibilities\n";
    if (a.report.reducibilities.empty())
        os << "  none\n";
    for (const auto &red : a.report.reducibilities)
        os << "  " << red.operator_name << " " << red.constraint << " = " << coefficients_text(alg, red.projection)
           << "   [" << red.count.render() << "]\n";

    os << "\ndegrees of freedom\n"
       << "  variables " << a.dof.variables.render() << ", first class " << a.dof.first_class.render()
       << ", reducibilities " << a.dof.reducibilities.render() << ", second class " << a.dof.second_class.render()
       << "\n  dof " << a.dof.dof.render() << "\n";

    os << "\nhamiltonian\n  constraint part: " << coefficients_text(alg, {a.hamiltonian.coefficients, {}})
       << "\n  remainder: " << render(alg, a.hamiltonian.remainder) << "\n";

    std::vector<std::string> gen;
    for (const auto &g : r.generator)
        gen.push_back(g.constraint + "[" + g.parameter + "]");
    os << "\ngauge laws, generator " << join(gen, " + ") << "\n";
    for (const auto &g : r.gauge)
        os << "  delta " << g.field << " = " << render(alg, g.variation) << "\n";

    if (r.oracle) {
        const OracleResult &o = *r.oracle;
        os << "\noracle: lattice " << o.lattice << ", N = " << o.group_n << ", " << to_string(o.scheme) << ", "
           << o.seeds << " seed(s)\n"
           << "  brackets: worst relative error " << number(o.worst) << (o.brackets_passed ? " (pass)" : " (FAIL)")
           << "\n  rank check on {" << join(o.rank_labels) << "} at lattice " << o.rank_lattice << ": size "
           << o.rank.size << ", " << (o.rank.full_rank ? "full rank" : "DEGENERATE") << ", margin "
           << number(o.rank.margin) << "\n";
    }

    if (r.checks) {
        int passed = 0;
        for (const auto &c : *r.checks)
            passed += c.passed;
        os << "\nfixture checks: " << passed << "/" << r.checks->size() << " passed\n";
        for (const auto &c : *r.checks) {
            os << "  " << (c.passed ? "pass" : "FAIL") << "  " << c.name << "   (" << c.cite << ")\n";
            if (!c.passed)
                os << "        expected: " << c.expected << "\n        actual:   " << c.actual << "\n";
        }
    }

    os << "\nassumptions\n";
    for (const auto &s : a.report.assumptions)
        os << "  - " << s << "\n";
    return os.str();
}

} // namespace dirac
