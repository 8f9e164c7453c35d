// Command-line frontend: analyze, bracket, dof, verify.

#include "dirac/report.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

namespace {

using namespace dirac;
using ojson = nlohmann::ordered_json;

constexpr int kExitMismatch = 1;
constexpr int kExitUsage = 2;

struct Common {
    std::string format = "text";
    std::string oracle = "off";
    int seeds = 1;
    int lattice = 4;
    int rank_lattice = 0;
    int group_n = 2;
    std::string scheme = "central";
    std::string convention;
    std::string fixtures;
};

void add_common(CLI::App *cmd, Common &c, const std::string &oracle_default) {
    c.oracle = oracle_default;
    cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"text", "json"}))->capture_default_str();
    cmd->add_option("--oracle", c.oracle, "Cross-check with the lattice oracle")
        ->check(CLI::IsMember({"on", "off"}))
        ->capture_default_str();
    cmd->add_option("--oracle-seeds", c.seeds, "Random configurations per model")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--lattice", c.lattice, "Lattice sites per direction")
        ->check(CLI::Range(2, 16))
        ->capture_default_str();
    cmd->add_option("--rank-lattice", c.rank_lattice, "Lattice size for the second-class rank check (default min(L, 3))")
        ->check(CLI::Range(2, 16));
    cmd->add_option("--group-n", c.group_n, "N of su(N) for adjoint indices")
        ->check(CLI::Range(2, 4))
        ->capture_default_str();
    cmd->add_option("--scheme", c.scheme, "Lattice difference scheme")
        ->check(CLI::IsMember({"central", "spectral"}))
        ->capture_default_str();
    cmd->add_option("--sign-convention", c.convention, "Override the model's sign convention")
        ->check(CLI::IsMember({"paper", "kinetic"}));
    cmd->add_option("--fixtures", c.fixtures, "Fixture table (JSON) replacing the built-in one");
}

std::optional<SignConvention> convention(const Common &c) {
    if (c.convention.empty())
        return std::nullopt;
    return c.convention == "paper" ? SignConvention::Paper : SignConvention::Kinetic;
}

std::optional<OracleOptions> oracle_options(const Common &c) {
    if (c.oracle != "on")
        return std::nullopt;
    OracleOptions o;
    o.config.lattice = c.lattice;
    o.config.group_n = c.group_n;
    o.config.scheme = c.scheme == "spectral" ? DifferenceScheme::Spectral : DifferenceScheme::Central;
    o.seeds = c.seeds;
    if (c.rank_lattice > 0)
        o.rank_lattice = c.rank_lattice;
    return o;
}

std::string read_file(const std::string &path) {
    std::ifstream in(path);
    if (!in)
        throw InputError("file not found: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::map<std::string, Fixture> fixture_table(const Common &c) {
    return parse_fixtures(c.fixtures.empty() ? builtin_fixture_source() : read_file(c.fixtures));
}

std::optional<Fixture> fixture_for(const Common &c, const std::string &model) {
    auto table = fixture_table(c);
    auto it = table.find(model);
    if (it == table.end())
        return std::nullopt;
    return it->second;
}

/// Parses and validates; diagnostics go to stderr.
ModelDef load_checked(const std::string &spec) {
    ModelDef m = load_model(spec);
    auto diags = validate_model(m);
    if (!diags.empty()) {
        for (const auto &d : diags)
            std::cerr << spec << ":" << d.pos.str() << ": " << d.message << "\n";
        throw InputError("model '" + spec + "' failed validation");
    }
    return m;
}

int cmd_analyze(const std::string &spec, const Common &c, const std::string &output) {
    ModelDef m = load_checked(spec);
    ReportOptions opts;
    opts.convention = convention(c);
    opts.fixture = fixture_for(c, m.name);
    opts.oracle = oracle_options(c);
    AnalysisReport r = build_report(m, spec, opts);
    std::string text = c.format == "json" ? to_json(r) : to_text(r);
    if (output.empty()) {
        std::cout << text;
    } else {
        std::ofstream out(output);
        if (!out)
            throw InputError("cannot write " + output);
        out << text;
    }
    return 0;
}

int cmd_dof(const std::string &spec, const Common &c) {
    ModelDef m = load_checked(spec);
    ModelAnalysis a = analyze_model(m, convention(c));
    if (c.format == "json") {
        ojson doc = {{"schema_version", kReportSchemaVersion},
                     {"model", m.name},
                     {"variables", a.dof.variables.render()},
                     {"first_class", a.dof.first_class.render()},
                     {"reducibilities", a.dof.reducibilities.render()},
                     {"second_class", a.dof.second_class.render()},
                     {"dof", a.dof.dof.render()}};
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "variables " << a.dof.variables.render() << "\nfirst class " << a.dof.first_class.render()
                  << "\nreducibilities " << a.dof.reducibilities.render() << "\nsecond class "
                  << a.dof.second_class.render() << "\ndof " << a.dof.dof.render() << "\n";
    }
    return 0;
}

int cmd_bracket(const std::string &spec, const std::string &first, const std::string &second, const Common &c) {
    ModelDef m = load_checked(spec);
    for (const auto &label : {first, second})
        if (!m.constraint(label)) {
            std::string avail;
            for (const auto &l : m.constraint_labels())
                avail += (avail.empty() ? "" : ", ") + l;
            std::cerr << "error: unknown constraint label '" << label << "' (available: " << avail << ")\n";
            return kExitUsage;
        }
    const Algebra &alg = m.algebra;
    SymplecticStructure s = extract_symplectic(m, convention(c));
    BracketEntry e = bracket_entry(m, s, first, second);
    std::vector<std::string> taken;
    std::vector<Index> xi = fresh_indices(alg, e.bracket.params.at(0).families, taken);
    std::vector<Index> yi = fresh_indices(alg, e.bracket.params.at(1).families, taken);
    std::string localized = render(alg, localize(alg, e.bracket, xi, yi));

    std::optional<OracleResult> oracle;
    if (auto o = oracle_options(c)) {
        ModelAnalysis a;
        a.model = m;
        a.symplectic = s;
        a.report.matrix.labels = {first, second};
        a.report.matrix.entries = {e};
        oracle = run_oracle(a, *o);
    }

    if (c.format == "json") {
        ojson coeffs = ojson::object();
        for (const auto &[label, ex] : e.projection.coefficients)
            coeffs[label] = render(alg, ex);
        ojson doc = {{"schema_version", kReportSchemaVersion},
                     {"engine", {{"name", "dirac"}, {"version", kEngineVersion}}},
                     {"model", m.name},
                     {"first", first},
                     {"second", second},
                     {"smeared", render(alg, e.bracket.body)},
                     {"localized", localized},
                     {"weakly_zero", e.projection.weakly_zero()},
                     {"closes_on", closes_on(e.projection)},
                     {"coefficients", coeffs},
                     {"remainder", render(alg, e.projection.remainder)}};
        if (oracle)
            doc["oracle"] = {{"lattice", oracle->lattice},
                             {"seeds", oracle->seeds},
                             {"relative_error", oracle->worst},
                             {"passed", oracle->brackets_passed}};
        std::cout << doc.dump(2) << "\n";
    } else {
        std::cout << "{" << first << "[lam], " << second << "[mu]}\n"
                  << "  smeared:   " << render(alg, e.bracket.body) << "\n"
                  << "  localized: " << localized << "\n"
                  << "  closes on: ";
        auto on = closes_on(e.projection);
        std::cout << (on.empty() ? std::string("nothing (vanishes weakly)") : on.front());
        for (std::size_t i = 1; i < on.size(); ++i)
            std::cout << ", " << on[i];
        std::cout << "\n";
        for (const auto &[label, ex] : e.projection.coefficients)
            if (!ex.is_zero())
                std::cout << "    " << label << ": " << render(alg, ex) << "\n";
        if (!e.projection.weakly_zero())
            std::cout << "  remainder: " << render(alg, e.projection.remainder) << "\n";
        if (oracle)
            std::cout << "  oracle:    relative error " << oracle->worst
                      << (oracle->brackets_passed ? " (pass)" : " (FAIL)") << "\n";
    }
    return 0;
}

/// The {phi, psi} bracket closes on psi for second_chern and on phi for euler.
std::string role_swap_line(const std::map<std::string, AnalysisReport> &reports, bool &ok) {
    auto sc = reports.find("second_chern");
    auto eu = reports.find("euler");
    if (sc == reports.end() || eu == reports.end())
        return "";
    auto a = closes_on(sc->second.analysis.report.matrix.at("phi", "psi").projection);
    auto b = closes_on(eu->second.analysis.report.matrix.at("phi", "psi").projection);
    auto list = [](const std::vector<std::string> &v) {
        std::string s;
        for (const auto &x : v)
            s += (s.empty() ? "" : ",") + x;
        return s.empty() ? std::string("0") : s;
    };
    ok = a == std::vector<std::string>{"psi"} && b == std::vector<std::string>{"phi"};
    return std::string(ok ? "pass" : "FAIL") + "  role swap {phi,psi}: second_chern -> " + list(a) +
           ", euler -> " + list(b);
}

int cmd_verify(const std::string &only, const Common &c) {
    std::vector<std::string> names;
    if (only.empty()) {
        names = builtin_names();
    } else {
        std::stringstream ss(only);
        std::string n;
        while (std::getline(ss, n, ','))
            if (!n.empty()) {
                builtin_source(n); // throws UnknownModelError
                names.push_back(n);
            }
    }
    auto table = fixture_table(c);
    bool all = true;
    std::map<std::string, AnalysisReport> reports;
    ojson doc = {{"schema_version", kReportSchemaVersion},
                 {"engine", {{"name", "dirac"}, {"version", kEngineVersion}}}};
    ojson models = ojson::array();
    for (const auto &n : names) {
        auto it = table.find(n);
        if (it == table.end())
            throw InputError("no fixture for model '" + n + "'");
        ReportOptions opts;
        opts.convention = convention(c);
        opts.fixture = it->second;
        opts.oracle = oracle_options(c);
        AnalysisReport r = build_report(builtin(n), "builtin:" + n, opts);
        int passed = 0;
        ojson checks = ojson::array();
        for (const auto &ch : *r.checks) {
            passed += ch.passed;
            checks.push_back({{"name", ch.name},
                              {"cite", ch.cite},
                              {"passed", ch.passed},
                              {"expected", ch.expected},
                              {"actual", ch.actual}});
        }
        bool model_ok = passed == static_cast<int>(r.checks->size()) && (!r.oracle || r.oracle->passed());
        all = all && model_ok;
        ojson entry = {{"model", n}, {"passed", model_ok}, {"checks", checks}};
        if (c.format == "text") {
            std::cout << n << ": " << passed << "/" << r.checks->size() << " checks passed\n";
            for (const auto &ch : *r.checks) {
                std::cout << "  " << (ch.passed ? "pass" : "FAIL") << "  " << ch.name << "\n";
                if (!ch.passed)
                    std::cout << "        expected: " << ch.expected << "\n        actual:   " << ch.actual << "\n";
            }
        }
        if (r.oracle) {
            const OracleResult &o = *r.oracle;
            entry["oracle"] = {{"lattice", o.lattice},
                               {"seeds", o.seeds},
                               {"worst_relative_error", o.worst},
                               {"brackets_passed", o.brackets_passed},
                               {"rank_full", o.rank.full_rank},
                               {"rank_margin", o.rank.margin}};
            if (c.format == "text") {
                std::ostringstream err;
                err.precision(3);
                err << std::scientific << o.worst;
                std::cout << "  " << (o.brackets_passed ? "pass" : "FAIL") << "  oracle brackets, lattice "
                          << o.lattice << ", " << o.seeds << " seed(s), worst relative error " << err.str() << "\n"
                          << "  " << (o.rank.full_rank ? "pass" : "FAIL") << "  oracle rank of second-class block ("
                          << o.rank.size << " rows)\n";
            }
        }
        models.push_back(entry);
        reports.emplace(n, std::move(r));
    }
    bool swap_ok = true;
    std::string swap = role_swap_line(reports, swap_ok);
    all = all && swap_ok;
    if (c.format == "json") {
        doc["models"] = models;
        if (!swap.empty())
            doc["role_swap"] = {{"passed", swap_ok}, {"summary", swap.substr(6)}};
        doc["passed"] = all;
        std::cout << doc.dump(2) << "\n";
    } else {
        if (!swap.empty())
            std::cout << swap << "\n";
        std::cout << (all ? "all checks passed" : "verification FAILED") << "\n";
    }
    return all ? 0 : kExitMismatch;
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Canonical constraint analysis of field-theory models"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dirac::kEngineVersion));

    Common analyze_opts, bracket_opts, dof_opts, verify_opts;
    std::string model, first, second, output, only;

    auto *analyze = app.add_subcommand("analyze", "Full analysis of a model");
    analyze->add_option("model", model, "Model file or builtin:<name>")->required();
    analyze->add_option("-o,--output", output, "Write the report to a file");
    add_common(analyze, analyze_opts, "off");

    auto *bracket = app.add_subcommand("bracket", "Bracket of two constraints");
    bracket->add_option("model", model, "Model file or builtin:<name>")->required();
    bracket->add_option("first", first, "First constraint label")->required();
    bracket->add_option("second", second, "Second constraint label")->required();
    add_common(bracket, bracket_opts, "off");

    auto *dof = app.add_subcommand("dof", "Degree-of-freedom count");
    dof->add_option("model", model, "Model file or builtin:<name>")->required();
    add_common(dof, dof_opts, "off");

    auto *verify = app.add_subcommand("verify", "Check every built-in model against its fixture");
    verify->add_option("--only", only, "Comma-separated model subset");
    add_common(verify, verify_opts, "on");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*analyze)
            return cmd_analyze(model, analyze_opts, output);
        if (*bracket)
            return cmd_bracket(model, first, second, bracket_opts);
        if (*dof)
            return cmd_dof(model, dof_opts);
        return cmd_verify(only, verify_opts);
    } catch (const dirac::ParseError &e) {
        std::cerr << model << ":" << e.what() << "\n";
        return kExitUsage;
    } catch (const dirac::InputError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const dirac::UnknownModelError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
}
