#include "dirac/dsl.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>
#include <sstream>

namespace dirac {

std::string to_string(FieldKind k) {
    switch (k) {
    case FieldKind::Coordinate:
        return "coordinate";
    case FieldKind::Momentum:
        return "momentum";
    case FieldKind::Multiplier:
        return "multiplier";
    }
    return "?";
}

std::string to_string(SignConvention s) { return s == SignConvention::Kinetic ? "kinetic" : "paper"; }

const FieldDecl *ModelDef::field(const std::string &n) const {
    for (const auto &f : fields)
        if (f.name == n)
            return &f;
    return nullptr;
}

const ConstraintDef *ModelDef::constraint(const std::string &label) const {
    for (const auto &c : constraints)
        if (c.label == label)
            return &c;
    return nullptr;
}

std::vector<std::string> ModelDef::constraint_labels() const {
    std::vector<std::string> out;
    for (const auto &c : constraints)
        out.push_back(c.label);
    return out;
}

namespace {

bool is_multiplier(const ModelDef &m, const std::string &name) {
    const FieldDecl *f = m.field(name);
    return f && f->kind == FieldKind::Multiplier;
}

} // namespace

Expression hamiltonian_remainder(const ModelDef &m) {
    std::vector<Term> kept;
    for (const auto &t : m.hamiltonian.terms()) {
        bool mult = std::any_of(t.factors.begin(), t.factors.end(), [&](const Factor &f) {
            return f.kind == FactorKind::Tensor && is_multiplier(m, f.name);
        });
        if (!mult)
            kept.push_back(t);
    }
    return canonicalize(m.algebra, Expression::from_terms(std::move(kept)));
}

std::vector<MultiplierCoupling> multiplier_couplings(const ModelDef &m) {
    std::map<std::string, std::vector<Term>> groups;
    for (const auto &t : m.hamiltonian.terms())
        for (const auto &f : t.factors)
            if (f.kind == FactorKind::Tensor && is_multiplier(m, f.name)) {
                groups[f.name].push_back(t);
                break;
            }
    std::vector<MultiplierCoupling> out;
    for (const auto &fd : m.fields)
        if (auto it = groups.find(fd.name); it != groups.end())
            out.push_back({fd.name, canonicalize(m.algebra, Expression::from_terms(it->second))});
    return out;
}

// ---------------------------------------------------------------------------
// Expression parser

namespace {

/// Text with a source position for every character.
struct Located {
    std::string text;
    std::vector<SourcePos> pos;

    void append(const std::string &s, SourcePos start) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            text += s[i];
            pos.push_back({start.line, start.column + static_cast<int>(i)});
        }
    }
    SourcePos at(std::size_t i) const {
        if (pos.empty())
            return {};
        return i < pos.size() ? pos[i] : SourcePos{pos.back().line, pos.back().column + 1};
    }
};

enum class Tok { Ident, Number, Symbol, End };

struct Token {
    Tok kind;
    std::string text;
    SourcePos pos;
};

std::vector<Token> tokenize(const Located &src) {
    std::vector<Token> out;
    const std::string &s = src.text;
    std::size_t i = 0;
    while (i < s.size()) {
        unsigned char ch = static_cast<unsigned char>(s[i]);
        if (std::isspace(ch)) {
            ++i;
            continue;
        }
        std::size_t start = i;
        if (std::isalpha(ch) || ch == '_') {
            while (i < s.size() && (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
                ++i;
            out.push_back({Tok::Ident, s.substr(start, i - start), src.at(start)});
        } else if (std::isdigit(ch)) {
            while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])))
                ++i;
            out.push_back({Tok::Number, s.substr(start, i - start), src.at(start)});
        } else if (std::string("+-*/^()[],@").find(static_cast<char>(ch)) != std::string::npos) {
            out.push_back({Tok::Symbol, std::string(1, static_cast<char>(ch)), src.at(start)});
            ++i;
        } else {
            throw ParseError(src.at(start), std::string("unexpected character '") + static_cast<char>(ch) + "'");
        }
    }
    out.push_back({Tok::End, "", src.at(s.size())});
    return out;
}

class ExprParser {
  public:
    ExprParser(std::vector<Token> toks, const Algebra &alg, const std::vector<std::string> &constants,
               ExprParseOptions opts)
        : toks_(std::move(toks)), alg_(alg), constants_(constants), opts_(opts) {}

    Expression parse_all() {
        Parsed e = parse_sum();
        if (peek().kind != Tok::End)
            throw ParseError(peek().pos, "unexpected '" + peek().text + "'");
        return e.e;
    }

    const Token &peek() const { return toks_[pos_]; }

  private:
    /// An expression with the index names already contracted inside it; a name may
    /// occur at most twice in a term.
    struct Parsed {
        Expression e;
        std::set<std::string> bound;
    };

    static std::set<std::string> free_names(const Expression &e) {
        std::set<std::string> out;
        for (const auto &i : free_indices(e))
            out.insert(i.name);
        return out;
    }

    static Parsed contract(Parsed a, const Parsed &b, const Algebra &alg, SourcePos pos) {
        auto fa = free_names(a.e), fb = free_names(b.e);
        for (const auto &n : fb)
            if (a.bound.count(n))
                throw ParseError(pos, "index '" + n + "' occurs more than twice in a term");
        for (const auto &n : fa) {
            if (b.bound.count(n))
                throw ParseError(pos, "index '" + n + "' occurs more than twice in a term");
            if (fb.count(n))
                a.bound.insert(n);
        }
        a.bound.insert(b.bound.begin(), b.bound.end());
        a.e = multiply(alg, a.e, b.e);
        return a;
    }

    const Token &next() { return toks_[pos_++]; }
    bool accept(const std::string &sym) {
        if (peek().kind == Tok::Symbol && peek().text == sym) {
            ++pos_;
            return true;
        }
        return false;
    }
    void expect(const std::string &sym) {
        if (!accept(sym))
            throw ParseError(peek().pos, "expected '" + sym + "' but found '" + peek().text + "'");
    }

    Parsed parse_sum() {
        Parsed acc;
        bool first = true;
        while (true) {
            int sign = 1;
            if (accept("-"))
                sign = -1;
            else if (!first && !accept("+"))
                break;
            else if (first)
                accept("+");
            Parsed t = parse_product();
            acc.e = add(alg_, acc.e, sign < 0 ? scale(alg_, t.e, Scalar(-1)) : t.e);
            acc.bound.insert(t.bound.begin(), t.bound.end());
            first = false;
            if (!(peek().kind == Tok::Symbol && (peek().text == "+" || peek().text == "-")))
                break;
        }
        return acc;
    }

    Parsed parse_product() {
        Parsed acc = parse_power();
        while (true) {
            if (accept("*")) {
                SourcePos p = peek().pos;
                acc = contract(std::move(acc), parse_power(), alg_, p);
            } else if (peek().kind == Tok::Symbol && peek().text == "/") {
                SourcePos p = next().pos;
                Parsed d = parse_power();
                if (d.e.terms().size() != 1 || !d.e.terms()[0].factors.empty())
                    throw ParseError(p, "division only by a nonzero scalar");
                acc.e = scale(alg_, acc.e, d.e.terms()[0].coeff.inverse());
            } else {
                break;
            }
        }
        return acc;
    }

    Parsed parse_power() {
        SourcePos at = peek().pos;
        Parsed base = parse_primary();
        if (accept("^")) {
            SourcePos p = peek().pos;
            int sign = accept("-") ? -1 : 1;
            if (peek().kind != Tok::Number)
                throw ParseError(peek().pos, "expected integer exponent");
            int n = sign * std::stoi(next().text);
            if (base.e.terms().size() == 1 && base.e.terms()[0].factors.empty())
                return {Expression::scalar(base.e.terms()[0].coeff.pow(n)), {}};
            if (n < 0)
                throw ParseError(p, "negative power of a non-scalar");
            Parsed r{Expression::scalar(Scalar(1)), {}};
            for (int k = 0; k < n; ++k)
                r = contract(std::move(r), base, alg_, at);
            return r;
        }
        return base;
    }

    Index make_index(const Token &t, std::optional<int> required_family) {
        if (t.kind != Tok::Ident)
            throw ParseError(t.pos, "expected index name, found '" + t.text + "'");
        auto fam = alg_.family_of_index(t.text);
        if (!fam)
            throw ParseError(t.pos, "index '" + t.text + "' belongs to no index family");
        if (required_family && *fam != *required_family)
            throw ParseError(t.pos, "index '" + t.text + "' is in family '" + alg_.family(*fam).name +
                                        "' but '" + alg_.family(*required_family).name + "' is required");
        return Index{*fam, t.text};
    }

    std::vector<Token> index_list(const std::string &open, const std::string &close) {
        expect(open);
        std::vector<Token> out;
        if (accept(close))
            return out;
        do {
            out.push_back(next());
        } while (accept(","));
        expect(close);
        return out;
    }

    Parsed parse_primary() {
        const Token &t = peek();
        if (t.kind == Tok::Number) {
            next();
            return {Expression::scalar(Scalar(Rational(t.text))), {}};
        }
        if (accept("(")) {
            Parsed e = parse_sum();
            expect(")");
            return e;
        }
        if (t.kind != Tok::Ident)
            throw ParseError(t.pos, "unexpected '" + t.text + "'");
        Token id = next();
        const std::string &name = id.text;

        if (name == "eps" || name == "f" || name == "delta") {
            auto toks = index_list("(", ")");
            std::vector<Index> idx;
            for (auto &tk : toks)
                idx.push_back(make_index(tk, std::nullopt));
            if (name == "delta") {
                if (idx.size() != 2 || idx[0].family != idx[1].family)
                    throw ParseError(id.pos, "delta takes two indices of one family");
                return {canon(Factor::kronecker(idx[0], idx[1]), id.pos), {}};
            }
            if (idx.size() != 3)
                throw ParseError(id.pos, name + " takes three indices");
            return {canon(name == "eps" ? Factor::epsilon(idx) : Factor::structure(idx), id.pos), {}};
        }
        if (name == "delta3") {
            expect("(");
            if (peek().kind != Tok::Ident)
                throw ParseError(peek().pos, "expected point label");
            std::string x = next().text;
            expect(",");
            if (peek().kind != Tok::Ident)
                throw ParseError(peek().pos, "expected point label");
            std::string y = next().text;
            expect(")");
            return {canon(Factor::distribution(x, y), id.pos), {}};
        }
        if (name == "dt") {
            if (!opts_.allow_time_derivative)
                throw ParseError(id.pos, "time derivative outside the kinetic section");
            expect("(");
            Parsed inner = parse_primary();
            expect(")");
            if (inner.e.terms().size() != 1 || inner.e.terms()[0].factors.size() != 1 ||
                inner.e.terms()[0].factors[0].kind != FactorKind::Tensor)
                throw ParseError(id.pos, "dt() applies to a single field");
            Term term = inner.e.terms()[0];
            term.factors[0].point = "dt";
            return {Expression::from_terms({term}), {}};
        }
        if (name.size() > 2 && name.rfind("d_", 0) == 0) {
            Token itok{Tok::Ident, name.substr(2), {id.pos.line, id.pos.column + 2}};
            Index di = make_index(itok, alg_.spatial_family());
            expect("(");
            Parsed inner = parse_sum();
            expect(")");
            if (inner.bound.count(di.name))
                throw ParseError(itok.pos, "index '" + di.name + "' occurs more than twice in a term");
            if (free_names(inner.e).count(di.name))
                inner.bound.insert(di.name);
            try {
                return {derivative(alg_, inner.e, di), inner.bound};
            } catch (const StructuralError &err) {
                throw ParseError(id.pos, err.what());
            }
        }
        if (name == kImaginary || std::find(constants_.begin(), constants_.end(), name) != constants_.end())
            return {Expression::scalar(Scalar::symbol(name)), {}};

        const TensorDecl *decl = alg_.tensor(name);
        if (!decl && !opts_.allow_undeclared_tensors)
            throw ParseError(id.pos, "unknown field '" + name + "'");
        std::vector<Token> toks;
        if (peek().kind == Tok::Symbol && peek().text == "[")
            toks = index_list("[", "]");
        if (decl && toks.size() != decl->families.size())
            throw ParseError(id.pos, "arity mismatch: '" + name + "' takes " + std::to_string(decl->families.size()) +
                                         " indices, got " + std::to_string(toks.size()));
        std::vector<Index> idx;
        for (std::size_t k = 0; k < toks.size(); ++k)
            idx.push_back(make_index(toks[k], decl ? std::optional<int>(decl->families[k]) : std::nullopt));
        Factor f = Factor::tensor(name, idx);
        if (accept("@")) {
            if (peek().kind != Tok::Ident)
                throw ParseError(peek().pos, "expected point label");
            f.point = next().text;
        }
        return {canon(f, id.pos), {}};
    }

    Expression canon(const Factor &f, SourcePos p) {
        try {
            return canonicalize(alg_, Expression::factor(f));
        } catch (const StructuralError &err) {
            throw ParseError(p, err.what());
        }
    }

    std::vector<Token> toks_;
    std::size_t pos_ = 0;
    const Algebra &alg_;
    const std::vector<std::string> &constants_;
    ExprParseOptions opts_;
};

Expression parse_located(const Located &src, const Algebra &alg, const std::vector<std::string> &constants,
                         const ExprParseOptions &opts) {
    ExprParser p(tokenize(src), alg, constants, opts);
    try {
        return p.parse_all();
    } catch (const StructuralError &err) {
        throw ParseError(p.peek().pos, err.what());
    }
}

} // namespace

Expression parse_expression(const std::string &text, const Algebra &alg, const std::vector<std::string> &constants,
                            const ExprParseOptions &opts, SourcePos origin) {
    Located src;
    src.append(text, origin);
    return parse_located(src, alg, constants, opts);
}

// ---------------------------------------------------------------------------
// Model parser

namespace {

struct Line {
    int number;
    int indent;
    std::string text; // comment-stripped, right-trimmed
};

std::vector<std::string> words(const std::string &s) {
    std::istringstream is(s);
    std::vector<std::string> out;
    std::string w;
    while (is >> w)
        out.push_back(w);
    return out;
}

bool is_identifier(const std::string &s) {
    if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

// Smearing parameters used by the analysis are reserved too.
const std::set<std::string> kReserved = {"eps", "f", "delta", "delta3", "dt", "N", "I", "lam", "mu", "nu", "rho"};

class ModelParser {
  public:
    explicit ModelParser(const std::string &text) {
        std::istringstream is(text);
        std::string raw;
        int n = 0;
        while (std::getline(is, raw)) {
            ++n;
            if (auto h = raw.find('#'); h != std::string::npos)
                raw = raw.substr(0, h);
            while (!raw.empty() && std::isspace(static_cast<unsigned char>(raw.back())))
                raw.pop_back();
            std::size_t ind = 0;
            while (ind < raw.size() && (raw[ind] == ' ' || raw[ind] == '\t'))
                ++ind;
            if (ind == raw.size())
                continue;
            lines_.push_back({n, static_cast<int>(ind), raw});
        }
    }

    ModelDef run() {
        ModelDef m;
        std::size_t i = 0;
        bool saw_model = false;
        std::set<std::string> sections_seen;
        while (i < lines_.size()) {
            const Line &ln = lines_[i];
            if (ln.indent != 0)
                throw ParseError(pos(ln, ln.indent), "indented line outside a section");
            auto w = words(ln.text);
            const std::string &head = w[0];
            if (!saw_model && head != "model")
                throw ParseError(pos(ln, 0), "model file must start with 'model <name>'");
            if (head == "model") {
                if (saw_model)
                    throw ParseError(pos(ln, 0), "duplicate model header");
                if (w.size() != 2 || !is_identifier(w[1]))
                    throw ParseError(pos(ln, 0), "expected 'model <name>'");
                m.name = w[1];
                m.name_pos = pos(ln, 0);
                saw_model = true;
                ++i;
            } else if (head == "sign_convention") {
                if (w.size() != 2 || (w[1] != "kinetic" && w[1] != "paper"))
                    throw ParseError(pos(ln, 0), "expected 'sign_convention kinetic|paper'");
                m.sign_convention = w[1] == "paper" ? SignConvention::Paper : SignConvention::Kinetic;
                ++i;
            } else if (head == "constants" || head == "indices" || head == "fields" || head == "kinetic" ||
                       head == "hamiltonian") {
                if (w.size() != 1)
                    throw ParseError(pos(ln, static_cast<int>(head.size())), "unexpected text after '" + head + "'");
                if (!sections_seen.insert(head).second)
                    throw ParseError(pos(ln, 0), "duplicate section '" + head + "'");
                std::size_t j = i + 1;
                std::vector<Line> body;
                while (j < lines_.size() && lines_[j].indent > 0)
                    body.push_back(lines_[j++]);
                if (head == "constants")
                    parse_constants(m, body);
                else if (head == "indices")
                    parse_indices(m, body);
                else if (head == "fields")
                    parse_fields(m, body);
                else if (head == "kinetic")
                    parse_kinetic(m, body);
                else {
                    if (body.empty())
                        throw ParseError(pos(ln, 0), "empty hamiltonian section");
                    m.hamiltonian_pos = pos(body[0], body[0].indent);
                    m.hamiltonian = parse_body(m, body, {});
                }
                i = j;
            } else if (head == "constraint") {
                std::size_t j = i + 1;
                std::vector<Line> body;
                while (j < lines_.size() && lines_[j].indent > 0)
                    body.push_back(lines_[j++]);
                parse_constraint(m, ln, body);
                i = j;
            } else {
                throw ParseError(pos(ln, 0), "unknown section '" + head + "'");
            }
        }
        if (!saw_model)
            throw ParseError({1, 1}, "empty model file");
        for (const auto &d : validate_model(m))
            if (d.message.rfind("unpaired momentum", 0) == 0)
                throw ParseError(d.pos, d.message);
        return m;
    }

  private:
    static SourcePos pos(const Line &ln, int col) { return {ln.number, col + 1}; }

    SourcePos word_pos(const Line &ln, const std::string &w) const {
        auto at = ln.text.find(w);
        return pos(ln, at == std::string::npos ? ln.indent : static_cast<int>(at));
    }

    void parse_constants(ModelDef &m, const std::vector<Line> &body) {
        for (const auto &ln : body)
            for (const auto &w : words(ln.text)) {
                if (!is_identifier(w) || kReserved.count(w))
                    throw ParseError(word_pos(ln, w), "invalid constant name '" + w + "'");
                if (std::find(m.constants.begin(), m.constants.end(), w) != m.constants.end())
                    throw ParseError(word_pos(ln, w), "duplicate declaration of constant '" + w + "'");
                m.constants.push_back(w);
            }
    }

    void parse_indices(ModelDef &m, const std::vector<Line> &body) {
        for (const auto &ln : body) {
            auto w = words(ln.text);
            IndexFamily fam;
            fam.name = w[0];
            if (!is_identifier(fam.name))
                throw ParseError(pos(ln, ln.indent), "invalid family name '" + fam.name + "'");
            std::size_t k = 1;
            if (k >= w.size() || w[k] != "dim")
                throw ParseError(pos(ln, ln.indent), "expected 'dim' after family name");
            ++k;
            if (k >= w.size())
                throw ParseError(pos(ln, ln.indent), "missing dimension");
            try {
                fam.dimension = DimPoly::parse(w[k]);
            } catch (const std::exception &e) {
                throw ParseError(word_pos(ln, w[k]), e.what());
            }
            for (++k; k < w.size(); ++k) {
                if (w[k] == "eps")
                    fam.epsilon = true;
                else if (w[k] == "structure")
                    fam.structure = true;
                else if (w[k] == "spatial")
                    fam.spatial = true;
                else if (w[k] == "letters" && k + 1 < w.size())
                    fam.letters = w[++k];
                else
                    throw ParseError(word_pos(ln, w[k]), "unknown family option '" + w[k] + "'");
            }
            try {
                m.algebra.add_family(fam);
            } catch (const StructuralError &e) {
                throw ParseError(pos(ln, ln.indent), e.what());
            }
        }
    }

    void parse_fields(ModelDef &m, const std::vector<Line> &body) {
        for (const auto &ln : body) {
            auto w = words(ln.text);
            FieldDecl fd;
            fd.pos = pos(ln, ln.indent);
            if (w[0] == "coordinate")
                fd.kind = FieldKind::Coordinate;
            else if (w[0] == "momentum")
                fd.kind = FieldKind::Momentum;
            else if (w[0] == "multiplier")
                fd.kind = FieldKind::Multiplier;
            else
                throw ParseError(fd.pos, "expected coordinate|momentum|multiplier, found '" + w[0] + "'");
            if (w.size() < 2)
                throw ParseError(fd.pos, "missing field name");
            std::string sig = w[1];
            auto br = sig.find('[');
            fd.name = sig.substr(0, br);
            if (!is_identifier(fd.name) || kReserved.count(fd.name) || fd.name.rfind("d_", 0) == 0)
                throw ParseError(word_pos(ln, sig), "invalid field name '" + fd.name + "'");
            if (m.field(fd.name) || std::find(m.constants.begin(), m.constants.end(), fd.name) != m.constants.end())
                throw ParseError(word_pos(ln, sig), "duplicate declaration of '" + fd.name + "'");
            if (br != std::string::npos) {
                if (sig.back() != ']')
                    throw ParseError(word_pos(ln, sig), "unterminated index signature");
                std::string inner = sig.substr(br + 1, sig.size() - br - 2);
                std::stringstream ss(inner);
                std::string fam;
                while (std::getline(ss, fam, ',')) {
                    auto id = m.algebra.find_family(fam);
                    if (!id)
                        throw ParseError(word_pos(ln, sig), "unknown index family '" + fam + "'");
                    fd.families.push_back(*id);
                }
            }
            for (std::size_t k = 2; k < w.size(); ++k) {
                if (w[k] == "antisym" && k + 2 < w.size()) {
                    int p = std::stoi(w[k + 1]) - 1, q = std::stoi(w[k + 2]) - 1;
                    fd.antisymmetric.emplace_back(p, q);
                    k += 2;
                } else if (w[k] == "weight" && k + 1 < w.size()) {
                    fd.weight = w[++k];
                } else {
                    throw ParseError(word_pos(ln, w[k]), "unknown field option '" + w[k] + "'");
                }
            }
            try {
                m.algebra.declare_tensor({fd.name, fd.families, fd.antisymmetric});
            } catch (const StructuralError &e) {
                throw ParseError(fd.pos, e.what());
            }
            m.fields.push_back(fd);
        }
    }

    static Located join(const std::vector<Line> &body, std::size_t first_col_of_first = 0) {
        Located src;
        for (std::size_t k = 0; k < body.size(); ++k) {
            std::size_t c = k == 0 ? std::max<std::size_t>(first_col_of_first, static_cast<std::size_t>(body[k].indent))
                                   : static_cast<std::size_t>(body[k].indent);
            if (k)
                src.append(" ", {body[k].number, 0});
            src.append(body[k].text.substr(c), {body[k].number, static_cast<int>(c) + 1});
        }
        return src;
    }

    Expression parse_body(const ModelDef &m, const std::vector<Line> &body, const ExprParseOptions &opts) {
        return parse_located(join(body), m.algebra, m.constants, opts);
    }

    void parse_kinetic(ModelDef &m, const std::vector<Line> &body) {
        for (const auto &ln : body) {
            KineticTerm kt;
            kt.pos = pos(ln, ln.indent);
            std::string text = ln.text;
            auto at = text.find("@bracket");
            std::vector<Line> main{{ln.number, ln.indent, at == std::string::npos ? text : text.substr(0, at)}};
            ExprParseOptions opts;
            opts.allow_time_derivative = true;
            Expression e = parse_body(m, main, opts);
            if (at != std::string::npos) {
                Line extra{ln.number, static_cast<int>(at + 8), text};
                Expression b = parse_body(m, {extra}, {});
                if (b.terms().size() != 1 || !b.terms()[0].factors.empty())
                    throw ParseError(pos(ln, static_cast<int>(at)), "@bracket needs a scalar");
                kt.printed_bracket = b.terms()[0].coeff;
            }
            if (e.terms().size() != 1)
                throw ParseError(kt.pos, "kinetic line must be a single term coeff*dt(q)*p");
            const Term &t = e.terms()[0];
            const Factor *q = nullptr;
            const Factor *p = nullptr;
            for (const auto &f : t.factors) {
                if (f.kind != FactorKind::Tensor)
                    throw ParseError(kt.pos, "non-Darboux kinetic term: unexpected factor " + render_factor(f));
                if (f.point == "dt")
                    (q ? throw ParseError(kt.pos, "two time derivatives in one kinetic term") : q = &f);
                else if (p)
                    throw ParseError(kt.pos, "non-Darboux kinetic term: field-dependent coefficient");
                else
                    p = &f;
            }
            if (!q || !p)
                throw ParseError(kt.pos, "kinetic line must contain dt(q) and one momentum");
            kt.coeff = t.coeff;
            kt.coordinate = *q;
            kt.coordinate.point.clear();
            kt.momentum = *p;
            m.kinetic.push_back(kt);
        }
    }

    void parse_constraint(ModelDef &m, const Line &ln, std::vector<Line> body) {
        auto assign = ln.text.find(":=");
        if (assign == std::string::npos)
            throw ParseError(pos(ln, 0), "expected 'constraint <label>[indices] := <expr>'");
        std::string head = ln.text.substr(10, assign - 10);
        while (!head.empty() && std::isspace(static_cast<unsigned char>(head.front())))
            head.erase(head.begin());
        while (!head.empty() && std::isspace(static_cast<unsigned char>(head.back())))
            head.pop_back();
        ConstraintDef c;
        c.pos = pos(ln, 0);
        auto br = head.find('[');
        c.label = head.substr(0, br);
        if (!is_identifier(c.label))
            throw ParseError(pos(ln, 11), "invalid constraint label '" + c.label + "'");
        if (m.constraint(c.label) || m.field(c.label))
            throw ParseError(pos(ln, 11), "duplicate declaration of '" + c.label + "'");
        if (br != std::string::npos) {
            if (head.back() != ']')
                throw ParseError(pos(ln, 11), "unterminated index list");
            std::stringstream ss(head.substr(br + 1, head.size() - br - 2));
            std::string nm;
            while (std::getline(ss, nm, ',')) {
                auto fam = m.algebra.family_of_index(nm);
                if (!fam)
                    throw ParseError(pos(ln, 11), "index '" + nm + "' belongs to no index family");
                c.indices.push_back(Index{*fam, nm});
            }
        }
        std::vector<Line> all;
        std::string rest = ln.text.substr(assign + 2);
        if (rest.find_first_not_of(' ') != std::string::npos)
            all.push_back({ln.number, static_cast<int>(assign + 2), ln.text});
        for (auto &b : body)
            all.push_back(b);
        if (all.empty())
            throw ParseError(pos(ln, static_cast<int>(assign)), "empty constraint body");
        c.body = parse_located(join(all), m.algebra, m.constants, {});
        std::vector<Index> declared = c.indices;
        std::sort(declared.begin(), declared.end());
        std::vector<Index> actual;
        try {
            actual = free_indices(c.body);
        } catch (const StructuralError &e) {
            throw ParseError(c.pos, e.what());
        }
        if (!c.body.is_zero() && actual != declared)
            throw ParseError(c.pos, "free indices of constraint '" + c.label + "' do not match its label");
        m.constraints.push_back(std::move(c));
    }

    std::vector<Line> lines_;
};

} // namespace

ModelDef parse_model(const std::string &text) { return ModelParser(text).run(); }

// ---------------------------------------------------------------------------
// Validation

std::vector<Diagnostic> validate_model(const ModelDef &m) {
    std::vector<Diagnostic> out;
    std::map<std::string, int> paired;
    for (const auto &kt : m.kinetic) {
        for (const Factor *f : {&kt.coordinate, &kt.momentum}) {
            const FieldDecl *fd = m.field(f->name);
            if (!fd) {
                out.push_back({kt.pos, "kinetic term uses undeclared field '" + f->name + "'"});
                continue;
            }
            FieldKind want = f == &kt.coordinate ? FieldKind::Coordinate : FieldKind::Momentum;
            if (fd->kind != want)
                out.push_back({kt.pos, "field '" + f->name + "' is a " + to_string(fd->kind) + ", expected a " +
                                           to_string(want) + " in the kinetic term"});
            if (++paired[f->name] > 1)
                out.push_back({kt.pos, "field '" + f->name + "' is paired more than once"});
        }
        if (kt.coordinate.slots.size() != kt.momentum.slots.size())
            out.push_back({kt.pos, "kinetic pairing of '" + kt.coordinate.name + "' and '" + kt.momentum.name +
                                       "' has mismatched index counts"});
        else {
            auto a = kt.coordinate.slots, b = kt.momentum.slots;
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            if (a != b)
                out.push_back({kt.pos, "kinetic pairing of '" + kt.coordinate.name + "' and '" + kt.momentum.name +
                                           "' leaves free indices"});
        }
    }
    for (const auto &fd : m.fields) {
        if (fd.kind == FieldKind::Momentum && !paired.count(fd.name))
            out.push_back({fd.pos, "unpaired momentum '" + fd.name + "'"});
        if (fd.kind == FieldKind::Coordinate && !paired.count(fd.name))
            out.push_back({fd.pos, "unpaired coordinate '" + fd.name + "'"});
    }
    for (const auto &c : m.constraints)
        for (const auto &name : tensor_names(c.body)) {
            const FieldDecl *fd = m.field(name);
            if (fd && fd->kind == FieldKind::Multiplier)
                out.push_back({c.pos, "multiplier inside constraint: '" + name + "' in '" + c.label + "'"});
        }
    for (const auto &t : m.hamiltonian.terms()) {
        for (const auto &idx : free_indices(t))
            out.push_back({m.hamiltonian_pos, "free index '" + idx.name +
                                                  "' left uncontracted in Hamiltonian coupling '" +
                                                  render_term(m.algebra, t, true) + "'"});
        for (const auto &f : t.factors)
            if (f.kind == FactorKind::Tensor && f.point == "dt")
                out.push_back({m.hamiltonian_pos, "time derivative in Hamiltonian"});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string serialize_model(const ModelDef &m) {
    std::ostringstream os;
    os << "model " << m.name << "\n";
    os << "sign_convention " << to_string(m.sign_convention) << "\n";
    if (!m.constants.empty()) {
        os << "constants\n";
        for (const auto &c : m.constants)
            os << "  " << c << "\n";
    }
    if (m.algebra.family_count() > 0) {
        os << "indices\n";
        for (const auto &f : m.algebra.families()) {
            std::string dim = f.dimension.render();
            dim.erase(std::remove(dim.begin(), dim.end(), ' '), dim.end());
            os << "  " << f.name << " dim " << dim;
            if (f.epsilon)
                os << " eps";
            if (f.structure)
                os << " structure";
            if (f.spatial)
                os << " spatial";
            os << " letters " << f.letters << "\n";
        }
    }
    if (!m.fields.empty()) {
        os << "fields\n";
        for (const auto &fd : m.fields) {
            os << "  " << to_string(fd.kind) << " " << fd.name;
            if (!fd.families.empty()) {
                os << "[";
                for (std::size_t k = 0; k < fd.families.size(); ++k)
                    os << (k ? "," : "") << m.algebra.family(fd.families[k]).name;
                os << "]";
            }
            for (auto [p, q] : fd.antisymmetric)
                os << " antisym " << p + 1 << " " << q + 1;
            if (!fd.weight.empty())
                os << " weight " << fd.weight;
            os << "\n";
        }
    }
    if (!m.kinetic.empty()) {
        os << "kinetic\n";
        for (const auto &kt : m.kinetic) {
            Factor q = kt.coordinate;
            std::string qs = "dt(" + render_factor(q) + ")";
            Term t{kt.coeff, {}};
            std::string coeff = render_term(m.algebra, t, true);
            os << "  ";
            if (coeff == "-1")
                os << "-";
            else if (coeff != "1")
                os << coeff << "*";
            os << qs << "*" << render_factor(kt.momentum);
            if (kt.printed_bracket)
                os << " @bracket " << render_term(m.algebra, Term{*kt.printed_bracket, {}}, true);
            os << "\n";
        }
    }
    for (const auto &c : m.constraints) {
        os << "constraint " << c.label;
        if (!c.indices.empty()) {
            os << "[";
            for (std::size_t k = 0; k < c.indices.size(); ++k)
                os << (k ? "," : "") << c.indices[k].name;
            os << "]";
        }
        os << " :=\n  " << render(m.algebra, c.body) << "\n";
    }
    if (!m.hamiltonian.is_zero() || m.hamiltonian_pos.line != 0) {
        os << "hamiltonian\n  " << render(m.algebra, m.hamiltonian) << "\n";
    }
    return os.str();
}

bool structurally_equal(const ModelDef &a, const ModelDef &b) {
    if (a.name != b.name || a.sign_convention != b.sign_convention || a.constants != b.constants)
        return false;
    if (a.algebra.family_count() != b.algebra.family_count())
        return false;
    for (int i = 0; i < a.algebra.family_count(); ++i) {
        const auto &x = a.algebra.family(i);
        const auto &y = b.algebra.family(i);
        if (x.name != y.name || !(x.dimension == y.dimension) || x.epsilon != y.epsilon ||
            x.structure != y.structure || x.spatial != y.spatial || x.letters != y.letters)
            return false;
    }
    if (a.fields.size() != b.fields.size() || a.kinetic.size() != b.kinetic.size() ||
        a.constraints.size() != b.constraints.size())
        return false;
    for (std::size_t i = 0; i < a.fields.size(); ++i) {
        const auto &x = a.fields[i];
        const auto &y = b.fields[i];
        if (x.name != y.name || x.kind != y.kind || x.families != y.families || x.antisymmetric != y.antisymmetric ||
            x.weight != y.weight)
            return false;
    }
    for (std::size_t i = 0; i < a.kinetic.size(); ++i) {
        const auto &x = a.kinetic[i];
        const auto &y = b.kinetic[i];
        if (!(x.coeff == y.coeff) || !(x.coordinate == y.coordinate) || !(x.momentum == y.momentum) ||
            x.printed_bracket != y.printed_bracket)
            return false;
    }
    for (std::size_t i = 0; i < a.constraints.size(); ++i) {
        const auto &x = a.constraints[i];
        const auto &y = b.constraints[i];
        if (x.label != y.label || x.indices != y.indices || !(x.body == y.body))
            return false;
    }
    return a.hamiltonian == b.hamiltonian;
}

} // namespace dirac
