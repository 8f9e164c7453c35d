#include "dirac/analysis.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace dirac {

namespace {

Expression collect(const Algebra &alg, std::vector<Term> terms) {
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

// ---------------------------------------------------------------------------
// Sparse rational linear algebra

struct RowKey {
    std::vector<Factor> factors;
    Scalar::Monomial mono;
    bool operator<(const RowKey &o) const {
        if (factors != o.factors)
            return factors < o.factors;
        return mono < o.mono;
    }
};

using SparseVec = std::map<int, Rational>;

class RowIndex {
  public:
    int id(const RowKey &k) {
        auto [it, inserted] = ids_.try_emplace(k, static_cast<int>(keys_.size()));
        if (inserted)
            keys_.push_back(k);
        return it->second;
    }
    const RowKey &key(int id) const { return keys_[static_cast<std::size_t>(id)]; }
    int size() const { return static_cast<int>(keys_.size()); }

  private:
    std::map<RowKey, int> ids_;
    std::vector<RowKey> keys_;
};

SparseVec to_vec(const Expression &e, RowIndex &rows) {
    SparseVec v;
    for (const auto &t : e.terms()) {
        Rational &slot = v[rows.id({t.factors, t.coeff.monomial()})];
        slot += t.coeff.rational();
    }
    for (auto it = v.begin(); it != v.end();)
        it = it->second == 0 ? v.erase(it) : std::next(it);
    return v;
}

void axpy(SparseVec &y, const Rational &a, const SparseVec &x) {
    for (const auto &[k, val] : x) {
        Rational &s = y[k];
        s += a * val;
        if (s == 0)
            y.erase(k);
    }
}

/// Incremental echelon basis. Rows are ordered by a caller-supplied rank so that the
/// pivot of each stored vector is its highest-ranked row.
class Echelon {
  public:
    explicit Echelon(std::function<bool(int, int)> less) : less_(std::move(less)) {}

    /// Reduces `v` in place; `combo` accumulates the column combination removed.
    void reduce(SparseVec &v, SparseVec &combo) const {
        while (true) {
            int best = -1;
            for (const auto &[k, val] : v)
                if (pivots_.count(k) && (best < 0 || less_(best, k)))
                    best = k;
            if (best < 0)
                return;
            const Basis &b = basis_[pivots_.at(best)];
            Rational f = v.at(best);
            axpy(v, -f, b.vec);
            axpy(combo, f, b.combo);
        }
    }

    /// Adds column `col` (vector v). Returns false if it is dependent.
    bool insert(SparseVec v, int col) {
        SparseVec combo{{col, Rational(1)}};
        SparseVec removed;
        reduce(v, removed);
        if (v.empty())
            return false;
        axpy(combo, Rational(-1), removed);
        int p = -1;
        for (const auto &[k, val] : v)
            if (p < 0 || less_(p, k))
                p = k;
        Rational inv = 1 / v.at(p);
        for (auto &[k, val] : v)
            val *= inv;
        for (auto &[k, val] : combo)
            val *= inv;
        pivots_[p] = basis_.size();
        basis_.push_back({std::move(v), std::move(combo)});
        return true;
    }

  private:
    struct Basis {
        SparseVec vec;
        SparseVec combo;
    };
    std::function<bool(int, int)> less_;
    std::vector<Basis> basis_;
    std::map<int, std::size_t> pivots_;
};

// ---------------------------------------------------------------------------
// Ansatz enumeration

struct SlotRef {
    int factor;
    int position; // slot position, or -1 for the derivative index
    int family;
};

void enumerate_matchings(const std::vector<SlotRef> &slots, const std::vector<FactorKind> &kinds,
                         std::vector<int> &partner, std::size_t start,
                         const std::function<void(const std::vector<int> &)> &emit) {
    std::size_t i = start;
    while (i < slots.size() && partner[i] >= 0)
        ++i;
    if (i == slots.size()) {
        emit(partner);
        return;
    }
    for (std::size_t j = i + 1; j < slots.size(); ++j) {
        if (partner[j] >= 0 || slots[j].family != slots[i].family)
            continue;
        if (slots[i].factor == slots[j].factor) {
            // Only a derivative may contract with its own factor's slot (a divergence),
            // and never on an antisymmetric symbol.
            bool deriv = slots[i].position < 0 || slots[j].position < 0;
            FactorKind k = kinds[static_cast<std::size_t>(slots[i].factor)];
            if (!deriv || k == FactorKind::Epsilon || k == FactorKind::Structure)
                continue;
        }
        partner[i] = static_cast<int>(j);
        partner[j] = static_cast<int>(i);
        enumerate_matchings(slots, kinds, partner, i + 1, emit);
        partner[i] = partner[j] = -1;
    }
}

struct Skeleton {
    std::vector<Factor> factors; // slot indices are placeholders
    int deriv_factor = -1;
    int deriv_family = -1;
};

/// All canonical ansatz terms for one skeleton (coefficient 1, deduplicated by `seen`).
void expand_skeleton(const Algebra &alg, const Skeleton &sk, std::set<std::vector<Factor>> &seen,
                     std::vector<Expression> &out) {
    std::vector<SlotRef> slots;
    std::vector<FactorKind> kinds;
    for (std::size_t f = 0; f < sk.factors.size(); ++f) {
        kinds.push_back(sk.factors[f].kind);
        for (std::size_t s = 0; s < sk.factors[f].slots.size(); ++s)
            slots.push_back({static_cast<int>(f), static_cast<int>(s), sk.factors[f].slots[s].family});
    }
    if (sk.deriv_factor >= 0)
        slots.push_back({sk.deriv_factor, -1, sk.deriv_family});
    std::map<int, int> parity;
    for (const auto &s : slots)
        parity[s.family] ^= 1;
    for (const auto &[fam, p] : parity)
        if (p)
            return;
    std::vector<int> partner(slots.size(), -1);
    enumerate_matchings(slots, kinds, partner, 0, [&](const std::vector<int> &match) {
        Term t;
        t.factors = sk.factors;
        std::vector<Index> names(slots.size());
        int n = 0;
        for (std::size_t i = 0; i < slots.size(); ++i)
            if (static_cast<int>(i) < match[i]) {
                Index idx{slots[i].family, "~x" + std::to_string(n++)};
                names[i] = idx;
                names[static_cast<std::size_t>(match[i])] = idx;
            }
        for (std::size_t i = 0; i < slots.size(); ++i) {
            Factor &f = t.factors[static_cast<std::size_t>(slots[i].factor)];
            if (slots[i].position < 0)
                f.derivs.push_back(names[i]);
            else
                f.slots[static_cast<std::size_t>(slots[i].position)] = names[i];
        }
        Expression e;
        try {
            e = collect(alg, {t});
        } catch (const StructuralError &) {
            return;
        }
        if (e.terms().size() != 1)
            return;
        Term c = e.terms()[0];
        if (!seen.insert(c.factors).second)
            return;
        c.coeff = Scalar(1);
        out.push_back(Expression::from_terms({c}));
    });
}

Factor placeholder(const std::string &name, const std::vector<int> &families) {
    std::vector<Index> slots;
    for (int f : families)
        slots.push_back(Index{f, "?"});
    return Factor::tensor(name, slots);
}

Factor symbol_placeholder(FactorKind kind, int family) {
    std::vector<Index> slots(3, Index{family, "?"});
    return kind == FactorKind::Epsilon ? Factor::epsilon(slots) : Factor::structure(slots);
}

struct Column {
    std::string label; // empty for identity columns
    Expression ansatz; // with placeholder
    Scalar factor;
};

} // namespace

// ---------------------------------------------------------------------------

AnsatzOptions bracket_ansatz() { return AnsatzOptions{}; }

AnsatzOptions hamiltonian_ansatz(const ModelDef &m) {
    AnsatzOptions o;
    o.allow_derivative = false;
    o.allow_structure = false;
    o.require_coefficient_tensor = true;
    for (const auto &f : m.fields)
        if (f.kind == FieldKind::Multiplier)
            o.coefficient_tensors.push_back(f.name);
    return o;
}

AnsatzOptions reducibility_ansatz(const ModelDef &m) {
    AnsatzOptions o;
    o.allow_derivative = false;
    o.allow_structure = true;
    for (const auto &f : m.fields)
        if (f.kind != FieldKind::Multiplier)
            o.coefficient_tensors.push_back(f.name);
    return o;
}

std::vector<Expression> jacobi_relations(const Algebra &alg, const Term &t) {
    std::vector<Expression> out;
    for (std::size_t p = 0; p < t.factors.size(); ++p) {
        if (t.factors[p].kind != FactorKind::Structure)
            continue;
        for (std::size_t q = p + 1; q < t.factors.size(); ++q) {
            if (t.factors[q].kind != FactorKind::Structure)
                continue;
            std::vector<Index> f1 = t.factors[p].slots, f2 = t.factors[q].slots;
            std::vector<Index> shared;
            for (const auto &i : f1)
                if (std::count(f2.begin(), f2.end(), i))
                    shared.push_back(i);
            if (shared.size() != 1)
                continue;
            const Index e = shared[0];
            while (f1[2] != e)
                std::rotate(f1.begin(), f1.begin() + 1, f1.end());
            while (f2[0] != e)
                std::rotate(f2.begin(), f2.begin() + 1, f2.end());
            Index a = f1[0], b = f1[1], c = f2[1], d = f2[2];
            std::vector<Factor> rest;
            for (std::size_t k = 0; k < t.factors.size(); ++k)
                if (k != p && k != q)
                    rest.push_back(t.factors[k]);
            std::vector<Term> rel;
            auto add = [&](Index x, Index y, Index z) {
                Term r{t.coeff, rest};
                r.factors.push_back(Factor::structure({x, y, e}));
                r.factors.push_back(Factor::structure({e, z, d}));
                rel.push_back(std::move(r));
            };
            add(a, b, c);
            add(b, c, a);
            add(c, a, b);
            Expression ex = collect(alg, std::move(rel));
            if (!ex.is_zero())
                out.push_back(std::move(ex));
        }
    }
    return out;
}

std::vector<Expression> schouten_relations(const Algebra &alg, const Term &t) {
    std::vector<Expression> out;
    for (std::size_t p = 0; p < t.factors.size(); ++p) {
        const Factor &eps = t.factors[p];
        if (eps.kind != FactorKind::Epsilon)
            continue;
        const int fam = eps.slots[0].family;
        for (std::size_t q = 0; q < t.factors.size(); ++q) {
            const Factor &f = t.factors[q];
            if (q == p || (f.kind != FactorKind::Tensor && f.kind != FactorKind::Structure))
                continue;
            const std::size_t n = f.slots.size() + f.derivs.size();
            for (std::size_t k = 0; k < n; ++k) {
                const Index e = k < f.slots.size() ? f.slots[k] : f.derivs[k - f.slots.size()];
                if (e.family != fam || std::count(eps.slots.begin(), eps.slots.end(), e))
                    continue;
                const Index x{fam, "~s"};
                std::vector<Factor> rest;
                for (std::size_t j = 0; j < t.factors.size(); ++j) {
                    if (j == p)
                        continue;
                    Factor g = t.factors[j];
                    if (j == q) {
                        if (k < g.slots.size())
                            g.slots[k] = x;
                        else
                            g.derivs[k - g.slots.size()] = x;
                    }
                    rest.push_back(std::move(g));
                }
                // Antisymmetrizing over four indices of a three-dimensional family vanishes.
                std::vector<Term> rel;
                Term base{t.coeff, rest};
                base.factors.push_back(eps);
                base.factors.push_back(Factor::kronecker(e, x));
                rel.push_back(base);
                for (std::size_t s = 0; s < 3; ++s) {
                    Factor swapped = eps;
                    swapped.slots[s] = x;
                    Term r{t.coeff * Scalar(-1), rest};
                    r.factors.push_back(swapped);
                    r.factors.push_back(Factor::kronecker(e, eps.slots[s]));
                    rel.push_back(std::move(r));
                }
                Expression ex = collect(alg, std::move(rel));
                if (!ex.is_zero())
                    out.push_back(std::move(ex));
            }
        }
    }
    return out;
}

namespace {

/// Adds Jacobi relation columns for every row until closed, and Schouten relations
/// for the rows of the first two passes.
void add_identity_columns(const Algebra &alg, RowIndex &rows, Echelon &ech, int &next_col,
                          std::vector<Column> &columns) {
    int scanned = 0;
    for (int pass = 0; pass < 4 && scanned < rows.size(); ++pass) {
        int end = rows.size();
        for (int r = scanned; r < end; ++r) {
            RowKey key = rows.key(r);
            Term t{Scalar(Rational(1), key.mono), key.factors};
            auto rels = jacobi_relations(alg, t);
            if (pass < 2)
                for (auto &rel : schouten_relations(alg, t))
                    rels.push_back(std::move(rel));
            for (auto &rel : rels) {
                SparseVec v = to_vec(rel, rows);
                columns.push_back({"", rel, Scalar(1)});
                ech.insert(std::move(v), next_col++);
            }
        }
        scanned = end;
    }
}

} // namespace

bool zero_modulo_identities(const Algebra &alg, const Expression &e) {
    if (e.is_zero())
        return true;
    RowIndex rows;
    SparseVec target = to_vec(e, rows);
    Echelon ech([](int a, int b) { return a < b; });
    int next = 0;
    std::vector<Column> cols;
    add_identity_columns(alg, rows, ech, next, cols);
    SparseVec combo;
    ech.reduce(target, combo);
    return target.empty();
}

ProjectionResult project_weakly(const ModelDef &m, const SmearedFunctional &f, const std::vector<ConstraintDef> &constraints,
                                const AnsatzOptions &opts) {
    const Algebra &alg = m.algebra;
    Expression target = normal_form(alg, f.body, f.params);
    ProjectionResult result;
    if (target.is_zero())
        return result;

    auto spatial = alg.spatial_family();
    std::vector<std::pair<FactorKind, int>> symbols{{FactorKind::Tensor, -1}};
    if (opts.allow_structure)
        for (int fam = 0; fam < alg.family_count(); ++fam) {
            if (alg.family(fam).epsilon)
                symbols.push_back({FactorKind::Epsilon, fam});
            if (alg.family(fam).structure)
                symbols.push_back({FactorKind::Structure, fam});
        }
    std::vector<std::string> extras;
    if (!opts.require_coefficient_tensor)
        extras.push_back("");
    for (const auto &n : opts.coefficient_tensors)
        extras.push_back(n);

    // Ansatz terms, simplest first.
    std::vector<Column> columns;
    for (int deriv_pass = 0; deriv_pass < (opts.allow_derivative && spatial ? 2 : 1); ++deriv_pass) {
        for (const auto &[kind, fam] : symbols) {
            for (const auto &extra : extras) {
                for (const auto &c : constraints) {
                    if (std::find(opts.exclude.begin(), opts.exclude.end(), c.label) != opts.exclude.end())
                        continue;
                    Skeleton base;
                    for (const auto &p : f.params)
                        base.factors.push_back(placeholder(p.name, p.families));
                    std::vector<int> cf;
                    for (const auto &i : c.indices)
                        cf.push_back(i.family);
                    base.factors.push_back(placeholder(c.label, cf));
                    int dfactor_c = static_cast<int>(base.factors.size()) - 1;
                    if (kind != FactorKind::Tensor)
                        base.factors.push_back(symbol_placeholder(kind, fam));
                    if (!extra.empty()) {
                        const TensorDecl *decl = alg.tensor(extra);
                        if (!decl)
                            continue;
                        base.factors.push_back(placeholder(extra, decl->families));
                    }
                    std::vector<Skeleton> variants;
                    if (deriv_pass == 0) {
                        variants.push_back(base);
                    } else {
                        for (std::size_t p = 1; p < f.params.size(); ++p) {
                            Skeleton s = base;
                            s.deriv_factor = static_cast<int>(p);
                            s.deriv_family = *spatial;
                            variants.push_back(s);
                        }
                        Skeleton s = base;
                        s.deriv_factor = dfactor_c;
                        s.deriv_family = *spatial;
                        variants.push_back(s);
                    }
                    std::set<std::vector<Factor>> seen;
                    for (const auto &sk : variants) {
                        std::vector<Expression> terms;
                        expand_skeleton(alg, sk, seen, terms);
                        for (auto &t : terms)
                            columns.push_back({c.label, std::move(t), Scalar(1)});
                    }
                }
            }
        }
    }

    // Expand each ansatz term and attach candidate scalar monomials.
    std::map<std::string, const ConstraintDef *> by_label;
    for (const auto &c : constraints)
        by_label[c.label] = &c;
    std::set<Scalar::Monomial> target_monos;
    for (const auto &t : target.terms())
        target_monos.insert(t.coeff.monomial());

    RowIndex rows;
    SparseVec b = to_vec(target, rows);
    std::vector<Column> unknowns;
    std::vector<SparseVec> vecs;
    for (const auto &col : columns) {
        const ConstraintDef *c = by_label.at(col.label);
        Expression expanded = substitute_field(alg, col.ansatz, c->label, c->body, c->indices);
        expanded = normal_form(alg, expanded, f.params);
        if (expanded.is_zero())
            continue;
        std::set<Scalar::Monomial> body_monos;
        for (const auto &t : expanded.terms())
            body_monos.insert(t.coeff.monomial());
        std::map<Scalar::Monomial, Scalar> factors;
        for (const auto &tm : target_monos)
            for (const auto &bm : body_monos) {
                Scalar s = Scalar(Rational(1), tm) / Scalar(Rational(1), bm);
                factors.emplace(s.monomial(), s);
            }
        for (const auto &[mono, s] : factors) {
            unknowns.push_back({col.label, col.ansatz, s});
            vecs.push_back(to_vec(scale(alg, expanded, s), rows));
        }
    }

    // Rows are ranked by key so the remainder is independent of insertion order.
    Echelon ech([&rows](int a, int b) { return rows.key(a) < rows.key(b); });
    int next_col = 0;
    std::vector<Column> all = unknowns;
    for (auto &v : vecs)
        ech.insert(std::move(v), next_col++);
    add_identity_columns(alg, rows, ech, next_col, all);

    SparseVec combo;
    ech.reduce(b, combo);

    std::map<std::string, std::vector<Term>> coeff_terms;
    for (const auto &[col, val] : combo) {
        if (static_cast<std::size_t>(col) >= unknowns.size() || all[static_cast<std::size_t>(col)].label.empty())
            continue;
        const Column &c = all[static_cast<std::size_t>(col)];
        for (auto t : c.ansatz.terms()) {
            t.coeff = t.coeff * c.factor * Scalar(val);
            coeff_terms[c.label].push_back(std::move(t));
        }
    }
    for (auto &[label, terms] : coeff_terms) {
        Expression e = collect(alg, std::move(terms));
        if (!e.is_zero())
            result.coefficients[label] = std::move(e);
    }
    std::vector<Term> rem;
    for (const auto &[row, val] : b) {
        const RowKey &k = rows.key(row);
        rem.push_back(Term{Scalar(val, k.mono), k.factors});
    }
    result.remainder = collect(alg, std::move(rem));
    return result;
}

Expression reconstruct(const ModelDef &m, const ProjectionResult &r, const std::vector<ConstraintDef> &constraints,
                       const std::vector<Parameter> &params) {
    std::vector<Term> acc = r.remainder.terms();
    for (const auto &[label, coeff] : r.coefficients) {
        auto it = std::find_if(constraints.begin(), constraints.end(), [&](const ConstraintDef &c) { return c.label == label; });
        if (it == constraints.end())
            throw StructuralError("unknown constraint label '" + label + "'");
        Expression e = substitute_field(m.algebra, coeff, label, it->body, it->indices);
        acc.insert(acc.end(), e.terms().begin(), e.terms().end());
    }
    return normal_form(m.algebra, collect(m.algebra, std::move(acc)), params);
}

DimPoly constraint_multiplicity(const ModelDef &m, const ConstraintDef &c) {
    std::vector<int> fams;
    for (const auto &i : c.indices)
        fams.push_back(i.family);
    std::vector<std::pair<int, int>> anti;
    std::vector<bool> used(c.indices.size(), false);
    for (std::size_t p = 0; p < c.indices.size(); ++p)
        for (std::size_t q = p + 1; q < c.indices.size(); ++q) {
            if (used[p] || used[q] || c.indices[p].family != c.indices[q].family || c.body.is_zero())
                continue;
            std::map<Index, Index> swap{{c.indices[p], c.indices[q]}, {c.indices[q], c.indices[p]}};
            Expression swapped = rename_free(m.algebra, c.body, swap);
            if (add(m.algebra, swapped, c.body).is_zero()) {
                anti.emplace_back(static_cast<int>(p), static_cast<int>(q));
                used[p] = used[q] = true;
            }
        }
    return component_count(m.algebra, fams, anti);
}

const BracketEntry &BracketMatrix::at(const std::string &a, const std::string &b) const {
    for (const auto &e : entries)
        if (e.first == a && e.second == b)
            return e;
    throw std::out_of_range("no bracket entry for " + a + ", " + b);
}

BracketEntry bracket_entry(const ModelDef &m, const SymplecticStructure &s, const std::string &a, const std::string &b) {
    const ConstraintDef *ca = m.constraint(a);
    const ConstraintDef *cb = m.constraint(b);
    if (!ca || !cb)
        throw StructuralError("unknown constraint label '" + (ca ? b : a) + "'");
    BracketEntry e;
    e.first = a;
    e.second = b;
    e.bracket = poisson_bracket(m.algebra, smear_constraint(m, *ca, "lam"), smear_constraint(m, *cb, "mu"), s);
    e.projection = project_weakly(m, e.bracket, m.constraints, bracket_ansatz());
    return e;
}

BracketMatrix bracket_matrix(const ModelDef &m, const SymplecticStructure &s) {
    BracketMatrix bm;
    bm.labels = m.constraint_labels();
    for (const auto &a : bm.labels)
        for (const auto &b : bm.labels)
            bm.entries.push_back(bracket_entry(m, s, a, b));
    return bm;
}

std::vector<Reducibility> find_reducibility(const ModelDef &m, const std::vector<ConstraintDef> &constraints) {
    std::vector<Reducibility> out;
    auto spatial = m.algebra.spatial_family();
    for (const auto &c : constraints) {
        // Identity: the constraint is a combination of the others.
        {
            AnsatzOptions o = reducibility_ansatz(m);
            o.exclude.push_back(c.label);
            SmearedFunctional f;
            Parameter p{"lam", {}};
            for (const auto &i : c.indices)
                p.families.push_back(i.family);
            f.params.push_back(p);
            f.body = normal_form(m.algebra,
                                 multiply(m.algebra, Expression::factor(Factor::tensor("lam", c.indices)), c.body),
                                 f.params);
            ProjectionResult r = project_weakly(m, f, constraints, o);
            if (r.weakly_zero() && !c.body.is_zero())
                out.push_back({c.label, "identity", -1, f, r, constraint_multiplicity(m, c)});
        }
        if (!spatial)
            continue;
        for (std::size_t s = 0; s < c.indices.size(); ++s) {
            if (c.indices[s].family != *spatial)
                continue;
            std::vector<Index> rest;
            Parameter p{"lam", {}};
            for (std::size_t k = 0; k < c.indices.size(); ++k)
                if (k != s) {
                    rest.push_back(c.indices[k]);
                    p.families.push_back(c.indices[k].family);
                }
            SmearedFunctional f;
            f.params.push_back(p);
            Expression div = derivative(m.algebra, c.body, c.indices[s]);
            f.body = normal_form(m.algebra, multiply(m.algebra, Expression::factor(Factor::tensor("lam", rest)), div),
                                 f.params);
            ProjectionResult r = project_weakly(m, f, constraints, reducibility_ansatz(m));
            if (r.weakly_zero())
                out.push_back({c.label, "div", static_cast<int>(s), f, r, component_count(m.algebra, p.families, {})});
        }
    }
    return out;
}

ClassificationReport classify_constraints(const ModelDef &m, const SymplecticStructure &s) {
    ClassificationReport rep;
    rep.matrix = bracket_matrix(m, s);
    for (const auto &a : rep.matrix.labels) {
        bool first = true;
        for (const auto &b : rep.matrix.labels)
            if (!rep.matrix.at(a, b).projection.weakly_zero())
                first = false;
        (first ? rep.first_class : rep.second_class).push_back(a);
    }
    std::vector<ConstraintDef> firsts;
    for (const auto &c : m.constraints)
        if (std::find(rep.first_class.begin(), rep.first_class.end(), c.label) != rep.first_class.end())
            firsts.push_back(c);
    // Relations are searched among first-class constraints, with all constraints
    // available on the right-hand side.
    for (auto &r : find_reducibility(m, m.constraints))
        if (std::find(rep.first_class.begin(), rep.first_class.end(), r.constraint) != rep.first_class.end())
            rep.reducibilities.push_back(std::move(r));
    rep.assumptions.push_back("weak equality decided by linear projection over a bounded ansatz "
                              "(at most one eps or f, at most one derivative)");
    rep.assumptions.push_back("reducibility coefficients may be linear in the fields");
    if (!rep.second_class.empty())
        rep.assumptions.push_back("invertibility of the second-class block is checked numerically by the lattice oracle");
    return rep;
}

DofReport count_dof(const ModelDef &m, const ClassificationReport &report) {
    DofReport d;
    d.variables = phase_space_dimension(m);
    for (const auto &c : m.constraints) {
        DimPoly mult = constraint_multiplicity(m, c);
        if (std::find(report.first_class.begin(), report.first_class.end(), c.label) != report.first_class.end())
            d.first_class = d.first_class + mult;
        else
            d.second_class = d.second_class + mult;
    }
    for (const auto &r : report.reducibilities)
        d.reducibilities = d.reducibilities + r.count;
    d.dof = (d.variables - (d.first_class - d.reducibilities) * Rational(2) - d.second_class) * Rational(1, 2);
    bool all_negative = true;
    for (long long n = 2; n <= 12; ++n)
        if (d.dof.evaluate(n) >= 0)
            all_negative = false;
    if (all_negative)
        throw InconsistentCountError("negative degree-of-freedom count: variables " + d.variables.render() +
                                     ", first class " + d.first_class.render() + ", reducibilities " +
                                     d.reducibilities.render() + ", second class " + d.second_class.render());
    return d;
}

SmearedFunctional generator_functional(const ModelDef &m, const std::vector<GeneratorTerm> &generator) {
    SmearedFunctional g;
    std::vector<Term> acc;
    for (const auto &gt : generator) {
        const ConstraintDef *c = m.constraint(gt.constraint);
        if (!c)
            throw StructuralError("unknown constraint label '" + gt.constraint + "'");
        Parameter p{gt.parameter, {}};
        for (const auto &i : c->indices)
            p.families.push_back(i.family);
        g.params.push_back(p);
        Expression e = multiply(m.algebra, Expression::factor(Factor::tensor(gt.parameter, c->indices)), c->body);
        acc.insert(acc.end(), e.terms().begin(), e.terms().end());
    }
    g.body = normal_form(m.algebra, collect(m.algebra, std::move(acc)), g.params);
    return g;
}

Expression gauge_transform(const ModelDef &m, const SymplecticStructure &s, const ClassificationReport &report,
                           const std::vector<GeneratorTerm> &generator, const std::string &field) {
    for (const auto &gt : generator)
        if (std::find(report.first_class.begin(), report.first_class.end(), gt.constraint) == report.first_class.end())
            throw StructuralError("generator contains constraint '" + gt.constraint + "' which is not first class");
    const FieldDecl *fd = m.field(field);
    if (!fd)
        throw StructuralError("unknown field '" + field + "'");
    std::vector<std::string> taken;
    std::vector<Index> slots = fresh_indices(m.algebra, fd->families, taken);
    if (generator.empty())
        return {};
    SmearedFunctional probe = smear_field(m, field, "rho");
    SmearedFunctional g = generator_functional(m, generator);
    SmearedFunctional br = poisson_bracket(m.algebra, probe, g, s);
    if (br.body.is_zero())
        return {};
    return strip_parameter(m.algebra, br, slots);
}

SmearedFunctional hamiltonian_functional(const ModelDef &m) { return SmearedFunctional{{}, m.hamiltonian}; }

} // namespace dirac
