#include "dirac/phase_space.hpp"

#include <algorithm>
#include <set>

namespace dirac {

namespace {

Expression collect(const Algebra &alg, std::vector<Term> terms) {
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

int count_index(const Term &t, const Index &idx) {
    int n = 0;
    for (const auto &f : t.factors) {
        n += static_cast<int>(std::count(f.slots.begin(), f.slots.end(), idx));
        n += static_cast<int>(std::count(f.derivs.begin(), f.derivs.end(), idx));
    }
    return n;
}

int find_factor(const Term &t, const std::string &name) {
    for (std::size_t k = 0; k < t.factors.size(); ++k)
        if (t.factors[k].kind == FactorKind::Tensor && t.factors[k].name == name)
            return static_cast<int>(k);
    return -1;
}

} // namespace

const Pairing *SymplecticStructure::find(const std::string &field) const {
    for (const auto &p : pairings)
        if (p.coordinate == field || p.momentum == field)
            return &p;
    return nullptr;
}

SymplecticStructure extract_symplectic(const ModelDef &m, std::optional<SignConvention> convention) {
    SignConvention conv = convention.value_or(m.sign_convention);
    SymplecticStructure s;
    std::set<std::string> seen;
    for (const auto &kt : m.kinetic) {
        const FieldDecl *q = m.field(kt.coordinate.name);
        const FieldDecl *p = m.field(kt.momentum.name);
        if (!q || !p)
            throw StructuralError("kinetic term references an undeclared field");
        if (!seen.insert(q->name).second || !seen.insert(p->name).second)
            throw StructuralError("non-Darboux kinetic term: '" + q->name + "' or '" + p->name +
                                  "' is paired more than once");
        if (kt.coeff.is_zero())
            throw StructuralError("non-Darboux kinetic term: zero coefficient");
        Pairing pr;
        pr.coordinate = q->name;
        pr.momentum = p->name;
        pr.coefficient = (conv == SignConvention::Paper && kt.printed_bracket) ? *kt.printed_bracket : kt.coeff.inverse();
        pr.families = q->families;
        pr.antisymmetric = q->antisymmetric;
        if (kt.coordinate.slots.size() != kt.momentum.slots.size())
            throw StructuralError("non-Darboux kinetic term: slot count mismatch for '" + q->name + "'");
        for (const auto &idx : kt.coordinate.slots) {
            auto it = std::find(kt.momentum.slots.begin(), kt.momentum.slots.end(), idx);
            if (it == kt.momentum.slots.end())
                throw StructuralError("non-Darboux kinetic term: '" + q->name + "' slot not contracted");
            pr.momentum_slot.push_back(static_cast<int>(it - kt.momentum.slots.begin()));
        }
        s.pairings.push_back(std::move(pr));
    }
    return s;
}

DimPoly component_count(const Algebra &alg, const std::vector<int> &families,
                        const std::vector<std::pair<int, int>> &antisymmetric) {
    DimPoly total = DimPoly(1);
    std::vector<bool> used(families.size(), false);
    for (auto [p, q] : antisymmetric) {
        const DimPoly &d = alg.family(families[static_cast<std::size_t>(p)]).dimension;
        total = total * (d * (d - DimPoly(1))) * Rational(1, 2);
        used[static_cast<std::size_t>(p)] = used[static_cast<std::size_t>(q)] = true;
    }
    for (std::size_t k = 0; k < families.size(); ++k)
        if (!used[k])
            total = total * alg.family(families[k]).dimension;
    return total;
}

DimPoly phase_space_dimension(const ModelDef &m) {
    DimPoly total;
    for (const auto &f : m.fields)
        if (f.kind != FieldKind::Multiplier)
            total = total + component_count(m.algebra, f.families, f.antisymmetric);
    return total;
}

// ---------------------------------------------------------------------------

Expression normal_form(const Algebra &alg, const Expression &body, const std::vector<Parameter> &params) {
    std::vector<Term> done;
    std::vector<Term> work(body.terms().rbegin(), body.terms().rend());
    while (!work.empty()) {
        Term t = std::move(work.back());
        work.pop_back();
        int fi = -1;
        for (const auto &p : params) {
            fi = find_factor(t, p.name);
            if (fi >= 0)
                break;
        }
        if (fi < 0 || t.factors[static_cast<std::size_t>(fi)].derivs.empty()) {
            done.push_back(std::move(t));
            continue;
        }
        // (d_a P) R  ->  -P d_a(R)
        Factor p = t.factors[static_cast<std::size_t>(fi)];
        Index d = p.derivs.back();
        p.derivs.pop_back();
        Term rest = t;
        rest.factors.erase(rest.factors.begin() + fi);
        rest.coeff = t.coeff * Scalar(-1);
        Index dx = d;
        if (count_index(rest, d) > 0) {
            dx = Index{d.family, "~q"};
            for (auto &f : rest.factors) {
                std::replace(f.slots.begin(), f.slots.end(), d, dx);
                std::replace(f.derivs.begin(), f.derivs.end(), d, dx);
            }
        }
        Expression r = derivative(alg, collect(alg, {rest}), dx);
        Expression moved = multiply(alg, Expression::factor(p), r);
        for (auto it = moved.terms().rbegin(); it != moved.terms().rend(); ++it)
            work.push_back(*it);
    }
    return collect(alg, std::move(done));
}

SmearedFunctional normalized(const Algebra &alg, SmearedFunctional f) {
    f.body = normal_form(alg, f.body, f.params);
    return f;
}

std::vector<Index> fresh_indices(const Algebra &alg, const std::vector<int> &families,
                                 std::vector<std::string> &taken) {
    std::vector<Index> out;
    for (int fam : families) {
        const std::string &letters = alg.family(fam).letters;
        bool found = false;
        for (char c : letters) {
            std::string nm(1, c);
            if (std::find(taken.begin(), taken.end(), nm) == taken.end()) {
                taken.push_back(nm);
                out.push_back(Index{fam, nm});
                found = true;
                break;
            }
        }
        if (!found)
            throw StructuralError("index family '" + alg.family(fam).name + "' has run out of letters");
    }
    return out;
}

SmearedFunctional smear_constraint(const ModelDef &m, const ConstraintDef &c, const std::string &param) {
    SmearedFunctional f;
    Parameter p{param, {}};
    for (const auto &i : c.indices)
        p.families.push_back(i.family);
    f.params.push_back(p);
    Expression lam = Expression::factor(Factor::tensor(param, c.indices));
    f.body = normal_form(m.algebra, multiply(m.algebra, lam, c.body), f.params);
    return f;
}

SmearedFunctional smear_field(const ModelDef &m, const std::string &field, const std::string &param) {
    const FieldDecl *fd = m.field(field);
    if (!fd)
        throw StructuralError("unknown field '" + field + "'");
    std::vector<std::string> taken;
    auto idx = fresh_indices(m.algebra, fd->families, taken);
    SmearedFunctional f;
    f.params.push_back({param, fd->families});
    f.body = collect(m.algebra, {Term{Scalar(1), {Factor::tensor(param, idx), Factor::tensor(field, idx)}}});
    return f;
}

Expression variational_derivative(const Algebra &alg, const SmearedFunctional &f, const std::string &field,
                                  const std::vector<Index> &targets) {
    const TensorDecl *decl = alg.tensor(field);
    if (!decl)
        throw StructuralError("variational derivative with respect to undeclared field '" + field + "'");
    if (targets.size() != decl->families.size())
        throw StructuralError("wrong number of target indices for '" + field + "'");
    std::vector<Index> v;
    for (std::size_t k = 0; k < targets.size(); ++k)
        v.push_back(Index{decl->families[k], "~v" + std::to_string(k)});

    std::vector<Term> pieces;
    for (const auto &t : f.body.terms()) {
        for (std::size_t k = 0; k < t.factors.size(); ++k) {
            const Factor &occ = t.factors[k];
            if (occ.kind != FactorKind::Tensor || occ.name != field)
                continue;
            Term y;
            y.coeff = occ.derivs.size() % 2 ? t.coeff * Scalar(-1) : t.coeff;
            for (std::size_t j = 0; j < t.factors.size(); ++j)
                if (j != k)
                    y.factors.push_back(t.factors[j]);
            for (std::size_t s = 0; s < occ.slots.size(); ++s)
                y.factors.push_back(Factor::kronecker(occ.slots[s], v[s]));
            Expression e = collect(alg, {y});
            for (const auto &d : occ.derivs)
                e = derivative(alg, e, d);
            pieces.insert(pieces.end(), e.terms().begin(), e.terms().end());
        }
    }
    Expression out = collect(alg, std::move(pieces));
    for (auto [p, q] : decl->antisymmetric) {
        std::map<Index, Index> swap{{v[static_cast<std::size_t>(p)], v[static_cast<std::size_t>(q)]},
                                    {v[static_cast<std::size_t>(q)], v[static_cast<std::size_t>(p)]}};
        out = scale(alg, subtract(alg, out, rename_free(alg, out, swap)), Scalar(Rational(1, 2)));
    }
    std::map<Index, Index> back;
    for (std::size_t k = 0; k < v.size(); ++k)
        back[v[k]] = targets[k];
    return rename_free(alg, out, back);
}

SmearedFunctional poisson_bracket(const Algebra &alg, const SmearedFunctional &f, const SmearedFunctional &g,
                                  const SymplecticStructure &s) {
    SmearedFunctional out;
    out.params = f.params;
    out.params.insert(out.params.end(), g.params.begin(), g.params.end());
    auto fn = tensor_names(f.body);
    auto gn = tensor_names(g.body);
    std::vector<Term> acc;
    for (const auto &pr : s.pairings) {
        bool fq = fn.count(pr.coordinate), fp = fn.count(pr.momentum);
        bool gq = gn.count(pr.coordinate), gp = gn.count(pr.momentum);
        if (!((fq && gp) || (fp && gq)))
            continue;
        std::vector<Index> qt, pt(pr.families.size());
        for (std::size_t k = 0; k < pr.families.size(); ++k) {
            qt.push_back(Index{pr.families[k], "~b" + std::to_string(k)});
            pt[static_cast<std::size_t>(pr.momentum_slot[k])] = qt.back();
        }
        if (fq && gp) {
            Expression a = multiply(alg, variational_derivative(alg, f, pr.coordinate, qt),
                                    variational_derivative(alg, g, pr.momentum, pt));
            for (auto t : a.terms()) {
                t.coeff *= pr.coefficient;
                acc.push_back(std::move(t));
            }
        }
        if (fp && gq) {
            Expression b = multiply(alg, variational_derivative(alg, f, pr.momentum, pt),
                                    variational_derivative(alg, g, pr.coordinate, qt));
            for (auto t : b.terms()) {
                t.coeff *= pr.coefficient * Scalar(-1);
                acc.push_back(std::move(t));
            }
        }
    }
    out.body = normal_form(alg, collect(alg, std::move(acc)), out.params);
    return out;
}

Expression localize(const Algebra &alg, const SmearedFunctional &f, const std::vector<Index> &first,
                    const std::vector<Index> &second) {
    if (f.params.size() != 2)
        throw StructuralError("localize needs a functional bilinear in two parameters");
    Expression body = normal_form(alg, f.body, f.params);
    std::vector<Index> k0, k1;
    for (std::size_t k = 0; k < first.size(); ++k)
        k0.push_back(Index{first[k].family, "~k" + std::to_string(k)});
    for (std::size_t k = 0; k < second.size(); ++k)
        k1.push_back(Index{second[k].family, "~m" + std::to_string(k)});
    std::vector<Term> out;
    for (const auto &t : body.terms()) {
        int a = find_factor(t, f.params[0].name);
        int b = find_factor(t, f.params[1].name);
        if (a < 0 || b < 0)
            throw StructuralError("unsupported arity: term not bilinear in the smearing parameters");
        const Factor &pa = t.factors[static_cast<std::size_t>(a)];
        const Factor &pb = t.factors[static_cast<std::size_t>(b)];
        if (pa.slots.size() != k0.size() || pb.slots.size() != k1.size())
            throw StructuralError("localize: index count mismatch");
        Term y;
        y.coeff = t.coeff;
        for (std::size_t j = 0; j < t.factors.size(); ++j)
            if (static_cast<int>(j) != a && static_cast<int>(j) != b)
                y.factors.push_back(t.factors[j]);
        for (std::size_t s = 0; s < k0.size(); ++s)
            y.factors.push_back(Factor::kronecker(pa.slots[s], k0[s]));
        for (std::size_t s = 0; s < k1.size(); ++s)
            y.factors.push_back(Factor::kronecker(pb.slots[s], k1[s]));
        y.factors.push_back(Factor::distribution("x", "y", pb.derivs));
        out.push_back(std::move(y));
    }
    std::map<Index, Index> back;
    for (std::size_t k = 0; k < k0.size(); ++k)
        back[k0[k]] = first[k];
    for (std::size_t k = 0; k < k1.size(); ++k)
        back[k1[k]] = second[k];
    return rename_free(alg, collect(alg, std::move(out)), back);
}

SmearedFunctional smear(const Algebra &alg, const Expression &kernel, const Parameter &p, const std::vector<Index> &first,
                        const Parameter &q, const std::vector<Index> &second) {
    std::vector<Term> out;
    for (const auto &t : kernel.terms()) {
        Term y;
        y.coeff = t.coeff;
        int dist = 0;
        for (const auto &f : t.factors) {
            if (f.kind == FactorKind::Distribution) {
                ++dist;
                y.factors.push_back(Factor::tensor(q.name, second, f.derivs));
            } else {
                y.factors.push_back(f);
            }
        }
        if (dist != 1)
            throw StructuralError("kernel term without exactly one delta3 factor");
        y.factors.push_back(Factor::tensor(p.name, first));
        out.push_back(std::move(y));
    }
    SmearedFunctional f{{p, q}, {}};
    f.body = normal_form(alg, collect(alg, std::move(out)), f.params);
    return f;
}

Expression strip_parameter(const Algebra &alg, const SmearedFunctional &f, const std::vector<Index> &slots) {
    if (f.params.empty())
        throw StructuralError("functional has no parameter to strip");
    Expression body = normal_form(alg, f.body, f.params);
    std::vector<Index> k0;
    for (std::size_t k = 0; k < slots.size(); ++k)
        k0.push_back(Index{slots[k].family, "~k" + std::to_string(k)});
    std::vector<Term> out;
    for (const auto &t : body.terms()) {
        int a = find_factor(t, f.params[0].name);
        if (a < 0)
            throw StructuralError("unsupported arity: term without the stripped parameter");
        const Factor &pa = t.factors[static_cast<std::size_t>(a)];
        Term y;
        y.coeff = t.coeff;
        for (std::size_t j = 0; j < t.factors.size(); ++j)
            if (static_cast<int>(j) != a)
                y.factors.push_back(t.factors[j]);
        for (std::size_t s = 0; s < k0.size(); ++s)
            y.factors.push_back(Factor::kronecker(pa.slots[s], k0[s]));
        out.push_back(std::move(y));
    }
    std::map<Index, Index> back;
    for (std::size_t k = 0; k < k0.size(); ++k)
        back[k0[k]] = slots[k];
    return rename_free(alg, collect(alg, std::move(out)), back);
}

} // namespace dirac
