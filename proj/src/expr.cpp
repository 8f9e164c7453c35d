#include "dirac/expr.hpp"

#include <algorithm>
#include <array>
#include <functional>
#include <numeric>
#include <sstream>

namespace dirac {

// ---------------------------------------------------------------------------
// Algebra

std::optional<int> IndexFamily::concrete_dimension() const {
    if (!dimension.is_constant())
        return std::nullopt;
    Rational c = dimension.constant();
    if (boost::multiprecision::denominator(c) != 1 || c <= 0)
        return std::nullopt;
    return static_cast<int>(boost::multiprecision::numerator(c));
}

int Algebra::add_family(IndexFamily family) {
    if (family.name.empty())
        throw StructuralError("index family needs a name");
    if (find_family(family.name))
        throw StructuralError("duplicate index family '" + family.name + "'");
    if (family.letters.empty())
        throw StructuralError("index family '" + family.name + "' declares no index letters");
    for (char ch : family.letters)
        if (family_of_index(std::string(1, ch)))
            throw StructuralError("index letter '" + std::string(1, ch) + "' used by two families");
    if (family.epsilon && family.concrete_dimension() != 3)
        throw StructuralError("family '" + family.name + "' has eps but dimension is not 3");
    families_.push_back(std::move(family));
    return static_cast<int>(families_.size()) - 1;
}

void Algebra::declare_tensor(TensorDecl decl) {
    for (int f : decl.families)
        if (f < 0 || f >= family_count())
            throw StructuralError("tensor '" + decl.name + "' uses an unknown family");
    for (auto [p, q] : decl.antisymmetric) {
        auto n = static_cast<int>(decl.families.size());
        if (p < 0 || q < 0 || p >= n || q >= n || p == q ||
            decl.families[static_cast<std::size_t>(p)] != decl.families[static_cast<std::size_t>(q)])
            throw StructuralError("tensor '" + decl.name + "' has an invalid antisymmetric slot pair");
    }
    tensors_[decl.name] = std::move(decl);
}

std::optional<int> Algebra::find_family(const std::string &name) const {
    for (std::size_t i = 0; i < families_.size(); ++i)
        if (families_[i].name == name)
            return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> Algebra::family_of_index(const std::string &index_name) const {
    if (index_name.empty())
        return std::nullopt;
    for (std::size_t i = 0; i < families_.size(); ++i)
        if (families_[i].letters.find(index_name[0]) != std::string::npos)
            return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> Algebra::spatial_family() const {
    for (std::size_t i = 0; i < families_.size(); ++i)
        if (families_[i].spatial)
            return static_cast<int>(i);
    return std::nullopt;
}

std::optional<int> Algebra::structure_family() const {
    for (std::size_t i = 0; i < families_.size(); ++i)
        if (families_[i].structure)
            return static_cast<int>(i);
    return std::nullopt;
}

const TensorDecl *Algebra::tensor(const std::string &name) const {
    auto it = tensors_.find(name);
    return it == tensors_.end() ? nullptr : &it->second;
}

std::string Algebra::dummy_name(int family, int n) const {
    return std::string(1, this->family(family).letters[0]) + std::to_string(n);
}

// ---------------------------------------------------------------------------
// Factor / Expression construction

Factor Factor::tensor(std::string name, std::vector<Index> slots, std::vector<Index> derivs) {
    std::sort(derivs.begin(), derivs.end());
    return Factor{FactorKind::Tensor, std::move(name), std::move(slots), std::move(derivs), {}};
}
Factor Factor::epsilon(std::vector<Index> slots) { return Factor{FactorKind::Epsilon, "eps", std::move(slots), {}, {}}; }
Factor Factor::structure(std::vector<Index> slots) { return Factor{FactorKind::Structure, "f", std::move(slots), {}, {}}; }
Factor Factor::kronecker(Index a, Index b) { return Factor{FactorKind::Kronecker, "delta", {std::move(a), std::move(b)}, {}, {}}; }
Factor Factor::distribution(std::string x, std::string y, std::vector<Index> derivs) {
    std::sort(derivs.begin(), derivs.end());
    return Factor{FactorKind::Distribution, "delta3", {}, std::move(derivs), x + "," + y};
}

Expression Expression::from_terms(std::vector<Term> terms) {
    Expression e;
    e.terms_ = std::move(terms);
    return e;
}

Expression Expression::scalar(const Scalar &s) {
    if (s.is_zero())
        return {};
    return from_terms({Term{s, {}}});
}

Expression Expression::factor(const Factor &f, const Scalar &c) { return from_terms({Term{c, {f}}}); }

// ---------------------------------------------------------------------------
// Index bookkeeping

namespace {

template <typename Fn> void for_each_index(Term &t, Fn &&fn) {
    for (auto &f : t.factors) {
        for (auto &i : f.slots)
            fn(i);
        for (auto &i : f.derivs)
            fn(i);
    }
}

template <typename Fn> void for_each_index(const Term &t, Fn &&fn) {
    for (const auto &f : t.factors) {
        for (const auto &i : f.slots)
            fn(i);
        for (const auto &i : f.derivs)
            fn(i);
    }
}

std::map<Index, int> occurrence_counts(const Term &t) {
    std::map<Index, int> counts;
    for_each_index(t, [&](const Index &i) { ++counts[i]; });
    return counts;
}

/// Renames every dummy of `t` to `~<tag><n>` so it cannot collide with anything else.
void freshen_dummies(Term &t, const std::string &tag) {
    auto counts = occurrence_counts(t);
    std::map<Index, Index> ren;
    int n = 0;
    for (const auto &[idx, c] : counts)
        if (c == 2)
            ren[idx] = Index{idx.family, "~" + tag + std::to_string(n++)};
    for_each_index(t, [&](Index &i) {
        auto it = ren.find(i);
        if (it != ren.end())
            i = it->second;
    });
}

int permutation_sign_sort(std::vector<Index> &v) {
    int sign = 1;
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = 0; j + 1 < v.size() - i; ++j)
            if (v[j + 1] < v[j]) {
                std::swap(v[j], v[j + 1]);
                sign = -sign;
            }
    return sign;
}

bool has_repeat(const std::vector<Index> &v) {
    for (std::size_t i = 0; i < v.size(); ++i)
        for (std::size_t j = i + 1; j < v.size(); ++j)
            if (v[i] == v[j])
                return true;
    return false;
}

void check_factor(const Algebra &alg, const Factor &f) {
    auto spatial = alg.spatial_family();
    for (const auto &d : f.derivs)
        if (!spatial || d.family != *spatial)
            throw StructuralError("derivative index '" + d.name + "' on " + render_factor(f) + " is not spatial");
    if (f.derivs.size() > kMaxDerivativeOrder)
        throw StructuralError("derivative order above " + std::to_string(kMaxDerivativeOrder) + " on " +
                              render_factor(f));
    switch (f.kind) {
    case FactorKind::Tensor:
        if (const TensorDecl *decl = alg.tensor(f.name)) {
            if (decl->families.size() != f.slots.size())
                throw StructuralError("index arity mismatch in " + render_factor(f) + ": expected " +
                                      std::to_string(decl->families.size()));
            for (std::size_t k = 0; k < f.slots.size(); ++k)
                if (f.slots[k].family != decl->families[k])
                    throw StructuralError("index family mismatch in " + render_factor(f) + " at slot " +
                                          std::to_string(k + 1));
        }
        break;
    case FactorKind::Epsilon:
        if (f.slots.size() != 3)
            throw StructuralError("eps needs three indices: " + render_factor(f));
        for (const auto &s : f.slots)
            if (s.family != f.slots[0].family || !alg.family(s.family).epsilon)
                throw StructuralError("eps over a family without eps: " + render_factor(f));
        break;
    case FactorKind::Structure:
        if (f.slots.size() != 3)
            throw StructuralError("f needs three indices: " + render_factor(f));
        for (const auto &s : f.slots)
            if (!alg.family(s.family).structure)
                throw StructuralError("f over a family without structure constants: " + render_factor(f));
        break;
    case FactorKind::Kronecker:
        if (f.slots.size() != 2 || f.slots[0].family != f.slots[1].family)
            throw StructuralError("malformed delta: " + render_factor(f));
        break;
    case FactorKind::Distribution:
        break;
    }
}

bool antisymmetric_zero(const Algebra &alg, const Factor &f) {
    if (f.kind == FactorKind::Epsilon || f.kind == FactorKind::Structure)
        return has_repeat(f.slots);
    if (f.kind == FactorKind::Tensor)
        if (const TensorDecl *decl = alg.tensor(f.name))
            for (auto [p, q] : decl->antisymmetric)
                if (f.slots[static_cast<std::size_t>(p)] == f.slots[static_cast<std::size_t>(q)])
                    return true;
    return false;
}

void replace_index(Term &t, const Index &from, const Index &to) {
    for_each_index(t, [&](Index &i) {
        if (i == from)
            i = to;
    });
}

/// Applies delta contractions, eps-pair expansion and antisymmetry zeros until none apply.
std::vector<Term> reduce_term(const Algebra &alg, Term start) {
    std::vector<Term> out;
    std::vector<Term> work;
    work.push_back(std::move(start));
    while (!work.empty()) {
        Term cur = std::move(work.back());
        work.pop_back();
        if (cur.coeff.is_zero())
            continue;
        auto counts = occurrence_counts(cur);
        for (const auto &[idx, c] : counts)
            if (c > 2)
                throw StructuralError("index '" + idx.name + "' occurs " + std::to_string(c) +
                                      " times in one term");
        bool zero = false;
        for (const auto &f : cur.factors) {
            check_factor(alg, f);
            if (antisymmetric_zero(alg, f)) {
                zero = true;
                break;
            }
        }
        if (zero)
            continue;

        bool changed = false;
        for (std::size_t k = 0; k < cur.factors.size() && !changed; ++k) {
            if (cur.factors[k].kind != FactorKind::Kronecker)
                continue;
            Index a = cur.factors[k].slots[0];
            Index b = cur.factors[k].slots[1];
            if (a == b) {
                auto dim = alg.family(a.family).concrete_dimension();
                if (!dim)
                    throw StructuralError("trace of delta over symbolic family '" + alg.family(a.family).name + "'");
                cur.coeff *= Scalar(*dim);
                cur.factors.erase(cur.factors.begin() + static_cast<std::ptrdiff_t>(k));
                changed = true;
            } else if (counts[a] == 2) {
                cur.factors.erase(cur.factors.begin() + static_cast<std::ptrdiff_t>(k));
                replace_index(cur, a, b);
                changed = true;
            } else if (counts[b] == 2) {
                cur.factors.erase(cur.factors.begin() + static_cast<std::ptrdiff_t>(k));
                replace_index(cur, b, a);
                changed = true;
            }
        }
        if (changed) {
            work.push_back(std::move(cur));
            continue;
        }

        // eps_{abc} eps_{def} = det[delta]
        std::size_t e1 = cur.factors.size(), e2 = cur.factors.size();
        for (std::size_t i = 0; i < cur.factors.size() && e2 == cur.factors.size(); ++i) {
            if (cur.factors[i].kind != FactorKind::Epsilon)
                continue;
            for (std::size_t j = i + 1; j < cur.factors.size(); ++j)
                if (cur.factors[j].kind == FactorKind::Epsilon &&
                    cur.factors[j].slots[0].family == cur.factors[i].slots[0].family) {
                    e1 = i;
                    e2 = j;
                    break;
                }
        }
        if (e2 != cur.factors.size()) {
            auto left = cur.factors[e1].slots;
            auto right = cur.factors[e2].slots;
            Term rest = cur;
            rest.factors.erase(rest.factors.begin() + static_cast<std::ptrdiff_t>(e2));
            rest.factors.erase(rest.factors.begin() + static_cast<std::ptrdiff_t>(e1));
            std::array<int, 3> perm{0, 1, 2};
            do {
                int sign = 1;
                for (int p = 0; p < 3; ++p)
                    for (int q = p + 1; q < 3; ++q)
                        if (perm[static_cast<std::size_t>(p)] > perm[static_cast<std::size_t>(q)])
                            sign = -sign;
                Term t = rest;
                t.coeff *= Scalar(sign);
                for (std::size_t p = 0; p < 3; ++p)
                    t.factors.push_back(Factor::kronecker(left[p], right[static_cast<std::size_t>(perm[p])]));
                work.push_back(std::move(t));
            } while (std::next_permutation(perm.begin(), perm.end()));
            continue;
        }
        out.push_back(std::move(cur));
    }
    return out;
}

/// Sorts antisymmetric/symmetric slot groups (tracking sign) and the factor list.
int normalize_factors(const Algebra &alg, std::vector<Factor> &factors) {
    int sign = 1;
    for (auto &f : factors) {
        std::sort(f.derivs.begin(), f.derivs.end());
        switch (f.kind) {
        case FactorKind::Epsilon:
        case FactorKind::Structure:
            sign *= permutation_sign_sort(f.slots);
            break;
        case FactorKind::Kronecker:
            if (f.slots[1] < f.slots[0])
                std::swap(f.slots[0], f.slots[1]);
            break;
        case FactorKind::Tensor:
            if (const TensorDecl *decl = alg.tensor(f.name))
                for (auto [p, q] : decl->antisymmetric) {
                    auto &a = f.slots[static_cast<std::size_t>(p)];
                    auto &b = f.slots[static_cast<std::size_t>(q)];
                    if (b < a) {
                        std::swap(a, b);
                        sign = -sign;
                    }
                }
            break;
        case FactorKind::Distribution:
            break;
        }
    }
    std::sort(factors.begin(), factors.end());
    return sign;
}

/// Label-independent slot group of slot `pos` in factor `f` (-1 for derivative slots).
std::string slot_group(const Algebra &alg, const Factor &f, int pos) {
    if (pos < 0)
        return "D";
    switch (f.kind) {
    case FactorKind::Epsilon:
    case FactorKind::Structure:
        return "A";
    case FactorKind::Kronecker:
        return "S";
    case FactorKind::Tensor:
        if (const TensorDecl *decl = alg.tensor(f.name))
            for (std::size_t k = 0; k < decl->antisymmetric.size(); ++k)
                if (decl->antisymmetric[k].first == pos || decl->antisymmetric[k].second == pos)
                    return "P" + std::to_string(k);
        return "s" + std::to_string(pos);
    case FactorKind::Distribution:
        break;
    }
    return "?";
}

struct Occurrence {
    std::size_t factor;
    std::string group;
};

/// Chooses the canonical dummy labelling of a reduced term. Returns false if the
/// term vanishes by a sign-reversing relabelling symmetry.
bool canonical_labelling(const Algebra &alg, Term &t) {
    auto counts = occurrence_counts(t);
    std::set<std::string> free_names;
    std::map<Index, std::vector<Occurrence>> dummy_occ;
    for (const auto &[idx, c] : counts)
        if (c == 1)
            free_names.insert(idx.name);
    for (std::size_t fi = 0; fi < t.factors.size(); ++fi) {
        const Factor &f = t.factors[fi];
        for (std::size_t s = 0; s < f.slots.size(); ++s)
            if (counts[f.slots[s]] == 2)
                dummy_occ[f.slots[s]].push_back({fi, slot_group(alg, f, static_cast<int>(s))});
        for (const auto &d : f.derivs)
            if (counts[d] == 2)
                dummy_occ[d].push_back({fi, "D"});
    }

    if (dummy_occ.empty()) {
        int sign = normalize_factors(alg, t.factors);
        t.coeff *= Scalar(sign);
        return true;
    }

    // Label-independent factor shapes.
    std::vector<std::string> shape(t.factors.size());
    for (std::size_t fi = 0; fi < t.factors.size(); ++fi) {
        const Factor &f = t.factors[fi];
        std::map<std::string, std::vector<std::string>> groups;
        for (std::size_t s = 0; s < f.slots.size(); ++s) {
            const Index &i = f.slots[s];
            groups[slot_group(alg, f, static_cast<int>(s))].push_back(
                counts[i] == 2 ? "*" + std::to_string(i.family) : "F" + i.name);
        }
        for (const auto &d : f.derivs)
            groups["D"].push_back(counts[d] == 2 ? "*" : "F" + d.name);
        std::ostringstream os;
        os << static_cast<int>(f.kind) << '|' << f.name << '|' << f.point << '|';
        for (auto &[g, toks] : groups) {
            std::sort(toks.begin(), toks.end());
            os << g << '(';
            for (auto &tk : toks)
                os << tk << ',';
            os << ')';
        }
        shape[fi] = os.str();
    }

    std::map<Index, std::string> color;
    auto recolor = [&](const std::vector<std::string> &fcolor) {
        for (auto &[idx, occ] : dummy_occ) {
            std::vector<std::string> parts;
            for (const auto &o : occ)
                parts.push_back(fcolor[o.factor] + "#" + o.group);
            std::sort(parts.begin(), parts.end());
            color[idx] = parts[0] + "&" + parts[1];
        }
    };
    auto ties_exist = [&]() {
        std::map<std::pair<int, std::string>, int> seen;
        for (auto &[idx, c] : color)
            if (++seen[{idx.family, c}] > 1)
                return true;
        return false;
    };
    recolor(shape);
    for (int round = 0; round < 2 && ties_exist(); ++round) {
        std::vector<std::string> fcolor(t.factors.size());
        for (std::size_t fi = 0; fi < t.factors.size(); ++fi) {
            std::vector<std::string> parts;
            const Factor &f = t.factors[fi];
            for (std::size_t s = 0; s < f.slots.size(); ++s)
                if (counts[f.slots[s]] == 2)
                    parts.push_back(slot_group(alg, f, static_cast<int>(s)) + ":" + color[f.slots[s]]);
            for (const auto &d : f.derivs)
                if (counts[d] == 2)
                    parts.push_back("D:" + color[d]);
            std::sort(parts.begin(), parts.end());
            std::string c = shape[fi] + "{";
            for (auto &p : parts)
                c += p + ";";
            fcolor[fi] = c + "}";
        }
        recolor(fcolor);
    }

    // Dummies per family, ordered by colour; tie groups are permuted exhaustively.
    std::map<int, std::vector<std::pair<std::string, Index>>> by_family;
    for (auto &[idx, c] : color)
        by_family[idx.family].push_back({c, idx});
    std::vector<std::vector<Index>> groups; // consecutive tie groups across all families
    std::vector<int> group_family;
    for (auto &[fam, list] : by_family) {
        std::sort(list.begin(), list.end());
        for (std::size_t i = 0; i < list.size();) {
            std::size_t j = i;
            std::vector<Index> g;
            while (j < list.size() && list[j].first == list[i].first)
                g.push_back(list[j++].second);
            std::sort(g.begin(), g.end());
            groups.push_back(std::move(g));
            group_family.push_back(fam);
            i = j;
        }
    }

    // Canonical names in order, skipping names already used by free indices.
    std::vector<Index> targets;
    {
        int n = 1;
        for (std::size_t g = 0; g < groups.size(); ++g)
            for (std::size_t k = 0; k < groups[g].size(); ++k) {
                std::string name;
                do {
                    name = alg.dummy_name(group_family[g], n++);
                } while (free_names.count(name));
                targets.push_back(Index{group_family[g], name});
            }
    }

    std::vector<Factor> best;
    int best_sign = 0;
    bool vanishes = false;
    bool have_best = false;
    std::function<void(std::size_t)> search = [&](std::size_t g) {
        if (g == groups.size()) {
            std::map<Index, Index> ren;
            std::size_t pos = 0;
            for (const auto &grp : groups)
                for (const auto &idx : grp)
                    ren[idx] = targets[pos++];
            Term cand = t;
            for_each_index(cand, [&](Index &i) {
                auto it = ren.find(i);
                if (it != ren.end())
                    i = it->second;
            });
            int sign = normalize_factors(alg, cand.factors);
            if (!have_best || cand.factors < best) {
                best = std::move(cand.factors);
                best_sign = sign;
                have_best = true;
                vanishes = false;
            } else if (cand.factors == best && sign != best_sign) {
                vanishes = true;
            }
            return;
        }
        std::vector<Index> &grp = groups[g];
        std::sort(grp.begin(), grp.end());
        do {
            search(g + 1);
        } while (std::next_permutation(grp.begin(), grp.end()));
    };
    search(0);
    if (vanishes)
        return false;
    t.factors = std::move(best);
    t.coeff *= Scalar(best_sign);
    return true;
}

bool term_less(const Term &a, const Term &b) {
    if (a.factors != b.factors)
        return a.factors < b.factors;
    return monomial_less(a.coeff.monomial(), b.coeff.monomial());
}

} // namespace

// ---------------------------------------------------------------------------
// Public operations

std::vector<Index> free_indices(const Term &t) {
    std::vector<Index> out;
    for (const auto &[idx, c] : occurrence_counts(t))
        if (c == 1)
            out.push_back(idx);
    return out;
}

std::vector<Index> free_indices(const Expression &e) {
    if (e.terms().empty())
        return {};
    auto first = free_indices(e.terms().front());
    for (const auto &t : e.terms())
        if (free_indices(t) != first)
            throw StructuralError("terms disagree on free indices: '" + render_term(Algebra{}, t, true) + "'");
    return first;
}

bool has_tensor(const Expression &e, const std::string &name) {
    for (const auto &t : e.terms())
        for (const auto &f : t.factors)
            if (f.kind == FactorKind::Tensor && f.name == name)
                return true;
    return false;
}

std::set<std::string> tensor_names(const Expression &e) {
    std::set<std::string> out;
    for (const auto &t : e.terms())
        for (const auto &f : t.factors)
            if (f.kind == FactorKind::Tensor)
                out.insert(f.name);
    return out;
}

Expression canonicalize(const Algebra &alg, const Expression &e) {
    std::vector<Term> collected;
    for (const auto &t : e.terms()) {
        Term fresh = t;
        freshen_dummies(fresh, "c");
        for (auto &r : reduce_term(alg, std::move(fresh)))
            if (canonical_labelling(alg, r))
                collected.push_back(std::move(r));
    }
    std::sort(collected.begin(), collected.end(), term_less);
    std::vector<Term> merged;
    for (auto &t : collected) {
        if (!merged.empty() && merged.back().factors == t.factors &&
            merged.back().coeff.monomial() == t.coeff.monomial()) {
            merged.back().coeff = merged.back().coeff.add_like(t.coeff);
            if (merged.back().coeff.is_zero())
                merged.pop_back();
        } else {
            merged.push_back(std::move(t));
        }
    }
    return Expression::from_terms(std::move(merged));
}

Expression add(const Algebra &alg, const Expression &a, const Expression &b) {
    std::vector<Term> terms = a.terms();
    terms.insert(terms.end(), b.terms().begin(), b.terms().end());
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

Expression scale(const Algebra &alg, const Expression &a, const Scalar &s) {
    if (s.is_zero())
        return {};
    std::vector<Term> terms = a.terms();
    for (auto &t : terms)
        t.coeff *= s;
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

Expression subtract(const Algebra &alg, const Expression &a, const Expression &b) {
    return add(alg, a, scale(alg, b, Scalar(-1)));
}

Expression multiply(const Algebra &alg, const Expression &a, const Expression &b) {
    std::vector<Term> terms;
    terms.reserve(a.terms().size() * b.terms().size());
    std::vector<Term> bs = b.terms();
    for (auto &t : bs)
        freshen_dummies(t, "r");
    for (const auto &ta : a.terms()) {
        Term left = ta;
        freshen_dummies(left, "l");
        for (const auto &tb : bs) {
            Term t;
            t.coeff = left.coeff * tb.coeff;
            t.factors = left.factors;
            t.factors.insert(t.factors.end(), tb.factors.begin(), tb.factors.end());
            terms.push_back(std::move(t));
        }
    }
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

Expression derivative(const Algebra &alg, const Expression &e, const Index &index) {
    std::vector<Term> terms;
    for (const auto &orig : e.terms()) {
        Term t = orig;
        freshen_dummies(t, "d");
        for (std::size_t k = 0; k < t.factors.size(); ++k) {
            if (t.factors[k].kind != FactorKind::Tensor && t.factors[k].kind != FactorKind::Distribution)
                continue;
            Term d = t;
            d.factors[k].derivs.push_back(index);
            std::sort(d.factors[k].derivs.begin(), d.factors[k].derivs.end());
            terms.push_back(std::move(d));
        }
    }
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

Expression rename_free(const Algebra &alg, const Expression &e, const std::map<Index, Index> &mapping) {
    std::vector<Term> terms;
    for (const auto &orig : e.terms()) {
        Term t = orig;
        freshen_dummies(t, "n");
        for_each_index(t, [&](Index &i) {
            auto it = mapping.find(i);
            if (it != mapping.end())
                i = it->second;
        });
        terms.push_back(std::move(t));
    }
    return canonicalize(alg, Expression::from_terms(std::move(terms)));
}

Expression substitute_field(const Algebra &alg, const Expression &e, const std::string &field,
                            const Expression &replacement, const std::vector<Index> &formal) {
    if (const TensorDecl *decl = alg.tensor(field)) {
        if (decl->families.size() != formal.size())
            throw StructuralError("replacement for '" + field + "' has wrong index count");
        for (std::size_t k = 0; k < formal.size(); ++k)
            if (formal[k].family != decl->families[k])
                throw StructuralError("replacement for '" + field + "' has wrong index family at slot " +
                                      std::to_string(k + 1));
    }
    std::vector<Index> rep_free = free_indices(replacement);
    std::vector<Index> sorted_formal = formal;
    std::sort(sorted_formal.begin(), sorted_formal.end());
    if (!replacement.is_zero() && rep_free != sorted_formal)
        throw StructuralError("replacement free indices do not match the signature of '" + field + "'");

    Expression result;
    for (const auto &orig : e.terms()) {
        Term t = orig;
        freshen_dummies(t, "s");
        Expression acc = Expression::scalar(t.coeff);
        for (const auto &f : t.factors) {
            Expression piece;
            if (f.kind == FactorKind::Tensor && f.name == field) {
                std::map<Index, Index> ren;
                for (std::size_t k = 0; k < formal.size(); ++k)
                    ren[formal[k]] = Index{formal[k].family, "~t" + std::to_string(k)};
                piece = rename_free(alg, replacement, ren);
                std::map<Index, Index> back;
                for (std::size_t k = 0; k < formal.size(); ++k)
                    back[Index{formal[k].family, "~t" + std::to_string(k)}] = f.slots[k];
                piece = rename_free(alg, piece, back);
                for (const auto &d : f.derivs)
                    piece = derivative(alg, piece, d);
            } else {
                piece = Expression::factor(f);
            }
            acc = multiply(alg, acc, piece);
        }
        result = add(alg, result, acc);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {
std::string join_indices(const std::vector<Index> &v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i)
            s += ",";
        s += v[i].name;
    }
    return s;
}
} // namespace

std::string render_factor(const Factor &f) {
    std::string core;
    switch (f.kind) {
    case FactorKind::Tensor:
        core = f.name;
        if (!f.slots.empty())
            core += "[" + join_indices(f.slots) + "]";
        if (!f.point.empty())
            core += "@" + f.point;
        break;
    case FactorKind::Epsilon:
        core = "eps(" + join_indices(f.slots) + ")";
        break;
    case FactorKind::Structure:
        core = "f(" + join_indices(f.slots) + ")";
        break;
    case FactorKind::Kronecker:
        core = "delta(" + join_indices(f.slots) + ")";
        break;
    case FactorKind::Distribution:
        core = "delta3(" + f.point + ")";
        break;
    }
    for (auto it = f.derivs.rbegin(); it != f.derivs.rend(); ++it)
        core = "d_" + it->name + "(" + core + ")";
    return core;
}

std::string render_term(const Algebra &, const Term &t, bool leading) {
    std::string out;
    Rational q = t.coeff.rational();
    bool neg = q < 0;
    if (neg)
        q = -q;
    if (leading && neg)
        out += "-";
    std::vector<std::string> parts;
    bool unit = q == 1;
    if (!unit || (t.factors.empty() && t.coeff.monomial().empty()))
        parts.push_back(render_rational(q));
    for (const auto &[n, e] : t.coeff.monomial())
        parts.push_back(e == 1 ? n : n + "^" + std::to_string(e));
    if (parts.empty() && t.factors.empty())
        parts.push_back("1");
    for (const auto &f : t.factors)
        parts.push_back(render_factor(f));
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i)
            out += "*";
        out += parts[i];
    }
    return out;
}

std::string render(const Algebra &alg, const Expression &e) {
    if (e.is_zero())
        return "0";
    std::string out;
    bool first = true;
    for (const auto &t : e.terms()) {
        if (!first)
            out += t.coeff.rational() < 0 ? " - " : " + ";
        out += render_term(alg, t, first);
        first = false;
    }
    return out;
}

} // namespace dirac
