#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>

namespace testing {

Algebra test_algebra() {
    Algebra alg;
    dirac::IndexFamily space{"space", dirac::DimPoly(3), true, false, true, "abcde"};
    dirac::IndexFamily so3{"so3", dirac::DimPoly(3), true, false, false, "ijklmnpq"};
    dirac::IndexFamily adj{"adj", dirac::DimPoly(3), false, true, false, "rstuvw"};
    int s = alg.add_family(space);
    int o = alg.add_family(so3);
    int a = alg.add_family(adj);
    alg.declare_tensor({"A", {o}, {}});
    alg.declare_tensor({"B", {o}, {}});
    alg.declare_tensor({"V", {s}, {}});
    alg.declare_tensor({"M", {o, o}, {{0, 1}}});
    alg.declare_tensor({"T", {o, o}, {}});
    alg.declare_tensor({"C", {s, o}, {}});
    alg.declare_tensor({"G", {a}, {}});
    alg.declare_tensor({"H", {a, s}, {}});
    return alg;
}

namespace {

std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

double unit(std::uint64_t h) { return static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53) * 2.0 - 1.0; }

} // namespace

Values::Values(const Algebra &alg, std::uint64_t seed) : alg_(&alg), seed_(seed) {
    constants_["g"] = 1.3 + 0.1 * static_cast<double>(seed % 7);
    constants_["Xi"] = 0.7;
    constants_["Omega"] = -1.9;
}

cplx Values::tensor(const Factor &f, const std::vector<int> &slots_in, const std::vector<int> &derivs_in) const {
    std::vector<int> slots = slots_in;
    std::vector<int> derivs = derivs_in;
    std::sort(derivs.begin(), derivs.end());
    double sign = 1;
    if (const auto *decl = alg_->tensor(f.name))
        for (auto [p, q] : decl->antisymmetric) {
            auto &x = slots[static_cast<std::size_t>(p)];
            auto &y = slots[static_cast<std::size_t>(q)];
            if (x == y)
                return 0.0;
            if (x > y) {
                std::swap(x, y);
                sign = -sign;
            }
        }
    std::uint64_t h = splitmix(seed_ ^ std::hash<std::string>{}(f.name));
    h = splitmix(h ^ (0x100 + derivs.size()));
    for (int d : derivs)
        h = splitmix(h ^ static_cast<std::uint64_t>(d + 17));
    for (int s : slots)
        h = splitmix(h ^ static_cast<std::uint64_t>(s + 101));
    return sign * unit(h);
}

cplx Values::constant(const std::string &name) const {
    if (name == dirac::kImaginary)
        return {0.0, 1.0};
    auto it = constants_.find(name);
    if (it == constants_.end())
        throw std::runtime_error("no value for constant " + name);
    return it->second;
}

namespace {

cplx scalar_value(const Scalar &s, const Values &v) {
    cplx out = s.rational().convert_to<double>();
    for (const auto &[name, e] : s.monomial())
        out *= std::pow(v.constant(name), e);
    return out;
}

int dimension(const Algebra &alg, int family) {
    auto d = alg.family(family).concrete_dimension();
    if (!d)
        throw std::runtime_error("symbolic dimension in evaluation");
    return *d;
}

cplx evaluate_term(const Algebra &alg, const Term &t, const Values &v, const std::map<std::string, int> &free) {
    std::map<std::string, int> counts;
    std::map<std::string, int> families;
    for (const auto &f : t.factors) {
        if (f.kind == FactorKind::Distribution)
            throw std::runtime_error("distribution in evaluation");
        for (const auto &i : f.slots) {
            ++counts[i.name];
            families[i.name] = i.family;
        }
        for (const auto &i : f.derivs) {
            ++counts[i.name];
            families[i.name] = i.family;
        }
    }
    std::vector<std::string> dummies;
    for (const auto &[name, c] : counts)
        if (!free.count(name))
            dummies.push_back(name);
    std::map<std::string, int> value = free;
    for (const auto &d : dummies)
        value[d] = 0;
    cplx coeff = scalar_value(t.coeff, v);
    cplx sum = 0;
    while (true) {
        cplx prod = coeff;
        for (const auto &f : t.factors) {
            std::vector<int> s, d;
            for (const auto &i : f.slots)
                s.push_back(value.at(i.name));
            for (const auto &i : f.derivs)
                d.push_back(value.at(i.name));
            switch (f.kind) {
            case FactorKind::Tensor:
                prod *= v.tensor(f, s, d);
                break;
            case FactorKind::Epsilon:
            case FactorKind::Structure:
                prod *= static_cast<double>(levi(s[0], s[1], s[2]));
                break;
            case FactorKind::Kronecker:
                prod *= s[0] == s[1] ? 1.0 : 0.0;
                break;
            case FactorKind::Distribution:
                break;
            }
            if (prod == cplx(0.0))
                break;
        }
        sum += prod;
        std::size_t k = 0;
        for (; k < dummies.size(); ++k) {
            int &x = value[dummies[k]];
            if (++x < dimension(alg, families.at(dummies[k])))
                break;
            x = 0;
        }
        if (k == dummies.size())
            break;
    }
    return sum;
}

} // namespace

cplx evaluate(const Algebra &alg, const Expression &e, const Values &v, const std::map<std::string, int> &free) {
    cplx out = 0;
    for (const auto &t : e.terms())
        out += evaluate_term(alg, t, v, free);
    return out;
}

namespace {

/// Free index names (and families) of the first term, counted by hand.
std::map<std::string, int> free_of(const Expression &e) {
    std::map<std::string, int> counts, fam;
    if (e.terms().empty())
        return {};
    for (const auto &f : e.terms().front().factors) {
        for (const auto &i : f.slots) {
            ++counts[i.name];
            fam[i.name] = i.family;
        }
        for (const auto &i : f.derivs) {
            ++counts[i.name];
            fam[i.name] = i.family;
        }
    }
    std::map<std::string, int> out;
    for (const auto &[n, c] : counts)
        if (c == 1)
            out[n] = fam[n];
    return out;
}

} // namespace

double max_difference(const Algebra &alg, const Expression &a, const Expression &b, const Values &v) {
    auto fa = free_of(a);
    auto fb = free_of(b);
    auto fam = fa.empty() ? fb : fa;
    std::vector<std::string> names;
    for (const auto &[n, f] : fam)
        names.push_back(n);
    std::map<std::string, int> value;
    for (const auto &n : names)
        value[n] = 0;
    double worst = 0;
    while (true) {
        worst = std::max(worst, std::abs(evaluate(alg, a, v, value) - evaluate(alg, b, v, value)));
        std::size_t k = 0;
        for (; k < names.size(); ++k) {
            int &x = value[names[k]];
            if (++x < dimension(alg, fam.at(names[k])))
                break;
            x = 0;
        }
        if (k == names.size())
            break;
    }
    return worst;
}

Expression random_expression(const Algebra &alg, std::mt19937_64 &rng, const RandomExpressionOptions &opts) {
    const int space = *alg.find_family("space");
    const int so3 = *alg.find_family("so3");
    const int adj = *alg.find_family("adj");
    auto pick = [&](int n) { return std::uniform_int_distribution<int>(0, n - 1)(rng); };

    struct Proto {
        FactorKind kind;
        std::string name;
        std::vector<int> families;
    };
    const std::vector<Proto> menu = {
        {FactorKind::Tensor, "A", {so3}},          {FactorKind::Tensor, "B", {so3}},
        {FactorKind::Tensor, "V", {space}},        {FactorKind::Tensor, "M", {so3, so3}},
        {FactorKind::Tensor, "T", {so3, so3}},     {FactorKind::Tensor, "C", {space, so3}},
        {FactorKind::Tensor, "G", {adj}},          {FactorKind::Tensor, "H", {adj, space}},
        {FactorKind::Epsilon, "", {so3, so3, so3}}, {FactorKind::Epsilon, "", {space, space, space}},
        {FactorKind::Structure, "", {adj, adj, adj}}, {FactorKind::Kronecker, "", {so3, so3}},
        {FactorKind::Kronecker, "", {space, space}},
    };
    const std::map<int, std::string> vector_of = {{so3, "A"}, {space, "V"}, {adj, "G"}};
    const std::map<int, char> letter = {{so3, 'i'}, {space, 'a'}, {adj, 'r'}};

    std::vector<Term> terms;
    int nterms = 1 + pick(opts.max_terms);
    for (int t = 0; t < nterms; ++t) {
        std::vector<Proto> protos;
        std::vector<std::vector<int>> derivs; // deriv families per factor
        int nf = 1 + pick(opts.max_factors);
        for (int k = 0; k < nf; ++k) {
            protos.push_back(menu[static_cast<std::size_t>(pick(static_cast<int>(menu.size())))]);
            std::vector<int> d;
            if (opts.derivatives && protos.back().kind == FactorKind::Tensor) {
                int r = pick(6);
                if (r >= 4)
                    d.push_back(space);
                if (r == 5)
                    d.push_back(space);
            }
            derivs.push_back(d);
        }
        // Parity fix so that every family's slots pair up (one so3 slot stays free).
        std::map<int, int> count;
        for (std::size_t k = 0; k < protos.size(); ++k) {
            for (int f : protos[k].families)
                ++count[f];
            for (int f : derivs[k])
                ++count[f];
        }
        if (opts.free_index)
            ++count[so3];
        for (int f : {space, so3, adj})
            if (count[f] % 2) {
                protos.push_back({FactorKind::Tensor, vector_of.at(f), {f}});
                derivs.push_back({});
            }
        // Slot positions per family, then a random pairing.
        struct Pos {
            std::size_t factor;
            bool deriv;
            std::size_t slot;
        };
        std::map<int, std::vector<Pos>> positions;
        for (std::size_t k = 0; k < protos.size(); ++k) {
            for (std::size_t s = 0; s < protos[k].families.size(); ++s)
                positions[protos[k].families[s]].push_back({k, false, s});
            for (std::size_t s = 0; s < derivs[k].size(); ++s)
                positions[derivs[k][s]].push_back({k, true, s});
        }
        std::vector<std::vector<Index>> slot_names(protos.size()), deriv_names(protos.size());
        for (std::size_t k = 0; k < protos.size(); ++k) {
            slot_names[k].resize(protos[k].families.size());
            deriv_names[k].resize(derivs[k].size());
        }
        for (auto &[fam, pos] : positions) {
            std::shuffle(pos.begin(), pos.end(), rng);
            std::size_t start = 0;
            if (opts.free_index && fam == so3) {
                auto &p = pos[0];
                (p.deriv ? deriv_names : slot_names)[p.factor][p.slot] = Index{fam, "p"};
                start = 1;
            }
            for (std::size_t k = start; k + 1 < pos.size(); k += 2) {
                std::string name = std::string(1, letter.at(fam)) + "x" + std::to_string(k);
                for (const auto &p : {pos[k], pos[k + 1]})
                    (p.deriv ? deriv_names : slot_names)[p.factor][p.slot] = Index{fam, name};
            }
        }
        Term term;
        long long num = 1 + pick(5);
        long long den = 1 + pick(3);
        term.coeff = Scalar(dirac::Rational(pick(2) ? num : -num, den));
        int c = pick(6);
        if (c == 4)
            term.coeff *= Scalar::symbol("g", pick(2) ? 1 : -1);
        if (c == 5)
            term.coeff *= Scalar::symbol(dirac::kImaginary);
        for (std::size_t k = 0; k < protos.size(); ++k) {
            const Proto &p = protos[k];
            switch (p.kind) {
            case FactorKind::Tensor:
                term.factors.push_back(Factor::tensor(p.name, slot_names[k], deriv_names[k]));
                break;
            case FactorKind::Epsilon:
                term.factors.push_back(Factor::epsilon(slot_names[k]));
                break;
            case FactorKind::Structure:
                term.factors.push_back(Factor::structure(slot_names[k]));
                break;
            case FactorKind::Kronecker:
                term.factors.push_back(Factor::kronecker(slot_names[k][0], slot_names[k][1]));
                break;
            case FactorKind::Distribution:
                break;
            }
        }
        terms.push_back(std::move(term));
    }
    return Expression::from_terms(std::move(terms));
}

} // namespace testing
