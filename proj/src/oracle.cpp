#include "dirac/oracle.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace dirac {

namespace {

using cd = std::complex<double>;

int levi_civita(int a, int b, int c) {
    if (a == b || b == c || a == c)
        return 0;
    // Parity of the permutation (a, b, c) of (0, 1, 2).
    return ((b - a + 3) % 3 == 1) ? 1 : -1;
}

/// Structure constants of su(n) from the generalized Gell-Mann basis, T = lambda / 2.
std::vector<double> su_structure_constants(int n) {
    using Mat = Eigen::MatrixXcd;
    std::vector<Mat> gens;
    const cd i(0, 1);
    for (int j = 0; j < n; ++j)
        for (int k = j + 1; k < n; ++k) {
            Mat s = Mat::Zero(n, n);
            s(j, k) = s(k, j) = 0.5;
            gens.push_back(s);
            Mat a = Mat::Zero(n, n);
            a(j, k) = -0.5 * i;
            a(k, j) = 0.5 * i;
            gens.push_back(a);
        }
    for (int l = 1; l < n; ++l) {
        Mat d = Mat::Zero(n, n);
        double norm = std::sqrt(2.0 / (l * (l + 1.0)));
        for (int j = 0; j < l; ++j)
            d(j, j) = 0.5 * norm;
        d(l, l) = -0.5 * norm * l;
        gens.push_back(d);
    }
    const int dim = static_cast<int>(gens.size());
    std::vector<double> f(static_cast<std::size_t>(dim * dim * dim), 0.0);
    for (int a = 0; a < dim; ++a)
        for (int b = 0; b < dim; ++b) {
            Mat comm = gens[a] * gens[b] - gens[b] * gens[a];
            for (int c = 0; c < dim; ++c) {
                cd v = -2.0 * i * (comm * gens[c]).trace();
                double r = v.real();
                f[static_cast<std::size_t>((a * dim + b) * dim + c)] = std::abs(r) < 1e-14 ? 0.0 : r;
            }
        }
    return f;
}

std::vector<double> derivative_matrix(int L, DifferenceScheme scheme) {
    std::vector<double> d(static_cast<std::size_t>(L * L), 0.0);
    const double h = 2 * std::numbers::pi / L;
    if (scheme == DifferenceScheme::Central) {
        for (int j = 0; j < L; ++j) {
            d[static_cast<std::size_t>(j * L + (j + 1) % L)] += 1 / (2 * h);
            d[static_cast<std::size_t>(j * L + (j + L - 1) % L)] -= 1 / (2 * h);
        }
        return d;
    }
    // Spectral: differentiate the interpolating trigonometric polynomial; the Nyquist
    // mode of an even lattice is dropped.
    const int kmax = (L - 1) / 2;
    for (int j = 0; j < L; ++j)
        for (int k = 0; k < L; ++k) {
            double s = 0;
            for (int m = 1; m <= kmax; ++m)
                s += -2.0 * m * std::sin(m * (j - k) * h);
            d[static_cast<std::size_t>(j * L + k)] = s / L;
        }
    return d;
}

Grid apply_derivative(const std::vector<double> &d, int L, int axis, const Grid &u, bool transpose) {
    Grid out(u.size(), 0.0);
    int stride = axis == 0 ? 1 : axis == 1 ? L : L * L;
    for (std::size_t s = 0; s < u.size(); ++s) {
        int x = static_cast<int>(s / static_cast<std::size_t>(stride)) % L;
        std::size_t base = s - static_cast<std::size_t>(x * stride);
        cd acc = 0;
        for (int k = 0; k < L; ++k) {
            double w = transpose ? d[static_cast<std::size_t>(k * L + x)] : d[static_cast<std::size_t>(x * L + k)];
            if (w != 0)
                acc += w * u[base + static_cast<std::size_t>(k * stride)];
        }
        out[s] = acc;
    }
    return out;
}

/// All component tuples for the given slot ranges.
std::vector<Components> all_components(const std::vector<int> &ranges) {
    std::vector<Components> out;
    Components c(ranges.size(), 0);
    for (int r : ranges)
        if (r <= 0)
            return out;
    while (true) {
        out.push_back(c);
        std::size_t k = 0;
        while (k < c.size() && ++c[k] == ranges[k]) {
            c[k] = 0;
            ++k;
        }
        if (k == c.size())
            break;
    }
    return out;
}

bool is_independent(const Components &c, const std::vector<std::pair<int, int>> &antisym) {
    for (auto [p, q] : antisym)
        if (c[static_cast<std::size_t>(p)] >= c[static_cast<std::size_t>(q)])
            return false;
    return true;
}

/// Independent components of `c` and its images under the antisymmetric swaps, with signs.
std::vector<std::pair<Components, int>> swap_images(const Components &c, const std::vector<std::pair<int, int>> &antisym) {
    std::vector<std::pair<Components, int>> out{{c, 1}};
    for (auto [p, q] : antisym) {
        std::size_t n = out.size();
        for (std::size_t k = 0; k < n; ++k) {
            Components swapped = out[k].first;
            std::swap(swapped[static_cast<std::size_t>(p)], swapped[static_cast<std::size_t>(q)]);
            out.push_back({swapped, -out[k].second});
        }
    }
    return out;
}

Grid random_band_limited(int L, int band, std::mt19937_64 &rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    if (band <= 0) {
        // Independent Gaussian value per site.
        Grid g(static_cast<std::size_t>(L * L * L));
        for (auto &x : g)
            x = normal(rng);
        return g;
    }
    const double h = 2 * std::numbers::pi / L;
    const int width = 2 * band + 1;
    const double norm = 1.0 / std::sqrt(static_cast<double>(width * width * width));
    Grid g(static_cast<std::size_t>(L * L * L), 0.0);
    for (int m0 = -band; m0 <= band; ++m0)
        for (int m1 = -band; m1 <= band; ++m1)
            for (int m2 = -band; m2 <= band; ++m2) {
                double a = normal(rng) * norm, b = normal(rng) * norm;
                for (int z = 0; z < L; ++z)
                    for (int y = 0; y < L; ++y)
                        for (int x = 0; x < L; ++x) {
                            double phase = h * (m0 * x + m1 * y + m2 * z);
                            g[static_cast<std::size_t>(x + L * (y + L * z))] += a * std::cos(phase) + b * std::sin(phase);
                        }
            }
    return g;
}

std::vector<int> slot_ranges(const Lattice &lat, const std::vector<int> &families) {
    std::vector<int> r;
    for (int f : families)
        r.push_back(lat.dimension(f));
    return r;
}

void fill_tensor(FieldAssignment &out, const Lattice &lat, const std::string &name, const std::vector<int> &families,
                 const std::vector<std::pair<int, int>> &antisym, std::mt19937_64 &rng) {
    auto &slot = out.values[name];
    const LatticeConfig &cfg = lat.config();
    Grid zero(static_cast<std::size_t>(lat.sites()), 0.0);
    for (const auto &c : all_components(slot_ranges(lat, families))) {
        if (!is_independent(c, antisym))
            continue;
        Grid g = random_band_limited(cfg.lattice, cfg.band, rng);
        for (const auto &[image, sign] : swap_images(c, antisym)) {
            Grid v = g;
            for (auto &x : v)
                x *= static_cast<double>(sign);
            slot[image] = v;
        }
    }
    // Components with a repeated value in an antisymmetric pair vanish.
    for (const auto &c : all_components(slot_ranges(lat, families)))
        if (!slot.count(c))
            slot[c] = zero;
}

} // namespace

/// Brute-force evaluator: every index of every term is summed over its concrete range.
struct LatticeEval {
    const Lattice &lat;
    const FieldAssignment &fields;
    const FieldAssignment &smearings;
    mutable std::map<std::tuple<std::string, Components, std::vector<int>>, Grid> cache;

    const Grid &base(const std::string &name, const Components &c) const {
        for (const auto *src : {&fields, &smearings}) {
            auto it = src->values.find(name);
            if (it == src->values.end())
                continue;
            auto jt = it->second.find(c);
            if (jt == it->second.end())
                throw ConfigurationError("component out of range for '" + name + "'");
            return jt->second;
        }
        throw ConfigurationError("no values assigned to '" + name + "'");
    }

    const Grid &tensor(const std::string &name, const Components &c, std::vector<int> axes) const {
        if (axes.empty())
            return base(name, c);
        std::sort(axes.begin(), axes.end());
        auto key = std::make_tuple(name, c, axes);
        auto it = cache.find(key);
        if (it != cache.end())
            return it->second;
        Grid g = base(name, c);
        for (int a : axes)
            g = apply_derivative(lat.d1_, lat.cfg_.lattice, a, g, false);
        return cache.emplace(key, std::move(g)).first->second;
    }

    cd coefficient(const Scalar &s) const {
        cd v = static_cast<double>(s.rational());
        for (const auto &[name, e] : s.monomial())
            v *= std::pow(lat.constant(name), e);
        return v;
    }

    struct Occurrence {
        const Grid *grid;
        const Factor *factor;
        Components comp;
        std::vector<int> axes;
    };

    /// Calls fn(constant, occurrences) for every nonvanishing index assignment of `t`.
    template <class Fn>
    void expand(const Term &t, Fn &&fn) const {
        std::vector<Index> idx;
        auto note = [&](const Index &i) {
            if (std::find(idx.begin(), idx.end(), i) == idx.end())
                idx.push_back(i);
        };
        for (const auto &f : t.factors) {
            if (f.kind == FactorKind::Distribution)
                throw ConfigurationError("delta3 cannot be evaluated on the lattice; smear it first");
            for (const auto &i : f.slots)
                note(i);
            for (const auto &i : f.derivs)
                note(i);
        }
        std::vector<int> ranges;
        for (const auto &i : idx)
            ranges.push_back(lat.dimension(i.family));
        auto value_of = [&](const Components &vals, const Index &i) {
            return vals[static_cast<std::size_t>(std::find(idx.begin(), idx.end(), i) - idx.begin())];
        };
        const cd base_coeff = coefficient(t.coeff);
        std::vector<Occurrence> occ;
        for (const auto &vals : all_components(ranges.empty() ? std::vector<int>{1} : ranges)) {
            cd c = base_coeff;
            occ.clear();
            for (const auto &f : t.factors) {
                switch (f.kind) {
                case FactorKind::Epsilon:
                    c *= levi_civita(value_of(vals, f.slots[0]), value_of(vals, f.slots[1]), value_of(vals, f.slots[2]));
                    break;
                case FactorKind::Structure:
                    c *= lat.structure_constant(value_of(vals, f.slots[0]), value_of(vals, f.slots[1]),
                                                value_of(vals, f.slots[2]));
                    break;
                case FactorKind::Kronecker:
                    c *= value_of(vals, f.slots[0]) == value_of(vals, f.slots[1]) ? 1.0 : 0.0;
                    break;
                default:
                    break;
                }
                if (c == 0.0)
                    break;
            }
            if (c == 0.0)
                continue;
            for (const auto &f : t.factors) {
                if (f.kind != FactorKind::Tensor)
                    continue;
                Components comp;
                for (const auto &i : f.slots)
                    comp.push_back(value_of(vals, i));
                std::vector<int> axes;
                for (const auto &i : f.derivs)
                    axes.push_back(value_of(vals, i));
                occ.push_back({&tensor(f.name, comp, axes), &f, comp, axes});
            }
            fn(c, occ);
        }
    }
};

Lattice::Lattice(const ModelDef &m, LatticeConfig cfg) : m_(&m), cfg_(std::move(cfg)) {
    if (cfg_.lattice < 2)
        throw ConfigurationError("lattice size must be at least 2");
    if (cfg_.group_n < 2)
        throw ConfigurationError("group rank N must be at least 2");
    sites_ = cfg_.lattice * cfg_.lattice * cfg_.lattice;
    const double h = 2 * std::numbers::pi / cfg_.lattice;
    cell_ = h * h * h;
    for (const auto &fam : m.algebra.families()) {
        Rational v = fam.dimension.evaluate(cfg_.group_n);
        if (denominator(v) != 1 || v <= 0)
            throw ConfigurationError("family '" + fam.name + "' has no positive integer dimension at N = " +
                                     std::to_string(cfg_.group_n));
        dims_.push_back(static_cast<int>(numerator(v)));
        if (fam.spatial && dims_.back() != 3)
            throw ConfigurationError("spatial family '" + fam.name + "' must have dimension 3");
    }
    if (auto s = m.algebra.structure_family()) {
        int expect = cfg_.group_n * cfg_.group_n - 1;
        if (dims_[static_cast<std::size_t>(*s)] != expect)
            throw ConfigurationError("structure-constant family must have dimension N^2-1");
        f_ = su_structure_constants(cfg_.group_n);
    }
    d1_ = derivative_matrix(cfg_.lattice, cfg_.scheme);

    std::mt19937_64 rng(cfg_.seed ^ 0x5eedc0de5eedc0deULL);
    std::uniform_real_distribution<double> mag(0.5, 1.5);
    std::bernoulli_distribution sign(0.5);
    for (const auto &c : m.constants) {
        auto it = cfg_.constants.find(c);
        double v = it != cfg_.constants.end() ? it->second : (sign(rng) ? 1 : -1) * mag(rng);
        if (v == 0)
            throw ConfigurationError("constant '" + c + "' must be nonzero");
        constants_[c] = v;
    }
}

std::complex<double> Lattice::constant(const std::string &name) const {
    if (name == kImaginary)
        return {0, 1};
    auto it = constants_.find(name);
    if (it == constants_.end())
        throw ConfigurationError("constant '" + name + "' has no value");
    return it->second;
}

double Lattice::structure_constant(int a, int b, int c) const {
    if (f_.empty())
        throw ConfigurationError("model has no structure-constant family");
    int d = cfg_.group_n * cfg_.group_n - 1;
    return f_[static_cast<std::size_t>((a * d + b) * d + c)];
}

std::complex<double> Lattice::functional(const SmearedFunctional &f, const FieldAssignment &fields,
                                         const FieldAssignment &smearings) const {
    LatticeEval ev{*this, fields, smearings, {}};
    cd total = 0;
    for (const auto &t : f.body.terms())
        ev.expand(t, [&](cd c, const std::vector<LatticeEval::Occurrence> &occ) {
            cd sum = 0;
            for (int s = 0; s < sites_; ++s) {
                cd p = c;
                for (const auto &o : occ)
                    p *= (*o.grid)[static_cast<std::size_t>(s)];
                sum += p;
            }
            total += sum;
        });
    return total * cell_;
}

std::map<std::string, std::map<Components, Grid>> Lattice::gradient(const SmearedFunctional &f,
                                                                    const FieldAssignment &fields,
                                                                    const FieldAssignment &smearings) const {
    LatticeEval ev{*this, fields, smearings, {}};
    std::map<std::string, std::map<Components, Grid>> grad;
    Grid rest(static_cast<std::size_t>(sites_));
    for (const auto &t : f.body.terms())
        ev.expand(t, [&](cd c, const std::vector<LatticeEval::Occurrence> &occ) {
            for (std::size_t k = 0; k < occ.size(); ++k) {
                const Factor &fk = *occ[k].factor;
                if (!fields.values.count(fk.name))
                    continue;
                for (int s = 0; s < sites_; ++s) {
                    cd p = c * cell_;
                    for (std::size_t j = 0; j < occ.size(); ++j)
                        if (j != k)
                            p *= (*occ[j].grid)[static_cast<std::size_t>(s)];
                    rest[static_cast<std::size_t>(s)] = p;
                }
                // d/du(y) of sum_x rest(x) (D^alpha u)(x) is (D^alpha)^T rest at y.
                Grid g = rest;
                for (int a : occ[k].axes)
                    g = apply_derivative(d1_, cfg_.lattice, a, g, true);
                auto &slot = grad[fk.name][occ[k].comp];
                if (slot.empty())
                    slot.assign(static_cast<std::size_t>(sites_), 0.0);
                for (std::size_t s = 0; s < g.size(); ++s)
                    slot[s] += g[s];
            }
        });
    return grad;
}

FieldAssignment random_assignment(const ModelDef &m, const LatticeConfig &cfg, std::uint64_t seed,
                                  bool include_multipliers) {
    Lattice lat(m, cfg);
    std::mt19937_64 rng(seed);
    FieldAssignment out;
    for (const auto &fd : m.fields) {
        if (fd.kind == FieldKind::Multiplier && !include_multipliers)
            continue;
        fill_tensor(out, lat, fd.name, fd.families, fd.antisymmetric, rng);
    }
    return out;
}

FieldAssignment random_smearings(const ModelDef &m, const std::vector<Parameter> &params, const LatticeConfig &cfg,
                                 std::uint64_t seed) {
    Lattice lat(m, cfg);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    FieldAssignment out;
    for (const auto &p : params)
        fill_tensor(out, lat, p.name, p.families, {}, rng);
    return out;
}

namespace {

cd scalar_value(const Lattice &lat, const Scalar &s) {
    cd v = static_cast<double>(s.rational());
    for (const auto &[name, e] : s.monomial())
        v *= std::pow(lat.constant(name), e);
    return v;
}

Components momentum_component(const Pairing &p, const Components &c) {
    Components out(c.size());
    for (std::size_t k = 0; k < c.size(); ++k)
        out[static_cast<std::size_t>(p.momentum_slot[k])] = c[k];
    return out;
}

using Gradient = std::map<std::string, std::map<Components, Grid>>;

/// Gradient with respect to one independent component, folding antisymmetric images.
void fold(const Gradient &g, const std::string &field, const std::vector<std::pair<Components, int>> &images,
          Grid &out) {
    auto it = g.find(field);
    if (it == g.end())
        return;
    for (const auto &[c, sign] : images) {
        auto jt = it->second.find(c);
        if (jt == it->second.end())
            continue;
        for (std::size_t s = 0; s < out.size(); ++s)
            out[s] += static_cast<double>(sign) * jt->second[s];
    }
}

struct PhaseVariable {
    const Pairing *pairing;
    Components component;
    cd weight; // bracket coefficient per site: coeff / 2^k / cell volume
};

std::vector<PhaseVariable> phase_variables(const Lattice &lat, const SymplecticStructure &s) {
    std::vector<PhaseVariable> out;
    for (const auto &p : s.pairings) {
        cd w = scalar_value(lat, p.coefficient) / std::pow(2.0, static_cast<double>(p.antisymmetric.size())) /
               lat.cell_volume();
        for (const auto &c : all_components(slot_ranges(lat, p.families)))
            if (is_independent(c, p.antisymmetric))
                out.push_back({&p, c, w});
    }
    return out;
}

void folded_pair(const Gradient &g, const PhaseVariable &v, Grid &dq, Grid &dp) {
    auto images = swap_images(v.component, v.pairing->antisymmetric);
    std::vector<std::pair<Components, int>> mom;
    for (const auto &[c, sign] : images)
        mom.push_back({momentum_component(*v.pairing, c), sign});
    fold(g, v.pairing->coordinate, images, dq);
    fold(g, v.pairing->momentum, mom, dp);
}

/// Antisymmetric slot pairs of a constraint label, read off its body.
std::vector<std::pair<int, int>> label_antisymmetry(const ModelDef &m, const ConstraintDef &c) {
    std::vector<std::pair<int, int>> out;
    for (std::size_t p = 0; p < c.indices.size(); ++p)
        for (std::size_t q = p + 1; q < c.indices.size(); ++q) {
            if (c.indices[p].family != c.indices[q].family)
                continue;
            auto swapped = rename_free(m.algebra, c.body, {{c.indices[p], c.indices[q]}, {c.indices[q], c.indices[p]}});
            if (add(m.algebra, c.body, swapped).is_zero())
                out.push_back({static_cast<int>(p), static_cast<int>(q)});
        }
    return out;
}

} // namespace

NumericBracket numeric_bracket(const Lattice &lat, const SymplecticStructure &s, const SmearedFunctional &f,
                               const SmearedFunctional &g, const FieldAssignment &fields,
                               const FieldAssignment &smearings) {
    Gradient gf = lat.gradient(f, fields, smearings);
    Gradient gg = lat.gradient(g, fields, smearings);
    NumericBracket out;
    const auto n = static_cast<std::size_t>(lat.sites());
    for (const auto &v : phase_variables(lat, s)) {
        Grid fq(n, 0.0), fp(n, 0.0), gq(n, 0.0), gp(n, 0.0);
        folded_pair(gf, v, fq, fp);
        folded_pair(gg, v, gq, gp);
        for (std::size_t x = 0; x < n; ++x) {
            cd a = fq[x] * gp[x], b = fp[x] * gq[x];
            out.value += v.weight * (a - b);
            out.scale += std::abs(v.weight) * (std::abs(a) + std::abs(b));
        }
    }
    return out;
}

double relative_error(std::complex<double> a, std::complex<double> b, double scale) {
    double denom = std::max({std::abs(a), std::abs(b), scale});
    return denom == 0 ? 0.0 : std::abs(a - b) / denom;
}

RankVerdict rank_check(const ModelDef &m, const SymplecticStructure &s, const std::vector<std::string> &labels,
                       const LatticeConfig &cfg, int trials) {
    RankVerdict verdict;
    if (labels.empty())
        return verdict;
    Lattice lat(m, cfg);
    const auto vars = phase_variables(lat, s);
    const auto n = static_cast<std::size_t>(lat.sites());
    const auto cols = static_cast<Eigen::Index>(vars.size() * n);

    struct Row {
        SmearedFunctional functional;
        Components component;
        std::size_t site;
    };
    std::vector<Row> rows;
    for (const auto &label : labels) {
        const ConstraintDef *c = m.constraint(label);
        if (!c)
            throw ConfigurationError("unknown constraint '" + label + "'");
        SmearedFunctional f = smear_constraint(m, *c, "lam");
        auto antisym = label_antisymmetry(m, *c);
        for (const auto &comp : all_components(slot_ranges(lat, f.params.front().families)))
            if (is_independent(comp, antisym))
                for (std::size_t x = 0; x < n; ++x)
                    rows.push_back({f, comp, x});
    }
    verdict.size = static_cast<int>(rows.size());
    verdict.margin = 1;

    for (int trial = 0; trial < trials; ++trial) {
        FieldAssignment fields = random_assignment(m, cfg, cfg.seed + 7919ULL * static_cast<std::uint64_t>(trial));
        Eigen::MatrixXcd jq = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.size()), cols);
        Eigen::MatrixXcd jp = jq;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            // Smearing with a lattice delta turns the functional into the density at one site.
            FieldAssignment delta;
            const Parameter &param = rows[r].functional.params.front();
            auto &slot = delta.values[param.name];
            for (const auto &comp : all_components(slot_ranges(lat, param.families)))
                slot[comp] = Grid(n, 0.0);
            slot[rows[r].component][rows[r].site] = 1.0 / lat.cell_volume();
            Gradient g = lat.gradient(rows[r].functional, fields, delta);
            for (std::size_t v = 0; v < vars.size(); ++v) {
                Grid dq(n, 0.0), dp(n, 0.0);
                folded_pair(g, vars[v], dq, dp);
                for (std::size_t x = 0; x < n; ++x) {
                    auto col = static_cast<Eigen::Index>(v * n + x);
                    jq(static_cast<Eigen::Index>(r), col) = dq[x];
                    jp(static_cast<Eigen::Index>(r), col) = dp[x];
                }
            }
        }
        Eigen::VectorXcd w(cols);
        for (std::size_t v = 0; v < vars.size(); ++v)
            for (std::size_t x = 0; x < n; ++x)
                w(static_cast<Eigen::Index>(v * n + x)) = vars[v].weight;
        Eigen::MatrixXcd bracket = jq * w.asDiagonal() * jp.transpose() - jp * w.asDiagonal() * jq.transpose();
        Eigen::BDCSVD<Eigen::MatrixXcd> svd(bracket);
        const auto &sv = svd.singularValues();
        double ratio = sv.size() == 0 || sv(0) == 0 ? 0.0 : sv(sv.size() - 1) / sv(0);
        verdict.ratios.push_back(ratio);
        verdict.margin = std::min(verdict.margin, ratio);
        if (!(ratio > 1e-8))
            verdict.full_rank = false;
    }
    return verdict;
}

} // namespace dirac
