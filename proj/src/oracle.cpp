#include "medsim/oracle.hpp"

#include "medsim/error.hpp"
#include "medsim/rng.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

namespace medsim::oracle {

namespace {

constexpr double kRowTolerance = 1e-12;

void check_row(const std::vector<double>& row, std::size_t expected, const std::string& what) {
    if (row.size() != expected) {
        throw ConfigError(what + ": expected " + std::to_string(expected) + " entries, got " +
                          std::to_string(row.size()));
    }
    double sum = 0.0;
    for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError(what + ": negative or non-finite probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance) throw ConfigError(what + ": probabilities sum to " + std::to_string(sum));
}

std::size_t draw_index(const std::vector<double>& probs, double u) {
    double cum = 0.0;
    for (std::size_t k = 0; k + 1 < probs.size(); ++k) {
        cum += probs[k];
        if (u <= cum) return k;
    }
    return probs.size() - 1;
}

data::VariableKind kind_for_levels(std::size_t k) {
    return k == 2 ? data::VariableKind::binary() : data::VariableKind::ordinal(static_cast<int>(k));
}

}  // namespace

void DiscreteDGP::validate() const {
    for (int s = 0; s < 5; ++s) {
        const auto& sup = support[static_cast<std::size_t>(s)];
        if (sup.size() < 2) throw ConfigError("support of '" + names[static_cast<std::size_t>(s)] + "' needs >= 2 levels");
        for (std::size_t k = 0; k < sup.size(); ++k) {
            if (sup[k] != static_cast<double>(k)) {
                throw ConfigError("support of '" + names[static_cast<std::size_t>(s)] + "' must be the codes 0..K-1");
            }
        }
    }
    const std::size_t nv = levels(0), nd = levels(1), nl = levels(2), nx = levels(3), ny = levels(4);
    check_row(p_v, nv, "p_v");
    if (p_d.size() != nv || p_l.size() != nv || p_x.size() != nv || p_y.size() != nv) {
        throw ConfigError("conditional tables must have one block per level of V");
    }
    for (std::size_t v = 0; v < nv; ++v) {
        check_row(p_d[v], nd, "p_d[" + std::to_string(v) + "]");
        if (p_l[v].size() != nd || p_x[v].size() != nd || p_y[v].size() != nd) {
            throw ConfigError("conditional tables must have one block per level of D");
        }
        for (std::size_t d = 0; d < nd; ++d) {
            check_row(p_l[v][d], nl, "p_l");
            if (p_x[v][d].size() != nl || p_y[v][d].size() != nl) throw ConfigError("tables need one block per level of L");
            for (std::size_t l = 0; l < nl; ++l) {
                check_row(p_x[v][d][l], nx, "p_x");
                if (p_y[v][d][l].size() != nx) throw ConfigError("p_y needs one block per level of X");
                for (std::size_t x = 0; x < nx; ++x) check_row(p_y[v][d][l][x], ny, "p_y");
            }
        }
    }
}

std::size_t DiscreteDGP::treatment_index(double d) const {
    const auto& sup = support[1];
    for (std::size_t k = 0; k < sup.size(); ++k) {
        if (sup[k] == d) return k;
    }
    throw ConfigError("treatment value " + std::to_string(d) + " is not in the DGP support");
}

double DiscreteDGP::expected_y(std::size_t v, std::size_t d, std::size_t l, std::size_t x) const {
    const auto& row = p_y[v][d][l][x];
    double e = 0.0;
    for (std::size_t k = 0; k < row.size(); ++k) e += support[4][k] * row[k];
    return e;
}

data::CausalSchema DiscreteDGP::schema(double d, double d_star) const {
    return data::CausalSchema({{names[0], kind_for_levels(levels(0))}}, {names[1], kind_for_levels(levels(1))}, d,
                              d_star, {names[2], kind_for_levels(levels(2))},
                              {names[3], kind_for_levels(levels(3))}, {names[4], kind_for_levels(levels(4))});
}

DiscreteDGP discrete_dgp_from_json(const nlohmann::json& j) {
    DiscreteDGP g;
    static const std::array<const char*, 5> slots{"V", "D", "L", "X", "Y"};
    try {
        if (j.contains("names")) {
            for (std::size_t s = 0; s < 5; ++s) g.names[s] = j.at("names").at(slots[s]).get<std::string>();
        }
        for (std::size_t s = 0; s < 5; ++s) g.support[s] = j.at("support").at(slots[s]).get<std::vector<double>>();
        g.p_v = j.at("p_v").get<decltype(g.p_v)>();
        g.p_d = j.at("p_d").get<decltype(g.p_d)>();
        g.p_l = j.at("p_l").get<decltype(g.p_l)>();
        g.p_x = j.at("p_x").get<decltype(g.p_x)>();
        g.p_y = j.at("p_y").get<decltype(g.p_y)>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed DGP JSON: ") + e.what());
    }
    g.validate();
    return g;
}

DiscreteDGP load_discrete_dgp(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open DGP file '" + path.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse '" + path.string() + "': " + e.what());
    }
    return discrete_dgp_from_json(j);
}

nlohmann::ordered_json to_json(const DiscreteDGP& g) {
    static const std::array<const char*, 5> slots{"V", "D", "L", "X", "Y"};
    nlohmann::ordered_json j;
    for (std::size_t s = 0; s < 5; ++s) j["names"][slots[s]] = g.names[s];
    for (std::size_t s = 0; s < 5; ++s) j["support"][slots[s]] = g.support[s];
    j["p_v"] = g.p_v;
    j["p_d"] = g.p_d;
    j["p_l"] = g.p_l;
    j["p_x"] = g.p_x;
    j["p_y"] = g.p_y;
    return j;
}

double eval_psi_exact(const DiscreteDGP& g, const PsiAssignment& a) {
    const std::size_t i1 = g.treatment_index(a.d1), i2 = g.treatment_index(a.d2), i3 = g.treatment_index(a.d3);
    double total = 0.0;
    for (std::size_t v = 0; v < g.levels(0); ++v) {
        for (std::size_t l = 0; l < g.levels(2); ++l) {
            for (std::size_t x = 0; x < g.levels(3); ++x) {
                total += g.expected_y(v, i3, l, x) * g.p_x[v][i2][l][x] * g.p_l[v][i1][l] * g.p_v[v];
            }
        }
    }
    return total;
}

double eval_phi_exact(const DiscreteDGP& g, double d1, double d2) {
    return eval_psi_exact(g, {d1, d1, d2});
}

double eval_lambda_exact(const DiscreteDGP& g, const LambdaAssignment& a) {
    const std::size_t i1 = g.treatment_index(a.d1), i2 = g.treatment_index(a.d2);
    double total = 0.0;
    for (std::size_t v = 0; v < g.levels(0); ++v) {
        std::vector<double> px(g.levels(3), 0.0);  // P(x | v, d1), L marginalized
        for (std::size_t l = 0; l < g.levels(2); ++l) {
            for (std::size_t x = 0; x < g.levels(3); ++x) px[x] += g.p_x[v][i1][l][x] * g.p_l[v][i1][l];
        }
        for (std::size_t l = 0; l < g.levels(2); ++l) {
            for (std::size_t x = 0; x < g.levels(3); ++x) {
                total += g.expected_y(v, i2, l, x) * g.p_l[v][i2][l] * px[x] * g.p_v[v];
            }
        }
    }
    return total;
}

EffectMap exact_effects(const DiscreteDGP& g, double d, double s) {
    NaturalMeans nm{eval_psi_exact(g, {s, s, d}), eval_psi_exact(g, {s, s, s}), eval_psi_exact(g, {s, d, d}),
                    eval_psi_exact(g, {d, d, d})};
    InterventionalMeans im{eval_lambda_exact(g, {s, d}), eval_lambda_exact(g, {s, s}), eval_lambda_exact(g, {d, d})};
    EffectMap out = natural_contrasts(nm);
    for (auto [k, v] : interventional_contrasts(im)) out[k] = v;
    return out;
}

void LinearGaussianDGP::validate() const {
    if (!(v_sd > 0 && sd_l > 0 && sd_x > 0 && sd_y > 0)) throw ConfigError("noise SDs must be positive");
}

data::CausalSchema LinearGaussianDGP::schema(double d, double d_star) const {
    const auto c = data::VariableKind::continuous();
    return data::CausalSchema({{names[0], c}}, {names[1], data::VariableKind::binary()}, d, d_star,
                              {names[2], c}, {names[3], c}, {names[4], c});
}

EffectMap linear_effects_exact(const LinearGaussianDGP& g, double d, double d_star) {
    const double delta = d - d_star;
    EffectMap out;
    out[Estimand::PSE_DY] = g.c2 * delta;
    out[Estimand::PSE_DXY] = g.c4 * g.b2 * delta;
    out[Estimand::PSE_DLY] = (g.c3 * g.a2 + g.c4 * g.b3 * g.a2) * delta;
    out[Estimand::MNDE] = out[Estimand::PSE_DY];
    out[Estimand::MNIE] = out[Estimand::PSE_DXY] + out[Estimand::PSE_DLY];
    out[Estimand::ATE] = out[Estimand::MNDE] + out[Estimand::MNIE];
    out[Estimand::IDE] = (g.c2 + g.c3 * g.a2) * delta;
    out[Estimand::IIE] = g.c4 * (g.b2 + g.b3 * g.a2) * delta;
    out[Estimand::OE] = out[Estimand::IDE] + out[Estimand::IIE];
    return out;
}

data::CausalDataset sample_dataset(const DiscreteDGP& g, std::size_t n, std::uint64_t seed, double d,
                                   double d_star) {
    if (n == 0) throw ConfigError("sample_dataset needs n >= 1");
    const RandomStream rng(seed);
    std::vector<std::vector<double>> cols(5, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t v = draw_index(g.p_v, rng.uniform(tags::dataset, i, 0));
        const std::size_t dd = draw_index(g.p_d[v], rng.uniform(tags::dataset, i, 1));
        const std::size_t l = draw_index(g.p_l[v][dd], rng.uniform(tags::dataset, i, 2));
        const std::size_t x = draw_index(g.p_x[v][dd][l], rng.uniform(tags::dataset, i, 3));
        const std::size_t y = draw_index(g.p_y[v][dd][l][x], rng.uniform(tags::dataset, i, 4));
        cols[0][i] = g.support[0][v];
        cols[1][i] = g.support[1][dd];
        cols[2][i] = g.support[2][l];
        cols[3][i] = g.support[3][x];
        cols[4][i] = g.support[4][y];
    }
    return data::CausalDataset(g.schema(d, d_star), std::move(cols));
}

data::CausalDataset sample_dataset(const LinearGaussianDGP& g, std::size_t n, std::uint64_t seed, double d,
                                   double d_star) {
    if (n == 0) throw ConfigError("sample_dataset needs n >= 1");
    g.validate();
    const RandomStream rng(seed);
    std::vector<std::vector<double>> cols(5, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const double v = g.v_mean + g.v_sd * rng.normal(tags::dataset, i, 0);
        const double pd = 1.0 / (1.0 + std::exp(-(g.d0 + g.d1 * v)));
        const double dd = rng.uniform(tags::dataset, i, 1) < pd ? 1.0 : 0.0;
        const double l = g.a0 + g.a1 * v + g.a2 * dd + g.sd_l * rng.normal(tags::dataset, i, 2);
        const double x = g.b0 + g.b1 * v + g.b2 * dd + g.b3 * l + g.sd_x * rng.normal(tags::dataset, i, 3);
        const double y = g.c0 + g.c1 * v + g.c2 * dd + g.c3 * l + g.c4 * x + g.sd_y * rng.normal(tags::dataset, i, 4);
        cols[0][i] = v;
        cols[1][i] = dd;
        cols[2][i] = l;
        cols[3][i] = x;
        cols[4][i] = y;
    }
    return data::CausalDataset(g.schema(d, d_star), std::move(cols));
}

}  // namespace medsim::oracle
