#pragma once

#include "medsim/data_model.hpp"
#include "medsim/estimands.hpp"

#include "json.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace medsim::oracle {

// Fully discrete data-generating process with one confounder V. Supports are
// the integer codes 0..K-1; tables are indexed by code positions.
struct DiscreteDGP {
    std::array<std::string, 5> names{"v", "d", "l", "x", "y"};  // V, D, L, X, Y
    std::array<std::vector<double>, 5> support;
    std::vector<double> p_v;                                              // [v]
    std::vector<std::vector<double>> p_d;                                 // [v][d]
    std::vector<std::vector<std::vector<double>>> p_l;                    // [v][d][l]
    std::vector<std::vector<std::vector<std::vector<double>>>> p_x;       // [v][d][l][x]
    std::vector<std::vector<std::vector<std::vector<std::vector<double>>>>> p_y;  // [v][d][l][x][y]

    // Throws ConfigError when a table is malformed or a row does not sum to 1.
    void validate() const;

    std::size_t levels(int slot) const { return support[static_cast<std::size_t>(slot)].size(); }
    std::size_t treatment_index(double d) const;
    double expected_y(std::size_t v, std::size_t d, std::size_t l, std::size_t x) const;

    // Binary kinds for two-level variables, ordinal otherwise.
    data::CausalSchema schema(double d, double d_star) const;
};

DiscreteDGP discrete_dgp_from_json(const nlohmann::json& j);
DiscreteDGP load_discrete_dgp(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const DiscreteDGP& dgp);

// Direct summation over every (v, l, x) state.
double eval_psi_exact(const DiscreteDGP& dgp, const PsiAssignment& a);
double eval_phi_exact(const DiscreteDGP& dgp, double d1, double d2);
double eval_lambda_exact(const DiscreteDGP& dgp, const LambdaAssignment& a);

// All nine effects for the contrast (d, d*).
EffectMap exact_effects(const DiscreteDGP& dgp, double d, double d_star);

// V ~ N(v_mean, v_sd^2); D ~ Bernoulli(logistic(d0 + d1 V)); then
// L = a0 + a1 V + a2 D + e_L, X = b0 + b1 V + b2 D + b3 L + e_X,
// Y = c0 + c1 V + c2 D + c3 L + c4 X + e_Y with independent normal noise.
struct LinearGaussianDGP {
    std::array<std::string, 5> names{"v", "d", "l", "x", "y"};
    double v_mean = 0.0, v_sd = 1.0;
    double d0 = 0.0, d1 = 0.5;
    double a0 = 0.0, a1 = 0.0, a2 = 0.0, sd_l = 1.0;
    double b0 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0, sd_x = 1.0;
    double c0 = 0.0, c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, sd_y = 1.0;

    void validate() const;
    data::CausalSchema schema(double d = 1.0, double d_star = 0.0) const;
};

// Product-of-coefficients effects; the interventional ones follow from the
// same structural equations with X drawn from its (V, D)-conditional law.
EffectMap linear_effects_exact(const LinearGaussianDGP& dgp, double d, double d_star);

// Ancestral sampling V -> D -> L -> X -> Y, deterministic given the seed.
data::CausalDataset sample_dataset(const DiscreteDGP& dgp, std::size_t n, std::uint64_t seed,
                                   double d = 1.0, double d_star = 0.0);
data::CausalDataset sample_dataset(const LinearGaussianDGP& dgp, std::size_t n, std::uint64_t seed,
                                   double d = 1.0, double d_star = 0.0);

}  // namespace medsim::oracle
