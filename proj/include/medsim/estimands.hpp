#pragma once

#include <array>
#include <map>
#include <string>
#include <string_view>

namespace medsim {

// psi_{d1,d2,d3} = E[Y(d3, L(d1), X(d2, L(d1)))]; d1 feeds L, d2 feeds X, d3 feeds Y.
// phi_{d1,d2} is psi_{d1,d1,d2}.
struct PsiAssignment {
    double d1, d2, d3;
};

// lambda_{d1,d2} = E[Y(d2, X(d1|V))]; d1 feeds the randomized X draw, d2 feeds L and Y.
struct LambdaAssignment {
    double d1, d2;
};

// Declared in the row order of the effect table.
enum class Estimand { OE, IDE, IIE, ATE, MNDE, MNIE, PSE_DY, PSE_DLY, PSE_DXY };

inline constexpr std::array<Estimand, 9> kAllEstimands{
    Estimand::OE,   Estimand::IDE,  Estimand::IIE,    Estimand::ATE,    Estimand::MNDE,
    Estimand::MNIE, Estimand::PSE_DY, Estimand::PSE_DLY, Estimand::PSE_DXY};

std::string_view key(Estimand e);    // JSON key, e.g. "PSE_DLY"
std::string_view label(Estimand e);  // table label, e.g. "PSE(D->L~>Y)"
Estimand parse_estimand(std::string_view key);
bool is_interventional(Estimand e);

using EffectMap = std::map<Estimand, double>;

// Marginal means needed for the natural/path-specific decomposition of (d, d*).
struct NaturalMeans {
    double psi_ssd;  // psi_{d*, d*, d}
    double psi_sss;  // psi_{d*, d*, d*}
    double psi_sdd;  // psi_{d*, d, d}
    double psi_ddd;  // psi_{d, d, d}
};

struct InterventionalMeans {
    double lambda_sd;  // lambda_{d*, d}
    double lambda_ss;  // lambda_{d*, d*}
    double lambda_dd;  // lambda_{d, d}
};

// Effects are differences of the shared means, so ATE = MNDE + MNIE,
// ATE = sum of PSEs and OE = IDE + IIE hold to rounding.
EffectMap natural_contrasts(const NaturalMeans& m);
EffectMap interventional_contrasts(const InterventionalMeans& m);

std::array<PsiAssignment, 4> natural_assignments(double d, double d_star);
std::array<LambdaAssignment, 3> interventional_assignments(double d, double d_star);

}  // namespace medsim
