#include "medsim/estimands.hpp"

#include "medsim/error.hpp"

namespace medsim {

std::string_view key(Estimand e) {
    switch (e) {
        case Estimand::OE: return "OE";
        case Estimand::IDE: return "IDE";
        case Estimand::IIE: return "IIE";
        case Estimand::ATE: return "ATE";
        case Estimand::MNDE: return "MNDE";
        case Estimand::MNIE: return "MNIE";
        case Estimand::PSE_DY: return "PSE_DY";
        case Estimand::PSE_DLY: return "PSE_DLY";
        case Estimand::PSE_DXY: return "PSE_DXY";
    }
    return "?";
}

std::string_view label(Estimand e) {
    switch (e) {
        case Estimand::PSE_DY: return "PSE(D->Y)";
        case Estimand::PSE_DLY: return "PSE(D->L~>Y)";
        case Estimand::PSE_DXY: return "PSE(D->X->Y)";
        default: return key(e);
    }
}

Estimand parse_estimand(std::string_view k) {
    for (Estimand e : kAllEstimands) {
        if (key(e) == k) return e;
    }
    throw ConfigError("unknown estimand '" + std::string(k) + "'");
}

bool is_interventional(Estimand e) {
    return e == Estimand::OE || e == Estimand::IDE || e == Estimand::IIE;
}

EffectMap natural_contrasts(const NaturalMeans& m) {
    EffectMap out;
    out[Estimand::PSE_DY] = m.psi_ssd - m.psi_sss;
    out[Estimand::PSE_DXY] = m.psi_sdd - m.psi_ssd;
    out[Estimand::PSE_DLY] = m.psi_ddd - m.psi_sdd;
    out[Estimand::MNDE] = out[Estimand::PSE_DY];
    out[Estimand::MNIE] = out[Estimand::PSE_DXY] + out[Estimand::PSE_DLY];
    out[Estimand::ATE] = out[Estimand::MNDE] + out[Estimand::MNIE];
    return out;
}

EffectMap interventional_contrasts(const InterventionalMeans& m) {
    EffectMap out;
    out[Estimand::IDE] = m.lambda_sd - m.lambda_ss;
    out[Estimand::IIE] = m.lambda_dd - m.lambda_sd;
    out[Estimand::OE] = out[Estimand::IDE] + out[Estimand::IIE];
    return out;
}

std::array<PsiAssignment, 4> natural_assignments(double d, double s) {
    return {PsiAssignment{s, s, d}, PsiAssignment{s, s, s}, PsiAssignment{s, d, d}, PsiAssignment{d, d, d}};
}

std::array<LambdaAssignment, 3> interventional_assignments(double d, double s) {
    return {LambdaAssignment{s, d}, LambdaAssignment{s, s}, LambdaAssignment{d, d}};
}

}  // namespace medsim
