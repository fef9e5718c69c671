#pragma once

#include "medsim/estimate.hpp"
#include "medsim/oracle.hpp"

#include <string>
#include <vector>

namespace medsim::testing {

inline oracle::DiscreteDGP fixture(const std::string& name) {
    return oracle::load_discrete_dgp(std::string(MEDSIM_FIXTURES) + "/" + name);
}

// Every non-empty product of the given variables: a saturated design for binary parents.
inline glm::TermSpec saturated(const std::vector<std::string>& vars) {
    std::vector<std::string> terms;
    const std::size_t k = vars.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
        std::string t;
        for (std::size_t i = 0; i < k; ++i) {
            if (mask & (std::size_t{1} << i)) t += (t.empty() ? "" : "*") + vars[i];
        }
        terms.push_back(t);
    }
    return glm::TermSpec::parse(terms);
}

inline ParametricSpecs saturated_specs(const data::CausalSchema& s) {
    using glm::default_family;
    ParametricSpecs p;
    p.L = {default_family(s.first_mediator().kind), saturated({"v", "d"})};
    p.X = {default_family(s.second_mediator().kind), saturated({"v", "d", "l"})};
    p.X_interventional = {default_family(s.second_mediator().kind), saturated({"v", "d"})};
    p.Y = {default_family(s.outcome().kind), saturated({"v", "d", "l", "x"})};
    return p;
}

// Specs from which the treatment is removed entirely.
inline ParametricSpecs treatment_free_specs(const data::CausalSchema& s) {
    using glm::default_family;
    ParametricSpecs p;
    p.L = {default_family(s.first_mediator().kind), glm::TermSpec::parse({"v"})};
    p.X = {default_family(s.second_mediator().kind), glm::TermSpec::parse({"v", "l"})};
    p.X_interventional = {default_family(s.second_mediator().kind), glm::TermSpec::parse({"v"})};
    p.Y = {default_family(s.outcome().kind), glm::TermSpec::parse({"v", "l", "x", "l*x"})};
    return p;
}

inline oracle::LinearGaussianDGP reference_linear_dgp() {
    oracle::LinearGaussianDGP g;
    g.d0 = -0.2;
    g.d1 = 0.8;
    g.a0 = 0.1;
    g.a1 = 0.4;
    g.a2 = 0.5;
    g.b0 = -0.3;
    g.b1 = 0.2;
    g.b2 = 0.3;
    g.b3 = 0.4;
    g.c0 = 0.5;
    g.c1 = 0.3;
    g.c2 = 0.2;
    g.c3 = 0.25;
    g.c4 = 0.6;
    return g;
}

inline ParametricSpecs linear_specs() {
    ParametricSpecs p;
    p.L = {glm::Family::gaussian, glm::TermSpec::parse({"v", "d"})};
    p.X = {glm::Family::gaussian, glm::TermSpec::parse({"v", "d", "l"})};
    p.X_interventional = {glm::Family::gaussian, glm::TermSpec::parse({"v", "d"})};
    p.Y = {glm::Family::gaussian, glm::TermSpec::parse({"v", "d", "l", "x"})};
    return p;
}

}  // namespace medsim::testing
