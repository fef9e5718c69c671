#pragma once

#include <functional>
#include <vector>

namespace medsim::flows {

// Clenshaw-Curtis rule on the reference interval [-1, 1].
struct QuadratureRule {
    int N = 0;
    std::vector<double> nodes;    // cos(k pi / (N - 1)), descending
    std::vector<double> weights;  // sum to 2

    // Node positions and weights mapped to [0, l]; l may be negative.
    void map_to(double l, std::vector<double>& t, std::vector<double>& w) const;
};

// N >= 1 nodes; N = 1 is the midpoint rule.
QuadratureRule clenshaw_curtis(int N);

// Integral of f over [0, l], oriented so that l < 0 gives -(integral over [l, 0]).
double quadrature_integrate(const std::function<double(double)>& f, const QuadratureRule& rule, double l);

}  // namespace medsim::flows
