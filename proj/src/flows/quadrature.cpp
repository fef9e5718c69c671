#include "medsim/flows/quadrature.hpp"

#include "medsim/error.hpp"

#include <cmath>

namespace medsim::flows {

QuadratureRule clenshaw_curtis(int N) {
    if (N < 1) throw ConfigError("quadrature needs at least one node");
    QuadratureRule r;
    r.N = N;
    if (N == 1) {
        r.nodes = {0.0};
        r.weights = {2.0};
        return r;
    }
    const int n = N - 1;
    r.nodes.resize(static_cast<std::size_t>(N));
    r.weights.resize(static_cast<std::size_t>(N));
    for (int k = 0; k <= n; ++k) {
        const double theta = M_PI * k / n;
        // Exact zero at the centre keeps the rule symmetric.
        r.nodes[static_cast<std::size_t>(k)] = 2 * k == n ? 0.0 : std::cos(theta);
        double s = 0.0;
        for (int j = 1; j <= n / 2; ++j) {
            const double b = (2 * j == n) ? 1.0 : 2.0;
            s += b / (4.0 * j * j - 1.0) * std::cos(2.0 * j * theta);
        }
        const double c = (k == 0 || k == n) ? 1.0 : 2.0;
        r.weights[static_cast<std::size_t>(k)] = c / n * (1.0 - s);
    }
    return r;
}

void QuadratureRule::map_to(double l, std::vector<double>& t, std::vector<double>& w) const {
    t.resize(nodes.size());
    w.resize(nodes.size());
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        t[k] = 0.5 * l * (nodes[k] + 1.0);
        w[k] = 0.5 * l * weights[k];
    }
}

double quadrature_integrate(const std::function<double(double)>& f, const QuadratureRule& rule, double l) {
    double s = 0.0;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) s += rule.weights[k] * f(0.5 * l * (rule.nodes[k] + 1.0));
    return 0.5 * l * s;
}

}  // namespace medsim::flows
