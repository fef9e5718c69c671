#include "medsim/rng.hpp"

#include <boost/math/special_functions/erf.hpp>

namespace medsim {

double normal_quantile(double u) {
    return -1.4142135623730950488 * boost::math::erfc_inv(2.0 * u);
}

}  // namespace medsim
