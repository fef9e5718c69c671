#include "medsim/error.hpp"

#include <exception>

namespace medsim {

void rethrow_with_context(const std::string& context) {
    try {
        throw;
    } catch (const Error& e) {
        throw Error(e.kind(), context + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(ErrorKind::internal, context + ": " + e.what());
    }
}

}  // namespace medsim
