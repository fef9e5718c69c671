#include "medsim/sampling.hpp"

#include "medsim/error.hpp"
#include "medsim/rng.hpp"

#include <algorithm>

namespace medsim {

void Frame::set(const std::string& name, std::span<const double> column) {
    if (column.size() != rows_) throw Error(ErrorKind::internal, "frame column '" + name + "' has the wrong length");
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it != names_.end()) {
        columns_[static_cast<std::size_t>(it - names_.begin())] = column;
        return;
    }
    names_.push_back(name);
    columns_.push_back(column);
}

std::span<const double> Frame::get(const std::string& name) const {
    auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw SchemaError("record is missing variable '" + name + "'");
    return columns_[static_cast<std::size_t>(it - names_.begin())];
}

bool Frame::contains(const std::string& name) const {
    return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::span<const double> Innovations::logit() const {
    if (logit_.size() != u_.size()) {
        logit_.resize(u_.size());
        for (std::size_t i = 0; i < u_.size(); ++i) logit_[i] = medsim::logit(u_[i]);
    }
    return logit_;
}

std::span<const double> Innovations::normal() const {
    if (normal_.size() != u_.size()) {
        normal_.resize(u_.size());
        for (std::size_t i = 0; i < u_.size(); ++i) normal_[i] = normal_quantile(u_[i]);
    }
    return normal_;
}

}  // namespace medsim
