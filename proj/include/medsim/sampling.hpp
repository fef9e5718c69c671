#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace medsim {

// A named record, e.g. {"v": 0.3, "d": 1}.
using Record = std::map<std::string, double>;

// Non-owning set of equally long named columns; the unit of batched sampling.
class Frame {
public:
    explicit Frame(std::size_t rows) : rows_(rows) {}

    std::size_t rows() const { return rows_; }
    void set(const std::string& name, std::span<const double> column);
    std::span<const double> get(const std::string& name) const;
    bool contains(const std::string& name) const;

private:
    std::size_t rows_;
    std::vector<std::string> names_;
    std::vector<std::span<const double>> columns_;
};

// One uniform innovation per draw, with derived transforms cached on first
// use. Samplers consume exactly one innovation per draw; reusing the same
// Innovations across counterfactual arms gives common random numbers.
class Innovations {
public:
    explicit Innovations(std::vector<double> uniforms) : u_(std::move(uniforms)) {}

    std::size_t size() const { return u_.size(); }
    std::span<const double> uniform() const { return u_; }
    std::span<const double> logit() const;   // log(u / (1 - u))
    std::span<const double> normal() const;  // standard normal quantile of u

private:
    std::vector<double> u_;
    mutable std::vector<double> logit_;
    mutable std::vector<double> normal_;
};

// A fitted conditional distribution of one target given named parents, drawn
// in batches. Implementations are immutable and safe to share across threads.
class ConditionalSampler {
public:
    virtual ~ConditionalSampler() = default;

    virtual const std::string& target() const = 0;
    // Variables the draw actually depends on.
    virtual std::vector<std::string> conditioning() const = 0;
    // out[i] is drawn given row i of the frame and consumes innovations[i].
    virtual void sample(const Frame& parents, const Innovations& innovations, std::span<double> out) const = 0;
    virtual std::string kind() const = 0;
};

}  // namespace medsim
