#pragma once

#include "medsim/data_model.hpp"
#include "medsim/flows/network.hpp"
#include "medsim/flows/quadrature.hpp"
#include "medsim/rng.hpp"
#include "medsim/sampling.hpp"

#include "json.hpp"

#include <Eigen/Dense>

#include <memory>
#include <span>
#include <string>
#include <vector>

namespace medsim::flows {

struct FlowArchitecture {
    std::vector<int> embedding_hidden{100, 90, 80, 70, 60};
    int embedding_dim = 10;
    std::vector<int> integrand_hidden{60, 50, 40, 30, 20};
    Activation integrand_activation = Activation::tanh;
    int quadrature_nodes = 32;

    void validate() const;
};

struct Standardization {
    double mean = 0.0;
    double sd = 1.0;

    double apply(double x) const { return (x - mean) / sd; }
    double invert(double z) const { return z * sd + mean; }
};

// Normal dequantization noise on the integer grid of a discrete target.
struct Dequantizer {
    double sigma = 0.1;

    double dequantize(double k, double standard_normal) const { return k + sigma * standard_normal; }
    // Nearest integer, clamped to [lo, hi] (hi < 0 means unbounded above).
    static double requantize(double value, double lo, double hi);
};

// Conditional UMNN flow for one target given its parents:
//   z = integral_0^l theta(t; c) dt + alpha(c),  c = embedding(parents),
// in standardized units of target and parents.
class FlowModel {
public:
    std::string target;
    data::VariableKind kind;
    std::vector<std::string> parents;
    FlowArchitecture arch;
    Standardization target_scale;
    std::vector<Standardization> parent_scale;
    Dequantizer dequantizer;
    MLP embedding;  // ReLU hidden layers, linear output of size embedding_dim
    MLP integrand;  // input [t, c], ELU-plus output
    Eigen::VectorXd offset_w;
    double offset_b = 0.0;
    QuadratureRule rule;

    bool discrete() const { return kind.is_discrete(); }
    std::size_t parameter_count() const;
};

// Fresh model with random weights drawn from RandomStream(seed) and identity standardization.
FlowModel make_flow(const std::string& target, const data::VariableKind& kind, std::vector<std::string> parents,
                    const FlowArchitecture& arch, std::uint64_t seed);

// Redraws every weight from RandomStream(seed).
void initialize_weights(FlowModel& m, std::uint64_t seed);

// Sets standardization constants from the data (an SD of zero maps to 1).
void fit_standardization(FlowModel& m, const data::CausalDataset& ds);

// Makes theta == 1 and alpha == 0, so z equals the standardized target.
void make_identity(FlowModel& m);

// Flat parameter vector: embedding layers, integrand layers (W column-major
// then b per layer), offset weights, offset bias.
std::vector<double> get_parameters(const FlowModel& m);
void set_parameters(FlowModel& m, std::span<const double> p);

struct ParameterGroups {
    std::size_t embedding = 0, integrand = 0, offset = 0;  // sizes, in layout order
};
ParameterGroups parameter_groups(const FlowModel& m);

// Standardized column matrices of a model's inputs.
Eigen::MatrixXd standardized_parents(const FlowModel& m, const Frame& frame);
Eigen::MatrixXd standardized_parents(const FlowModel& m, const data::CausalDataset& ds,
                                     std::span<const std::size_t> rows = {});

// Core batched evaluation in standardized space. c holds one embedding per column.
struct Embedding {
    Eigen::MatrixXd c;      // embedding_dim x B
    Eigen::VectorXd alpha;  // B
};
Embedding embed(const FlowModel& m, const Eigen::MatrixXd& parents_std);
// z for targets ell (standardized).
Eigen::VectorXd forward_std(const FlowModel& m, const Embedding& e, const Eigen::VectorXd& ell);
// theta(ell; c) per column.
Eigen::VectorXd integrand_std(const FlowModel& m, const Embedding& e, const Eigen::VectorXd& ell);
// ell with |forward(ell) - z| <= tol by batched bisection; throws RangeError
// when no bracket is found within 60 doublings of [-1, 1].
Eigen::VectorXd invert_std(const FlowModel& m, const Embedding& e, const Eigen::VectorXd& z, double tol = 1e-6);

// Mean negative log-density (original target units) over columns, with an
// optional gradient laid out as get_parameters.
double mean_nll(const FlowModel& m, const Eigen::MatrixXd& parents_std, const Eigen::VectorXd& ell,
                std::vector<double>* gradient = nullptr);

// Record-level API in original units. parents must contain every parent.
double flow_forward(const FlowModel& m, const Record& parents, double l);
double flow_log_density(const FlowModel& m, const Record& parents, double l);
double flow_invert(const FlowModel& m, const Record& parents, double z);
// Standard normal z from the stream, inverted by bisection, de-standardized,
// and for discrete targets rounded and clamped to the support.
double flow_sample(const FlowModel& m, const Record& parents, SequentialRng& rng);

// Batched sampling, one innovation per row. Discrete targets with finite
// support compare z with the forward map at the half-integer boundaries,
// which selects the same category as inverting and rounding.
void flow_sample(const FlowModel& m, const Frame& parents, const Innovations& innovations, std::span<double> out);

// Mean joint NLL of several flows on the given rows (all rows when empty), no dequantization noise.
double joint_nll(const std::vector<FlowModel>& models, const data::CausalDataset& ds,
                 std::span<const std::size_t> rows = {});

class FlowSampler final : public ConditionalSampler {
public:
    explicit FlowSampler(std::shared_ptr<const FlowModel> model) : model_(std::move(model)) {}

    const std::string& target() const override { return model_->target; }
    std::vector<std::string> conditioning() const override { return model_->parents; }
    void sample(const Frame& parents, const Innovations& innovations, std::span<double> out) const override {
        flow_sample(*model_, parents, innovations, out);
    }
    std::string kind() const override { return "flow"; }

    const FlowModel& model() const { return *model_; }

private:
    std::shared_ptr<const FlowModel> model_;
};

nlohmann::ordered_json to_json(const FlowModel& m);
FlowModel flow_from_json(const nlohmann::json& j);

}  // namespace medsim::flows
