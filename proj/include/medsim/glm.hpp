#pragma once

#include "medsim/data_model.hpp"
#include "medsim/rng.hpp"
#include "medsim/sampling.hpp"

#include "json.hpp"

#include <span>
#include <string>
#include <vector>

namespace medsim::glm {

enum class Family { gaussian, bernoulli_logit, ordinal_logit, poisson_log };

std::string to_string(Family f);
Family parse_family(const std::string& text);

// Whether a response of this kind can be modelled by the family.
bool compatible(Family f, const data::VariableKind& kind);

// Default family for a response kind.
Family default_family(const data::VariableKind& kind);

struct Factor {
    std::string variable;
    int power = 1;

    friend bool operator==(const Factor&, const Factor&) = default;
};

// A product of variable powers, e.g. d*l or l^2.
struct Term {
    std::vector<Factor> factors;

    std::string label() const;
    friend bool operator==(const Term&, const Term&) = default;
};

// Parses "d", "l^2", "d*l", "d:l" and "d*x^2".
Term parse_term(const std::string& text);

// Linear predictor: implicit intercept followed by the declared terms.
class TermSpec {
public:
    TermSpec() = default;
    explicit TermSpec(std::vector<Term> terms);
    static TermSpec parse(const std::vector<std::string>& terms);

    const std::vector<Term>& terms() const { return terms_; }
    std::size_t width() const { return terms_.size() + 1; }
    std::vector<std::string> labels() const;      // "(Intercept)", then term labels
    std::vector<std::string> variables() const;   // distinct, in first-use order
    bool references(const std::string& variable) const;

private:
    std::vector<Term> terms_;
};

// [1, term values...] in declared order.
std::vector<double> design_row(const TermSpec& terms, const Record& record);

struct FitOptions {
    int max_iterations = 100;
    double gradient_tolerance = 1e-8;
    double relative_tolerance = 1e-10;
};

struct FittedGLM {
    Family family = Family::gaussian;
    TermSpec terms;
    std::string response;
    // Aligned with design_row. For ordinal-logit the intercept is absorbed
    // into the thresholds and held at zero.
    std::vector<double> coefficients;
    double dispersion = 0.0;          // gaussian sigma^2 (MLE, divides by n)
    std::vector<double> thresholds;   // ordinal-logit: K-1 strictly increasing cut points
    double log_likelihood = 0.0;
    double gradient_norm = 0.0;       // max-norm at the reported parameters
    bool converged = false;
    int iterations = 0;
    std::size_t n = 0;

    int levels() const { return static_cast<int>(thresholds.size()) + 1; }
    double linear_predictor(const Record& record) const;
    // Event/category probabilities (bernoulli: {P(0), P(1)}; ordinal: K levels).
    std::vector<double> probabilities(const Record& record) const;
    double mean(const Record& record) const;
};

FittedGLM fit_mle(Family family, const TermSpec& terms, const std::string& response,
                  const data::CausalDataset& ds, const FitOptions& options = {});

// Independent pointwise log-likelihood of a fitted model on a dataset.
double log_likelihood(const FittedGLM& model, const data::CausalDataset& ds);

// One draw from the fitted conditional distribution, consuming one uniform.
double sample(const FittedGLM& model, const Record& record, double uniform);
double sample(const FittedGLM& model, const Record& record, SequentialRng& rng);

// Linear predictor for every row of a frame.
void linear_predictor(const FittedGLM& model, const Frame& frame, std::span<double> eta);

// Batched draws: out[i] uses innovations[i]. Bitwise identical to the scalar path.
void sample(const FittedGLM& model, const Frame& frame, const Innovations& innovations,
            std::span<double> out);

nlohmann::ordered_json to_json(const FittedGLM& model);
FittedGLM glm_from_json(const nlohmann::json& j);

}  // namespace medsim::glm
