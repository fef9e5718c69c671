#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace medsim::data {

enum class KindTag { continuous, binary, ordinal, count };

// Variable type universe. Binary behaves as a two-level ordinal for storage
// but keeps its own tag.
struct VariableKind {
    KindTag tag = KindTag::continuous;
    int levels = 0;  // 2 for binary, K for ordinal, 0 otherwise

    static VariableKind continuous() { return {KindTag::continuous, 0}; }
    static VariableKind binary() { return {KindTag::binary, 2}; }
    static VariableKind ordinal(int k);
    static VariableKind count() { return {KindTag::count, 0}; }

    bool is_discrete() const { return tag != KindTag::continuous; }
    bool has_finite_support() const { return tag == KindTag::binary || tag == KindTag::ordinal; }
    bool in_support(double value) const;
    std::string to_string() const;

    friend bool operator==(const VariableKind&, const VariableKind&) = default;
};

// Parses "continuous", "binary", "count", "ordinal:K" (or "ordinal" with levels).
VariableKind parse_kind(const std::string& text, int levels = 0);

// Tolerance for accepting a stored discrete code as an integer.
inline constexpr double kIntegerTolerance = 1e-9;

struct Variable {
    std::string name;
    VariableKind kind;
};

// V (confounders), D (treatment) with contrast (d, d*), L then X (mediators in
// causal order) and Y (outcome). Immutable once constructed.
class CausalSchema {
public:
    CausalSchema(std::vector<Variable> confounders, Variable treatment, double d, double d_star,
                 Variable first_mediator, Variable second_mediator, Variable outcome);

    const std::vector<Variable>& confounders() const { return confounders_; }
    const Variable& treatment() const { return treatment_; }
    const Variable& first_mediator() const { return first_mediator_; }
    const Variable& second_mediator() const { return second_mediator_; }
    const Variable& outcome() const { return outcome_; }
    double d() const { return d_; }
    double d_star() const { return d_star_; }

    // Causal order: confounders..., D, L, X, Y.
    const std::vector<Variable>& variables() const { return all_; }
    std::optional<std::size_t> index_of(const std::string& name) const;
    const Variable& variable(const std::string& name) const;

    std::vector<std::string> confounder_names() const;

private:
    std::vector<Variable> confounders_;
    Variable treatment_;
    Variable first_mediator_;
    Variable second_mediator_;
    Variable outcome_;
    double d_;
    double d_star_;
    std::vector<Variable> all_;
};

// Column store aligned with schema.variables(). Validated at construction:
// complete, finite, every discrete value an exact code inside its support.
class CausalDataset {
public:
    CausalDataset(CausalSchema schema, std::vector<std::vector<double>> columns);

    const CausalSchema& schema() const { return schema_; }
    std::size_t n() const { return n_; }

    std::span<const double> column(std::size_t var) const { return columns_.at(var); }
    std::span<const double> column(const std::string& name) const;
    double value(std::size_t row, std::size_t var) const { return columns_[var][row]; }

    // Rows in the given order (with repeats), e.g. a bootstrap resample.
    CausalDataset select_rows(std::span<const std::size_t> rows) const;

private:
    CausalSchema schema_;
    std::vector<std::vector<double>> columns_;
    std::size_t n_ = 0;
};

CausalDataset read_csv(std::istream& in, const CausalSchema& schema);
CausalDataset load_csv(const std::filesystem::path& path, const CausalSchema& schema);

// Schema column order, shortest round-trip decimal representation.
void write_csv(std::ostream& out, const CausalDataset& ds);
void write_csv(const std::filesystem::path& path, const CausalDataset& ds);

struct VariableSummary {
    std::string name;
    VariableKind kind;
    std::size_t n = 0;
    double mean = 0.0;
    std::optional<double> sd;  // absent when n < 2
    double min = 0.0;
    double max = 0.0;
    std::map<long long, std::size_t> frequencies;  // discrete variables only
};

std::vector<VariableSummary> summarize(const CausalDataset& ds);
VariableSummary summarize_column(const Variable& var, std::span<const double> values);

}  // namespace medsim::data
