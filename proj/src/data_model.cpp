#include "medsim/data_model.hpp"

#include "medsim/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

namespace medsim::data {

VariableKind VariableKind::ordinal(int k) {
    if (k < 2) throw ConfigError("ordinal variables need at least 2 levels, got " + std::to_string(k));
    return {KindTag::ordinal, k};
}

bool VariableKind::in_support(double value) const {
    if (!std::isfinite(value)) return false;
    if (tag == KindTag::continuous) return true;
    const double code = std::round(value);
    if (std::abs(value - code) > kIntegerTolerance || code < 0) return false;
    if (tag == KindTag::count) return true;
    return code < levels;
}

std::string VariableKind::to_string() const {
    switch (tag) {
        case KindTag::continuous: return "continuous";
        case KindTag::binary: return "binary";
        case KindTag::ordinal: return "ordinal:" + std::to_string(levels);
        case KindTag::count: return "count";
    }
    return "?";
}

VariableKind parse_kind(const std::string& text, int levels) {
    if (text == "continuous") return VariableKind::continuous();
    if (text == "binary") return VariableKind::binary();
    if (text == "count") return VariableKind::count();
    if (text == "ordinal") return VariableKind::ordinal(levels);
    if (text.rfind("ordinal:", 0) == 0) {
        int k = 0;
        const char* first = text.data() + 8;
        const char* last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(first, last, k);
        if (ec != std::errc{} || ptr != last) throw ConfigError("bad ordinal level count in '" + text + "'");
        return VariableKind::ordinal(k);
    }
    throw ConfigError("unknown variable kind '" + text + "'");
}

CausalSchema::CausalSchema(std::vector<Variable> confounders, Variable treatment, double d,
                           double d_star, Variable first_mediator, Variable second_mediator,
                           Variable outcome)
    : confounders_(std::move(confounders)),
      treatment_(std::move(treatment)),
      first_mediator_(std::move(first_mediator)),
      second_mediator_(std::move(second_mediator)),
      outcome_(std::move(outcome)),
      d_(d),
      d_star_(d_star) {
    all_ = confounders_;
    all_.push_back(treatment_);
    all_.push_back(first_mediator_);
    all_.push_back(second_mediator_);
    all_.push_back(outcome_);

    std::set<std::string> seen;
    for (const auto& v : all_) {
        if (v.name.empty()) throw ConfigError("variable names must be non-empty");
        if (!seen.insert(v.name).second) throw ConfigError("duplicate variable name '" + v.name + "'");
    }
    if (d_ == d_star_) throw ConfigError("treatment contrast is degenerate: d == d*");
    if (!treatment_.kind.in_support(d_) || !treatment_.kind.in_support(d_star_)) {
        throw ConfigError("treatment contrast values must lie in the support of '" + treatment_.name + "'");
    }
}

std::optional<std::size_t> CausalSchema::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < all_.size(); ++i) {
        if (all_[i].name == name) return i;
    }
    return std::nullopt;
}

const Variable& CausalSchema::variable(const std::string& name) const {
    auto idx = index_of(name);
    if (!idx) throw SchemaError("unknown variable '" + name + "'");
    return all_[*idx];
}

std::vector<std::string> CausalSchema::confounder_names() const {
    std::vector<std::string> names;
    for (const auto& v : confounders_) names.push_back(v.name);
    return names;
}

CausalDataset::CausalDataset(CausalSchema schema, std::vector<std::vector<double>> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
    const auto& vars = schema_.variables();
    if (columns_.size() != vars.size()) {
        throw SchemaError("expected " + std::to_string(vars.size()) + " columns, got " +
                          std::to_string(columns_.size()));
    }
    n_ = columns_.front().size();
    if (n_ == 0) throw ValidationError("dataset has no rows");
    for (std::size_t v = 0; v < vars.size(); ++v) {
        auto& col = columns_[v];
        if (col.size() != n_) throw SchemaError("column '" + vars[v].name + "' has the wrong length");
        for (std::size_t r = 0; r < n_; ++r) {
            if (!vars[v].kind.in_support(col[r])) {
                std::ostringstream msg;
                msg << "value " << col[r] << " of '" << vars[v].name << "' at row " << r + 1
                    << " is outside the support of " << vars[v].kind.to_string();
                throw ValidationError(msg.str());
            }
            if (vars[v].kind.is_discrete()) col[r] = std::round(col[r]);
        }
    }
}

std::span<const double> CausalDataset::column(const std::string& name) const {
    auto idx = schema_.index_of(name);
    if (!idx) throw SchemaError("unknown variable '" + name + "'");
    return columns_[*idx];
}

CausalDataset CausalDataset::select_rows(std::span<const std::size_t> rows) const {
    std::vector<std::vector<double>> cols(columns_.size(), std::vector<double>(rows.size()));
    for (std::size_t v = 0; v < columns_.size(); ++v) {
        for (std::size_t i = 0; i < rows.size(); ++i) cols[v][i] = columns_[v].at(rows[i]);
    }
    return CausalDataset(schema_, std::move(cols));
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.push_back(trim(line.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

CausalDataset read_csv(std::istream& in, const CausalSchema& schema) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("CSV input is empty");
    if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);

    const auto header = split(line);
    const auto& vars = schema.variables();
    std::vector<std::size_t> source(vars.size());
    for (std::size_t v = 0; v < vars.size(); ++v) {
        auto it = std::find(header.begin(), header.end(), vars[v].name);
        if (it == header.end()) throw SchemaError("CSV is missing column '" + vars[v].name + "'");
        source[v] = static_cast<std::size_t>(it - header.begin());
    }

    std::vector<std::vector<double>> cols(vars.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto cells = split(line);
        if (cells.size() != header.size()) {
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                             std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
        }
        for (std::size_t v = 0; v < vars.size(); ++v) {
            const auto cell = cells[source[v]];
            if (cell.empty()) {
                throw ValidationError("line " + std::to_string(line_no) + ", column '" + vars[v].name +
                                      "': missing value (complete cases are required)");
            }
            double value = 0.0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
            if (ec != std::errc{} || ptr != cell.data() + cell.size() || !std::isfinite(value)) {
                throw ParseError("line " + std::to_string(line_no) + ", column '" + vars[v].name +
                                 "': cannot parse '" + std::string(cell) + "' as a number");
            }
            if (!vars[v].kind.in_support(value)) {
                throw ValidationError("line " + std::to_string(line_no) + ", column '" + vars[v].name +
                                      "': value " + std::string(cell) + " is outside the support of " +
                                      vars[v].kind.to_string());
            }
            cols[v].push_back(value);
        }
    }
    if (cols.front().empty()) throw ValidationError("CSV has a header but no data rows");
    return CausalDataset(schema, std::move(cols));
}

CausalDataset load_csv(const std::filesystem::path& path, const CausalSchema& schema) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open data file '" + path.string() + "'");
    return read_csv(in, schema);
}

void write_csv(std::ostream& out, const CausalDataset& ds) {
    const auto& vars = ds.schema().variables();
    for (std::size_t v = 0; v < vars.size(); ++v) out << (v ? "," : "") << vars[v].name;
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < ds.n(); ++r) {
        for (std::size_t v = 0; v < vars.size(); ++v) {
            auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, ds.value(r, v));
            if (v) out << ',';
            out.write(buf, ptr - buf);
        }
        out << '\n';
    }
}

void write_csv(const std::filesystem::path& path, const CausalDataset& ds) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::internal, "cannot write '" + path.string() + "'");
    write_csv(out, ds);
}

VariableSummary summarize_column(const Variable& var, std::span<const double> values) {
    VariableSummary s;
    s.name = var.name;
    s.kind = var.kind;
    s.n = values.size();
    if (values.empty()) return s;
    const double n = static_cast<double>(values.size());
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    s.min = *std::min_element(values.begin(), values.end());
    s.max = *std::max_element(values.begin(), values.end());
    if (values.size() >= 2) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.sd = std::sqrt(ss / (n - 1.0));
    }
    if (var.kind.is_discrete()) {
        for (double v : values) ++s.frequencies[std::llround(v)];
    }
    return s;
}

std::vector<VariableSummary> summarize(const CausalDataset& ds) {
    std::vector<VariableSummary> out;
    const auto& vars = ds.schema().variables();
    for (std::size_t v = 0; v < vars.size(); ++v) out.push_back(summarize_column(vars[v], ds.column(v)));
    return out;
}

}  // namespace medsim::data
