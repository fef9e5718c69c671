#include "medsim/estimate.hpp"

#include "medsim/error.hpp"
#include "medsim/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <sstream>

namespace medsim {

std::string to_string(Mode m) { return m == Mode::natural_pse ? "natural-pse" : "interventional"; }

Mode parse_mode(const std::string& text) {
    if (text == "natural-pse" || text == "natural") return Mode::natural_pse;
    if (text == "interventional") return Mode::interventional;
    throw ConfigError("unknown estimation mode '" + text + "'");
}

GlmSampler::GlmSampler(glm::FittedGLM model) : model_(std::move(model)) {}

void GlmSampler::sample(const Frame& parents, const Innovations& innovations, std::span<double> out) const {
    glm::sample(model_, parents, innovations, out);
}

std::vector<std::string> allowed_parents(const data::CausalSchema& schema, Mode mode, int slot) {
    std::vector<std::string> out = schema.confounder_names();
    out.push_back(schema.treatment().name);
    if (slot >= 1 && !(slot == 1 && mode == Mode::interventional)) out.push_back(schema.first_mediator().name);
    if (slot >= 2) out.push_back(schema.second_mediator().name);
    return out;
}

void ModelBundle::validate(const data::CausalSchema& schema) const {
    const std::array<const ConditionalSampler*, 3> models{L.get(), X.get(), Y.get()};
    const std::array<const data::Variable*, 3> targets{&schema.first_mediator(), &schema.second_mediator(),
                                                       &schema.outcome()};
    for (int slot = 0; slot < 3; ++slot) {
        const auto* m = models[static_cast<std::size_t>(slot)];
        const auto& want = targets[static_cast<std::size_t>(slot)]->name;
        if (!m) throw ConfigError("model bundle is missing the model for '" + want + "'");
        if (m->target() != want) {
            throw ConfigError("model bundle slot for '" + want + "' holds a model of '" + m->target() + "'");
        }
        const auto allowed = allowed_parents(schema, mode, slot);
        for (const auto& v : m->conditioning()) {
            if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
                throw ConfigError("model for '" + want + "' conditions on '" + v + "', which is not a parent in " +
                                  to_string(mode) + " mode");
            }
        }
    }
}

namespace {

constexpr std::size_t kDrawsPerChunk = std::size_t{1} << 15;

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

std::size_t position_count(const RowPlan& plan, std::size_t n) { return plan.rows.empty() ? n : plan.rows.size(); }

// Per-arm partial result of one chunk: shifted sums keep constant outcomes exact.
struct Partial {
    std::size_t count = 0;
    double first = 0.0;
    double deviation = 0.0;
};

Partial reduce(std::span<const double> y) {
    Partial p;
    p.count = y.size();
    p.first = y[0];
    for (double v : y) p.deviation += v - p.first;
    return p;
}

double combine(const std::vector<Partial>& parts) {
    const double ref = parts.front().first;
    double total = 0.0;
    std::size_t count = 0;
    for (const auto& p : parts) {
        total += p.deviation + static_cast<double>(p.count) * (p.first - ref);
        count += p.count;
    }
    return ref + total / static_cast<double>(count);
}

// One block of consecutive positions with all replicates, sharing innovations
// across every counterfactual arm.
class Chunk {
public:
    Chunk(const data::CausalDataset& ds, const RowPlan& plan, const RandomStream& stream, std::size_t p0,
          std::size_t p1)
        : ds_(ds), m_((p1 - p0) * plan.J), frame_(m_), innov_{make(stream, plan, p0, p1, kSlotL),
                                                               make(stream, plan, p0, p1, kSlotX),
                                                               make(stream, plan, p0, p1, kSlotY)} {
        const auto& schema = ds.schema();
        const std::size_t nconf = schema.confounders().size();
        confounders_.assign(nconf, std::vector<double>(m_));
        for (std::size_t p = p0; p < p1; ++p) {
            const std::size_t row = plan.rows.empty() ? p : plan.rows[p];
            for (std::size_t c = 0; c < nconf; ++c) {
                const double v = ds.value(row, c);
                const std::size_t base = (p - p0) * plan.J;
                std::fill_n(confounders_[c].begin() + static_cast<std::ptrdiff_t>(base), plan.J, v);
            }
        }
        for (std::size_t c = 0; c < nconf; ++c) frame_.set(schema.confounders()[c].name, confounders_[c]);
    }

    std::size_t size() const { return m_; }

    std::span<const double> treatment(double d) {
        for (auto& [v, col] : treatments_) {
            if (v == d) return col;
        }
        treatments_.emplace_back(d, std::vector<double>(m_, d));
        return treatments_.back().second;
    }

    // Draws the model's target with D = d and the given mediator columns bound.
    std::vector<double> draw(const ConditionalSampler& model, std::uint64_t slot, double d,
                             std::span<const double> l = {}, std::span<const double> x = {}) {
        const auto& schema = ds_.schema();
        frame_.set(schema.treatment().name, treatment(d));
        bind(schema.first_mediator().name, l);
        bind(schema.second_mediator().name, x);
        std::vector<double> out(m_);
        model.sample(frame_, innov_[slot], out);
        return out;
    }

private:
    static Innovations make(const RandomStream& stream, const RowPlan& plan, std::size_t p0, std::size_t p1,
                            std::uint64_t slot) {
        std::vector<double> u((p1 - p0) * plan.J);
        std::size_t k = 0;
        for (std::size_t p = p0; p < p1; ++p) {
            for (std::size_t j = 0; j < plan.J; ++j) u[k++] = stream.uniform(tags::simulate, p, j, slot);
        }
        return Innovations(std::move(u));
    }

    void bind(const std::string& name, std::span<const double> col) {
        // An unbound mediator keeps a NaN column so an illegal dependence cannot go unnoticed.
        if (col.empty()) {
            if (nan_.empty()) nan_.assign(m_, std::numeric_limits<double>::quiet_NaN());
            col = nan_;
        }
        frame_.set(name, col);
    }

    const data::CausalDataset& ds_;
    std::size_t m_;
    Frame frame_;
    std::array<Innovations, 3> innov_;
    std::vector<std::vector<double>> confounders_;
    std::vector<std::pair<double, std::vector<double>>> treatments_;
    std::vector<double> nan_;
};

template <class Key, class Value>
Value* find_cached(std::vector<std::pair<Key, Value>>& cache, const Key& k) {
    for (auto& [key, v] : cache) {
        if (key == k) return &v;
    }
    return nullptr;
}

struct ArmDraws {
    std::vector<double> L, X, Y;
};

// Runs every natural arm on one chunk; L and X draws are shared between arms
// with the same upstream assignment.
std::vector<ArmDraws> natural_chunk(const ModelBundle& b, Chunk& chunk, std::span<const PsiAssignment> arms,
                                    bool keep) {
    std::vector<std::pair<double, std::vector<double>>> lcache;
    std::vector<std::pair<std::pair<double, double>, std::vector<double>>> xcache;
    std::vector<ArmDraws> out;
    for (const auto& a : arms) {
        auto* l = find_cached(lcache, a.d1);
        if (!l) {
            lcache.emplace_back(a.d1, chunk.draw(*b.L, kSlotL, a.d1));
            l = &lcache.back().second;
        }
        auto* x = find_cached(xcache, std::pair{a.d1, a.d2});
        if (!x) {
            xcache.emplace_back(std::pair{a.d1, a.d2}, chunk.draw(*b.X, kSlotX, a.d2, *l));
            x = &xcache.back().second;
        }
        ArmDraws d;
        d.Y = chunk.draw(*b.Y, kSlotY, a.d3, *l, *x);
        if (keep) {
            d.L = *l;
            d.X = *x;
        }
        out.push_back(std::move(d));
    }
    return out;
}

// Interventional arms: L depends on d2 only; the randomized X draw depends on d1
// and never sees L.
std::vector<ArmDraws> interventional_chunk(const ModelBundle& b, Chunk& chunk,
                                           std::span<const LambdaAssignment> arms, bool keep) {
    std::vector<std::pair<double, std::vector<double>>> lcache, xcache;
    std::vector<ArmDraws> out;
    for (const auto& a : arms) {
        auto* l = find_cached(lcache, a.d2);
        if (!l) {
            lcache.emplace_back(a.d2, chunk.draw(*b.L, kSlotL, a.d2));
            l = &lcache.back().second;
        }
        auto* x = find_cached(xcache, a.d1);
        if (!x) {
            xcache.emplace_back(a.d1, chunk.draw(*b.X, kSlotX, a.d1));
            x = &xcache.back().second;
        }
        ArmDraws d;
        d.Y = chunk.draw(*b.Y, kSlotY, a.d2, *l, *x);
        if (keep) {
            d.L = *l;
            d.X = *x;
        }
        out.push_back(std::move(d));
    }
    return out;
}

template <class Assignment, class Kernel>
std::vector<double> simulate_means(const ModelBundle& bundle, const data::CausalDataset& ds,
                                   std::span<const Assignment> arms, const RowPlan& plan, const RandomStream& stream,
                                   Mode expected, Kernel kernel) {
    if (bundle.mode != expected) {
        throw ConfigError("simulation needs a " + to_string(expected) + " bundle, got " + to_string(bundle.mode));
    }
    if (plan.J < 1) throw ConfigError("J must be at least 1");
    if (arms.empty()) return {};
    bundle.validate(ds.schema());
    const std::size_t positions = position_count(plan, ds.n());
    if (positions == 0) throw ConfigError("simulation plan has no rows");
    for (std::size_t r : plan.rows) {
        if (r >= ds.n()) throw Error(ErrorKind::internal, "simulation plan refers to a row past the dataset end");
    }

    const std::size_t per_chunk = std::max<std::size_t>(1, kDrawsPerChunk / plan.J);
    const std::size_t chunks = (positions + per_chunk - 1) / per_chunk;
    std::vector<std::vector<Partial>> parts(chunks);
    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t p0 = c * per_chunk, p1 = std::min(positions, p0 + per_chunk);
        try {
            Chunk chunk(ds, plan, stream, p0, p1);
            auto draws = kernel(bundle, chunk, arms, false);
            auto& out = parts[c];
            for (const auto& d : draws) out.push_back(reduce(d.Y));
        } catch (...) {
            rethrow_with_context("simulating positions " + std::to_string(p0) + ".." + std::to_string(p1 - 1) +
                                 " (replicates 0.." + std::to_string(plan.J - 1) + ")");
        }
    });

    std::vector<double> means(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) {
        std::vector<Partial> column;
        column.reserve(chunks);
        for (const auto& p : parts) column.push_back(p[a]);
        means[a] = combine(column);
    }
    return means;
}

template <class Assignment, class Kernel>
RowDraws row_draws(const ModelBundle& bundle, const data::CausalDataset& ds, std::size_t row,
                   const Assignment& a, std::size_t J, const RandomStream& stream, Kernel kernel) {
    if (row >= ds.n()) throw ConfigError("row index past the dataset end");
    if (J < 1) throw ConfigError("J must be at least 1");
    bundle.validate(ds.schema());
    RowPlan plan;
    plan.J = J;
    plan.rows.resize(row + 1);
    plan.rows[row] = row;
    Chunk chunk(ds, plan, stream, row, row + 1);
    auto draws = kernel(bundle, chunk, std::span<const Assignment>(&a, 1), true);
    return {std::move(draws[0].L), std::move(draws[0].X), std::move(draws[0].Y)};
}

std::string assignment_label(const char* name, std::initializer_list<double> values) {
    std::string s = name;
    s += '(';
    bool first = true;
    for (double v : values) {
        if (!first) s += ',';
        s += fmt(v);
        first = false;
    }
    return s + ')';
}

RowPlan full_plan(std::size_t J) {
    RowPlan p;
    p.J = J;
    return p;
}

}  // namespace

std::vector<double> simulate_psi(const ModelBundle& bundle, const data::CausalDataset& ds,
                                 std::span<const PsiAssignment> assignments, const RowPlan& plan,
                                 const RandomStream& stream) {
    return simulate_means(bundle, ds, assignments, plan, stream, Mode::natural_pse, natural_chunk);
}

std::vector<double> simulate_lambda(const ModelBundle& bundle, const data::CausalDataset& ds,
                                    std::span<const LambdaAssignment> assignments, const RowPlan& plan,
                                    const RandomStream& stream) {
    return simulate_means(bundle, ds, assignments, plan, stream, Mode::interventional, interventional_chunk);
}

double simulate_psi(const ModelBundle& bundle, const data::CausalDataset& ds, const PsiAssignment& a,
                    std::size_t J, const RandomStream& stream) {
    return simulate_psi(bundle, ds, std::span<const PsiAssignment>(&a, 1), full_plan(J), stream)[0];
}

double simulate_lambda(const ModelBundle& bundle, const data::CausalDataset& ds, const LambdaAssignment& a,
                       std::size_t J, const RandomStream& stream) {
    return simulate_lambda(bundle, ds, std::span<const LambdaAssignment>(&a, 1), full_plan(J), stream)[0];
}

RowDraws simulate_row_draws(const ModelBundle& bundle, const data::CausalDataset& ds, std::size_t row,
                            const PsiAssignment& a, std::size_t J, const RandomStream& stream) {
    if (bundle.mode != Mode::natural_pse) throw ConfigError("natural draws need a natural-pse bundle");
    return row_draws(bundle, ds, row, a, J, stream, natural_chunk);
}

RowDraws simulate_row_draws(const ModelBundle& bundle, const data::CausalDataset& ds, std::size_t row,
                            const LambdaAssignment& a, std::size_t J, const RandomStream& stream) {
    if (bundle.mode != Mode::interventional) throw ConfigError("interventional draws need an interventional bundle");
    return row_draws(bundle, ds, row, a, J, stream, interventional_chunk);
}

RowPlan subsample_plan(std::size_t n, std::size_t b, const RandomStream& stream, bool resample) {
    if (b < 1) throw ConfigError("subsample size b must be at least 1");
    if (!resample && b > n) throw ConfigError("without resampling b cannot exceed the row count");
    RowPlan plan;
    plan.J = 1;
    plan.rows.resize(b);
    for (std::size_t p = 0; p < b; ++p) plan.rows[p] = resample ? stream.index(n, tags::subsample, p) : p;
    return plan;
}

EffectMap EffectReport::point_estimates() const {
    EffectMap out;
    for (const auto& [k, v] : effects) out[k] = v.estimate;
    return out;
}

EffectReport estimate_natural_pse(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                  double d_star, const RowPlan& plan, const RandomStream& stream) {
    const auto arms = natural_assignments(d, d_star);
    const auto m = simulate_psi(bundle, ds, arms, plan, stream);
    EffectReport r;
    r.mode = "natural-pse";
    r.d = d;
    r.d_star = d_star;
    r.J = plan.J;
    for (auto [k, v] : natural_contrasts({m[0], m[1], m[2], m[3]})) r.effects[k].estimate = v;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        r.means.emplace_back(assignment_label("psi", {arms[i].d1, arms[i].d2, arms[i].d3}), m[i]);
    }
    return r;
}

EffectReport estimate_interventional(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                     double d_star, const RowPlan& plan, const RandomStream& stream) {
    const auto arms = interventional_assignments(d, d_star);
    const auto m = simulate_lambda(bundle, ds, arms, plan, stream);
    EffectReport r;
    r.mode = "interventional";
    r.d = d;
    r.d_star = d_star;
    r.J = plan.J;
    for (auto [k, v] : interventional_contrasts({m[0], m[1], m[2]})) r.effects[k].estimate = v;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        r.means.emplace_back(assignment_label("lambda", {arms[i].d1, arms[i].d2}), m[i]);
    }
    return r;
}

EffectReport estimate_natural_pse(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                  double d_star, std::size_t J, const RandomStream& stream) {
    return estimate_natural_pse(bundle, ds, d, d_star, full_plan(J), stream);
}

EffectReport estimate_interventional(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                     double d_star, std::size_t J, const RandomStream& stream) {
    return estimate_interventional(bundle, ds, d, d_star, full_plan(J), stream);
}

EffectReport merge_reports(const EffectReport& natural, const EffectReport& interventional) {
    EffectReport r = natural;
    r.mode = "both";
    for (const auto& [k, v] : interventional.effects) r.effects[k] = v;
    r.means.insert(r.means.end(), interventional.means.begin(), interventional.means.end());
    return r;
}

EffectReport to_sd_units(EffectReport report, double outcome_sd) {
    if (!(outcome_sd > 0) || !std::isfinite(outcome_sd)) {
        throw ConfigError("outcome SD must be positive and finite to rescale effects");
    }
    for (auto& [k, e] : report.effects) {
        e.estimate /= outcome_sd;
        if (e.lower) *e.lower /= outcome_sd;
        if (e.upper) *e.upper /= outcome_sd;
    }
    report.scale = Scale::sd_units;
    return report;
}

nlohmann::ordered_json to_json(const EffectReport& r) {
    nlohmann::ordered_json j;
    j["mode"] = r.mode;
    j["engine"] = r.engine;
    j["scale"] = r.scale == Scale::raw ? "raw" : "sd-units";
    j["contrast"] = {{"d", r.d}, {"d_star", r.d_star}};
    j["J"] = r.J;
    j["b"] = r.b;
    j["B"] = r.B;
    j["seed"] = r.seed;
    nlohmann::ordered_json effects = nlohmann::ordered_json::object();
    for (Estimand e : kAllEstimands) {
        auto it = r.effects.find(e);
        if (it == r.effects.end()) continue;
        nlohmann::ordered_json x;
        x["estimate"] = it->second.estimate;
        if (it->second.lower) x["lower"] = *it->second.lower;
        if (it->second.upper) x["upper"] = *it->second.upper;
        effects[std::string(key(e))] = x;
    }
    j["effects"] = effects;
    nlohmann::ordered_json means = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.means) means[k] = v;
    j["means"] = means;
    if (r.B > 0) {
        j["bootstrap"] = {{"replicates", r.B},
                          {"failed", r.failed_replicates},
                          {"failed_indices", r.failed_replicate_indices},
                          {"widened", r.widened}};
    }
    return j;
}

std::string format_table(const EffectReport& r) {
    std::ostringstream out;
    const bool cis = std::any_of(r.effects.begin(), r.effects.end(), [](const auto& kv) { return kv.second.lower.has_value(); });
    out << "Effects of d = " << fmt(r.d) << " versus d* = " << fmt(r.d_star);
    if (r.scale == Scale::sd_units) out << " (standard deviation units)";
    out << "\n";
    auto line = [&](Estimand e) {
        auto it = r.effects.find(e);
        if (it == r.effects.end()) return;
        out << "  " << std::left << std::setw(14) << label(e) << std::right << std::fixed << std::setprecision(4)
            << std::setw(10) << it->second.estimate;
        if (it->second.lower && it->second.upper) {
            out << "   [" << std::setw(8) << *it->second.lower << ", " << std::setw(8) << *it->second.upper << "]";
        }
        out << "\n";
    };
    out << std::left << std::setw(16) << "" << std::right << std::setw(10) << "Estimate";
    if (cis) out << "   95% interval";
    out << "\n";
    if (r.effects.count(Estimand::OE)) {
        out << "Interventional effects\n";
        for (Estimand e : {Estimand::OE, Estimand::IDE, Estimand::IIE}) line(e);
    }
    if (r.effects.count(Estimand::ATE)) {
        out << "Natural and path-specific effects\n";
        for (Estimand e : {Estimand::ATE, Estimand::MNDE, Estimand::MNIE, Estimand::PSE_DY, Estimand::PSE_DLY,
                           Estimand::PSE_DXY}) {
            line(e);
        }
    }
    out << "J = " << r.J;
    if (r.b) out << ", b = " << r.b;
    out << ", B = " << r.B << ", seed = " << r.seed << "\n";
    return out.str();
}

double quantile(std::vector<double> values, double p) {
    if (values.empty()) throw Error(ErrorKind::internal, "quantile of an empty sample");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

BootstrapResult bootstrap(const data::CausalDataset& ds, const Estimator& estimator, std::size_t B,
                          std::uint64_t seed) {
    if (B < 2) throw ConfigError("bootstrap needs B >= 2 replicates");
    const RandomStream root(seed);
    const std::size_t n = ds.n();
    std::vector<std::optional<EffectMap>> results(B);
    std::vector<std::string> reasons(B);
    parallel_for(B, [&](std::size_t r) {
        const RandomStream resample = root.derive(tags::bootstrap, r);
        std::vector<std::size_t> rows(n);
        for (std::size_t i = 0; i < n; ++i) rows[i] = resample.index(n, tags::bootstrap, i);
        const auto boot = ds.select_rows(rows);
        try {
            results[r] = estimator(boot, root.derive(tags::replicate, r));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::fit && e.kind() != ErrorKind::divergence) throw;
            reasons[r] = e.what();
        }
    });

    BootstrapResult out;
    out.B = B;
    for (std::size_t r = 0; r < B; ++r) {
        if (!results[r]) {
            out.failed.push_back(r);
            continue;
        }
        for (const auto& [k, v] : *results[r]) out.replicates[k].push_back(v);
    }
    if (static_cast<double>(out.failed.size()) > 0.05 * static_cast<double>(B)) {
        throw FitError(std::to_string(out.failed.size()) + " of " + std::to_string(B) +
                       " bootstrap replicates failed (more than 5%); first failure: " + reasons[out.failed.front()]);
    }
    for (const auto& [k, v] : out.replicates) out.intervals[k] = {quantile(v, 0.025), quantile(v, 0.975)};
    return out;
}

void attach_intervals(EffectReport& report, const BootstrapResult& boot) {
    report.B = boot.B;
    report.failed_replicates = boot.failed.size();
    report.failed_replicate_indices = boot.failed;
    for (auto& [k, e] : report.effects) {
        auto it = boot.intervals.find(k);
        if (it == boot.intervals.end()) continue;
        double lo = it->second.first, hi = it->second.second;
        if (e.estimate < lo || e.estimate > hi) {
            lo = std::min(lo, e.estimate);
            hi = std::max(hi, e.estimate);
            report.widened.emplace_back(key(k));
        }
        e.lower = lo;
        e.upper = hi;
    }
}

ParametricSpecs default_specs(const data::CausalSchema& schema) {
    auto main_effects = [&](Mode mode, int slot) {
        std::vector<std::string> t = allowed_parents(schema, mode, slot);
        return glm::TermSpec::parse(t);
    };
    ParametricSpecs s;
    s.L = {glm::default_family(schema.first_mediator().kind), main_effects(Mode::natural_pse, 0)};
    s.X = {glm::default_family(schema.second_mediator().kind), main_effects(Mode::natural_pse, 1)};
    s.X_interventional = {glm::default_family(schema.second_mediator().kind), main_effects(Mode::interventional, 1)};
    s.Y = {glm::default_family(schema.outcome().kind), main_effects(Mode::natural_pse, 2)};
    return s;
}

ModelBundle fit_parametric(const data::CausalDataset& ds, Mode mode, const ParametricSpecs& specs,
                           const glm::FitOptions& options) {
    const auto& schema = ds.schema();
    auto fit = [&](const ModelSpec& spec, const std::string& response) -> std::shared_ptr<const ConditionalSampler> {
        try {
            return std::make_shared<GlmSampler>(glm::fit_mle(spec.family, spec.terms, response, ds, options));
        } catch (...) {
            rethrow_with_context("fitting the model for '" + response + "'");
        }
    };
    ModelBundle b;
    b.mode = mode;
    b.L = fit(specs.L, schema.first_mediator().name);
    b.X = fit(mode == Mode::natural_pse ? specs.X : specs.X_interventional, schema.second_mediator().name);
    b.Y = fit(specs.Y, schema.outcome().name);
    b.validate(schema);
    return b;
}

}  // namespace medsim
