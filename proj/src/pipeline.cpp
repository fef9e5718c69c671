#include "medsim/pipeline.hpp"

#include "medsim/error.hpp"
#include "medsim/parallel.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

namespace medsim::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string to_string(Engine e) { return e == Engine::parametric ? "parametric" : "flow"; }

std::string RunConfig::mode_name() const {
    if (modes.size() == 2) return "both";
    return medsim::to_string(modes.front());
}

bool RunConfig::has_mode(Mode m) const { return std::find(modes.begin(), modes.end(), m) != modes.end(); }

std::string Problem::to_string() const {
    return std::string(severity == Severity::error ? "error" : "warning") + (where.empty() ? "" : " [" + where + "]") +
           ": " + message;
}

int exit_code(ErrorKind kind) { return static_cast<int>(kind); }

namespace {

const std::set<std::string> kTopLevel{"spec_version", "data",    "schema", "engine", "mode",     "models",    "flow",
                                      "J",            "B",       "b",      "seed",   "threads",  "sd_units",  "output_dir"};
const std::set<std::string> kFlowKeys{"embedding_hidden", "embedding_dim", "integrand_hidden", "integrand_activation",
                                      "quadrature_nodes", "batch_size",    "learning_rate",    "max_epochs",
                                      "validation_fraction", "patience",   "restarts",         "dequantization_sigma"};

class Reader {
public:
    std::vector<Problem>& problems;

    void error(const std::string& where, const std::string& msg) { problems.push_back({Problem::Severity::error, where, msg}); }
    void warning(const std::string& where, const std::string& msg) {
        problems.push_back({Problem::Severity::warning, where, msg});
    }

    const json* find(const json& obj, const std::string& key, const std::string& where, bool required) {
        if (!obj.is_object()) return nullptr;
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) error(join(where, key), "is required");
            return nullptr;
        }
        return &*it;
    }

    std::optional<std::string> string(const json& obj, const std::string& key, const std::string& where,
                                      bool required = false) {
        const json* v = find(obj, key, where, required);
        if (!v) return std::nullopt;
        if (!v->is_string()) {
            error(join(where, key), "must be a string");
            return std::nullopt;
        }
        return v->get<std::string>();
    }

    std::optional<double> number(const json& obj, const std::string& key, const std::string& where, bool required = false) {
        const json* v = find(obj, key, where, required);
        if (!v) return std::nullopt;
        if (!v->is_number()) {
            error(join(where, key), "must be a number");
            return std::nullopt;
        }
        return v->get<double>();
    }

    // Non-negative integer.
    std::optional<std::uint64_t> count(const json& obj, const std::string& key, const std::string& where,
                                       bool required = false) {
        const json* v = find(obj, key, where, required);
        if (!v) return std::nullopt;
        if (v->is_number_unsigned()) return v->get<std::uint64_t>();
        if (v->is_number_integer() && v->get<std::int64_t>() >= 0) return static_cast<std::uint64_t>(v->get<std::int64_t>());
        if (v->is_number_float()) {
            const double d = v->get<double>();
            if (d >= 0 && d == std::floor(d) && d < 1.8e19) return static_cast<std::uint64_t>(d);
        }
        error(join(where, key), "must be a non-negative integer");
        return std::nullopt;
    }

    std::optional<bool> boolean(const json& obj, const std::string& key, const std::string& where) {
        const json* v = find(obj, key, where, false);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) {
            error(join(where, key), "must be true or false");
            return std::nullopt;
        }
        return v->get<bool>();
    }

    std::optional<std::vector<int>> widths(const json& obj, const std::string& key, const std::string& where) {
        const json* v = find(obj, key, where, false);
        if (!v) return std::nullopt;
        std::vector<int> out;
        if (v->is_array()) {
            for (const auto& x : *v) {
                if (!x.is_number_integer() || x.get<std::int64_t>() < 1 || x.get<std::int64_t>() > 100000) {
                    out.clear();
                    break;
                }
                out.push_back(static_cast<int>(x.get<std::int64_t>()));
            }
            if (out.size() == v->size()) return out;
        }
        error(join(where, key), "must be a list of positive layer widths");
        return std::nullopt;
    }

    static std::string join(const std::string& where, const std::string& key) {
        return where.empty() ? key : where + "." + key;
    }
};

std::optional<data::Variable> read_variable(Reader& rd, const json& obj, const std::string& where) {
    if (!obj.is_object()) {
        rd.error(where, "must be an object with 'name' and 'kind'");
        return std::nullopt;
    }
    const auto name = rd.string(obj, "name", where, true);
    const auto kind = rd.string(obj, "kind", where, true);
    const auto levels = rd.count(obj, "levels", where);
    if (!name || !kind) return std::nullopt;
    try {
        return data::Variable{*name, data::parse_kind(*kind, static_cast<int>(levels.value_or(0)))};
    } catch (const Error& e) {
        rd.error(Reader::join(where, "kind"), e.what());
        return std::nullopt;
    }
}

std::optional<data::CausalSchema> read_schema(Reader& rd, const json& doc) {
    const json* s = rd.find(doc, "schema", "", true);
    if (!s) return std::nullopt;
    if (!s->is_object()) {
        rd.error("schema", "must be an object");
        return std::nullopt;
    }
    bool ok = true;
    std::vector<data::Variable> confounders;
    const json* c = rd.find(*s, "confounders", "schema", true);
    if (c && !c->is_array()) {
        rd.error("schema.confounders", "must be a list of variables");
        ok = false;
    } else if (c) {
        for (std::size_t i = 0; i < c->size(); ++i) {
            auto v = read_variable(rd, (*c)[i], "schema.confounders[" + std::to_string(i) + "]");
            if (v) {
                confounders.push_back(*v);
            } else {
                ok = false;
            }
        }
    } else {
        ok = false;
    }
    std::array<std::optional<data::Variable>, 4> roles;
    const std::array<const char*, 4> keys{"treatment", "first_mediator", "second_mediator", "outcome"};
    for (std::size_t k = 0; k < 4; ++k) {
        const json* v = rd.find(*s, keys[k], "schema", true);
        if (v) roles[k] = read_variable(rd, *v, std::string("schema.") + keys[k]);
        ok = ok && roles[k].has_value();
    }
    const auto d = rd.number(*s, "d", "schema", true);
    const auto d_star = rd.number(*s, "d_star", "schema", true);
    if (d && d_star && *d == *d_star) {
        rd.error("schema", "the contrast is degenerate: d equals d* (" + std::to_string(*d) + ")");
        ok = false;
    }
    if (!ok || !d || !d_star) return std::nullopt;
    try {
        return data::CausalSchema(confounders, *roles[0], *d, *d_star, *roles[1], *roles[2], *roles[3]);
    } catch (const Error& e) {
        rd.error("schema", e.what());
        return std::nullopt;
    }
}

void read_model(Reader& rd, const json& models, const std::string& key, const data::CausalSchema& schema, Mode mode,
                int slot, ModelSpec& spec) {
    const std::string where = "models." + key;
    const json* m = rd.find(models, key, "models", false);
    if (!m) return;
    if (!m->is_object()) {
        rd.error(where, "must be an object with 'family' and 'terms'");
        return;
    }
    const std::array<const data::Variable*, 3> responses{&schema.first_mediator(), &schema.second_mediator(),
                                                         &schema.outcome()};
    const auto& response = *responses[static_cast<std::size_t>(slot)];
    if (const auto fam = rd.string(*m, "family", where)) {
        try {
            spec.family = glm::parse_family(*fam);
            if (!glm::compatible(spec.family, response.kind)) {
                rd.error(where + ".family", "family " + *fam + " cannot model the " + response.kind.to_string() +
                                                " variable '" + response.name + "'");
            }
        } catch (const Error& e) {
            rd.error(where + ".family", e.what());
        }
    }
    const json* t = rd.find(*m, "terms", where, false);
    if (!t) return;
    if (!t->is_array() || !std::all_of(t->begin(), t->end(), [](const json& x) { return x.is_string(); })) {
        rd.error(where + ".terms", "must be a list of term strings");
        return;
    }
    try {
        spec.terms = glm::TermSpec::parse(t->get<std::vector<std::string>>());
    } catch (const Error& e) {
        rd.error(where + ".terms", e.what());
        return;
    }
    const auto allowed = allowed_parents(schema, mode, slot);
    for (const auto& v : spec.terms.variables()) {
        if (std::find(allowed.begin(), allowed.end(), v) == allowed.end()) {
            rd.error(where + ".terms", "'" + v + "' is not a parent of '" + response.name + "' in " +
                                            medsim::to_string(mode) + " mode");
        }
    }
}

void read_flow(Reader& rd, const json& f, FlowSettings& out) {
    if (!f.is_object()) {
        rd.error("flow", "must be an object");
        return;
    }
    for (const auto& [k, v] : f.items()) {
        if (!kFlowKeys.count(k)) rd.warning("flow." + k, "unknown field, ignored");
    }
    auto& a = out.architecture;
    auto& t = out.training;
    if (auto w = rd.widths(f, "embedding_hidden", "flow")) a.embedding_hidden = *w;
    if (auto w = rd.widths(f, "integrand_hidden", "flow")) a.integrand_hidden = *w;
    if (auto v = rd.count(f, "embedding_dim", "flow")) a.embedding_dim = static_cast<int>(std::min<std::uint64_t>(*v, 100000));
    if (auto v = rd.count(f, "quadrature_nodes", "flow")) a.quadrature_nodes = static_cast<int>(std::min<std::uint64_t>(*v, 100000));
    if (auto v = rd.string(f, "integrand_activation", "flow")) {
        try {
            a.integrand_activation = flows::parse_activation(*v);
        } catch (const Error& e) {
            rd.error("flow.integrand_activation", e.what());
        }
    }
    if (auto v = rd.count(f, "batch_size", "flow")) t.batch_size = *v;
    if (auto v = rd.number(f, "learning_rate", "flow")) t.learning_rate = *v;
    if (auto v = rd.count(f, "max_epochs", "flow")) t.max_epochs = static_cast<int>(std::min<std::uint64_t>(*v, 1000000));
    if (auto v = rd.number(f, "validation_fraction", "flow")) t.validation_fraction = *v;
    if (auto v = rd.count(f, "patience", "flow")) t.patience = static_cast<int>(std::min<std::uint64_t>(*v, 1000000));
    if (auto v = rd.count(f, "restarts", "flow")) t.restarts = static_cast<int>(std::min<std::uint64_t>(*v, 100000));
    if (auto v = rd.number(f, "dequantization_sigma", "flow")) {
        out.dequantization_sigma = *v;
        if (!(*v > 0) || *v > 0.5) rd.error("flow.dequantization_sigma", "must lie in (0, 0.5]");
    }
    try {
        a.validate();
    } catch (const Error& e) {
        rd.error("flow", e.what());
    }
    try {
        t.validate();
    } catch (const Error& e) {
        rd.error("flow", e.what());
    }
}

ordered_json spec_json(const ModelSpec& s) {
    std::vector<std::string> terms;
    for (const auto& t : s.terms.terms()) terms.push_back(t.label());
    return {{"family", glm::to_string(s.family)}, {"terms", terms}};
}

ordered_json variable_json(const data::Variable& v) {
    ordered_json j{{"name", v.name}};
    if (v.kind.tag == data::KindTag::ordinal) {
        j["kind"] = "ordinal";
        j["levels"] = v.kind.levels;
    } else {
        j["kind"] = v.kind.to_string();
    }
    return j;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + p.string() + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double sample_sd(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return std::sqrt(ss / (n - 1.0));
}

std::string fmt(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

// One estimation pass plus the fitted models it used.
struct Pass {
    EffectReport report;
    std::vector<std::pair<std::string, glm::FittedGLM>> glms;
    std::vector<std::pair<std::string, flows::FlowModel>> flows;
    std::optional<flows::TrainReport> training;
};

std::vector<std::string> flow_names(const RunConfig& cfg) {
    std::vector<std::string> n{"L"};
    if (cfg.has_mode(Mode::natural_pse)) n.push_back("X");
    if (cfg.has_mode(Mode::interventional)) n.push_back("X_interventional");
    n.push_back("Y");
    return n;
}

Pass run_pass(const RunConfig& cfg, const data::CausalDataset& ds, const RandomStream& stream) {
    Pass pass;
    const double d = cfg.schema.d(), ds_ = cfg.schema.d_star();
    std::optional<EffectReport> natural, interventional;
    auto keep_glm = [&](const std::string& name, const std::shared_ptr<const ConditionalSampler>& s) {
        if (auto g = std::dynamic_pointer_cast<const GlmSampler>(s)) {
            for (const auto& [n, m] : pass.glms) {
                if (n == name) return;
            }
            pass.glms.emplace_back(name, g->model());
        }
    };

    if (cfg.engine == Engine::parametric) {
        const RowPlan plan{{}, cfg.J};
        for (Mode mode : cfg.modes) {
            const ModelBundle bundle = fit_parametric(ds, mode, cfg.specs);
            keep_glm("L", bundle.L);
            keep_glm(mode == Mode::natural_pse ? "X" : "X_interventional", bundle.X);
            keep_glm("Y", bundle.Y);
            const RandomStream sim = stream.derive(tags::simulate, static_cast<std::uint64_t>(mode));
            if (mode == Mode::natural_pse) {
                natural = estimate_natural_pse(bundle, ds, d, ds_, plan, sim);
            } else {
                interventional = estimate_interventional(bundle, ds, d, ds_, plan, sim);
            }
        }
    } else {
        auto flows = flows::make_bundle_flows(ds.schema(), cfg.modes, cfg.flow.architecture, 0);
        for (auto& f : flows) f.dequantizer.sigma = cfg.flow.dequantization_sigma;
        flows::TrainConfig tc = cfg.flow.training;
        tc.seed = stream.bits(tags::train, 0);
        auto trained = flows::train(std::move(flows), ds, tc);
        const RowPlan plan = subsample_plan(ds.n(), cfg.b, stream.derive(tags::subsample, 0));
        for (Mode mode : cfg.modes) {
            const ModelBundle bundle = flows::bundle_from_flows(ds.schema(), trained.models, mode);
            const RandomStream sim = stream.derive(tags::simulate, static_cast<std::uint64_t>(mode));
            if (mode == Mode::natural_pse) {
                natural = estimate_natural_pse(bundle, ds, d, ds_, plan, sim);
            } else {
                interventional = estimate_interventional(bundle, ds, d, ds_, plan, sim);
            }
        }
        const auto names = flow_names(cfg);
        for (std::size_t k = 0; k < names.size(); ++k) pass.flows.emplace_back(names[k], trained.models[k]);
        pass.training = std::move(trained.report);
    }

    if (natural && interventional) {
        pass.report = merge_reports(*natural, *interventional);
    } else {
        pass.report = natural ? *natural : *interventional;
    }
    pass.report.engine = to_string(cfg.engine);
    pass.report.seed = cfg.seed;
    if (cfg.engine == Engine::flow) pass.report.b = cfg.b;
    return pass;
}

std::string coefficients_csv(const std::vector<std::pair<std::string, glm::FittedGLM>>& glms) {
    std::ostringstream out;
    out << "model,response,family,parameter,value\n";
    for (const auto& [name, m] : glms) {
        const auto labels = m.terms.labels();
        for (std::size_t i = 0; i < m.coefficients.size(); ++i) {
            out << name << ',' << m.response << ',' << glm::to_string(m.family) << ',' << labels[i] << ','
                << fmt(m.coefficients[i]) << '\n';
        }
        for (std::size_t k = 0; k < m.thresholds.size(); ++k) {
            out << name << ',' << m.response << ',' << glm::to_string(m.family) << ",threshold " << (k + 1) << ','
                << fmt(m.thresholds[k]) << '\n';
        }
        if (m.family == glm::Family::gaussian) {
            out << name << ',' << m.response << ',' << glm::to_string(m.family) << ",sigma^2," << fmt(m.dispersion)
                << '\n';
        }
    }
    return out.str();
}

std::string bootstrap_csv(const BootstrapResult& boot) {
    std::ostringstream out;
    out << "replicate";
    std::vector<Estimand> keys;
    for (Estimand e : kAllEstimands) {
        if (boot.replicates.count(e)) {
            keys.push_back(e);
            out << ',' << key(e);
        }
    }
    out << '\n';
    std::size_t row = 0;
    for (std::size_t r = 0; r < boot.B; ++r) {
        if (std::find(boot.failed.begin(), boot.failed.end(), r) != boot.failed.end()) continue;
        out << r;
        for (Estimand e : keys) out << ',' << fmt(boot.replicates.at(e)[row]);
        out << '\n';
        ++row;
    }
    return out.str();
}

double seconds_since(std::chrono::steady_clock::time_point t) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

}  // namespace

ParsedConfig parse_config(const json& doc, const fs::path& base_dir) {
    ParsedConfig out;
    Reader rd{out.problems};
    if (!doc.is_object()) {
        rd.error("", "the config must be a JSON object");
        return out;
    }
    for (const auto& [k, v] : doc.items()) {
        if (!kTopLevel.count(k)) rd.warning(k, "unknown field, ignored");
    }
    if (const auto v = rd.count(doc, "spec_version", "", true); v && *v != kConfigVersion) {
        rd.error("spec_version", "unsupported config version " + std::to_string(*v) + " (expected " +
                                     std::to_string(kConfigVersion) + ")");
    }
    const auto data_path = rd.string(doc, "data", "", true);
    auto schema = read_schema(rd, doc);

    Engine engine = Engine::parametric;
    if (const auto e = rd.string(doc, "engine", "")) {
        if (*e == "parametric") {
            engine = Engine::parametric;
        } else if (*e == "flow") {
            engine = Engine::flow;
        } else {
            rd.error("engine", "must be 'parametric' or 'flow', not '" + *e + "'");
        }
    }
    std::vector<Mode> modes{Mode::natural_pse, Mode::interventional};
    if (const auto m = rd.string(doc, "mode", "")) {
        if (*m == "both") {
            modes = {Mode::natural_pse, Mode::interventional};
        } else {
            try {
                modes = {parse_mode(*m)};
            } catch (const Error&) {
                rd.error("mode", "must be 'natural-pse', 'interventional' or 'both', not '" + *m + "'");
            }
        }
    }

    std::optional<RunConfig> cfg;
    if (schema) cfg.emplace(*schema);
    RunConfig scratch = cfg ? *cfg : RunConfig(data::CausalSchema({{"v", data::VariableKind::continuous()}}, {"d", data::VariableKind::binary()}, 1, 0,
                                                                  {"l", data::VariableKind::continuous()},
                                                                  {"x", data::VariableKind::continuous()},
                                                                  {"y", data::VariableKind::continuous()}));
    RunConfig& c = cfg ? *cfg : scratch;
    c.engine = engine;
    c.modes = modes;

    if (const json* m = rd.find(doc, "models", "", false)) {
        if (engine == Engine::flow) {
            rd.warning("models", "GLM model specifications are ignored by the flow engine");
        } else if (!m->is_object()) {
            rd.error("models", "must be an object keyed by L, X, X_interventional and Y");
        } else if (schema) {
            for (const auto& [k, v] : m->items()) {
                if (k != "L" && k != "X" && k != "X_interventional" && k != "Y") rd.warning("models." + k, "unknown model, ignored");
            }
            read_model(rd, *m, "L", *schema, Mode::natural_pse, 0, c.specs.L);
            read_model(rd, *m, "X", *schema, Mode::natural_pse, 1, c.specs.X);
            read_model(rd, *m, "X_interventional", *schema, Mode::interventional, 1, c.specs.X_interventional);
            read_model(rd, *m, "Y", *schema, Mode::natural_pse, 2, c.specs.Y);
        }
    }
    if (const json* f = rd.find(doc, "flow", "", false)) {
        if (engine == Engine::parametric) rd.warning("flow", "flow settings are ignored by the parametric engine");
        read_flow(rd, *f, c.flow);
    }
    if (const auto v = rd.count(doc, "J", "")) {
        if (*v < 1) rd.error("J", "must be at least 1");
        c.J = *v;
    }
    if (const auto v = rd.count(doc, "B", "")) {
        if (*v == 1) rd.error("B", "must be 0 (no bootstrap) or at least 2");
        c.B = *v;
    }
    if (const auto v = rd.count(doc, "b", "")) {
        if (*v < 1) rd.error("b", "must be at least 1");
        c.b = *v;
    }
    if (const auto v = rd.count(doc, "seed", "")) c.seed = *v;
    if (const auto v = rd.count(doc, "threads", "")) c.threads = static_cast<int>(std::min<std::uint64_t>(*v, 4096));
    if (const auto v = rd.boolean(doc, "sd_units", "")) c.sd_units = *v;
    if (const auto v = rd.string(doc, "output_dir", "")) c.output_dir = base_dir / *v;
    if (data_path) c.data = base_dir / *data_path;

    for (const auto& p : out.problems) {
        if (p.severity == Problem::Severity::warning) c.warnings.push_back(p.to_string());
    }
    const bool failed = std::any_of(out.problems.begin(), out.problems.end(),
                                    [](const Problem& p) { return p.severity == Problem::Severity::error; });
    if (!failed && cfg) out.config = std::move(cfg);
    return out;
}

namespace {

ParsedConfig parse_file(const fs::path& path) {
    ParsedConfig out;
    std::string text;
    try {
        text = read_file(path);
    } catch (const Error& e) {
        out.problems.push_back({Problem::Severity::error, "", e.what()});
        return out;
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        out.problems.push_back({Problem::Severity::error, "", std::string("invalid JSON: ") + e.what()});
        return out;
    }
    return parse_config(doc, path.parent_path());
}

}  // namespace

std::vector<Problem> validate_file(const fs::path& path) {
    auto parsed = parse_file(path);
    if (parsed.config) {
        try {
            const auto ds = data::load_csv(parsed.config->data, parsed.config->schema);
            if (parsed.config->engine == Engine::flow && ds.n() < parsed.config->flow.training.warn_below_rows) {
                parsed.problems.push_back({Problem::Severity::warning, "data",
                                           "flow training on " + std::to_string(ds.n()) +
                                               " rows; tens of thousands are recommended"});
            }
        } catch (const Error& e) {
            parsed.problems.push_back({Problem::Severity::error, "data", e.what()});
        }
    }
    return parsed.problems;
}

RunConfig load_config(const fs::path& path) {
    auto parsed = parse_file(path);
    if (parsed.config) return std::move(*parsed.config);
    std::string msg = "invalid config '" + path.string() + "'";
    for (const auto& p : parsed.problems) {
        if (p.severity == Problem::Severity::error) msg += "\n  " + p.to_string();
    }
    throw ConfigError(msg);
}

ordered_json echo(const RunConfig& cfg) {
    ordered_json j;
    j["spec_version"] = kConfigVersion;
    j["data"] = fs::absolute(cfg.data).lexically_normal().string();
    ordered_json schema;
    auto conf = ordered_json::array();
    for (const auto& v : cfg.schema.confounders()) conf.push_back(variable_json(v));
    schema["confounders"] = conf;
    schema["treatment"] = variable_json(cfg.schema.treatment());
    schema["first_mediator"] = variable_json(cfg.schema.first_mediator());
    schema["second_mediator"] = variable_json(cfg.schema.second_mediator());
    schema["outcome"] = variable_json(cfg.schema.outcome());
    schema["d"] = cfg.schema.d();
    schema["d_star"] = cfg.schema.d_star();
    j["schema"] = schema;
    j["engine"] = to_string(cfg.engine);
    j["mode"] = cfg.mode_name();
    if (cfg.engine == Engine::parametric) {
        j["models"] = {{"L", spec_json(cfg.specs.L)},
                       {"X", spec_json(cfg.specs.X)},
                       {"X_interventional", spec_json(cfg.specs.X_interventional)},
                       {"Y", spec_json(cfg.specs.Y)}};
    } else {
        const auto& a = cfg.flow.architecture;
        const auto& t = cfg.flow.training;
        j["flow"] = {{"embedding_hidden", a.embedding_hidden},
                     {"embedding_dim", a.embedding_dim},
                     {"integrand_hidden", a.integrand_hidden},
                     {"integrand_activation", flows::to_string(a.integrand_activation)},
                     {"quadrature_nodes", a.quadrature_nodes},
                     {"batch_size", t.batch_size},
                     {"learning_rate", t.learning_rate},
                     {"max_epochs", t.max_epochs},
                     {"validation_fraction", t.validation_fraction},
                     {"patience", t.patience},
                     {"restarts", t.restarts},
                     {"dequantization_sigma", cfg.flow.dequantization_sigma}};
    }
    j["J"] = cfg.J;
    j["B"] = cfg.B;
    j["b"] = cfg.b;
    j["seed"] = cfg.seed;
    j["threads"] = cfg.threads;
    j["sd_units"] = cfg.sd_units;
    j["output_dir"] = fs::absolute(cfg.output_dir).lexically_normal().string();
    return j;
}

EffectReport estimate_once(const RunConfig& cfg, const data::CausalDataset& ds, const RandomStream& stream) {
    return run_pass(cfg, ds, stream).report;
}

RunResult run(const RunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    set_thread_count(static_cast<unsigned>(cfg.threads));
    RunResult result;
    result.warnings = cfg.warnings;

    const data::CausalDataset ds = [&] {
        try {
            return data::load_csv(cfg.data, cfg.schema);
        } catch (...) {
            rethrow_with_context("loading '" + cfg.data.string() + "'");
        }
    }();
    const double t_load = seconds_since(t0);

    const auto t1 = std::chrono::steady_clock::now();
    Pass pass = run_pass(cfg, ds, RandomStream(cfg.seed));
    const double t_estimate = seconds_since(t1);
    if (pass.training) {
        for (const auto& w : pass.training->warnings) result.warnings.push_back(w);
    }

    const auto t2 = std::chrono::steady_clock::now();
    EffectReport report = pass.report;
    BootstrapResult boot;
    if (cfg.B > 0) {
        const Estimator est = [&](const data::CausalDataset& rs, const RandomStream& s) {
            return estimate_once(cfg, rs, s).point_estimates();
        };
        boot = bootstrap(ds, est, cfg.B, cfg.seed);
        attach_intervals(report, boot);
        report.B = cfg.B;
        report.failed_replicates = boot.failed.size();
        report.failed_replicate_indices = boot.failed;
        if (!boot.failed.empty()) {
            result.warnings.push_back(std::to_string(boot.failed.size()) + " of " + std::to_string(cfg.B) +
                                      " bootstrap replicates failed and were skipped");
        }
        result.diagnostics["bootstrap_replicates.csv"] = bootstrap_csv(boot);
    }
    const double t_boot = seconds_since(t2);

    double outcome_sd = 1.0;
    if (cfg.sd_units) {
        outcome_sd = sample_sd(ds.column(cfg.schema.outcome().name));
        report = to_sd_units(std::move(report), outcome_sd);
    }
    result.report = report;

    ordered_json model_summary = ordered_json::object();
    for (const auto& [name, m] : pass.glms) {
        result.models[name + ".json"] = glm::to_json(m).dump(2) + "\n";
        model_summary[name] = {{"kind", "glm"},
                               {"response", m.response},
                               {"family", glm::to_string(m.family)},
                               {"converged", m.converged},
                               {"iterations", m.iterations},
                               {"log_likelihood", m.log_likelihood}};
    }
    if (!pass.glms.empty()) result.diagnostics["coefficients.csv"] = coefficients_csv(pass.glms);
    if (pass.training) {
        std::ostringstream curve;
        flows::write_training_curve(curve, *pass.training);
        result.diagnostics["training_curve.csv"] = curve.str();
        std::vector<std::size_t> tr, va;
        flows::TrainConfig tc = cfg.flow.training;
        tc.seed = RandomStream(cfg.seed).bits(tags::train, 0);
        flows::split_rows(ds.n(), tc, tr, va);
        for (const auto& [name, m] : pass.flows) {
            result.models[name + ".json"] = flows::to_json(m).dump() + "\n";
            std::ostringstream z;
            flows::write_transform_diagnostics(z, m, ds, va, cfg.seed);
            result.diagnostics["transform_" + name + ".csv"] = z.str();
            model_summary[name] = {{"kind", "flow"}, {"response", m.target}, {"parents", m.parents}};
        }
        model_summary["training"] = {{"best_restart", pass.training->best_restart},
                                     {"best_epoch", pass.training->best_epoch},
                                     {"best_validation_loss", pass.training->best_validation},
                                     {"restart_validation_losses", pass.training->restart_validation},
                                     {"n_train", pass.training->n_train},
                                     {"n_validation", pass.training->n_validation}};
    }

    ordered_json rr;
    rr["config"] = echo(cfg);
    rr["n"] = ds.n();
    if (cfg.sd_units) rr["outcome_sd"] = outcome_sd;
    rr["models"] = model_summary;
    rr["warnings"] = result.warnings;
    rr["timings_seconds"] = {{"load", t_load}, {"estimate", t_estimate}, {"bootstrap", t_boot}, {"total", seconds_since(t0)}};
    result.run_report = rr;
    return result;
}

void write_outputs(const RunResult& result, const fs::path& dir) {
    std::vector<fs::path> written;
    std::vector<fs::path> created;
    auto mkdir = [&](const fs::path& p) {
        if (!fs::exists(p)) {
            fs::create_directories(p);
            created.push_back(p);
        }
    };
    auto put = [&](const fs::path& p, const std::string& text) {
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorKind::internal, "cannot write '" + p.string() + "'");
        written.push_back(p);
        out << text;
        out.flush();
        if (!out) throw Error(ErrorKind::internal, "failed writing '" + p.string() + "'");
    };
    try {
        mkdir(dir);
        put(dir / "effects.json", to_json(result.report).dump(2) + "\n");
        put(dir / "effects.txt", format_table(result.report));
        mkdir(dir / "models");
        for (const auto& [name, text] : result.models) put(dir / "models" / name, text);
        mkdir(dir / "diagnostics");
        for (const auto& [name, text] : result.diagnostics) put(dir / "diagnostics" / name, text);
        put(dir / "run_report.json", result.run_report.dump(2) + "\n");
    } catch (...) {
        std::error_code ec;
        for (const auto& p : written) fs::remove(p, ec);
        for (auto it = created.rbegin(); it != created.rend(); ++it) fs::remove(*it, ec);
        throw;
    }
}

}  // namespace medsim::pipeline
