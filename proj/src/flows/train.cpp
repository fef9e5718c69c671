#include "medsim/flows/train.hpp"

#include "medsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace medsim::flows {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr std::uint64_t kInitTag = hash_tag("flow-init");
constexpr std::uint64_t kNoiseTag = hash_tag("dequantize");
constexpr std::uint64_t kValidationNoiseTag = hash_tag("validation-noise");
constexpr std::uint64_t kShuffleTag = hash_tag("shuffle");
constexpr std::uint64_t kSplitTag = hash_tag("split");

struct Prepared {
    MatrixXd parents;           // standardized parents, one column per row
    std::vector<double> raw;    // raw targets
};

Prepared prepare(const FlowModel& m, const data::CausalDataset& ds, const std::vector<std::size_t>& rows) {
    Prepared p;
    p.parents = standardized_parents(m, ds, rows);
    const auto col = ds.column(m.target);
    p.raw.reserve(rows.size());
    for (std::size_t r : rows) p.raw.push_back(col[r]);
    return p;
}

// Standardized targets; discrete ones get normal dequantization noise from stream addressed by row.
VectorXd targets(const FlowModel& m, const Prepared& p, const RandomStream& noise, std::uint64_t model_index) {
    VectorXd ell(static_cast<Index>(p.raw.size()));
    for (std::size_t i = 0; i < p.raw.size(); ++i) {
        double v = p.raw[i];
        if (m.discrete()) v = m.dequantizer.dequantize(v, noise.normal(kNoiseTag, i, model_index));
        ell[static_cast<Index>(i)] = m.target_scale.apply(v);
    }
    return ell;
}

struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::vector<double> m, v;
    long long t = 0;

    explicit Adam(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    void step(std::vector<double>& theta, const std::vector<double>& g, double lr) {
        ++t;
        const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            theta[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

bool all_finite(const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

struct Snapshot {
    std::vector<std::vector<double>> params;
    double validation = std::numeric_limits<double>::infinity();
    int epoch = -1;
};

struct Diverged {
    long long batch;
};

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("flow batch size must be at least 1");
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) throw ConfigError("flow learning rate must be positive");
    if (max_epochs < 1) throw ConfigError("flow max_epochs must be at least 1");
    if (!(validation_fraction > 0 && validation_fraction < 1)) {
        throw ConfigError("flow validation fraction must lie strictly between 0 and 1");
    }
    if (patience < 1) throw ConfigError("flow patience must be at least 1");
    if (restarts < 1) throw ConfigError("flow restart count must be at least 1");
    if (max_halvings < 0) throw ConfigError("flow max_halvings must be non-negative");
}

void split_rows(std::size_t n, const TrainConfig& cfg, std::vector<std::size_t>& train_rows,
                std::vector<std::size_t>& validation_rows) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    SequentialRng rng(RandomStream(cfg.seed), kSplitTag);
    std::shuffle(perm.begin(), perm.end(), rng);
    auto nv = static_cast<std::size_t>(std::llround(cfg.validation_fraction * static_cast<double>(n)));
    nv = std::clamp<std::size_t>(nv, n > 1 ? 1 : 0, n > 1 ? n - 1 : 0);
    validation_rows.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(nv));
    train_rows.assign(perm.begin() + static_cast<std::ptrdiff_t>(nv), perm.end());
    std::sort(validation_rows.begin(), validation_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
}

TrainResult train(std::vector<FlowModel> models, const data::CausalDataset& ds, const TrainConfig& cfg) {
    cfg.validate();
    if (models.empty()) throw ConfigError("no flows to train");
    TrainResult result;
    TrainReport& report = result.report;

    std::vector<std::size_t> train_rows, val_rows;
    split_rows(ds.n(), cfg, train_rows, val_rows);
    if (train_rows.empty() || val_rows.empty()) throw ConfigError("too few rows to split into training and validation sets");
    report.n_train = train_rows.size();
    report.n_validation = val_rows.size();
    if (ds.n() < cfg.warn_below_rows) {
        report.warnings.push_back("flow training on " + std::to_string(ds.n()) + " rows; at least " +
                                  std::to_string(cfg.warn_below_rows) + " are recommended");
    }

    std::vector<Prepared> tr, va;
    for (auto& m : models) {
        fit_standardization(m, ds);
        tr.push_back(prepare(m, ds, train_rows));
        va.push_back(prepare(m, ds, val_rows));
    }
    const RandomStream root(cfg.seed);
    const std::size_t K = models.size();
    const std::size_t nt = train_rows.size();
    const std::size_t batches = (nt + cfg.batch_size - 1) / cfg.batch_size;

    Snapshot overall;
    for (int r = 0; r < cfg.restarts; ++r) {
        std::vector<VectorXd> val_ell;
        const RandomStream val_noise = root.derive(kValidationNoiseTag, static_cast<std::uint64_t>(r));
        for (std::size_t k = 0; k < K; ++k) val_ell.push_back(targets(models[k], va[k], val_noise, k));

        double lr0 = cfg.learning_rate;
        Snapshot best;
        for (int attempt = 0;; ++attempt) {
            for (std::size_t k = 0; k < K; ++k) {
                initialize_weights(models[k], root.bits(kInitTag, static_cast<std::uint64_t>(r), k));
            }
            std::vector<std::vector<double>> theta;
            std::vector<Adam> adam;
            for (const auto& m : models) {
                theta.push_back(get_parameters(m));
                adam.emplace_back(theta.back().size());
            }
            best = Snapshot{};
            int since_best = 0;
            try {
                for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
                    const double lr = lr0 * 0.5 * (1.0 + std::cos(M_PI * epoch / cfg.max_epochs));
                    const RandomStream ep = root.derive(kNoiseTag, (static_cast<std::uint64_t>(r) << 40) ^
                                                                       (static_cast<std::uint64_t>(attempt) << 32) ^
                                                                       static_cast<std::uint64_t>(epoch));
                    std::vector<VectorXd> ell;
                    for (std::size_t k = 0; k < K; ++k) ell.push_back(targets(models[k], tr[k], ep, k));
                    std::vector<Index> perm(nt);
                    std::iota(perm.begin(), perm.end(), Index{0});
                    SequentialRng shuffle(ep, kShuffleTag);
                    std::shuffle(perm.begin(), perm.end(), shuffle);

                    double train_sum = 0.0;
                    std::vector<double> grad;
                    for (std::size_t b = 0; b < batches; ++b) {
                        const std::size_t lo = b * cfg.batch_size, hi = std::min(nt, lo + cfg.batch_size);
                        const std::vector<Index> idx(perm.begin() + static_cast<std::ptrdiff_t>(lo),
                                                     perm.begin() + static_cast<std::ptrdiff_t>(hi));
                        const long long batch_index = static_cast<long long>(epoch) * static_cast<long long>(batches) +
                                                      static_cast<long long>(b);
                        double loss = 0.0;
                        for (std::size_t k = 0; k < K; ++k) {
                            const MatrixXd P = tr[k].parents(Eigen::all, idx);
                            const VectorXd l = ell[k](idx);
                            loss += mean_nll(models[k], P, l, &grad);
                            if (!std::isfinite(loss) || !all_finite(grad)) throw Diverged{batch_index};
                            adam[k].step(theta[k], grad, lr);
                        }
                        for (std::size_t k = 0; k < K; ++k) set_parameters(models[k], theta[k]);
                        train_sum += loss * static_cast<double>(hi - lo);
                    }
                    double val = 0.0;
                    for (std::size_t k = 0; k < K; ++k) val += mean_nll(models[k], va[k].parents, val_ell[k]);
                    if (!std::isfinite(val)) {
                        throw Diverged{static_cast<long long>(epoch + 1) * static_cast<long long>(batches) - 1};
                    }
                    report.epochs.push_back({r, attempt, epoch, lr, train_sum / static_cast<double>(nt), val});
                    if (val < best.validation) {
                        best.validation = val;
                        best.epoch = epoch;
                        best.params = theta;
                        since_best = 0;
                    } else if (++since_best >= cfg.patience) {
                        break;
                    }
                }
                break;
            } catch (const Diverged& d) {
                if (attempt >= cfg.max_halvings) {
                    throw TrainingError("non-finite flow training loss at mini-batch " + std::to_string(d.batch) +
                                            " of restart " + std::to_string(r) + " after " +
                                            std::to_string(cfg.max_halvings) + " learning-rate halvings",
                                        d.batch);
                }
                lr0 *= 0.5;
                report.warnings.push_back("restart " + std::to_string(r) + " diverged at mini-batch " +
                                          std::to_string(d.batch) + "; retrying with learning rate " +
                                          std::to_string(lr0));
            }
        }
        report.restart_validation.push_back(best.validation);
        if (best.validation < overall.validation) {
            overall = std::move(best);
            report.best_restart = r;
        }
    }

    for (std::size_t k = 0; k < K; ++k) set_parameters(models[k], overall.params[k]);
    report.best_epoch = overall.epoch;
    report.best_validation = overall.validation;
    result.models = std::move(models);
    return result;
}

void write_training_curve(std::ostream& out, const TrainReport& report) {
    out << "restart,attempt,epoch,learning_rate,train_loss,validation_loss\n";
    out.precision(17);
    for (const auto& e : report.epochs) {
        out << e.restart << ',' << e.attempt << ',' << e.epoch << ',' << e.learning_rate << ',' << e.train_loss << ','
            << e.validation_loss << '\n';
    }
}

void write_transform_diagnostics(std::ostream& out, const FlowModel& m, const data::CausalDataset& ds,
                                 std::span<const std::size_t> rows, std::uint64_t seed) {
    std::vector<std::size_t> all;
    if (rows.empty()) {
        all.resize(ds.n());
        std::iota(all.begin(), all.end(), std::size_t{0});
        rows = all;
    }
    const std::vector<std::size_t> r(rows.begin(), rows.end());
    const Prepared p = prepare(m, ds, r);
    const VectorXd ell = targets(m, p, RandomStream(seed), 0);
    const VectorXd z = forward_std(m, embed(m, p.parents), ell);
    out << "original,dequantized,transformed\n";
    out.precision(17);
    for (std::size_t i = 0; i < r.size(); ++i) {
        out << p.raw[i] << ',' << m.target_scale.invert(ell[static_cast<Index>(i)]) << ',' << z[static_cast<Index>(i)]
            << '\n';
    }
}

std::vector<FlowModel> make_bundle_flows(const data::CausalSchema& schema, std::span<const Mode> modes,
                                         const FlowArchitecture& arch, std::uint64_t seed) {
    if (modes.empty()) throw ConfigError("no estimation mode selected");
    auto has = [&](Mode m) { return std::find(modes.begin(), modes.end(), m) != modes.end(); };
    const Mode first = modes.front();
    std::vector<FlowModel> out;
    auto add = [&](const data::Variable& v, Mode mode, int slot) {
        out.push_back(make_flow(v.name, v.kind, allowed_parents(schema, mode, slot), arch,
                                seed + static_cast<std::uint64_t>(out.size())));
    };
    add(schema.first_mediator(), first, static_cast<int>(kSlotL));
    if (has(Mode::natural_pse)) add(schema.second_mediator(), Mode::natural_pse, static_cast<int>(kSlotX));
    if (has(Mode::interventional)) add(schema.second_mediator(), Mode::interventional, static_cast<int>(kSlotX));
    add(schema.outcome(), first, static_cast<int>(kSlotY));
    return out;
}

ModelBundle bundle_from_flows(const data::CausalSchema& schema, const std::vector<FlowModel>& flows, Mode mode) {
    const std::array<const data::Variable*, 3> targets{&schema.first_mediator(), &schema.second_mediator(),
                                                       &schema.outcome()};
    std::array<std::shared_ptr<const ConditionalSampler>, 3> slots;
    for (int slot = 0; slot < 3; ++slot) {
        const auto& name = targets[static_cast<std::size_t>(slot)]->name;
        const auto parents = allowed_parents(schema, mode, slot);
        const auto it = std::find_if(flows.begin(), flows.end(),
                                     [&](const FlowModel& f) { return f.target == name && f.parents == parents; });
        if (it == flows.end()) {
            throw ConfigError("no trained flow for '" + name + "' with the conditioning set of " + to_string(mode) +
                              " mode");
        }
        slots[static_cast<std::size_t>(slot)] = std::make_shared<FlowSampler>(std::make_shared<const FlowModel>(*it));
    }
    ModelBundle b{mode, slots[0], slots[1], slots[2]};
    b.validate(schema);
    return b;
}

}  // namespace medsim::flows
