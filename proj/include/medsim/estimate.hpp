#pragma once

#include "medsim/data_model.hpp"
#include "medsim/estimands.hpp"
#include "medsim/glm.hpp"
#include "medsim/rng.hpp"
#include "medsim/sampling.hpp"

#include "json.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace medsim {

enum class Mode { natural_pse, interventional };

std::string to_string(Mode m);
Mode parse_mode(const std::string& text);

// Adapter exposing a FittedGLM through the sampler interface.
class GlmSampler final : public ConditionalSampler {
public:
    explicit GlmSampler(glm::FittedGLM model);

    const std::string& target() const override { return model_.response; }
    std::vector<std::string> conditioning() const override { return model_.terms.variables(); }
    void sample(const Frame& parents, const Innovations& innovations, std::span<double> out) const override;
    std::string kind() const override { return "glm:" + glm::to_string(model_.family); }

    const glm::FittedGLM& model() const { return model_; }

private:
    glm::FittedGLM model_;
};

// Fitted L, X and Y models for one estimation mode. In natural-pse mode X is
// modelled given (V, D, L); in interventional mode given (V, D) only.
struct ModelBundle {
    Mode mode = Mode::natural_pse;
    std::shared_ptr<const ConditionalSampler> L, X, Y;

    // Throws ConfigError when a target or conditioning set does not match the mode.
    void validate(const data::CausalSchema& schema) const;
};

// Allowed parents of each model under the mode, in schema order.
std::vector<std::string> allowed_parents(const data::CausalSchema& schema, Mode mode, int slot);

// Innovation slots within an (row, replicate) address.
inline constexpr std::uint64_t kSlotL = 0, kSlotX = 1, kSlotY = 2;

// Which dataset rows drive the simulation. Simulation position p uses row
// rows[p] (or p itself when rows is empty) and replicates 0..J-1; innovations
// are addressed by (tags::simulate, p, j, slot).
struct RowPlan {
    std::vector<std::size_t> rows;
    std::size_t J = 1;
};

// Sequential simulation under several assignments sharing one set of
// innovations. Each returned mean is the grand average over positions and
// replicates. Results are independent of the thread count.
std::vector<double> simulate_psi(const ModelBundle& bundle, const data::CausalDataset& ds,
                                 std::span<const PsiAssignment> assignments, const RowPlan& plan,
                                 const RandomStream& stream);
std::vector<double> simulate_lambda(const ModelBundle& bundle, const data::CausalDataset& ds,
                                    std::span<const LambdaAssignment> assignments, const RowPlan& plan,
                                    const RandomStream& stream);

double simulate_psi(const ModelBundle& bundle, const data::CausalDataset& ds, const PsiAssignment& a,
                    std::size_t J, const RandomStream& stream);
double simulate_lambda(const ModelBundle& bundle, const data::CausalDataset& ds, const LambdaAssignment& a,
                       std::size_t J, const RandomStream& stream);

// Raw draws for one dataset row across J replicates (for diagnostics and tests).
struct RowDraws {
    std::vector<double> L, X, Y;
};
RowDraws simulate_row_draws(const ModelBundle& bundle, const data::CausalDataset& ds, std::size_t row,
                            const PsiAssignment& a, std::size_t J, const RandomStream& stream);
RowDraws simulate_row_draws(const ModelBundle& bundle, const data::CausalDataset& ds, std::size_t row,
                            const LambdaAssignment& a, std::size_t J, const RandomStream& stream);

// b positions drawn with replacement (tags::subsample), one replicate each.
// With resample = false the positions are the first b rows in order.
RowPlan subsample_plan(std::size_t n, std::size_t b, const RandomStream& stream, bool resample = true);

enum class Scale { raw, sd_units };

struct EffectEstimate {
    double estimate = 0.0;
    std::optional<double> lower, upper;
};

struct EffectReport {
    std::map<Estimand, EffectEstimate> effects;
    std::vector<std::pair<std::string, double>> means;  // e.g. "psi(0,0,1)"
    Scale scale = Scale::raw;
    std::string mode;    // natural-pse | interventional | both
    std::string engine;  // parametric | flow
    double d = 1.0, d_star = 0.0;
    std::size_t J = 0;   // replicates per row (1 under subsampling)
    std::size_t b = 0;   // subsample size, 0 when every row is simulated
    std::size_t B = 0;
    std::uint64_t seed = 0;
    std::size_t failed_replicates = 0;
    std::vector<std::size_t> failed_replicate_indices;
    std::vector<std::string> widened;  // estimands whose interval was widened to cover the point

    EffectMap point_estimates() const;
};

EffectReport estimate_natural_pse(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                  double d_star, const RowPlan& plan, const RandomStream& stream);
EffectReport estimate_interventional(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                     double d_star, const RowPlan& plan, const RandomStream& stream);
// Convenience overloads: every row, J replicates.
EffectReport estimate_natural_pse(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                  double d_star, std::size_t J, const RandomStream& stream);
EffectReport estimate_interventional(const ModelBundle& bundle, const data::CausalDataset& ds, double d,
                                     double d_star, std::size_t J, const RandomStream& stream);

// Combines two reports of the same run; effects and means are concatenated.
EffectReport merge_reports(const EffectReport& natural, const EffectReport& interventional);

// Dividing every estimate and bound by the outcome SD. Marginal means stay raw.
EffectReport to_sd_units(EffectReport report, double outcome_sd);

nlohmann::ordered_json to_json(const EffectReport& report);
std::string format_table(const EffectReport& report);

// Runs the full estimation pipeline on one dataset. The stream belongs to the
// replicate; implementations must draw all randomness from it.
using Estimator = std::function<EffectMap(const data::CausalDataset&, const RandomStream&)>;

struct BootstrapResult {
    std::size_t B = 0;
    std::map<Estimand, std::pair<double, double>> intervals;  // 2.5 / 97.5 percentiles
    std::map<Estimand, std::vector<double>> replicates;      // successful replicates, index order
    std::vector<std::size_t> failed;
};

// Replicate r resamples rows with RandomStream(seed).derive(tags::bootstrap, r)
// and runs the estimator with RandomStream(seed).derive(tags::replicate, r).
// Replicates whose model fit or training fails are skipped; more than 5%
// failures raise FitError.
BootstrapResult bootstrap(const data::CausalDataset& ds, const Estimator& estimator, std::size_t B,
                          std::uint64_t seed);

// Type-7 (linear interpolation) sample quantile.
double quantile(std::vector<double> values, double p);

// Attaches intervals; any interval not covering its point is widened to do so.
void attach_intervals(EffectReport& report, const BootstrapResult& boot);

// Parametric model specifications and fitting of a full bundle.
struct ModelSpec {
    glm::Family family = glm::Family::gaussian;
    glm::TermSpec terms;
};

struct ParametricSpecs {
    ModelSpec L, X, X_interventional, Y;
};

// Main effects of every allowed parent with the response's default family.
ParametricSpecs default_specs(const data::CausalSchema& schema);

ModelBundle fit_parametric(const data::CausalDataset& ds, Mode mode, const ParametricSpecs& specs,
                           const glm::FitOptions& options = {});

}  // namespace medsim
