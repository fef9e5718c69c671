// Acceptance suite: one PASS/FAIL line per criterion.
//   acceptance            criteria 1-6 and 9
//   acceptance --slow     criteria 7 and 8
//   acceptance --only 3,6 selected criteria

#include "helpers.hpp"

#include "medsim/error.hpp"
#include "medsim/flows/flow.hpp"
#include "medsim/flows/train.hpp"
#include "medsim/parallel.hpp"
#include "medsim/pipeline.hpp"

#include "CLI11.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

using namespace medsim;
using namespace medsim::testing;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;     // measured values, always printed
    std::vector<std::string> failures;  // reasons for FAIL

    void check(bool ok, const std::string& what) {
        if (!ok) {
            pass = false;
            failures.push_back(what);
        }
    }
    void note(const std::string& s) { notes.push_back(s); }
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << x;
    return s.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("medsim-acceptance-" + std::to_string(::getpid())) / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

const oracle::DiscreteDGP& binary() {
    static const auto g = fixture("binary_dgp.json");
    return g;
}

// ---------------------------------------------------------------------------
// 1. Decomposition identities

double identity_residual(const EffectMap& e) {
    double worst = 0.0;
    const auto has = [&](Estimand k) { return e.count(k) > 0; };
    if (has(Estimand::ATE)) {
        worst = std::max(worst, std::abs(e.at(Estimand::ATE) - (e.at(Estimand::MNDE) + e.at(Estimand::MNIE))));
        worst = std::max(worst, std::abs(e.at(Estimand::ATE) - (e.at(Estimand::PSE_DY) + e.at(Estimand::PSE_DXY) +
                                                                 e.at(Estimand::PSE_DLY))));
    }
    if (has(Estimand::OE)) {
        worst = std::max(worst, std::abs(e.at(Estimand::OE) - (e.at(Estimand::IDE) + e.at(Estimand::IIE))));
    }
    return worst;
}

void criterion_identities(Outcome& out) {
    double worst = 0.0;
    std::size_t runs = 0;
    const auto record = [&](const EffectMap& e) {
        worst = std::max(worst, identity_residual(e));
        ++runs;
    };

    struct Case {
        std::string name;
        data::CausalDataset ds;
        ParametricSpecs specs;
    };
    std::vector<Case> cases;
    {
        auto ds = oracle::sample_dataset(binary(), 5000, 1);
        auto specs = saturated_specs(ds.schema());
        cases.push_back({"binary", std::move(ds), std::move(specs)});
    }
    {
        auto ds = oracle::sample_dataset(fixture("ordinal_dgp.json"), 5000, 2);
        auto specs = default_specs(ds.schema());
        cases.push_back({"ordinal", std::move(ds), std::move(specs)});
    }
    {
        auto ds = oracle::sample_dataset(reference_linear_dgp(), 5000, 3);
        cases.push_back({"linear", std::move(ds), linear_specs()});
    }
    {
        auto g = reference_linear_dgp();
        auto ds = oracle::sample_dataset(g, 5000, 4, 0.0, 1.0);  // reversed contrast
        cases.push_back({"linear-reversed", std::move(ds), linear_specs()});
    }

    for (const auto& c : cases) {
        const auto& s = c.ds.schema();
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto nat = estimate_natural_pse(fit_parametric(c.ds, Mode::natural_pse, c.specs), c.ds, s.d(),
                                                  s.d_star(), 20, RandomStream(seed));
            const auto itv = estimate_interventional(fit_parametric(c.ds, Mode::interventional, c.specs), c.ds,
                                                     s.d(), s.d_star(), 20, RandomStream(seed));
            record(merge_reports(nat, itv).point_estimates());
            record(to_sd_units(merge_reports(nat, itv), 1.7).point_estimates());
        }

        // Every bootstrap replicate of the full pipeline.
        pipeline::RunConfig cfg(s);
        cfg.specs = c.specs;
        cfg.J = 10;
        const Estimator est = [&](const data::CausalDataset& rs, const RandomStream& st) {
            return pipeline::estimate_once(cfg, rs, st).point_estimates();
        };
        const auto boot = bootstrap(c.ds, est, 20, 11);
        for (std::size_t r = 0; r < boot.replicates.begin()->second.size(); ++r) {
            EffectMap e;
            for (const auto& [k, v] : boot.replicates) e[k] = v[r];
            record(e);
        }
    }

    // Flow engine.
    pipeline::RunConfig cfg(cases[2].ds.schema());
    cfg.engine = pipeline::Engine::flow;
    cfg.flow.architecture.embedding_hidden = {16, 16};
    cfg.flow.architecture.embedding_dim = 4;
    cfg.flow.architecture.integrand_hidden = {16, 16};
    cfg.flow.training.max_epochs = 3;
    cfg.flow.training.restarts = 1;
    cfg.flow.training.warn_below_rows = 0;
    cfg.b = 2000;
    for (std::uint64_t seed : {5u, 6u}) record(pipeline::estimate_once(cfg, cases[2].ds, RandomStream(seed)).point_estimates());

    out.note(std::to_string(runs) + " runs, largest residual " + fmt(worst, 3));
    out.check(worst <= 1e-12, "identity residual " + fmt(worst, 3) + " exceeds 1e-12");
}

// ---------------------------------------------------------------------------
// 2. Discrete oracle equivalence

void criterion_discrete_oracle(Outcome& out) {
    const auto& g = binary();
    const auto ds = oracle::sample_dataset(g, 50000, 2024);
    const auto specs = saturated_specs(ds.schema());
    const auto nb = fit_parametric(ds, Mode::natural_pse, specs);
    const auto ib = fit_parametric(ds, Mode::interventional, specs);
    const RowPlan plan{{}, 1000};
    const RandomStream root(99);

    std::vector<PsiAssignment> psi;
    for (double a : {0.0, 1.0})
        for (double b : {0.0, 1.0})
            for (double c : {0.0, 1.0}) psi.push_back({a, b, c});
    const std::vector<LambdaAssignment> lam{{0, 0}, {0, 1}, {1, 0}, {1, 1}};
    const auto got_psi = simulate_psi(nb, ds, psi, plan, root.derive(tags::simulate, 0));
    const auto got_lam = simulate_lambda(ib, ds, lam, plan, root.derive(tags::simulate, 1));

    double worst_mean = 0.0;
    for (std::size_t k = 0; k < psi.size(); ++k) {
        const double err = std::abs(got_psi[k] - oracle::eval_psi_exact(g, psi[k]));
        worst_mean = std::max(worst_mean, err);
        out.check(err <= 0.01, "psi(" + fmt(psi[k].d1) + "," + fmt(psi[k].d2) + "," + fmt(psi[k].d3) +
                                   ") off by " + fmt(err));
    }
    for (std::size_t k = 0; k < lam.size(); ++k) {
        const double err = std::abs(got_lam[k] - oracle::eval_lambda_exact(g, lam[k]));
        worst_mean = std::max(worst_mean, err);
        out.check(err <= 0.01, "lambda(" + fmt(lam[k].d1) + "," + fmt(lam[k].d2) + ") off by " + fmt(err));
    }

    const auto report = merge_reports(estimate_natural_pse(nb, ds, 1, 0, plan, root.derive(tags::simulate, 0)),
                                      estimate_interventional(ib, ds, 1, 0, plan, root.derive(tags::simulate, 1)));
    const auto exact = oracle::exact_effects(g, 1, 0);
    double worst_effect = 0.0;
    for (Estimand e : kAllEstimands) {
        const double err = std::abs(report.effects.at(e).estimate - exact.at(e));
        worst_effect = std::max(worst_effect, err);
        out.check(err <= 0.02, std::string(key(e)) + " off by " + fmt(err));
    }
    out.note("max mean error " + fmt(worst_mean) + " (<= 0.01), max effect error " + fmt(worst_effect) +
             " (<= 0.02)");
}

// ---------------------------------------------------------------------------
// 3. Linear-Gaussian closed form

void criterion_linear_gaussian(Outcome& out) {
    const auto g = reference_linear_dgp();
    const auto ds = oracle::sample_dataset(g, 50000, 3030);
    const auto r = estimate_natural_pse(fit_parametric(ds, Mode::natural_pse, linear_specs()), ds, 1, 0, 1000,
                                        RandomStream(31));
    const auto exact = oracle::linear_effects_exact(g, 1, 0);
    double worst = 0.0;
    for (Estimand e : {Estimand::PSE_DY, Estimand::PSE_DXY, Estimand::PSE_DLY}) {
        const double err = std::abs(r.effects.at(e).estimate - exact.at(e));
        worst = std::max(worst, err);
        out.note(std::string(key(e)) + " " + fmt(r.effects.at(e).estimate) + " vs " + fmt(exact.at(e)));
        out.check(err <= 0.02, std::string(key(e)) + " off by " + fmt(err));
    }
    out.note("max error " + fmt(worst) + " (<= 0.02)");
}

// ---------------------------------------------------------------------------
// 4. Null invariance

void criterion_null(Outcome& out) {
    std::size_t checked = 0;
    const auto expect_zero = [&](const EffectReport& r, const std::string& what) {
        for (const auto& [k, v] : r.effects) {
            ++checked;
            out.check(v.estimate == 0.0, what + ": " + std::string(key(k)) + " = " + fmt(v.estimate, 17));
            if (v.lower) out.check(*v.lower == 0.0 && *v.upper == 0.0, what + ": non-zero interval for " + std::string(key(k)));
        }
    };

    for (const auto& [name, ds] : {std::pair{std::string("binary"), oracle::sample_dataset(binary(), 4000, 5)},
                                   std::pair{std::string("linear"), oracle::sample_dataset(reference_linear_dgp(), 4000, 6)},
                                   std::pair{std::string("ordinal"),
                                             oracle::sample_dataset(fixture("ordinal_dgp.json"), 4000, 7)}}) {
        const auto specs = treatment_free_specs(ds.schema());
        for (std::uint64_t seed : {1u, 9u}) {
            expect_zero(estimate_natural_pse(fit_parametric(ds, Mode::natural_pse, specs), ds, 1, 0, 25,
                                             RandomStream(seed)),
                        name);
            expect_zero(estimate_interventional(fit_parametric(ds, Mode::interventional, specs), ds, 1, 0, 25,
                                                RandomStream(seed)),
                        name);
        }
    }

    // Through the pipeline, bootstrap and sd units included.
    const auto dir = scratch("null");
    const auto ds = oracle::sample_dataset(reference_linear_dgp(), 1500, 8);
    data::write_csv(dir / "data.csv", ds);
    pipeline::RunConfig cfg(ds.schema());
    cfg.data = dir / "data.csv";
    cfg.specs = treatment_free_specs(ds.schema());
    cfg.J = 20;
    cfg.B = 20;
    cfg.seed = 4;
    cfg.sd_units = true;
    expect_zero(pipeline::run(cfg).report, "pipeline");
    out.note(std::to_string(checked) + " effects, all exactly 0");
}

// ---------------------------------------------------------------------------
// 5. Flow numerics

flows::FlowArchitecture small_arch() {
    flows::FlowArchitecture a;
    a.embedding_hidden = {12, 12};
    a.embedding_dim = 4;
    a.integrand_hidden = {16, 16};
    return a;
}

double integrate_density(const flows::FlowModel& m, const Record& parents) {
    const double lo = m.target_scale.mean - 10 * m.target_scale.sd, hi = m.target_scale.mean + 10 * m.target_scale.sd;
    const int steps = 4000;
    const double h = (hi - lo) / steps;
    double s = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double w = (i == 0 || i == steps) ? 0.5 : 1.0;
        s += w * std::exp(flows::flow_log_density(m, parents, lo + i * h));
    }
    return s * h;
}

void criterion_flow_numerics(Outcome& out) {
    using namespace medsim::flows;

    // Quadrature exactness on polynomials of degree < N.
    double quad_err = 0.0;
    for (int n : {2, 3, 4, 5, 8, 13, 16, 32, 50}) {
        const auto rule = clenshaw_curtis(n);
        for (int deg = 0; deg < n; ++deg) {
            for (double l : {1.0, 2.0, -0.7}) {
                const double exact = std::pow(l, deg + 1) / (deg + 1);
                const double got = quadrature_integrate([deg](double t) { return std::pow(t, deg); }, rule, l);
                quad_err = std::max(quad_err, std::abs(got - exact) / std::max(1.0, std::abs(exact)));
            }
        }
    }
    out.check(quad_err <= 1e-9, "quadrature error " + fmt(quad_err, 3));

    // elu_plus is positive and non-decreasing.
    bool elu_ok = true;
    double prev = 0.0;
    for (double x = -745.0; x <= 60.0; x += 0.05) {
        const double y = elu_plus(x);
        elu_ok = elu_ok && y > 0.0 && y >= prev;
        prev = y;
    }
    out.check(elu_ok, "elu_plus not positive and non-decreasing");

    // A briefly trained flow as well as random default-architecture flows.
    auto dgp = reference_linear_dgp();
    dgp.sd_l = 0.7;
    TrainConfig tc;
    tc.max_epochs = 25;
    tc.restarts = 1;
    tc.learning_rate = 3e-3;
    tc.warn_below_rows = 0;
    const auto trained =
        train({make_flow("l", data::VariableKind::continuous(), {"v", "d"}, small_arch(), 0)},
              oracle::sample_dataset(dgp, 4000, 11), tc)
            .models.front();
    std::vector<FlowModel> flows{trained};
    for (std::uint64_t seed : {17u, 18u, 19u}) {
        flows.push_back(make_flow("l", data::VariableKind::continuous(), {"v", "d"}, FlowArchitecture{}, seed));
    }

    std::size_t grid_points = 0;
    bool monotone = true;
    double trip = 0.0, mass_err = 0.0;
    for (std::size_t f = 0; f < flows.size(); ++f) {
        const auto& m = flows[f];
        for (double v : {-1.5, 0.2, 2.0}) {
            for (double d : {0.0, 1.0}) {
                const Record p{{"v", v}, {"d", d}};
                double last = -INFINITY;
                for (int i = 0; i <= 400; ++i) {
                    const double l = m.target_scale.mean + m.target_scale.sd * (-6.0 + 0.03 * i);
                    const double z = flow_forward(m, p, l);
                    monotone = monotone && z > last;
                    last = z;
                    ++grid_points;
                }
                for (int i = 0; i <= 100; ++i) {
                    const double l = m.target_scale.mean + m.target_scale.sd * (-4.0 + 0.08 * i);
                    trip = std::max(trip, std::abs(flow_invert(m, p, flow_forward(m, p, l)) - l));
                }
                if (f == 0) mass_err = std::max(mass_err, std::abs(integrate_density(m, p) - 1.0));
            }
        }
    }
    out.check(monotone, "flow_forward not strictly increasing on the grid");
    out.check(trip <= 1e-4, "round trip error " + fmt(trip, 3));
    out.check(mass_err <= 0.01, "density mass off by " + fmt(mass_err, 3));

    // Gradients against central differences in every weight group.
    auto m = make_flow("y", data::VariableKind::continuous(), {"v", "d", "l"}, FlowArchitecture{}, 23);
    m.target_scale = {0.2, 1.3};
    const auto ds = oracle::sample_dataset(reference_linear_dgp(), 24, 8);
    const Eigen::MatrixXd P = standardized_parents(m, ds);
    Eigen::VectorXd ell(static_cast<Eigen::Index>(ds.n()));
    for (std::size_t i = 0; i < ds.n(); ++i) ell[static_cast<Eigen::Index>(i)] = m.target_scale.apply(ds.column("y")[i]);
    std::vector<double> grad;
    mean_nll(m, P, ell, &grad);
    const auto theta = get_parameters(m);
    const auto groups = parameter_groups(m);
    SequentialRng rng(RandomStream(99), tags::train);
    std::vector<std::size_t> picks;
    for (int i = 0; i < 10; ++i) picks.push_back(rng.index(groups.embedding));
    for (int i = 0; i < 10; ++i) picks.push_back(groups.embedding + rng.index(groups.integrand));
    for (int i = 0; i < 6; ++i) picks.push_back(groups.embedding + groups.integrand + rng.index(groups.offset));
    double grad_err = 0.0;
    int compared = 0;
    for (std::size_t k : picks) {
        auto plus = theta, minus = theta;
        const double h = 1e-4;
        plus[k] += h;
        minus[k] -= h;
        FlowModel mp = m, mm = m;
        set_parameters(mp, plus);
        set_parameters(mm, minus);
        const double fd = (mean_nll(mp, P, ell) - mean_nll(mm, P, ell)) / (2 * h);
        const double scale = std::max(std::abs(fd), std::abs(grad[k]));
        if (scale < 1e-9) continue;  // weight behind an inactive ReLU
        ++compared;
        grad_err = std::max(grad_err, std::abs(fd - grad[k]) / scale);
    }
    out.check(grad_err <= 1e-3, "gradient relative error " + fmt(grad_err, 3));
    out.check(compared >= 20, "only " + std::to_string(compared) + " gradients compared");

    out.note("quadrature " + fmt(quad_err, 2) + ", " + std::to_string(grid_points) + " grid points monotone, round trip " +
             fmt(trip, 2) + ", mass error " + fmt(mass_err, 2) + ", gradient error " + fmt(grad_err, 2) + " over " +
             std::to_string(compared) + " weights");
}

// ---------------------------------------------------------------------------
// 6. Flow density recovery

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

void criterion_density_recovery(Outcome& out) {
    using namespace medsim::flows;
    const auto g = reference_linear_dgp();
    const auto train_ds = oracle::sample_dataset(g, 20000, 606);
    const auto held_out = oracle::sample_dataset(g, 20000, 607);

    TrainConfig tc;
    tc.seed = 60;
    auto res = train({make_flow("l", data::VariableKind::continuous(), {"v", "d"}, FlowArchitecture{}, 0)}, train_ds, tc);
    const auto& m = res.models.front();

    const double nll = joint_nll(res.models, held_out);
    const double optimum = 0.5 * std::log(2.0 * M_PI * M_E * g.sd_l * g.sd_l);

    const Eigen::MatrixXd P = standardized_parents(m, held_out);
    const auto e = embed(m, P);
    Eigen::VectorXd ell(static_cast<Eigen::Index>(held_out.n()));
    for (std::size_t i = 0; i < held_out.n(); ++i) {
        ell[static_cast<Eigen::Index>(i)] = m.target_scale.apply(held_out.column("l")[i]);
    }
    const Eigen::VectorXd zv = forward_std(m, e, ell);
    std::vector<double> z(zv.data(), zv.data() + zv.size());
    std::sort(z.begin(), z.end());
    const double n = static_cast<double>(z.size());
    double ks = 0.0, mean = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double F = normal_cdf(z[i]);
        ks = std::max({ks, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
        mean += z[i];
    }
    mean /= n;
    double ss = 0.0;
    for (double x : z) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1));

    const auto& rep = res.report;
    out.note("held-out NLL " + fmt(nll, 5) + " vs optimum " + fmt(optimum, 5) + ", KS " + fmt(ks, 3) + ", mean " +
             fmt(mean, 3) + ", SD " + fmt(sd, 4) + " (" + std::to_string(rep.epochs.size()) +
             " epochs, best restart " + std::to_string(rep.best_restart) + ")");
    out.check(std::abs(nll - optimum) <= 0.05, "NLL gap " + fmt(nll - optimum));
    out.check(ks <= 0.02, "KS " + fmt(ks));
    out.check(std::abs(mean) <= 0.05, "mean " + fmt(mean));
    out.check(std::abs(sd - 1.0) <= 0.05, "SD " + fmt(sd));
}

// ---------------------------------------------------------------------------
// 7. Flow-engine oracle equivalence

void criterion_flow_oracle(Outcome& out) {
    const auto& g = binary();
    const auto ds = oracle::sample_dataset(g, 20000, 707);
    pipeline::RunConfig cfg(ds.schema());
    cfg.engine = pipeline::Engine::flow;
    cfg.b = 100000;
    cfg.B = 0;
    cfg.seed = 70;
    const auto t0 = std::chrono::steady_clock::now();
    const auto report = pipeline::estimate_once(cfg, ds, RandomStream(cfg.seed));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto exact = oracle::exact_effects(g, 1, 0);
    double worst = 0.0;
    std::string values;
    for (Estimand e : kAllEstimands) {
        const double err = std::abs(report.effects.at(e).estimate - exact.at(e));
        worst = std::max(worst, err);
        values += std::string(values.empty() ? "" : ", ") + std::string(key(e)) + " " +
                  fmt(report.effects.at(e).estimate) + "/" + fmt(exact.at(e));
        out.check(err <= 0.03, std::string(key(e)) + " off by " + fmt(err));
    }
    out.note("estimate/exact: " + values);
    out.note("max error " + fmt(worst) + " (<= 0.03), " + fmt(secs, 4) + " s");
}

// ---------------------------------------------------------------------------
// 8. Bootstrap coverage

void criterion_coverage(Outcome& out) {
    const auto& g = binary();
    const auto exact = oracle::exact_effects(g, 1, 0);
    const std::size_t reps = 200, B = 200;
    std::map<Estimand, std::size_t> covered;
    std::size_t failed = 0;
    const auto probe = oracle::sample_dataset(g, 10, 0);
    pipeline::RunConfig cfg(probe.schema());
    cfg.specs = saturated_specs(probe.schema());
    cfg.J = 200;
    cfg.B = B;
    const Estimator est = [&](const data::CausalDataset& rs, const RandomStream& st) {
        return pipeline::estimate_once(cfg, rs, st).point_estimates();
    };
    const RandomStream root(8080);
    for (std::size_t r = 0; r < reps; ++r) {
        const auto ds = oracle::sample_dataset(g, 2000, root.bits(tags::dataset, r));
        const std::uint64_t seed = root.bits(tags::replicate, r);
        auto report = pipeline::estimate_once(cfg, ds, RandomStream(seed));
        const auto boot = bootstrap(ds, est, B, seed);
        failed += boot.failed.size();
        attach_intervals(report, boot);
        for (Estimand e : kAllEstimands) {
            const auto& est_e = report.effects.at(e);
            covered[e] += *est_e.lower <= exact.at(e) && exact.at(e) <= *est_e.upper;
        }
        if ((r + 1) % 20 == 0) {
            std::cerr << "  coverage: " << (r + 1) << "/" << reps << " replications\n";
        }
    }
    std::string rates;
    for (Estimand e : kAllEstimands) {
        const double rate = static_cast<double>(covered[e]) / static_cast<double>(reps);
        rates += std::string(rates.empty() ? "" : ", ") + std::string(key(e)) + " " + fmt(rate, 3);
        out.check(rate >= 0.90 && rate <= 0.98, std::string(key(e)) + " coverage " + fmt(rate, 3));
    }
    out.note("coverage: " + rates + " (" + std::to_string(failed) + " failed bootstrap replicates)");
}

// ---------------------------------------------------------------------------
// 9. Determinism

int run_cli(const std::string& args) {
    const std::string cmd = std::string("\"") + MEDSIM_CLI + "\" " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_determinism(Outcome& out) {
    const auto dir = scratch("determinism");
    std::size_t compared = 0;

    const auto same_across_threads = [&](pipeline::RunConfig cfg, const std::string& name) {
        std::string first;
        for (int threads : {1, 2, 4, 0}) {
            for (int repeat = 0; repeat < (threads == 1 ? 2 : 1); ++repeat) {
                cfg.threads = threads;
                const fs::path o = dir / (name + "-" + std::to_string(threads) + "-" + std::to_string(repeat));
                pipeline::write_outputs(pipeline::run(cfg), o);
                const auto bytes = slurp(o / "effects.json");
                if (first.empty()) {
                    first = bytes;
                } else {
                    ++compared;
                    out.check(bytes == first, name + ": effects.json differs at " + std::to_string(threads) + " threads");
                }
            }
        }
    };

    const auto ds = oracle::sample_dataset(binary(), 3000, 9);
    data::write_csv(dir / "binary.csv", ds);
    pipeline::RunConfig par(ds.schema());
    par.data = dir / "binary.csv";
    par.specs = saturated_specs(ds.schema());
    par.J = 50;
    par.B = 20;
    par.seed = 1234;
    same_across_threads(par, "parametric");

    pipeline::RunConfig flow = par;
    flow.engine = pipeline::Engine::flow;
    flow.flow.architecture.embedding_hidden = {16, 16};
    flow.flow.architecture.embedding_dim = 4;
    flow.flow.architecture.integrand_hidden = {16, 16};
    flow.flow.training.max_epochs = 3;
    flow.flow.training.restarts = 2;
    flow.b = 5000;
    flow.B = 2;
    same_across_threads(flow, "flow");

    // The command-line tool on the bundled example.
    auto cfg = json::parse(slurp(fs::path(MEDSIM_SOURCE_DIR) / "data" / "example" / "config.json"));
    cfg["data"] = (fs::path(MEDSIM_SOURCE_DIR) / "data" / "example" / "synthetic.csv").string();
    cfg["J"] = 40;
    cfg["B"] = 10;
    std::ofstream(dir / "config.json") << cfg.dump(2);
    std::string first;
    for (const char* threads : {"1", "3", "0"}) {
        const fs::path o = dir / (std::string("cli-") + threads);
        const int code = run_cli("run \"" + (dir / "config.json").string() + "\" --threads " + threads +
                                 " --output-dir \"" + o.string() + "\"");
        out.check(code == 0, std::string("medsim run exited with ") + std::to_string(code));
        const auto bytes = slurp(o / "effects.json");
        if (first.empty()) {
            first = bytes;
        } else {
            ++compared;
            out.check(!bytes.empty() && bytes == first, std::string("CLI effects.json differs at ") + threads + " threads");
        }
    }
    out.note(std::to_string(compared) + " effects.json comparisons, all byte-identical");
    set_thread_count(0);
}

struct Criterion {
    int id;
    std::string title;
    bool slow;
    std::function<void(Outcome&)> body;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    bool slow = false;
    std::vector<int> only;
    app.add_flag("--slow", slow, "Run the slow criteria (7 and 8)");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    CLI11_PARSE(app, argc, argv);

    const std::vector<Criterion> all{
        {1, "decomposition identities", false, criterion_identities},
        {2, "discrete oracle equivalence (parametric)", false, criterion_discrete_oracle},
        {3, "linear-Gaussian closed form", false, criterion_linear_gaussian},
        {4, "null invariance", false, criterion_null},
        {5, "flow numerics", false, criterion_flow_numerics},
        {6, "flow density recovery", false, criterion_density_recovery},
        {7, "flow-engine oracle equivalence", true, criterion_flow_oracle},
        {8, "bootstrap coverage", true, criterion_coverage},
        {9, "determinism", false, criterion_determinism},
    };

    bool all_pass = true;
    for (const auto& c : all) {
        const bool selected =
            only.empty() ? c.slow == slow : std::find(only.begin(), only.end(), c.id) != only.end();
        if (!selected) continue;
        Outcome o;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            c.body(o);
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all_pass = all_pass && o.pass;
        std::cout << "criterion " << c.id << " " << (o.pass ? "PASS" : "FAIL") << ": " << c.title << " ("
                  << fmt(secs, 3) << " s)\n";
        for (const auto& n : o.notes) std::cout << "    " << n << "\n";
        for (const auto& f : o.failures) std::cout << "    failed: " << f << "\n";
        std::cout.flush();
    }
    fs::remove_all(fs::temp_directory_path() / ("medsim-acceptance-" + std::to_string(::getpid())));
    return all_pass ? 0 : 1;
}
