#include "medsim/glm.hpp"

#include "medsim/error.hpp"

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace medsim::glm {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string to_string(Family f) {
    switch (f) {
        case Family::gaussian: return "gaussian";
        case Family::bernoulli_logit: return "bernoulli-logit";
        case Family::ordinal_logit: return "ordinal-logit";
        case Family::poisson_log: return "poisson-log";
    }
    return "?";
}

Family parse_family(const std::string& text) {
    if (text == "gaussian" || text == "gaussian-identity") return Family::gaussian;
    if (text == "bernoulli-logit" || text == "logit" || text == "binomial") return Family::bernoulli_logit;
    if (text == "ordinal-logit" || text == "ologit") return Family::ordinal_logit;
    if (text == "poisson-log" || text == "poisson") return Family::poisson_log;
    throw ConfigError("unknown model family '" + text + "'");
}

bool compatible(Family f, const data::VariableKind& kind) {
    using data::KindTag;
    switch (f) {
        case Family::gaussian: return kind.tag == KindTag::continuous;
        case Family::bernoulli_logit: return kind.tag == KindTag::binary;
        case Family::ordinal_logit: return kind.tag == KindTag::ordinal || kind.tag == KindTag::binary;
        case Family::poisson_log: return kind.tag == KindTag::count;
    }
    return false;
}

Family default_family(const data::VariableKind& kind) {
    switch (kind.tag) {
        case data::KindTag::continuous: return Family::gaussian;
        case data::KindTag::binary: return Family::bernoulli_logit;
        case data::KindTag::ordinal: return Family::ordinal_logit;
        case data::KindTag::count: return Family::poisson_log;
    }
    return Family::gaussian;
}

std::string Term::label() const {
    std::string out;
    for (std::size_t i = 0; i < factors.size(); ++i) {
        if (i) out += '*';
        out += factors[i].variable;
        if (factors[i].power != 1) out += '^' + std::to_string(factors[i].power);
    }
    return out;
}

Term parse_term(const std::string& text) {
    Term term;
    std::string token;
    std::istringstream in(text);
    auto add = [&](std::string tok) {
        tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }),
                  tok.end());
        if (tok.empty()) throw ConfigError("empty factor in term '" + text + "'");
        int power = 1;
        if (auto caret = tok.find('^'); caret != std::string::npos) {
            const std::string p = tok.substr(caret + 1);
            tok = tok.substr(0, caret);
            try {
                std::size_t used = 0;
                power = std::stoi(p, &used);
                if (used != p.size()) throw std::invalid_argument(p);
            } catch (const std::exception&) {
                throw ConfigError("bad power in term '" + text + "'");
            }
            if (power < 1) throw ConfigError("powers must be >= 1 in term '" + text + "'");
        }
        if (tok.empty()) throw ConfigError("empty variable name in term '" + text + "'");
        for (auto& f : term.factors) {
            if (f.variable == tok) {
                f.power += power;
                return;
            }
        }
        term.factors.push_back({tok, power});
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i <= text.size(); ++i) {
        if (i == text.size() || text[i] == '*' || text[i] == ':') {
            add(text.substr(start, i - start));
            start = i + 1;
        }
    }
    return term;
}

namespace {

Term canonical(Term t) {
    std::sort(t.factors.begin(), t.factors.end(),
              [](const Factor& a, const Factor& b) { return a.variable < b.variable; });
    return t;
}

}  // namespace

TermSpec::TermSpec(std::vector<Term> terms) : terms_(std::move(terms)) {
    std::set<std::string> seen;
    for (const auto& t : terms_) {
        if (t.factors.empty()) throw ConfigError("a term needs at least one factor");
        if (!seen.insert(canonical(t).label()).second) throw ConfigError("duplicate term '" + t.label() + "'");
    }
}

TermSpec TermSpec::parse(const std::vector<std::string>& terms) {
    std::vector<Term> parsed;
    for (const auto& t : terms) parsed.push_back(parse_term(t));
    return TermSpec(std::move(parsed));
}

std::vector<std::string> TermSpec::labels() const {
    std::vector<std::string> out{"(Intercept)"};
    for (const auto& t : terms_) out.push_back(t.label());
    return out;
}

std::vector<std::string> TermSpec::variables() const {
    std::vector<std::string> out;
    for (const auto& t : terms_) {
        for (const auto& f : t.factors) {
            if (std::find(out.begin(), out.end(), f.variable) == out.end()) out.push_back(f.variable);
        }
    }
    return out;
}

bool TermSpec::references(const std::string& variable) const {
    for (const auto& t : terms_) {
        for (const auto& f : t.factors) {
            if (f.variable == variable) return true;
        }
    }
    return false;
}

namespace {

inline double ipow(double x, int p) {
    double r = x;
    for (int i = 1; i < p; ++i) r *= x;
    return r;
}

// Column-wise term evaluation shared by the fitting and sampling paths.
struct ResolvedTerms {
    std::vector<std::vector<std::pair<std::span<const double>, int>>> factors;
};

ResolvedTerms resolve(const TermSpec& spec, const Frame& frame) {
    ResolvedTerms r;
    for (const auto& t : spec.terms()) {
        auto& fs = r.factors.emplace_back();
        for (const auto& f : t.factors) fs.emplace_back(frame.get(f.variable), f.power);
    }
    return r;
}

void eval_eta(std::span<const double> coef, const ResolvedTerms& terms, std::size_t rows,
              std::span<double> eta) {
    std::fill(eta.begin(), eta.begin() + static_cast<std::ptrdiff_t>(rows), coef[0]);
    std::vector<double> prod(rows);
    for (std::size_t t = 0; t < terms.factors.size(); ++t) {
        const double c = coef[t + 1];
        const auto& fs = terms.factors[t];
        const double* first = fs[0].first.data();
        const int p0 = fs[0].second;
        if (p0 == 1) {
            std::copy(first, first + rows, prod.begin());
        } else {
            for (std::size_t i = 0; i < rows; ++i) prod[i] = ipow(first[i], p0);
        }
        for (std::size_t k = 1; k < fs.size(); ++k) {
            const double* col = fs[k].first.data();
            const int p = fs[k].second;
            if (p == 1) {
                for (std::size_t i = 0; i < rows; ++i) prod[i] *= col[i];
            } else {
                for (std::size_t i = 0; i < rows; ++i) prod[i] *= ipow(col[i], p);
            }
        }
        for (std::size_t i = 0; i < rows; ++i) eta[i] += c * prod[i];
    }
}

Frame frame_from_record(const Record& record, std::vector<double>& storage) {
    Frame f(1);
    storage.clear();
    storage.reserve(record.size());
    for (const auto& [k, v] : record) storage.push_back(v);
    std::size_t i = 0;
    for (const auto& [k, v] : record) f.set(k, std::span<const double>(&storage[i++], 1));
    return f;
}

Frame frame_from_dataset(const data::CausalDataset& ds) {
    Frame f(ds.n());
    const auto& vars = ds.schema().variables();
    for (std::size_t v = 0; v < vars.size(); ++v) f.set(vars[v].name, ds.column(v));
    return f;
}

inline double logistic(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

// F(a) - F(b) for a > b without cancellation in either tail.
inline double logistic_diff(double a, double b) {
    if (a + b > 0) return logistic(-b) - logistic(-a);
    return logistic(a) - logistic(b);
}

inline double log_pois(double y, double mu) {
    return y * std::log(mu) - mu - std::lgamma(y + 1.0);
}

double poisson_inverse(double mu, double u) {
    if (!(mu > 0)) return 0.0;
    if (mu < 30.0) {
        double k = 0, p = std::exp(-mu), cdf = p;
        while (u > cdf && p > 0) {
            k += 1;
            p *= mu / k;
            cdf += p;
        }
        return k;
    }
    // Start from the mode and walk; the CDF at the start is exact.
    double k = std::floor(mu);
    double cdf = boost::math::gamma_q(k + 1.0, mu);
    double p = std::exp(log_pois(k, mu));
    if (u <= cdf) {
        while (k > 0 && u <= cdf - p) {
            cdf -= p;
            p *= k / mu;
            k -= 1;
        }
    } else {
        while (u > cdf && p > 0) {
            k += 1;
            p *= mu / k;
            cdf += p;
        }
    }
    return k;
}

struct Objective {
    double ll = 0.0;
    VectorXd grad;
    MatrixXd neg_hess;
    double extreme_prob = 0.5;  // fitted probability closest to 0 or 1
};

}  // namespace

std::vector<double> design_row(const TermSpec& terms, const Record& record) {
    std::vector<double> row{1.0};
    for (const auto& t : terms.terms()) {
        double v = 1.0;
        bool first = true;
        for (const auto& f : t.factors) {
            auto it = record.find(f.variable);
            if (it == record.end()) throw SchemaError("record is missing variable '" + f.variable + "'");
            v = first ? ipow(it->second, f.power) : v * ipow(it->second, f.power);
            first = false;
        }
        row.push_back(v);
    }
    return row;
}

void linear_predictor(const FittedGLM& model, const Frame& frame, std::span<double> eta) {
    eval_eta(model.coefficients, resolve(model.terms, frame), frame.rows(), eta);
}

double FittedGLM::linear_predictor(const Record& record) const {
    std::vector<double> storage;
    Frame f = frame_from_record(record, storage);
    double eta = 0.0;
    glm::linear_predictor(*this, f, std::span<double>(&eta, 1));
    return eta;
}

std::vector<double> FittedGLM::probabilities(const Record& record) const {
    const double eta = linear_predictor(record);
    switch (family) {
        case Family::bernoulli_logit: {
            const double p = logistic(eta);
            return {logistic(-eta), p};
        }
        case Family::ordinal_logit: {
            std::vector<double> p(static_cast<std::size_t>(levels()));
            double prev = 0.0;
            for (std::size_t k = 0; k < thresholds.size(); ++k) {
                const double c = logistic(thresholds[k] - eta);
                p[k] = c - prev;
                prev = c;
            }
            p.back() = logistic(eta - thresholds.back());
            return p;
        }
        default:
            throw ConfigError("probabilities() is defined for bernoulli and ordinal models only");
    }
}

double FittedGLM::mean(const Record& record) const {
    const double eta = linear_predictor(record);
    switch (family) {
        case Family::gaussian: return eta;
        case Family::bernoulli_logit: return logistic(eta);
        case Family::poisson_log: return std::exp(eta);
        case Family::ordinal_logit: {
            auto p = probabilities(record);
            double m = 0.0;
            for (std::size_t k = 0; k < p.size(); ++k) m += static_cast<double>(k) * p[k];
            return m;
        }
    }
    return eta;
}

void sample(const FittedGLM& model, const Frame& frame, const Innovations& innovations,
            std::span<double> out) {
    const std::size_t n = frame.rows();
    if (innovations.size() != n || out.size() != n) {
        throw Error(ErrorKind::internal, "sample: frame, innovations and output sizes differ");
    }
    std::vector<double> eta(n);
    linear_predictor(model, frame, eta);
    switch (model.family) {
        case Family::gaussian: {
            const auto z = innovations.normal();
            const double sigma = std::sqrt(model.dispersion);
            for (std::size_t i = 0; i < n; ++i) out[i] = eta[i] + sigma * z[i];
            break;
        }
        case Family::bernoulli_logit: {
            // u < logistic(eta)  <=>  logit(u) < eta
            const auto lu = innovations.logit();
            for (std::size_t i = 0; i < n; ++i) out[i] = lu[i] < eta[i] ? 1.0 : 0.0;
            break;
        }
        case Family::ordinal_logit: {
            // Smallest k with u <= F(tau_k - eta), compared on the logit scale.
            const auto lu = innovations.logit();
            const auto& tau = model.thresholds;
            for (std::size_t i = 0; i < n; ++i) {
                double k = 0;
                for (double t : tau) {
                    if (lu[i] <= t - eta[i]) break;
                    k += 1;
                }
                out[i] = k;
            }
            break;
        }
        case Family::poisson_log: {
            const auto u = innovations.uniform();
            for (std::size_t i = 0; i < n; ++i) out[i] = poisson_inverse(std::exp(eta[i]), u[i]);
            break;
        }
    }
}

double sample(const FittedGLM& model, const Record& record, double uniform) {
    std::vector<double> storage;
    Frame f = frame_from_record(record, storage);
    Innovations inn({uniform});
    double out = 0.0;
    sample(model, f, inn, std::span<double>(&out, 1));
    return out;
}

double sample(const FittedGLM& model, const Record& record, SequentialRng& rng) {
    return sample(model, record, rng.uniform());
}

namespace {

class Fitter {
public:
    Fitter(Family family, const TermSpec& terms, std::span<const double> y, const MatrixXd& X)
        : family_(family), terms_(terms), y_(y), X_(X), n_(static_cast<std::size_t>(X.rows())) {}

    FittedGLM run(const std::string& response, int levels, const FitOptions& opt);

private:
    Objective evaluate(const VectorXd& theta) const;
    bool valid(const VectorXd& theta) const;
    FittedGLM pack(const VectorXd& theta, const Objective& obj, const std::string& response, int levels) const;

    Family family_;
    const TermSpec& terms_;
    std::span<const double> y_;
    const MatrixXd& X_;
    std::size_t n_;
    int levels_ = 2;
    double dispersion_ = 0.0;
};

bool Fitter::valid(const VectorXd& theta) const {
    if (!theta.allFinite()) return false;
    if (family_ == Family::ordinal_logit) {
        for (int k = 1; k + 1 < levels_; ++k) {
            if (!(theta[k] > theta[k - 1])) return false;
        }
    }
    return true;
}

Objective Fitter::evaluate(const VectorXd& theta) const {
    Objective obj;
    const auto p = static_cast<Eigen::Index>(theta.size());
    obj.grad = VectorXd::Zero(p);
    obj.neg_hess = MatrixXd::Zero(p, p);
    double extreme = 0.5;

    switch (family_) {
        case Family::gaussian: {
            // Profile out sigma^2 = RSS / n; Newton on beta is exact least squares.
            const VectorXd mu = X_ * theta;
            double rss = 0.0;
            for (std::size_t i = 0; i < n_; ++i) rss += (y_[i] - mu[static_cast<Eigen::Index>(i)]) *
                                                    (y_[i] - mu[static_cast<Eigen::Index>(i)]);
            const double s2 = rss / static_cast<double>(n_);
            const double n = static_cast<double>(n_);
            obj.ll = -0.5 * n * (std::log(2.0 * M_PI * s2) + 1.0);
            VectorXd r(static_cast<Eigen::Index>(n_));
            for (std::size_t i = 0; i < n_; ++i) r[static_cast<Eigen::Index>(i)] = y_[i] - mu[static_cast<Eigen::Index>(i)];
            obj.grad = X_.transpose() * r / s2;
            obj.neg_hess = X_.transpose() * X_ / s2;
            break;
        }
        case Family::bernoulli_logit: {
            const VectorXd eta = X_ * theta;
            VectorXd w(static_cast<Eigen::Index>(n_)), r(static_cast<Eigen::Index>(n_));
            for (std::size_t i = 0; i < n_; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const double e = eta[ii];
                const double pr = logistic(e);
                // log(1 + exp(e)) computed stably
                const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
                obj.ll += y_[i] * e - softplus;
                r[ii] = y_[i] - pr;
                w[ii] = pr * (1.0 - pr);
                extreme = std::min(extreme, std::min(pr, 1.0 - pr));
            }
            obj.grad = X_.transpose() * r;
            obj.neg_hess = X_.transpose() * w.asDiagonal() * X_;
            break;
        }
        case Family::poisson_log: {
            const VectorXd eta = X_ * theta;
            VectorXd mu(static_cast<Eigen::Index>(n_));
            for (std::size_t i = 0; i < n_; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                mu[ii] = std::exp(eta[ii]);
                obj.ll += y_[i] * eta[ii] - mu[ii] - std::lgamma(y_[i] + 1.0);
            }
            VectorXd r(static_cast<Eigen::Index>(n_));
            for (std::size_t i = 0; i < n_; ++i) r[static_cast<Eigen::Index>(i)] = y_[i] - mu[static_cast<Eigen::Index>(i)];
            obj.grad = X_.transpose() * r;
            obj.neg_hess = X_.transpose() * mu.asDiagonal() * X_;
            break;
        }
        case Family::ordinal_logit: {
            // theta = (tau_1..tau_{K-1}, beta); X_ holds the non-intercept columns.
            const int m = levels_ - 1;
            const VectorXd beta = theta.tail(p - m);
            const VectorXd eta = X_ * beta;
            const Eigen::Index q = p - m;
            for (std::size_t i = 0; i < n_; ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                const int y = static_cast<int>(y_[i]);
                const bool has_upper = y < m;
                const bool has_lower = y > 0;
                const double a = has_upper ? theta[y] - eta[ii] : std::numeric_limits<double>::infinity();
                const double b = has_lower ? theta[y - 1] - eta[ii] : -std::numeric_limits<double>::infinity();
                double pr;
                if (!has_upper) pr = logistic(-b);
                else if (!has_lower) pr = logistic(a);
                else pr = logistic_diff(a, b);
                if (!(pr > 0)) pr = std::numeric_limits<double>::min();
                obj.ll += std::log(pr);
                extreme = std::min(extreme, 1.0 - pr);

                double ga = 0, gb = 0, ha = 0, hb = 0;
                if (has_upper) {
                    const double F = logistic(a);
                    ga = F * (1.0 - F);
                    ha = ga * (1.0 - 2.0 * F);
                }
                if (has_lower) {
                    const double F = logistic(b);
                    gb = F * (1.0 - F);
                    hb = gb * (1.0 - 2.0 * F);
                }
                const double p2 = pr * pr;
                const auto x = X_.row(ii).transpose();
                // gradient
                if (has_upper) obj.grad[y] += ga / pr;
                if (has_lower) obj.grad[y - 1] -= gb / pr;
                obj.grad.tail(q) -= x * ((ga - gb) / pr);
                // negative Hessian
                if (has_upper) {
                    obj.neg_hess(y, y) -= ha / pr - ga * ga / p2;
                    const double c = -ha / pr + ga * (ga - gb) / p2;
                    obj.neg_hess.block(y, m, 1, q) -= c * x.transpose();
                    obj.neg_hess.block(m, y, q, 1) -= c * x;
                }
                if (has_lower) {
                    obj.neg_hess(y - 1, y - 1) -= -hb / pr - gb * gb / p2;
                    const double c = hb / pr - gb * (ga - gb) / p2;
                    obj.neg_hess.block(y - 1, m, 1, q) -= c * x.transpose();
                    obj.neg_hess.block(m, y - 1, q, 1) -= c * x;
                }
                if (has_upper && has_lower) {
                    obj.neg_hess(y, y - 1) -= ga * gb / p2;
                    obj.neg_hess(y - 1, y) -= ga * gb / p2;
                }
                obj.neg_hess.bottomRightCorner(q, q).noalias() -=
                    ((ha - hb) / pr - (ga - gb) * (ga - gb) / p2) * (x * x.transpose());
            }
            break;
        }
    }
    obj.extreme_prob = extreme;
    return obj;
}

FittedGLM Fitter::pack(const VectorXd& theta, const Objective& obj, const std::string& response,
                       int levels) const {
    FittedGLM m;
    m.family = family_;
    m.terms = terms_;
    m.response = response;
    m.log_likelihood = obj.ll;
    m.gradient_norm = obj.grad.size() ? obj.grad.cwiseAbs().maxCoeff() : 0.0;
    m.n = n_;
    if (family_ == Family::ordinal_logit) {
        const int k = levels - 1;
        m.thresholds.assign(theta.data(), theta.data() + k);
        m.coefficients.push_back(0.0);
        for (Eigen::Index i = k; i < theta.size(); ++i) m.coefficients.push_back(theta[i]);
    } else {
        m.coefficients.assign(theta.data(), theta.data() + theta.size());
    }
    if (family_ == Family::gaussian) {
        const VectorXd mu = X_ * theta;
        double rss = 0.0;
        for (std::size_t i = 0; i < n_; ++i) rss += (y_[i] - mu[static_cast<Eigen::Index>(i)]) *
                                                (y_[i] - mu[static_cast<Eigen::Index>(i)]);
        m.dispersion = rss / static_cast<double>(n_);
    }
    return m;
}

FittedGLM Fitter::run(const std::string& response, int levels, const FitOptions& opt) {
    levels_ = levels;
    const auto p = static_cast<Eigen::Index>(X_.cols()) +
                   (family_ == Family::ordinal_logit ? levels - 1 : 0);
    VectorXd theta = VectorXd::Zero(p);
    if (family_ == Family::ordinal_logit) {
        std::vector<double> counts(static_cast<std::size_t>(levels), 0.0);
        for (double y : y_) counts[static_cast<std::size_t>(y)] += 1.0;
        double cum = 0.0;
        for (int k = 0; k + 1 < levels; ++k) {
            cum += counts[static_cast<std::size_t>(k)];
            const double f = cum / static_cast<double>(n_);
            theta[k] = std::log(f) - std::log1p(-f);
        }
    }

    Objective obj = evaluate(theta);
    std::vector<double> norms{theta.cwiseAbs().maxCoeff()};
    int iter = 0;
    int stalls = 0;
    bool converged = obj.grad.cwiseAbs().maxCoeff() <= opt.gradient_tolerance;

    // Coefficient max-norm grew materially over each of the last three iterations.
    auto diverging = [&] {
        const std::size_t s = norms.size();
        if (s < 4) return false;
        for (std::size_t k = s - 3; k < s; ++k) {
            if (!(norms[k] > norms[k - 1] * (1.0 + 1e-6))) return false;
        }
        return true;
    };

    auto check_separation = [&] {
        if (family_ == Family::gaussian || family_ == Family::poisson_log) return;
        if (obj.extreme_prob > 1e-10 || norms.size() < 4) return;
        if (diverging()) {
            throw SeparationError("separation detected when fitting '" + response +
                                  "': fitted probabilities reach 0 or 1 while coefficients diverge");
        }
    };

    while (!converged && iter < opt.max_iterations) {
        ++iter;
        Eigen::LDLT<MatrixXd> solver(obj.neg_hess);
        VectorXd step = solver.solve(obj.grad);
        if (solver.info() != Eigen::Success || !step.allFinite()) {
            // Rank-deficient curvature: fall back to a least-squares direction.
            step = obj.neg_hess.completeOrthogonalDecomposition().solve(obj.grad);
            if (!step.allFinite()) {
                throw FitError("singular curvature when fitting '" + response +
                               "' (collinear terms or an empty cell?)");
            }
        }

        double scale = 1.0;
        VectorXd next;
        Objective trial;
        bool accepted = false;
        for (int halving = 0; halving < 40; ++halving, scale *= 0.5) {
            next = theta + scale * step;
            if (!valid(next)) continue;
            trial = evaluate(next);
            if (std::isfinite(trial.ll) && trial.ll >= obj.ll - 1e-12 * std::abs(obj.ll)) {
                accepted = true;
                break;
            }
        }
        if (!accepted) {
            // No ascent possible: already at the optimum to working precision.
            converged = obj.grad.cwiseAbs().maxCoeff() <= opt.gradient_tolerance;
            break;
        }
        const double change = std::abs(trial.ll - obj.ll);
        const double prev_ll = obj.ll;
        theta = next;
        obj = std::move(trial);
        norms.push_back(theta.cwiseAbs().maxCoeff());
        check_separation();

        // The gradient test decides convergence; a stalled likelihood only ends
        // the loop once it has persisted, so separation can still surface.
        if (obj.grad.cwiseAbs().maxCoeff() <= opt.gradient_tolerance) {
            // Near the boundary with growing coefficients the small gradient may
            // only reflect saturation; keep stepping until growth stops.
            const bool boundary = family_ != Family::gaussian && family_ != Family::poisson_log &&
                                  obj.extreme_prob < 1e-6 && diverging();
            converged = !boundary;
        } else if (change <= opt.relative_tolerance * std::max(1.0, std::abs(prev_ll))) {
            if (++stalls >= 5 && obj.extreme_prob > 1e-10) break;
        } else {
            stalls = 0;
        }
    }
    if (!converged) {
        check_separation();
        if (obj.extreme_prob <= 1e-10) {
            throw SeparationError("separation detected when fitting '" + response +
                                  "': fitted probabilities reach 0 or 1 without convergence");
        }
        std::ostringstream msg;
        msg << "model for '" << response << "' did not converge after " << iter
            << " iterations (last gradient max-norm " << obj.grad.cwiseAbs().maxCoeff() << ", coefficients [";
        for (Eigen::Index i = 0; i < theta.size(); ++i) msg << (i ? ", " : "") << theta[i];
        msg << "])";
        throw FitError(msg.str());
    }
    FittedGLM m = pack(theta, obj, response, levels);
    m.converged = true;
    m.iterations = iter;
    return m;
}

}  // namespace

FittedGLM fit_mle(Family family, const TermSpec& terms, const std::string& response,
                  const data::CausalDataset& ds, const FitOptions& options) {
    const auto& var = ds.schema().variable(response);
    if (!compatible(family, var.kind)) {
        throw ConfigError("family " + to_string(family) + " is incompatible with response '" + response +
                          "' of kind " + var.kind.to_string());
    }
    if (terms.references(response)) throw ConfigError("model for '" + response + "' uses the response as a term");

    const Frame frame = frame_from_dataset(ds);
    const auto resolved = resolve(terms, frame);
    const std::size_t n = ds.n();
    const bool ordinal = family == Family::ordinal_logit;
    const int levels = ordinal ? var.kind.levels : 0;
    const std::size_t width = terms.width();
    const std::size_t params = ordinal ? width - 1 + static_cast<std::size_t>(levels - 1) : width;
    if (n <= params) {
        throw FitError("model for '" + response + "' has " + std::to_string(params) +
                       " parameters but only " + std::to_string(n) + " rows");
    }

    MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width));
    {
        std::vector<double> col(n);
        for (std::size_t c = 0; c < width; ++c) {
            std::vector<double> unit(width, 0.0);
            unit[c] = 1.0;
            eval_eta(unit, resolved, n, col);
            for (std::size_t i = 0; i < n; ++i) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = col[i];
        }
    }

    const auto y = ds.column(response);
    if (ordinal) {
        std::vector<std::size_t> counts(static_cast<std::size_t>(levels), 0);
        for (double v : y) ++counts[static_cast<std::size_t>(v)];
        for (int k = 0; k < levels; ++k) {
            if (counts[static_cast<std::size_t>(k)] == 0) {
                throw FitError("level " + std::to_string(k) + " of '" + response +
                               "' is never observed; its threshold is not estimable");
            }
        }
        const MatrixXd Xo = X.rightCols(X.cols() - 1);
        Fitter fitter(family, terms, y, Xo);
        return fitter.run(response, levels, options);
    }
    Fitter fitter(family, terms, y, X);
    auto m = fitter.run(response, levels, options);
    if (family == Family::gaussian && !(m.dispersion > 0)) {
        throw FitError("model for '" + response + "' fits exactly; residual variance is zero");
    }
    return m;
}

double log_likelihood(const FittedGLM& model, const data::CausalDataset& ds) {
    const auto y = ds.column(model.response);
    double ll = 0.0;
    const auto& vars = ds.schema().variables();
    for (std::size_t i = 0; i < ds.n(); ++i) {
        Record r;
        for (std::size_t v = 0; v < vars.size(); ++v) r[vars[v].name] = ds.value(i, v);
        switch (model.family) {
            case Family::gaussian: {
                const double mu = model.linear_predictor(r);
                const double s2 = model.dispersion;
                ll += -0.5 * std::log(2.0 * M_PI * s2) - 0.5 * (y[i] - mu) * (y[i] - mu) / s2;
                break;
            }
            case Family::poisson_log:
                ll += log_pois(y[i], std::exp(model.linear_predictor(r)));
                break;
            default:
                ll += std::log(model.probabilities(r)[static_cast<std::size_t>(y[i])]);
        }
    }
    return ll;
}

nlohmann::ordered_json to_json(const FittedGLM& model) {
    nlohmann::ordered_json j;
    j["family"] = to_string(model.family);
    j["response"] = model.response;
    std::vector<std::string> terms;
    for (const auto& t : model.terms.terms()) terms.push_back(t.label());
    j["terms"] = terms;
    j["coefficients"] = model.coefficients;
    if (model.family == Family::gaussian) j["dispersion"] = model.dispersion;
    if (model.family == Family::ordinal_logit) j["thresholds"] = model.thresholds;
    j["log_likelihood"] = model.log_likelihood;
    j["gradient_norm"] = model.gradient_norm;
    j["converged"] = model.converged;
    j["iterations"] = model.iterations;
    j["n"] = model.n;
    return j;
}

FittedGLM glm_from_json(const nlohmann::json& j) {
    FittedGLM m;
    m.family = parse_family(j.at("family").get<std::string>());
    m.response = j.at("response").get<std::string>();
    m.terms = TermSpec::parse(j.at("terms").get<std::vector<std::string>>());
    m.coefficients = j.at("coefficients").get<std::vector<double>>();
    if (m.coefficients.size() != m.terms.width()) throw ConfigError("coefficient count does not match terms");
    m.dispersion = j.value("dispersion", 0.0);
    m.thresholds = j.value("thresholds", std::vector<double>{});
    m.log_likelihood = j.value("log_likelihood", 0.0);
    m.gradient_norm = j.value("gradient_norm", 0.0);
    m.converged = j.value("converged", false);
    m.iterations = j.value("iterations", 0);
    m.n = j.value("n", std::size_t{0});
    return m;
}

}  // namespace medsim::glm
