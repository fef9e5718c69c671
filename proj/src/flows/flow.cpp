#include "medsim/flows/flow.hpp"

#include "medsim/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace medsim::flows {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr Index kSubBatch = 64;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * M_PI);

void check_widths(const std::vector<int>& w, const char* what) {
    if (w.empty()) throw ConfigError(std::string(what) + " network needs at least one hidden layer");
    for (int v : w) {
        if (v < 1) throw ConfigError(std::string(what) + " network widths must be positive");
    }
}

struct IntegrandTape {
    MatrixXd h1;                 // first hidden layer output, H1 x (S*M)
    std::vector<MatrixXd> acts;  // outputs of the remaining layers
    VectorXd t;                  // evaluation points, sample-major
};

// theta at the points T(k, i) for every sample column i of c. The first layer
// is split so W_c c is computed once per sample and broadcast over its points.
Eigen::RowVectorXd eval_integrand(const FlowModel& m, const MatrixXd& c, const MatrixXd& T, IntegrandTape* tape) {
    const Dense& first = m.integrand.layers.front();
    const Index S = c.cols(), M = T.rows(), H = first.W.rows();
    MatrixXd base = first.W.rightCols(c.rows()) * c;
    base.colwise() += first.b;
    const VectorXd wt = first.W.col(0);
    MatrixXd h(H, S * M);
    for (Index i = 0; i < S; ++i) {
        h.middleCols(i * M, M) = base.col(i).replicate(1, M) + wt * T.col(i).transpose();
    }
    activate(h, first.act);
    MatrixXd out = m.integrand.forward(h, 1, tape ? &tape->acts : nullptr);
    if (tape) {
        tape->h1 = std::move(h);
        tape->t = Eigen::Map<const VectorXd>(T.data(), S * M);
    }
    return out.row(0);
}

// Evaluation points for z: quadrature nodes on [0, ell_i], plus ell_i itself when with_end.
MatrixXd node_points(const QuadratureRule& rule, const VectorXd& ell, bool with_end) {
    const Index N = rule.N, M = N + (with_end ? 1 : 0);
    MatrixXd T(M, ell.size());
    for (Index i = 0; i < ell.size(); ++i) {
        for (Index k = 0; k < N; ++k) T(k, i) = 0.5 * ell[i] * (rule.nodes[static_cast<std::size_t>(k)] + 1.0);
        if (with_end) T(N, i) = ell[i];
    }
    return T;
}

Embedding slice(const Embedding& e, Index from, Index count) {
    return {e.c.middleCols(from, count), e.alpha.segment(from, count)};
}

Embedding select(const Embedding& e, const std::vector<Index>& idx) {
    Embedding s;
    s.c = e.c(Eigen::all, idx);
    s.alpha = e.alpha(idx);
    return s;
}

VectorXd forward_block(const FlowModel& m, const Embedding& e, const VectorXd& ell) {
    const MatrixXd T = node_points(m.rule, ell, false);
    const Eigen::RowVectorXd theta = eval_integrand(m, e.c, T, nullptr);
    const Index N = m.rule.N;
    VectorXd z(ell.size());
    for (Index i = 0; i < ell.size(); ++i) {
        double s = 0.0;
        for (Index k = 0; k < N; ++k) s += m.rule.weights[static_cast<std::size_t>(k)] * theta[i * N + k];
        z[i] = 0.5 * ell[i] * s + e.alpha[i];
    }
    return z;
}

Frame frame_from_record(const Record& r, std::vector<double>& storage) {
    Frame f(1);
    storage.assign(r.size(), 0.0);
    std::size_t i = 0;
    for (const auto& [k, v] : r) storage[i++] = v;
    i = 0;
    for (const auto& [k, v] : r) f.set(k, std::span<const double>(&storage[i++], 1));
    return f;
}

Embedding embed_record(const FlowModel& m, const Record& parents) {
    std::vector<double> storage;
    const Frame f = frame_from_record(parents, storage);
    return embed(m, standardized_parents(m, f));
}

void append_layers(const MLP& net, std::vector<double>& out) {
    for (const auto& l : net.layers) {
        out.insert(out.end(), l.W.data(), l.W.data() + l.W.size());
        out.insert(out.end(), l.b.data(), l.b.data() + l.b.size());
    }
}

void append_grads(const std::vector<DenseGrad>& g, std::vector<double>& out) {
    for (const auto& l : g) {
        out.insert(out.end(), l.W.data(), l.W.data() + l.W.size());
        out.insert(out.end(), l.b.data(), l.b.data() + l.b.size());
    }
}

std::size_t read_layers(MLP& net, std::span<const double> p, std::size_t pos) {
    for (auto& l : net.layers) {
        std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(pos), l.W.size(), l.W.data());
        pos += static_cast<std::size_t>(l.W.size());
        std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(pos), l.b.size(), l.b.data());
        pos += static_cast<std::size_t>(l.b.size());
    }
    return pos;
}

}  // namespace

void FlowArchitecture::validate() const {
    check_widths(embedding_hidden, "embedding");
    check_widths(integrand_hidden, "integrand");
    if (embedding_dim < 1) throw ConfigError("embedding dimension must be positive");
    if (quadrature_nodes < 1) throw ConfigError("quadrature needs at least one node");
    if (integrand_activation == Activation::relu) {
        // Kinks in the integrand break the exact derivative property of the quadrature map.
        throw ConfigError("the integrand network needs a smooth hidden activation (tanh or elu)");
    }
}

double Dequantizer::requantize(double value, double lo, double hi) {
    double k = std::round(value);
    k = std::max(k, lo);
    if (hi >= lo) k = std::min(k, hi);
    return k;
}

std::size_t FlowModel::parameter_count() const {
    return embedding.parameter_count() + integrand.parameter_count() + static_cast<std::size_t>(offset_w.size()) + 1;
}

FlowModel make_flow(const std::string& target, const data::VariableKind& kind, std::vector<std::string> parents,
                    const FlowArchitecture& arch, std::uint64_t seed) {
    arch.validate();
    FlowModel m;
    m.target = target;
    m.kind = kind;
    m.parents = std::move(parents);
    m.arch = arch;
    m.parent_scale.assign(m.parents.size(), {});
    std::vector<int> ew{static_cast<int>(m.parents.size())};
    ew.insert(ew.end(), arch.embedding_hidden.begin(), arch.embedding_hidden.end());
    ew.push_back(arch.embedding_dim);
    m.embedding = MLP(ew, Activation::relu, Activation::linear);
    std::vector<int> iw{1 + arch.embedding_dim};
    iw.insert(iw.end(), arch.integrand_hidden.begin(), arch.integrand_hidden.end());
    iw.push_back(1);
    m.integrand = MLP(iw, arch.integrand_activation, Activation::elu_plus);
    m.rule = clenshaw_curtis(arch.quadrature_nodes);
    initialize_weights(m, seed);
    return m;
}

void initialize_weights(FlowModel& m, std::uint64_t seed) {
    SequentialRng rng(RandomStream(seed), tags::train);
    m.embedding.initialize(rng);
    m.integrand.initialize(rng);
    const double bound = 1.0 / std::sqrt(static_cast<double>(m.embedding.output_dim()));
    m.offset_w.resize(m.embedding.output_dim());
    for (Index i = 0; i < m.offset_w.size(); ++i) m.offset_w[i] = bound * (2.0 * rng.uniform() - 1.0);
    m.offset_b = bound * (2.0 * rng.uniform() - 1.0);
}

void fit_standardization(FlowModel& m, const data::CausalDataset& ds) {
    auto scale_of = [&](const std::string& name) {
        const auto col = ds.column(name);
        const double n = static_cast<double>(col.size());
        double mean = 0.0;
        for (double v : col) mean += v;
        mean /= n;
        double ss = 0.0;
        for (double v : col) ss += (v - mean) * (v - mean);
        const double sd = col.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
        return Standardization{mean, sd > 0 ? sd : 1.0};
    };
    m.target_scale = scale_of(m.target);
    m.parent_scale.clear();
    for (const auto& p : m.parents) m.parent_scale.push_back(scale_of(p));
}

void make_identity(FlowModel& m) {
    for (auto& l : m.integrand.layers) {
        l.W.setZero();
        l.b.setZero();
    }
    m.offset_w.setZero();
    m.offset_b = 0.0;
}

std::vector<double> get_parameters(const FlowModel& m) {
    std::vector<double> p;
    p.reserve(m.parameter_count());
    append_layers(m.embedding, p);
    append_layers(m.integrand, p);
    p.insert(p.end(), m.offset_w.data(), m.offset_w.data() + m.offset_w.size());
    p.push_back(m.offset_b);
    return p;
}

void set_parameters(FlowModel& m, std::span<const double> p) {
    if (p.size() != m.parameter_count()) throw Error(ErrorKind::internal, "flow parameter vector has the wrong size");
    std::size_t pos = read_layers(m.embedding, p, 0);
    pos = read_layers(m.integrand, p, pos);
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(pos), m.offset_w.size(), m.offset_w.data());
    pos += static_cast<std::size_t>(m.offset_w.size());
    m.offset_b = p[pos];
}

ParameterGroups parameter_groups(const FlowModel& m) {
    return {m.embedding.parameter_count(), m.integrand.parameter_count(), static_cast<std::size_t>(m.offset_w.size()) + 1};
}

MatrixXd standardized_parents(const FlowModel& m, const Frame& frame) {
    MatrixXd P(static_cast<Index>(m.parents.size()), static_cast<Index>(frame.rows()));
    for (std::size_t j = 0; j < m.parents.size(); ++j) {
        const auto col = frame.get(m.parents[j]);
        const auto& s = m.parent_scale[j];
        for (std::size_t i = 0; i < frame.rows(); ++i) P(static_cast<Index>(j), static_cast<Index>(i)) = s.apply(col[i]);
    }
    return P;
}

MatrixXd standardized_parents(const FlowModel& m, const data::CausalDataset& ds, std::span<const std::size_t> rows) {
    const std::size_t n = rows.empty() ? ds.n() : rows.size();
    MatrixXd P(static_cast<Index>(m.parents.size()), static_cast<Index>(n));
    for (std::size_t j = 0; j < m.parents.size(); ++j) {
        const auto col = ds.column(m.parents[j]);
        const auto& s = m.parent_scale[j];
        for (std::size_t i = 0; i < n; ++i) {
            P(static_cast<Index>(j), static_cast<Index>(i)) = s.apply(col[rows.empty() ? i : rows[i]]);
        }
    }
    return P;
}

Embedding embed(const FlowModel& m, const MatrixXd& parents_std) {
    Embedding e;
    e.c = m.embedding.forward(parents_std);
    e.alpha = (m.offset_w.transpose() * e.c).transpose();
    e.alpha.array() += m.offset_b;
    return e;
}

VectorXd forward_std(const FlowModel& m, const Embedding& e, const VectorXd& ell) {
    const Index n = ell.size();
    VectorXd z(n);
    for (Index s = 0; s < n; s += kSubBatch) {
        const Index len = std::min(kSubBatch, n - s);
        z.segment(s, len) = forward_block(m, slice(e, s, len), ell.segment(s, len));
    }
    return z;
}

VectorXd integrand_std(const FlowModel& m, const Embedding& e, const VectorXd& ell) {
    MatrixXd T(1, ell.size());
    T.row(0) = ell.transpose();
    return eval_integrand(m, e.c, T, nullptr).transpose();
}

VectorXd invert_std(const FlowModel& m, const Embedding& e, const VectorXd& z, double tol) {
    const Index n = z.size();
    VectorXd lo = VectorXd::Constant(n, -1.0), hi = VectorXd::Constant(n, 1.0);
    VectorXd flo = forward_std(m, e, lo), fhi = forward_std(m, e, hi);

    // Geometric expansion until forward(lo) <= z <= forward(hi).
    for (int doubling = 0;; ++doubling) {
        std::vector<Index> low, high;
        for (Index i = 0; i < n; ++i) {
            if (flo[i] > z[i]) low.push_back(i);
            if (fhi[i] < z[i]) high.push_back(i);
        }
        if (low.empty() && high.empty()) break;
        if (doubling == 60) {
            throw RangeError("flow for '" + m.target + "' has no bracket for z = " +
                             std::to_string(z[low.empty() ? high.front() : low.front()]) + " after 60 doublings");
        }
        if (!low.empty()) {
            VectorXd l = lo(low) * 2.0;
            const VectorXd f = forward_std(m, select(e, low), l);
            for (std::size_t k = 0; k < low.size(); ++k) {
                hi[low[k]] = std::min(hi[low[k]], lo[low[k]]);
                fhi[low[k]] = std::min(fhi[low[k]], flo[low[k]]);
                lo[low[k]] = l[static_cast<Index>(k)];
                flo[low[k]] = f[static_cast<Index>(k)];
            }
        }
        if (!high.empty()) {
            VectorXd h = hi(high) * 2.0;
            const VectorXd f = forward_std(m, select(e, high), h);
            for (std::size_t k = 0; k < high.size(); ++k) {
                lo[high[k]] = std::max(lo[high[k]], hi[high[k]]);
                flo[high[k]] = std::max(flo[high[k]], fhi[high[k]]);
                hi[high[k]] = h[static_cast<Index>(k)];
                fhi[high[k]] = f[static_cast<Index>(k)];
            }
        }
    }

    VectorXd out(n);
    std::vector<Index> active;
    for (Index i = 0; i < n; ++i) {
        if (std::abs(flo[i] - z[i]) <= tol) {
            out[i] = lo[i];
        } else if (std::abs(fhi[i] - z[i]) <= tol) {
            out[i] = hi[i];
        } else {
            active.push_back(i);
        }
    }
    while (!active.empty()) {
        VectorXd mid(static_cast<Index>(active.size()));
        for (std::size_t k = 0; k < active.size(); ++k) mid[static_cast<Index>(k)] = 0.5 * (lo[active[k]] + hi[active[k]]);
        const VectorXd f = forward_std(m, select(e, active), mid);
        std::vector<Index> next;
        for (std::size_t k = 0; k < active.size(); ++k) {
            const Index i = active[k];
            const double md = mid[static_cast<Index>(k)], fm = f[static_cast<Index>(k)];
            if (std::abs(fm - z[i]) <= tol || md == lo[i] || md == hi[i]) {
                out[i] = md;
                continue;
            }
            if (fm < z[i]) {
                lo[i] = md;
            } else {
                hi[i] = md;
            }
            next.push_back(i);
        }
        active = std::move(next);
    }
    return out;
}

double mean_nll(const FlowModel& m, const MatrixXd& parents_std, const VectorXd& ell, std::vector<double>* gradient) {
    const Index n = ell.size();
    if (n == 0) throw Error(ErrorKind::internal, "negative log-likelihood of an empty batch");
    const Index N = m.rule.N, M = N + 1;
    const double log_sd = std::log(m.target_scale.sd);
    double total = 0.0;

    std::vector<DenseGrad> eg, ig;
    VectorXd gw;
    double gb = 0.0;
    if (gradient) {
        eg = m.embedding.zero_grad();
        ig = m.integrand.zero_grad();
        gw = VectorXd::Zero(m.offset_w.size());
    }

    for (Index s0 = 0; s0 < n; s0 += kSubBatch) {
        const Index S = std::min(kSubBatch, n - s0);
        const MatrixXd P = parents_std.middleCols(s0, S);
        const VectorXd l = ell.segment(s0, S);
        std::vector<MatrixXd> eacts;
        const MatrixXd c = m.embedding.forward(P, 0, gradient ? &eacts : nullptr);
        VectorXd alpha = (m.offset_w.transpose() * c).transpose();
        alpha.array() += m.offset_b;

        const MatrixXd T = node_points(m.rule, l, true);
        IntegrandTape tape;
        const Eigen::RowVectorXd theta = eval_integrand(m, c, T, gradient ? &tape : nullptr);

        VectorXd z(S);
        for (Index i = 0; i < S; ++i) {
            double acc = 0.0;
            for (Index k = 0; k < N; ++k) acc += m.rule.weights[static_cast<std::size_t>(k)] * theta[i * M + k];
            z[i] = 0.5 * l[i] * acc + alpha[i];
            total += 0.5 * z[i] * z[i] + kHalfLog2Pi - std::log(theta[i * M + N]) + log_sd;
        }
        if (!gradient) continue;

        // dL/dtheta at the quadrature points and at ell.
        MatrixXd gtheta(1, S * M);
        for (Index i = 0; i < S; ++i) {
            for (Index k = 0; k < N; ++k) gtheta(0, i * M + k) = z[i] * 0.5 * l[i] * m.rule.weights[static_cast<std::size_t>(k)];
            gtheta(0, i * M + N) = -1.0 / theta[i * M + N];
        }
        const Dense& first = m.integrand.layers.front();
        const MatrixXd g1 = m.integrand.backward(tape.h1, tape.acts, std::move(gtheta), ig, 1);
        MatrixXd g0 = m.integrand.layers[1].W.transpose() * g1;
        scale_by_derivative(g0, tape.h1, first.act);

        const Index E = c.rows();
        ig[0].W.col(0) += g0 * tape.t;
        ig[0].b += g0.rowwise().sum();
        MatrixXd gs(g0.rows(), S);
        for (Index i = 0; i < S; ++i) gs.col(i) = g0.middleCols(i * M, M).rowwise().sum();
        ig[0].W.rightCols(E) += gs * c.transpose();
        MatrixXd dc = first.W.rightCols(E).transpose() * gs;

        gw += c * z;
        gb += z.sum();
        dc += m.offset_w * z.transpose();
        m.embedding.backward(P, eacts, std::move(dc), eg, 0);
    }

    const double inv = 1.0 / static_cast<double>(n);
    if (gradient) {
        gradient->clear();
        gradient->reserve(m.parameter_count());
        append_grads(eg, *gradient);
        append_grads(ig, *gradient);
        gradient->insert(gradient->end(), gw.data(), gw.data() + gw.size());
        gradient->push_back(gb);
        for (double& g : *gradient) g *= inv;
    }
    return total * inv;
}

double flow_forward(const FlowModel& m, const Record& parents, double l) {
    const Embedding e = embed_record(m, parents);
    return forward_std(m, e, VectorXd::Constant(1, m.target_scale.apply(l)))[0];
}

double flow_log_density(const FlowModel& m, const Record& parents, double l) {
    const Embedding e = embed_record(m, parents);
    const VectorXd ell = VectorXd::Constant(1, m.target_scale.apply(l));
    const double z = forward_std(m, e, ell)[0];
    const double theta = integrand_std(m, e, ell)[0];
    return -0.5 * z * z - kHalfLog2Pi + std::log(theta) - std::log(m.target_scale.sd);
}

double flow_invert(const FlowModel& m, const Record& parents, double z) {
    const Embedding e = embed_record(m, parents);
    return m.target_scale.invert(invert_std(m, e, VectorXd::Constant(1, z))[0]);
}

namespace {

double support_hi(const data::VariableKind& k) { return k.has_finite_support() ? k.levels - 1.0 : -1.0; }

}  // namespace

double flow_sample(const FlowModel& m, const Record& parents, SequentialRng& rng) {
    const double l = flow_invert(m, parents, rng.normal());
    return m.discrete() ? Dequantizer::requantize(l, 0.0, support_hi(m.kind)) : l;
}

void flow_sample(const FlowModel& m, const Frame& parents, const Innovations& innovations, std::span<double> out) {
    const std::size_t n = parents.rows();
    if (innovations.size() != n || out.size() != n) {
        throw Error(ErrorKind::internal, "flow_sample: frame, innovations and output sizes differ");
    }
    const Embedding e = embed(m, standardized_parents(m, parents));
    const auto zs = innovations.normal();
    const VectorXd z = Eigen::Map<const VectorXd>(zs.data(), static_cast<Index>(n));

    if (m.kind.has_finite_support()) {
        std::fill(out.begin(), out.end(), 0.0);
        for (int k = 0; k + 1 < m.kind.levels; ++k) {
            const double boundary = m.target_scale.apply(k + 0.5);
            const VectorXd f = forward_std(m, e, VectorXd::Constant(static_cast<Index>(n), boundary));
            for (std::size_t i = 0; i < n; ++i) out[i] += z[static_cast<Index>(i)] >= f[static_cast<Index>(i)] ? 1.0 : 0.0;
        }
        return;
    }
    const VectorXd ell = invert_std(m, e, z);
    for (std::size_t i = 0; i < n; ++i) {
        const double l = m.target_scale.invert(ell[static_cast<Index>(i)]);
        out[i] = m.discrete() ? Dequantizer::requantize(l, 0.0, -1.0) : l;
    }
}

double joint_nll(const std::vector<FlowModel>& models, const data::CausalDataset& ds, std::span<const std::size_t> rows) {
    double total = 0.0;
    for (const auto& m : models) {
        const auto y = ds.column(m.target);
        const std::size_t n = rows.empty() ? ds.n() : rows.size();
        VectorXd ell(static_cast<Index>(n));
        for (std::size_t i = 0; i < n; ++i) ell[static_cast<Index>(i)] = m.target_scale.apply(y[rows.empty() ? i : rows[i]]);
        const double v = mean_nll(m, standardized_parents(m, ds, rows), ell);
        if (!std::isfinite(v)) throw TrainingError("non-finite negative log-likelihood for '" + m.target + "'");
        total += v;
    }
    return total;
}

namespace {

nlohmann::ordered_json layers_json(const MLP& net) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& l : net.layers) {
        nlohmann::ordered_json j;
        j["rows"] = l.W.rows();
        j["cols"] = l.W.cols();
        j["activation"] = to_string(l.act);
        j["W"] = std::vector<double>(l.W.data(), l.W.data() + l.W.size());
        j["b"] = std::vector<double>(l.b.data(), l.b.data() + l.b.size());
        arr.push_back(j);
    }
    return arr;
}

MLP layers_from_json(const nlohmann::json& arr) {
    MLP net;
    for (const auto& j : arr) {
        Dense d;
        const auto rows = j.at("rows").get<Index>(), cols = j.at("cols").get<Index>();
        const auto W = j.at("W").get<std::vector<double>>();
        const auto b = j.at("b").get<std::vector<double>>();
        if (static_cast<Index>(W.size()) != rows * cols || static_cast<Index>(b.size()) != rows) {
            throw ConfigError("flow layer weights do not match their declared shape");
        }
        d.W = Eigen::Map<const MatrixXd>(W.data(), rows, cols);
        d.b = Eigen::Map<const VectorXd>(b.data(), rows);
        d.act = parse_activation(j.at("activation").get<std::string>());
        net.layers.push_back(std::move(d));
    }
    return net;
}

}  // namespace

nlohmann::ordered_json to_json(const FlowModel& m) {
    nlohmann::ordered_json j;
    j["target"] = m.target;
    j["kind"] = m.kind.to_string();
    j["parents"] = m.parents;
    j["architecture"] = {{"embedding_hidden", m.arch.embedding_hidden},
                         {"embedding_dim", m.arch.embedding_dim},
                         {"integrand_hidden", m.arch.integrand_hidden},
                         {"integrand_activation", to_string(m.arch.integrand_activation)},
                         {"quadrature_nodes", m.arch.quadrature_nodes}};
    j["target_scale"] = {{"mean", m.target_scale.mean}, {"sd", m.target_scale.sd}};
    auto ps = nlohmann::ordered_json::array();
    for (const auto& s : m.parent_scale) ps.push_back({{"mean", s.mean}, {"sd", s.sd}});
    j["parent_scale"] = ps;
    if (m.discrete()) j["dequantization"] = {{"law", "normal"}, {"sigma", m.dequantizer.sigma}};
    j["embedding"] = layers_json(m.embedding);
    j["integrand"] = layers_json(m.integrand);
    j["offset"] = {{"w", std::vector<double>(m.offset_w.data(), m.offset_w.data() + m.offset_w.size())},
                   {"b", m.offset_b}};
    return j;
}

FlowModel flow_from_json(const nlohmann::json& j) {
    try {
        FlowModel m;
        m.target = j.at("target").get<std::string>();
        m.kind = data::parse_kind(j.at("kind").get<std::string>());
        m.parents = j.at("parents").get<std::vector<std::string>>();
        const auto& a = j.at("architecture");
        m.arch.embedding_hidden = a.at("embedding_hidden").get<std::vector<int>>();
        m.arch.embedding_dim = a.at("embedding_dim").get<int>();
        m.arch.integrand_hidden = a.at("integrand_hidden").get<std::vector<int>>();
        m.arch.integrand_activation = parse_activation(a.at("integrand_activation").get<std::string>());
        m.arch.quadrature_nodes = a.at("quadrature_nodes").get<int>();
        m.arch.validate();
        m.rule = clenshaw_curtis(m.arch.quadrature_nodes);
        m.target_scale = {j.at("target_scale").at("mean").get<double>(), j.at("target_scale").at("sd").get<double>()};
        for (const auto& s : j.at("parent_scale")) m.parent_scale.push_back({s.at("mean").get<double>(), s.at("sd").get<double>()});
        if (m.parent_scale.size() != m.parents.size()) throw ConfigError("flow parent scales do not match its parents");
        if (j.contains("dequantization")) m.dequantizer.sigma = j["dequantization"].at("sigma").get<double>();
        m.embedding = layers_from_json(j.at("embedding"));
        m.integrand = layers_from_json(j.at("integrand"));
        const auto w = j.at("offset").at("w").get<std::vector<double>>();
        m.offset_w = Eigen::Map<const VectorXd>(w.data(), static_cast<Index>(w.size()));
        m.offset_b = j.at("offset").at("b").get<double>();
        if (m.embedding.input_dim() != static_cast<int>(m.parents.size()) ||
            m.integrand.input_dim() != 1 + m.embedding.output_dim() || m.offset_w.size() != m.embedding.output_dim()) {
            throw ConfigError("flow network shapes are inconsistent");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed flow JSON: ") + e.what());
    }
}

}  // namespace medsim::flows
