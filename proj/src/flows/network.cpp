#include "medsim/flows/network.hpp"

#include "medsim/error.hpp"

#include <cmath>

namespace medsim::flows {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::linear: return "linear";
        case Activation::relu: return "relu";
        case Activation::elu: return "elu";
        case Activation::tanh: return "tanh";
        case Activation::elu_plus: return "elu-plus";
    }
    return "?";
}

Activation parse_activation(const std::string& text) {
    for (Activation a : {Activation::linear, Activation::relu, Activation::elu, Activation::tanh, Activation::elu_plus}) {
        if (to_string(a) == text) return a;
    }
    throw ConfigError("unknown activation '" + text + "'");
}

MLP::MLP(const std::vector<int>& widths, Activation hidden, Activation output) {
    if (widths.size() < 2) throw ConfigError("a network needs input and output widths");
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        if (widths[k] < 0 || widths[k + 1] < 1) throw ConfigError("network layer widths must be positive");
        Dense d;
        d.W = Eigen::MatrixXd::Zero(widths[k + 1], widths[k]);
        d.b = Eigen::VectorXd::Zero(widths[k + 1]);
        d.act = k + 2 == widths.size() ? output : hidden;
        layers.push_back(std::move(d));
    }
}

std::size_t MLP::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.W.size() + l.b.size());
    return n;
}

void MLP::initialize(SequentialRng& rng) {
    for (auto& l : layers) {
        const double bound = 1.0 / std::sqrt(std::max<double>(1.0, static_cast<double>(l.W.cols())));
        for (Eigen::Index j = 0; j < l.W.cols(); ++j)
            for (Eigen::Index i = 0; i < l.W.rows(); ++i) l.W(i, j) = bound * (2.0 * rng.uniform() - 1.0);
        for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = bound * (2.0 * rng.uniform() - 1.0);
    }
}

void activate(Eigen::MatrixXd& m, Activation a) {
    switch (a) {
        case Activation::linear: break;
        case Activation::relu: m = m.cwiseMax(0.0); break;
        case Activation::elu: m = m.unaryExpr([](double x) { return x > 0 ? x : std::expm1(x); }); break;
        case Activation::tanh: {
            // 1 - 2 / (exp(2x) + 1) keeps to Eigen's vectorized exp; saturates cleanly at +-1.
            auto e = (2.0 * m.array()).exp();
            m = (1.0 - 2.0 / (e + 1.0)).matrix();
            break;
        }
        case Activation::elu_plus: m = m.unaryExpr([](double x) { return elu_plus(x); }); break;
    }
}

void scale_by_derivative(Eigen::MatrixXd& g, const Eigen::MatrixXd& y, Activation a) {
    switch (a) {
        case Activation::linear: break;
        case Activation::relu: g = g.cwiseProduct((y.array() > 0).cast<double>().matrix()); break;
        case Activation::elu:
            g = g.cwiseProduct(y.unaryExpr([](double v) { return v > 0 ? 1.0 : v + 1.0; }));
            break;
        case Activation::tanh: g.array() *= 1.0 - y.array().square(); break;
        case Activation::elu_plus:
            g = g.cwiseProduct(y.unaryExpr([](double v) { return v > 1.0 ? 1.0 : v; }));
            break;
    }
}

Eigen::MatrixXd MLP::forward(const Eigen::MatrixXd& x, std::size_t first, std::vector<Eigen::MatrixXd>* acts) const {
    if (acts) {
        acts->clear();
        acts->reserve(layers.size() - first);
    }
    const Eigen::MatrixXd* in = &x;
    Eigen::MatrixXd h;
    for (std::size_t k = first; k < layers.size(); ++k) {
        const auto& l = layers[k];
        Eigen::MatrixXd pre;
        pre.noalias() = l.W * *in;
        pre.colwise() += l.b;
        activate(pre, l.act);
        if (acts) {
            acts->push_back(std::move(pre));
            in = &acts->back();
        } else {
            h = std::move(pre);
            in = &h;
        }
    }
    return first == layers.size() ? x : *in;
}

Eigen::MatrixXd MLP::backward(const Eigen::MatrixXd& input, const std::vector<Eigen::MatrixXd>& acts,
                              Eigen::MatrixXd g, std::vector<DenseGrad>& grads, std::size_t first) const {
    for (std::size_t k = layers.size(); k-- > first;) {
        const auto& l = layers[k];
        const std::size_t a = k - first;
        scale_by_derivative(g, acts[a], l.act);
        const Eigen::MatrixXd& in = a == 0 ? input : acts[a - 1];
        grads[k].W.noalias() += g * in.transpose();
        grads[k].b += g.rowwise().sum();
        if (k == first) return g;
        Eigen::MatrixXd next;
        next.noalias() = l.W.transpose() * g;
        g = std::move(next);
    }
    return g;
}

std::vector<DenseGrad> MLP::zero_grad() const {
    std::vector<DenseGrad> g;
    for (const auto& l : layers) {
        g.push_back({Eigen::MatrixXd::Zero(l.W.rows(), l.W.cols()), Eigen::VectorXd::Zero(l.b.size())});
    }
    return g;
}

}  // namespace medsim::flows
