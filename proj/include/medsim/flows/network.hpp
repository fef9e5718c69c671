#pragma once

#include "medsim/rng.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace medsim::flows {

enum class Activation { linear, relu, elu, tanh, elu_plus };

std::string to_string(Activation a);
Activation parse_activation(const std::string& text);

// ELU(x) + 1: x + 1 for x > 0, exp(x) otherwise. Strictly positive.
inline double elu_plus(double x) { return x > 0 ? x + 1.0 : std::exp(x); }

struct Dense {
    Eigen::MatrixXd W;  // out x in
    Eigen::VectorXd b;
    Activation act = Activation::linear;
};

struct DenseGrad {
    Eigen::MatrixXd W;
    Eigen::VectorXd b;
};

// Fully connected network; a batch is a matrix with one sample per column.
class MLP {
public:
    MLP() = default;
    // widths = {input, hidden..., output}.
    MLP(const std::vector<int>& widths, Activation hidden, Activation output);

    std::vector<Dense> layers;

    int input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().W.cols()); }
    int output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().W.rows()); }
    std::size_t parameter_count() const;

    // Symmetric uniform initialization with bound 1/sqrt(fan_in).
    void initialize(SequentialRng& rng);

    // Runs layers [first, end). acts, when given, receives the post-activation
    // output of every layer run (acts[k] belongs to layer first + k).
    Eigen::MatrixXd forward(const Eigen::MatrixXd& x, std::size_t first = 0,
                            std::vector<Eigen::MatrixXd>* acts = nullptr) const;

    // Back-propagates dL/d(output of the last layer) through layers [first, end).
    // Returns dL/d(pre-activation of layer first); input is the matrix fed to
    // layer first. grads must be sized by zero_grad.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& input, const std::vector<Eigen::MatrixXd>& acts,
                             Eigen::MatrixXd gout, std::vector<DenseGrad>& grads, std::size_t first = 0) const;

    std::vector<DenseGrad> zero_grad() const;
};

// Applies the activation in place.
void activate(Eigen::MatrixXd& m, Activation a);
// Multiplies g by the activation derivative expressed through the output y.
void scale_by_derivative(Eigen::MatrixXd& g, const Eigen::MatrixXd& y, Activation a);

}  // namespace medsim::flows
