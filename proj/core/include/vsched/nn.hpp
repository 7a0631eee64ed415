#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vsched/common.hpp"

namespace vsched::nn {

enum class Activation { Sigmoid, Tanh, Relu };

Activation activation_from_name(const std::string& name);
std::string activation_name(Activation a);

struct Layer {
    std::vector<std::vector<double>> W;  // [out][in]
    std::vector<double> b;
    int fan_in() const { return W.empty() ? 0 : static_cast<int>(W[0].size()); }
    int fan_out() const { return static_cast<int>(W.size()); }
    bool operator==(const Layer&) const = default;
};

// Fully connected network with hidden activations and a linear output.
// Plain: hidden stack + one output layer. Dueling: hidden stack + a scalar
// head v and an advantage head a; output_j = v + a_j - mean(a). Gradients
// are accumulated into a same-shaped Net, so the class doubles as its own
// gradient container.
class Net {
public:
    enum class Arch { Plain, Dueling };

    Net() = default;
    Net(Arch arch, int inputs, const std::vector<int>& hidden, int outputs, Activation act,
        std::uint64_t seed);

    Arch arch() const { return arch_; }
    Activation activation() const { return act_; }
    int inputs() const { return inputs_; }
    int outputs() const { return outputs_; }
    const std::vector<int>& hidden() const { return hidden_; }

    std::vector<double> forward(const std::vector<double>& x) const;

    struct Cache {
        std::vector<std::vector<double>> acts;  // acts[0] = input, then post-activations
        std::vector<double> adv;                // dueling: advantage head output
    };
    std::vector<double> forward_cached(const std::vector<double>& x, Cache& cache) const;

    // Accumulates d(loss)/d(params) into `grads` given d(loss)/d(output).
    void backward(const Cache& cache, const std::vector<double>& dout, Net& grads) const;

    Net zeros_like() const;
    void zero();
    void axpy(double a, const Net& g);  // params += a * g
    double grad_norm() const;

    std::size_t param_count() const;
    std::vector<double*> param_ptrs();              // stable for the Net's lifetime
    std::vector<const double*> param_ptrs() const;  // read-only view, same order

    std::string to_json() const;
    static Net from_json(const std::string& text);
    void save(const std::string& path) const;
    static Net load(const std::string& path);

    bool same_shape(const Net& o) const;
    bool operator==(const Net& o) const = default;

private:
    Arch arch_ = Arch::Plain;
    Activation act_ = Activation::Sigmoid;
    int inputs_ = 0;
    int outputs_ = 0;
    std::vector<int> hidden_;
    std::vector<Layer> trunk_;  // hidden layers
    Layer out_;                 // plain output head
    Layer v_head_, a_head_;     // dueling heads
};

// Per-parameter moment-scaled gradient descent. Regression targets in this
// library span two orders of magnitude across reward terms, which stalls
// plain SGD; moment scaling makes the step size scale-free.
class Adam {
public:
    Adam() = default;
    explicit Adam(const Net& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

    // params -= lr * mhat / (sqrt(vhat) + eps). `grads` must match the shape
    // the state was built for; throws Error otherwise.
    void step(Net& net, const Net& grads, double lr);

    long long updates() const { return t_; }

private:
    Net m_, v_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    long long t_ = 0;
};

std::vector<double> softmax(const std::vector<double>& logits);
std::vector<double> log_softmax(const std::vector<double>& logits);
int argmax(const std::vector<double>& v);

}  // namespace vsched::nn
