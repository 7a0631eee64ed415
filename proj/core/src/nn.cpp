#include "vsched/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace vsched::nn {

Activation activation_from_name(const std::string& name) {
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "tanh") return Activation::Tanh;
    if (name == "relu") return Activation::Relu;
    throw Error("unknown activation \"" + name + "\" (want sigmoid|tanh|relu)");
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
    }
    return "?";
}

namespace {

double act_apply(Activation a, double z) {
    switch (a) {
        case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case Activation::Tanh: return std::tanh(z);
        case Activation::Relu: return z > 0 ? z : 0.0;
    }
    return z;
}

// Derivative expressed through the post-activation value.
double act_deriv(Activation a, double y) {
    switch (a) {
        case Activation::Sigmoid: return y * (1.0 - y);
        case Activation::Tanh: return 1.0 - y * y;
        case Activation::Relu: return y > 0 ? 1.0 : 0.0;
    }
    return 1.0;
}

Layer make_layer(int in, int out, Rng& rng) {
    Layer l;
    const double lim = std::sqrt(6.0 / (in + out));
    l.W.assign(static_cast<size_t>(out), std::vector<double>(static_cast<size_t>(in)));
    l.b.assign(static_cast<size_t>(out), 0.0);
    for (auto& row : l.W)
        for (double& w : row) w = (rng.uniform01() * 2.0 - 1.0) * lim;
    return l;
}

Layer zero_layer(const Layer& like) {
    Layer l;
    l.W.assign(like.W.size(), std::vector<double>(like.W.empty() ? 0 : like.W[0].size(), 0.0));
    l.b.assign(like.b.size(), 0.0);
    return l;
}

std::vector<double> layer_forward(const Layer& l, const std::vector<double>& x) {
    std::vector<double> z(l.W.size(), 0.0);
    for (size_t o = 0; o < l.W.size(); ++o) {
        double s = l.b[o];
        const auto& row = l.W[o];
        for (size_t i = 0; i < row.size(); ++i) s += row[i] * x[i];
        z[o] = s;
    }
    return z;
}

// Accumulates parameter gradients for dz and returns d(loss)/d(input).
std::vector<double> layer_backward(const Layer& l, const std::vector<double>& x,
                                   const std::vector<double>& dz, Layer& g) {
    std::vector<double> dx(x.size(), 0.0);
    for (size_t o = 0; o < l.W.size(); ++o) {
        g.b[o] += dz[o];
        const auto& row = l.W[o];
        auto& grow = g.W[o];
        for (size_t i = 0; i < row.size(); ++i) {
            grow[i] += dz[o] * x[i];
            dx[i] += row[i] * dz[o];
        }
    }
    return dx;
}

void layer_axpy(Layer& dst, double a, const Layer& src) {
    for (size_t o = 0; o < dst.W.size(); ++o) {
        for (size_t i = 0; i < dst.W[o].size(); ++i) dst.W[o][i] += a * src.W[o][i];
        dst.b[o] += a * src.b[o];
    }
}

nlohmann::json layer_json(const Layer& l) { return {{"W", l.W}, {"b", l.b}}; }

Layer layer_from_json(const nlohmann::json& j) {
    Layer l;
    l.W = j.at("W").get<std::vector<std::vector<double>>>();
    l.b = j.at("b").get<std::vector<double>>();
    return l;
}

}  // namespace

Net::Net(Arch arch, int inputs, const std::vector<int>& hidden, int outputs, Activation act,
         std::uint64_t seed)
    : arch_(arch), act_(act), inputs_(inputs), outputs_(outputs), hidden_(hidden) {
    if (inputs <= 0 || outputs <= 0) throw Error("net needs positive input/output sizes");
    if (hidden.empty()) throw Error("net needs at least one hidden layer");
    Rng rng(seed);
    int prev = inputs;
    for (int h : hidden) {
        if (h <= 0) throw Error("hidden layer sizes must be positive");
        trunk_.push_back(make_layer(prev, h, rng));
        prev = h;
    }
    if (arch_ == Arch::Plain) {
        out_ = make_layer(prev, outputs, rng);
    } else {
        v_head_ = make_layer(prev, 1, rng);
        a_head_ = make_layer(prev, outputs, rng);
    }
}

std::vector<double> Net::forward(const std::vector<double>& x) const {
    Cache c;
    return forward_cached(x, c);
}

std::vector<double> Net::forward_cached(const std::vector<double>& x, Cache& cache) const {
    if (static_cast<int>(x.size()) != inputs_) throw Error("net input size mismatch");
    cache.acts.clear();
    cache.acts.push_back(x);
    std::vector<double> h = x;
    for (const Layer& l : trunk_) {
        h = layer_forward(l, h);
        for (double& v : h) v = act_apply(act_, v);
        cache.acts.push_back(h);
    }
    if (arch_ == Arch::Plain) return layer_forward(out_, h);

    const std::vector<double> v = layer_forward(v_head_, h);
    std::vector<double> a = layer_forward(a_head_, h);
    cache.adv = a;
    double mean = 0.0;
    for (double ai : a) mean += ai;
    mean /= static_cast<double>(a.size());
    for (double& ai : a) ai = v[0] + ai - mean;
    return a;
}

void Net::backward(const Cache& cache, const std::vector<double>& dout, Net& grads) const {
    std::vector<double> dh;  // gradient w.r.t. trunk output
    const std::vector<double>& top = cache.acts.back();
    if (arch_ == Arch::Plain) {
        dh = layer_backward(out_, top, dout, grads.out_);
    } else {
        const int n = outputs_;
        double dsum = 0.0;
        for (double d : dout) dsum += d;
        std::vector<double> da(static_cast<size_t>(n));
        for (int j = 0; j < n; ++j)
            da[static_cast<size_t>(j)] = dout[static_cast<size_t>(j)] - dsum / n;
        const std::vector<double> dv{dsum};
        dh = layer_backward(v_head_, top, dv, grads.v_head_);
        std::vector<double> dh2 = layer_backward(a_head_, top, da, grads.a_head_);
        for (size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
    }
    for (size_t li = trunk_.size(); li-- > 0;) {
        const std::vector<double>& y = cache.acts[li + 1];
        std::vector<double> dz(y.size());
        for (size_t i = 0; i < y.size(); ++i) dz[i] = dh[i] * act_deriv(act_, y[i]);
        dh = layer_backward(trunk_[li], cache.acts[li], dz, grads.trunk_[li]);
    }
}

Net Net::zeros_like() const {
    Net g = *this;
    g.zero();
    return g;
}

void Net::zero() {
    auto z = [](Layer& l) {
        for (auto& row : l.W) std::fill(row.begin(), row.end(), 0.0);
        std::fill(l.b.begin(), l.b.end(), 0.0);
    };
    for (Layer& l : trunk_) z(l);
    z(out_);
    z(v_head_);
    z(a_head_);
}

void Net::axpy(double a, const Net& g) {
    for (size_t i = 0; i < trunk_.size(); ++i) layer_axpy(trunk_[i], a, g.trunk_[i]);
    if (arch_ == Arch::Plain) {
        layer_axpy(out_, a, g.out_);
    } else {
        layer_axpy(v_head_, a, g.v_head_);
        layer_axpy(a_head_, a, g.a_head_);
    }
}

double Net::grad_norm() const {
    double s = 0.0;
    auto add = [&](const Layer& l) {
        for (const auto& row : l.W)
            for (double w : row) s += w * w;
        for (double b : l.b) s += b * b;
    };
    for (const Layer& l : trunk_) add(l);
    add(out_);
    add(v_head_);
    add(a_head_);
    return std::sqrt(s);
}

std::size_t Net::param_count() const {
    std::size_t n = 0;
    auto add = [&](const Layer& l) {
        for (const auto& row : l.W) n += row.size();
        n += l.b.size();
    };
    for (const Layer& l : trunk_) add(l);
    add(out_);
    add(v_head_);
    add(a_head_);
    return n;
}

std::vector<double*> Net::param_ptrs() {
    std::vector<double*> p;
    auto add = [&](Layer& l) {
        for (auto& row : l.W)
            for (double& w : row) p.push_back(&w);
        for (double& b : l.b) p.push_back(&b);
    };
    for (Layer& l : trunk_) add(l);
    add(out_);
    add(v_head_);
    add(a_head_);
    return p;
}

std::vector<const double*> Net::param_ptrs() const {
    std::vector<const double*> p;
    auto add = [&](const Layer& l) {
        for (const auto& row : l.W)
            for (const double& w : row) p.push_back(&w);
        for (const double& b : l.b) p.push_back(&b);
    };
    for (const Layer& l : trunk_) add(l);
    add(out_);
    add(v_head_);
    add(a_head_);
    return p;
}

Adam::Adam(const Net& net, double beta1, double beta2, double eps)
    : m_(net.zeros_like()), v_(net.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0 || eps <= 0.0)
        throw ValidationError("optimizer moments must satisfy 0 <= beta < 1, eps > 0");
}

void Adam::step(Net& net, const Net& grads, double lr) {
    if (!m_.same_shape(net) || !net.same_shape(grads))
        throw Error("optimizer state does not match the network shape");
    t_ += 1;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::vector<double*> p = net.param_ptrs();
    std::vector<double*> m = m_.param_ptrs();
    std::vector<double*> v = v_.param_ptrs();
    std::vector<const double*> g = grads.param_ptrs();
    for (std::size_t i = 0; i < p.size(); ++i) {
        *m[i] = beta1_ * *m[i] + (1.0 - beta1_) * *g[i];
        *v[i] = beta2_ * *v[i] + (1.0 - beta2_) * *g[i] * *g[i];
        const double mhat = *m[i] / bc1;
        const double vhat = *v[i] / bc2;
        *p[i] -= lr * mhat / (std::sqrt(vhat) + eps_);
    }
}

std::string Net::to_json() const {
    nlohmann::json j;
    j["arch"] = arch_ == Arch::Plain ? "plain" : "dueling";
    j["activation"] = activation_name(act_);
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    j["hidden"] = hidden_;
    nlohmann::json trunk = nlohmann::json::array();
    for (const Layer& l : trunk_) trunk.push_back(layer_json(l));
    j["trunk"] = trunk;
    if (arch_ == Arch::Plain) {
        j["out"] = layer_json(out_);
    } else {
        j["v"] = layer_json(v_head_);
        j["a"] = layer_json(a_head_);
    }
    return j.dump();
}

Net Net::from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    Net n;
    n.arch_ = j.at("arch").get<std::string>() == "dueling" ? Arch::Dueling : Arch::Plain;
    n.act_ = activation_from_name(j.at("activation").get<std::string>());
    n.inputs_ = j.at("inputs").get<int>();
    n.outputs_ = j.at("outputs").get<int>();
    n.hidden_ = j.at("hidden").get<std::vector<int>>();
    for (const auto& lj : j.at("trunk")) n.trunk_.push_back(layer_from_json(lj));
    if (n.arch_ == Arch::Plain) {
        n.out_ = layer_from_json(j.at("out"));
    } else {
        n.v_head_ = layer_from_json(j.at("v"));
        n.a_head_ = layer_from_json(j.at("a"));
    }
    return n;
}

void Net::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << to_json() << "\n";
}

Net Net::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

bool Net::same_shape(const Net& o) const {
    return arch_ == o.arch_ && inputs_ == o.inputs_ && outputs_ == o.outputs_ &&
           hidden_ == o.hidden_;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    std::vector<double> p(logits.size());
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] - mx);
        sum += p[i];
    }
    for (double& v : p) v /= sum;
    return p;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
    std::vector<double> lp(logits.size());
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    const double lse = mx + std::log(sum);
    for (size_t i = 0; i < logits.size(); ++i) lp[i] = logits[i] - lse;
    return lp;
}

int argmax(const std::vector<double>& v) {
    return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace vsched::nn
