#ifndef JSSP_NET_HPP
#define JSSP_NET_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jssp/env.hpp"
#include "jssp/graph.hpp"
#include "jssp/rng.hpp"

namespace jssp {

inline constexpr int kHiddenDim = 64;
inline constexpr int kGinLayers = 3;
inline constexpr int kCheckpointVersion = 1;

/// Affine map on row vectors: y = x * w + b.
struct Dense {
    Matrix w;
    RowVector b;

    static Dense zeros(int in, int out) { return {Matrix::Zero(in, out), RowVector::Zero(out)}; }
};

struct GinLayer {
    Dense hidden;  // in -> hidden, tanh
    Dense out;     // hidden -> hidden
    double eps = 0.0;
};

/// Every learnable weight: K GIN layers, the actor head (2H -> H -> 1, tanh)
/// and the critic head (H -> H -> 1, tanh). Gradients use the same type.
struct PolicyParams {
    int feature_dim = kFeatureDim;
    int hidden_dim = kHiddenDim;
    PrecedenceFlow flow = PrecedenceFlow::forward;  // graph the weights were trained on
    std::vector<GinLayer> gin;
    Dense actor_hidden;
    Dense actor_out;
    Dense critic_hidden;
    Dense critic_out;

    int layers() const noexcept { return static_cast<int>(gin.size()); }

    static PolicyParams zeros(int feature_dim = kFeatureDim, int hidden_dim = kHiddenDim, int layers = kGinLayers) {
        PolicyParams p;
        p.feature_dim = feature_dim;
        p.hidden_dim = hidden_dim;
        for (int k = 0; k < layers; ++k)
            p.gin.push_back({Dense::zeros(k == 0 ? feature_dim : hidden_dim, hidden_dim),
                             Dense::zeros(hidden_dim, hidden_dim), 0.0});
        p.actor_hidden = Dense::zeros(2 * hidden_dim, hidden_dim);
        p.actor_out = Dense::zeros(hidden_dim, 1);
        p.critic_hidden = Dense::zeros(hidden_dim, hidden_dim);
        p.critic_out = Dense::zeros(hidden_dim, 1);
        return p;
    }

    PolicyParams zeros_like() const {
        auto z = zeros(feature_dim, hidden_dim, layers());
        z.flow = flow;
        return z;
    }
};

struct NamedTensor {
    std::string name;
    std::span<double> data;
};

/// Flat views of every parameter tensor in a fixed order.
inline std::vector<NamedTensor> tensors(PolicyParams& p) {
    std::vector<NamedTensor> out;
    auto dense = [&out](const std::string& prefix, Dense& d) {
        out.push_back({prefix + ".w", {d.w.data(), static_cast<std::size_t>(d.w.size())}});
        out.push_back({prefix + ".b", {d.b.data(), static_cast<std::size_t>(d.b.size())}});
    };
    for (std::size_t k = 0; k < p.gin.size(); ++k) {
        const auto prefix = "gin." + std::to_string(k);
        dense(prefix + ".hidden", p.gin[k].hidden);
        dense(prefix + ".out", p.gin[k].out);
        out.push_back({prefix + ".eps", {&p.gin[k].eps, 1}});
    }
    dense("actor.hidden", p.actor_hidden);
    dense("actor.out", p.actor_out);
    dense("critic.hidden", p.critic_hidden);
    dense("critic.out", p.critic_out);
    return out;
}

inline std::size_t parameter_count(const PolicyParams& p) {
    std::size_t n = 0;
    for (const auto& t : tensors(const_cast<PolicyParams&>(p))) n += t.data.size();
    return n;
}

/// Glorot-uniform weights, zero biases, eps = 0. Weights that read the pooled
/// graph embedding (global half of the actor's first layer, the critic's first
/// layer) start at zero: the pooled sum grows with node count and would
/// otherwise saturate the tanh heads. Deterministic per seed.
inline PolicyParams init_params(std::uint64_t seed, int hidden_dim = kHiddenDim, int layers = kGinLayers,
                                PrecedenceFlow flow = PrecedenceFlow::forward) {
    auto p = PolicyParams::zeros(kFeatureDim, hidden_dim, layers);
    p.flow = flow;
    Rng rng(derive_seed({seed, 0x9A7A11ULL}));
    auto fill = [&rng](auto&& w, Eigen::Index fan_in, Eigen::Index fan_out) {
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
    };
    for (auto& layer : p.gin) {
        fill(layer.hidden.w, layer.hidden.w.rows(), layer.hidden.w.cols());
        fill(layer.out.w, layer.out.w.rows(), layer.out.w.cols());
    }
    fill(p.actor_hidden.w.topRows(hidden_dim), 2 * hidden_dim, hidden_dim);
    fill(p.actor_out.w, hidden_dim, 1);
    fill(p.critic_out.w, hidden_dim, 1);
    return p;
}

/// Everything the backward pass needs from a forward evaluation.
struct ForwardTrace {
    const UnifiedGraph* graph = nullptr;
    std::vector<Matrix> h;       // h[0] = features, h[k] = output of layer k
    std::vector<Matrix> agg;     // (1 + eps) h + neighbour sum, input to layer k's MLP
    std::vector<Matrix> hidden;  // tanh activations inside layer k's MLP
    RowVector pooled;            // sum over all nodes of h[K]
    Matrix actor_hidden;         // tanh activations of the actor head, one row per op
    Vector logits;               // one per op node
    RowVector critic_hidden;
    double value = 0.0;

    const Matrix& embeddings() const { return h.back(); }
};

namespace detail {

/// tanh through the vectorized exp; within ~3e-16 absolute of std::tanh and an
/// order of magnitude faster, since Eigen has no packet tanh for doubles.
/// |x| >= 20 already rounds to +-1; clamping keeps exp out of the slow
/// denormal range when pre-activations saturate.
template <class Derived>
void tanh_inplace(Eigen::MatrixBase<Derived>& m) {
    m = (1.0 - 2.0 / ((2.0 * m.array().max(-20.0).min(20.0)).exp() + 1.0)).matrix();
}

inline void neighbour_sum(const UnifiedGraph& g, const Matrix& h, double self_weight, Matrix& out) {
    out.noalias() = self_weight * h;
    for (int v = 0; v < g.num_nodes(); ++v)
        for (int i = g.in_offset[static_cast<std::size_t>(v)]; i < g.in_offset[static_cast<std::size_t>(v) + 1]; ++i)
            out.row(v) += h.row(g.in_src[static_cast<std::size_t>(i)]);
}

// Adjoint of neighbour_sum without the self term: out[u] += d[v] for u -> v.
inline void scatter_neighbours(const UnifiedGraph& g, const Matrix& d, Matrix& out) {
    for (int v = 0; v < g.num_nodes(); ++v)
        for (int i = g.in_offset[static_cast<std::size_t>(v)]; i < g.in_offset[static_cast<std::size_t>(v) + 1]; ++i)
            out.row(g.in_src[static_cast<std::size_t>(i)]) += d.row(v);
}

inline void check_shapes(const UnifiedGraph& g, const Matrix& x, const PolicyParams& p) {
    if (x.rows() != g.num_nodes() || x.cols() != p.feature_dim)
        throw std::invalid_argument("feature matrix is " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) +
                                    ", graph expects " + std::to_string(g.num_nodes()) + "x" +
                                    std::to_string(p.feature_dim));
    if (p.gin.empty()) throw std::invalid_argument("policy has no GIN layers");
}

}  // namespace detail

/// GIN message passing: h_k = MLP_k((1 + eps_k) h_{k-1} + sum of in-neighbours).
/// Fills the trace's per-layer records and returns the final embeddings.
inline const Matrix& encode(const UnifiedGraph& g, const Matrix& x, const PolicyParams& p, ForwardTrace& trace) {
    detail::check_shapes(g, x, p);
    const auto layers = p.gin.size();
    trace.graph = &g;
    trace.h.resize(layers + 1);
    trace.agg.resize(layers);
    trace.hidden.resize(layers);
    trace.h[0] = x;
    for (std::size_t k = 0; k < layers; ++k) {
        const auto& layer = p.gin[k];
        detail::neighbour_sum(g, trace.h[k], 1.0 + layer.eps, trace.agg[k]);
        trace.hidden[k].noalias() = trace.agg[k] * layer.hidden.w;
        trace.hidden[k].rowwise() += layer.hidden.b;
        detail::tanh_inplace(trace.hidden[k]);
        trace.h[k + 1].noalias() = trace.hidden[k] * layer.out.w;
        trace.h[k + 1].rowwise() += layer.out.b;
    }
    return trace.h.back();
}

inline Matrix encode(const UnifiedGraph& g, const Matrix& x, const PolicyParams& p) {
    ForwardTrace t;
    return encode(g, x, p, t);
}

/// Sum pooling over all node embeddings.
inline RowVector readout(const Matrix& h) { return h.colwise().sum(); }

/// Raw actor logits for the first `num_ops` rows of `h`.
inline Vector actor_logits(const Matrix& h, const RowVector& pooled, int num_ops, const PolicyParams& p,
                           Matrix* hidden_out = nullptr) {
    const int d = p.hidden_dim;
    RowVector shared = pooled * p.actor_hidden.w.bottomRows(d) + p.actor_hidden.b;
    Matrix a = h.topRows(num_ops) * p.actor_hidden.w.topRows(d);
    a.rowwise() += shared;
    detail::tanh_inplace(a);
    Vector logits = a * p.actor_out.w.col(0);
    logits.array() += p.actor_out.b(0);
    if (hidden_out) *hidden_out = std::move(a);
    return logits;
}

inline double critic_value(const RowVector& pooled, const PolicyParams& p, RowVector* hidden_out = nullptr) {
    RowVector c = pooled * p.critic_hidden.w + p.critic_hidden.b;
    detail::tanh_inplace(c);
    const double v = c.dot(p.critic_out.w.col(0)) + p.critic_out.b(0);
    if (hidden_out) *hidden_out = std::move(c);
    return v;
}

/// Full forward pass: embeddings, pooled readout, op logits and value.
inline ForwardTrace forward(const UnifiedGraph& g, const Matrix& x, const PolicyParams& p) {
    ForwardTrace t;
    encode(g, x, p, t);
    t.pooled = readout(t.h.back());
    t.logits = actor_logits(t.h.back(), t.pooled, g.num_op_nodes, p, &t.actor_hidden);
    t.value = critic_value(t.pooled, p, &t.critic_hidden);
    return t;
}

/// Softmax over the entries where mask is set; masked entries are exactly 0.
inline Vector masked_softmax(const Vector& logits, std::span<const char> mask) {
    if (mask.size() != static_cast<std::size_t>(logits.size()))
        throw std::invalid_argument("mask length does not match logits");
    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (mask[static_cast<std::size_t>(i)]) peak = std::max(peak, logits(i));
    if (peak == -std::numeric_limits<double>::infinity()) throw ContractError("masked softmax with no eligible entry");
    Vector probs = Vector::Zero(logits.size());
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!mask[static_cast<std::size_t>(i)]) continue;
        probs(i) = std::exp(logits(i) - peak);
        total += probs(i);
    }
    return probs / total;
}

/// Reverse-mode pass. Accumulates into `grads` the gradient of a scalar loss
/// whose partials with respect to the logits and the value are given.
inline void backward(const ForwardTrace& t, const PolicyParams& p, const Vector& dlogits, double dvalue,
                     PolicyParams& grads) {
    if (!t.graph || t.h.size() != p.gin.size() + 1) throw std::invalid_argument("trace does not match parameters");
    if (grads.layers() != p.layers() || grads.hidden_dim != p.hidden_dim)
        throw std::invalid_argument("gradient buffer does not match parameters");
    const auto& g = *t.graph;
    const int d = p.hidden_dim;
    const int n = g.num_op_nodes;
    if (dlogits.size() != n) throw std::invalid_argument("logit gradient has wrong length");

    // Actor head.
    grads.actor_out.w.col(0).noalias() += t.actor_hidden.transpose() * dlogits;
    grads.actor_out.b(0) += dlogits.sum();
    Matrix dz = dlogits * p.actor_out.w.col(0).transpose();
    dz.array() *= 1.0 - t.actor_hidden.array().square();
    const RowVector dz_sum = dz.colwise().sum();
    const Matrix& hk = t.h.back();
    grads.actor_hidden.w.topRows(d).noalias() += hk.topRows(n).transpose() * dz;
    grads.actor_hidden.w.bottomRows(d).noalias() += t.pooled.transpose() * dz_sum;
    grads.actor_hidden.b += dz_sum;

    RowVector dpooled = dz_sum * p.actor_hidden.w.bottomRows(d).transpose();

    // Critic head.
    grads.critic_out.w.col(0) += dvalue * t.critic_hidden.transpose();
    grads.critic_out.b(0) += dvalue;
    RowVector dc = dvalue * p.critic_out.w.col(0).transpose();
    dc.array() *= 1.0 - t.critic_hidden.array().square();
    grads.critic_hidden.w.noalias() += t.pooled.transpose() * dc;
    grads.critic_hidden.b += dc;
    dpooled.noalias() += dc * p.critic_hidden.w.transpose();

    // Readout broadcasts its gradient to every node.
    Matrix dh = Matrix::Zero(hk.rows(), hk.cols());
    dh.rowwise() += dpooled;
    dh.topRows(n).noalias() += dz * p.actor_hidden.w.topRows(d).transpose();

    for (std::size_t k = p.gin.size(); k-- > 0;) {
        const auto& layer = p.gin[k];
        auto& gl = grads.gin[k];
        gl.out.w.noalias() += t.hidden[k].transpose() * dh;
        gl.out.b += dh.colwise().sum();
        Matrix dhid = dh * layer.out.w.transpose();
        dhid.array() *= 1.0 - t.hidden[k].array().square();
        gl.hidden.w.noalias() += t.agg[k].transpose() * dhid;
        gl.hidden.b += dhid.colwise().sum();
        const Matrix dagg = dhid * layer.hidden.w.transpose();
        gl.eps += (dagg.array() * t.h[k].array()).sum();
        if (k == 0) break;  // input features are constants
        Matrix dprev = (1.0 + layer.eps) * dagg;
        detail::scatter_neighbours(g, dagg, dprev);
        dh = std::move(dprev);
    }
}

/// Versioned JSON checkpoint: dims, named flat parameter arrays, metadata.
inline nlohmann::json checkpoint_to_json(PolicyParams p, const nlohmann::json& metadata = nlohmann::json::object()) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& t : tensors(p)) params[t.name] = std::vector<double>(t.data.begin(), t.data.end());
    return {{"format_version", kCheckpointVersion},
            {"dims", {{"feature_dim", p.feature_dim}, {"hidden_dim", p.hidden_dim}, {"actor_input", 2 * p.hidden_dim}}},
            {"K", p.layers()},
            {"precedence_flow", p.flow == PrecedenceFlow::forward ? "forward" : "bidirectional"},
            {"params", std::move(params)},
            {"metadata", metadata}};
}

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline PolicyParams checkpoint_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format_version").get<int>() != kCheckpointVersion)
            throw CheckpointError("unsupported checkpoint format_version " + j.at("format_version").dump());
        const auto& dims = j.at("dims");
        const int feature_dim = dims.at("feature_dim").get<int>();
        const int hidden_dim = dims.at("hidden_dim").get<int>();
        const int layers = j.at("K").get<int>();
        if (feature_dim != kFeatureDim) throw CheckpointError("checkpoint feature_dim does not match the feature layout");
        if (hidden_dim < 1 || layers < 1) throw CheckpointError("checkpoint dims must be positive");
        if (dims.contains("actor_input") && dims.at("actor_input").get<int>() != 2 * hidden_dim)
            throw CheckpointError("checkpoint actor input width must be twice the hidden width");
        auto p = PolicyParams::zeros(feature_dim, hidden_dim, layers);
        const auto flow = j.value("precedence_flow", std::string("forward"));
        if (flow == "bidirectional") {
            p.flow = PrecedenceFlow::bidirectional;
        } else if (flow != "forward") {
            throw CheckpointError("unknown precedence_flow '" + flow + "'");
        }
        const auto& params = j.at("params");
        for (auto& t : tensors(p)) {
            const auto values = params.at(t.name).get<std::vector<double>>();
            if (values.size() != t.data.size())
                throw CheckpointError("tensor " + t.name + " has " + std::to_string(values.size()) + " values, expected " +
                                      std::to_string(t.data.size()));
            for (std::size_t i = 0; i < values.size(); ++i) {
                if (!std::isfinite(values[i])) throw CheckpointError("tensor " + t.name + " holds a non-finite value");
                t.data[i] = values[i];
            }
        }
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace jssp

#endif  // JSSP_NET_HPP
