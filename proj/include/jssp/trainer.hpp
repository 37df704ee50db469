#ifndef JSSP_TRAINER_HPP
#define JSSP_TRAINER_HPP

#include <algorithm>
#include <charconv>
#include <limits>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "jssp/env.hpp"
#include "jssp/graph.hpp"
#include "jssp/instance.hpp"
#include "jssp/net.hpp"
#include "jssp/parallel.hpp"
#include "jssp/policy.hpp"
#include "jssp/rng.hpp"

namespace jssp {

/// PPO hyperparameters and run settings. Field names double as JSON keys.
struct TrainConfig {
    int num_jobs = 6;
    int num_machines = 6;
    Time dur_lo = 1;
    Time dur_hi = 99;
    std::uint64_t seed = 0;

    double lr0 = 3e-4;
    int total_updates = 2000;
    int batch_episodes = 4;  // batch = batch_episodes * J * M transitions
    double gamma = 1.0;
    double gae_lambda = 1.0;
    double clip_eps = 0.2;
    double ent_coef = 0.01;
    double value_coef = 0.5;
    int update_epochs = 4;
    double grad_clip_norm = 0.5;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;

    double lambda_term = 10.0;
    bool shaping = true;

    int minibatches = 1;  // Adam steps per epoch, over disjoint shuffled slices of the batch

    int hidden_dim = kHiddenDim;
    int gin_layers = kGinLayers;
    bool bidirectional_precedence = false;

    int validation_instances = 32;  // greedy validation suite; 0 disables
    int eval_interval = 50;         // updates between validation passes
    int checkpoint_interval = 0;    // updates between periodic checkpoints; 0 disables
    int workers = 1;

    int batch_transitions() const { return batch_episodes * num_jobs * num_machines; }

    void validate() const {
        if (num_jobs < 1 || num_machines < 1) throw std::invalid_argument("geometry must be at least 1x1");
        if (dur_lo < 1 || dur_lo > dur_hi) throw std::invalid_argument("need 1 <= dur_lo <= dur_hi");
        if (total_updates < 1 || batch_episodes < 1 || update_epochs < 0 || minibatches < 1)
            throw std::invalid_argument("total_updates, batch_episodes and minibatches must be positive");
        if (!(lr0 >= 0.0) || !(clip_eps > 0.0) || !(grad_clip_norm > 0.0) || !(lambda_term > 0.0))
            throw std::invalid_argument("lr0, clip_eps, grad_clip_norm and lambda_term must be positive");
        if (gamma < 0.0 || gamma > 1.0 || gae_lambda < 0.0 || gae_lambda > 1.0)
            throw std::invalid_argument("gamma and gae_lambda must lie in [0, 1]");
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, num_jobs, num_machines, dur_lo, dur_hi, seed, lr0,
                                                total_updates, batch_episodes, gamma, gae_lambda, clip_eps, ent_coef,
                                                value_coef, update_epochs, grad_clip_norm, adam_beta1, adam_beta2,
                                                adam_eps, lambda_term, shaping, minibatches, hidden_dim, gin_layers,
                                                bidirectional_precedence,
                                                validation_instances, eval_interval, checkpoint_interval, workers)

struct Transition {
    Matrix features;
    std::vector<char> mask;
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    double reward = 0.0;
    bool done = false;
    double advantage = 0.0;
    double ret = 0.0;
};

struct Episode {
    std::shared_ptr<const Instance> instance;
    std::shared_ptr<const UnifiedGraph> graph;
    std::vector<Transition> steps;
    Time makespan = 0;

    double total_reward() const {
        double r = 0.0;
        for (const auto& t : steps) r += t.reward;
        return r;
    }
};

struct RolloutBuffer {
    std::vector<Episode> episodes;

    std::size_t size() const {
        std::size_t n = 0;
        for (const auto& e : episodes) n += e.steps.size();
        return n;
    }
};

/// Instance source: (update index, episode index) -> instance.
using InstanceSampler = std::function<Instance(int update, int episode)>;

inline InstanceSampler random_sampler(const TrainConfig& cfg) {
    return [cfg](int update, int episode) {
        return generate(cfg.num_jobs, cfg.num_machines,
                        derive_seed({cfg.seed, 0x5A3D1EULL, static_cast<std::uint64_t>(update),
                                     static_cast<std::uint64_t>(episode)}),
                        cfg.dur_lo, cfg.dur_hi);
    };
}

inline RewardConfig reward_config(const TrainConfig& cfg, const Instance& inst) {
    return RewardConfig::for_horizon(horizon(inst), cfg.lambda_term, cfg.shaping);
}

/// Plays one episode with sampled actions, recording every transition.
inline Episode play_episode(Instance inst, const PolicyParams& params, const TrainConfig& cfg, std::uint64_t seed) {
    Episode ep;
    ep.instance = std::make_shared<const Instance>(std::move(inst));
    ep.graph = std::make_shared<const UnifiedGraph>(build_graph(*ep.instance, params.flow));
    const Time h = horizon(*ep.instance);
    const auto rewards = reward_config(cfg, *ep.instance);
    Rng rng(seed);
    auto s = reset(*ep.instance);
    ep.steps.reserve(static_cast<std::size_t>(ep.instance->num_ops()));
    while (!s.terminal()) {
        Transition t;
        t.features = features(s, *ep.graph, h);
        t.mask = eligible_actions(s);
        const auto trace = forward(*ep.graph, t.features, params);
        const auto probs = masked_softmax(trace.logits, t.mask);
        t.action = sample_index(probs, rng);
        t.log_prob = std::log(probs(t.action));
        t.value = trace.value;
        const auto r = step(s, t.action, rewards);
        t.reward = r.reward;
        t.done = r.done;
        ep.steps.push_back(std::move(t));
    }
    ep.makespan = makespan(s);
    return ep;
}

/// batch_episodes full episodes, each on a fresh instance from `sampler`.
/// Episode RNG streams depend only on (seed, update, episode).
inline RolloutBuffer collect_rollout(const PolicyParams& params, const InstanceSampler& sampler,
                                     const TrainConfig& cfg, int update_index = 0) {
    RolloutBuffer b;
    b.episodes.resize(static_cast<std::size_t>(cfg.batch_episodes));
    parallel_for(b.episodes.size(), cfg.workers, [&](std::size_t e) {
        const auto seed = derive_seed({cfg.seed, 0xAC7105ULL, static_cast<std::uint64_t>(update_index), e});
        b.episodes[e] = play_episode(sampler(update_index, static_cast<int>(e)), params, cfg, seed);
    });
    return b;
}

/// Generalized advantage estimation per episode, bootstrap value 0 at the
/// terminal state. Fills advantage and return (advantage + value).
inline void compute_gae(RolloutBuffer& b, double gamma, double lambda) {
    for (auto& ep : b.episodes) {
        double next_value = 0.0;
        double running = 0.0;
        for (auto it = ep.steps.rbegin(); it != ep.steps.rend(); ++it) {
            if (it->done) {
                next_value = 0.0;
                running = 0.0;
            }
            const double delta = it->reward + gamma * next_value - it->value;
            running = delta + gamma * lambda * running;
            it->advantage = running;
            it->ret = running + it->value;
            next_value = it->value;
        }
    }
}

/// Shifts and scales advantages to mean 0, std 1 over the whole buffer.
inline void normalize_advantages(RolloutBuffer& b, double eps = 1e-8) {
    const auto n = static_cast<double>(b.size());
    if (n == 0) return;
    double mean = 0.0;
    for (const auto& ep : b.episodes)
        for (const auto& t : ep.steps) mean += t.advantage;
    mean /= n;
    double var = 0.0;
    for (const auto& ep : b.episodes)
        for (const auto& t : ep.steps) var += (t.advantage - mean) * (t.advantage - mean);
    const double scale = 1.0 / (std::sqrt(var / n) + eps);
    for (auto& ep : b.episodes)
        for (auto& t : ep.steps) t.advantage = (t.advantage - mean) * scale;
}

/// Batch-mean loss terms. total = policy + value_coef * value - ent_coef * entropy.
struct LossTerms {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double clip_frac = 0.0;
    double approx_kl = 0.0;
};

namespace detail {

struct TransitionRef {
    const Episode* episode;
    const Transition* step;
};

inline std::vector<TransitionRef> flatten(const RolloutBuffer& b) {
    std::vector<TransitionRef> out;
    out.reserve(b.size());
    for (const auto& ep : b.episodes)
        for (const auto& t : ep.steps) out.push_back({&ep, &t});
    return out;
}

// Loss contribution of one transition (unscaled by batch size); adds the
// gradient scaled by `weight` into `grads` when given.
inline LossTerms transition_loss(const TransitionRef& ref, const PolicyParams& p, const TrainConfig& cfg,
                                 double weight, PolicyParams* grads) {
    const auto& t = *ref.step;
    const auto trace = forward(*ref.episode->graph, t.features, p);
    const auto& logits = trace.logits;

    double peak = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (t.mask[static_cast<std::size_t>(i)]) peak = std::max(peak, logits(i));
    double total = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i)
        if (t.mask[static_cast<std::size_t>(i)]) total += std::exp(logits(i) - peak);
    const double log_z = peak + std::log(total);

    Vector log_probs = Vector::Zero(logits.size());
    Vector probs = Vector::Zero(logits.size());
    double entropy = 0.0;
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
        if (!t.mask[static_cast<std::size_t>(i)]) continue;
        log_probs(i) = logits(i) - log_z;
        probs(i) = std::exp(log_probs(i));
        entropy -= probs(i) * log_probs(i);
    }

    const double log_prob = log_probs(t.action);
    const double ratio = std::exp(log_prob - t.log_prob);
    const double clipped = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double unclipped_obj = ratio * t.advantage;
    const double clipped_obj = clipped * t.advantage;
    const bool use_unclipped = unclipped_obj <= clipped_obj;
    const double surrogate = use_unclipped ? unclipped_obj : clipped_obj;
    const double value_err = trace.value - t.ret;

    LossTerms out;
    out.policy = -surrogate;
    out.value = value_err * value_err;
    out.entropy = entropy;
    out.total = out.policy + cfg.value_coef * out.value - cfg.ent_coef * entropy;
    out.clip_frac = std::abs(ratio - 1.0) > cfg.clip_eps ? 1.0 : 0.0;
    out.approx_kl = t.log_prob - log_prob;

    if (grads) {
        const double dsurr_dlogp = use_unclipped ? ratio * t.advantage : 0.0;
        Vector dlogits = Vector::Zero(logits.size());
        for (Eigen::Index i = 0; i < logits.size(); ++i) {
            if (!t.mask[static_cast<std::size_t>(i)]) continue;
            const double dlogp = (i == t.action ? 1.0 : 0.0) - probs(i);
            const double dentropy = -probs(i) * (log_probs(i) + entropy);
            dlogits(i) = weight * (-dsurr_dlogp * dlogp - cfg.ent_coef * dentropy);
        }
        const double dvalue = weight * cfg.value_coef * 2.0 * value_err;
        backward(trace, p, dlogits, dvalue, *grads);
    }
    return out;
}

inline void add_into(PolicyParams& dst, PolicyParams& src) {
    auto d = tensors(dst);
    auto s = tensors(src);
    for (std::size_t i = 0; i < d.size(); ++i)
        for (std::size_t k = 0; k < d[i].data.size(); ++k) d[i].data[k] += s[i].data[k];
}

}  // namespace detail

inline constexpr std::size_t kGradientChunk = 16;

/// Batch-mean PPO loss. When `grads` is given it receives the exact gradient
/// (overwritten). Chunked reduction in a fixed order keeps results
/// independent of the worker count.
inline LossTerms ppo_loss(const PolicyParams& p, std::span<const detail::TransitionRef> refs,
                          const TrainConfig& cfg, PolicyParams* grads = nullptr) {
    if (refs.empty()) throw std::invalid_argument("empty rollout buffer");
    const double weight = 1.0 / static_cast<double>(refs.size());
    const std::size_t chunks = (refs.size() + kGradientChunk - 1) / kGradientChunk;
    std::vector<LossTerms> partial(chunks);
    std::vector<PolicyParams> chunk_grads;
    if (grads) chunk_grads.assign(chunks, p.zeros_like());

    parallel_for(chunks, cfg.workers, [&](std::size_t c) {
        const auto end = std::min(refs.size(), (c + 1) * kGradientChunk);
        auto& acc = partial[c];
        for (auto i = c * kGradientChunk; i < end; ++i) {
            const auto l = detail::transition_loss(refs[i], p, cfg, weight, grads ? &chunk_grads[c] : nullptr);
            acc.total += l.total;
            acc.policy += l.policy;
            acc.value += l.value;
            acc.entropy += l.entropy;
            acc.clip_frac += l.clip_frac;
            acc.approx_kl += l.approx_kl;
        }
    });

    LossTerms out;
    for (const auto& l : partial) {
        out.total += l.total;
        out.policy += l.policy;
        out.value += l.value;
        out.entropy += l.entropy;
        out.clip_frac += l.clip_frac;
        out.approx_kl += l.approx_kl;
    }
    out.total *= weight;
    out.policy *= weight;
    out.value *= weight;
    out.entropy *= weight;
    out.clip_frac *= weight;
    out.approx_kl *= weight;

    if (grads) {
        *grads = std::move(chunk_grads.front());
        for (std::size_t c = 1; c < chunks; ++c) detail::add_into(*grads, chunk_grads[c]);
    }
    return out;
}

inline LossTerms ppo_loss(const PolicyParams& p, const RolloutBuffer& b, const TrainConfig& cfg,
                          PolicyParams* grads = nullptr) {
    return ppo_loss(p, detail::flatten(b), cfg, grads);
}

/// Adam with bias correction over every parameter tensor.
class Adam {
public:
    Adam(const PolicyParams& like, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : m_(like.zeros_like()), v_(like.zeros_like()), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(PolicyParams& params, PolicyParams& grads, double lr) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        auto p = tensors(params);
        auto g = tensors(grads);
        auto m = tensors(m_);
        auto v = tensors(v_);
        for (std::size_t i = 0; i < p.size(); ++i) {
            for (std::size_t k = 0; k < p[i].data.size(); ++k) {
                const double gk = g[i].data[k];
                m[i].data[k] = beta1_ * m[i].data[k] + (1.0 - beta1_) * gk;
                v[i].data[k] = beta2_ * v[i].data[k] + (1.0 - beta2_) * gk * gk;
                p[i].data[k] -= lr * (m[i].data[k] / c1) / (std::sqrt(v[i].data[k] / c2) + eps_);
            }
        }
    }

    long steps() const noexcept { return t_; }

private:
    PolicyParams m_;
    PolicyParams v_;
    double beta1_;
    double beta2_;
    double eps_;
    long t_ = 0;
};

/// Global L2 norm of all gradient entries.
inline double gradient_norm(PolicyParams& grads) {
    double sq = 0.0;
    for (const auto& t : tensors(grads))
        for (double x : t.data) sq += x * x;
    return std::sqrt(sq);
}

inline double lr_at(int update_index, const TrainConfig& cfg) {
    const double frac = static_cast<double>(update_index) / static_cast<double>(cfg.total_updates);
    return std::max(0.0, cfg.lr0 * (1.0 - frac));
}

class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_frac = 0.0;
    double approx_kl = 0.0;
    double grad_norm = 0.0;
};

/// update_epochs passes over `b`, each split into `minibatches` shuffled slices
/// with one Adam step per slice. Advantages are normalized here; stats average over steps.
inline UpdateStats ppo_update(PolicyParams& params, Adam& opt, RolloutBuffer& b, const TrainConfig& cfg,
                              int update_index) {
    normalize_advantages(b);
    UpdateStats stats;
    const double lr = lr_at(update_index, cfg);
    auto refs = detail::flatten(b);
    const auto slices = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatches), refs.size());
    Rng rng(derive_seed({cfg.seed, 0x3B1CEULL, static_cast<std::uint64_t>(update_index)}));
    auto grads = params.zeros_like();
    int steps = 0;
    for (int epoch = 0; epoch < cfg.update_epochs; ++epoch) {
        if (slices > 1) rng.shuffle(std::span<detail::TransitionRef>(refs));
        for (std::size_t s = 0; s < slices; ++s) {
            const auto lo = refs.size() * s / slices;
            const auto hi = refs.size() * (s + 1) / slices;
            const auto loss = ppo_loss(params, std::span<const detail::TransitionRef>(refs).subspan(lo, hi - lo), cfg,
                                       &grads);
            const double norm = gradient_norm(grads);
            if (!std::isfinite(loss.total) || !std::isfinite(norm)) {
                std::ostringstream msg;
                msg << "non-finite PPO loss at update " << update_index << " epoch " << epoch
                    << ": total=" << loss.total << " policy=" << loss.policy << " value=" << loss.value
                    << " entropy=" << loss.entropy << " grad_norm=" << norm;
                throw TrainingError(msg.str());
            }
            if (norm > cfg.grad_clip_norm) {
                const double scale = cfg.grad_clip_norm / norm;
                for (auto& t : tensors(grads))
                    for (double& x : t.data) x *= scale;
            }
            opt.step(params, grads, lr);
            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.clip_frac += loss.clip_frac;
            stats.approx_kl += loss.approx_kl;
            stats.grad_norm += norm;
            ++steps;
        }
    }
    if (steps > 0) {
        const double n = steps;
        stats.policy_loss /= n;
        stats.value_loss /= n;
        stats.entropy /= n;
        stats.clip_frac /= n;
        stats.approx_kl /= n;
        stats.grad_norm /= n;
    }
    return stats;
}

struct LogRow {
    int update = 0;
    double lr = 0.0;
    double mean_makespan = 0.0;
    double mean_return = 0.0;
    UpdateStats stats;
};

inline constexpr const char* kTrainLogHeader = "update,lr,mean_makespan,mean_return,policy_loss,value_loss,entropy,clip_frac";

/// Shortest round-trip text for a double.
inline std::string format_number(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

inline std::string format_log_row(const LogRow& r) {
    std::string out = std::to_string(r.update);
    for (double v : {r.lr, r.mean_makespan, r.mean_return, r.stats.policy_loss, r.stats.value_loss, r.stats.entropy,
                     r.stats.clip_frac}) {
        out += ',';
        out += format_number(v);
    }
    return out;
}

/// Fixed validation instances for model selection, disjoint from the
/// training stream by seed derivation.
inline std::vector<Instance> validation_suite(const TrainConfig& cfg) {
    std::vector<Instance> out;
    for (int i = 0; i < cfg.validation_instances; ++i)
        out.push_back(generate(cfg.num_jobs, cfg.num_machines,
                               derive_seed({cfg.seed, 0x7A11DULL, static_cast<std::uint64_t>(i)}), cfg.dur_lo,
                               cfg.dur_hi));
    return out;
}

inline double mean_greedy_makespan(const std::vector<Instance>& suite, const PolicyParams& params, int workers) {
    std::vector<Time> spans(suite.size());
    parallel_for(suite.size(), workers, [&](std::size_t i) { spans[i] = run_policy(suite[i], params).makespan; });
    double total = 0.0;
    for (auto s : spans) total += static_cast<double>(s);
    return suite.empty() ? 0.0 : total / static_cast<double>(suite.size());
}

struct TrainResult {
    PolicyParams final_params;
    PolicyParams best_params;  // lowest validation makespan; final_params when validation is off
    double best_validation = 0.0;
    int best_update = -1;
    std::vector<LogRow> log;
};

struct TrainHooks {
    std::function<void(const LogRow&)> on_update;
    std::function<void(int update, const PolicyParams&)> on_checkpoint;
};

/// Collect -> GAE -> PPO update, total_updates times. Deterministic per seed.
/// `initial` warm-starts from given weights instead of init_params(cfg.seed).
/// The untrained checkpoint a run starts from.
inline PolicyParams initial_params(const TrainConfig& cfg) {
    return init_params(cfg.seed, cfg.hidden_dim, cfg.gin_layers,
                       cfg.bidirectional_precedence ? PrecedenceFlow::bidirectional : PrecedenceFlow::forward);
}

inline TrainResult train(const TrainConfig& cfg, const TrainHooks& hooks = {}, InstanceSampler sampler = nullptr,
                         std::optional<PolicyParams> initial = std::nullopt) {
    cfg.validate();
    if (!sampler) sampler = random_sampler(cfg);
    TrainResult result{initial ? std::move(*initial) : initial_params(cfg), {}, 0.0, -1, {}};
    auto& params = result.final_params;
    Adam opt(params, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);

    const auto validation = validation_suite(cfg);
    auto evaluate = [&](int update) {
        if (validation.empty()) return;
        const double v = mean_greedy_makespan(validation, params, cfg.workers);
        if (result.best_update < 0 || v < result.best_validation) {
            result.best_validation = v;
            result.best_update = update;
            result.best_params = params;
        }
    };
    evaluate(0);

    for (int u = 0; u < cfg.total_updates; ++u) {
        auto buffer = collect_rollout(params, sampler, cfg, u);
        compute_gae(buffer, cfg.gamma, cfg.gae_lambda);
        LogRow row;
        row.update = u;
        row.lr = lr_at(u, cfg);
        for (const auto& ep : buffer.episodes) {
            row.mean_makespan += static_cast<double>(ep.makespan);
            row.mean_return += ep.total_reward();
        }
        row.mean_makespan /= static_cast<double>(buffer.episodes.size());
        row.mean_return /= static_cast<double>(buffer.episodes.size());
        row.stats = ppo_update(params, opt, buffer, cfg, u);
        result.log.push_back(row);
        if (hooks.on_update) hooks.on_update(row);
        if (cfg.eval_interval > 0 && ((u + 1) % cfg.eval_interval == 0 || u + 1 == cfg.total_updates))
            evaluate(u + 1);
        if (hooks.on_checkpoint && cfg.checkpoint_interval > 0 && (u + 1) % cfg.checkpoint_interval == 0)
            hooks.on_checkpoint(u + 1, params);
    }
    if (result.best_update < 0) result.best_params = params;
    return result;
}

}  // namespace jssp

#endif  // JSSP_TRAINER_HPP
