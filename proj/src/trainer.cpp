#include "tspo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tspo/errors.hpp"

namespace tspo::train {

void TrainerConfig::validate() const {
    if (group_size < 2) throw InvalidArgumentError("TrainerConfig: group_size must be >= 2");
    if (learning_rate <= 0.0) throw InvalidArgumentError("TrainerConfig: learning_rate must be > 0");
    if (inner_epochs < 1) throw InvalidArgumentError("TrainerConfig: inner_epochs must be >= 1");
    if (train_select < 1) throw InvalidArgumentError("TrainerConfig: train_select must be >= 1");
}

double reward_answer(std::size_t predicted, std::size_t answer_key) {
    return predicted == answer_key ? 1.0 : 0.0;
}

double reward_temporal(const std::vector<std::size_t>& sampled_indices,
                       const std::vector<bool>& target_mask) {
    if (sampled_indices.empty()) throw InvalidArgumentError("reward_temporal: empty selection");
    std::size_t hits = 0;
    for (std::size_t i : sampled_indices) {
        if (i >= target_mask.size()) throw InvalidArgumentError("reward_temporal: index out of range");
        if (target_mask[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(sampled_indices.size());
}

double total_reward(world::Style style, double r_answer, double r_temporal) {
    return style == world::Style::comprehensive ? r_answer + 1.0 : r_answer + r_temporal;
}

std::vector<double> compute_advantages(const std::vector<double>& rewards) {
    std::size_t g = rewards.size();
    if (g < 2) throw InvalidArgumentError("compute_advantages: need at least 2 rewards");
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(g);
    double var = 0.0;
    bool all_equal = true;
    for (double r : rewards) {
        var += (r - mean) * (r - mean);
        all_equal &= r == rewards[0];
    }
    if (all_equal) return std::vector<double>(g, 0.0);
    double std_dev = std::sqrt(var / static_cast<double>(g));
    std::vector<double> adv(g);
    for (std::size_t i = 0; i < g; ++i) adv[i] = (rewards[i] - mean) / (std_dev + 1e-8);
    return adv;
}

ObjectiveResult tspo_objective(const std::vector<double>& new_sum_log_probs,
                               const std::vector<double>& old_sum_log_probs,
                               const std::vector<double>& advantages, const TrainerConfig& config,
                               const std::vector<double>* ref_sum_log_probs) {
    std::size_t g = new_sum_log_probs.size();
    if (old_sum_log_probs.size() != g || advantages.size() != g)
        throw InvalidArgumentError("tspo_objective: length mismatch");
    if (config.kl_beta && (!ref_sum_log_probs || ref_sum_log_probs->size() != g))
        throw InvalidArgumentError("tspo_objective: kl_beta set but reference log-probs missing");

    ObjectiveResult res;
    res.ratios.resize(g);
    res.grad_weights.resize(g);
    double inv_g = 1.0 / static_cast<double>(g);
    for (std::size_t i = 0; i < g; ++i) {
        if (!std::isfinite(new_sum_log_probs[i]) || !std::isfinite(old_sum_log_probs[i]))
            throw NumericalError("tspo_objective: non-finite log-prob");
        double ratio = std::exp(new_sum_log_probs[i] - old_sum_log_probs[i]);
        res.ratios[i] = ratio;
        double a = advantages[i];
        double surrogate = ratio * a;
        double weight = ratio * a;  // d(ratio*A)/d(new log-prob)
        if (config.clip_epsilon) {
            double eps = *config.clip_epsilon;
            double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps) * a;
            if (clipped < surrogate) {
                surrogate = clipped;
                weight = 0.0;  // clip active: flat in theta
            }
        }
        if (config.kl_beta) {
            // k3 estimator: exp(ref - new) - (ref - new) - 1, nonnegative, unbiased.
            double r = (*ref_sum_log_probs)[i] - new_sum_log_probs[i];
            double k3 = std::exp(r) - r - 1.0;
            surrogate -= *config.kl_beta * k3;
            weight -= *config.kl_beta * (1.0 - std::exp(r));
        }
        res.objective += inv_g * surrogate;
        res.grad_weights[i] = inv_g * weight;
    }
    return res;
}

namespace {

double grad_norm(const numerics::AttentionParams& g) {
    double s = 0.0;
    for (double v : g.w_q.data) s += v * v;
    for (double v : g.w_k.data) s += v * v;
    for (double v : g.w_v.data) s += v * v;
    return std::sqrt(s);
}

bool all_zero(const numerics::AttentionParams& g) {
    for (double v : g.w_q.data)
        if (v != 0.0) return false;
    for (double v : g.w_k.data)
        if (v != 0.0) return false;
    for (double v : g.w_v.data)
        if (v != 0.0) return false;
    return true;
}

// Gradient-ascent Adam step.
void adam_update(agent::AgentParameters& params, AdamState& adam,
                 const numerics::AttentionParams& grad, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    adam.t += 1;
    double c1 = 1.0 - std::pow(b1, static_cast<double>(adam.t));
    double c2 = 1.0 - std::pow(b2, static_cast<double>(adam.t));
    auto update = [&](Matrix& w, Matrix& m, Matrix& v, const Matrix& g) {
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            m.data[i] = b1 * m.data[i] + (1.0 - b1) * g.data[i];
            v.data[i] = b2 * v.data[i] + (1.0 - b2) * g.data[i] * g.data[i];
            w.data[i] += lr * (m.data[i] / c1) / (std::sqrt(v.data[i] / c2) + eps);
        }
    };
    update(params.attn.w_q, adam.m.w_q, adam.v.w_q, grad.w_q);
    update(params.attn.w_k, adam.m.w_k, adam.v.w_k, grad.w_k);
    update(params.attn.w_v, adam.m.w_v, adam.v.w_v, grad.w_v);
}

MetricsRecord run_train_step(TrainState& state, const data::SpliceSample& sample,
                             const world::OracleConfig& oracle, const TrainerConfig& config,
                             RolloutGroup* group_out) {
    config.validate();
    if (sample.frames.rows < config.train_select)
        throw InvalidArgumentError("train_step: sample shorter than train_select");

    agent::AgentConfig acfg = state.agent_config;
    acfg.select_count = config.train_select;

    auto t0 = std::chrono::steady_clock::now();
    agent::AgentParameters old_params = state.params;  // pi_theta_old snapshot
    std::vector<double> old_scores =
        agent::compute_scores(sample.frames, sample.query.embedding, old_params, acfg);

    RolloutGroup group;
    double sum_r = 0.0, sum_ra = 0.0, sum_rt = 0.0;
    for (std::size_t i = 0; i < config.group_size; ++i) {
        agent::SelectionAction act = agent::sample_selection(old_scores, acfg, state.rng);
        std::size_t answer = world::oracle_answer(sample.query, act.indices, oracle, state.rng);
        double ra = reward_answer(answer, sample.answer_key);
        double rt = reward_temporal(act.indices, sample.target_mask);
        double r = total_reward(sample.style, ra, rt);
        sum_ra += ra;
        sum_rt += rt;
        sum_r += r;
        group.old_sum_log_probs.push_back(act.sum_log_prob);
        group.rewards.push_back(r);
        group.actions.push_back(std::move(act));
    }
    group.advantages = compute_advantages(group.rewards);

    double inv_g = 1.0 / static_cast<double>(config.group_size);
    MetricsRecord rec;
    rec.step = state.step;
    rec.mean_reward = sum_r * inv_g;
    rec.mean_reward_answer = sum_ra * inv_g;
    rec.mean_reward_temporal = sum_rt * inv_g;

    std::vector<double> ref_logps;
    if (config.kl_beta) {
        std::vector<double> ref_scores = agent::compute_scores(sample.frames, sample.query.embedding,
                                                               state.initial_params, acfg);
        for (const auto& act : group.actions)
            ref_logps.push_back(agent::selection_log_prob(ref_scores, act, acfg));
    }

    for (std::size_t epoch = 0; epoch < config.inner_epochs; ++epoch) {
        std::vector<double> scores =
            agent::compute_scores(sample.frames, sample.query.embedding, state.params, acfg);
        std::vector<double> new_logps;
        for (const auto& act : group.actions)
            new_logps.push_back(agent::selection_log_prob(scores, act, acfg));
        ObjectiveResult obj = tspo_objective(new_logps, group.old_sum_log_probs, group.advantages,
                                             config, config.kl_beta ? &ref_logps : nullptr);

        std::vector<double> dscore(scores.size(), 0.0);
        for (std::size_t i = 0; i < group.actions.size(); ++i) {
            if (obj.grad_weights[i] == 0.0) continue;
            std::vector<double> ds =
                agent::selection_log_prob_score_grad(scores, group.actions[i], acfg);
            for (std::size_t j = 0; j < dscore.size(); ++j)
                dscore[j] += obj.grad_weights[i] * ds[j];
        }
        numerics::AttentionParams grad = agent::score_grad_to_params(
            sample.frames, sample.query.embedding, state.params, dscore, acfg);

        rec.objective = obj.objective;
        rec.grad_norm = grad_norm(grad);
        rec.ratio_min = *std::min_element(obj.ratios.begin(), obj.ratios.end());
        rec.ratio_max = *std::max_element(obj.ratios.begin(), obj.ratios.end());
        if (!all_zero(grad)) adam_update(state.params, state.adam, grad, config.learning_rate);
    }

    state.step += 1;
    auto t1 = std::chrono::steady_clock::now();
    rec.wall_time_ms =
        config.deterministic ? 0.0 : std::chrono::duration<double, std::milli>(t1 - t0).count();
    if (group_out) *group_out = std::move(group);
    return rec;
}

}  // namespace

MetricsRecord train_step(TrainState& state, const data::SpliceSample& sample,
                         const world::OracleConfig& oracle, const TrainerConfig& config) {
    return run_train_step(state, sample, oracle, config, nullptr);
}

std::string MetricsRecord::to_json_line() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "{\"step\":%zu,\"mean_reward\":%.17g,\"mean_reward_answer\":%.17g,"
                  "\"mean_reward_temporal\":%.17g,\"objective\":%.17g,\"grad_norm\":%.17g,"
                  "\"ratio_min\":%.17g,\"ratio_max\":%.17g,\"wall_time_ms\":%.17g}",
                  step, mean_reward, mean_reward_answer, mean_reward_temporal, objective, grad_norm,
                  ratio_min, ratio_max, wall_time_ms);
    return buf;
}

TrainState make_train_state(const agent::AgentConfig& agent_config, std::uint64_t seed) {
    agent_config.validate();
    TrainState state;
    state.agent_config = agent_config;
    state.rng = Rng(seed);
    state.params = agent::AgentParameters::init(agent_config.feature_dim, state.rng);
    state.initial_params = state.params;
    state.adam = AdamState::zeros(agent_config.feature_dim);
    return state;
}

TrainResult train(TrainState& state, const std::vector<data::SpliceSample>& dataset,
                  const world::OracleConfig& oracle, const TrainerConfig& config,
                  const std::string& metrics_path, const std::string& checkpoint_path,
                  std::size_t checkpoint_every, const StepCallback& callback) {
    config.validate();
    std::ofstream metrics_os;
    if (!metrics_path.empty()) {
        metrics_os.open(metrics_path, std::ios::trunc);
        if (!metrics_os) throw std::runtime_error("train: cannot open metrics path " + metrics_path);
    }
    TrainResult result;
    for (const data::SpliceSample& sample : dataset) {
        RolloutGroup group;
        MetricsRecord rec = run_train_step(state, sample, oracle, config, callback ? &group : nullptr);
        if (metrics_os) metrics_os << rec.to_json_line() << "\n";
        if (callback) callback(group, rec);
        if (!checkpoint_path.empty() && checkpoint_every > 0 && state.step % checkpoint_every == 0)
            save_checkpoint(state, checkpoint_path);
        result.metrics.push_back(rec);
    }
    if (!checkpoint_path.empty()) save_checkpoint(state, checkpoint_path);
    result.params = state.params;
    return result;
}

}  // namespace tspo::train
