#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "tspo/agent.hpp"
#include "tspo/datapipe.hpp"

namespace tspo::train {

struct TrainerConfig {
    std::size_t group_size = 8;
    double learning_rate = 5e-4;
    std::size_t inner_epochs = 1;
    std::optional<double> clip_epsilon;  // PPO-style clipping when set
    std::optional<double> kl_beta;       // KL penalty vs the initial parameters when set
    std::size_t train_select = 16;
    std::uint64_t seed = 0;
    bool deterministic = true;           // zeroes wall-time in metrics so logs reproduce

    void validate() const;
};

struct RolloutGroup {
    std::vector<agent::SelectionAction> actions;
    std::vector<double> rewards;
    std::vector<double> advantages;
    std::vector<double> old_sum_log_probs;
};

struct MetricsRecord {
    std::size_t step = 0;
    double mean_reward = 0.0;
    double mean_reward_answer = 0.0;
    double mean_reward_temporal = 0.0;
    double objective = 0.0;
    double grad_norm = 0.0;
    double ratio_min = 0.0;
    double ratio_max = 0.0;
    double wall_time_ms = 0.0;

    std::string to_json_line() const;
};

// Adam accumulators, one pair of moment matrices per weight matrix.
struct AdamState {
    numerics::AttentionParams m, v;
    std::size_t t = 0;

    static AdamState zeros(std::size_t d) {
        return {numerics::AttentionParams::zeros(d), numerics::AttentionParams::zeros(d), 0};
    }
};

struct TrainState {
    std::size_t step = 0;
    agent::AgentConfig agent_config;
    agent::AgentParameters params;
    agent::AgentParameters initial_params;  // pi_ref for the optional KL term
    AdamState adam;
    Rng rng{0};
};

double reward_answer(std::size_t predicted, std::size_t answer_key);
double reward_temporal(const std::vector<std::size_t>& sampled_indices,
                       const std::vector<bool>& target_mask);
double total_reward(world::Style style, double r_answer, double r_temporal);

// Group-relative advantages: (r - mean) / (population std + 1e-8),
// exactly zero when all rewards are equal.
std::vector<double> compute_advantages(const std::vector<double>& rewards);

struct ObjectiveResult {
    double objective = 0.0;
    std::vector<double> ratios;
    // per-action weight on grad(new log-prob); zero where the clip is active
    std::vector<double> grad_weights;
};

ObjectiveResult tspo_objective(const std::vector<double>& new_sum_log_probs,
                               const std::vector<double>& old_sum_log_probs,
                               const std::vector<double>& advantages, const TrainerConfig& config,
                               const std::vector<double>* ref_sum_log_probs = nullptr);

using StepCallback = std::function<void(const RolloutGroup&, const MetricsRecord&)>;

MetricsRecord train_step(TrainState& state, const data::SpliceSample& sample,
                         const world::OracleConfig& oracle, const TrainerConfig& config);

struct TrainResult {
    agent::AgentParameters params;
    std::vector<MetricsRecord> metrics;
};

TrainResult train(TrainState& state, const std::vector<data::SpliceSample>& dataset,
                  const world::OracleConfig& oracle, const TrainerConfig& config,
                  const std::string& metrics_path = "", const std::string& checkpoint_path = "",
                  std::size_t checkpoint_every = 0, const StepCallback& callback = nullptr);

TrainState make_train_state(const agent::AgentConfig& agent_config, std::uint64_t seed);

void save_checkpoint(const TrainState& state, const std::string& path);
TrainState load_checkpoint(const std::string& path);

// Agent-only checkpoint surface (same document layout, no optimizer state).
void save_params(const agent::AgentParameters& params, const agent::AgentConfig& config,
                 const std::string& path);

}  // namespace tspo::train
