#pragma once

#include <cstddef>
#include <vector>

#include "tspo/numerics.hpp"
#include "tspo/rng.hpp"

namespace tspo::agent {

struct AgentConfig {
    std::size_t feature_dim = 64;
    std::size_t window = 12;
    double temperature = 0.025;
    std::size_t select_count = 16;
    double sim_fusion_weight = 1.0;
    // When false, likelihood re-evaluation drops the stored Gumbel noise
    // (ablation switch; the default keeps old/new policies on the same draw).
    bool reuse_noise = true;

    void validate() const;
};

struct AgentParameters {
    numerics::AttentionParams attn;

    static AgentParameters init(std::size_t feature_dim, Rng& rng);
    static AgentParameters zeros(std::size_t feature_dim) {
        return {numerics::AttentionParams::zeros(feature_dim)};
    }
};

struct ScoreBreakdown {
    std::vector<double> sim_event;
    std::vector<double> sim_frame;
    std::vector<double> fused;
};

struct SelectionAction {
    std::vector<std::size_t> indices;   // sorted ascending, distinct
    std::vector<double> log_probs;      // log softmax(S/tau + gamma) at indices
    std::vector<double> gumbel_noise;   // full length-T_c noise vector
    double sum_log_prob = 0.0;
};

// F_e = local-window attention over F_f (with PE and residual).
Matrix encode_events(const Matrix& frames, const AgentParameters& params, const AgentConfig& config);

ScoreBreakdown score_frames(const Matrix& f_event, const Matrix& f_frame,
                            const std::vector<double>& query, const AgentConfig& config);

// Top-K of softmax(S/tau + gamma) for a caller-supplied noise vector.
// Ties break toward the lower index.
SelectionAction select_with_noise(const std::vector<double>& scores, const AgentConfig& config,
                                  const std::vector<double>& gumbel_noise);

SelectionAction sample_selection(const std::vector<double>& scores, const AgentConfig& config, Rng& rng);

// Noise-free selection; bit-identical across calls.
SelectionAction deterministic_selection(const std::vector<double>& scores, const AgentConfig& config);

// Log-likelihood of a stored action under (possibly updated) scores, reusing
// the action's noise so old and new policies see the same perturbation.
double selection_log_prob(const std::vector<double>& scores, const SelectionAction& action,
                          const AgentConfig& config);

// d(sum of selected log-probs)/dS for a stored action re-evaluated on `scores`.
std::vector<double> selection_log_prob_score_grad(const std::vector<double>& scores,
                                                  const SelectionAction& action,
                                                  const AgentConfig& config);

// Pull a gradient w.r.t. the fused scores back to the attention parameters
// (through cosine similarity and the attention backward pass).
numerics::AttentionParams score_grad_to_params(const Matrix& frames, const std::vector<double>& query,
                                               const AgentParameters& params,
                                               const std::vector<double>& dscore,
                                               const AgentConfig& config);

// Analytic gradient of selection_log_prob w.r.t. the attention parameters,
// chained through fused scoring, cosine similarity, and attention backward.
numerics::AttentionParams selection_log_prob_grad(const Matrix& frames, const std::vector<double>& query,
                                                  const AgentParameters& params,
                                                  const SelectionAction& action,
                                                  const AgentConfig& config);

// End-to-end score pipeline: encode, then fuse similarities.
std::vector<double> compute_scores(const Matrix& frames, const std::vector<double>& query,
                                   const AgentParameters& params, const AgentConfig& config);

}  // namespace tspo::agent
