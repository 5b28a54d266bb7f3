#include "tspo/agent.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tspo/errors.hpp"

namespace tspo::agent {

void AgentConfig::validate() const {
    if (feature_dim == 0 || feature_dim % 2 != 0)
        throw InvalidArgumentError("AgentConfig: feature_dim must be positive and even");
    if (window < 1) throw InvalidArgumentError("AgentConfig: window must be >= 1");
    if (temperature <= 0.0) throw InvalidArgumentError("AgentConfig: temperature must be > 0");
    if (select_count == 0) throw InvalidArgumentError("AgentConfig: select_count must be >= 1");
}

AgentParameters AgentParameters::init(std::size_t feature_dim, Rng& rng) {
    // Near-identity start: W_v = I + noise keeps the event path close to the
    // raw frame path, so the initial policy is a sane frame-similarity prior.
    const double sigma = 0.02;
    AgentParameters p{numerics::AttentionParams::zeros(feature_dim)};
    for (double& v : p.attn.w_q.data) v = sigma * rng.gaussian();
    for (double& v : p.attn.w_k.data) v = sigma * rng.gaussian();
    p.attn.w_v = Matrix::identity(feature_dim);
    for (double& v : p.attn.w_v.data) v += sigma * rng.gaussian();
    return p;
}

Matrix encode_events(const Matrix& frames, const AgentParameters& params, const AgentConfig& config) {
    config.validate();
    if (frames.cols != config.feature_dim)
        throw InvalidArgumentError("encode_events: frame dim does not match config");
    return numerics::local_window_attention_forward(frames, params.attn, config.window).first;
}

ScoreBreakdown score_frames(const Matrix& f_event, const Matrix& f_frame,
                            const std::vector<double>& query, const AgentConfig& config) {
    if (!f_event.same_shape(f_frame)) throw InvalidArgumentError("score_frames: F_e/F_f shape mismatch");
    if (query.size() != f_frame.cols) throw InvalidArgumentError("score_frames: query dim mismatch");
    std::size_t t_len = f_frame.rows;
    std::size_t d = f_frame.cols;
    ScoreBreakdown s;
    s.sim_event.resize(t_len);
    s.sim_frame.resize(t_len);
    s.fused.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        s.sim_event[t] = numerics::cosine_similarity(f_event.row(t), query.data(), d);
        s.sim_frame[t] = numerics::cosine_similarity(f_frame.row(t), query.data(), d);
        s.fused[t] = s.sim_event[t] + config.sim_fusion_weight * s.sim_frame[t];
    }
    return s;
}

SelectionAction select_with_noise(const std::vector<double>& scores, const AgentConfig& config,
                                  const std::vector<double>& gumbel_noise) {
    config.validate();
    std::size_t t_len = scores.size();
    if (config.select_count > t_len)
        throw InvalidArgumentError("select: select_count exceeds candidate count");
    if (gumbel_noise.size() != t_len) throw InvalidArgumentError("select: noise length mismatch");

    std::vector<double> logits(t_len);
    for (std::size_t i = 0; i < t_len; ++i) logits[i] = scores[i] / config.temperature + gumbel_noise[i];
    std::vector<double> logp = numerics::log_softmax(logits);

    std::vector<std::size_t> order(t_len);
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + config.select_count, order.end(),
                      [&](std::size_t a, std::size_t b) {
                          if (logp[a] != logp[b]) return logp[a] > logp[b];
                          return a < b;
                      });
    order.resize(config.select_count);
    std::sort(order.begin(), order.end());

    SelectionAction act;
    act.indices = std::move(order);
    act.gumbel_noise = gumbel_noise;
    act.log_probs.reserve(config.select_count);
    for (std::size_t i : act.indices) {
        act.log_probs.push_back(logp[i]);
        act.sum_log_prob += logp[i];
    }
    return act;
}

SelectionAction sample_selection(const std::vector<double>& scores, const AgentConfig& config, Rng& rng) {
    std::vector<double> noise(scores.size());
    for (double& g : noise) g = rng.gumbel();
    return select_with_noise(scores, config, noise);
}

SelectionAction deterministic_selection(const std::vector<double>& scores, const AgentConfig& config) {
    return select_with_noise(scores, config, std::vector<double>(scores.size(), 0.0));
}

double selection_log_prob(const std::vector<double>& scores, const SelectionAction& action,
                          const AgentConfig& config) {
    std::size_t t_len = scores.size();
    if (action.gumbel_noise.size() != t_len)
        throw InvalidArgumentError("selection_log_prob: action/scores length mismatch");
    std::vector<double> logits(t_len);
    for (std::size_t i = 0; i < t_len; ++i) {
        double g = config.reuse_noise ? action.gumbel_noise[i] : 0.0;
        logits[i] = scores[i] / config.temperature + g;
    }
    std::vector<double> logp = numerics::log_softmax(logits);
    double sum = 0.0;
    for (std::size_t i : action.indices) {
        if (i >= t_len) throw InvalidArgumentError("selection_log_prob: index out of range");
        sum += logp[i];
    }
    return sum;
}

std::vector<double> selection_log_prob_score_grad(const std::vector<double>& scores,
                                                  const SelectionAction& action,
                                                  const AgentConfig& config) {
    std::size_t t_len = scores.size();
    // d(sum log P)/dz_j = [j selected] - T_s * p_j, z = S/tau + gamma.
    std::vector<double> logits(t_len);
    for (std::size_t i = 0; i < t_len; ++i) {
        double g = config.reuse_noise ? action.gumbel_noise[i] : 0.0;
        logits[i] = scores[i] / config.temperature + g;
    }
    std::vector<double> p = numerics::softmax(logits);
    std::vector<double> ds(t_len);
    double k = static_cast<double>(action.indices.size());
    for (std::size_t i = 0; i < t_len; ++i) ds[i] = -k * p[i] / config.temperature;
    for (std::size_t i : action.indices) {
        if (i >= t_len) throw InvalidArgumentError("selection_log_prob_score_grad: index out of range");
        ds[i] += 1.0 / config.temperature;
    }
    return ds;
}

numerics::AttentionParams score_grad_to_params(const Matrix& frames, const std::vector<double>& query,
                                               const AgentParameters& params,
                                               const std::vector<double>& dscore,
                                               const AgentConfig& config) {
    config.validate();
    std::size_t t_len = frames.rows;
    std::size_t d = frames.cols;
    if (dscore.size() != t_len) throw InvalidArgumentError("score_grad_to_params: dscore length mismatch");
    auto [f_event, cache] = numerics::local_window_attention_forward(frames, params.attn, config.window);

    // Only sim_event depends on the parameters. Cosine pullback:
    // d cos(e, q)/de = q/(|e||q|) - cos * e/|e|^2.
    double qn = norm(query.data(), d);
    if (qn == 0.0) throw DegenerateInputError("score_grad_to_params: zero query");
    Matrix d_fe(t_len, d);
    for (std::size_t t = 0; t < t_len; ++t) {
        const double* e = f_event.row(t);
        double en = norm(e, d);
        if (en == 0.0) throw DegenerateInputError("score_grad_to_params: zero event row");
        double c = dot(e, query.data(), d) / (en * qn);
        double* out = d_fe.row(t);
        for (std::size_t j = 0; j < d; ++j)
            out[j] = dscore[t] * (query[j] / (en * qn) - c * e[j] / (en * en));
    }
    return numerics::local_window_attention_backward(cache, params.attn, d_fe).dparams;
}

numerics::AttentionParams selection_log_prob_grad(const Matrix& frames, const std::vector<double>& query,
                                                  const AgentParameters& params,
                                                  const SelectionAction& action,
                                                  const AgentConfig& config) {
    std::vector<double> scores = compute_scores(frames, query, params, config);
    std::vector<double> ds = selection_log_prob_score_grad(scores, action, config);
    return score_grad_to_params(frames, query, params, ds, config);
}

std::vector<double> compute_scores(const Matrix& frames, const std::vector<double>& query,
                                   const AgentParameters& params, const AgentConfig& config) {
    Matrix f_event = encode_events(frames, params, config);
    return score_frames(f_event, frames, query, config).fused;
}

}  // namespace tspo::agent
