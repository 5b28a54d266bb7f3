#include "tspo/evalbench.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "tspo/errors.hpp"
#include "tspo/trainer.hpp"

namespace tspo::eval {

std::string policy_name(Policy p) {
    switch (p) {
        case Policy::tspo: return "tspo";
        case Policy::uniform: return "uniform";
        case Policy::random: return "random";
        case Policy::best_cover: return "best_cover";
    }
    return "?";
}

Policy parse_policy(const std::string& name) {
    if (name == "tspo") return Policy::tspo;
    if (name == "uniform") return Policy::uniform;
    if (name == "random") return Policy::random;
    if (name == "best_cover") return Policy::best_cover;
    throw InvalidArgumentError("unknown policy: " + name);
}

std::string dataset_digest(const std::vector<data::SpliceSample>& dataset) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ull;
        }
    };
    for (const auto& s : dataset) {
        mix(s.frames.rows);
        mix(s.frames.cols);
        mix(static_cast<std::uint64_t>(s.style));
        mix(s.query.correct_option);
        for (double v : s.frames.data) {
            std::uint64_t bits;
            static_assert(sizeof(bits) == sizeof(v));
            std::memcpy(&bits, &v, 8);
            mix(bits);
        }
        for (bool b : s.target_mask) mix(b ? 1 : 0);
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::size_t> select_best_cover(const data::SpliceSample& sample,
                                           const std::vector<double>& scores,
                                           std::size_t select_count) {
    std::size_t t_len = sample.frames.rows;
    const auto& groups = sample.query.required_groups;
    std::vector<std::size_t> need(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g)
        need[g] = std::min(groups[g].threshold, groups[g].frames.size());
    std::vector<std::vector<std::size_t>> frame_groups(t_len);
    for (std::size_t g = 0; g < groups.size(); ++g)
        for (std::size_t f : groups[g].frames) frame_groups[f].push_back(g);

    std::vector<bool> picked(t_len, false);
    std::vector<std::size_t> out;
    while (out.size() < select_count) {
        std::size_t best = t_len, best_gain = 0;
        for (std::size_t f = 0; f < t_len; ++f) {
            if (picked[f]) continue;
            std::size_t gain = 0;
            for (std::size_t g : frame_groups[f])
                if (need[g] > 0) ++gain;
            if (gain > best_gain) {
                best_gain = gain;
                best = f;
            }
        }
        if (best == t_len) break;  // all groups covered
        picked[best] = true;
        out.push_back(best);
        for (std::size_t g : frame_groups[best])
            if (need[g] > 0) --need[g];
    }
    // Fill remaining slots with the highest fused scores.
    std::vector<std::size_t> rest;
    for (std::size_t f = 0; f < t_len; ++f)
        if (!picked[f]) rest.push_back(f);
    std::sort(rest.begin(), rest.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    for (std::size_t f : rest) {
        if (out.size() >= select_count) break;
        out.push_back(f);
    }
    std::sort(out.begin(), out.end());
    return out;
}

EvalReport evaluate(const agent::AgentParameters& params, const agent::AgentConfig& agent_config,
                    const std::vector<data::SpliceSample>& dataset,
                    const std::vector<Policy>& policies, std::size_t select_count,
                    const world::OracleConfig& oracle, Rng& rng) {
    if (dataset.empty()) throw InvalidArgumentError("evaluate: empty dataset");
    agent::AgentConfig acfg = agent_config;
    acfg.select_count = select_count;
    for (const auto& s : dataset) {
        if (s.frames.rows < select_count)
            throw InvalidArgumentError("evaluate: record shorter than select_count");
        if (s.frames.cols != acfg.feature_dim)
            throw InvalidArgumentError("evaluate: dataset/params dimension mismatch");
    }

    EvalReport report;
    report.record_count = dataset.size();
    report.select_count = select_count;
    report.dataset_digest = dataset_digest(dataset);

    for (Policy policy : policies) {
        PolicyMetrics pm;
        double groups_total = 0.0, groups_hit = 0.0;
        bool needs_scores = policy == Policy::tspo || policy == Policy::best_cover;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            const data::SpliceSample& s = dataset[i];
            std::size_t t_len = s.frames.rows;
            Rng rec_rng = rng.child(i * 8 + static_cast<std::size_t>(policy));

            std::vector<double> scores;
            if (needs_scores)
                scores = agent::compute_scores(s.frames, s.query.embedding, params, acfg);

            std::vector<std::size_t> indices;
            switch (policy) {
                case Policy::tspo:
                    indices = agent::deterministic_selection(scores, acfg).indices;
                    break;
                case Policy::uniform:
                    indices = data::uniform_indices(t_len, select_count);
                    break;
                case Policy::random: {
                    std::vector<std::size_t> pool(t_len);
                    for (std::size_t f = 0; f < t_len; ++f) pool[f] = f;
                    for (std::size_t j = 0; j < select_count; ++j)
                        std::swap(pool[j], pool[j + rec_rng.uniform_index(t_len - j)]);
                    pool.resize(select_count);
                    std::sort(pool.begin(), pool.end());
                    indices = std::move(pool);
                    break;
                }
                case Policy::best_cover:
                    indices = select_best_cover(s, scores, select_count);
                    break;
            }

            std::size_t answer = world::oracle_answer(s.query, indices, oracle, rec_rng);
            double ra = train::reward_answer(answer, s.answer_key);
            double rt = train::reward_temporal(indices, s.target_mask);
            pm.answer_accuracy += ra;
            pm.mean_recall += rt;
            pm.mean_total_reward += train::total_reward(s.style, ra, rt);

            std::unordered_set<std::size_t> sel(indices.begin(), indices.end());
            for (const auto& g : s.query.required_groups) {
                groups_total += 1.0;
                std::size_t hits = 0;
                for (std::size_t f : g.frames)
                    if (sel.count(f)) ++hits;
                if (hits >= g.threshold) groups_hit += 1.0;
            }
        }
        double n = static_cast<double>(dataset.size());
        pm.answer_accuracy /= n;
        pm.mean_recall /= n;
        pm.mean_total_reward /= n;
        pm.group_coverage_rate = groups_total > 0.0 ? groups_hit / groups_total : 0.0;
        report.per_policy.emplace_back(policy_name(policy), pm);
    }
    return report;
}

namespace {

nlohmann::ordered_json report_to_json(const EvalReport& report) {
    nlohmann::ordered_json j;
    j["dataset_digest"] = report.dataset_digest;
    j["record_count"] = report.record_count;
    j["select_count"] = report.select_count;
    j["seed"] = report.seed;
    nlohmann::ordered_json pols;
    for (const auto& [name, pm] : report.per_policy) {
        nlohmann::ordered_json p;
        p["answer_accuracy"] = pm.answer_accuracy;
        p["mean_recall"] = pm.mean_recall;
        p["mean_total_reward"] = pm.mean_total_reward;
        p["group_coverage_rate"] = pm.group_coverage_rate;
        pols[name] = p;
    }
    j["policies"] = pols;
    return j;
}

}  // namespace

void export_report_json(const EvalReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("export_report_json: cannot open " + path);
    os << report_to_json(report).dump(2) << "\n";
}

void export_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("export_report_csv: cannot open " + path);
    os << "policy,metric,value\n";
    char buf[40];
    auto row = [&](const std::string& pol, const char* metric, double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << pol << "," << metric << "," << buf << "\n";
    };
    for (const auto& [name, pm] : report.per_policy) {
        row(name, "answer_accuracy", pm.answer_accuracy);
        row(name, "mean_recall", pm.mean_recall);
        row(name, "mean_total_reward", pm.mean_total_reward);
        row(name, "group_coverage_rate", pm.group_coverage_rate);
    }
}

}  // namespace tspo::eval
