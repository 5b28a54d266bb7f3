#pragma once

#include <map>
#include <string>
#include <vector>

#include "tspo/agent.hpp"
#include "tspo/datapipe.hpp"

namespace tspo::eval {

enum class Policy { tspo, uniform, random, best_cover };

std::string policy_name(Policy p);
Policy parse_policy(const std::string& name);

struct PolicyMetrics {
    double answer_accuracy = 0.0;
    double mean_recall = 0.0;        // T_t / T_a averaged over records
    double mean_total_reward = 0.0;
    double group_coverage_rate = 0.0;  // fraction of required groups satisfied
};

struct EvalReport {
    std::vector<std::pair<std::string, PolicyMetrics>> per_policy;  // stable ordering
    std::string dataset_digest;
    std::size_t record_count = 0;
    std::size_t select_count = 0;
    std::uint64_t seed = 0;
};

// FNV-1a over the serialized records; identifies the evaluated dataset.
std::string dataset_digest(const std::vector<data::SpliceSample>& dataset);

std::vector<std::size_t> select_best_cover(const data::SpliceSample& sample,
                                           const std::vector<double>& scores,
                                           std::size_t select_count);

EvalReport evaluate(const agent::AgentParameters& params, const agent::AgentConfig& agent_config,
                    const std::vector<data::SpliceSample>& dataset,
                    const std::vector<Policy>& policies, std::size_t select_count,
                    const world::OracleConfig& oracle, Rng& rng);

void export_report_json(const EvalReport& report, const std::string& path);
void export_report_csv(const EvalReport& report, const std::string& path);

}  // namespace tspo::eval
