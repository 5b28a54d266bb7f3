#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tspo/worldsim.hpp"

namespace tspo::data {

struct SpliceSample {
    Matrix frames;                   // T_c x D
    world::QueryItem query;
    std::vector<bool> target_mask;   // pseudo-labels: frames from the target video
    world::Style style = world::Style::needle;
    std::size_t answer_key = 0;      // == query.correct_option
};

enum class FilterVerdict { keep, drop_too_easy, drop_too_hard };

struct DatasetStats {
    std::size_t kept = 0;
    std::size_t dropped_too_easy = 0;
    std::size_t dropped_too_hard = 0;
    std::size_t attempts = 0;
};

struct DatasetRecipe {
    std::size_t n_samples = 1000;
    double needle_fraction = 1.0;    // remainder is comprehensive
    std::size_t segments_min = 16;   // haystack length in event segments
    std::size_t segments_max = 16;
    std::size_t target_events = 1;   // events in the needle target video
    std::size_t comprehensive_events_min = 4;
    std::size_t comprehensive_events_max = 8;
    std::size_t attempt_budget_factor = 50;
};

// T_s evenly spaced indices over [0, T); also the "4 uniform frames" probe.
std::vector<std::size_t> uniform_indices(std::size_t total, std::size_t count);

SpliceSample build_needle_sample(const world::SyntheticVideo& target,
                                 const std::vector<world::SyntheticVideo>& distractors,
                                 const world::QueryItem& query, Rng& rng);

FilterVerdict difficulty_filter(const SpliceSample& sample, const world::OracleConfig& oracle);

// Binary TSDS dataset format (little-endian, 32-bit floats on disk).
std::uint64_t write_dataset(const std::string& path, const std::vector<SpliceSample>& samples);
std::vector<SpliceSample> read_dataset(const std::string& path);

std::vector<SpliceSample> build_dataset(const world::WorldConfig& world_cfg,
                                        const DatasetRecipe& recipe,
                                        const world::OracleConfig& oracle, Rng& rng,
                                        DatasetStats* stats_out = nullptr);

std::string stats_report(const DatasetStats& stats);

}  // namespace tspo::data
