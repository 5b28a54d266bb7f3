#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "tspo/matrix.hpp"
#include "tspo/rng.hpp"

namespace tspo::world {

enum class Style : std::uint8_t { comprehensive = 0, needle = 1 };

struct WorldConfig {
    std::size_t feature_dim = 64;
    std::size_t frames_per_event_min = 8;
    std::size_t frames_per_event_max = 8;
    double event_noise = 0.1;        // sigma_f, per-frame feature noise
    double query_noise = 0.3;        // sigma_q
    double modality_gap_scale = 0.5; // epsilon_M
    std::size_t latent_dim = 0;      // event latent subspace rank; 0 = full feature_dim
    std::size_t n_choices = 4;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SyntheticVideo {
    Matrix frames;  // unit-normalized rows
    std::vector<std::pair<std::size_t, std::size_t>> event_boundaries;  // half-open
    std::vector<std::vector<double>> event_vectors;  // unit latent per event
};

struct RequiredGroup {
    std::vector<std::size_t> frames;
    std::size_t threshold = 1;
};

struct QueryItem {
    std::vector<double> embedding;
    std::vector<RequiredGroup> required_groups;
    std::size_t n_choices = 4;
    std::size_t correct_option = 0;
    Style style = Style::needle;
};

struct OracleConfig {
    std::size_t needle_threshold = 4;
    std::size_t comprehensive_threshold = 1;
};

// The world's hidden linear map between event latents and query embeddings,
// M = I + epsilon * G with G a fixed gaussian matrix seeded by the world seed.
Matrix modality_gap_map(const WorldConfig& config);

// Fixed seeded orthonormal basis (feature_dim x latent_dim) that event
// latents are drawn from when latent_dim < feature_dim.
Matrix latent_basis(const WorldConfig& config);

SyntheticVideo generate_clip(const WorldConfig& config, std::size_t n_events, Rng& rng);

QueryItem make_query(const SyntheticVideo& video, const std::vector<std::size_t>& target_events,
                     const WorldConfig& config, Rng& rng, std::size_t group_threshold, Style style);

// Deterministic-threshold oracle: correct iff every required group has at
// least its threshold of sampled frames, else a uniform blind guess.
std::size_t oracle_answer(const QueryItem& query, const std::vector<std::size_t>& sampled_indices,
                          const OracleConfig& oracle, Rng& rng);

// True iff the sampled set satisfies every required group's threshold.
bool groups_satisfied(const QueryItem& query, const std::vector<std::size_t>& sampled_indices);

}  // namespace tspo::world
