#include "tspo/worldsim.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "tspo/errors.hpp"

namespace tspo::world {

void WorldConfig::validate() const {
    if (feature_dim == 0 || feature_dim % 2 != 0)
        throw InvalidArgumentError("WorldConfig: feature_dim must be positive and even");
    if (frames_per_event_min < 1 || frames_per_event_max < frames_per_event_min)
        throw InvalidArgumentError("WorldConfig: bad frames_per_event range");
    if (event_noise < 0.0 || query_noise < 0.0)
        throw InvalidArgumentError("WorldConfig: noise scales must be >= 0");
    if (n_choices < 2) throw InvalidArgumentError("WorldConfig: n_choices must be >= 2");
    if (latent_dim > feature_dim)
        throw InvalidArgumentError("WorldConfig: latent_dim cannot exceed feature_dim");
}

namespace {

std::vector<double> normalized(std::vector<double> v) {
    double n = norm(v.data(), v.size());
    if (n == 0.0) throw DegenerateInputError("normalize: zero vector");
    for (double& x : v) x /= n;
    return v;
}

std::vector<double> random_unit(std::size_t d, Rng& rng) {
    std::vector<double> v(d);
    for (double& x : v) x = rng.gaussian();
    return normalized(std::move(v));
}

}  // namespace

Matrix latent_basis(const WorldConfig& config) {
    config.validate();
    std::size_t d = config.feature_dim;
    std::size_t k = config.latent_dim == 0 ? d : config.latent_dim;
    // Gram-Schmidt on seeded gaussian columns; fixed per world like the gap map.
    Rng rng = Rng(config.seed).child(0x4C41544241534953ull);  // "LATBASIS"
    Matrix b(d, k);
    std::vector<std::vector<double>> cols;
    for (std::size_t c = 0; c < k; ++c) {
        std::vector<double> v(d);
        for (double& x : v) x = rng.gaussian();
        for (const auto& prev : cols) {
            double proj = dot(v.data(), prev.data(), d);
            for (std::size_t i = 0; i < d; ++i) v[i] -= proj * prev[i];
        }
        v = normalized(std::move(v));
        for (std::size_t i = 0; i < d; ++i) b.at(i, c) = v[i];
        cols.push_back(std::move(v));
    }
    return b;
}

Matrix modality_gap_map(const WorldConfig& config) {
    config.validate();
    std::size_t d = config.feature_dim;
    Matrix m = Matrix::identity(d);
    // Dedicated stream so the map is a fixed property of the world seed,
    // independent of how many clips were generated before it is queried.
    Rng rng = Rng(config.seed).child(0x4D4F44414C495459ull);  // "MODALITY"
    for (double& v : m.data) v += config.modality_gap_scale * rng.gaussian();
    return m;
}

SyntheticVideo generate_clip(const WorldConfig& config, std::size_t n_events, Rng& rng) {
    config.validate();
    if (n_events < 1) throw InvalidArgumentError("generate_clip: n_events must be >= 1");
    std::size_t d = config.feature_dim;

    SyntheticVideo video;
    std::vector<std::size_t> lengths(n_events);
    std::size_t total = 0;
    for (std::size_t e = 0; e < n_events; ++e) {
        std::size_t span = config.frames_per_event_max - config.frames_per_event_min + 1;
        lengths[e] = config.frames_per_event_min + rng.uniform_index(span);
        total += lengths[e];
    }
    bool subspace = config.latent_dim != 0 && config.latent_dim < d;
    Matrix basis;
    if (subspace) basis = latent_basis(config);

    video.frames = Matrix(total, d);
    std::size_t pos = 0;
    for (std::size_t e = 0; e < n_events; ++e) {
        std::vector<double> latent;
        if (subspace) {
            std::vector<double> z(config.latent_dim);
            for (double& x : z) x = rng.gaussian();
            latent.assign(d, 0.0);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t c = 0; c < config.latent_dim; ++c)
                    latent[i] += basis.at(i, c) * z[c];
            latent = normalized(std::move(latent));
        } else {
            latent = random_unit(d, rng);
        }
        video.event_boundaries.emplace_back(pos, pos + lengths[e]);
        for (std::size_t t = 0; t < lengths[e]; ++t, ++pos) {
            std::vector<double> f = latent;
            for (double& x : f) x += config.event_noise * rng.gaussian();
            f = normalized(std::move(f));
            std::copy(f.begin(), f.end(), video.frames.row(pos));
        }
        video.event_vectors.push_back(std::move(latent));
    }
    return video;
}

QueryItem make_query(const SyntheticVideo& video, const std::vector<std::size_t>& target_events,
                     const WorldConfig& config, Rng& rng, std::size_t group_threshold, Style style) {
    config.validate();
    if (target_events.empty()) throw InvalidArgumentError("make_query: empty target event set");
    if (group_threshold < 1) throw InvalidArgumentError("make_query: group threshold must be >= 1");
    std::size_t d = config.feature_dim;

    std::vector<double> mean(d, 0.0);
    QueryItem q;
    for (std::size_t e : target_events) {
        if (e >= video.event_vectors.size())
            throw InvalidArgumentError("make_query: target event out of range");
        const std::vector<double>& latent = video.event_vectors[e];
        for (std::size_t j = 0; j < d; ++j) mean[j] += latent[j];
        auto [lo, hi] = video.event_boundaries[e];
        RequiredGroup g;
        g.threshold = group_threshold;
        for (std::size_t t = lo; t < hi; ++t) g.frames.push_back(t);
        q.required_groups.push_back(std::move(g));
    }
    for (double& x : mean) x /= static_cast<double>(target_events.size());

    Matrix gap = modality_gap_map(config);
    std::vector<double> emb(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) emb[i] = dot(gap.row(i), mean.data(), d);
    for (double& x : emb) x += config.query_noise * rng.gaussian();
    q.embedding = normalized(std::move(emb));
    q.n_choices = config.n_choices;
    q.correct_option = rng.uniform_index(config.n_choices);
    q.style = style;
    return q;
}

bool groups_satisfied(const QueryItem& query, const std::vector<std::size_t>& sampled_indices) {
    std::unordered_set<std::size_t> sampled(sampled_indices.begin(), sampled_indices.end());
    for (const RequiredGroup& g : query.required_groups) {
        std::size_t hits = 0;
        for (std::size_t f : g.frames)
            if (sampled.count(f)) ++hits;
        if (hits < g.threshold) return false;
    }
    return true;
}

std::size_t oracle_answer(const QueryItem& query, const std::vector<std::size_t>& sampled_indices,
                          const OracleConfig&, Rng& rng) {
    if (groups_satisfied(query, sampled_indices)) return query.correct_option;
    return rng.uniform_index(query.n_choices);
}

}  // namespace tspo::world
