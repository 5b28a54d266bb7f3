#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "tspo/numerics.hpp"
#include "tspo/worldsim.hpp"

using namespace tspo;
using namespace tspo::world;

namespace {

WorldConfig base_config() {
    WorldConfig c;
    c.feature_dim = 16;
    c.frames_per_event_min = 10;
    c.frames_per_event_max = 10;
    c.event_noise = 0.0;
    c.query_noise = 0.0;
    c.modality_gap_scale = 0.0;
    c.seed = 99;
    return c;
}

}  // namespace

TEST_CASE("generate_clip: noiseless frames equal the event latent") {
    WorldConfig cfg = base_config();
    Rng rng(1);
    SyntheticVideo v = generate_clip(cfg, 3, rng);
    CHECK(v.frames.rows == 30);
    REQUIRE(v.event_boundaries.size() == 3);
    CHECK(v.event_boundaries[0] == std::pair<std::size_t, std::size_t>{0, 10});
    CHECK(v.event_boundaries[1] == std::pair<std::size_t, std::size_t>{10, 20});
    CHECK(v.event_boundaries[2] == std::pair<std::size_t, std::size_t>{20, 30});
    for (std::size_t e = 0; e < 3; ++e) {
        auto [lo, hi] = v.event_boundaries[e];
        for (std::size_t t = lo; t < hi; ++t)
            for (std::size_t j = 0; j < cfg.feature_dim; ++j)
                CHECK(v.frames.at(t, j) == doctest::Approx(v.event_vectors[e][j]).epsilon(1e-12));
    }
}

TEST_CASE("generate_clip: frames are unit norm") {
    WorldConfig cfg = base_config();
    cfg.event_noise = 0.5;
    Rng rng(2);
    SyntheticVideo v = generate_clip(cfg, 4, rng);
    for (std::size_t t = 0; t < v.frames.rows; ++t)
        CHECK(std::abs(norm(v.frames.row(t), cfg.feature_dim) - 1.0) < 1e-9);
}

TEST_CASE("generate_clip: within-event similarity exceeds cross-event similarity") {
    WorldConfig cfg = base_config();
    cfg.event_noise = 0.3;
    double within = 0.0, cross = 0.0;
    std::size_t n_within = 0, n_cross = 0;
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        SyntheticVideo v = generate_clip(cfg, 2, rng);
        auto [lo0, hi0] = v.event_boundaries[0];
        auto [lo1, hi1] = v.event_boundaries[1];
        within += numerics::cosine_similarity(v.frames.row(lo0), v.frames.row(lo0 + 1), cfg.feature_dim);
        ++n_within;
        cross += numerics::cosine_similarity(v.frames.row(lo0), v.frames.row(lo1), cfg.feature_dim);
        ++n_cross;
    }
    CHECK(within / n_within > cross / n_cross);
}

TEST_CASE("generate_clip is bit-deterministic given equal seeds") {
    WorldConfig cfg = base_config();
    cfg.event_noise = 0.2;
    Rng a(7), b(7);
    SyntheticVideo va = generate_clip(cfg, 3, a);
    SyntheticVideo vb = generate_clip(cfg, 3, b);
    CHECK(va.frames.data == vb.frames.data);
    CHECK(va.event_boundaries == vb.event_boundaries);
}

TEST_CASE("make_query: identity gap and no noise reproduce the latent") {
    WorldConfig cfg = base_config();
    Rng rng(11);
    SyntheticVideo v = generate_clip(cfg, 2, rng);
    QueryItem q = make_query(v, {1}, cfg, rng, 1, Style::comprehensive);
    for (std::size_t j = 0; j < cfg.feature_dim; ++j)
        CHECK(q.embedding[j] == doctest::Approx(v.event_vectors[1][j]).epsilon(1e-9));
    REQUIRE(q.required_groups.size() == 1);
    CHECK(q.required_groups[0].frames.front() == 10);
    CHECK(q.required_groups[0].frames.back() == 19);
    CHECK(q.correct_option < cfg.n_choices);

    QueryItem q2 = make_query(v, {0, 1}, cfg, rng, 1, Style::comprehensive);
    CHECK(q2.required_groups.size() == 2);
    CHECK_THROWS_AS(make_query(v, {}, cfg, rng, 1, Style::comprehensive), InvalidArgumentError);
}

TEST_CASE("modality gap reduces but does not destroy the query margin") {
    WorldConfig cfg = base_config();
    cfg.modality_gap_scale = 0.5;
    cfg.event_noise = 0.1;
    Rng rng(13);
    double target_sim = 0.0, other_sim = 0.0;
    int n = 0;
    for (int trial = 0; trial < 300; ++trial) {
        SyntheticVideo v = generate_clip(cfg, 2, rng);
        QueryItem q = make_query(v, {0}, cfg, rng, 1, Style::comprehensive);
        target_sim += numerics::cosine_similarity(v.frames.row(0), q.embedding.data(), cfg.feature_dim);
        other_sim += numerics::cosine_similarity(v.frames.row(10), q.embedding.data(), cfg.feature_dim);
        ++n;
    }
    target_sim /= n;
    other_sim /= n;
    CHECK(target_sim > other_sim);
    CHECK(target_sim < 0.95);  // the gap must leave headroom for the trained agent
}

TEST_CASE("latent_basis: orthonormal, deterministic, and respected by generate_clip") {
    WorldConfig cfg = base_config();
    cfg.latent_dim = 5;
    Matrix b = latent_basis(cfg);
    REQUIRE(b.rows == cfg.feature_dim);
    REQUIRE(b.cols == 5);
    for (std::size_t a = 0; a < b.cols; ++a)
        for (std::size_t c = 0; c < b.cols; ++c) {
            double d = 0.0;
            for (std::size_t i = 0; i < b.rows; ++i) d += b.at(i, a) * b.at(i, c);
            CHECK(std::abs(d - (a == c ? 1.0 : 0.0)) < 1e-10);
        }
    Matrix b2 = latent_basis(cfg);
    CHECK(b.data == b2.data);

    // event latents must lie in the spanned subspace
    Rng rng(23);
    SyntheticVideo v = generate_clip(cfg, 3, rng);
    for (const auto& latent : v.event_vectors) {
        double in_span = 0.0;
        for (std::size_t c = 0; c < b.cols; ++c) {
            double proj = 0.0;
            for (std::size_t i = 0; i < b.rows; ++i) proj += b.at(i, c) * latent[i];
            in_span += proj * proj;
        }
        CHECK(in_span == doctest::Approx(1.0).epsilon(1e-9));
    }

    cfg.latent_dim = cfg.feature_dim + 1;
    CHECK_THROWS_AS(cfg.validate(), InvalidArgumentError);
}

TEST_CASE("oracle answers correctly when thresholds are met") {
    WorldConfig cfg = base_config();
    Rng rng(17);
    SyntheticVideo v = generate_clip(cfg, 2, rng);
    QueryItem q = make_query(v, {0}, cfg, rng, 4, Style::needle);
    OracleConfig oracle;

    std::vector<std::size_t> all;
    for (std::size_t t = 0; t < v.frames.rows; ++t) all.push_back(t);
    CHECK(oracle_answer(q, all, oracle, rng) == q.correct_option);

    // boundary: exactly threshold-many target frames sampled
    std::vector<std::size_t> four{0, 1, 2, 3};
    CHECK(oracle_answer(q, four, oracle, rng) == q.correct_option);

    // monotone: adding indices never breaks a satisfied query
    std::vector<std::size_t> more = four;
    more.push_back(25);
    CHECK(oracle_answer(q, more, oracle, rng) == q.correct_option);
}

TEST_CASE("oracle guesses uniformly when thresholds are missed") {
    WorldConfig cfg = base_config();
    Rng rng(19);
    SyntheticVideo v = generate_clip(cfg, 2, rng);
    QueryItem q = make_query(v, {0}, cfg, rng, 4, Style::needle);
    OracleConfig oracle;
    std::vector<std::size_t> miss{15, 16, 17};  // no overlap with event 0
    int correct = 0;
    const int draws = 100000;
    for (int i = 0; i < draws; ++i)
        correct += oracle_answer(q, miss, oracle, rng) == q.correct_option;
    CHECK(std::abs(double(correct) / draws - 0.25) < 0.01);
}
