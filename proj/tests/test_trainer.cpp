#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "tspo/errors.hpp"
#include "tspo/trainer.hpp"

using namespace tspo;
using namespace tspo::train;
namespace fs = std::filesystem;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const char* name) : path((fs::temp_directory_path() / name).string()) {}
    ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

world::WorldConfig world_config() {
    world::WorldConfig c;
    c.feature_dim = 8;
    c.frames_per_event_min = 4;
    c.frames_per_event_max = 4;
    c.event_noise = 0.2;
    c.query_noise = 0.2;
    c.modality_gap_scale = 0.4;
    c.seed = 5;
    return c;
}

std::vector<data::SpliceSample> small_dataset(std::size_t n, std::uint64_t seed = 11) {
    world::WorldConfig wc = world_config();
    data::DatasetRecipe recipe;
    recipe.n_samples = n;
    recipe.segments_min = recipe.segments_max = 8;  // T_c = 32
    world::OracleConfig oracle;
    oracle.needle_threshold = 2;
    Rng rng(seed);
    return data::build_dataset(wc, recipe, oracle, rng);
}

agent::AgentConfig small_agent_config() {
    agent::AgentConfig c;
    c.feature_dim = 8;
    c.window = 4;
    c.temperature = 0.1;
    c.select_count = 4;
    return c;
}

TrainerConfig small_trainer_config() {
    TrainerConfig c;
    c.group_size = 4;
    c.train_select = 4;
    return c;
}

bool params_equal(const agent::AgentParameters& a, const agent::AgentParameters& b) {
    return a.attn.w_q.data == b.attn.w_q.data && a.attn.w_k.data == b.attn.w_k.data &&
           a.attn.w_v.data == b.attn.w_v.data;
}

}  // namespace

TEST_CASE("reward_answer indicator") {
    CHECK(reward_answer(2, 2) == 1.0);
    CHECK(reward_answer(0, 3) == 0.0);
    for (std::size_t y = 0; y < 4; ++y) CHECK(reward_answer(y, y) == 1.0);
}

TEST_CASE("reward_temporal ratio") {
    std::vector<bool> mask(32, false);
    for (std::size_t i = 0; i < 8; ++i) mask[i] = true;
    std::vector<std::size_t> sel;
    for (std::size_t i = 0; i < 8; ++i) sel.push_back(i);        // 8 in target
    for (std::size_t i = 16; i < 24; ++i) sel.push_back(i);      // 8 outside
    CHECK(reward_temporal(sel, mask) == 0.5);
    CHECK(reward_temporal({0, 1, 2}, mask) == 1.0);
    CHECK(reward_temporal({20, 21}, mask) == 0.0);
    CHECK_THROWS_AS(reward_temporal({}, mask), InvalidArgumentError);
}

TEST_CASE("reward_temporal equals brute-force count on random masks") {
    Rng rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        std::size_t t = 4 + rng.uniform_index(60);
        std::vector<bool> mask(t);
        for (std::size_t i = 0; i < t; ++i) mask[i] = rng.uniform01() < 0.3;
        std::size_t k = 1 + rng.uniform_index(t);
        std::vector<std::size_t> sel;
        for (std::size_t i = 0; i < t && sel.size() < k; ++i)
            if (rng.uniform01() < 0.5) sel.push_back(i);
        if (sel.empty()) sel.push_back(rng.uniform_index(t));
        std::size_t hits = 0;
        for (std::size_t i : sel) hits += mask[i];
        CHECK(reward_temporal(sel, mask) == double(hits) / double(sel.size()));
    }
}

TEST_CASE("total_reward mixing") {
    CHECK(total_reward(world::Style::comprehensive, 1.0, 0.7) == 2.0);
    CHECK(total_reward(world::Style::comprehensive, 0.0, 0.7) == 1.0);
    CHECK(total_reward(world::Style::needle, 1.0, 0.5) == 1.5);
    CHECK(total_reward(world::Style::needle, 0.0, 0.25) == 0.25);
}

TEST_CASE("compute_advantages normalization") {
    auto a = compute_advantages({1, 1, 1, 1});
    for (double v : a) CHECK(v == 0.0);

    auto b = compute_advantages({0, 2});
    CHECK(b[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(b[1] == doctest::Approx(1.0).epsilon(1e-6));

    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        std::size_t g = 2 + rng.uniform_index(15);
        std::vector<double> r(g);
        for (double& v : r) v = rng.uniform01() * 2.0;
        auto adv = compute_advantages(r);
        double sum = 0.0;
        for (double v : adv) sum += v;
        CHECK(std::abs(sum) < 1e-9);
    }
    CHECK_THROWS_AS(compute_advantages({1.0}), InvalidArgumentError);
}

TEST_CASE("tspo_objective identities") {
    TrainerConfig cfg = small_trainer_config();
    std::vector<double> old_lp{-3.0, -5.0};
    auto same = tspo_objective(old_lp, old_lp, {-1.0, 1.0}, cfg);
    CHECK(same.ratios[0] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(same.ratios[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(same.objective == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> new_lp{-3.0, -5.0 + std::log(2.0)};
    auto res = tspo_objective(new_lp, old_lp, {-1.0, 1.0}, cfg);
    CHECK(res.objective == doctest::Approx(0.5).epsilon(1e-12));
    for (double r : res.ratios) CHECK(r > 0.0);

    CHECK_THROWS_AS(tspo_objective({-1.0}, old_lp, {-1.0, 1.0}, cfg), InvalidArgumentError);
    std::vector<double> inf_lp{-3.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(tspo_objective(inf_lp, old_lp, {-1.0, 1.0}, cfg), NumericalError);
}

TEST_CASE("tspo_objective clipping zeroes the gradient outside the band") {
    TrainerConfig cfg = small_trainer_config();
    cfg.clip_epsilon = 0.2;
    // ratio = e for both actions; positive advantage clips, negative does not
    std::vector<double> old_lp{-4.0, -4.0};
    std::vector<double> new_lp{-3.0, -3.0};
    auto res = tspo_objective(new_lp, old_lp, {1.0, -1.0}, cfg);
    CHECK(res.grad_weights[0] == 0.0);
    CHECK(res.grad_weights[1] != 0.0);
    double e = std::exp(1.0);
    CHECK(res.objective == doctest::Approx(0.5 * (1.2 * 1.0 + e * -1.0)).epsilon(1e-12));
}

TEST_CASE("tspo_objective KL penalty is zero at the reference") {
    TrainerConfig cfg = small_trainer_config();
    cfg.kl_beta = 0.5;
    std::vector<double> lp{-2.0, -3.0};
    auto res = tspo_objective(lp, lp, {-1.0, 1.0}, cfg, &lp);
    CHECK(res.objective == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> ref{-2.5, -3.5};
    auto pen = tspo_objective(lp, lp, {0.0, 0.0}, cfg, &ref);
    CHECK(pen.objective < 0.0);  // k3 estimator is nonnegative
}

TEST_CASE("train_step: equal rewards leave parameters unchanged") {
    // comprehensive sample whose single group is always satisfied: every
    // rollout earns exactly R_A + 1 = 2
    data::SpliceSample sample;
    sample.style = world::Style::comprehensive;
    Rng rng(13);
    sample.frames = Matrix(16, 8);
    for (double& v : sample.frames.data) v = rng.gaussian();
    world::RequiredGroup g;
    g.threshold = 1;
    for (std::size_t i = 0; i < 16; ++i) g.frames.push_back(i);
    sample.query.required_groups.push_back(g);
    sample.query.n_choices = 4;
    sample.query.correct_option = 1;
    sample.query.style = world::Style::comprehensive;
    sample.answer_key = 1;
    sample.query.embedding.assign(8, 0.0);
    sample.query.embedding[0] = 1.0;
    sample.target_mask.assign(16, true);

    TrainState state = make_train_state(small_agent_config(), 17);
    agent::AgentParameters before = state.params;
    MetricsRecord rec = train_step(state, sample, world::OracleConfig{}, small_trainer_config());
    CHECK(params_equal(state.params, before));
    CHECK(rec.mean_reward == 2.0);
    CHECK(rec.grad_norm == 0.0);
}

TEST_CASE("train_step: mu=1 ratios are 1 and the update is reproducible by hand") {
    auto dataset = small_dataset(1);
    TrainerConfig tcfg = small_trainer_config();
    agent::AgentConfig acfg = small_agent_config();
    world::OracleConfig oracle;
    oracle.needle_threshold = 2;

    TrainState state = make_train_state(acfg, 23);
    TrainState replica = state;  // same params and rng stream

    MetricsRecord rec = train_step(state, dataset[0], oracle, tcfg);
    CHECK(std::abs(rec.ratio_min - 1.0) < 1e-12);
    CHECK(std::abs(rec.ratio_max - 1.0) < 1e-12);

    // Independent re-derivation of the same step: rollouts from the replayed
    // rng, grouped advantages, gradient (1/G) sum A_i grad(log pi_i), one
    // gradient-ascent Adam update.
    agent::AgentConfig rollout_cfg = acfg;
    rollout_cfg.select_count = tcfg.train_select;
    const data::SpliceSample& s = dataset[0];
    std::vector<double> scores =
        agent::compute_scores(s.frames, s.query.embedding, replica.params, rollout_cfg);
    std::vector<agent::SelectionAction> actions;
    std::vector<double> rewards;
    for (std::size_t i = 0; i < tcfg.group_size; ++i) {
        agent::SelectionAction act = agent::sample_selection(scores, rollout_cfg, replica.rng);
        std::size_t answer = world::oracle_answer(s.query, act.indices, oracle, replica.rng);
        double r = total_reward(s.style, reward_answer(answer, s.answer_key),
                                reward_temporal(act.indices, s.target_mask));
        actions.push_back(std::move(act));
        rewards.push_back(r);
    }
    std::vector<double> adv = compute_advantages(rewards);
    numerics::AttentionParams grad = numerics::AttentionParams::zeros(8);
    for (std::size_t i = 0; i < actions.size(); ++i)
        grad.add_scaled(
            agent::selection_log_prob_grad(s.frames, s.query.embedding, replica.params, actions[i],
                                           rollout_cfg),
            adv[i] / double(tcfg.group_size));

    auto adam_axis = [&](Matrix& w, const Matrix& g) {
        for (std::size_t i = 0; i < w.data.size(); ++i) {
            double m = 0.1 * g.data[i];           // (1-b1) g, t = 1
            double v = 0.001 * g.data[i] * g.data[i];
            double mhat = m / (1.0 - 0.9);
            double vhat = v / (1.0 - 0.999);
            w.data[i] += tcfg.learning_rate * mhat / (std::sqrt(vhat) + 1e-8);
        }
    };
    adam_axis(replica.params.attn.w_q, grad.w_q);
    adam_axis(replica.params.attn.w_k, grad.w_k);
    adam_axis(replica.params.attn.w_v, grad.w_v);

    for (std::size_t i = 0; i < state.params.attn.w_q.data.size(); ++i) {
        CHECK(state.params.attn.w_q.data[i] ==
              doctest::Approx(replica.params.attn.w_q.data[i]).epsilon(1e-12));
        CHECK(state.params.attn.w_v.data[i] ==
              doctest::Approx(replica.params.attn.w_v.data[i]).epsilon(1e-12));
    }
}

TEST_CASE("train is deterministic given equal seeds") {
    auto dataset = small_dataset(10);
    TrainerConfig tcfg = small_trainer_config();
    world::OracleConfig oracle;
    oracle.needle_threshold = 2;

    TempFile m1("tspo_metrics_a.jsonl"), m2("tspo_metrics_b.jsonl");
    TrainState s1 = make_train_state(small_agent_config(), 31);
    TrainState s2 = make_train_state(small_agent_config(), 31);
    tspo::train::train(s1, dataset, oracle, tcfg, m1.path);
    tspo::train::train(s2, dataset, oracle, tcfg, m2.path);
    CHECK(params_equal(s1.params, s2.params));
    CHECK(slurp(m1.path) == slurp(m2.path));
    CHECK(!slurp(m1.path).empty());
}

TEST_CASE("zero-length run returns initial params") {
    TrainState state = make_train_state(small_agent_config(), 37);
    agent::AgentParameters before = state.params;
    TrainResult res = tspo::train::train(state, {}, world::OracleConfig{}, small_trainer_config());
    CHECK(params_equal(res.params, before));
    CHECK(res.metrics.empty());
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    auto dataset = small_dataset(3);
    world::OracleConfig oracle;
    oracle.needle_threshold = 2;
    TrainState state = make_train_state(small_agent_config(), 41);
    tspo::train::train(state, dataset, oracle, small_trainer_config());

    TempFile f("tspo_ckpt_roundtrip.txt");
    save_checkpoint(state, f.path);
    TrainState loaded = load_checkpoint(f.path);
    CHECK(loaded.step == state.step);
    CHECK(params_equal(loaded.params, state.params));
    CHECK(loaded.adam.t == state.adam.t);
    CHECK(loaded.adam.m.w_q.data == state.adam.m.w_q.data);
    CHECK(loaded.adam.v.w_v.data == state.adam.v.w_v.data);
    CHECK(params_equal(loaded.initial_params, state.initial_params));

    // saving the loaded state reproduces the file byte for byte
    TempFile f2("tspo_ckpt_roundtrip2.txt");
    save_checkpoint(loaded, f2.path);
    CHECK(slurp(f.path) == slurp(f2.path));
}

TEST_CASE("checkpoint resume continues identically") {
    auto dataset = small_dataset(8);
    world::OracleConfig oracle;
    oracle.needle_threshold = 2;
    TrainerConfig tcfg = small_trainer_config();

    std::vector<data::SpliceSample> head(dataset.begin(), dataset.begin() + 4);
    std::vector<data::SpliceSample> tail(dataset.begin() + 4, dataset.end());

    TrainState full = make_train_state(small_agent_config(), 43);
    TrainResult full_res = tspo::train::train(full, dataset, oracle, tcfg);

    TrainState part = make_train_state(small_agent_config(), 43);
    tspo::train::train(part, head, oracle, tcfg);
    TempFile f("tspo_ckpt_resume.txt");
    save_checkpoint(part, f.path);
    TrainState resumed = load_checkpoint(f.path);
    TrainResult tail_res = tspo::train::train(resumed, tail, oracle, tcfg);

    CHECK(params_equal(resumed.params, full.params));
    for (std::size_t i = 0; i < tail_res.metrics.size(); ++i)
        CHECK(tail_res.metrics[i].to_json_line() ==
              full_res.metrics[4 + i].to_json_line());
}

TEST_CASE("loading a truncated checkpoint fails with a format error") {
    TrainState state = make_train_state(small_agent_config(), 47);
    TempFile f("tspo_ckpt_trunc.txt");
    save_checkpoint(state, f.path);
    std::string bytes = slurp(f.path);
    std::ofstream(f.path, std::ios::trunc) << bytes.substr(0, bytes.size() / 3);
    CHECK_THROWS_AS(load_checkpoint(f.path), FormatError);
}

TEST_CASE("agent-only save is loadable") {
    TrainState state = make_train_state(small_agent_config(), 53);
    TempFile f("tspo_params_only.txt");
    save_params(state.params, state.agent_config, f.path);
    TrainState loaded = load_checkpoint(f.path);
    CHECK(params_equal(loaded.params, state.params));
    CHECK(loaded.step == 0);
    CHECK(loaded.agent_config.window == state.agent_config.window);
}
