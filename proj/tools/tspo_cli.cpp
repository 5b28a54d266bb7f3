// tspo: generate synthetic long-video datasets, train the temporal sampling
// agent, evaluate sampling policies, and verify gradients.
//
// Exit codes: 0 ok, 1 verification failure, 2 usage error, 3 generation
// exhausted, 4 format error, 5 dimension mismatch.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tspo/evalbench.hpp"
#include "tspo/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string iso_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Written via a temp file + rename so readers never see a partial manifest.
void write_manifest(const std::string& artifact_path, ordered_json manifest) {
    manifest["tool_version"] = kVersion;
    fs::path target = fs::path(artifact_path).concat(".manifest.json");
    fs::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::trunc);
        os << manifest.dump(2) << "\n";
    }
    fs::rename(tmp, target);
}

std::string default_out_dir() {
    const char* env = std::getenv("TSPO_OUT_DIR");
    return env ? env : ".";
}

std::string resolve_out(const std::string& path) {
    fs::path p(path);
    if (p.is_absolute() || p.has_parent_path()) return path;
    return (fs::path(default_out_dir()) / p).string();
}

struct GenArgs {
    std::string out = "dataset.tsds";
    std::size_t n = 1000;
    std::size_t dim = 64;
    std::size_t tc = 128;
    std::string style = "needle";
    std::uint64_t seed = 0;
    std::size_t event_frames = 8;
    double event_noise = 0.1;
    double query_noise = 0.3;
    double gap_scale = 0.5;
    std::size_t latent_dim = 0;
    std::size_t theta_need = 4;
};

int run_gen(const GenArgs& a) {
    if (a.tc % a.event_frames != 0) {
        std::cerr << "gen: --tc must be a multiple of the event length " << a.event_frames << "\n";
        return 2;
    }
    tspo::world::WorldConfig wcfg;
    wcfg.feature_dim = a.dim;
    wcfg.frames_per_event_min = wcfg.frames_per_event_max = a.event_frames;
    wcfg.event_noise = a.event_noise;
    wcfg.query_noise = a.query_noise;
    wcfg.modality_gap_scale = a.gap_scale;
    wcfg.latent_dim = a.latent_dim;
    wcfg.seed = a.seed;

    tspo::data::DatasetRecipe recipe;
    recipe.n_samples = a.n;
    recipe.segments_min = recipe.segments_max = a.tc / a.event_frames;
    recipe.needle_fraction = a.style == "needle" ? 1.0 : (a.style == "comprehensive" ? 0.0 : 0.5);
    tspo::world::OracleConfig oracle;
    oracle.needle_threshold = a.theta_need;

    tspo::Rng rng(a.seed);
    tspo::data::DatasetStats stats;
    auto start = iso_timestamp();
    std::vector<tspo::data::SpliceSample> samples;
    try {
        samples = tspo::data::build_dataset(wcfg, recipe, oracle, rng, &stats);
    } catch (const tspo::GenerationExhaustedError& e) {
        std::cerr << "gen: " << e.what() << "\n";
        return 3;
    }
    std::string out = resolve_out(a.out);
    tspo::data::write_dataset(out, samples);
    std::cout << tspo::data::stats_report(stats);

    ordered_json m;
    m["command"] = "gen";
    m["config"] = {{"out", out},
                   {"n", a.n},
                   {"dim", a.dim},
                   {"tc", a.tc},
                   {"style", a.style},
                   {"seed", a.seed},
                   {"event_frames", a.event_frames},
                   {"event_noise", a.event_noise},
                   {"query_noise", a.query_noise},
                   {"modality_gap_scale", a.gap_scale},
                   {"latent_dim", a.latent_dim},
                   {"theta_need", a.theta_need}};
    m["stats"] = {{"attempts", stats.attempts},
                  {"kept", stats.kept},
                  {"dropped_too_easy", stats.dropped_too_easy},
                  {"dropped_too_hard", stats.dropped_too_hard}};
    m["started"] = start;
    m["finished"] = iso_timestamp();
    write_manifest(out, std::move(m));
    return 0;
}

struct TrainArgs {
    std::string data;
    std::string out = "agent.ckpt";
    std::string metrics = "";
    std::size_t group = 8;
    double lr = 5e-4;
    double tau = 0.025;
    std::size_t window = 12;
    std::size_t ts = 16;
    std::uint64_t seed = 0;
    double clip = -1.0;
    double kl_beta = -1.0;
    std::size_t inner_epochs = 1;
    std::size_t theta_need = 4;
    std::size_t checkpoint_every = 0;
};

int run_train(const TrainArgs& a) {
    std::vector<tspo::data::SpliceSample> dataset;
    try {
        dataset = tspo::data::read_dataset(a.data);
    } catch (const tspo::FormatError& e) {
        std::cerr << "train: " << e.what() << "\n";
        return 4;
    }
    if (dataset.empty()) {
        std::cerr << "train: dataset is empty\n";
        return 4;
    }

    tspo::agent::AgentConfig acfg;
    acfg.feature_dim = dataset[0].frames.cols;
    acfg.window = a.window;
    acfg.temperature = a.tau;
    acfg.select_count = a.ts;

    tspo::train::TrainerConfig tcfg;
    tcfg.group_size = a.group;
    tcfg.learning_rate = a.lr;
    tcfg.inner_epochs = a.inner_epochs;
    if (a.clip >= 0.0) tcfg.clip_epsilon = a.clip;
    if (a.kl_beta >= 0.0) tcfg.kl_beta = a.kl_beta;
    tcfg.train_select = a.ts;
    tcfg.seed = a.seed;

    tspo::world::OracleConfig oracle;
    oracle.needle_threshold = a.theta_need;

    std::string out = resolve_out(a.out);
    std::string metrics = a.metrics.empty() ? out + ".metrics.jsonl" : resolve_out(a.metrics);
    auto start = iso_timestamp();

    tspo::train::TrainState state = tspo::train::make_train_state(acfg, a.seed);
    tspo::train::TrainResult result;
    try {
        result = tspo::train::train(state, dataset, oracle, tcfg, metrics, out, a.checkpoint_every);
    } catch (const tspo::InvalidArgumentError& e) {
        std::cerr << "train: " << e.what() << "\n";
        return 5;
    }

    std::size_t tail = std::min<std::size_t>(100, result.metrics.size());
    double mean_tail = 0.0;
    for (std::size_t i = result.metrics.size() - tail; i < result.metrics.size(); ++i)
        mean_tail += result.metrics[i].mean_reward;
    mean_tail /= static_cast<double>(tail);
    std::printf("mean reward over last %zu steps: %.6f\n", tail, mean_tail);

    ordered_json m;
    m["command"] = "train";
    m["config"] = {{"data", a.data},
                   {"out", out},
                   {"metrics", metrics},
                   {"group", a.group},
                   {"lr", a.lr},
                   {"tau", a.tau},
                   {"window", a.window},
                   {"ts", a.ts},
                   {"seed", a.seed},
                   {"inner_epochs", a.inner_epochs},
                   {"clip", a.clip >= 0.0 ? ordered_json(a.clip) : ordered_json(nullptr)},
                   {"kl_beta", a.kl_beta >= 0.0 ? ordered_json(a.kl_beta) : ordered_json(nullptr)},
                   {"theta_need", a.theta_need},
                   {"checkpoint_every", a.checkpoint_every},
                   {"deterministic", true}};
    m["steps"] = result.metrics.size();
    m["started"] = start;
    m["finished"] = iso_timestamp();
    write_manifest(out, std::move(m));
    return 0;
}

struct EvalArgs {
    std::string data;
    std::string ckpt = "";
    std::string policy = "tspo";
    std::size_t ts = 64;
    std::string report = "report.json";
    std::string format = "json";
    std::uint64_t seed = 0;
    std::size_t theta_need = 4;
    std::size_t window = 12;
    double tau = 0.025;
};

int run_eval(const EvalArgs& a) {
    std::vector<tspo::data::SpliceSample> dataset;
    try {
        dataset = tspo::data::read_dataset(a.data);
    } catch (const tspo::FormatError& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return 4;
    }
    if (dataset.empty()) {
        std::cerr << "eval: dataset is empty\n";
        return 4;
    }

    tspo::agent::AgentConfig acfg;
    tspo::agent::AgentParameters params;
    if (!a.ckpt.empty()) {
        try {
            tspo::train::TrainState st = tspo::train::load_checkpoint(a.ckpt);
            acfg = st.agent_config;
            params = st.params;
        } catch (const tspo::FormatError& e) {
            std::cerr << "eval: " << e.what() << "\n";
            return 4;
        }
    } else {
        // No checkpoint: evaluate a freshly initialized agent.
        acfg.feature_dim = dataset[0].frames.cols;
        acfg.window = a.window;
        acfg.temperature = a.tau;
        tspo::Rng init_rng(a.seed);
        params = tspo::agent::AgentParameters::init(acfg.feature_dim, init_rng);
    }

    tspo::world::OracleConfig oracle;
    oracle.needle_threshold = a.theta_need;
    tspo::Rng rng(a.seed);

    std::vector<tspo::eval::Policy> policies;
    if (a.policy == "all") {
        policies = {tspo::eval::Policy::tspo, tspo::eval::Policy::uniform,
                    tspo::eval::Policy::random, tspo::eval::Policy::best_cover};
    } else {
        policies = {tspo::eval::parse_policy(a.policy)};
    }

    tspo::eval::EvalReport report;
    try {
        report = tspo::eval::evaluate(params, acfg, dataset, policies, a.ts, oracle, rng);
    } catch (const tspo::InvalidArgumentError& e) {
        std::cerr << "eval: " << e.what() << "\n";
        return 5;
    }
    report.seed = a.seed;

    std::string out = resolve_out(a.report);
    if (a.format == "json")
        tspo::eval::export_report_json(report, out);
    else
        tspo::eval::export_report_csv(report, out);

    for (const auto& [name, pm] : report.per_policy)
        std::printf("%-11s accuracy %.4f recall %.4f reward %.4f coverage %.4f\n", name.c_str(),
                    pm.answer_accuracy, pm.mean_recall, pm.mean_total_reward,
                    pm.group_coverage_rate);

    ordered_json m;
    m["command"] = "eval";
    m["config"] = {{"data", a.data}, {"ckpt", a.ckpt},     {"policy", a.policy},
                   {"ts", a.ts},     {"report", out},      {"format", a.format},
                   {"seed", a.seed}, {"theta_need", a.theta_need}};
    m["started"] = iso_timestamp();
    m["finished"] = iso_timestamp();
    write_manifest(out, std::move(m));
    return 0;
}

struct GradCheckArgs {
    std::size_t trials = 100;
    double tol = 1e-5;
    std::uint64_t seed = 0;
};

int run_grad_check(const GradCheckArgs& a) {
    double worst = 0.0;
    std::uint64_t worst_seed = 0;
    const char* worst_kind = "";
    bool ok = true;

    for (std::size_t trial = 0; trial < a.trials; ++trial) {
        std::uint64_t trial_seed = a.seed + trial;
        tspo::Rng rng(trial_seed);

        std::size_t t_len = 3 + rng.uniform_index(6);  // 3..8
        std::size_t d = 2 * (1 + rng.uniform_index(4)); // 2,4,6,8
        std::size_t w = 1 + rng.uniform_index(5);       // 1..5

        tspo::Matrix x(t_len, d);
        for (double& v : x.data) v = rng.gaussian();
        std::vector<double> query(d);
        for (double& v : query) v = rng.gaussian();

        tspo::agent::AgentConfig acfg;
        acfg.feature_dim = d;
        acfg.window = w;
        acfg.temperature = 0.5;  // soft enough for well-conditioned finite differences
        acfg.select_count = 1 + rng.uniform_index(std::min<std::size_t>(t_len, 3));
        tspo::agent::AgentParameters params = tspo::agent::AgentParameters::init(d, rng);

        std::vector<double> scores = tspo::agent::compute_scores(x, query, params, acfg);
        tspo::agent::SelectionAction action = tspo::agent::sample_selection(scores, acfg, rng);
        tspo::numerics::AttentionParams analytic =
            tspo::agent::selection_log_prob_grad(x, query, params, action, acfg);

        // Flatten parameters, rebuild, and compare against central differences.
        std::vector<double> theta;
        for (const auto* mat : {&params.attn.w_q, &params.attn.w_k, &params.attn.w_v})
            theta.insert(theta.end(), mat->data.begin(), mat->data.end());
        auto f = [&](const std::vector<double>& th) {
            tspo::agent::AgentParameters p = tspo::agent::AgentParameters::zeros(d);
            std::size_t n = d * d;
            std::copy(th.begin(), th.begin() + n, p.attn.w_q.data.begin());
            std::copy(th.begin() + n, th.begin() + 2 * n, p.attn.w_k.data.begin());
            std::copy(th.begin() + 2 * n, th.end(), p.attn.w_v.data.begin());
            std::vector<double> s = tspo::agent::compute_scores(x, query, p, acfg);
            return tspo::agent::selection_log_prob(s, action, acfg);
        };
        std::vector<double> fd = tspo::numerics::finite_difference_gradient(f, theta, 1e-6);

        std::vector<double> flat;
        for (const auto* mat : {&analytic.w_q, &analytic.w_k, &analytic.w_v})
            flat.insert(flat.end(), mat->data.begin(), mat->data.end());
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < flat.size(); ++i) {
            num += (flat[i] - fd[i]) * (flat[i] - fd[i]);
            den += fd[i] * fd[i];
        }
        double rel = std::sqrt(num) / (std::sqrt(den) + 1e-300);
        if (rel > worst) {
            worst = rel;
            worst_seed = trial_seed;
            worst_kind = "selection-log-prob";
        }
        if (rel > a.tol) ok = false;
    }

    std::printf("grad-check: %zu trials, tol %g, worst relative error %g (seed %llu, %s)\n",
                a.trials, a.tol, worst, static_cast<unsigned long long>(worst_seed), worst_kind);
    if (!ok) {
        std::printf("grad-check: FAIL\n");
        return 1;
    }
    std::printf("grad-check: PASS\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"temporal sampling policy optimization lab"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen", "generate a synthetic dataset");
    cgen->add_option("--out", gen.out, "output dataset path");
    cgen->add_option("--n", gen.n, "number of samples");
    cgen->add_option("--dim", gen.dim, "feature dimension");
    cgen->add_option("--tc", gen.tc, "candidate frames per sample");
    cgen->add_option("--style", gen.style, "needle, comprehensive, or mixed")
        ->check(CLI::IsMember({"needle", "comprehensive", "mixed"}));
    cgen->add_option("--seed", gen.seed, "rng seed");
    cgen->add_option("--event-frames", gen.event_frames, "frames per event segment");
    cgen->add_option("--event-noise", gen.event_noise, "per-frame feature noise sigma");
    cgen->add_option("--query-noise", gen.query_noise, "query embedding noise sigma");
    cgen->add_option("--gap-scale", gen.gap_scale, "modality gap scale epsilon");
    cgen->add_option("--latent-dim", gen.latent_dim, "event latent subspace rank (0 = full)");
    cgen->add_option("--theta", gen.theta_need, "needle per-group threshold");

    TrainArgs tr;
    auto* ctrain = app.add_subcommand("train", "train the temporal agent");
    ctrain->add_option("--data", tr.data, "input dataset")->required();
    ctrain->add_option("--out", tr.out, "output checkpoint path");
    ctrain->add_option("--metrics", tr.metrics, "metrics log path (default <out>.metrics.jsonl)");
    ctrain->add_option("--group", tr.group, "rollout group size G");
    ctrain->add_option("--lr", tr.lr, "learning rate");
    ctrain->add_option("--tau", tr.tau, "softmax temperature");
    ctrain->add_option("--window", tr.window, "attention window");
    ctrain->add_option("--ts", tr.ts, "frames selected per rollout");
    ctrain->add_option("--seed", tr.seed, "rng seed");
    ctrain->add_option("--clip", tr.clip, "PPO clip epsilon (off when omitted)");
    ctrain->add_option("--kl-beta", tr.kl_beta, "KL penalty weight (off when omitted)");
    ctrain->add_option("--inner-epochs", tr.inner_epochs, "updates per rollout group");
    ctrain->add_option("--theta", tr.theta_need, "needle per-group oracle threshold");
    ctrain->add_option("--checkpoint-every", tr.checkpoint_every, "steps between checkpoints");

    EvalArgs ev;
    auto* ceval = app.add_subcommand("eval", "evaluate sampling policies");
    ceval->add_option("--data", ev.data, "input dataset")->required();
    ceval->add_option("--ckpt", ev.ckpt, "agent checkpoint (omitted: untrained init)");
    ceval->add_option("--policy", ev.policy, "tspo, uniform, random, best_cover, or all")
        ->check(CLI::IsMember({"tspo", "uniform", "random", "best_cover", "all"}));
    ceval->add_option("--ts", ev.ts, "frames selected per record");
    ceval->add_option("--report", ev.report, "report output path");
    ceval->add_option("--format", ev.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    ceval->add_option("--seed", ev.seed, "rng seed");
    ceval->add_option("--theta", ev.theta_need, "needle per-group oracle threshold");
    ceval->add_option("--window", ev.window, "attention window for untrained init");
    ceval->add_option("--tau", ev.tau, "temperature for untrained init");

    GradCheckArgs gc;
    auto* cgrad = app.add_subcommand("grad-check", "verify analytic gradients against finite differences");
    cgrad->add_option("--trials", gc.trials, "number of randomized trials");
    cgrad->add_option("--tol", gc.tol, "relative error tolerance");
    cgrad->add_option("--seed", gc.seed, "base rng seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (cgen->parsed()) return run_gen(gen);
        if (ctrain->parsed()) return run_train(tr);
        if (ceval->parsed()) return run_eval(ev);
        if (cgrad->parsed()) return run_grad_check(gc);
    } catch (const tspo::FormatError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
