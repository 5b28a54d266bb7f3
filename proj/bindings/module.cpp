// Python bindings for the tspo core library.
//
// The surface mirrors the C++ modules: world/dataset construction, the
// selection agent, training, evaluation, and checkpoints. Matrices cross the
// boundary as numpy float64 arrays.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>

#include "tspo/agent.hpp"
#include "tspo/datapipe.hpp"
#include "tspo/errors.hpp"
#include "tspo/evalbench.hpp"
#include "tspo/numerics.hpp"
#include "tspo/trainer.hpp"
#include "tspo/worldsim.hpp"

namespace py = pybind11;
using namespace tspo;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
    py::array_t<double> out({m.rows, m.cols});
    std::copy(m.data.begin(), m.data.end(), out.mutable_data());
    return out;
}

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 2) throw std::invalid_argument("expected a 2-D array");
    Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
    std::copy(a.data(), a.data() + a.size(), m.data.begin());
    return m;
}

std::vector<double> to_vector(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
    if (a.ndim() != 1) throw std::invalid_argument("expected a 1-D array");
    return {a.data(), a.data() + a.size()};
}

}  // namespace

PYBIND11_MODULE(_tspo, m) {
    m.doc() = "Temporal sampling policy optimization lab: C++ core bindings";

    py::register_exception<InvalidArgumentError>(m, "InvalidArgumentError", PyExc_ValueError);
    py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
    py::register_exception<DegenerateInputError>(m, "DegenerateInputError", PyExc_ValueError);
    py::register_exception<GenerationExhaustedError>(m, "GenerationExhaustedError", PyExc_RuntimeError);

    // ---- world ----
    py::class_<world::WorldConfig>(m, "WorldConfig")
        .def(py::init<>())
        .def_readwrite("feature_dim", &world::WorldConfig::feature_dim)
        .def_readwrite("frames_per_event_min", &world::WorldConfig::frames_per_event_min)
        .def_readwrite("frames_per_event_max", &world::WorldConfig::frames_per_event_max)
        .def_readwrite("event_noise", &world::WorldConfig::event_noise)
        .def_readwrite("query_noise", &world::WorldConfig::query_noise)
        .def_readwrite("modality_gap_scale", &world::WorldConfig::modality_gap_scale)
        .def_readwrite("latent_dim", &world::WorldConfig::latent_dim)
        .def_readwrite("n_choices", &world::WorldConfig::n_choices)
        .def_readwrite("seed", &world::WorldConfig::seed)
        .def("validate", &world::WorldConfig::validate);

    py::class_<world::OracleConfig>(m, "OracleConfig")
        .def(py::init<>())
        .def_readwrite("needle_threshold", &world::OracleConfig::needle_threshold)
        .def_readwrite("comprehensive_threshold", &world::OracleConfig::comprehensive_threshold);

    py::enum_<world::Style>(m, "Style")
        .value("comprehensive", world::Style::comprehensive)
        .value("needle", world::Style::needle);

    m.def("modality_gap_map",
          [](const world::WorldConfig& c) { return to_numpy(world::modality_gap_map(c)); });

    // ---- datasets ----
    py::class_<data::SpliceSample>(m, "SpliceSample")
        .def_property_readonly("frames",
                               [](const data::SpliceSample& s) { return to_numpy(s.frames); })
        .def_property_readonly("query_embedding",
                               [](const data::SpliceSample& s) { return s.query.embedding; })
        .def_property_readonly("target_mask",
                               [](const data::SpliceSample& s) { return s.target_mask; })
        .def_readonly("style", &data::SpliceSample::style)
        .def_readonly("answer_key", &data::SpliceSample::answer_key);

    py::class_<data::DatasetRecipe>(m, "DatasetRecipe")
        .def(py::init<>())
        .def_readwrite("n_samples", &data::DatasetRecipe::n_samples)
        .def_readwrite("needle_fraction", &data::DatasetRecipe::needle_fraction)
        .def_readwrite("segments_min", &data::DatasetRecipe::segments_min)
        .def_readwrite("segments_max", &data::DatasetRecipe::segments_max)
        .def_readwrite("target_events", &data::DatasetRecipe::target_events)
        .def_readwrite("comprehensive_events_min", &data::DatasetRecipe::comprehensive_events_min)
        .def_readwrite("comprehensive_events_max", &data::DatasetRecipe::comprehensive_events_max)
        .def_readwrite("attempt_budget_factor", &data::DatasetRecipe::attempt_budget_factor);

    m.def(
        "build_dataset",
        [](const world::WorldConfig& wcfg, const data::DatasetRecipe& recipe,
           const world::OracleConfig& oracle, std::uint64_t seed) {
            Rng rng(seed);
            data::DatasetStats stats;
            auto samples = data::build_dataset(wcfg, recipe, oracle, rng, &stats);
            return py::make_tuple(std::move(samples), data::stats_report(stats));
        },
        py::arg("world_config"), py::arg("recipe"), py::arg("oracle"), py::arg("seed"));
    m.def("write_dataset", &data::write_dataset, py::arg("path"), py::arg("samples"));
    m.def("read_dataset", &data::read_dataset, py::arg("path"));
    m.def("uniform_indices", &data::uniform_indices, py::arg("total"), py::arg("count"));

    // ---- agent ----
    py::class_<agent::AgentConfig>(m, "AgentConfig")
        .def(py::init<>())
        .def_readwrite("feature_dim", &agent::AgentConfig::feature_dim)
        .def_readwrite("window", &agent::AgentConfig::window)
        .def_readwrite("temperature", &agent::AgentConfig::temperature)
        .def_readwrite("select_count", &agent::AgentConfig::select_count)
        .def_readwrite("sim_fusion_weight", &agent::AgentConfig::sim_fusion_weight)
        .def_readwrite("reuse_noise", &agent::AgentConfig::reuse_noise)
        .def("validate", &agent::AgentConfig::validate);

    py::class_<agent::AgentParameters>(m, "AgentParameters")
        .def_static("init",
                    [](std::size_t dim, std::uint64_t seed) {
                        Rng rng(seed);
                        return agent::AgentParameters::init(dim, rng);
                    },
                    py::arg("feature_dim"), py::arg("seed"))
        .def_property_readonly("wq",
                               [](const agent::AgentParameters& p) { return to_numpy(p.attn.w_q); })
        .def_property_readonly("wk",
                               [](const agent::AgentParameters& p) { return to_numpy(p.attn.w_k); })
        .def_property_readonly("wv",
                               [](const agent::AgentParameters& p) { return to_numpy(p.attn.w_v); });

    py::class_<agent::SelectionAction>(m, "SelectionAction")
        .def_readonly("indices", &agent::SelectionAction::indices)
        .def_readonly("log_probs", &agent::SelectionAction::log_probs)
        .def_readonly("sum_log_prob", &agent::SelectionAction::sum_log_prob);

    m.def(
        "compute_scores",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frames,
           const py::array_t<double, py::array::c_style | py::array::forcecast>& query,
           const agent::AgentParameters& params, const agent::AgentConfig& cfg) {
            return agent::compute_scores(to_matrix(frames), to_vector(query), params, cfg);
        },
        py::arg("frames"), py::arg("query"), py::arg("params"), py::arg("config"));
    m.def(
        "encode_events",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& frames,
           const agent::AgentParameters& params, const agent::AgentConfig& cfg) {
            return to_numpy(agent::encode_events(to_matrix(frames), params, cfg));
        },
        py::arg("frames"), py::arg("params"), py::arg("config"));
    m.def(
        "sample_selection",
        [](const std::vector<double>& scores, const agent::AgentConfig& cfg, std::uint64_t seed) {
            Rng rng(seed);
            return agent::sample_selection(scores, cfg, rng);
        },
        py::arg("scores"), py::arg("config"), py::arg("seed"));
    m.def("deterministic_selection", &agent::deterministic_selection, py::arg("scores"),
          py::arg("config"));
    m.def("selection_log_prob", &agent::selection_log_prob, py::arg("scores"), py::arg("action"),
          py::arg("config"));

    // ---- training ----
    py::class_<train::TrainerConfig>(m, "TrainerConfig")
        .def(py::init<>())
        .def_readwrite("group_size", &train::TrainerConfig::group_size)
        .def_readwrite("learning_rate", &train::TrainerConfig::learning_rate)
        .def_readwrite("inner_epochs", &train::TrainerConfig::inner_epochs)
        .def_readwrite("clip_epsilon", &train::TrainerConfig::clip_epsilon)
        .def_readwrite("kl_beta", &train::TrainerConfig::kl_beta)
        .def_readwrite("train_select", &train::TrainerConfig::train_select)
        .def_readwrite("seed", &train::TrainerConfig::seed)
        .def_readwrite("deterministic", &train::TrainerConfig::deterministic)
        .def("validate", &train::TrainerConfig::validate);

    py::class_<train::MetricsRecord>(m, "MetricsRecord")
        .def_readonly("step", &train::MetricsRecord::step)
        .def_readonly("mean_reward", &train::MetricsRecord::mean_reward)
        .def_readonly("mean_reward_answer", &train::MetricsRecord::mean_reward_answer)
        .def_readonly("mean_reward_temporal", &train::MetricsRecord::mean_reward_temporal)
        .def_readonly("objective", &train::MetricsRecord::objective)
        .def_readonly("grad_norm", &train::MetricsRecord::grad_norm)
        .def_readonly("ratio_min", &train::MetricsRecord::ratio_min)
        .def_readonly("ratio_max", &train::MetricsRecord::ratio_max)
        .def("to_json_line", &train::MetricsRecord::to_json_line);

    py::class_<train::TrainState>(m, "TrainState")
        .def_readonly("step", &train::TrainState::step)
        .def_readonly("params", &train::TrainState::params)
        .def_readonly("agent_config", &train::TrainState::agent_config);

    m.def("make_train_state", &train::make_train_state, py::arg("agent_config"), py::arg("seed"));
    m.def("reward_answer", &train::reward_answer, py::arg("predicted"), py::arg("answer_key"));
    m.def("reward_temporal", &train::reward_temporal, py::arg("sampled_indices"),
          py::arg("target_mask"));
    m.def("total_reward", &train::total_reward, py::arg("style"), py::arg("r_answer"),
          py::arg("r_temporal"));
    m.def("compute_advantages", &train::compute_advantages, py::arg("rewards"));
    m.def(
        "train",
        [](train::TrainState& state, const std::vector<data::SpliceSample>& dataset,
           const world::OracleConfig& oracle, const train::TrainerConfig& cfg,
           const std::string& metrics_path, const std::string& checkpoint_path,
           std::size_t checkpoint_every) {
            auto result = train::train(state, dataset, oracle, cfg, metrics_path, checkpoint_path,
                                       checkpoint_every);
            return py::make_tuple(result.params, result.metrics);
        },
        py::arg("state"), py::arg("dataset"), py::arg("oracle"), py::arg("config"),
        py::arg("metrics_path") = "", py::arg("checkpoint_path") = "",
        py::arg("checkpoint_every") = 0);
    m.def("save_checkpoint", &train::save_checkpoint, py::arg("state"), py::arg("path"));
    m.def("load_checkpoint", &train::load_checkpoint, py::arg("path"));

    // ---- evaluation ----
    py::class_<eval::PolicyMetrics>(m, "PolicyMetrics")
        .def_readonly("answer_accuracy", &eval::PolicyMetrics::answer_accuracy)
        .def_readonly("mean_recall", &eval::PolicyMetrics::mean_recall)
        .def_readonly("mean_total_reward", &eval::PolicyMetrics::mean_total_reward)
        .def_readonly("group_coverage_rate", &eval::PolicyMetrics::group_coverage_rate);

    py::class_<eval::EvalReport>(m, "EvalReport")
        .def_property_readonly("per_policy",
                               [](const eval::EvalReport& r) {
                                   py::dict d;
                                   for (const auto& [name, metrics] : r.per_policy)
                                       d[py::str(name)] = metrics;
                                   return d;
                               })
        .def_readonly("dataset_digest", &eval::EvalReport::dataset_digest)
        .def_readonly("record_count", &eval::EvalReport::record_count)
        .def_readonly("select_count", &eval::EvalReport::select_count);

    m.def(
        "evaluate",
        [](const agent::AgentParameters& params, const agent::AgentConfig& acfg,
           const std::vector<data::SpliceSample>& dataset, const std::vector<std::string>& policies,
           std::size_t select_count, const world::OracleConfig& oracle, std::uint64_t seed) {
            std::vector<eval::Policy> ps;
            for (const auto& name : policies) ps.push_back(eval::parse_policy(name));
            Rng rng(seed);
            return eval::evaluate(params, acfg, dataset, ps, select_count, oracle, rng);
        },
        py::arg("params"), py::arg("agent_config"), py::arg("dataset"), py::arg("policies"),
        py::arg("select_count"), py::arg("oracle"), py::arg("seed"));
    m.def("export_report_json", &eval::export_report_json, py::arg("report"), py::arg("path"));
    m.def("export_report_csv", &eval::export_report_csv, py::arg("report"), py::arg("path"));
}
