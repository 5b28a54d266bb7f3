#include <cstdio>
#include <fstream>
#include <sstream>

#include "tspo/errors.hpp"
#include "tspo/trainer.hpp"

// Text checkpoint, shared by agent-only and full-trainer saves. Doubles are
// printed with %.17g so the round trip is bit-exact at 64-bit precision.

namespace tspo::train {

namespace {

constexpr const char* kTag = "TSPO-CKPT v1";

void write_matrix(std::ostream& os, const char* name, const Matrix& m) {
    os << "matrix " << name << " " << m.rows << " " << m.cols << "\n";
    char buf[40];
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, c));
            os << buf << (c + 1 == m.cols ? "" : " ");
        }
        os << "\n";
    }
}

Matrix read_matrix(std::istream& is, const std::string& expected_name) {
    std::string kw, name;
    std::size_t rows, cols;
    if (!(is >> kw >> name >> rows >> cols) || kw != "matrix" || name != expected_name)
        throw FormatError("checkpoint: expected matrix " + expected_name, 0);
    Matrix m(rows, cols);
    for (double& v : m.data)
        if (!(is >> v)) throw FormatError("checkpoint: truncated matrix " + expected_name, 0);
    return m;
}

void write_agent_section(std::ostream& os, const agent::AgentParameters& params,
                         const agent::AgentConfig& config) {
    os << kTag << "\n";
    os << "agent " << config.feature_dim << " " << config.window << " ";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", config.temperature);
    os << buf << " " << config.select_count << " ";
    std::snprintf(buf, sizeof(buf), "%.17g", config.sim_fusion_weight);
    os << buf << " " << (config.reuse_noise ? 1 : 0) << "\n";
    write_matrix(os, "w_q", params.attn.w_q);
    write_matrix(os, "w_k", params.attn.w_k);
    write_matrix(os, "w_v", params.attn.w_v);
}

void read_agent_section(std::istream& is, agent::AgentParameters& params,
                        agent::AgentConfig& config) {
    std::string line;
    if (!std::getline(is, line) || line != kTag)
        throw FormatError("checkpoint: bad version tag", 0);
    std::string kw;
    int reuse;
    if (!(is >> kw >> config.feature_dim >> config.window >> config.temperature >>
          config.select_count >> config.sim_fusion_weight >> reuse) ||
        kw != "agent")
        throw FormatError("checkpoint: bad agent config line", 0);
    config.reuse_noise = reuse != 0;
    params.attn.w_q = read_matrix(is, "w_q");
    params.attn.w_k = read_matrix(is, "w_k");
    params.attn.w_v = read_matrix(is, "w_v");
}

}  // namespace

void save_params(const agent::AgentParameters& params, const agent::AgentConfig& config,
                 const std::string& path) {
    std::ostringstream os;
    write_agent_section(os, params, config);
    os << "end\n";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_params: cannot open " + path);
    f << os.str();
}

void save_checkpoint(const TrainState& state, const std::string& path) {
    std::ostringstream os;
    write_agent_section(os, state.params, state.agent_config);
    os << "step " << state.step << "\n";
    os << "adam_t " << state.adam.t << "\n";
    write_matrix(os, "adam_m_q", state.adam.m.w_q);
    write_matrix(os, "adam_m_k", state.adam.m.w_k);
    write_matrix(os, "adam_m_v", state.adam.m.w_v);
    write_matrix(os, "adam_v_q", state.adam.v.w_q);
    write_matrix(os, "adam_v_k", state.adam.v.w_k);
    write_matrix(os, "adam_v_v", state.adam.v.w_v);
    write_matrix(os, "init_w_q", state.initial_params.attn.w_q);
    write_matrix(os, "init_w_k", state.initial_params.attn.w_k);
    write_matrix(os, "init_w_v", state.initial_params.attn.w_v);
    os << "rng ";
    state.rng.save(os);
    os << "\nend\n";
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f << os.str();
}

// Loads either a params-only document (as written by save_params) or a full
// trainer state. Params-only files yield a fresh optimizer.
TrainState load_checkpoint(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("load_checkpoint: cannot open " + path);
    TrainState state;
    read_agent_section(is, state.params, state.agent_config);
    state.initial_params = state.params;
    state.adam = AdamState::zeros(state.agent_config.feature_dim);

    std::string kw;
    if (!(is >> kw)) throw FormatError("checkpoint: truncated after matrices", 0);
    if (kw == "end") return state;
    if (kw != "step") throw FormatError("checkpoint: expected step or end", 0);
    if (!(is >> state.step)) throw FormatError("checkpoint: bad step", 0);
    if (!(is >> kw >> state.adam.t) || kw != "adam_t")
        throw FormatError("checkpoint: bad adam_t", 0);
    state.adam.m.w_q = read_matrix(is, "adam_m_q");
    state.adam.m.w_k = read_matrix(is, "adam_m_k");
    state.adam.m.w_v = read_matrix(is, "adam_m_v");
    state.adam.v.w_q = read_matrix(is, "adam_v_q");
    state.adam.v.w_k = read_matrix(is, "adam_v_k");
    state.adam.v.w_v = read_matrix(is, "adam_v_v");
    state.initial_params.attn.w_q = read_matrix(is, "init_w_q");
    state.initial_params.attn.w_k = read_matrix(is, "init_w_k");
    state.initial_params.attn.w_v = read_matrix(is, "init_w_v");
    if (!(is >> kw) || kw != "rng") throw FormatError("checkpoint: expected rng state", 0);
    state.rng.load(is);
    if (!is) throw FormatError("checkpoint: bad rng state", 0);
    if (!(is >> kw) || kw != "end") throw FormatError("checkpoint: missing end marker", 0);
    return state;
}

}  // namespace tspo::train
