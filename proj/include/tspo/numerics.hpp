#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "tspo/matrix.hpp"

namespace tspo::numerics {

// Projection weights of the local-window attention block. All three are D×D.
struct AttentionParams {
    Matrix w_q, w_k, w_v;

    std::size_t dim() const { return w_q.rows; }
    void validate() const;

    AttentionParams& add_scaled(const AttentionParams& o, double s) {
        for (std::size_t i = 0; i < w_q.data.size(); ++i) w_q.data[i] += s * o.w_q.data[i];
        for (std::size_t i = 0; i < w_k.data.size(); ++i) w_k.data[i] += s * o.w_k.data[i];
        for (std::size_t i = 0; i < w_v.data.size(); ++i) w_v.data[i] += s * o.w_v.data[i];
        return *this;
    }
    static AttentionParams zeros(std::size_t d) { return {Matrix(d, d), Matrix(d, d), Matrix(d, d)}; }
};

// Everything the backward pass needs from a forward call.
struct AttentionCache {
    Matrix x_pe;               // input with positional embeddings added
    Matrix q, k, v;            // projected embeddings
    std::vector<std::size_t> win_begin, win_end;  // per-frame window [begin, end)
    std::vector<std::vector<double>> weights;     // per-frame softmax over its window
    std::size_t window = 0;
};

// Numerically stable softmax (max-subtraction).
std::vector<double> softmax(const std::vector<double>& logits);

// Stable log-softmax: z - max - log(sum exp(z - max)).
std::vector<double> log_softmax(const std::vector<double>& logits);

double cosine_similarity(const double* a, const double* b, std::size_t n);
double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b);

// PE(pos,2i) = sin(pos / 10000^(2i/dim)), PE(pos,2i+1) = cos(pos / 10000^(2i/dim)).
Matrix sinusoidal_pe(std::size_t length, std::size_t dim);

// Scaled dot-product attention restricted to a local window around each frame,
// with a residual connection: out = x' + Attn(x'), x' = x + PE.
// Frame t attends to [t - w/2, t + (w+1)/2) clipped to [0, T).
std::pair<Matrix, AttentionCache> local_window_attention_forward(const Matrix& x,
                                                                 const AttentionParams& params,
                                                                 std::size_t window);

struct AttentionGrads {
    Matrix dx;
    AttentionParams dparams;
};

AttentionGrads local_window_attention_backward(const AttentionCache& cache,
                                               const AttentionParams& params,
                                               const Matrix& upstream);

// Central finite differences, one coordinate at a time.
std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               const std::vector<double>& at, double step);

}  // namespace tspo::numerics
