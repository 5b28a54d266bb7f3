#include "tspo/numerics.hpp"

#include <algorithm>
#include <cmath>

#include "tspo/errors.hpp"

namespace tspo::numerics {

void AttentionParams::validate() const {
    std::size_t d = w_q.rows;
    auto square = [d](const Matrix& m) { return m.rows == d && m.cols == d; };
    if (!square(w_q) || !square(w_k) || !square(w_v))
        throw InvalidArgumentError("AttentionParams: projections must be square with equal dimension");
    if (!w_q.all_finite() || !w_k.all_finite() || !w_v.all_finite())
        throw InvalidArgumentError("AttentionParams: non-finite entries");
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw InvalidArgumentError("softmax: empty input");
    for (double v : logits)
        if (!std::isfinite(v)) throw InvalidArgumentError("softmax: non-finite logit");
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - mx);
        sum += out[i];
    }
    for (double& v : out) v /= sum;
    return out;
}

std::vector<double> log_softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw InvalidArgumentError("log_softmax: empty input");
    for (double v : logits)
        if (!std::isfinite(v)) throw InvalidArgumentError("log_softmax: non-finite logit");
    double mx = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double v : logits) sum += std::exp(v - mx);
    double lse = mx + std::log(sum);
    std::vector<double> out(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
    return out;
}

double cosine_similarity(const double* a, const double* b, std::size_t n) {
    double na = norm(a, n);
    double nb = norm(b, n);
    if (na == 0.0 || nb == 0.0) throw DegenerateInputError("cosine_similarity: zero vector");
    double c = dot(a, b, n) / (na * nb);
    return std::clamp(c, -1.0, 1.0);
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw InvalidArgumentError("cosine_similarity: length mismatch");
    return cosine_similarity(a.data(), b.data(), a.size());
}

Matrix sinusoidal_pe(std::size_t length, std::size_t dim) {
    if (dim % 2 != 0) throw InvalidArgumentError("sinusoidal_pe: dim must be even");
    Matrix pe(length, dim);
    for (std::size_t pos = 0; pos < length; ++pos) {
        for (std::size_t i = 0; i < dim / 2; ++i) {
            double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
            double angle = static_cast<double>(pos) * freq;
            pe.at(pos, 2 * i) = std::sin(angle);
            pe.at(pos, 2 * i + 1) = std::cos(angle);
        }
    }
    return pe;
}

std::pair<Matrix, AttentionCache> local_window_attention_forward(const Matrix& x,
                                                                 const AttentionParams& params,
                                                                 std::size_t window) {
    params.validate();
    std::size_t t_len = x.rows;
    std::size_t d = x.cols;
    if (d != params.dim()) throw InvalidArgumentError("attention: feature dim mismatch");
    if (window < 1) throw InvalidArgumentError("attention: window must be >= 1");

    AttentionCache cache;
    cache.window = window;
    cache.x_pe = x;
    cache.x_pe.add_inplace(sinusoidal_pe(t_len, d));
    cache.q = cache.x_pe.matmul(params.w_q);
    cache.k = cache.x_pe.matmul(params.w_k);
    cache.v = cache.x_pe.matmul(params.w_v);

    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix out = cache.x_pe;  // residual
    cache.win_begin.resize(t_len);
    cache.win_end.resize(t_len);
    cache.weights.resize(t_len);
    for (std::size_t t = 0; t < t_len; ++t) {
        std::size_t lo = t >= window / 2 ? t - window / 2 : 0;
        std::size_t hi = std::min(t_len, t + (window + 1) / 2);
        cache.win_begin[t] = lo;
        cache.win_end[t] = hi;
        std::vector<double> logits(hi - lo);
        for (std::size_t j = lo; j < hi; ++j)
            logits[j - lo] = dot(cache.q.row(t), cache.k.row(j), d) * scale;
        cache.weights[t] = softmax(logits);
        double* orow = out.row(t);
        for (std::size_t j = lo; j < hi; ++j) {
            double a = cache.weights[t][j - lo];
            const double* vrow = cache.v.row(j);
            for (std::size_t c = 0; c < d; ++c) orow[c] += a * vrow[c];
        }
    }
    return {std::move(out), std::move(cache)};
}

AttentionGrads local_window_attention_backward(const AttentionCache& cache,
                                               const AttentionParams& params,
                                               const Matrix& upstream) {
    std::size_t t_len = cache.x_pe.rows;
    std::size_t d = cache.x_pe.cols;
    if (upstream.rows != t_len || upstream.cols != d)
        throw InvalidArgumentError("attention backward: upstream shape mismatch");

    double scale = 1.0 / std::sqrt(static_cast<double>(d));
    Matrix dq(t_len, d), dk(t_len, d), dv(t_len, d);
    for (std::size_t t = 0; t < t_len; ++t) {
        std::size_t lo = cache.win_begin[t];
        std::size_t hi = cache.win_end[t];
        const std::vector<double>& w = cache.weights[t];
        const double* up = upstream.row(t);

        // dA_tj = upstream_t . v_j ; dV_j += a_tj * upstream_t
        std::vector<double> da(hi - lo);
        for (std::size_t j = lo; j < hi; ++j) {
            da[j - lo] = dot(up, cache.v.row(j), d);
            double a = w[j - lo];
            double* dvrow = dv.row(j);
            for (std::size_t c = 0; c < d; ++c) dvrow[c] += a * up[c];
        }
        // softmax backward within the window
        double inner = 0.0;
        for (std::size_t j = 0; j < da.size(); ++j) inner += w[j] * da[j];
        for (std::size_t j = lo; j < hi; ++j) {
            double dl = w[j - lo] * (da[j - lo] - inner) * scale;
            const double* krow = cache.k.row(j);
            const double* qrow = cache.q.row(t);
            double* dqrow = dq.row(t);
            double* dkrow = dk.row(j);
            for (std::size_t c = 0; c < d; ++c) {
                dqrow[c] += dl * krow[c];
                dkrow[c] += dl * qrow[c];
            }
        }
    }

    AttentionGrads g;
    Matrix x_t = cache.x_pe.transposed();
    g.dparams.w_q = x_t.matmul(dq);
    g.dparams.w_k = x_t.matmul(dk);
    g.dparams.w_v = x_t.matmul(dv);

    // residual + projection pullbacks; PE is constant so dX == dX'.
    g.dx = upstream;
    g.dx.add_inplace(dq.matmul(params.w_q.transposed()));
    g.dx.add_inplace(dk.matmul(params.w_k.transposed()));
    g.dx.add_inplace(dv.matmul(params.w_v.transposed()));
    return g;
}

std::vector<double> finite_difference_gradient(const std::function<double(const std::vector<double>&)>& f,
                                               const std::vector<double>& at, double step) {
    if (step <= 0.0) throw InvalidArgumentError("finite_difference_gradient: step must be > 0");
    std::vector<double> grad(at.size());
    std::vector<double> x = at;
    for (std::size_t i = 0; i < at.size(); ++i) {
        x[i] = at[i] + step;
        double fp = f(x);
        x[i] = at[i] - step;
        double fm = f(x);
        x[i] = at[i];
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw NumericalError("finite_difference_gradient: non-finite function value");
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

}  // namespace tspo::numerics
