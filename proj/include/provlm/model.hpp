#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "provlm/instances.hpp"

namespace provlm {

enum class NumericMode { kFast32, kCheck64 };

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ModelConfig {
    int vocab_size = 0;
    int context_len = 128;
    int d_model = 128;
    int n_layers = 4;
    int n_heads = 4;
    int d_ff = 512;
    double dropout_rate = 0.0;
    NumericMode numeric_mode = NumericMode::kFast32;

    int head_dim() const { return d_model / n_heads; }
    void validate() const;
};

struct StageLogEntry {
    int stage = 0;
    std::vector<int> source_ids;
    int epochs = 0;
};

template <typename S>
struct LayerParams {
    Mat<S> ln1_g, ln1_b, wq, wk, wv, wo, ln2_g, ln2_b, w1, b1, w2, b2;
};

// Pre-norm decoder blocks, learned absolute positions, tied embeddings.
template <typename S>
struct Params {
    Mat<S> tok_emb;  // V x d, also the output head (tied)
    Mat<S> pos_emb;  // ctx x d
    std::vector<LayerParams<S>> layers;
    Mat<S> lnf_g, lnf_b;

    template <typename F>
    void visit(F&& f) {
        f("tok_emb", tok_emb);
        f("pos_emb", pos_emb);
        for (size_t l = 0; l < layers.size(); ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            auto& L = layers[l];
            f(p + "ln1_g", L.ln1_g);
            f(p + "ln1_b", L.ln1_b);
            f(p + "wq", L.wq);
            f(p + "wk", L.wk);
            f(p + "wv", L.wv);
            f(p + "wo", L.wo);
            f(p + "ln2_g", L.ln2_g);
            f(p + "ln2_b", L.ln2_b);
            f(p + "w1", L.w1);
            f(p + "b1", L.b1);
            f(p + "w2", L.w2);
            f(p + "b2", L.b2);
        }
        f("lnf_g", lnf_g);
        f("lnf_b", lnf_b);
    }

    template <typename F>
    void visit(F&& f) const {
        const_cast<Params*>(this)->visit(
            [&](const std::string& name, Mat<S>& m) { f(name, static_cast<const Mat<S>&>(m)); });
    }
};

template <typename S>
struct ModelState {
    ModelConfig config;
    Params<S> params;
    Params<S> adam_m, adam_v;  // optimizer first/second moments
    int64_t step = 0;
    uint64_t vocab_fingerprint = 0;
    std::vector<StageLogEntry> stage_log;
};

// Per-batch loss bookkeeping; index by mode ordinal (Standard, Debug, Remediate).
struct BatchStats {
    double loss = 0.0;
    double mode_loss_sum[3] = {0, 0, 0};
    int64_t mode_token_count[3] = {0, 0, 0};
    // (mode ordinal, source id) -> (CE sum, token count)
    std::map<std::pair<int, int>, std::pair<double, int64_t>> by_mode_source;

    double mode_mean(int mode) const {
        return mode_token_count[mode] > 0
                   ? mode_loss_sum[mode] / static_cast<double>(mode_token_count[mode])
                   : 0.0;
    }
};

struct LossWeights {
    double beta = 1.0;
    double gamma = 1.0;
};

namespace detail {

constexpr double kLnEps = 1e-5;
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

template <typename S>
void layer_norm_forward(const Mat<S>& x, const Mat<S>& g, const Mat<S>& b, Mat<S>& y, Mat<S>& xhat,
                        Mat<S>& rstd) {
    const Eigen::Index rows = x.rows(), cols = x.cols();
    y.resize(rows, cols);
    xhat.resize(rows, cols);
    rstd.resize(rows, 1);
    for (Eigen::Index i = 0; i < rows; ++i) {
        const S mu = x.row(i).mean();
        S var = 0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const S d = x(i, j) - mu;
            var += d * d;
        }
        var /= static_cast<S>(cols);
        const S r = S(1) / std::sqrt(var + static_cast<S>(kLnEps));
        rstd(i, 0) = r;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const S xh = (x(i, j) - mu) * r;
            xhat(i, j) = xh;
            y(i, j) = g(0, j) * xh + b(0, j);
        }
    }
}

// dL/dx for y = g * xhat + b given cached xhat and rstd; accumulates dg, db.
template <typename S>
void layer_norm_backward(const Mat<S>& dy, const Mat<S>& xhat, const Mat<S>& rstd, const Mat<S>& g,
                         Mat<S>& dx, Mat<S>& dg, Mat<S>& db) {
    const Eigen::Index rows = dy.rows(), cols = dy.cols();
    dx.resize(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        S sum_dxhat = 0, sum_dxhat_xhat = 0;
        for (Eigen::Index j = 0; j < cols; ++j) {
            const S dxh = dy(i, j) * g(0, j);
            sum_dxhat += dxh;
            sum_dxhat_xhat += dxh * xhat(i, j);
            dg(0, j) += dy(i, j) * xhat(i, j);
            db(0, j) += dy(i, j);
        }
        const S inv_n = S(1) / static_cast<S>(cols);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const S dxh = dy(i, j) * g(0, j);
            dx(i, j) = (dxh - inv_n * sum_dxhat - xhat(i, j) * inv_n * sum_dxhat_xhat) * rstd(i, 0);
        }
    }
}

template <typename S>
S gelu(S u) {
    const S w = static_cast<S>(kGeluC) * (u + static_cast<S>(0.044715) * u * u * u);
    return S(0.5) * u * (S(1) + std::tanh(w));
}

template <typename S>
S gelu_grad(S u) {
    const S w = static_cast<S>(kGeluC) * (u + static_cast<S>(0.044715) * u * u * u);
    const S t = std::tanh(w);
    const S dw = static_cast<S>(kGeluC) * (S(1) + S(3) * static_cast<S>(0.044715) * u * u);
    return S(0.5) * (S(1) + t) + S(0.5) * u * (S(1) - t * t) * dw;
}

}  // namespace detail

template <typename S>
struct LayerCache {
    Mat<S> ln1_xhat, ln1_rstd, attn_in;        // attn_in = post-LN1 activations
    Mat<S> q, k, v, heads_out;                 // heads_out = concatenated head outputs
    std::vector<Mat<S>> att;                   // per head, T x T, strictly causal rows
    Mat<S> ln2_xhat, ln2_rstd, mlp_in, preact, act;
};

template <typename S>
struct ForwardCache {
    std::vector<int> ids;
    Mat<S> h0;                                  // embedding sum
    std::vector<Mat<S>> resid;                  // residual stream entering each layer
    std::vector<LayerCache<S>> layers;
    Mat<S> lnf_xhat, lnf_rstd, final_hidden;
    Mat<S> logits;                              // T x V
};

void model_config_validate_impl(const ModelConfig& c);

inline void ModelConfig::validate() const { model_config_validate_impl(*this); }

template <typename S>
Params<S> zeros_like(const ModelConfig& cfg) {
    Params<S> p;
    p.tok_emb = Mat<S>::Zero(cfg.vocab_size, cfg.d_model);
    p.pos_emb = Mat<S>::Zero(cfg.context_len, cfg.d_model);
    p.layers.resize(static_cast<size_t>(cfg.n_layers));
    for (auto& L : p.layers) {
        L.ln1_g = Mat<S>::Zero(1, cfg.d_model);
        L.ln1_b = Mat<S>::Zero(1, cfg.d_model);
        L.wq = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        L.wk = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        L.wv = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        L.wo = Mat<S>::Zero(cfg.d_model, cfg.d_model);
        L.ln2_g = Mat<S>::Zero(1, cfg.d_model);
        L.ln2_b = Mat<S>::Zero(1, cfg.d_model);
        L.w1 = Mat<S>::Zero(cfg.d_model, cfg.d_ff);
        L.b1 = Mat<S>::Zero(1, cfg.d_ff);
        L.w2 = Mat<S>::Zero(cfg.d_ff, cfg.d_model);
        L.b2 = Mat<S>::Zero(1, cfg.d_model);
    }
    p.lnf_g = Mat<S>::Zero(1, cfg.d_model);
    p.lnf_b = Mat<S>::Zero(1, cfg.d_model);
    return p;
}

template <typename S>
ModelState<S> init_model(const ModelConfig& cfg, uint64_t seed, uint64_t vocab_fingerprint);

template <typename S>
void forward_cached(const ModelState<S>& state, const std::vector<int>& ids, ForwardCache<S>& fc);

// Full-sequence logits; pure function of (state, ids) with dropout disabled.
template <typename S>
Mat<S> forward_logits(const ModelState<S>& state, const std::vector<int>& ids);

template <typename S>
std::vector<Mat<S>> forward_batch(const ModelState<S>& state,
                                  const std::vector<std::vector<int>>& batch);

// Mask-weighted mean token cross entropy; Debug and Remediate contributions
// scaled by beta and gamma. grads may be null for loss-only evaluation.
template <typename S>
BatchStats loss_and_grads(const ModelState<S>& state, const std::vector<TrainingInstance>& batch,
                          const LossWeights& weights, Params<S>* grads, int n_threads = 1,
                          uint64_t dropout_seed = 0);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

// One decoupled-weight-decay Adam update for a single tensor; step is the
// 1-based update count used for bias correction.
template <typename S>
void adam_update(Mat<S>& param, Mat<S>& m, Mat<S>& v, const Mat<S>& grad, const AdamConfig& opt,
                 double lr, int64_t step) {
    const double t = static_cast<double>(step);
    const double bc1 = 1.0 - std::pow(opt.beta1, t);
    const double bc2 = 1.0 - std::pow(opt.beta2, t);
    for (Eigen::Index r = 0; r < param.rows(); ++r) {
        for (Eigen::Index c = 0; c < param.cols(); ++c) {
            const double gd = static_cast<double>(grad(r, c));
            const double md = opt.beta1 * static_cast<double>(m(r, c)) + (1.0 - opt.beta1) * gd;
            const double vd = opt.beta2 * static_cast<double>(v(r, c)) + (1.0 - opt.beta2) * gd * gd;
            m(r, c) = static_cast<S>(md);
            v(r, c) = static_cast<S>(vd);
            const double update = (md / bc1) / (std::sqrt(vd / bc2) + opt.eps) +
                                  opt.weight_decay * static_cast<double>(param(r, c));
            param(r, c) = static_cast<S>(static_cast<double>(param(r, c)) - lr * update);
        }
    }
}

template <typename S>
void adam_step(ModelState<S>& state, const Params<S>& grads, const AdamConfig& opt, double lr);

// Incremental decoding with per-layer KV cache over an immutable state.
template <typename S>
class DecodeSession {
public:
    explicit DecodeSession(const ModelState<S>& state);
    // Appends one token and returns the logits row for the next position.
    const Mat<S>& step(int token_id);
    int length() const { return pos_; }

private:
    const ModelState<S>& state_;
    std::vector<Mat<S>> k_cache_, v_cache_;
    int pos_ = 0;
    Mat<S> logits_row_;
};

void save_checkpoint(const ModelState<float>& state, const std::string& path);
void save_checkpoint(const ModelState<double>& state, const std::string& path);
ModelState<float> load_checkpoint(const std::string& path);
ModelState<float> load_checkpoint(const std::string& path, uint64_t expected_vocab_fingerprint);

}  // namespace provlm
