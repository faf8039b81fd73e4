#include "provlm/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <limits>
#include <thread>

#include "provlm/errors.hpp"
#include "provlm/rng.hpp"

namespace provlm {

void model_config_validate_impl(const ModelConfig& c) {
    if (c.vocab_size <= 0 || c.context_len <= 0 || c.d_model <= 0 || c.n_layers <= 0 ||
        c.n_heads <= 0 || c.d_ff <= 0) {
        throw ConfigError("model dimensions must be positive");
    }
    if (c.d_model % c.n_heads != 0) {
        throw ConfigError("d_model must be divisible by n_heads");
    }
    if (c.dropout_rate < 0.0 || c.dropout_rate >= 1.0) {
        throw ConfigError("dropout_rate must lie in [0,1)");
    }
}

namespace {

template <typename S>
void fill_normal(Mat<S>& m, Rng& rng, double stddev) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            m(i, j) = static_cast<S>(rng.normal(0.0, stddev));
        }
    }
}

}  // namespace

template <typename S>
ModelState<S> init_model(const ModelConfig& cfg, uint64_t seed, uint64_t vocab_fingerprint) {
    cfg.validate();
    ModelState<S> st;
    st.config = cfg;
    st.vocab_fingerprint = vocab_fingerprint;
    st.params = zeros_like<S>(cfg);
    st.adam_m = zeros_like<S>(cfg);
    st.adam_v = zeros_like<S>(cfg);

    Rng rng = Rng(seed).fork(91);
    const double base_std = 0.02;
    const double resid_std = base_std / std::sqrt(2.0 * cfg.n_layers);
    fill_normal(st.params.tok_emb, rng, base_std);
    fill_normal(st.params.pos_emb, rng, base_std);
    for (auto& L : st.params.layers) {
        L.ln1_g.setOnes();
        L.ln2_g.setOnes();
        fill_normal(L.wq, rng, base_std);
        fill_normal(L.wk, rng, base_std);
        fill_normal(L.wv, rng, base_std);
        fill_normal(L.wo, rng, resid_std);
        fill_normal(L.w1, rng, base_std);
        fill_normal(L.w2, rng, resid_std);
    }
    st.params.lnf_g.setOnes();
    return st;
}

template <typename S>
void forward_cached(const ModelState<S>& state, const std::vector<int>& ids, ForwardCache<S>& fc) {
    const ModelConfig& cfg = state.config;
    const int T = static_cast<int>(ids.size());
    if (T == 0 || T > cfg.context_len) {
        throw DataError("sequence length " + std::to_string(T) + " outside [1, " +
                        std::to_string(cfg.context_len) + "]");
    }
    for (int id : ids) {
        if (id < 0 || id >= cfg.vocab_size) {
            throw DataError("input id out of range: " + std::to_string(id));
        }
    }
    const int H = cfg.n_heads, dh = cfg.head_dim(), d = cfg.d_model;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));
    const Params<S>& p = state.params;

    fc.ids = ids;
    fc.h0.resize(T, d);
    for (int t = 0; t < T; ++t) {
        fc.h0.row(t) = p.tok_emb.row(ids[t]) + p.pos_emb.row(t);
    }
    fc.resid.assign(static_cast<size_t>(cfg.n_layers), Mat<S>());
    fc.layers.assign(static_cast<size_t>(cfg.n_layers), LayerCache<S>());

    Mat<S> h = fc.h0;
    for (int l = 0; l < cfg.n_layers; ++l) {
        LayerCache<S>& lc = fc.layers[static_cast<size_t>(l)];
        const LayerParams<S>& L = p.layers[static_cast<size_t>(l)];
        fc.resid[static_cast<size_t>(l)] = h;

        detail::layer_norm_forward(h, L.ln1_g, L.ln1_b, lc.attn_in, lc.ln1_xhat, lc.ln1_rstd);
        lc.q.noalias() = lc.attn_in * L.wq;
        lc.k.noalias() = lc.attn_in * L.wk;
        lc.v.noalias() = lc.attn_in * L.wv;

        lc.att.assign(static_cast<size_t>(H), Mat<S>::Zero(T, T));
        lc.heads_out.resize(T, d);
        for (int hd = 0; hd < H; ++hd) {
            auto qh = lc.q.middleCols(hd * dh, dh);
            auto kh = lc.k.middleCols(hd * dh, dh);
            auto vh = lc.v.middleCols(hd * dh, dh);
            Mat<S>& att = lc.att[static_cast<size_t>(hd)];
            for (int i = 0; i < T; ++i) {
                // causal: position i attends to j <= i
                S mx = -std::numeric_limits<S>::infinity();
                for (int j = 0; j <= i; ++j) {
                    att(i, j) = qh.row(i).dot(kh.row(j)) * scale;
                    mx = std::max(mx, att(i, j));
                }
                S sum = 0;
                for (int j = 0; j <= i; ++j) {
                    att(i, j) = std::exp(att(i, j) - mx);
                    sum += att(i, j);
                }
                const S inv = S(1) / sum;
                for (int j = 0; j <= i; ++j) {
                    att(i, j) *= inv;
                }
            }
            lc.heads_out.middleCols(hd * dh, dh).noalias() = att * vh;
        }
        h.noalias() += lc.heads_out * L.wo;

        detail::layer_norm_forward(h, L.ln2_g, L.ln2_b, lc.mlp_in, lc.ln2_xhat, lc.ln2_rstd);
        lc.preact.noalias() = lc.mlp_in * L.w1;
        lc.preact.rowwise() += L.b1.row(0);
        lc.act.resize(T, cfg.d_ff);
        for (int i = 0; i < T; ++i) {
            for (int j = 0; j < cfg.d_ff; ++j) {
                lc.act(i, j) = detail::gelu(lc.preact(i, j));
            }
        }
        h.noalias() += lc.act * L.w2;
        h.rowwise() += L.b2.row(0);
    }

    detail::layer_norm_forward(h, p.lnf_g, p.lnf_b, fc.final_hidden, fc.lnf_xhat, fc.lnf_rstd);
    fc.logits.noalias() = fc.final_hidden * p.tok_emb.transpose();
}

template <typename S>
Mat<S> forward_logits(const ModelState<S>& state, const std::vector<int>& ids) {
    ForwardCache<S> fc;
    forward_cached(state, ids, fc);
    return std::move(fc.logits);
}

template <typename S>
std::vector<Mat<S>> forward_batch(const ModelState<S>& state,
                                  const std::vector<std::vector<int>>& batch) {
    std::vector<Mat<S>> out;
    out.reserve(batch.size());
    for (const auto& ids : batch) {
        out.push_back(forward_logits(state, ids));
    }
    return out;
}

namespace {

template <typename S>
void accumulate_params(Params<S>& into, const Params<S>& from) {
    std::vector<Mat<S>*> dst;
    std::vector<const Mat<S>*> src;
    into.visit([&](const std::string&, Mat<S>& m) { dst.push_back(&m); });
    from.visit([&](const std::string&, const Mat<S>& m) { src.push_back(&m); });
    for (size_t i = 0; i < dst.size(); ++i) {
        *dst[i] += *src[i];
    }
}

// Backward for one instance given its forward cache and per-position dlogit
// scale; accumulates parameter gradients.
template <typename S>
void backward_one(const ModelState<S>& state, const ForwardCache<S>& fc,
                  const TrainingInstance& inst, const std::vector<double>& token_scale,
                  Params<S>& g) {
    const ModelConfig& cfg = state.config;
    const Params<S>& p = state.params;
    const int T = static_cast<int>(fc.ids.size());
    const int H = cfg.n_heads, dh = cfg.head_dim(), d = cfg.d_model;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));

    // dlogits is nonzero only at masked positions; keep it dense over rows
    // that matter to reuse GEMMs below.
    Mat<S> dlogits = Mat<S>::Zero(T, cfg.vocab_size);
    for (int t = 0; t < T; ++t) {
        if (token_scale[static_cast<size_t>(t)] == 0.0) {
            continue;
        }
        // softmax in double for stable CE gradients
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < cfg.vocab_size; ++j) {
            mx = std::max(mx, static_cast<double>(fc.logits(t, j)));
        }
        double sum = 0;
        for (int j = 0; j < cfg.vocab_size; ++j) {
            sum += std::exp(static_cast<double>(fc.logits(t, j)) - mx);
        }
        const double inv = 1.0 / sum;
        const double w = token_scale[static_cast<size_t>(t)];
        for (int j = 0; j < cfg.vocab_size; ++j) {
            const double prob = std::exp(static_cast<double>(fc.logits(t, j)) - mx) * inv;
            dlogits(t, j) = static_cast<S>(prob * w);
        }
        dlogits(t, inst.target_ids[static_cast<size_t>(t)]) -= static_cast<S>(w);
    }

    // output head (tied embedding): logits = final_hidden * tok_emb^T
    g.tok_emb.noalias() += dlogits.transpose() * fc.final_hidden;
    Mat<S> dh_final = dlogits * p.tok_emb;

    Mat<S> dresid;
    detail::layer_norm_backward(dh_final, fc.lnf_xhat, fc.lnf_rstd, p.lnf_g, dresid, g.lnf_g,
                                g.lnf_b);

    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        const LayerCache<S>& lc = fc.layers[static_cast<size_t>(l)];
        const LayerParams<S>& L = p.layers[static_cast<size_t>(l)];
        LayerParams<S>& gL = g.layers[static_cast<size_t>(l)];

        // MLP branch
        g.layers[static_cast<size_t>(l)].b2.row(0) += dresid.colwise().sum();
        gL.w2.noalias() += lc.act.transpose() * dresid;
        Mat<S> dact = dresid * L.w2.transpose();
        Mat<S> dpre(T, cfg.d_ff);
        for (int i = 0; i < T; ++i) {
            for (int j = 0; j < cfg.d_ff; ++j) {
                dpre(i, j) = dact(i, j) * detail::gelu_grad(lc.preact(i, j));
            }
        }
        gL.b1.row(0) += dpre.colwise().sum();
        gL.w1.noalias() += lc.mlp_in.transpose() * dpre;
        Mat<S> dmlp_in = dpre * L.w1.transpose();
        Mat<S> dx;
        detail::layer_norm_backward(dmlp_in, lc.ln2_xhat, lc.ln2_rstd, L.ln2_g, dx, gL.ln2_g,
                                    gL.ln2_b);
        dresid += dx;

        // attention branch
        gL.wo.noalias() += lc.heads_out.transpose() * dresid;
        Mat<S> dheads = dresid * L.wo.transpose();
        Mat<S> dq(T, d), dk(T, d), dv(T, d);
        for (int hd = 0; hd < H; ++hd) {
            auto qh = lc.q.middleCols(hd * dh, dh);
            auto kh = lc.k.middleCols(hd * dh, dh);
            auto vh = lc.v.middleCols(hd * dh, dh);
            auto dout_h = dheads.middleCols(hd * dh, dh);
            const Mat<S>& att = lc.att[static_cast<size_t>(hd)];

            Mat<S> datt;
            datt.noalias() = dout_h * vh.transpose();
            dv.middleCols(hd * dh, dh).noalias() = att.transpose() * dout_h;
            // softmax rows: ds = p .* (dp - sum(dp .* p))
            Mat<S> ds = Mat<S>::Zero(T, T);
            for (int i = 0; i < T; ++i) {
                S dot = 0;
                for (int j = 0; j <= i; ++j) {
                    dot += datt(i, j) * att(i, j);
                }
                for (int j = 0; j <= i; ++j) {
                    ds(i, j) = att(i, j) * (datt(i, j) - dot);
                }
            }
            dq.middleCols(hd * dh, dh).noalias() = ds * kh * scale;
            dk.middleCols(hd * dh, dh).noalias() = ds.transpose() * qh * scale;
        }
        gL.wq.noalias() += lc.attn_in.transpose() * dq;
        gL.wk.noalias() += lc.attn_in.transpose() * dk;
        gL.wv.noalias() += lc.attn_in.transpose() * dv;
        Mat<S> dattn_in = dq * L.wq.transpose();
        dattn_in.noalias() += dk * L.wk.transpose();
        dattn_in.noalias() += dv * L.wv.transpose();
        detail::layer_norm_backward(dattn_in, lc.ln1_xhat, lc.ln1_rstd, L.ln1_g, dx, gL.ln1_g,
                                    gL.ln1_b);
        dresid += dx;
    }

    for (int t = 0; t < T; ++t) {
        g.tok_emb.row(fc.ids[static_cast<size_t>(t)]) += dresid.row(t);
        g.pos_emb.row(t) += dresid.row(t);
    }
}

int mode_ordinal(Mode m) { return static_cast<int>(m); }

}  // namespace

template <typename S>
BatchStats loss_and_grads(const ModelState<S>& state, const std::vector<TrainingInstance>& batch,
                          const LossWeights& weights, Params<S>* grads, int n_threads,
                          uint64_t dropout_seed) {
    (void)dropout_seed;  // dropout_rate 0 is the supported training path
    const double mode_w[3] = {1.0, weights.beta, weights.gamma};

    // token counts per mode over the whole batch fix the normalization
    int64_t counts[3] = {0, 0, 0};
    for (const TrainingInstance& inst : batch) {
        int64_t m = 0;
        for (bool b : inst.loss_mask) {
            m += b ? 1 : 0;
        }
        counts[mode_ordinal(inst.mode)] += m;
    }

    struct Partial {
        double mode_sum[3] = {0, 0, 0};
        std::map<std::pair<int, int>, std::pair<double, int64_t>> by_ms;
        Params<S> grads;
        bool has_grads = false;
    };

    const int usable = std::max(1, std::min<int>(n_threads, static_cast<int>(batch.size())));
    std::vector<Partial> partials(static_cast<size_t>(usable));

    auto work = [&](int tid) {
        Partial& part = partials[static_cast<size_t>(tid)];
        if (grads != nullptr) {
            part.grads = zeros_like<S>(state.config);
            part.has_grads = true;
        }
        ForwardCache<S> fc;
        const size_t lo = batch.size() * static_cast<size_t>(tid) / static_cast<size_t>(usable);
        const size_t hi = batch.size() * static_cast<size_t>(tid + 1) / static_cast<size_t>(usable);
        for (size_t idx = lo; idx < hi; ++idx) {
            const TrainingInstance& inst = batch[idx];
            const int mo = mode_ordinal(inst.mode);
            forward_cached(state, inst.input_ids, fc);
            const int T = static_cast<int>(inst.input_ids.size());
            std::vector<double> token_scale(static_cast<size_t>(T), 0.0);
            const double scale =
                counts[mo] > 0 ? mode_w[mo] / static_cast<double>(counts[mo]) : 0.0;
            for (int t = 0; t < T; ++t) {
                if (!inst.loss_mask[static_cast<size_t>(t)]) {
                    continue;
                }
                // CE via log-sum-exp in double
                double mx = -std::numeric_limits<double>::infinity();
                for (int j = 0; j < state.config.vocab_size; ++j) {
                    mx = std::max(mx, static_cast<double>(fc.logits(t, j)));
                }
                double sum = 0;
                for (int j = 0; j < state.config.vocab_size; ++j) {
                    sum += std::exp(static_cast<double>(fc.logits(t, j)) - mx);
                }
                const double ce =
                    std::log(sum) + mx -
                    static_cast<double>(fc.logits(t, inst.target_ids[static_cast<size_t>(t)]));
                part.mode_sum[mo] += ce;
                auto& cell = part.by_ms[{mo, inst.true_source}];
                cell.first += ce;
                cell.second += 1;
                token_scale[static_cast<size_t>(t)] = scale;
            }
            if (grads != nullptr) {
                backward_one(state, fc, inst, token_scale, part.grads);
            }
        }
    };

    if (usable == 1) {
        work(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<size_t>(usable));
        for (int t = 0; t < usable; ++t) {
            threads.emplace_back(work, t);
        }
        for (auto& th : threads) {
            th.join();
        }
    }

    BatchStats stats;
    for (int m = 0; m < 3; ++m) {
        stats.mode_token_count[m] = counts[m];
    }
    if (grads != nullptr) {
        *grads = zeros_like<S>(state.config);
    }
    // fixed thread-order reduction keeps results reproducible
    for (int t = 0; t < usable; ++t) {
        for (int m = 0; m < 3; ++m) {
            stats.mode_loss_sum[m] += partials[static_cast<size_t>(t)].mode_sum[m];
        }
        for (const auto& [key, val] : partials[static_cast<size_t>(t)].by_ms) {
            auto& cell = stats.by_mode_source[key];
            cell.first += val.first;
            cell.second += val.second;
        }
        if (grads != nullptr && partials[static_cast<size_t>(t)].has_grads) {
            accumulate_params(*grads, partials[static_cast<size_t>(t)].grads);
        }
    }
    double loss = 0;
    for (int m = 0; m < 3; ++m) {
        if (counts[m] > 0) {
            loss += mode_w[m] * stats.mode_loss_sum[m] / static_cast<double>(counts[m]);
        }
    }
    stats.loss = loss;
    if (!std::isfinite(loss)) {
        throw NumericError("non-finite loss at step " + std::to_string(state.step) +
                           " (mode sums: " + std::to_string(stats.mode_loss_sum[0]) + ", " +
                           std::to_string(stats.mode_loss_sum[1]) + ", " +
                           std::to_string(stats.mode_loss_sum[2]) + ")");
    }
    return stats;
}

template <typename S>
void adam_step(ModelState<S>& state, const Params<S>& grads, const AdamConfig& opt, double lr) {
    state.step += 1;

    // walk the three structures in lockstep via flat pointers
    std::vector<Mat<S>*> ps, ms, vs;
    std::vector<const Mat<S>*> gs;
    state.params.visit([&](const std::string&, Mat<S>& m) { ps.push_back(&m); });
    state.adam_m.visit([&](const std::string&, Mat<S>& m) { ms.push_back(&m); });
    state.adam_v.visit([&](const std::string&, Mat<S>& m) { vs.push_back(&m); });
    grads.visit([&](const std::string&, const Mat<S>& m) { gs.push_back(&m); });

    for (size_t i = 0; i < ps.size(); ++i) {
        adam_update(*ps[i], *ms[i], *vs[i], *gs[i], opt, lr, state.step);
    }
}

template <typename S>
DecodeSession<S>::DecodeSession(const ModelState<S>& state) : state_(state) {
    const ModelConfig& cfg = state.config;
    k_cache_.assign(static_cast<size_t>(cfg.n_layers), Mat<S>(cfg.context_len, cfg.d_model));
    v_cache_.assign(static_cast<size_t>(cfg.n_layers), Mat<S>(cfg.context_len, cfg.d_model));
}

template <typename S>
const Mat<S>& DecodeSession<S>::step(int token_id) {
    const ModelConfig& cfg = state_.config;
    if (token_id < 0 || token_id >= cfg.vocab_size) {
        throw DataError("input id out of range: " + std::to_string(token_id));
    }
    if (pos_ >= cfg.context_len) {
        throw DataError("decode session exceeded context length");
    }
    const Params<S>& p = state_.params;
    const int H = cfg.n_heads, dh = cfg.head_dim(), d = cfg.d_model;
    const S scale = S(1) / std::sqrt(static_cast<S>(dh));

    Mat<S> h = p.tok_emb.row(token_id) + p.pos_emb.row(pos_);
    Mat<S> xhat, rstd, normed, dummy;
    for (int l = 0; l < cfg.n_layers; ++l) {
        const LayerParams<S>& L = p.layers[static_cast<size_t>(l)];
        detail::layer_norm_forward(h, L.ln1_g, L.ln1_b, normed, xhat, rstd);
        Mat<S> q = normed * L.wq;
        k_cache_[static_cast<size_t>(l)].row(pos_) = normed * L.wk;
        v_cache_[static_cast<size_t>(l)].row(pos_) = normed * L.wv;
        Mat<S> heads_out(1, d);
        for (int hd = 0; hd < H; ++hd) {
            auto kh = k_cache_[static_cast<size_t>(l)].middleCols(hd * dh, dh);
            auto vh = v_cache_[static_cast<size_t>(l)].middleCols(hd * dh, dh);
            auto qh = q.middleCols(hd * dh, dh);
            Eigen::Matrix<S, 1, Eigen::Dynamic> att(pos_ + 1);
            S mx = -std::numeric_limits<S>::infinity();
            for (int j = 0; j <= pos_; ++j) {
                att(j) = qh.row(0).dot(kh.row(j)) * scale;
                mx = std::max(mx, att(j));
            }
            S sum = 0;
            for (int j = 0; j <= pos_; ++j) {
                att(j) = std::exp(att(j) - mx);
                sum += att(j);
            }
            att /= sum;
            heads_out.middleCols(hd * dh, dh).noalias() = att * vh.topRows(pos_ + 1);
        }
        h.noalias() += heads_out * L.wo;
        detail::layer_norm_forward(h, L.ln2_g, L.ln2_b, normed, xhat, rstd);
        Mat<S> pre = normed * L.w1;
        pre.rowwise() += L.b1.row(0);
        for (Eigen::Index j = 0; j < pre.cols(); ++j) {
            pre(0, j) = detail::gelu(pre(0, j));
        }
        h.noalias() += pre * L.w2;
        h.rowwise() += L.b2.row(0);
    }
    detail::layer_norm_forward(h, p.lnf_g, p.lnf_b, normed, xhat, rstd);
    logits_row_.noalias() = normed * p.tok_emb.transpose();
    ++pos_;
    return logits_row_;
}

// ----------------------------------------------------------------------------
// checkpoint format: magic, version, scalar width, config, step, stage log,
// named parameter tensors, adam moments, fingerprint footer

namespace {

constexpr char kMagic[8] = {'P', 'V', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr char kFooter[8] = {'P', 'V', 'L', 'M', 'E', 'N', 'D', '!'};
constexpr uint32_t kVersion = 1;

template <typename T>
void put(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) {
        throw DataError("checkpoint file truncated");
    }
    return v;
}

template <typename S>
void write_tensor(std::ofstream& out, const std::string& name, const Mat<S>& m) {
    put<uint16_t>(out, static_cast<uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<uint32_t>(out, static_cast<uint32_t>(m.rows()));
    put<uint32_t>(out, static_cast<uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()),
              static_cast<std::streamsize>(sizeof(S) * static_cast<size_t>(m.size())));
}

template <typename S>
void read_tensor(std::ifstream& in, const std::string& expect_name, Mat<S>& m) {
    const auto name_len = get<uint16_t>(in);
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (!in || name != expect_name) {
        throw DataError("checkpoint tensor mismatch: expected " + expect_name);
    }
    const auto rows = get<uint32_t>(in);
    const auto cols = get<uint32_t>(in);
    if (rows != static_cast<uint32_t>(m.rows()) || cols != static_cast<uint32_t>(m.cols())) {
        throw DataError("checkpoint tensor shape mismatch for " + expect_name);
    }
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(S) * static_cast<size_t>(m.size())));
    if (!in) {
        throw DataError("checkpoint file truncated");
    }
}

template <typename S>
void save_checkpoint_impl(const ModelState<S>& state, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write checkpoint: " + path);
    }
    out.write(kMagic, 8);
    put<uint32_t>(out, kVersion);
    put<uint8_t>(out, static_cast<uint8_t>(sizeof(S)));
    const ModelConfig& c = state.config;
    put<int32_t>(out, c.vocab_size);
    put<int32_t>(out, c.context_len);
    put<int32_t>(out, c.d_model);
    put<int32_t>(out, c.n_layers);
    put<int32_t>(out, c.n_heads);
    put<int32_t>(out, c.d_ff);
    put<double>(out, c.dropout_rate);
    put<uint8_t>(out, c.numeric_mode == NumericMode::kCheck64 ? 1 : 0);
    put<int64_t>(out, state.step);
    put<uint32_t>(out, static_cast<uint32_t>(state.stage_log.size()));
    for (const StageLogEntry& e : state.stage_log) {
        put<int32_t>(out, e.stage);
        put<uint32_t>(out, static_cast<uint32_t>(e.source_ids.size()));
        for (int s : e.source_ids) {
            put<int32_t>(out, s);
        }
        put<int32_t>(out, e.epochs);
    }
    state.params.visit(
        [&](const std::string& name, const Mat<S>& m) { write_tensor(out, name, m); });
    state.adam_m.visit(
        [&](const std::string& name, const Mat<S>& m) { write_tensor(out, name, m); });
    state.adam_v.visit(
        [&](const std::string& name, const Mat<S>& m) { write_tensor(out, name, m); });
    put<uint64_t>(out, state.vocab_fingerprint);
    out.write(kFooter, 8);
    if (!out) {
        throw DataError("failed writing checkpoint: " + path);
    }
}

}  // namespace

void save_checkpoint(const ModelState<float>& state, const std::string& path) {
    save_checkpoint_impl(state, path);
}
void save_checkpoint(const ModelState<double>& state, const std::string& path) {
    save_checkpoint_impl(state, path);
}

ModelState<float> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open checkpoint: " + path);
    }
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) {
        throw DataError("not a provlm checkpoint: " + path);
    }
    const auto version = get<uint32_t>(in);
    if (version != kVersion) {
        throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    const auto width = get<uint8_t>(in);
    if (width != sizeof(float)) {
        throw DataError("checkpoint stores " + std::to_string(width) +
                        "-byte scalars; expected float32");
    }
    ModelState<float> st;
    ModelConfig& c = st.config;
    c.vocab_size = get<int32_t>(in);
    c.context_len = get<int32_t>(in);
    c.d_model = get<int32_t>(in);
    c.n_layers = get<int32_t>(in);
    c.n_heads = get<int32_t>(in);
    c.d_ff = get<int32_t>(in);
    c.dropout_rate = get<double>(in);
    c.numeric_mode = get<uint8_t>(in) == 1 ? NumericMode::kCheck64 : NumericMode::kFast32;
    c.validate();
    st.step = get<int64_t>(in);
    const auto n_entries = get<uint32_t>(in);
    for (uint32_t i = 0; i < n_entries; ++i) {
        StageLogEntry e;
        e.stage = get<int32_t>(in);
        const auto n_src = get<uint32_t>(in);
        for (uint32_t k = 0; k < n_src; ++k) {
            e.source_ids.push_back(get<int32_t>(in));
        }
        e.epochs = get<int32_t>(in);
        st.stage_log.push_back(std::move(e));
    }
    st.params = zeros_like<float>(c);
    st.adam_m = zeros_like<float>(c);
    st.adam_v = zeros_like<float>(c);
    st.params.visit([&](const std::string& name, Mat<float>& m) { read_tensor(in, name, m); });
    st.adam_m.visit([&](const std::string& name, Mat<float>& m) { read_tensor(in, name, m); });
    st.adam_v.visit([&](const std::string& name, Mat<float>& m) { read_tensor(in, name, m); });
    st.vocab_fingerprint = get<uint64_t>(in);
    char footer[8];
    in.read(footer, 8);
    if (!in || std::memcmp(footer, kFooter, 8) != 0) {
        throw DataError("checkpoint file truncated");
    }
    return st;
}

ModelState<float> load_checkpoint(const std::string& path, uint64_t expected_vocab_fingerprint) {
    ModelState<float> st = load_checkpoint(path);
    if (st.vocab_fingerprint != expected_vocab_fingerprint) {
        throw DataError("checkpoint vocab fingerprint mismatch: model was trained with a "
                        "different vocabulary");
    }
    return st;
}

// explicit instantiations: float for training, double for verification
template ModelState<float> init_model<float>(const ModelConfig&, uint64_t, uint64_t);
template ModelState<double> init_model<double>(const ModelConfig&, uint64_t, uint64_t);
template void forward_cached<float>(const ModelState<float>&, const std::vector<int>&,
                                    ForwardCache<float>&);
template void forward_cached<double>(const ModelState<double>&, const std::vector<int>&,
                                     ForwardCache<double>&);
template Mat<float> forward_logits<float>(const ModelState<float>&, const std::vector<int>&);
template Mat<double> forward_logits<double>(const ModelState<double>&, const std::vector<int>&);
template std::vector<Mat<float>> forward_batch<float>(const ModelState<float>&,
                                                      const std::vector<std::vector<int>>&);
template std::vector<Mat<double>> forward_batch<double>(const ModelState<double>&,
                                                        const std::vector<std::vector<int>>&);
template BatchStats loss_and_grads<float>(const ModelState<float>&,
                                          const std::vector<TrainingInstance>&, const LossWeights&,
                                          Params<float>*, int, uint64_t);
template BatchStats loss_and_grads<double>(const ModelState<double>&,
                                           const std::vector<TrainingInstance>&,
                                           const LossWeights&, Params<double>*, int, uint64_t);
template void adam_step<float>(ModelState<float>&, const Params<float>&, const AdamConfig&,
                               double);
template void adam_step<double>(ModelState<double>&, const Params<double>&, const AdamConfig&,
                                double);
template class DecodeSession<float>;
template class DecodeSession<double>;

}  // namespace provlm
