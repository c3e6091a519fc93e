#include "qglab/cnn.hpp"

#include "qglab/container.hpp"
#include "qglab/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstring>

namespace qglab {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

CnnModel CnnModel::make(int grid_n, int in_ch, int hidden_ch, int out_ch, int n_layers,
                        uint64_t seed) {
    if (n_layers < 2) throw std::invalid_argument("model needs at least 2 layers");
    CnnModel m;
    m.grid_n = grid_n;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < n_layers; ++l) {
        ConvLayer layer;
        layer.in_ch = (l == 0) ? in_ch : hidden_ch;
        layer.out_ch = (l == n_layers - 1) ? out_ch : hidden_ch;
        layer.ksize = m.kernel_size;
        layer.weights.resize(static_cast<size_t>(layer.out_ch) * layer.in_ch * 25);
        layer.bias.assign(layer.out_ch, 0.0);
        const double bound = std::sqrt(6.0 / (layer.in_ch * 25.0));
        for (double& w : layer.weights) w = bound * (2.0 * rng_uniform(rng) - 1.0);
        m.layers.push_back(std::move(layer));
    }
    m.norm.in_mean.assign(in_ch, 0.0);
    m.norm.in_std.assign(in_ch, 1.0);
    m.norm.tgt_mean.assign(out_ch, 0.0);
    m.norm.tgt_std.assign(out_ch, 1.0);
    return m;
}

size_t CnnModel::param_count() const {
    size_t c = 0;
    for (const auto& l : layers) c += l.weights.size() + l.bias.size();
    return c;
}

bool CnnModel::finite() const {
    for (const auto& l : layers) {
        for (double w : l.weights)
            if (!std::isfinite(w)) return false;
        for (double b : l.bias)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

namespace {

// Wrapped im2col: row (c*25 + (dy+2)*5 + (dx+2)), column (y*n + x) holds
// in[c][(y+dy) mod n][(x+dx) mod n].
void im2col(const double* in, int in_ch, int n, double* X) {
    const int plane = n * n;
    for (int c = 0; c < in_ch; ++c) {
        const double* src = in + static_cast<size_t>(c) * plane;
        for (int dy = -2; dy <= 2; ++dy) {
            for (int dx = -2; dx <= 2; ++dx) {
                double* row =
                    X + (static_cast<size_t>(c) * 25 + (dy + 2) * 5 + (dx + 2)) * plane;
                for (int y = 0; y < n; ++y) {
                    const double* srow = src + static_cast<size_t>((y + dy + n) % n) * n;
                    double* drow = row + static_cast<size_t>(y) * n;
                    const int shift = (dx + n) % n;
                    // drow[x] = srow[(x + shift) % n]: two contiguous copies
                    std::memcpy(drow, srow + shift, sizeof(double) * (n - shift));
                    std::memcpy(drow + (n - shift), srow, sizeof(double) * shift);
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
void col2im_add(const double* X, int in_ch, int n, double* dIn) {
    const int plane = n * n;
    for (int c = 0; c < in_ch; ++c) {
        double* dst = dIn + static_cast<size_t>(c) * plane;
        for (int dy = -2; dy <= 2; ++dy) {
            for (int dx = -2; dx <= 2; ++dx) {
                const double* row =
                    X + (static_cast<size_t>(c) * 25 + (dy + 2) * 5 + (dx + 2)) * plane;
                for (int y = 0; y < n; ++y) {
                    double* drow = dst + static_cast<size_t>((y + dy + n) % n) * n;
                    const double* srow = row + static_cast<size_t>(y) * n;
                    const int shift = (dx + n) % n;
                    for (int x = 0; x < n - shift; ++x) drow[x + shift] += srow[x];
                    for (int x = n - shift; x < n; ++x) drow[x + shift - n] += srow[x];
                }
            }
        }
    }
}

void conv_forward(const ConvLayer& layer, const double* in, int n, double* out,
                  std::vector<double>& scratch) {
    const int plane = n * n;
    scratch.resize(static_cast<size_t>(layer.in_ch) * 25 * plane);
    im2col(in, layer.in_ch, n, scratch.data());
    CMapMat W(layer.weights.data(), layer.out_ch, layer.in_ch * 25);
    CMapMat X(scratch.data(), layer.in_ch * 25, plane);
    MapMat Y(out, layer.out_ch, plane);
    Y.noalias() = W * X;
    for (int o = 0; o < layer.out_ch; ++o) Y.row(o).array() += layer.bias[o];
}

double effective_std(double s) { return s > 0.0 ? s : 1.0; }

}  // namespace

void conv2d_periodic(const ConvLayer& layer, const double* in, int n, double* out) {
    std::vector<double> scratch;
    conv_forward(layer, in, n, out, scratch);
}

std::vector<double> forward_normalized(const CnnModel& model, const double* input,
                                       ForwardCache* cache) {
    const int n = model.grid_n;
    const int plane = n * n;
    const int L = model.n_layers();
    if (cache) {
        cache->pre.assign(L, {});
        cache->post.assign(L, {});
    }
    std::vector<double> cur(input, input + static_cast<size_t>(model.layers[0].in_ch) * plane);
    std::vector<double> scratch;
    for (int l = 0; l < L; ++l) {
        const ConvLayer& layer = model.layers[l];
        std::vector<double> next(static_cast<size_t>(layer.out_ch) * plane);
        conv_forward(layer, cur.data(), n, next.data(), scratch);
        if (cache) cache->pre[l] = next;
        if (l < L - 1)
            for (double& v : next) v = v > 0.0 ? v : 0.0;
        if (cache) cache->post[l] = next;
        cur = std::move(next);
    }
    return cur;
}

std::vector<double> forward(const CnnModel& model, const double* input, ForwardCache* cache) {
    const int n = model.grid_n;
    const int plane = n * n;
    const int in_ch = model.layers.front().in_ch;
    const int out_ch = model.layers.back().out_ch;
    std::vector<double> normed(static_cast<size_t>(in_ch) * plane);
    for (int c = 0; c < in_ch; ++c) {
        const double mu = model.norm.in_mean[c];
        const double sd = effective_std(model.norm.in_std[c]);
        for (int p = 0; p < plane; ++p)
            normed[static_cast<size_t>(c) * plane + p] =
                (input[static_cast<size_t>(c) * plane + p] - mu) / sd;
    }
    for (double v : normed)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");
    std::vector<double> out = forward_normalized(model, normed.data(), cache);
    for (int c = 0; c < out_ch; ++c) {
        const double mu = model.norm.tgt_mean[c];
        const double sd = effective_std(model.norm.tgt_std[c]);
        for (int p = 0; p < plane; ++p)
            out[static_cast<size_t>(c) * plane + p] =
                out[static_cast<size_t>(c) * plane + p] * sd + mu;
    }
    return out;
}

std::vector<std::vector<double>> predict_batch(const CnnModel& model, const Dataset& ds,
                                               const std::vector<int>& indices) {
    std::vector<std::vector<double>> out;
    out.reserve(indices.size());
    for (int i : indices) out.push_back(forward(model, ds.input(i)));
    return out;
}

Grads Grads::zeros_like(const CnnModel& model) {
    Grads g;
    for (const auto& l : model.layers) {
        g.dW.emplace_back(l.weights.size(), 0.0);
        g.db.emplace_back(l.bias.size(), 0.0);
    }
    return g;
}

namespace {

void normalize_sample(const CnnModel& model, const double* input, const double* target,
                      std::vector<double>& x, std::vector<double>& t) {
    const int plane = model.grid_n * model.grid_n;
    const int in_ch = model.layers.front().in_ch;
    const int out_ch = model.layers.back().out_ch;
    x.resize(static_cast<size_t>(in_ch) * plane);
    t.resize(static_cast<size_t>(out_ch) * plane);
    for (int c = 0; c < in_ch; ++c) {
        const double mu = model.norm.in_mean[c], sd = effective_std(model.norm.in_std[c]);
        for (int p = 0; p < plane; ++p)
            x[static_cast<size_t>(c) * plane + p] =
                (input[static_cast<size_t>(c) * plane + p] - mu) / sd;
    }
    for (int c = 0; c < out_ch; ++c) {
        const double mu = model.norm.tgt_mean[c], sd = effective_std(model.norm.tgt_std[c]);
        for (int p = 0; p < plane; ++p)
            t[static_cast<size_t>(c) * plane + p] =
                (target[static_cast<size_t>(c) * plane + p] - mu) / sd;
    }
}

}  // namespace

Grads loss_and_gradients(const CnnModel& model, const Dataset& ds, const std::vector<int>& batch,
                         const std::vector<bool>& trainable) {
    if (batch.empty()) throw std::invalid_argument("loss_and_gradients: empty batch");
    const int n = model.grid_n;
    const int plane = n * n;
    const int L = model.n_layers();
    const int out_ch = model.layers.back().out_ch;

    auto is_trainable = [&](int l) { return trainable.empty() || trainable[l]; };
    int lowest_trainable = L;
    for (int l = 0; l < L; ++l)
        if (is_trainable(l)) {
            lowest_trainable = l;
            break;
        }

    Grads g = Grads::zeros_like(model);
    std::vector<double> x, t, scratch;
    const double inv_count = 1.0 / (static_cast<double>(batch.size()) * out_ch * plane);

    for (int idx : batch) {
        normalize_sample(model, ds.input(idx), ds.target(idx), x, t);
        ForwardCache cache;
        std::vector<double> y = forward_normalized(model, x.data(), &cache);

        std::vector<double> delta(y.size());  // dLoss/d(pre-activation of layer L-1)
        for (size_t i = 0; i < y.size(); ++i) {
            const double diff = y[i] - t[i];
            g.loss += diff * diff * inv_count;
            delta[i] = 2.0 * diff * inv_count;
        }

        for (int l = L - 1; l >= lowest_trainable; --l) {
            const ConvLayer& layer = model.layers[l];
            const double* g_in = (l == 0) ? x.data() : cache.post[l - 1].data();

            if (is_trainable(l)) {
                scratch.resize(static_cast<size_t>(layer.in_ch) * 25 * plane);
                im2col(g_in, layer.in_ch, n, scratch.data());
                CMapMat X(scratch.data(), layer.in_ch * 25, plane);
                CMapMat dY(delta.data(), layer.out_ch, plane);
                MapMat dW(g.dW[l].data(), layer.out_ch, layer.in_ch * 25);
                dW.noalias() += dY * X.transpose();
                // Fixed-order accumulation: Eigen's sum() groups SIMD lanes
                // by pointer alignment, which breaks bit reproducibility.
                for (int o = 0; o < layer.out_ch; ++o) {
                    double acc = 0.0;
                    const double* row = delta.data() + static_cast<size_t>(o) * plane;
                    for (int i = 0; i < plane; ++i) acc += row[i];
                    g.db[l][o] += acc;
                }
            }

            if (l > lowest_trainable) {
                // dX = W^T dY, scattered back to the input grid, then the
                // ReLU mask of the layer below.
                std::vector<double> dXcols(static_cast<size_t>(layer.in_ch) * 25 * plane);
                CMapMat W(layer.weights.data(), layer.out_ch, layer.in_ch * 25);
                CMapMat dY(delta.data(), layer.out_ch, plane);
                MapMat dX(dXcols.data(), layer.in_ch * 25, plane);
                dX.noalias() = W.transpose() * dY;
                std::vector<double> dIn(static_cast<size_t>(layer.in_ch) * plane, 0.0);
                col2im_add(dXcols.data(), layer.in_ch, n, dIn.data());
                const std::vector<double>& pre_below = cache.pre[l - 1];
                for (size_t i = 0; i < dIn.size(); ++i)
                    dIn[i] = pre_below[i] > 0.0 ? dIn[i] : 0.0;
                delta = std::move(dIn);
            }
        }
    }

    if (!std::isfinite(g.loss)) throw TrainingDivergedError(-1, "non-finite loss");
    return g;
}

AdamState AdamState::zeros_like(const CnnModel& model) {
    AdamState s;
    for (const auto& l : model.layers) {
        s.mW.emplace_back(l.weights.size(), 0.0);
        s.vW.emplace_back(l.weights.size(), 0.0);
        s.mb.emplace_back(l.bias.size(), 0.0);
        s.vb.emplace_back(l.bias.size(), 0.0);
    }
    return s;
}

void adam_step(CnnModel& model, const Grads& g, AdamState& st, double lr,
               const std::vector<bool>& trainable, const AdamConfig& ac) {
    st.t += 1;
    const double bc1 = 1.0 - std::pow(ac.beta1, static_cast<double>(st.t));
    const double bc2 = 1.0 - std::pow(ac.beta2, static_cast<double>(st.t));
    auto update = [&](std::vector<double>& p, const std::vector<double>& grad,
                      std::vector<double>& m, std::vector<double>& v) {
        for (size_t i = 0; i < p.size(); ++i) {
            m[i] = ac.beta1 * m[i] + (1.0 - ac.beta1) * grad[i];
            v[i] = ac.beta2 * v[i] + (1.0 - ac.beta2) * grad[i] * grad[i];
            p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + ac.eps);
        }
    };
    for (int l = 0; l < model.n_layers(); ++l) {
        if (!trainable.empty() && !trainable[l]) continue;
        update(model.layers[l].weights, g.dW[l], st.mW[l], st.vW[l]);
        update(model.layers[l].bias, g.db[l], st.mb[l], st.vb[l]);
    }
}

namespace {

double eval_loss(const CnnModel& model, const Dataset& ds, const std::vector<int>& indices) {
    const int plane = model.grid_n * model.grid_n;
    const int out_ch = model.layers.back().out_ch;
    std::vector<double> x, t;
    double acc = 0.0;
    for (int idx : indices) {
        normalize_sample(model, ds.input(idx), ds.target(idx), x, t);
        std::vector<double> y = forward_normalized(model, x.data());
        double s = 0.0;
        for (size_t i = 0; i < y.size(); ++i) {
            const double d = y[i] - t[i];
            s += d * d;
        }
        acc += s / (static_cast<double>(out_ch) * plane);
    }
    return acc / static_cast<double>(indices.size());
}

NormStats stats_from(const Dataset& ds) {
    ChannelStats in = ds.input_stats();
    ChannelStats tgt = ds.target_stats();
    return NormStats{in.mean, in.stddev, tgt.mean, tgt.stddev};
}

TrainResult train_loop(CnnModel model, const Dataset& ds, std::vector<int> pool,
                       const TrainConfig& cfg, const std::vector<bool>& trainable) {
    std::mt19937_64 rng(split_seed(cfg.seed, 1));
    rng_shuffle(rng, pool);
    int n_val = static_cast<int>(std::lround(pool.size() * cfg.val_fraction));
    n_val = std::min<int>(n_val, static_cast<int>(pool.size()) - 1);
    std::vector<int> val_idx(pool.end() - n_val, pool.end());
    std::vector<int> train_idx(pool.begin(), pool.end() - n_val);
    if (val_idx.empty()) val_idx = train_idx;  // tiny datasets validate on train data

    AdamState opt = AdamState::zeros_like(model);
    double lr = cfg.lr0;
    double best_val = std::numeric_limits<double>::infinity();
    double sched_best = best_val;
    int wait = 0;

    TrainResult result;
    result.model = model;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng_shuffle(rng, train_idx);
        double train_loss = 0.0;
        size_t seen = 0;
        try {
            for (size_t at = 0; at < train_idx.size(); at += cfg.batch_size) {
                const size_t end = std::min(at + cfg.batch_size, train_idx.size());
                std::vector<int> batch(train_idx.begin() + at, train_idx.begin() + end);
                Grads g = loss_and_gradients(model, ds, batch, trainable);
                adam_step(model, g, opt, lr, trainable, cfg.adam);
                train_loss += g.loss * batch.size();
                seen += batch.size();
            }
        } catch (const TrainingDivergedError&) {
            throw TrainingDivergedError(epoch, "training diverged");
        }
        train_loss /= static_cast<double>(seen);
        const double val_loss = eval_loss(model, ds, val_idx);
        if (!std::isfinite(val_loss)) throw TrainingDivergedError(epoch, "training diverged");
        result.log.push_back({epoch, train_loss, val_loss, lr});

        if (val_loss < best_val) {
            best_val = val_loss;
            result.model = model;
        }
        // Reduce-on-plateau with relative improvement threshold.
        if (val_loss < sched_best * (1.0 - cfg.plateau_threshold)) {
            sched_best = val_loss;
            wait = 0;
        } else if (++wait > cfg.plateau_patience) {
            lr = std::max(lr / cfg.plateau_factor, cfg.min_lr);
            wait = 0;
        }
    }
    result.best_val_loss = best_val;
    return result;
}

}  // namespace

TrainResult train_model(const Dataset& ds, const TrainConfig& cfg, int hidden_ch, int n_layers) {
    if (ds.n < 1) throw std::invalid_argument("train_model: empty dataset");
    CnnModel model = CnnModel::make(ds.nx_lo, 4, hidden_ch, 2, n_layers, split_seed(cfg.seed, 0));
    model.norm = stats_from(ds);
    std::vector<int> pool(ds.n);
    for (int i = 0; i < ds.n; ++i) pool[i] = i;
    return train_loop(std::move(model), ds, std::move(pool), cfg, {});
}

TrainResult transfer_learn(const CnnModel& base, const Dataset& target, const TLConfig& cfg) {
    if (cfg.trainable_layers.empty())
        throw std::invalid_argument("transfer_learn: trainable set must be non-empty");
    std::vector<bool> trainable(base.n_layers(), false);
    for (int l : cfg.trainable_layers) trainable.at(l) = true;
    if (std::all_of(trainable.begin(), trainable.end(), [](bool b) { return b; }))
        throw std::invalid_argument("transfer_learn: trainable set must be a strict subset");

    std::vector<int> pool(target.n);
    for (int i = 0; i < target.n; ++i) pool[i] = i;
    std::mt19937_64 rng(split_seed(cfg.train.seed, 2));
    rng_shuffle(rng, pool);
    const int n_keep = static_cast<int>(std::floor(target.n * cfg.data_fraction));
    pool.resize(n_keep);

    CnnModel model = base;
    if (cfg.refit_norm_stats && n_keep > 0) {
        Dataset sub;
        for (int i : pool) {
            SampleRecord r;
            r.nx_lo = target.nx_lo;
            r.inputs.assign(target.input(i), target.input(i) + 4 * target.nx_lo * target.nx_lo);
            r.targets.assign(target.target(i), target.target(i) + 2 * target.nx_lo * target.nx_lo);
            sub.append(r);
        }
        model.norm = stats_from(sub);
    }
    if (n_keep == 0) {
        TrainResult r;
        r.model = std::move(model);
        return r;
    }
    return train_loop(std::move(model), target, std::move(pool), cfg.train, trainable);
}

void save_model(const CnnModel& model, const std::string& path, const std::string& config_hash,
                const AdamState* opt) {
    TensorContainer c;
    c.config_hash = config_hash;
    c.add("arch", {3},
          {static_cast<double>(model.n_layers()), static_cast<double>(model.grid_n),
           static_cast<double>(model.kernel_size)});
    for (int l = 0; l < model.n_layers(); ++l) {
        const ConvLayer& layer = model.layers[l];
        const std::string p = "layer" + std::to_string(l);
        c.add(p + ".weight",
              {static_cast<uint64_t>(layer.out_ch), static_cast<uint64_t>(layer.in_ch), 5, 5},
              layer.weights);
        c.add(p + ".bias", {static_cast<uint64_t>(layer.out_ch)}, layer.bias);
    }
    c.add("norm.in_mean", {model.norm.in_mean.size()}, model.norm.in_mean);
    c.add("norm.in_std", {model.norm.in_std.size()}, model.norm.in_std);
    c.add("norm.tgt_mean", {model.norm.tgt_mean.size()}, model.norm.tgt_mean);
    c.add("norm.tgt_std", {model.norm.tgt_std.size()}, model.norm.tgt_std);
    if (opt) {
        c.add_scalar("opt.t", static_cast<double>(opt->t));
        for (int l = 0; l < model.n_layers(); ++l) {
            const std::string p = "opt.layer" + std::to_string(l);
            c.add(p + ".mW", {opt->mW[l].size()}, opt->mW[l]);
            c.add(p + ".vW", {opt->vW[l].size()}, opt->vW[l]);
            c.add(p + ".mb", {opt->mb[l].size()}, opt->mb[l]);
            c.add(p + ".vb", {opt->vb[l].size()}, opt->vb[l]);
        }
    }
    c.save(path);
}

CnnModel load_model(const std::string& path) {
    TensorContainer c = TensorContainer::load(path);
    const auto& arch = c.f64("arch");
    const int n_layers = static_cast<int>(arch[0]);
    CnnModel m;
    m.grid_n = static_cast<int>(arch[1]);
    m.kernel_size = static_cast<int>(arch[2]);
    for (int l = 0; l < n_layers; ++l) {
        const std::string p = "layer" + std::to_string(l);
        const auto& we = c.get(p + ".weight");
        ConvLayer layer;
        layer.out_ch = static_cast<int>(we.shape[0]);
        layer.in_ch = static_cast<int>(we.shape[1]);
        layer.ksize = static_cast<int>(we.shape[2]);
        layer.weights = we.f64;
        layer.bias = c.f64(p + ".bias");
        m.layers.push_back(std::move(layer));
    }
    m.norm.in_mean = c.f64("norm.in_mean");
    m.norm.in_std = c.f64("norm.in_std");
    m.norm.tgt_mean = c.f64("norm.tgt_mean");
    m.norm.tgt_std = c.f64("norm.tgt_std");
    return m;
}

void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : log)
        rows.push_back({std::to_string(e.epoch), format_double(e.train_loss),
                        format_double(e.val_loss), format_double(e.lr)});
    write_csv(path, {"epoch", "train_loss", "val_loss", "lr"}, rows);
}

}  // namespace qglab
