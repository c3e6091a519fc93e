#pragma once

#include "qglab/filtering.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace qglab {

struct ConvLayer {
    int in_ch = 0, out_ch = 0, ksize = 5;
    std::vector<double> weights;  // out_ch x in_ch x k x k, row-major
    std::vector<double> bias;     // one scalar per output channel

    double& w(int o, int c, int ky, int kx) {
        return weights[((static_cast<size_t>(o) * in_ch + c) * ksize + ky) * ksize + kx];
    }
    double w(int o, int c, int ky, int kx) const {
        return weights[((static_cast<size_t>(o) * in_ch + c) * ksize + ky) * ksize + kx];
    }
};

struct NormStats {
    std::vector<double> in_mean, in_std;    // 4 input channels
    std::vector<double> tgt_mean, tgt_std;  // 2 target channels
};

// 9 convolution layers: ReLU on layers 1..8, linear output layer.
struct CnnModel {
    std::vector<ConvLayer> layers;
    NormStats norm;
    int grid_n = 0;
    int kernel_size = 5;

    // Kaiming-style fan-in scaled uniform init, zero biases; deterministic.
    static CnnModel make(int grid_n, int in_ch, int hidden_ch, int out_ch, int n_layers,
                         uint64_t seed);

    int n_layers() const { return static_cast<int>(layers.size()); }
    size_t param_count() const;
    bool finite() const;
};

// Circular 5x5 cross-correlation; output grid equals input grid.
// in: layer.in_ch planes of n*n, out: layer.out_ch planes of n*n.
void conv2d_periodic(const ConvLayer& layer, const double* in, int n, double* out);

struct ForwardCache {
    std::vector<std::vector<double>> pre;   // linear activations h_l
    std::vector<std::vector<double>> post;  // g_l after the nonlinearity
};

// Normalized-space forward pass: input and output both standardized.
std::vector<double> forward_normalized(const CnnModel& model, const double* input,
                                       ForwardCache* cache = nullptr);

// Physical-unit forward pass: normalizes the 4-channel input, de-normalizes
// the 2-channel output. Captured activations (if requested) stay normalized.
std::vector<double> forward(const CnnModel& model, const double* input,
                            ForwardCache* cache = nullptr);

std::vector<std::vector<double>> predict_batch(const CnnModel& model, const Dataset& ds,
                                               const std::vector<int>& indices);

struct Grads {
    std::vector<std::vector<double>> dW, db;
    double loss = 0.0;

    static Grads zeros_like(const CnnModel& model);
};

// Batch-mean MSE in normalized target space plus exact reverse-mode
// gradients. ReLU subgradient at 0 is taken as 0. trainable: per-layer mask
// (empty = all trainable); frozen layers get zero gradients and skip the
// weight-gradient GEMM.
Grads loss_and_gradients(const CnnModel& model, const Dataset& ds,
                         const std::vector<int>& batch,
                         const std::vector<bool>& trainable = {});

struct AdamState {
    long t = 0;
    std::vector<std::vector<double>> mW, vW, mb, vb;

    static AdamState zeros_like(const CnnModel& model);
};

struct AdamConfig {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
};

void adam_step(CnnModel& model, const Grads& g, AdamState& st, double lr,
               const std::vector<bool>& trainable = {}, const AdamConfig& ac = {});

struct TrainConfig {
    double lr0 = 1e-3;
    int batch_size = 8;
    int epochs = 100;
    double plateau_factor = 10.0;  // lr divided by this on plateau
    int plateau_patience = 5;
    double plateau_threshold = 1e-4;  // relative improvement threshold
    double val_fraction = 0.1;
    uint64_t seed = 0;
    AdamConfig adam;
    double min_lr = 1e-8;
};

struct TLConfig {
    std::vector<int> trainable_layers = {1};  // 0-based; layer 1 is the first hidden layer
    double data_fraction = 0.1;
    bool refit_norm_stats = false;  // default: reuse base statistics
    TrainConfig train;
};

struct TrainLogEntry {
    int epoch;
    double train_loss, val_loss, lr;
};

struct TrainResult {
    CnnModel model;  // best-validation-loss checkpoint
    std::vector<TrainLogEntry> log;
    double best_val_loss = 0.0;
};

class TrainingDivergedError : public std::runtime_error {
  public:
    TrainingDivergedError(int epoch, const std::string& what)
        : std::runtime_error(what + " at epoch " + std::to_string(epoch)), epoch(epoch) {}
    int epoch;
};

// Trains from scratch: seeded 90/10 split, seeded shuffling, Adam with
// reduce-on-plateau, returns the best-validation checkpoint.
TrainResult train_model(const Dataset& ds, const TrainConfig& cfg, int hidden_ch,
                        int n_layers = 9);

// Re-trains only the designated layers on a seeded subsample of the target
// dataset; all other parameters stay bit-identical to base.
TrainResult transfer_learn(const CnnModel& base, const Dataset& target, const TLConfig& cfg);

// Checkpoint I/O (tensor container with arch metadata, norm stats and
// optionally the optimizer state).
void save_model(const CnnModel& model, const std::string& path,
                const std::string& config_hash, const AdamState* opt = nullptr);
CnnModel load_model(const std::string& path);

void save_train_log(const std::vector<TrainLogEntry>& log, const std::string& path);

}  // namespace qglab
