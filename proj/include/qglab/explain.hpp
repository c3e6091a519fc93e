#pragma once

#include "qglab/specanalysis.hpp"

#include <cstdint>
#include <vector>

namespace qglab {

struct ClusterResult {
    std::vector<std::vector<double>> centers;  // k mean magnitude maps
    std::vector<int> assignments;              // cluster index per kernel
    double inertia = 0.0;
    int k = 0;
    uint64_t seed = 0;
    int iterations = 0;
};

// Lloyd iterations with k-means++ seeding on flattened magnitude maps.
// Empty clusters are re-seeded from the farthest point. Deterministic in
// (inputs, k, seed).
ClusterResult cluster_kernel_spectra(const std::vector<std::vector<double>>& spectra, int k,
                                     uint64_t seed, int max_iter = 300);

// Padded spectra of every kernel in a layer (0-based), normalized to unit
// max per kernel unless raw_magnitude.
std::vector<std::vector<double>> layer_kernel_spectra(const CnnModel& model, int layer,
                                                      bool raw_magnitude = false);

struct MaximaRecord {
    int in_channel = 0, out_channel = 0;
    int k_x = 0, k_y = 0;  // signed integer wavenumbers
    double amplitude = 0.0;
    double kappa = 0.0;  // sqrt(k_x^2 + k_y^2)
};

// Argmax of |padded kernel spectrum| per kernel; ties break to the lowest
// radial wavenumber, then lexicographic (k_x, k_y).
std::vector<MaximaRecord> kernel_maxima(const CnnModel& model, int layer);

struct HistogramBin {
    int k_x, k_y;
    long count;
};

std::vector<HistogramBin> maxima_histogram(const std::vector<MaximaRecord>& records);

struct MaximaShift {
    int in_channel, out_channel;
    int kx_before, ky_before, kx_after, ky_after;
    double kappa_before, kappa_after;
};

struct CompareResult {
    std::vector<MaximaRecord> unchanged;  // base records whose location is stable
    double mean_amplitude_ratio = 0.0;    // mean(amp_after / amp_before) over unchanged
    std::vector<MaximaShift> shifted;
};

CompareResult compare_maxima(const std::vector<MaximaRecord>& base,
                             const std::vector<MaximaRecord>& tl);

}  // namespace qglab
