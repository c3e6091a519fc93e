#pragma once

#include "qglab/cnn.hpp"
#include "qglab/solver.hpp"
#include "qglab/specanalysis.hpp"

#include <string>
#include <vector>

namespace qglab {

// Relative RMSE: sqrt(mean ||pred - true||^2 / mean ||true||^2).
double rmse(const std::vector<std::vector<double>>& pred,
            const std::vector<std::vector<double>>& truth);

// Pearson correlation with domain-mean removal, averaged over samples.
double cc(const std::vector<std::vector<double>>& pred,
          const std::vector<std::vector<double>>& truth);

// Mean absolute relative error between sample-averaged meridional spectra;
// zero truth bins are excluded (counted in the report).
double spectrum_rmse(const std::vector<RealField>& pred, const std::vector<RealField>& truth);

struct OfflineReport {
    double rmse_m[2], cc_m[2], spectrum_rmse_m[2];
    int n_samples = 0;
    std::string model_id, dataset_id;
};

OfflineReport evaluate_offline(const CnnModel& model, const Dataset& ds,
                               const std::vector<int>& indices);

struct PvPdf {
    std::vector<double> edges;      // n_bins + 1
    std::vector<double> densities;  // n_bins, integrates to 1
};

struct OnlineReport {
    std::array<SpectrumSeries, 2> ke_spectra;
    PvPdf q1_pdf;
    long n_steps = 0;
    bool stable = true;
    long divergence_step = -1;
};

struct OnlineRunResult {
    OnlineReport report;
    std::vector<SpectralState> trajectory;
};

// Coupled low-resolution run: each step predicts the subgrid forcing from
// the current velocities and adds its transform to the tendency before the
// ssd stage. model == nullptr runs the bare solver (bit-identical to an
// uncoupled run). Divergence sets the stability flag instead of throwing.
OnlineRunResult run_online(const CnnModel* model, const ModelParams& params_lo,
                           const SpectralState& ic, long n_steps, long snapshot_interval = 10,
                           double discard_fraction = 0.1, int pdf_bins = 101);

// Meridionally averaged spectrum of 0.5 (u^2 + v^2) per layer, time-averaged
// over snapshots after the discard window.
std::array<SpectrumSeries, 2> ke_spectrum(const std::vector<SpectralState>& trajectory,
                                          const ModelParams& params,
                                          double discard_fraction = 0.1);

PvPdf pv_pdf(const std::vector<SpectralState>& trajectory, const ModelParams& params, int n_bins,
             double range_lo, double range_hi, double discard_fraction = 0.1);

}  // namespace qglab
