#pragma once

#include "qglab/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace qglab {

struct CoarsenSpec {
    int factor_K = 4;
    int nx_hi = 0;
    int nx_lo = 0;
    double dx_lo = 0.0;  // m

    static CoarsenSpec make(int nx_hi, int K, double L);
    void validate() const;
};

// Spectral truncation to the lowest 1/K of modes per dimension. Coefficients
// are rescaled so a constant field maps to the same constant; the coarse
// Nyquist row/column collects both aliasing source modes to keep real fields
// real.
SpectralField coarse_grain(const SpectralField& f, const CoarsenSpec& spec);

// Multiplies each coefficient by exp(-kappa^2 (2 dx_lo)^2 / 24); the filter
// width is twice the coarse grid spacing.
void gaussian_filter(SpectralField& f, double L, double dx_lo);
double gaussian_gain(double kappa, double dx_lo);

SpectralField filter_and_coarsen(const SpectralField& f, const CoarsenSpec& spec, double L);

// One training pair.
struct SampleRecord {
    int nx_lo = 0;
    std::vector<double> inputs;   // 4 x nx_lo x nx_lo: u1, v1, u2, v2 (m/s)
    std::vector<double> targets;  // 2 x nx_lo x nx_lo: Pi_q1, Pi_q2 (1/s^2)
    std::string source_case;
    uint64_t seed = 0;
    double snapshot_time = 0.0;
};

// Subgrid forcing by tendency differencing between a high- and a
// low-resolution model sharing the same physics.
class SubgridExtractor {
  public:
    // with_gaussian=false drops the Gaussian stage (identity filter),
    // leaving pure spectral truncation.
    SubgridExtractor(const ModelParams& params_hi, int coarse_factor, bool with_gaussian = true);

    const CoarsenSpec& spec() const { return spec_; }
    const QgModel& model_hi() const { return hi_; }
    const QgModel& model_lo() const { return lo_; }

    // Pi_q = filter_and_coarsen(T_hi(q)) - T_lo(filter_and_coarsen(q)),
    // where T is the effective one-step tendency including the ssd filter
    // stage as (F_c - 1)/dt on the post-RHS state.
    std::array<SpectralField, 2> forcing(const SpectralState& q_hi) const;

    // Effective per-step tendency of a model: (F (q + dt RHS(q)) - q)/dt.
    std::array<SpectralField, 2> effective_tendency(const QgModel& model,
                                                    const SpectralState& s) const;

    // Filtered/coarsened velocities plus physical-space forcing targets.
    SampleRecord sample(const SpectralState& q_hi) const;

  private:
    SpectralField fc(const SpectralField& f) const;  // coarsen + optional Gaussian

    CoarsenSpec spec_;
    bool gaussian_;
    QgModel hi_;
    QgModel lo_;
    Fft2D fft_lo_;
};

struct ChannelStats {
    std::vector<double> mean, stddev;  // per channel
};

struct Dataset {
    int nx_lo = 0;
    int n = 0;
    std::vector<double> inputs;   // n x 4 x nx x nx
    std::vector<double> targets;  // n x 2 x nx x nx
    std::vector<uint64_t> seeds;
    std::vector<double> times;
    std::string source_case;
    std::string config_hash;
    bool diverged = false;  // true when generation aborted early
    long divergence_step = -1;

    void append(const SampleRecord& r);
    ChannelStats input_stats() const;
    ChannelStats target_stats() const;

    const double* input(int i) const { return inputs.data() + static_cast<size_t>(i) * 4 * nx_lo * nx_lo; }
    const double* target(int i) const { return targets.data() + static_cast<size_t>(i) * 2 * nx_lo * nx_lo; }
};

struct DatasetGenConfig {
    ModelParams params_hi;
    int coarse_factor = 4;
    long spinup_steps = 17520;  // 2 simulated years at dt = 1 h
    long sample_stride = 100;
    double ic_amplitude = 1e-7;
    uint64_t seed = 0;
    std::string config_hash;
};

// Runs a high-resolution simulation past spin-up and samples at a fixed
// stride; deterministic in seed. On divergence returns the partial dataset
// with the diverged flag set.
Dataset generate_dataset(const DatasetGenConfig& cfg, int n_samples);

// Tensor-container round trip for datasets.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace qglab
