#pragma once

#include "qglab/fft.hpp"
#include "qglab/params.hpp"

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace qglab {

struct SpectralState {
    std::array<SpectralField, 2> q_hat;  // layers 1, 2
    double time = 0.0;
    long step_index = 0;

    explicit SpectralState(int nx = 0) : q_hat{SpectralField(nx), SpectralField(nx)} {}
    int nx() const { return q_hat[0].nx; }
};

struct DiagnosticFields {
    std::array<SpectralField, 2> psi_hat;
    std::array<RealField, 2> u, v;  // physical space (m/s)
};

class DivergedError : public std::runtime_error {
  public:
    DivergedError(long step, const std::string& what)
        : std::runtime_error(what + " at step " + std::to_string(step)), step_index(step) {}
    long step_index;
};

// Exponential scale-selective filter gain. kappa_star is the
// nondimensional radial wavenumber (Nyquist at pi), cut-off 0.65*pi.
double ssd_gain(double kappa_star);

// Pseudo-spectral two-layer QG model. One instance owns its FFT plans and
// Adams-Bashforth tendency history; use one instance per trajectory.
class QgModel {
  public:
    using ForcingFn =
        std::function<void(const SpectralState&, std::array<SpectralField, 2>&)>;

    explicit QgModel(const ModelParams& params);

    const ModelParams& params() const { return params_; }
    const Fft2D& fft() const { return fft_; }

    // Zonal/meridional wavenumbers (rad/m) for derivative operators;
    // the unpaired Nyquist mode is zeroed to keep real fields real.
    double kx(int i) const { return kd_[i]; }
    double ky(int j) const { return kd_[j]; }
    // Squared radial wavenumber including the Nyquist mode.
    double kappa2(int j, int i) const { return kf_[i] * kf_[i] + kf_[j] * kf_[j]; }

    // Solves (M - kappa^2 I) psi_hat = q_hat per mode; kappa=0 mode is zero.
    std::array<SpectralField, 2> invert_pv(const SpectralState& s) const;

    // Pseudo-spectral Jacobian in flux form: transform u, v, q to physical
    // space, form u*q and v*q, transform back, take the divergence.
    SpectralField jacobian_hat(const SpectralField& psi_hat, const SpectralField& q_hat) const;

    DiagnosticFields diagnostics(const SpectralState& s) const;

    // Full spectral RHS (advection, beta, mean flow, bottom drag) without
    // the ssd stage; the ssd filter is applied by step() as a multiplier.
    std::array<SpectralField, 2> tendency(const SpectralState& s) const;

    // Multiplies every coefficient by ssd_gain(kappa * dx).
    void apply_ssd(SpectralState& s) const;
    double ssd_gain_at(int j, int i) const { return ssd_[static_cast<size_t>(j) * params_.nx + i]; }

    // One AB3 step (forward Euler first, AB2 second) followed by the ssd
    // filter stage. Throws DivergedError on non-finite coefficients.
    void step(SpectralState& s);

    void reset_history();
    // Installs tendencies at t-dt and t-2dt so the next step is full AB3.
    void prime_history(std::array<SpectralField, 2> t_minus_1,
                       std::array<SpectralField, 2> t_minus_2);

    // Additive spectral tendency hook (closure coupling). Called with the
    // current state; must add into the tendency arrays.
    void set_forcing(ForcingFn fn) { forcing_ = std::move(fn); }

    std::vector<SpectralState> run(const SpectralState& ic, long n_steps,
                                   long snapshot_interval);

  private:
    ModelParams params_;
    Fft2D fft_;
    std::vector<double> kd_;   // derivative wavenumbers, Nyquist zeroed
    std::vector<double> kf_;   // full wavenumbers
    std::vector<double> ssd_;  // per-mode filter gains
    ForcingFn forcing_;

    int n_hist_ = 0;
    std::array<std::array<SpectralField, 2>, 2> hist_;  // [0]=t-dt, [1]=t-2dt
};

// Band-limited, zero-mean, Hermitian random PV perturbation with the given
// physical-space rms amplitude; deterministic in seed.
SpectralState random_initial_condition(uint64_t seed, const ModelParams& params,
                                       double amplitude);

}  // namespace qglab
