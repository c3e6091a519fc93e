#include "qglab/solver.hpp"

#include "qglab/rng.hpp"

#include <cmath>

namespace qglab {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kCutoff = 0.65 * kPi;
constexpr double kFilterCoef = 23.6;
}  // namespace

double ssd_gain(double kappa_star) {
    if (kappa_star < 0.0) throw std::invalid_argument("ssd_gain: negative wavenumber");
    if (kappa_star < kCutoff) return 1.0;
    const double d = kappa_star - kCutoff;
    return std::exp(-kFilterCoef * d * d * d * d);
}

QgModel::QgModel(const ModelParams& params) : params_(params), fft_(params.nx) {
    params_.validate();
    const int n = params_.nx;
    const double two_pi_over_L = 2.0 * kPi / params_.L;
    kd_.resize(n);
    kf_.resize(n);
    for (int i = 0; i < n; ++i) {
        kf_[i] = two_pi_over_L * wave_index(i, n);
        kd_[i] = (i == n / 2) ? 0.0 : kf_[i];
    }
    ssd_.resize(static_cast<size_t>(n) * n);
    const double dx = params_.dx();
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            ssd_[static_cast<size_t>(j) * n + i] = ssd_gain(std::sqrt(kappa2(j, i)) * dx);
}

std::array<SpectralField, 2> QgModel::invert_pv(const SpectralState& s) const {
    const int n = params_.nx;
    const double F1 = params_.stretching(1);
    const double F2 = params_.stretching(2);
    std::array<SpectralField, 2> psi{SpectralField(n), SpectralField(n)};
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double k2 = kappa2(j, i);
            if (k2 == 0.0) continue;  // gauge: zero-mean streamfunction
            // (M - k^2 I) = [[-F1-k^2, F1], [F2, -F2-k^2]]
            const double a = -F1 - k2, b = F1, c = F2, d = -F2 - k2;
            const double det = a * d - b * c;  // = k^2 (k^2 + F1 + F2) > 0
            if (det == 0.0)
                throw std::runtime_error("invert_pv: singular stretching matrix at nonzero mode");
            const cplx q1 = s.q_hat[0].at(j, i), q2 = s.q_hat[1].at(j, i);
            psi[0].at(j, i) = (d * q1 - b * q2) / det;
            psi[1].at(j, i) = (a * q2 - c * q1) / det;
        }
    }
    return psi;
}

DiagnosticFields QgModel::diagnostics(const SpectralState& s) const {
    DiagnosticFields out;
    out.psi_hat = invert_pv(s);
    const int n = params_.nx;
    for (int m = 0; m < 2; ++m) {
        SpectralField u_hat(n), v_hat(n);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const cplx p = out.psi_hat[m].at(j, i);
                u_hat.at(j, i) = cplx{0.0, -ky(j)} * p;
                v_hat.at(j, i) = cplx{0.0, kx(i)} * p;
            }
        }
        out.u[m] = fft_.inverse(u_hat);
        out.v[m] = fft_.inverse(v_hat);
    }
    return out;
}

SpectralField QgModel::jacobian_hat(const SpectralField& psi_hat,
                                    const SpectralField& q_hat) const {
    const int n = params_.nx;
    SpectralField u_hat(n), v_hat(n);
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const cplx p = psi_hat.at(j, i);
            u_hat.at(j, i) = cplx{0.0, -ky(j)} * p;
            v_hat.at(j, i) = cplx{0.0, kx(i)} * p;
        }
    }
    RealField u = fft_.inverse(u_hat);
    RealField v = fft_.inverse(v_hat);
    RealField q = fft_.inverse(q_hat);
    RealField uq(n), vq(n);
    for (size_t idx = 0; idx < q.size(); ++idx) {
        uq.data[idx] = u.data[idx] * q.data[idx];
        vq.data[idx] = v.data[idx] * q.data[idx];
    }
    SpectralField uq_hat = fft_.forward(uq);
    SpectralField vq_hat = fft_.forward(vq);
    SpectralField jac(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            jac.at(j, i) =
                cplx{0.0, kx(i)} * uq_hat.at(j, i) + cplx{0.0, ky(j)} * vq_hat.at(j, i);
    return jac;
}

std::array<SpectralField, 2> QgModel::tendency(const SpectralState& s) const {
    const int n = params_.nx;
    if (!is_finite(s.q_hat[0]) || !is_finite(s.q_hat[1]))
        throw DivergedError(s.step_index, "non-finite state");

    const auto psi = invert_pv(s);
    std::array<SpectralField, 2> out{SpectralField(n), SpectralField(n)};

    for (int m = 0; m < 2; ++m) {
        SpectralField jac =
            params_.linear_only ? SpectralField(n) : jacobian_hat(psi[m], s.q_hat[m]);

        const double bm = params_.beta_m(m + 1);
        const double Um = params_.mean_u(m + 1);
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                cplx t = -jac.at(j, i);
                t -= cplx{0.0, kx(i)} * (bm * psi[m].at(j, i) + Um * s.q_hat[m].at(j, i));
                if (m == 1) t += params_.r_ek * kappa2(j, i) * psi[1].at(j, i);
                out[m].at(j, i) = t;
            }
        }
    }

    if (forcing_) forcing_(s, out);

    if (!is_finite(out[0]) || !is_finite(out[1]))
        throw DivergedError(s.step_index, "non-finite tendency");
    return out;
}

void QgModel::apply_ssd(SpectralState& s) const {
    for (int m = 0; m < 2; ++m)
        for (size_t idx = 0; idx < s.q_hat[m].size(); ++idx)
            s.q_hat[m].data[idx] *= ssd_[idx];
}

void QgModel::reset_history() { n_hist_ = 0; }

void QgModel::prime_history(std::array<SpectralField, 2> t_minus_1,
                            std::array<SpectralField, 2> t_minus_2) {
    hist_[0] = std::move(t_minus_1);
    hist_[1] = std::move(t_minus_2);
    n_hist_ = 2;
}

void QgModel::step(SpectralState& s) {
    auto tn = tendency(s);
    const double dt = params_.dt;

    for (int m = 0; m < 2; ++m) {
        SpectralField& q = s.q_hat[m];
        if (n_hist_ == 0) {
            for (size_t i = 0; i < q.size(); ++i) q.data[i] += dt * tn[m].data[i];
        } else if (n_hist_ == 1) {
            for (size_t i = 0; i < q.size(); ++i)
                q.data[i] += dt * (1.5 * tn[m].data[i] - 0.5 * hist_[0][m].data[i]);
        } else {
            for (size_t i = 0; i < q.size(); ++i)
                q.data[i] += dt / 12.0 *
                             (23.0 * tn[m].data[i] - 16.0 * hist_[0][m].data[i] +
                              5.0 * hist_[1][m].data[i]);
        }
    }

    hist_[1] = std::move(hist_[0]);
    hist_[0] = std::move(tn);
    if (n_hist_ < 2) ++n_hist_;

    apply_ssd(s);
    s.time += dt;
    s.step_index += 1;

    if (!is_finite(s.q_hat[0]) || !is_finite(s.q_hat[1]))
        throw DivergedError(s.step_index, "state diverged");
}

std::vector<SpectralState> QgModel::run(const SpectralState& ic, long n_steps,
                                        long snapshot_interval) {
    if (snapshot_interval < 1) throw std::invalid_argument("snapshot_interval must be >= 1");
    reset_history();
    std::vector<SpectralState> snaps;
    SpectralState s = ic;
    snaps.push_back(s);
    for (long k = 1; k <= n_steps; ++k) {
        step(s);
        if (k % snapshot_interval == 0 || k == n_steps) snaps.push_back(s);
    }
    return snaps;
}

SpectralState random_initial_condition(uint64_t seed, const ModelParams& params,
                                       double amplitude) {
    if (!(amplitude > 0.0)) throw std::invalid_argument("amplitude must be positive");
    const int n = params.nx;
    std::mt19937_64 rng(seed);
    SpectralState s(n);
    const int band = std::max(1, n / 8);
    for (int m = 0; m < 2; ++m) {
        for (int j = 0; j < n; ++j) {
            const int kj = wave_index(j, n);
            for (int i = 0; i < n; ++i) {
                const int ki = wave_index(i, n);
                if (ki == 0 && kj == 0) continue;
                if (std::abs(ki) > band || std::abs(kj) > band) continue;
                s.q_hat[m].at(j, i) = cplx{rng_normal(rng), rng_normal(rng)};
            }
        }
        enforce_real_symmetry(s.q_hat[m]);
    }
    // Rescale so the physical rms of layer 1 equals `amplitude`.
    Fft2D fft(n);
    RealField q1 = fft.inverse(s.q_hat[0]);
    double ms = 0.0;
    for (double v : q1.data) ms += v * v;
    const double rms = std::sqrt(ms / q1.size());
    const double scale = amplitude / rms;
    for (int m = 0; m < 2; ++m)
        for (auto& c : s.q_hat[m].data) c *= scale;
    return s;
}

}  // namespace qglab
