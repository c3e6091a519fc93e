#include "qglab/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qglab {

double rmse(const std::vector<std::vector<double>>& pred,
            const std::vector<std::vector<double>>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("rmse: mismatched or empty sample sets");
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        for (size_t j = 0; j < pred[i].size(); ++j) {
            const double d = pred[i][j] - truth[i][j];
            num += d * d;
            den += truth[i][j] * truth[i][j];
        }
    }
    if (den == 0.0) throw std::invalid_argument("rmse: zero-norm truth set");
    return std::sqrt(num / den);
}

double cc(const std::vector<std::vector<double>>& pred,
          const std::vector<std::vector<double>>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("cc: mismatched or empty sample sets");
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        const auto& p = pred[i];
        const auto& t = truth[i];
        const double n = static_cast<double>(p.size());
        double mp = 0.0, mt = 0.0;
        for (size_t j = 0; j < p.size(); ++j) {
            mp += p[j];
            mt += t[j];
        }
        mp /= n;
        mt /= n;
        double cov = 0.0, vp = 0.0, vt = 0.0;
        for (size_t j = 0; j < p.size(); ++j) {
            cov += (p[j] - mp) * (t[j] - mt);
            vp += (p[j] - mp) * (p[j] - mp);
            vt += (t[j] - mt) * (t[j] - mt);
        }
        if (vp == 0.0 || vt == 0.0) throw std::invalid_argument("cc: zero-variance field");
        acc += cov / std::sqrt(vp * vt);
    }
    return acc / static_cast<double>(pred.size());
}

double spectrum_rmse(const std::vector<RealField>& pred, const std::vector<RealField>& truth) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("spectrum_rmse: mismatched or empty sample sets");
    const int n = pred.front().nx;
    std::vector<double> sp(n / 2 + 1, 0.0), st(n / 2 + 1, 0.0);
    for (size_t i = 0; i < pred.size(); ++i) {
        SpectrumSeries a = meridional_avg_spectrum(pred[i]);
        SpectrumSeries b = meridional_avg_spectrum(truth[i]);
        for (int k = 0; k <= n / 2; ++k) {
            sp[k] += a.power[k];
            st[k] += b.power[k];
        }
    }
    double acc = 0.0;
    int used = 0;
    for (int k = 0; k <= n / 2; ++k) {
        if (st[k] == 0.0) continue;  // flagged and excluded
        acc += std::abs((sp[k] - st[k]) / st[k]);
        ++used;
    }
    if (used == 0) throw std::invalid_argument("spectrum_rmse: all truth bins are zero");
    return acc / static_cast<double>(used);
}

namespace {

// Splits a stacked 2-channel plane into per-layer single-channel vectors.
void split_channels(const double* data, int plane, std::vector<double>& m1,
                    std::vector<double>& m2) {
    m1.assign(data, data + plane);
    m2.assign(data + plane, data + 2 * plane);
}

}  // namespace

OfflineReport evaluate_offline(const CnnModel& model, const Dataset& ds,
                               const std::vector<int>& indices) {
    if (indices.empty()) throw std::invalid_argument("evaluate_offline: empty index set");
    const int n = ds.nx_lo;
    const int plane = n * n;
    std::vector<std::vector<double>> pred_m[2], true_m[2];
    std::vector<RealField> pred_f[2], true_f[2];

    for (int idx : indices) {
        std::vector<double> y = forward(model, ds.input(idx));
        std::vector<double> p1, p2, t1, t2;
        split_channels(y.data(), plane, p1, p2);
        split_channels(ds.target(idx), plane, t1, t2);
        pred_m[0].push_back(p1);
        pred_m[1].push_back(p2);
        true_m[0].push_back(t1);
        true_m[1].push_back(t2);
        for (int m = 0; m < 2; ++m) {
            RealField fp(n), ft(n);
            fp.data = (m == 0) ? p1 : p2;
            ft.data = (m == 0) ? t1 : t2;
            pred_f[m].push_back(std::move(fp));
            true_f[m].push_back(std::move(ft));
        }
    }

    OfflineReport rep;
    rep.n_samples = static_cast<int>(indices.size());
    for (int m = 0; m < 2; ++m) {
        rep.rmse_m[m] = rmse(pred_m[m], true_m[m]);
        rep.cc_m[m] = cc(pred_m[m], true_m[m]);
        rep.spectrum_rmse_m[m] = spectrum_rmse(pred_f[m], true_f[m]);
    }
    return rep;
}

std::array<SpectrumSeries, 2> ke_spectrum(const std::vector<SpectralState>& trajectory,
                                          const ModelParams& params, double discard_fraction) {
    if (trajectory.empty()) throw std::invalid_argument("ke_spectrum: empty trajectory");
    QgModel model(params.with_resolution(trajectory.front().nx()));
    const size_t first = static_cast<size_t>(trajectory.size() * discard_fraction);
    const int n = trajectory.front().nx();

    std::array<SpectrumSeries, 2> out;
    for (int m = 0; m < 2; ++m) {
        out[m].power.assign(n / 2 + 1, 0.0);
        out[m].flagged.assign(n / 2 + 1, 0);
        out[m].meta = "ke_layer" + std::to_string(m + 1);
    }
    size_t used = 0;
    for (size_t s = first; s < trajectory.size(); ++s) {
        DiagnosticFields d = model.diagnostics(trajectory[s]);
        for (int m = 0; m < 2; ++m) {
            SpectrumSeries su = meridional_avg_spectrum(d.u[m]);
            SpectrumSeries sv = meridional_avg_spectrum(d.v[m]);
            for (int k = 0; k <= n / 2; ++k)
                out[m].power[k] += 0.5 * (su.power[k] + sv.power[k]);
        }
        ++used;
    }
    for (int m = 0; m < 2; ++m)
        for (double& p : out[m].power) p /= static_cast<double>(used);
    return out;
}

PvPdf pv_pdf(const std::vector<SpectralState>& trajectory, const ModelParams& params, int n_bins,
             double range_lo, double range_hi, double discard_fraction) {
    if (n_bins < 2) throw std::invalid_argument("pv_pdf: n_bins must be >= 2");
    if (!(range_hi > range_lo)) throw std::invalid_argument("pv_pdf: empty range");
    if (trajectory.empty()) throw std::invalid_argument("pv_pdf: empty trajectory");

    const int n = trajectory.front().nx();
    Fft2D fft(n);
    const size_t first = static_cast<size_t>(trajectory.size() * discard_fraction);

    PvPdf pdf;
    const double width = (range_hi - range_lo) / n_bins;
    pdf.edges.resize(n_bins + 1);
    for (int b = 0; b <= n_bins; ++b) pdf.edges[b] = range_lo + b * width;
    std::vector<long> counts(n_bins, 0);
    long total = 0;
    for (size_t s = first; s < trajectory.size(); ++s) {
        RealField q1 = fft.inverse(trajectory[s].q_hat[0]);
        for (double v : q1.data) {
            int b = static_cast<int>(std::floor((v - range_lo) / width));
            b = std::clamp(b, 0, n_bins - 1);
            counts[b]++;
            ++total;
        }
    }
    pdf.densities.resize(n_bins);
    for (int b = 0; b < n_bins; ++b)
        pdf.densities[b] = static_cast<double>(counts[b]) / (static_cast<double>(total) * width);
    (void)params;
    return pdf;
}

OnlineRunResult run_online(const CnnModel* model, const ModelParams& params_lo,
                           const SpectralState& ic, long n_steps, long snapshot_interval,
                           double discard_fraction, int pdf_bins) {
    QgModel sim(params_lo);
    const int n = params_lo.nx;
    const Fft2D& fft = sim.fft();

    if (model) {
        if (model->grid_n != n)
            throw std::invalid_argument("run_online: model grid does not match params");
        sim.set_forcing([&sim, model, n, &fft](const SpectralState& s,
                                               std::array<SpectralField, 2>& tend) {
            DiagnosticFields d = sim.diagnostics(s);
            const int plane = n * n;
            std::vector<double> input(static_cast<size_t>(4) * plane);
            for (int m = 0; m < 2; ++m) {
                std::copy(d.u[m].data.begin(), d.u[m].data.end(),
                          input.begin() + static_cast<size_t>(2 * m) * plane);
                std::copy(d.v[m].data.begin(), d.v[m].data.end(),
                          input.begin() + static_cast<size_t>(2 * m + 1) * plane);
            }
            std::vector<double> pi = forward(*model, input.data());
            // Only the energy-draining part of the prediction is applied
            // (per-mode backscatter clipping): spectral components doing
            // positive work on the flow are dropped. Without this the
            // closure-flow feedback loop is unconditionally unstable.
            std::array<SpectralField, 2> psi = sim.invert_pv(s);
            for (int m = 0; m < 2; ++m) {
                RealField f(n);
                std::copy(pi.begin() + static_cast<size_t>(m) * plane,
                          pi.begin() + static_cast<size_t>(m + 1) * plane, f.data.begin());
                SpectralField pi_hat = fft.forward(f);
                for (size_t i = 0; i < pi_hat.size(); ++i) {
                    const double work = -(std::conj(psi[m].data[i]) * pi_hat.data[i]).real();
                    if (work > 0.0) continue;
                    tend[m].data[i] += pi_hat.data[i];
                }
            }
        });
    }

    OnlineRunResult res;
    SpectralState s = ic;
    res.trajectory.push_back(s);
    try {
        for (long k = 1; k <= n_steps; ++k) {
            sim.step(s);
            if (k % snapshot_interval == 0 || k == n_steps) res.trajectory.push_back(s);
        }
        res.report.n_steps = n_steps;
    } catch (const DivergedError& e) {
        res.report.stable = false;
        res.report.divergence_step = e.step_index;
        res.report.n_steps = e.step_index;
    }

    if (res.trajectory.size() > 1 && res.report.stable) {
        res.report.ke_spectra = ke_spectrum(res.trajectory, params_lo, discard_fraction);
        // PDF range: +-5 standard deviations of the pooled q1 samples.
        Fft2D fft_lo(n);
        double mean = 0.0, ms = 0.0;
        long cnt = 0;
        const size_t first = static_cast<size_t>(res.trajectory.size() * discard_fraction);
        for (size_t t = first; t < res.trajectory.size(); ++t) {
            RealField q1 = fft_lo.inverse(res.trajectory[t].q_hat[0]);
            for (double v : q1.data) {
                mean += v;
                ms += v * v;
                ++cnt;
            }
        }
        mean /= cnt;
        const double sd = std::sqrt(std::max(0.0, ms / cnt - mean * mean));
        const double span = sd > 0.0 ? 5.0 * sd : 1.0;
        res.report.q1_pdf =
            pv_pdf(res.trajectory, params_lo, pdf_bins, mean - span, mean + span, discard_fraction);
    }
    return res;
}

}  // namespace qglab
