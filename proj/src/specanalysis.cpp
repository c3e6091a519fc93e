#include "qglab/specanalysis.hpp"

#include "qglab/container.hpp"

#include <fftw3.h>

#include <cmath>
#include <stdexcept>

namespace qglab {

double SpectrumSeries::total_power() const {
    double s = 0.0;
    for (double p : power) s += p;
    return s;
}

SpectralField fft2(const RealField& f) {
    Fft2D fft(f.nx);
    return fft.forward(f);
}

RealField ifft2(const SpectralField& f) {
    Fft2D fft(f.nx);
    return fft.inverse(f);
}

RealField pad_kernel(const double* w, int k, int N) {
    if (N < k) throw std::invalid_argument("pad_kernel: N must be >= kernel size");
    RealField out(N);
    const int c = k / 2;
    // Cross-correlation with center c maps kernel entry (a, b) to grid
    // position ((c - a) mod N, (c - b) mod N); this flip makes the
    // convolution-theorem identity exact.
    for (int a = 0; a < k; ++a)
        for (int b = 0; b < k; ++b)
            out.at(((c - a) % N + N) % N, ((c - b) % N + N) % N) = w[a * k + b];
    return out;
}

std::vector<double> kernel_spectrum_magnitude(const double* w, int k, int N) {
    SpectralField s = fft2(pad_kernel(w, k, N));
    std::vector<double> mag(s.size());
    for (size_t i = 0; i < s.size(); ++i) mag[i] = std::abs(s.data[i]);
    return mag;
}

SpectrumSeries meridional_avg_spectrum(const RealField& f) {
    const int n = f.nx;
    // All rows in one batched 1-D transform.
    std::vector<cplx> in(f.size()), out(f.size());
    for (size_t i = 0; i < f.size(); ++i) in[i] = cplx{f.data[i], 0.0};
    fftw_plan plan = fftw_plan_many_dft(
        1, &n, n, reinterpret_cast<fftw_complex*>(in.data()), nullptr, 1, n,
        reinterpret_cast<fftw_complex*>(out.data()), nullptr, 1, n, FFTW_FORWARD,
        FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_execute(plan);
    fftw_destroy_plan(plan);

    SpectrumSeries s;
    s.power.assign(n / 2 + 1, 0.0);
    // |row FFT|^2 / n^2 per row, averaged over the n rows.
    const double norm = 1.0 / (static_cast<double>(n) * n * n);
    for (int row = 0; row < n; ++row) {
        const cplx* r = out.data() + static_cast<size_t>(row) * n;
        s.power[0] += std::norm(r[0]) * norm;
        for (int k = 1; k < n / 2; ++k)
            s.power[k] += (std::norm(r[k]) + std::norm(r[n - k])) * norm;
        s.power[n / 2] += std::norm(r[n / 2]) * norm;
    }
    s.flagged.assign(s.power.size(), 0);
    return s;
}

SpectrumSeries activation_spectra(const CnnModel& model, const Dataset& ds,
                                  const std::vector<int>& samples, int layer) {
    if (samples.empty()) throw std::invalid_argument("activation_spectra: empty sample set");
    if (layer < 1 || layer > model.n_layers())
        throw std::invalid_argument("activation_spectra: layer out of range");
    const int n = model.grid_n;
    const int plane = n * n;
    SpectrumSeries acc;
    acc.power.assign(n / 2 + 1, 0.0);
    long count = 0;
    for (int idx : samples) {
        ForwardCache cache;
        forward(model, ds.input(idx), &cache);
        const std::vector<double>& g = cache.post[layer - 1];
        const int channels = static_cast<int>(g.size()) / plane;
        for (int c = 0; c < channels; ++c) {
            RealField field(n);
            std::copy(g.begin() + static_cast<size_t>(c) * plane,
                      g.begin() + static_cast<size_t>(c + 1) * plane, field.data.begin());
            SpectrumSeries s = meridional_avg_spectrum(field);
            for (size_t k = 0; k < acc.power.size(); ++k) acc.power[k] += s.power[k];
            ++count;
        }
    }
    for (double& p : acc.power) p /= static_cast<double>(count);
    acc.flagged.assign(acc.power.size(), 0);
    acc.meta = "layer" + std::to_string(layer);
    return acc;
}

SpectralField relu_spectral_decomposition(const RealField& h) {
    // Support-set construction: mask h by {h > 0}, then transform. The
    // Heaviside-sum form of the same operator is kept as a test oracle.
    RealField masked(h.nx);
    for (size_t i = 0; i < h.size(); ++i) masked.data[i] = h.data[i] > 0.0 ? h.data[i] : 0.0;
    return fft2(masked);
}

SpectrumSeries output_spectrum_ratio(const std::vector<RealField>& pred,
                                     const std::vector<RealField>& truth, double floor_power) {
    if (pred.size() != truth.size() || pred.empty())
        throw std::invalid_argument("output_spectrum_ratio: mismatched sample sets");
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
    double truth_total = 0.0;
    for (double v : st) truth_total += v;
    if (truth_total == 0.0) throw std::invalid_argument("output_spectrum_ratio: zero truth spectrum");

    SpectrumSeries out;
    out.power.assign(n / 2 + 1, 0.0);
    out.flagged.assign(n / 2 + 1, 0);
    for (int k = 0; k <= n / 2; ++k) {
        if (st[k] <= floor_power * pred.size()) {
            out.flagged[k] = 1;
        } else {
            out.power[k] = sp[k] / st[k];
        }
    }
    out.meta = "spectrum_ratio";
    return out;
}

void save_spectrum_csv(const SpectrumSeries& s, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    for (int k = 0; k < s.n_bins(); ++k)
        rows.push_back({std::to_string(k), format_double(s.power[k]),
                        std::to_string(static_cast<int>(s.flagged.empty() ? 0 : s.flagged[k])),
                        s.meta});
    write_csv(path, {"k_x", "power", "flagged", "meta"}, rows);
}

}  // namespace qglab
