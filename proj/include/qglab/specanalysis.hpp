#pragma once

#include "qglab/cnn.hpp"
#include "qglab/fft.hpp"

#include <string>
#include <vector>

namespace qglab {

// Meridionally averaged power versus zonal wavenumber index, length nx/2+1.
// power[k] = mean over rows of |row FFT|^2 / nx^2, negative k folded in.
struct SpectrumSeries {
    std::vector<double> power;
    std::vector<uint8_t> flagged;  // bins excluded by ratio/metric code
    std::string meta;

    int n_bins() const { return static_cast<int>(power.size()); }
    double total_power() const;
};

// Forward 2-D transform (unnormalized sum; inverse carries 1/N^2).
SpectralField fft2(const RealField& f);
RealField ifft2(const SpectralField& f);

// Zero-pads a k x k kernel onto an N x N grid, placed so that
// conv2d_periodic(W, x) == ifft2(fft2(pad) .* fft2(x)) exactly.
RealField pad_kernel(const double* w, int k, int N);

// |fft2(pad_kernel(W))| for one kernel.
std::vector<double> kernel_spectrum_magnitude(const double* w, int k, int N);

SpectrumSeries meridional_avg_spectrum(const RealField& f);

// Channel- and sample-averaged spectrum of layer activations (1-based layer
// index; activations are the captured normalized values).
SpectrumSeries activation_spectra(const CnnModel& model, const Dataset& ds,
                                  const std::vector<int>& samples, int layer);

// Spectrum of ReLU(h) via the positive-support construction; equals
// fft2(ReLU(h)).
SpectralField relu_spectral_decomposition(const RealField& h);

// Binwise ratio of sample-averaged predicted spectra to sample-averaged true
// spectra; bins with truth power below `floor_power` are flagged and set to 0.
SpectrumSeries output_spectrum_ratio(const std::vector<RealField>& pred,
                                     const std::vector<RealField>& truth,
                                     double floor_power = 1e-300);

void save_spectrum_csv(const SpectrumSeries& s, const std::string& path);

}  // namespace qglab
