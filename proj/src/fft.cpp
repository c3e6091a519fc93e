#include "qglab/fft.hpp"

#include <fftw3.h>

#include <stdexcept>

namespace qglab {

void enforce_real_symmetry(SpectralField& f) {
    const int n = f.nx;
    for (int j = 0; j < n; ++j) {
        const int jc = (n - j) % n;
        for (int i = 0; i < n; ++i) {
            const int ic = (n - i) % n;
            if (static_cast<size_t>(j) * n + i > static_cast<size_t>(jc) * n + ic) continue;
            cplx a = f.at(j, i);
            cplx b = f.at(jc, ic);
            cplx avg = 0.5 * (a + std::conj(b));
            f.at(j, i) = avg;
            f.at(jc, ic) = std::conj(avg);
        }
    }
}

double real_symmetry_error(const SpectralField& f) {
    const int n = f.nx;
    double worst = 0.0, scale = 0.0;
    for (int j = 0; j < n; ++j) {
        const int jc = (n - j) % n;
        for (int i = 0; i < n; ++i) {
            const int ic = (n - i) % n;
            scale = std::max(scale, std::abs(f.at(j, i)));
            worst = std::max(worst, std::abs(f.at(j, i) - std::conj(f.at(jc, ic))));
        }
    }
    return scale > 0.0 ? worst / scale : 0.0;
}

Fft2D::Fft2D(int nx) : nx_(nx) {
    if (nx < 2) throw std::invalid_argument("Fft2D: nx must be >= 2");
    std::vector<cplx> a(static_cast<size_t>(nx) * nx), b(a.size());
    // FFTW_UNALIGNED lets the plans run on arbitrary std::vector buffers.
    plan_fwd_ = fftw_plan_dft_2d(nx, nx, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), FFTW_FORWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    plan_inv_ = fftw_plan_dft_2d(nx, nx, reinterpret_cast<fftw_complex*>(a.data()),
                                 reinterpret_cast<fftw_complex*>(b.data()), FFTW_BACKWARD,
                                 FFTW_ESTIMATE | FFTW_UNALIGNED);
    if (!plan_fwd_ || !plan_inv_) throw std::runtime_error("Fft2D: plan creation failed");
}

Fft2D::~Fft2D() {
    fftw_destroy_plan(static_cast<fftw_plan>(plan_fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(plan_inv_));
}

void Fft2D::forward_c2c(const std::vector<cplx>& in, std::vector<cplx>& out) const {
    out.resize(in.size());
    fftw_execute_dft(static_cast<fftw_plan>(plan_fwd_),
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
}

void Fft2D::inverse_c2c(const std::vector<cplx>& in, std::vector<cplx>& out) const {
    out.resize(in.size());
    fftw_execute_dft(static_cast<fftw_plan>(plan_inv_),
                     reinterpret_cast<fftw_complex*>(const_cast<cplx*>(in.data())),
                     reinterpret_cast<fftw_complex*>(out.data()));
    const double norm = 1.0 / (static_cast<double>(nx_) * nx_);
    for (cplx& v : out) v *= norm;
}

void Fft2D::forward(const RealField& f, SpectralField& out) const {
    std::vector<cplx> tmp(f.size());
    for (size_t i = 0; i < f.size(); ++i) tmp[i] = cplx{f.data[i], 0.0};
    out.nx = nx_;
    forward_c2c(tmp, out.data);
}

void Fft2D::inverse(const SpectralField& f, RealField& out) const {
    std::vector<cplx> tmp;
    inverse_c2c(f.data, tmp);
    out.nx = nx_;
    out.data.resize(tmp.size());
    for (size_t i = 0; i < tmp.size(); ++i) out.data[i] = tmp[i].real();
}

SpectralField Fft2D::forward(const RealField& f) const {
    SpectralField out(nx_);
    forward(f, out);
    return out;
}

RealField Fft2D::inverse(const SpectralField& f) const {
    RealField out(nx_);
    inverse(f, out);
    return out;
}

}  // namespace qglab
