#pragma once

#include "qglab/field.hpp"

namespace qglab {

// 2-D complex FFT on an nx-by-nx grid. Forward is an unnormalized sum;
// the inverse carries the 1/nx^2 factor, so inverse(forward(x)) == x.
class Fft2D {
  public:
    explicit Fft2D(int nx);
    ~Fft2D();
    Fft2D(const Fft2D&) = delete;
    Fft2D& operator=(const Fft2D&) = delete;

    int nx() const { return nx_; }

    SpectralField forward(const RealField& f) const;
    RealField inverse(const SpectralField& f) const;  // discards imaginary parts

    void forward(const RealField& f, SpectralField& out) const;
    void inverse(const SpectralField& f, RealField& out) const;

    // Full complex-to-complex paths, used by spectral analysis.
    void forward_c2c(const std::vector<cplx>& in, std::vector<cplx>& out) const;
    void inverse_c2c(const std::vector<cplx>& in, std::vector<cplx>& out) const;

  private:
    int nx_;
    void* plan_fwd_;  // fftw_plan
    void* plan_inv_;
};

}  // namespace qglab
