#pragma once

#include <cassert>
#include <cmath>
#include <complex>
#include <cstddef>
#include <vector>

namespace qglab {

using cplx = std::complex<double>;

// Square doubly-periodic grid, row-major [y][x].
struct RealField {
    int nx = 0;
    std::vector<double> data;

    RealField() = default;
    explicit RealField(int n) : nx(n), data(static_cast<size_t>(n) * n, 0.0) {}

    double& at(int y, int x) { return data[static_cast<size_t>(y) * nx + x]; }
    double at(int y, int x) const { return data[static_cast<size_t>(y) * nx + x]; }
    size_t size() const { return data.size(); }
};

// Full complex spectrum, row-major [ky][kx]; index i maps to integer
// wavenumber i for i <= nx/2, i - nx otherwise.
struct SpectralField {
    int nx = 0;
    std::vector<cplx> data;

    SpectralField() = default;
    explicit SpectralField(int n) : nx(n), data(static_cast<size_t>(n) * n, cplx{0.0, 0.0}) {}

    cplx& at(int ky, int kx) { return data[static_cast<size_t>(ky) * nx + kx]; }
    cplx at(int ky, int kx) const { return data[static_cast<size_t>(ky) * nx + kx]; }
    size_t size() const { return data.size(); }
};

// Integer wavenumber for FFT bin i on an n-point grid.
inline int wave_index(int i, int n) { return (i <= n / 2) ? i : i - n; }

inline bool is_finite(const RealField& f) {
    for (double v : f.data)
        if (!std::isfinite(v)) return false;
    return true;
}

inline bool is_finite(const SpectralField& f) {
    for (const cplx& v : f.data)
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    return true;
}

// Projects onto the Hermitian-symmetric subspace so the inverse transform is real.
void enforce_real_symmetry(SpectralField& f);

// Max |f - conj(f(-k))| over the grid, relative to max |f|.
double real_symmetry_error(const SpectralField& f);

}  // namespace qglab
