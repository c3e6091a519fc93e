#pragma once

#include "qglab/config.hpp"

#include <string>

namespace qglab {

// Physical and numerical configuration of the two-layer system.
// g_prime and r_d are tied by r_d^2 = (g'/f0^2) * H1*H2/(H1+H2); r_d is
// always derived from the other parameters.
struct ModelParams {
    double L = 1e6;        // domain edge length (m)
    int nx = 64;           // grid points per side
    double H1 = 500.0;     // upper-layer depth (m)
    double H2 = 2000.0;    // lower-layer depth (m)
    double f0 = 1e-4;      // Coriolis parameter (1/s)
    double beta = 1.5e-11; // planetary vorticity gradient (1/(m s))
    double g_prime = 0.0;  // reduced gravity (m/s^2)
    double r_ek = 5.787e-7;// bottom drag coefficient (1/s)
    double U1 = 0.025;     // upper mean zonal velocity (m/s)
    double U2 = 0.0;       // lower mean zonal velocity (m/s)
    double dt = 3600.0;    // timestep (s)
    std::string case_label = "case0";

    // Tendency reduced to the linear terms with the Jacobian zeroed;
    // used by convergence and dispersion tests.
    bool linear_only = false;

    double dx() const { return L / nx; }
    double deformation_radius() const;          // r_d (m)
    double stretching(int layer) const;         // F_m = f0^2 / (g' H_m), layer in {1,2}
    double beta_m(int layer) const;             // beta + (-1)^{m+1} F_m (U1 - U2)
    double mean_u(int layer) const { return layer == 1 ? U1 : U2; }

    void validate() const;  // throws std::invalid_argument on violation

    // Reads model.* keys: L, nx, H1, H2, f0, beta, r_ek, U1, U2, dt,
    // case_label, and exactly one of g_prime or r_d.
    static ModelParams from_config(const Config& cfg, const std::string& prefix = "model.");

    // Same physics on a different grid.
    ModelParams with_resolution(int new_nx) const;
};

}  // namespace qglab
