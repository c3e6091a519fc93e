#include "qglab/params.hpp"

#include <cmath>
#include <stdexcept>

namespace qglab {

double ModelParams::deformation_radius() const {
    return std::sqrt(g_prime / (f0 * f0) * H1 * H2 / (H1 + H2));
}

double ModelParams::stretching(int layer) const {
    const double Hm = (layer == 1) ? H1 : H2;
    return f0 * f0 / (g_prime * Hm);
}

double ModelParams::beta_m(int layer) const {
    const double sign = (layer == 1) ? 1.0 : -1.0;
    return beta + sign * stretching(layer) * (U1 - U2);
}

void ModelParams::validate() const {
    if (!(H1 > 0.0) || !(H2 > 0.0)) throw std::invalid_argument("layer depths must be positive");
    if (nx < 16 || nx % 2 != 0) throw std::invalid_argument("nx must be even and >= 16");
    if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
    if (!(L > 0.0)) throw std::invalid_argument("L must be positive");
    if (!(g_prime > 0.0)) throw std::invalid_argument("g_prime must be positive");
    if (!(f0 != 0.0)) throw std::invalid_argument("f0 must be nonzero");
    if (!(r_ek >= 0.0)) throw std::invalid_argument("r_ek must be non-negative");
}

ModelParams ModelParams::from_config(const Config& cfg, const std::string& prefix) {
    ModelParams p;
    p.L = cfg.get_double(prefix + "L", p.L);
    p.nx = static_cast<int>(cfg.get_int(prefix + "nx", p.nx));
    p.H1 = cfg.get_double(prefix + "H1", p.H1);
    p.H2 = cfg.get_double(prefix + "H2", p.H2);
    p.f0 = cfg.get_double(prefix + "f0", p.f0);
    p.beta = cfg.get_double(prefix + "beta", p.beta);
    p.r_ek = cfg.get_double(prefix + "r_ek", p.r_ek);
    p.U1 = cfg.get_double(prefix + "U1", p.U1);
    p.U2 = cfg.get_double(prefix + "U2", p.U2);
    p.dt = cfg.get_double(prefix + "dt", p.dt);
    p.case_label = cfg.get_str(prefix + "case_label", p.case_label);

    const bool has_g = cfg.has(prefix + "g_prime");
    const bool has_rd = cfg.has(prefix + "r_d");
    if (has_g == has_rd)
        throw std::invalid_argument("config must set exactly one of " + prefix + "g_prime and " +
                                    prefix + "r_d");
    if (has_g) {
        p.g_prime = cfg.get_double(prefix + "g_prime");
    } else {
        const double rd = cfg.get_double(prefix + "r_d");
        p.g_prime = rd * rd * p.f0 * p.f0 * (p.H1 + p.H2) / (p.H1 * p.H2);
    }
    p.validate();
    return p;
}

ModelParams ModelParams::with_resolution(int new_nx) const {
    ModelParams p = *this;
    p.nx = new_nx;
    return p;
}

}  // namespace qglab
