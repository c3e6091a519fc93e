#include "qglab/filtering.hpp"

#include "qglab/container.hpp"

#include <cmath>
#include <stdexcept>

namespace qglab {

CoarsenSpec CoarsenSpec::make(int nx_hi, int K, double L) {
    CoarsenSpec s;
    s.factor_K = K;
    s.nx_hi = nx_hi;
    if (K < 1 || nx_hi % K != 0) throw std::invalid_argument("nx_hi must be divisible by K >= 1");
    s.nx_lo = nx_hi / K;
    s.dx_lo = L / s.nx_lo;
    s.validate();
    return s;
}

void CoarsenSpec::validate() const {
    if (factor_K < 1) throw std::invalid_argument("coarse factor must be >= 1");
    if (nx_lo * factor_K != nx_hi) throw std::invalid_argument("nx_lo * K != nx_hi");
    if (!(dx_lo > 0.0)) throw std::invalid_argument("dx_lo must be positive");
}

SpectralField coarse_grain(const SpectralField& f, const CoarsenSpec& spec) {
    if (f.nx != spec.nx_hi) throw std::invalid_argument("coarse_grain: field size mismatch");
    if (spec.factor_K == 1) return f;
    const int nh = spec.nx_hi, nl = spec.nx_lo, half = nl / 2;
    const double scale = static_cast<double>(nl) * nl / (static_cast<double>(nh) * nh);
    SpectralField out(nl);
    for (int jl = 0; jl < nl; ++jl) {
        const int kj = wave_index(jl, nl);
        for (int il = 0; il < nl; ++il) {
            const int ki = wave_index(il, nl);
            cplx acc{0.0, 0.0};
            // The coarse Nyquist mode receives both +-half source modes.
            const int kis[2] = {ki, -ki}, kjs[2] = {kj, -kj};
            const int ni = (ki == half) ? 2 : 1;
            const int nj = (kj == half) ? 2 : 1;
            for (int a = 0; a < ni; ++a)
                for (int b = 0; b < nj; ++b)
                    acc += f.at((kjs[b] + nh) % nh, (kis[a] + nh) % nh);
            out.at(jl, il) = scale * acc;
        }
    }
    return out;
}

double gaussian_gain(double kappa, double dx_lo) {
    const double w = 2.0 * dx_lo;
    return std::exp(-kappa * kappa * w * w / 24.0);
}

void gaussian_filter(SpectralField& f, double L, double dx_lo) {
    if (!(dx_lo > 0.0)) throw std::invalid_argument("gaussian_filter: dx_lo must be positive");
    const int n = f.nx;
    const double two_pi_over_L = 2.0 * M_PI / L;
    for (int j = 0; j < n; ++j) {
        const double kyv = two_pi_over_L * wave_index(j, n);
        for (int i = 0; i < n; ++i) {
            const double kxv = two_pi_over_L * wave_index(i, n);
            f.at(j, i) *= gaussian_gain(std::sqrt(kxv * kxv + kyv * kyv), dx_lo);
        }
    }
}

SpectralField filter_and_coarsen(const SpectralField& f, const CoarsenSpec& spec, double L) {
    SpectralField out = coarse_grain(f, spec);
    gaussian_filter(out, L, spec.dx_lo);
    return out;
}

SubgridExtractor::SubgridExtractor(const ModelParams& params_hi, int coarse_factor,
                                   bool with_gaussian)
    : spec_(CoarsenSpec::make(params_hi.nx, coarse_factor, params_hi.L)),
      gaussian_(with_gaussian),
      hi_(params_hi),
      lo_(params_hi.with_resolution(params_hi.nx / coarse_factor)),
      fft_lo_(spec_.nx_lo) {}

SpectralField SubgridExtractor::fc(const SpectralField& f) const {
    SpectralField out = coarse_grain(f, spec_);
    if (gaussian_) gaussian_filter(out, hi_.params().L, spec_.dx_lo);
    return out;
}

std::array<SpectralField, 2> SubgridExtractor::effective_tendency(const QgModel& model,
                                                                  const SpectralState& s) const {
    auto rhs = model.tendency(s);
    const double dt = model.params().dt;
    const int n = model.params().nx;
    std::array<SpectralField, 2> out{SpectralField(n), SpectralField(n)};
    for (int m = 0; m < 2; ++m) {
        for (int j = 0; j < n; ++j) {
            for (int i = 0; i < n; ++i) {
                const cplx post = s.q_hat[m].at(j, i) + dt * rhs[m].at(j, i);
                out[m].at(j, i) = (model.ssd_gain_at(j, i) * post - s.q_hat[m].at(j, i)) / dt;
            }
        }
    }
    return out;
}

std::array<SpectralField, 2> SubgridExtractor::forcing(const SpectralState& q_hi) const {
    auto t_hi = effective_tendency(hi_, q_hi);

    SpectralState q_lo(spec_.nx_lo);
    q_lo.time = q_hi.time;
    q_lo.step_index = q_hi.step_index;
    for (int m = 0; m < 2; ++m) q_lo.q_hat[m] = fc(q_hi.q_hat[m]);
    auto t_lo = effective_tendency(lo_, q_lo);

    std::array<SpectralField, 2> pi{SpectralField(spec_.nx_lo), SpectralField(spec_.nx_lo)};
    for (int m = 0; m < 2; ++m) {
        pi[m] = fc(t_hi[m]);
        for (size_t idx = 0; idx < pi[m].size(); ++idx) pi[m].data[idx] -= t_lo[m].data[idx];
    }
    return pi;
}

SampleRecord SubgridExtractor::sample(const SpectralState& q_hi) const {
    const int nl = spec_.nx_lo;
    SampleRecord rec;
    rec.nx_lo = nl;
    rec.snapshot_time = q_hi.time;
    rec.inputs.resize(static_cast<size_t>(4) * nl * nl);
    rec.targets.resize(static_cast<size_t>(2) * nl * nl);

    const auto psi = hi_.invert_pv(q_hi);
    const int nh = spec_.nx_hi;
    for (int m = 0; m < 2; ++m) {
        SpectralField u_hat(nh), v_hat(nh);
        for (int j = 0; j < nh; ++j) {
            for (int i = 0; i < nh; ++i) {
                const cplx p = psi[m].at(j, i);
                u_hat.at(j, i) = cplx{0.0, -hi_.ky(j)} * p;
                v_hat.at(j, i) = cplx{0.0, hi_.kx(i)} * p;
            }
        }
        RealField u = fft_lo_.inverse(fc(u_hat));
        RealField v = fft_lo_.inverse(fc(v_hat));
        std::copy(u.data.begin(), u.data.end(),
                  rec.inputs.begin() + static_cast<size_t>(2 * m) * nl * nl);
        std::copy(v.data.begin(), v.data.end(),
                  rec.inputs.begin() + static_cast<size_t>(2 * m + 1) * nl * nl);
    }

    auto pi = forcing(q_hi);
    for (int m = 0; m < 2; ++m) {
        RealField p = fft_lo_.inverse(pi[m]);
        std::copy(p.data.begin(), p.data.end(),
                  rec.targets.begin() + static_cast<size_t>(m) * nl * nl);
    }
    return rec;
}

void Dataset::append(const SampleRecord& r) {
    if (n == 0) nx_lo = r.nx_lo;
    if (r.nx_lo != nx_lo) throw std::invalid_argument("dataset: record grid mismatch");
    inputs.insert(inputs.end(), r.inputs.begin(), r.inputs.end());
    targets.insert(targets.end(), r.targets.begin(), r.targets.end());
    seeds.push_back(r.seed);
    times.push_back(r.snapshot_time);
    ++n;
}

static ChannelStats stats_of(const std::vector<double>& v, int n, int channels, int plane) {
    ChannelStats s;
    s.mean.assign(channels, 0.0);
    s.stddev.assign(channels, 0.0);
    if (n == 0) return s;
    const size_t count = static_cast<size_t>(n) * plane;
    for (int c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* p = v.data() + (static_cast<size_t>(i) * channels + c) * plane;
            for (int k = 0; k < plane; ++k) sum += p[k];
        }
        s.mean[c] = sum / count;
        double ss = 0.0;
        for (int i = 0; i < n; ++i) {
            const double* p = v.data() + (static_cast<size_t>(i) * channels + c) * plane;
            for (int k = 0; k < plane; ++k) {
                const double d = p[k] - s.mean[c];
                ss += d * d;
            }
        }
        s.stddev[c] = std::sqrt(ss / count);
    }
    return s;
}

ChannelStats Dataset::input_stats() const { return stats_of(inputs, n, 4, nx_lo * nx_lo); }
ChannelStats Dataset::target_stats() const { return stats_of(targets, n, 2, nx_lo * nx_lo); }

Dataset generate_dataset(const DatasetGenConfig& cfg, int n_samples) {
    if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
    SubgridExtractor extractor(cfg.params_hi, cfg.coarse_factor);
    QgModel sim(cfg.params_hi);

    Dataset ds;
    ds.source_case = cfg.params_hi.case_label;
    ds.config_hash = cfg.config_hash;

    SpectralState s = random_initial_condition(cfg.seed, cfg.params_hi, cfg.ic_amplitude);
    try {
        for (long k = 0; k < cfg.spinup_steps; ++k) sim.step(s);
        for (int i = 0; i < n_samples; ++i) {
            SampleRecord rec = extractor.sample(s);
            rec.seed = cfg.seed;
            rec.source_case = cfg.params_hi.case_label;
            ds.append(rec);
            if (i + 1 < n_samples)
                for (long k = 0; k < cfg.sample_stride; ++k) sim.step(s);
        }
    } catch (const DivergedError& e) {
        ds.diverged = true;
        ds.divergence_step = e.step_index;
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    TensorContainer c;
    c.config_hash = ds.config_hash;
    const uint64_t n = static_cast<uint64_t>(ds.n);
    const uint64_t nx = static_cast<uint64_t>(ds.nx_lo);
    c.add("inputs", {n, 4, nx, nx}, ds.inputs);
    c.add("targets", {n, 2, nx, nx}, ds.targets);
    std::vector<double> seeds(ds.seeds.begin(), ds.seeds.end());
    c.add("seeds", {n}, seeds);
    c.add("times", {n}, ds.times);
    c.add_scalar("diverged", ds.diverged ? 1.0 : 0.0);
    c.add_scalar("divergence_step", static_cast<double>(ds.divergence_step));
    std::vector<double> label(ds.source_case.begin(), ds.source_case.end());
    c.add("source_case", {static_cast<uint64_t>(label.size())}, label);
    c.save(path);
}

Dataset load_dataset(const std::string& path) {
    TensorContainer c = TensorContainer::load(path);
    Dataset ds;
    const auto& in = c.get("inputs");
    ds.n = static_cast<int>(in.shape.at(0));
    ds.nx_lo = static_cast<int>(in.shape.at(3));
    ds.inputs = in.f64;
    ds.targets = c.f64("targets");
    for (double s : c.f64("seeds")) ds.seeds.push_back(static_cast<uint64_t>(s));
    ds.times = c.f64("times");
    ds.diverged = c.scalar("diverged") != 0.0;
    ds.divergence_step = static_cast<long>(c.scalar("divergence_step"));
    for (double ch : c.f64("source_case")) ds.source_case.push_back(static_cast<char>(ch));
    ds.config_hash = c.config_hash;
    return ds;
}

}  // namespace qglab
