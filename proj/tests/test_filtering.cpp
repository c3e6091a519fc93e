#include "doctest.h"

#include "qglab/filtering.hpp"
#include "qglab/rng.hpp"

#include <cmath>

using namespace qglab;

namespace {

constexpr double kPi = 3.14159265358979323846;

ModelParams hi_params(int nx = 64) {
    ModelParams p;
    p.nx = nx;
    p.g_prime = 0.01;
    p.dt = 600.0;
    return p;
}

SpectralField random_spectrum(uint64_t seed, int n, int kmax) {
    std::mt19937_64 rng(seed);
    SpectralField f(n);
    for (int j = 0; j < n; ++j) {
        const int kj = wave_index(j, n);
        for (int i = 0; i < n; ++i) {
            const int ki = wave_index(i, n);
            if (std::abs(ki) > kmax || std::abs(kj) > kmax) continue;
            f.at(j, i) = cplx{rng_normal(rng), rng_normal(rng)};
        }
    }
    enforce_real_symmetry(f);
    return f;
}

double max_abs_diff(const SpectralField& a, const SpectralField& b) {
    double m = 0.0;
    for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

}  // namespace

TEST_CASE("coarsen spec arithmetic and validation") {
    CoarsenSpec s = CoarsenSpec::make(128, 4, 1e6);
    CHECK(s.nx_lo == 32);
    CHECK(s.dx_lo == 1e6 / 32);
    CHECK_THROWS(CoarsenSpec::make(130, 4, 1e6));  // not divisible
    CHECK_THROWS(CoarsenSpec::make(128, 0, 1e6));
}

TEST_CASE("coarse graining preserves constants and the pass band") {
    const int n_hi = 64, K = 4;
    CoarsenSpec spec = CoarsenSpec::make(n_hi, K, 1e6);
    const int n_lo = spec.nx_lo;

    Fft2D fft_hi(n_hi), fft_lo(n_lo);
    RealField c(n_hi);
    for (auto& v : c.data) v = 7.25;
    SpectralField c_lo = coarse_grain(fft_hi.forward(c), spec);
    RealField c_phys = fft_lo.inverse(c_lo);
    for (double v : c_phys.data) CHECK(v == doctest::Approx(7.25).epsilon(1e-14));

    // A resolvable mode passes through with its physical amplitude intact.
    RealField mode(n_hi);
    for (int j = 0; j < n_hi; ++j)
        for (int i = 0; i < n_hi; ++i) mode.at(j, i) = std::cos(2.0 * kPi * 3 * i / n_hi);
    RealField mode_lo = fft_lo.inverse(coarse_grain(fft_hi.forward(mode), spec));
    for (int j = 0; j < n_lo; ++j)
        for (int i = 0; i < n_lo; ++i)
            CHECK(mode_lo.at(j, i) == doctest::Approx(std::cos(2.0 * kPi * 3 * i / n_lo)).epsilon(1e-12));

    // Modes above the coarse Nyquist are annihilated.
    RealField fine(n_hi);
    for (int j = 0; j < n_hi; ++j)
        for (int i = 0; i < n_hi; ++i) fine.at(j, i) = std::sin(2.0 * kPi * 20 * i / n_hi);
    SpectralField fine_lo = coarse_grain(fft_hi.forward(fine), spec);
    CHECK(max_abs_diff(fine_lo, SpectralField(n_lo)) < 1e-10);
}

TEST_CASE("coarse graining with K=1 is the identity") {
    const int n = 32;
    CoarsenSpec spec = CoarsenSpec::make(n, 1, 1e6);
    SpectralField f = random_spectrum(2, n, n / 2);
    SpectralField g = coarse_grain(f, spec);
    CHECK(max_abs_diff(f, g) == 0.0);
}

TEST_CASE("coarse graining keeps real fields real") {
    CoarsenSpec spec = CoarsenSpec::make(64, 4, 1e6);
    SpectralField f = random_spectrum(7, 64, 32);
    SpectralField g = coarse_grain(f, spec);
    CHECK(real_symmetry_error(g) < 1e-12);
}

TEST_CASE("gaussian filter gain anchors") {
    const double dx = 1e6 / 32;
    CHECK(gaussian_gain(0.0, dx) == 1.0);
    // exp(-kappa^2 (2 dx)^2 / 24) = 1/e when kappa = sqrt(24)/(2 dx).
    const double kappa_e = std::sqrt(24.0) / (2.0 * dx);
    CHECK(gaussian_gain(kappa_e, dx) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
    // Two applications compose: gains multiply.
    const double k = 3.0e-4;
    CHECK(gaussian_gain(k, dx) * gaussian_gain(k, dx) ==
          doctest::Approx(std::exp(-2.0 * k * k * (2 * dx) * (2 * dx) / 24.0)).epsilon(1e-13));

    const int n = 32;
    SpectralField f = random_spectrum(3, n, n / 2);
    SpectralField g = f;
    gaussian_filter(g, 1e6, dx);
    // DC untouched, everything else strictly damped.
    CHECK(g.at(0, 0) == f.at(0, 0));
    CHECK(std::abs(g.at(5, 7)) < std::abs(f.at(5, 7)));
}

TEST_CASE("filtering and coarsening commute") {
    const int n_hi = 64, K = 4;
    CoarsenSpec spec = CoarsenSpec::make(n_hi, K, 1e6);
    SpectralField f = random_spectrum(11, n_hi, n_hi / 2);

    SpectralField a = f;
    gaussian_filter(a, 1e6, spec.dx_lo);
    a = coarse_grain(a, spec);

    SpectralField b = coarse_grain(f, spec);
    gaussian_filter(b, 1e6, spec.dx_lo);

    double scale = 0.0;
    for (const auto& c : a.data) scale = std::max(scale, std::abs(c));
    CHECK(max_abs_diff(a, b) < 1e-12 * scale);
}

TEST_CASE("subgrid forcing vanishes for identity filtering") {
    // K=1 with the Gaussian stage disabled: the high- and low-resolution
    // models coincide, so the tendency difference is exactly zero.
    ModelParams p = hi_params(32);
    SubgridExtractor ex(p, 1, false);
    SpectralState s = random_initial_condition(5, p, 1e-7);
    auto pi = ex.forcing(s);
    double worst = 0.0, scale = 0.0;
    auto t = ex.effective_tendency(ex.model_hi(), s);
    for (int m = 0; m < 2; ++m) {
        for (size_t i = 0; i < pi[m].size(); ++i) {
            worst = std::max(worst, std::abs(pi[m].data[i]));
            scale = std::max(scale, std::abs(t[m].data[i]));
        }
    }
    CHECK(worst < 1e-12 * scale);
}

TEST_CASE("effective tendency matches step-and-subtract oracle") {
    ModelParams p = hi_params(32);
    QgModel model(p);
    SpectralState s = random_initial_condition(9, p, 1e-7);

    SubgridExtractor ex(p, 1, false);
    auto t = ex.effective_tendency(ex.model_hi(), s);

    // Oracle: advance one forward-Euler-plus-filter step with a fresh model
    // and difference the states.
    QgModel stepper(p);
    SpectralState s2 = s;
    stepper.step(s2);
    double worst = 0.0, scale = 0.0;
    for (int m = 0; m < 2; ++m) {
        for (size_t i = 0; i < t[m].size(); ++i) {
            const cplx oracle = (s2.q_hat[m].data[i] - s.q_hat[m].data[i]) / p.dt;
            worst = std::max(worst, std::abs(t[m].data[i] - oracle));
            scale = std::max(scale, std::abs(oracle));
        }
    }
    CHECK(worst < 1e-8 * scale);
}

TEST_CASE("sample record layout and finiteness") {
    ModelParams p = hi_params(64);
    SubgridExtractor ex(p, 4);
    const int n_lo = ex.spec().nx_lo;
    SpectralState s = random_initial_condition(21, p, 1e-7);
    SampleRecord r = ex.sample(s);
    CHECK(r.nx_lo == n_lo);
    CHECK(r.inputs.size() == static_cast<size_t>(4) * n_lo * n_lo);
    CHECK(r.targets.size() == static_cast<size_t>(2) * n_lo * n_lo);
    for (double v : r.inputs) CHECK(std::isfinite(v));
    for (double v : r.targets) CHECK(std::isfinite(v));

    // Velocity channels agree with filtered/coarsened hi-res diagnostics.
    QgModel hi(p);
    DiagnosticFields d = hi.diagnostics(s);
    Fft2D fft_hi(p.nx), fft_lo(n_lo);
    SpectralField u1_lo = filter_and_coarsen(fft_hi.forward(d.u[0]), ex.spec(), p.L);
    RealField u1 = fft_lo.inverse(u1_lo);
    double worst = 0.0;
    for (int i = 0; i < n_lo * n_lo; ++i)
        worst = std::max(worst, std::abs(r.inputs[i] - u1.data[i]));
    CHECK(worst < 1e-12);
}

TEST_CASE("dataset append and channel statistics") {
    Dataset ds;
    ds.nx_lo = 2;
    SampleRecord r;
    r.nx_lo = 2;
    r.inputs = {1, 1, 1, 1, 2, 2, 2, 2, 0, 0, 0, 0, -1, -1, -1, -1};
    r.targets = {3, 3, 3, 3, 5, 5, 5, 5};
    r.seed = 7;
    r.snapshot_time = 1.5;
    ds.append(r);
    for (auto& v : r.inputs) v += 2.0;
    for (auto& v : r.targets) v -= 2.0;
    ds.append(r);
    CHECK(ds.n == 2);
    CHECK(ds.seeds.size() == 2);

    ChannelStats in = ds.input_stats();
    REQUIRE(in.mean.size() == 4);
    CHECK(in.mean[0] == doctest::Approx(2.0));   // (1 + 3) / 2
    CHECK(in.mean[3] == doctest::Approx(0.0));   // (-1 + 1) / 2
    CHECK(in.stddev[0] == doctest::Approx(1.0)); // values 1 and 3
    ChannelStats tg = ds.target_stats();
    CHECK(tg.mean[0] == doctest::Approx(2.0));   // 3 and 1
    CHECK(tg.mean[1] == doctest::Approx(4.0));   // 5 and 3
}

TEST_CASE("dataset generation is deterministic and counts samples") {
    DatasetGenConfig cfg;
    cfg.params_hi = hi_params(32);
    cfg.coarse_factor = 2;
    cfg.spinup_steps = 5;
    cfg.sample_stride = 3;
    cfg.ic_amplitude = 1e-7;
    cfg.seed = 77;
    cfg.config_hash = "deadbeef";

    Dataset a = generate_dataset(cfg, 4);
    Dataset b = generate_dataset(cfg, 4);
    CHECK(a.n == 4);
    CHECK_FALSE(a.diverged);
    CHECK(a.config_hash == "deadbeef");
    CHECK(a.inputs == b.inputs);
    CHECK(a.targets == b.targets);
    CHECK(a.times == b.times);

    cfg.seed = 78;
    Dataset c = generate_dataset(cfg, 4);
    CHECK(a.inputs != c.inputs);
}

TEST_CASE("dataset container round trip") {
    DatasetGenConfig cfg;
    cfg.params_hi = hi_params(32);
    cfg.coarse_factor = 2;
    cfg.spinup_steps = 3;
    cfg.sample_stride = 2;
    cfg.seed = 5;
    cfg.config_hash = "0123abcd";
    Dataset a = generate_dataset(cfg, 3);
    a.source_case = "case0";

    const std::string path = "/tmp/qglab_ds_test.bin";
    save_dataset(a, path);
    Dataset b = load_dataset(path);
    CHECK(b.n == a.n);
    CHECK(b.nx_lo == a.nx_lo);
    CHECK(b.inputs == a.inputs);
    CHECK(b.targets == a.targets);
    CHECK(b.seeds == a.seeds);
    CHECK(b.times == a.times);
    CHECK(b.source_case == a.source_case);
    CHECK(b.config_hash == a.config_hash);
    CHECK(b.diverged == a.diverged);
    std::remove(path.c_str());
}
