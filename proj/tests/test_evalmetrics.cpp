#include "doctest.h"

#include "qglab/evalmetrics.hpp"
#include "qglab/rng.hpp"

#include <cmath>

using namespace qglab;

namespace {

constexpr double kPi = 3.14159265358979323846;

ModelParams lo_params(int nx = 32) {
    ModelParams p;
    p.nx = nx;
    p.g_prime = 0.01;
    p.dt = 600.0;
    return p;
}

std::vector<std::vector<double>> random_samples(uint64_t seed, int n, int len) {
    std::mt19937_64 rng(seed);
    std::vector<std::vector<double>> out(n, std::vector<double>(len));
    for (auto& s : out)
        for (auto& v : s) v = rng_normal(rng);
    return out;
}

// Field constant in y whose meridional spectrum has prescribed power in
// bins 0, 1 and 2 (grid n = 4).
RealField three_bin_field(double p0, double p1, double p2) {
    const int n = 4;
    const double a0 = std::sqrt(p0);
    const double a1 = std::sqrt(2.0 * p1);  // bin 1 power = a1^2 / 2
    const double a2 = std::sqrt(p2);        // unpaired Nyquist bin
    RealField f(n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i)
            f.at(j, i) = a0 + a1 * std::cos(2.0 * kPi * i / n) + a2 * std::cos(kPi * i);
    return f;
}

}  // namespace

TEST_CASE("relative rmse anchors") {
    auto truth = random_samples(1, 5, 64);
    CHECK(rmse(truth, truth) == 0.0);

    std::vector<std::vector<double>> zeros(truth.size(), std::vector<double>(64, 0.0));
    CHECK(rmse(zeros, truth) == doctest::Approx(1.0).epsilon(1e-12));

    auto scaled = truth;
    const double c = 0.37;
    for (auto& s : scaled)
        for (auto& v : s) v *= 1.0 + c;
    CHECK(rmse(scaled, truth) == doctest::Approx(c).epsilon(1e-12));
}

TEST_CASE("correlation anchors and affine invariance") {
    auto truth = random_samples(2, 4, 100);
    CHECK(cc(truth, truth) == doctest::Approx(1.0).epsilon(1e-12));

    auto affine = truth;
    for (auto& s : affine)
        for (auto& v : s) v = 3.5 * v + 11.0;
    CHECK(cc(affine, truth) == doctest::Approx(1.0).epsilon(1e-12));

    auto negated = truth;
    for (auto& s : negated)
        for (auto& v : s) v = -2.0 * v + 4.0;
    CHECK(cc(negated, truth) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("spectrum rmse anchors and the three-bin hand case") {
    std::vector<RealField> truth;
    std::mt19937_64 rng(3);
    for (int s = 0; s < 3; ++s) {
        RealField f(16);
        for (auto& v : f.data) v = rng_normal(rng);
        truth.push_back(f);
    }
    CHECK(spectrum_rmse(truth, truth) == doctest::Approx(0.0));

    // Doubling the field quadruples every spectral bin: |4S - S|/S = 3.
    std::vector<RealField> twice = truth;
    for (auto& f : twice)
        for (auto& v : f.data) v *= 2.0;
    CHECK(spectrum_rmse(twice, truth) == doctest::Approx(3.0).epsilon(1e-12));

    // Hand case: prediction bins (1, 1, 5) against truth bins (1, 2, 4):
    // mean(|0|/1, |1|/2, |1|/4) = 0.25.
    std::vector<RealField> pred{three_bin_field(1.0, 1.0, 5.0)};
    std::vector<RealField> tr{three_bin_field(1.0, 2.0, 4.0)};
    CHECK(spectrum_rmse(pred, tr) == doctest::Approx(0.25).epsilon(1e-10));
}

TEST_CASE("offline evaluation report") {
    const int n = 8;
    std::mt19937_64 rng(9);
    Dataset ds;
    ds.nx_lo = n;
    for (int s = 0; s < 6; ++s) {
        SampleRecord r;
        r.nx_lo = n;
        r.inputs.resize(static_cast<size_t>(4) * n * n);
        r.targets.resize(static_cast<size_t>(2) * n * n);
        for (auto& v : r.inputs) v = rng_normal(rng);
        for (auto& v : r.targets) v = rng_normal(rng);
        ds.append(r);
    }
    CnnModel model = CnnModel::make(n, 4, 3, 2, 3, 7);
    ChannelStats in = ds.input_stats(), tgt = ds.target_stats();
    model.norm = NormStats{in.mean, in.stddev, tgt.mean, tgt.stddev};

    const std::vector<int> idx = {0, 2, 4};
    OfflineReport rep = evaluate_offline(model, ds, idx);
    CHECK(rep.n_samples == 3);

    // Cross-check layer-1 relative RMSE against the public metric on the
    // model's own predictions.
    auto preds = predict_batch(model, ds, idx);
    std::vector<std::vector<double>> p1, t1;
    for (size_t s = 0; s < idx.size(); ++s) {
        p1.emplace_back(preds[s].begin(), preds[s].begin() + n * n);
        const double* t = ds.target(idx[s]);
        t1.emplace_back(t, t + n * n);
    }
    CHECK(rep.rmse_m[0] == doctest::Approx(rmse(p1, t1)).epsilon(1e-12));
    CHECK(rep.cc_m[0] == doctest::Approx(cc(p1, t1)).epsilon(1e-12));
    for (int m = 0; m < 2; ++m) {
        CHECK(std::isfinite(rep.rmse_m[m]));
        CHECK(rep.cc_m[m] >= -1.0);
        CHECK(rep.cc_m[m] <= 1.0);
        CHECK(rep.spectrum_rmse_m[m] >= 0.0);
    }
}

TEST_CASE("null-closure online run matches the bare solver bit for bit") {
    ModelParams p = lo_params();
    SpectralState ic = random_initial_condition(4, p, 1e-7);

    OnlineRunResult r = run_online(nullptr, p, ic, 20, 5);
    QgModel bare(p);
    auto ref = bare.run(ic, 20, 5);

    CHECK(r.report.stable);
    CHECK(r.report.n_steps == 20);
    REQUIRE(r.trajectory.size() == ref.size());
    for (size_t s = 0; s < ref.size(); ++s)
        for (int m = 0; m < 2; ++m)
            for (size_t i = 0; i < ref[s].q_hat[m].size(); ++i)
                CHECK(r.trajectory[s].q_hat[m].data[i] == ref[s].q_hat[m].data[i]);
}

TEST_CASE("online divergence sets the flag instead of throwing") {
    ModelParams p = lo_params();
    p.dt = 1e9;  // wildly unstable
    SpectralState ic = random_initial_condition(6, p, 1.0);
    OnlineRunResult r = run_online(nullptr, p, ic, 50, 5);
    CHECK_FALSE(r.report.stable);
    CHECK(r.report.divergence_step >= 0);
}

TEST_CASE("coupled online run applies the closure") {
    // A model that predicts a constant nonzero forcing changes the
    // trajectory relative to the bare solver.
    ModelParams p = lo_params();
    const int n = p.nx;
    CnnModel model;
    model.grid_n = n;
    ConvLayer layer;
    layer.in_ch = 4;
    layer.out_ch = 2;
    layer.weights.assign(static_cast<size_t>(2) * 4 * 25, 0.0);
    layer.bias.assign(2, 0.0);
    model.layers.push_back(layer);
    model.norm.in_mean.assign(4, 0.0);
    model.norm.in_std.assign(4, 1.0);
    model.norm.tgt_mean = {1e-11, 0.0};  // constant layer-1 forcing
    model.norm.tgt_std.assign(2, 1.0);

    SpectralState ic = random_initial_condition(8, p, 1e-7);
    OnlineRunResult coupled = run_online(&model, p, ic, 10, 10);
    OnlineRunResult bare = run_online(nullptr, p, ic, 10, 10);
    REQUIRE(coupled.report.stable);
    double diff = 0.0;
    const auto& a = coupled.trajectory.back().q_hat[0];
    const auto& b = bare.trajectory.back().q_hat[0];
    for (size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(a.data[i] - b.data[i]));
    CHECK(diff > 0.0);
}

TEST_CASE("kinetic energy spectrum matches a per-snapshot oracle") {
    ModelParams p = lo_params();
    QgModel model(p);
    SpectralState s = random_initial_condition(12, p, 1e-7);
    std::vector<SpectralState> traj{s};

    auto ke = ke_spectrum(traj, p, 0.0);
    DiagnosticFields d = model.diagnostics(s);
    for (int m = 0; m < 2; ++m) {
        SpectrumSeries pu = meridional_avg_spectrum(d.u[m]);
        SpectrumSeries pv = meridional_avg_spectrum(d.v[m]);
        REQUIRE(ke[m].n_bins() == pu.n_bins());
        for (int k = 0; k < pu.n_bins(); ++k)
            CHECK(ke[m].power[k] ==
                  doctest::Approx(0.5 * (pu.power[k] + pv.power[k])).epsilon(1e-12));
    }

    // Zero state: zero spectrum everywhere.
    std::vector<SpectralState> zero_traj{SpectralState(p.nx)};
    auto kz = ke_spectrum(zero_traj, p, 0.0);
    for (int m = 0; m < 2; ++m)
        for (double v : kz[m].power) CHECK(v == 0.0);
}

TEST_CASE("pv pdf integrates to one and matches a hand histogram") {
    ModelParams p = lo_params();
    SpectralState s = random_initial_condition(14, p, 1.0);
    std::vector<SpectralState> traj{s};

    const int bins = 11;
    PvPdf pdf = pv_pdf(traj, p, bins, -4.0, 4.0, 0.0);
    REQUIRE(pdf.edges.size() == bins + 1);
    REQUIRE(pdf.densities.size() == bins);
    CHECK(pdf.edges.front() == doctest::Approx(-4.0));
    CHECK(pdf.edges.back() == doctest::Approx(4.0));
    double integral = 0.0;
    for (int b = 0; b < bins; ++b)
        integral += pdf.densities[b] * (pdf.edges[b + 1] - pdf.edges[b]);
    CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));

    // Hand histogram of the layer-1 physical PV with clamping.
    Fft2D fft(p.nx);
    RealField q1 = fft.inverse(s.q_hat[0]);
    std::vector<long> counts(bins, 0);
    const double w = 8.0 / bins;
    for (double v : q1.data) {
        int b = static_cast<int>((v - (-4.0)) / w);
        b = std::max(0, std::min(bins - 1, b));
        ++counts[b];
    }
    const double total = static_cast<double>(q1.size());
    for (int b = 0; b < bins; ++b)
        CHECK(pdf.densities[b] == doctest::Approx(counts[b] / (total * w)).epsilon(1e-10));
}

TEST_CASE("metrics are invariant under sample permutation") {
    auto truth = random_samples(21, 6, 32);
    auto pred = random_samples(22, 6, 32);
    std::vector<std::vector<double>> pred_r(pred.rbegin(), pred.rend());
    std::vector<std::vector<double>> truth_r(truth.rbegin(), truth.rend());
    CHECK(rmse(pred, truth) == doctest::Approx(rmse(pred_r, truth_r)).epsilon(1e-13));
    CHECK(cc(pred, truth) == doctest::Approx(cc(pred_r, truth_r)).epsilon(1e-13));
}
