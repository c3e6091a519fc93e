#include "qglab/explain.hpp"

#include "qglab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace qglab {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

}  // namespace

ClusterResult cluster_kernel_spectra(const std::vector<std::vector<double>>& spectra, int k,
                                     uint64_t seed, int max_iter) {
    const int n = static_cast<int>(spectra.size());
    if (n == 0) throw std::invalid_argument("cluster_kernel_spectra: empty input");
    if (k < 1 || k > n) throw std::invalid_argument("cluster_kernel_spectra: invalid k");

    std::mt19937_64 rng(seed);
    ClusterResult res;
    res.k = k;
    res.seed = seed;

    // k-means++ seeding.
    std::vector<std::vector<double>> centers;
    centers.push_back(spectra[rng_below(rng, n)]);
    std::vector<double> d2(n);
    while (static_cast<int>(centers.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, sq_dist(spectra[i], c));
            d2[i] = best;
            total += best;
        }
        if (total == 0.0) {
            centers.push_back(spectra[rng_below(rng, n)]);
            continue;
        }
        double r = rng_uniform(rng) * total;
        int pick = n - 1;
        for (int i = 0; i < n; ++i) {
            r -= d2[i];
            if (r <= 0.0) {
                pick = i;
                break;
            }
        }
        centers.push_back(spectra[pick]);
    }

    std::vector<int> assign(n, -1);
    double prev_inertia = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < max_iter; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (int i = 0; i < n; ++i) {
            int best = 0;
            double bd = sq_dist(spectra[i], centers[0]);
            for (int c = 1; c < k; ++c) {
                const double d = sq_dist(spectra[i], centers[c]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[i] != best) {
                assign[i] = best;
                changed = true;
            }
            inertia += bd;
        }
        if (inertia > prev_inertia + 1e-9 * (1.0 + prev_inertia))
            throw std::logic_error("k-means: inertia increased");
        prev_inertia = inertia;
        res.inertia = inertia;
        res.iterations = iter + 1;
        if (!changed && iter > 0) break;

        // Center update; empty clusters re-seed from the farthest point.
        const size_t dim = spectra[0].size();
        std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
        std::vector<int> counts(k, 0);
        for (int i = 0; i < n; ++i) {
            for (size_t j = 0; j < dim; ++j) next[assign[i]][j] += spectra[i][j];
            counts[assign[i]]++;
        }
        for (int c = 0; c < k; ++c) {
            if (counts[c] == 0) {
                int far = 0;
                double fd = -1.0;
                for (int i = 0; i < n; ++i) {
                    const double d = sq_dist(spectra[i], centers[assign[i]]);
                    if (d > fd) {
                        fd = d;
                        far = i;
                    }
                }
                next[c] = spectra[far];
                prev_inertia = std::numeric_limits<double>::infinity();
            } else {
                for (size_t j = 0; j < dim; ++j) next[c][j] /= counts[c];
            }
        }
        centers = std::move(next);
    }

    // Final assignment pass so assignments match the returned centers.
    double inertia = 0.0;
    for (int i = 0; i < n; ++i) {
        int best = 0;
        double bd = sq_dist(spectra[i], centers[0]);
        for (int c = 1; c < k; ++c) {
            const double d = sq_dist(spectra[i], centers[c]);
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        assign[i] = best;
        inertia += bd;
    }
    res.inertia = inertia;
    res.centers = std::move(centers);
    res.assignments = std::move(assign);
    return res;
}

std::vector<std::vector<double>> layer_kernel_spectra(const CnnModel& model, int layer,
                                                      bool raw_magnitude) {
    const ConvLayer& l = model.layers.at(layer);
    const int N = model.grid_n;
    std::vector<std::vector<double>> out;
    out.reserve(static_cast<size_t>(l.out_ch) * l.in_ch);
    for (int o = 0; o < l.out_ch; ++o) {
        for (int c = 0; c < l.in_ch; ++c) {
            const double* w = l.weights.data() + (static_cast<size_t>(o) * l.in_ch + c) * 25;
            std::vector<double> mag = kernel_spectrum_magnitude(w, l.ksize, N);
            if (!raw_magnitude) {
                double mx = 0.0;
                for (double v : mag) mx = std::max(mx, v);
                if (mx > 0.0)
                    for (double& v : mag) v /= mx;
            }
            out.push_back(std::move(mag));
        }
    }
    return out;
}

std::vector<MaximaRecord> kernel_maxima(const CnnModel& model, int layer) {
    const ConvLayer& l = model.layers.at(layer);
    const int N = model.grid_n;
    std::vector<MaximaRecord> out;
    for (int o = 0; o < l.out_ch; ++o) {
        for (int c = 0; c < l.in_ch; ++c) {
            const double* w = l.weights.data() + (static_cast<size_t>(o) * l.in_ch + c) * 25;
            std::vector<double> mag = kernel_spectrum_magnitude(w, l.ksize, N);
            MaximaRecord rec;
            rec.in_channel = c;
            rec.out_channel = o;
            double best = -1.0;
            double best_kappa = 0.0;
            for (int j = 0; j < N; ++j) {
                const int ky = wave_index(j, N);
                for (int i = 0; i < N; ++i) {
                    const int kx = wave_index(i, N);
                    const double a = mag[static_cast<size_t>(j) * N + i];
                    const double kappa = std::hypot(kx, ky);
                    bool better = a > best;
                    if (a == best) {
                        // Tie-break: lowest radial wavenumber, then (k_x, k_y).
                        if (kappa < best_kappa)
                            better = true;
                        else if (kappa == best_kappa &&
                                 std::make_pair(kx, ky) < std::make_pair(rec.k_x, rec.k_y))
                            better = true;
                    }
                    if (better) {
                        best = a;
                        best_kappa = kappa;
                        rec.k_x = kx;
                        rec.k_y = ky;
                    }
                }
            }
            rec.amplitude = best;
            rec.kappa = best_kappa;
            out.push_back(rec);
        }
    }
    return out;
}

std::vector<HistogramBin> maxima_histogram(const std::vector<MaximaRecord>& records) {
    if (records.empty()) throw std::invalid_argument("maxima_histogram: empty records");
    std::map<std::pair<int, int>, long> counts;
    for (const auto& r : records) counts[{r.k_x, r.k_y}]++;
    std::vector<HistogramBin> out;
    for (const auto& [key, c] : counts) out.push_back({key.first, key.second, c});
    return out;
}

CompareResult compare_maxima(const std::vector<MaximaRecord>& base,
                             const std::vector<MaximaRecord>& tl) {
    if (base.size() != tl.size())
        throw std::invalid_argument("compare_maxima: record sets differ in size");
    CompareResult res;
    double ratio_sum = 0.0;
    for (size_t i = 0; i < base.size(); ++i) {
        const MaximaRecord& b = base[i];
        const MaximaRecord& t = tl[i];
        if (b.in_channel != t.in_channel || b.out_channel != t.out_channel)
            throw std::invalid_argument("compare_maxima: misaligned records");
        if (b.k_x == t.k_x && b.k_y == t.k_y) {
            res.unchanged.push_back(b);
            ratio_sum += t.amplitude / b.amplitude;
        } else {
            res.shifted.push_back(
                {b.in_channel, b.out_channel, b.k_x, b.k_y, t.k_x, t.k_y, b.kappa, t.kappa});
        }
    }
    res.mean_amplitude_ratio =
        res.unchanged.empty() ? 0.0 : ratio_sum / static_cast<double>(res.unchanged.size());
    return res;
}

}  // namespace qglab
