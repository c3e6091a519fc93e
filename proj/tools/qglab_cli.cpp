#include "qglab/cnn.hpp"
#include "qglab/config.hpp"
#include "qglab/container.hpp"
#include "qglab/evalmetrics.hpp"
#include "qglab/explain.hpp"
#include "qglab/filtering.hpp"
#include "qglab/rng.hpp"
#include "qglab/solver.hpp"
#include "qglab/specanalysis.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>

using namespace qglab;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitIo = 4;

struct CommonOpts {
    std::string config_path;
    std::string out_dir = "out";
    std::string scale = "toy";
    uint64_t seed = 0;
    int threads = 1;
};

struct ScaleProfile {
    int nx_hi;
    int coarse_factor;
    int hidden_ch;
    int n_samples;
    int epochs;
};

ScaleProfile profile_for(const std::string& scale) {
    if (scale == "toy") return {128, 4, 16, 2000, 30};
    if (scale == "full") return {256, 4, 64, 40000, 100};
    throw std::invalid_argument("unknown scale profile: " + scale);
}

void add_common(CLI::App* cmd, CommonOpts& o, bool config_required = true) {
    cmd->add_option("--config", o.config_path, "case configuration file")
        ->required(config_required);
    cmd->add_option("--seed", o.seed, "root random seed");
    cmd->add_option("--scale", o.scale, "scale profile: full or toy")
        ->check(CLI::IsMember({"full", "toy"}));
    cmd->add_option("--out", o.out_dir, "output directory");
    cmd->add_option("--threads", o.threads, "worker threads (recorded in the manifest)");
}

struct Stopwatch {
    std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
};

void emit_manifest(const CommonOpts& o, const std::string& command,
                   const std::string& config_hash, const Stopwatch& sw,
                   std::map<std::string, std::string> extra) {
    extra["command"] = command;
    extra["config"] = o.config_path;
    extra["config_hash"] = config_hash;
    extra["seed"] = std::to_string(o.seed);
    extra["scale"] = o.scale;
    extra["threads"] = std::to_string(o.threads);
    extra["wall_time_s"] = format_double(sw.seconds());
    write_manifest(o.out_dir + "/" + command + ".manifest", extra);
}

ModelParams params_hi_from(const Config& cfg, const CommonOpts& o) {
    ModelParams p = ModelParams::from_config(cfg);
    p = p.with_resolution(static_cast<int>(
        cfg.get_int("dataset.nx_hi", profile_for(o.scale).nx_hi)));
    return p;
}

TrainConfig train_config_from(const Config& cfg, const CommonOpts& o) {
    const ScaleProfile prof = profile_for(o.scale);
    TrainConfig tc;
    tc.lr0 = cfg.get_double("train.lr0", tc.lr0);
    tc.batch_size = static_cast<int>(cfg.get_int("train.batch_size", tc.batch_size));
    tc.epochs = static_cast<int>(cfg.get_int("train.epochs", prof.epochs));
    tc.plateau_patience = static_cast<int>(cfg.get_int("train.patience", tc.plateau_patience));
    tc.val_fraction = cfg.get_double("train.val_fraction", tc.val_fraction);
    tc.seed = o.seed;
    return tc;
}

void save_summary(const std::string& path, const std::map<std::string, std::string>& kv) {
    write_manifest(path, kv);
}

// ---------------------------------------------------------------------------

int cmd_simulate(const CommonOpts& o) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    ModelParams p = params_hi_from(cfg, o);
    const long steps = cfg.get_int("sim.steps", 100);
    const long interval = cfg.get_int("sim.snapshot_interval", 10);
    const double amp = cfg.get_double("sim.ic_amplitude", 1e-7);

    QgModel model(p);
    SpectralState ic = random_initial_condition(split_seed(o.seed, 0), p, amp);
    std::vector<SpectralState> snaps;
    if (steps == 0) {
        snaps.push_back(ic);
    } else {
        snaps = model.run(ic, steps, interval);
    }

    Fft2D fft(p.nx);
    const uint64_t n = snaps.size(), nx = static_cast<uint64_t>(p.nx);
    std::vector<double> q(n * 2 * nx * nx), times(n);
    for (size_t s = 0; s < snaps.size(); ++s) {
        times[s] = snaps[s].time;
        for (int m = 0; m < 2; ++m) {
            RealField f = fft.inverse(snaps[s].q_hat[m]);
            std::copy(f.data.begin(), f.data.end(),
                      q.begin() + (s * 2 + m) * nx * nx);
        }
    }
    TensorContainer c;
    c.config_hash = cfg.hash();
    c.add("q", {n, 2, nx, nx}, std::move(q));
    c.add("times", {n}, times);
    c.add_scalar("nx", p.nx);
    const std::string out = o.out_dir + "/snapshots_" + p.case_label + ".bin";
    c.save(out);
    emit_manifest(o, "simulate", cfg.hash(), sw,
                  {{"output", out}, {"steps", std::to_string(steps)}});
    return 0;
}

int cmd_datagen(const CommonOpts& o) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    const ScaleProfile prof = profile_for(o.scale);
    DatasetGenConfig gen;
    gen.params_hi = params_hi_from(cfg, o);
    gen.coarse_factor = static_cast<int>(cfg.get_int("dataset.coarse_factor", prof.coarse_factor));
    gen.spinup_steps = cfg.get_int("dataset.spinup_steps", gen.spinup_steps);
    gen.sample_stride = cfg.get_int("dataset.sample_stride", gen.sample_stride);
    gen.ic_amplitude = cfg.get_double("dataset.ic_amplitude", gen.ic_amplitude);
    gen.seed = split_seed(o.seed, 1);
    gen.config_hash = cfg.hash();
    const int n_samples = static_cast<int>(cfg.get_int("dataset.n_samples", prof.n_samples));

    Dataset ds = generate_dataset(gen, n_samples);
    const std::string out = o.out_dir + "/dataset_" + gen.params_hi.case_label + ".bin";
    save_dataset(ds, out);
    emit_manifest(o, "datagen", cfg.hash(), sw,
                  {{"output", out},
                   {"n_samples", std::to_string(ds.n)},
                   {"diverged", ds.diverged ? "1" : "0"}});
    if (ds.diverged) {
        std::fprintf(stderr, "datagen: simulation diverged at step %ld; partial dataset kept\n",
                     ds.divergence_step);
        return kExitDiverged;
    }
    return 0;
}

int cmd_train(const CommonOpts& o, const std::string& dataset_path) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    const ScaleProfile prof = profile_for(o.scale);
    Dataset ds = load_dataset(dataset_path);
    TrainConfig tc = train_config_from(cfg, o);
    const int hidden = static_cast<int>(cfg.get_int("train.hidden_channels", prof.hidden_ch));
    const int n_layers = static_cast<int>(cfg.get_int("train.n_layers", 9));

    TrainResult r = train_model(ds, tc, hidden, n_layers);
    const std::string label = ds.source_case.empty() ? "model" : ds.source_case;
    const std::string out = o.out_dir + "/bnn_" + label + ".bin";
    save_model(r.model, out, cfg.hash());
    save_train_log(r.log, o.out_dir + "/train_log_" + label + ".csv");
    emit_manifest(o, "train", cfg.hash(), sw,
                  {{"dataset", dataset_path},
                   {"output", out},
                   {"best_val_loss", format_double(r.best_val_loss)},
                   {"epochs", std::to_string(r.log.size())}});
    return 0;
}

int cmd_transfer(const CommonOpts& o, const std::string& base_path,
                 const std::string& dataset_path) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    CnnModel base = load_model(base_path);
    Dataset target = load_dataset(dataset_path);

    TLConfig tl;
    tl.trainable_layers = {static_cast<int>(cfg.get_int("tl.layer", 2)) - 1};  // 1-based key
    tl.data_fraction = cfg.get_double("tl.data_fraction", 0.1);
    tl.train = train_config_from(cfg, o);

    TrainResult r = transfer_learn(base, target, tl);
    const std::string label = target.source_case.empty() ? "model" : target.source_case;
    const std::string out = o.out_dir + "/tlnn_" + label + ".bin";
    save_model(r.model, out, cfg.hash());
    save_train_log(r.log, o.out_dir + "/tl_log_" + label + ".csv");
    emit_manifest(o, "transfer", cfg.hash(), sw,
                  {{"base", base_path},
                   {"dataset", dataset_path},
                   {"output", out},
                   {"data_fraction", format_double(tl.data_fraction)}});
    return 0;
}

int cmd_eval_offline(const CommonOpts& o, const std::string& model_path,
                     const std::string& dataset_path) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    CnnModel model = load_model(model_path);
    Dataset ds = load_dataset(dataset_path);
    std::vector<int> idx(ds.n);
    for (int i = 0; i < ds.n; ++i) idx[i] = i;

    OfflineReport rep = evaluate_offline(model, ds, idx);
    std::map<std::string, std::string> kv = {
        {"model", model_path},
        {"dataset", dataset_path},
        {"n_samples", std::to_string(rep.n_samples)},
    };
    std::vector<std::vector<std::string>> rows;
    for (int m = 0; m < 2; ++m) {
        const std::string layer = std::to_string(m + 1);
        kv["rmse_" + layer] = format_double(rep.rmse_m[m]);
        kv["cc_" + layer] = format_double(rep.cc_m[m]);
        kv["spectrum_rmse_" + layer] = format_double(rep.spectrum_rmse_m[m]);
        rows.push_back({layer, format_double(rep.rmse_m[m]), format_double(rep.cc_m[m]),
                        format_double(rep.spectrum_rmse_m[m])});
    }
    write_csv(o.out_dir + "/offline_metrics.csv", {"layer", "rmse", "cc", "spectrum_rmse"}, rows);
    save_summary(o.out_dir + "/offline_summary.txt", kv);
    emit_manifest(o, "eval-offline", cfg.hash(), sw, kv);
    return 0;
}

int cmd_eval_online(const CommonOpts& o, const std::string& model_path) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    const ScaleProfile prof = profile_for(o.scale);
    ModelParams hi = params_hi_from(cfg, o);
    const int K = static_cast<int>(cfg.get_int("dataset.coarse_factor", prof.coarse_factor));
    ModelParams lo = hi.with_resolution(hi.nx / K);

    CnnModel model;
    const bool coupled = !model_path.empty();
    if (coupled) model = load_model(model_path);

    const long steps = cfg.get_int("eval.steps", 1000);
    const long interval = cfg.get_int("eval.snapshot_interval", 10);
    const long spinup = cfg.get_int("eval.spinup_steps", 2000);
    const double amp = cfg.get_double("eval.ic_amplitude", 1e-7);

    SpectralState ic = random_initial_condition(split_seed(o.seed, 2), lo, amp);
    {
        QgModel warm(lo);
        for (long k = 0; k < spinup; ++k) warm.step(ic);
    }

    OnlineRunResult r = run_online(coupled ? &model : nullptr, lo, ic, steps, interval);
    for (int m = 0; m < 2; ++m) {
        r.report.ke_spectra[m].meta = coupled ? "coupled" : "bare";
        save_spectrum_csv(r.report.ke_spectra[m],
                          o.out_dir + "/ke_spectrum_layer" + std::to_string(m + 1) + ".csv");
    }
    std::vector<std::vector<std::string>> pdf_rows;
    for (size_t b = 0; b < r.report.q1_pdf.densities.size(); ++b)
        pdf_rows.push_back({format_double(r.report.q1_pdf.edges[b]),
                            format_double(r.report.q1_pdf.edges[b + 1]),
                            format_double(r.report.q1_pdf.densities[b])});
    write_csv(o.out_dir + "/pv_pdf.csv", {"edge_lo", "edge_hi", "density"}, pdf_rows);

    std::map<std::string, std::string> kv = {
        {"model", coupled ? model_path : "(none)"},
        {"stable", r.report.stable ? "1" : "0"},
        {"n_steps", std::to_string(r.report.n_steps)},
    };
    save_summary(o.out_dir + "/online_summary.txt", kv);
    emit_manifest(o, "eval-online", cfg.hash(), sw, kv);
    if (!r.report.stable) {
        std::fprintf(stderr, "eval-online: run diverged at step %ld\n",
                     r.report.divergence_step);
        return kExitDiverged;
    }
    return 0;
}

int cmd_explain(const CommonOpts& o, const std::string& base_path, const std::string& tl_path,
                int layer, int k_clusters) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    CnnModel base = load_model(base_path);
    const int l0 = layer - 1;  // 1-based flag

    auto spectra = layer_kernel_spectra(base, l0);
    ClusterResult cl = cluster_kernel_spectra(spectra, k_clusters, split_seed(o.seed, 4));
    std::vector<std::vector<std::string>> crow;
    for (size_t i = 0; i < cl.assignments.size(); ++i)
        crow.push_back({std::to_string(i), std::to_string(cl.assignments[i])});
    write_csv(o.out_dir + "/kernel_clusters.csv", {"kernel", "cluster"}, crow);

    auto base_max = kernel_maxima(base, l0);
    auto dump_maxima = [&](const std::vector<MaximaRecord>& recs, const std::string& name) {
        std::vector<std::vector<std::string>> rows;
        for (const auto& r : recs)
            rows.push_back({std::to_string(r.out_channel), std::to_string(r.in_channel),
                            std::to_string(r.k_x), std::to_string(r.k_y),
                            format_double(r.amplitude), format_double(r.kappa)});
        write_csv(o.out_dir + "/" + name,
                  {"out_channel", "in_channel", "k_x", "k_y", "amplitude", "kappa"}, rows);
    };
    dump_maxima(base_max, "maxima_base.csv");

    auto hist = maxima_histogram(base_max);
    std::vector<std::vector<std::string>> hrow;
    for (const auto& b : hist)
        hrow.push_back({std::to_string(b.k_x), std::to_string(b.k_y), std::to_string(b.count)});
    write_csv(o.out_dir + "/maxima_histogram.csv", {"k_x", "k_y", "count"}, hrow);

    std::map<std::string, std::string> kv = {
        {"base", base_path},
        {"layer", std::to_string(layer)},
        {"k", std::to_string(k_clusters)},
        {"inertia", format_double(cl.inertia)},
    };
    if (!tl_path.empty()) {
        CnnModel tl = load_model(tl_path);
        auto tl_max = kernel_maxima(tl, l0);
        dump_maxima(tl_max, "maxima_tl.csv");
        CompareResult cmp = compare_maxima(base_max, tl_max);
        std::vector<std::vector<std::string>> srow;
        for (const auto& s : cmp.shifted)
            srow.push_back({std::to_string(s.out_channel), std::to_string(s.in_channel),
                            std::to_string(s.kx_before), std::to_string(s.ky_before),
                            std::to_string(s.kx_after), std::to_string(s.ky_after),
                            format_double(s.kappa_before), format_double(s.kappa_after)});
        write_csv(o.out_dir + "/maxima_shifts.csv",
                  {"out_channel", "in_channel", "kx_before", "ky_before", "kx_after", "ky_after",
                   "kappa_before", "kappa_after"},
                  srow);
        kv["tl"] = tl_path;
        kv["n_unchanged"] = std::to_string(cmp.unchanged.size());
        kv["n_shifted"] = std::to_string(cmp.shifted.size());
        kv["mean_amplitude_ratio"] = format_double(cmp.mean_amplitude_ratio);
    }
    save_summary(o.out_dir + "/explain_summary.txt", kv);
    emit_manifest(o, "explain", cfg.hash(), sw, kv);
    return 0;
}

int cmd_spectra(const CommonOpts& o, const std::string& model_path,
                const std::string& dataset_path) {
    Stopwatch sw;
    Config cfg = Config::parse_file(o.config_path);
    CnnModel model = load_model(model_path);
    Dataset ds = load_dataset(dataset_path);
    const int n_use = std::min(ds.n, 64);
    std::vector<int> idx(n_use);
    for (int i = 0; i < n_use; ++i) idx[i] = i;

    for (int layer = 1; layer <= model.n_layers(); ++layer) {
        SpectrumSeries s = activation_spectra(model, ds, idx, layer);
        save_spectrum_csv(s, o.out_dir + "/activation_spectrum_layer" + std::to_string(layer) +
                                 ".csv");
    }

    // Spectrum ratio of predictions over truth, per target channel.
    auto preds = predict_batch(model, ds, idx);
    const int nx = ds.nx_lo;
    for (int m = 0; m < 2; ++m) {
        std::vector<RealField> p, t;
        for (int s = 0; s < n_use; ++s) {
            RealField pf(nx), tf(nx);
            std::copy(preds[s].begin() + m * nx * nx, preds[s].begin() + (m + 1) * nx * nx,
                      pf.data.begin());
            const double* tg = ds.target(idx[s]) + static_cast<size_t>(m) * nx * nx;
            std::copy(tg, tg + nx * nx, tf.data.begin());
            p.push_back(pf);
            t.push_back(tf);
        }
        SpectrumSeries ratio = output_spectrum_ratio(p, t);
        save_spectrum_csv(ratio, o.out_dir + "/output_spectrum_ratio_layer" +
                                     std::to_string(m + 1) + ".csv");
    }
    emit_manifest(o, "spectra", cfg.hash(), sw,
                  {{"model", model_path}, {"dataset", dataset_path},
                   {"n_samples", std::to_string(n_use)}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-layer QG subgrid closure laboratory"};
    app.require_subcommand(1);

    CommonOpts o;
    std::string dataset_path, model_path, base_path, tl_path;
    int layer = 2, k_clusters = 3;

    CLI::App* sim = app.add_subcommand("simulate", "run one case and store snapshots");
    add_common(sim, o);

    CLI::App* gen = app.add_subcommand("datagen", "generate a training dataset");
    add_common(gen, o);

    CLI::App* train = app.add_subcommand("train", "train a base network");
    add_common(train, o);
    train->add_option("--dataset", dataset_path, "training dataset")->required();

    CLI::App* transfer = app.add_subcommand("transfer", "re-train one layer on target data");
    add_common(transfer, o);
    transfer->add_option("--base", base_path, "base model checkpoint")->required();
    transfer->add_option("--dataset", dataset_path, "target dataset")->required();

    CLI::App* evo = app.add_subcommand("eval-offline", "a priori metrics on a dataset");
    add_common(evo, o);
    evo->add_option("--model", model_path, "model checkpoint")->required();
    evo->add_option("--dataset", dataset_path, "evaluation dataset")->required();

    CLI::App* evn = app.add_subcommand("eval-online", "coupled low-resolution run");
    add_common(evn, o);
    evn->add_option("--model", model_path, "closure checkpoint (omit for the bare solver)");

    CLI::App* expl = app.add_subcommand("explain", "kernel spectra, clusters, maxima");
    add_common(expl, o);
    expl->add_option("--base", base_path, "base model checkpoint")->required();
    expl->add_option("--tl", tl_path, "transfer-learned checkpoint (optional)");
    expl->add_option("--layer", layer, "1-based layer to analyze");
    expl->add_option("--clusters", k_clusters, "number of k-means clusters");

    CLI::App* spec = app.add_subcommand("spectra", "activation and output spectra");
    add_common(spec, o);
    spec->add_option("--model", model_path, "model checkpoint")->required();
    spec->add_option("--dataset", dataset_path, "dataset")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitConfig;
    }

    try {
        std::filesystem::create_directories(o.out_dir);
        if (sim->parsed()) return cmd_simulate(o);
        if (gen->parsed()) return cmd_datagen(o);
        if (train->parsed()) return cmd_train(o, dataset_path);
        if (transfer->parsed()) return cmd_transfer(o, base_path, dataset_path);
        if (evo->parsed()) return cmd_eval_offline(o, model_path, dataset_path);
        if (evn->parsed()) return cmd_eval_online(o, model_path);
        if (expl->parsed()) return cmd_explain(o, base_path, tl_path, layer, k_clusters);
        if (spec->parsed()) return cmd_spectra(o, model_path, dataset_path);
    } catch (const IoError& e) {
        std::fprintf(stderr, "I/O error: %s\n", e.what());
        return kExitIo;
    } catch (const DivergedError& e) {
        std::fprintf(stderr, "numerical divergence: %s\n", e.what());
        return kExitDiverged;
    } catch (const TrainingDivergedError& e) {
        std::fprintf(stderr, "training diverged: %s\n", e.what());
        return kExitDiverged;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfig;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
