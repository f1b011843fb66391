// Command-line surface: training, SER evaluation, baseline sweeps, and the
// interpolation / attention-probe experiments. Output is CSV, deterministic
// for a fixed (config, seed).

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "mimolab/experiments.hpp"
#include "mimolab/ser.hpp"
#include "mimolab/training.hpp"

using namespace mimolab;

namespace {

ConfigMap gather_config(const std::string& config_path,
                        const std::vector<std::string>& overrides) {
    ConfigMap m;
    if (!config_path.empty()) {
        m = load_config_file(config_path);
    }
    apply_overrides(m, overrides);
    return m;
}

void write_output(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open output file " + path);
    }
    out << text;
}

std::vector<double> parse_snr_list(const std::string& s) {
    std::vector<double> grid;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        grid.push_back(std::stod(tok));
    }
    return grid;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mimolab: MIMO symbol-detection laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_path, checkpoint_path;
    std::vector<std::string> overrides;
    uint64_t seed = 0;
    bool seed_set = false;

    auto add_common = [&](CLI::App* sub, bool needs_seed) {
        sub->add_option("--config", config_path, "key=value config file");
        sub->add_option("--set", overrides, "config override key=value (repeatable)");
        sub->add_option("--out", out_path, "output path ('-' for stdout)");
        auto* s = sub->add_option_group("seed")->add_option(
            "--seed", seed, "RNG seed (required for stochastic commands)");
        if (needs_seed) {
            s->required();
        }
        sub->parse_complete_callback([&, s]() { seed_set = s->count() > 0; });
    };

    auto* cmd_train = app.add_subcommand("train", "train a RE-MIMO model");
    add_common(cmd_train, true);
    cmd_train->add_option("--checkpoint", checkpoint_path, "checkpoint output path")
        ->required();
    std::string resume_path;
    cmd_train->add_option("--resume", resume_path,
                          "checkpoint to continue from (keeps optimizer state)");

    auto* cmd_eval = app.add_subcommand("eval", "evaluate a trained model (SER)");
    add_common(cmd_eval, true);
    cmd_eval->add_option("--checkpoint", checkpoint_path, "checkpoint to load")
        ->required();
    int eval_n_tr = 4;
    std::string eval_snrs = "10";
    cmd_eval->add_option("--n-tr", eval_n_tr, "number of transmitters");
    cmd_eval->add_option("--snr", eval_snrs, "comma-separated SNR grid in dB");

    auto* cmd_sweep = app.add_subcommand("sweep", "SER vs SNR sweep across detectors");
    add_common(cmd_sweep, true);
    std::string sweep_detectors = "mmse,zf,mf";
    std::string sweep_snrs = "6,8,10,12";
    cmd_sweep->add_option("--detectors", sweep_detectors,
                          "comma list: zf,mf,mmse,ml,amp,vblast,remimo");
    cmd_sweep->add_option("--snr", sweep_snrs, "comma-separated SNR grid in dB");
    cmd_sweep->add_option("--checkpoint", checkpoint_path,
                          "checkpoint (required when remimo is listed)");

    auto* cmd_baselines =
        app.add_subcommand("baselines", "classical-detector sweep at one geometry");
    add_common(cmd_baselines, true);
    std::string base_snrs = "6,8,10,12";
    cmd_baselines->add_option("--snr", base_snrs, "comma-separated SNR grid in dB");

    auto* cmd_interp =
        app.add_subcommand("interp", "interpolation/extrapolation experiment");
    add_common(cmd_interp, true);

    auto* cmd_probe = app.add_subcommand("probe", "attention probe experiment");
    add_common(cmd_probe, true);

    auto* cmd_gradcheck =
        app.add_subcommand("gradcheck", "finite-difference check of the model gradient");
    add_common(cmd_gradcheck, true);

    CLI11_PARSE(app, argc, argv);

    try {
        const ConfigMap m = gather_config(config_path, overrides);

        if (cmd_train->parsed()) {
            TrainConfig cfg = train_config_from_map(m);
            cfg.seed = seed;
            RemimoConfig mc;
            mc.d_s = cfg.d_s;
            mc.n_heads = cfg.n_heads;
            mc.T = cfg.T;
            mc.order = cfg.order;
            mc.n_r = cfg.n_r;
            RemimoModel model = resume_path.empty()
                                    ? make_remimo(mc, seed)
                                    : load_checkpoint(resume_path).model;
            if (!resume_path.empty() &&
                (model.cfg.d_s != mc.d_s || model.cfg.n_heads != mc.n_heads ||
                 model.cfg.T != mc.T || model.cfg.order != mc.order ||
                 model.cfg.n_r != mc.n_r)) {
                throw std::runtime_error("--resume: checkpoint geometry does not match config");
            }
            TrainHistory hist = train(model, cfg);
            TrainMeta meta{cfg.epochs, seed, hist.val_loss};
            save_checkpoint(model, meta, checkpoint_path);
            std::ostringstream csv;
            csv << "epoch,val_loss,lr\n";
            for (size_t e = 0; e < hist.val_loss.size(); ++e) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g", e, hist.val_loss[e],
                              hist.lr[e]);
                csv << buf << "\n";
            }
            write_output(out_path, csv.str());
            return 0;
        }

        if (cmd_eval->parsed() || cmd_sweep->parsed() || cmd_baselines->parsed()) {
            const int n_r = int(cfg_int(m, "n_r", 16));
            const int order = int(cfg_int(m, "order", 4));
            InstanceSampler sampler;
            sampler.n_r = n_r;
            sampler.n_tr = cmd_eval->parsed() ? eval_n_tr : int(cfg_int(m, "n_tr", 4));
            sampler.constellation = make_constellation(order);
            sampler.seed = seed;
            const double rho_rx = cfg_double(m, "rho_rx", 0.0);
            const double rho_tx = cfg_double(m, "rho_tx", 0.0);
            if (rho_rx > 0.0 || rho_tx > 0.0) {
                sampler.use_corr = true;
                sampler.corr = {rho_rx, rho_tx, cfg_int(m, "partial", 0) != 0};
            }
            sampler.est_snr_db = cfg_double(m, "est_snr_db", INFINITY);

            StoppingRule rule;
            rule.min_errors = cfg_int(m, "min_errors", 200);
            rule.max_symbols = cfg_int(m, "max_symbols", 1000000);

            SweepSpec spec;
            spec.sampler = sampler;
            spec.stopping = rule;

            RemimoModel model; // keeps a loaded checkpoint alive during the sweep
            if (cmd_eval->parsed()) {
                model = load_checkpoint(checkpoint_path).model;
                spec.detectors.push_back({"remimo", [&model](const MimoInstance& i) {
                                              return detect_remimo(model, i.H, i.y, i.sigma)
                                                  .hard_indices;
                                          }});
                spec.snr_grid_db = parse_snr_list(eval_snrs);
            } else {
                const std::string names =
                    cmd_baselines->parsed() ? "zf,mf,mmse,amp,vblast" : sweep_detectors;
                std::stringstream ss(names);
                std::string name;
                while (std::getline(ss, name, ',')) {
                    if (name == "remimo") {
                        model = load_checkpoint(checkpoint_path).model;
                        spec.detectors.push_back(
                            {"remimo", [&model](const MimoInstance& i) {
                                 return detect_remimo(model, i.H, i.y, i.sigma)
                                     .hard_indices;
                             }});
                    } else {
                        spec.detectors.push_back(
                            make_classical_detector(name, sampler.constellation));
                    }
                }
                spec.snr_grid_db =
                    parse_snr_list(cmd_baselines->parsed() ? base_snrs : sweep_snrs);
            }
            SweepResult res = snr_sweep(spec);
            write_output(out_path, sweep_csv(res.points));
            return 0;
        }

        if (cmd_interp->parsed()) {
            InterpSpec spec;
            spec.base = train_config_from_map(m);
            spec.base.seed = seed;
            spec.train_values_I = {4, 6, 8};
            spec.train_values_II = {4, 5, 6, 7, 8};
            spec.test_values = {5, 7, 12};
            // Evaluation SNR / exclusive training ranges per test point.
            for (int n : spec.test_values) {
                spec.test_snr_db[n] = cfg_double(m, "test_snr_" + std::to_string(n));
                spec.test_snr_table[n] = {spec.test_snr_db[n] - 2.0,
                                          spec.test_snr_db[n] + 3.0};
            }
            spec.stopping.min_errors = cfg_int(m, "min_errors", 200);
            spec.stopping.max_symbols = cfg_int(m, "max_symbols", 200000);
            InterpReport report = interpolation_experiment(spec);
            std::vector<SerPoint> pts;
            for (const auto& row : report.rows) {
                pts.push_back(row.variant_I);
                pts.push_back(row.variant_II);
                pts.push_back(row.variant_III);
            }
            write_output(out_path, sweep_csv(pts));
            return 0;
        }

        if (cmd_probe->parsed()) {
            ProbeSpec spec;
            spec.n_r = int(cfg_int(m, "n_r", 32));
            spec.group_count = int(cfg_int(m, "group_count", 3));
            spec.group_size = int(cfg_int(m, "group_size", 4));
            spec.order = int(cfg_int(m, "order", 4));
            spec.d_s = int(cfg_int(m, "d_s", 32));
            spec.T = int(cfg_int(m, "T", 8));
            spec.epochs = int(cfg_int(m, "epochs", 4));
            spec.iters_per_epoch = int(cfg_int(m, "iters_per_epoch", 100));
            spec.batch_size = int(cfg_int(m, "batch_size", 32));
            spec.lr = cfg_double(m, "lr", 1e-3);
            spec.probe_snr_db = cfg_double(m, "probe_snr_db", 10.0);
            spec.seed = seed;
            ProbeReport report = attention_probe(spec);
            std::ostringstream csv;
            csv << "block,i,j,mean_attention\n";
            for (size_t t = 0; t < report.mean_attention.size(); ++t) {
                const Tensor& A = report.mean_attention[t];
                for (Eigen::Index i = 0; i < A.rows(); ++i) {
                    for (Eigen::Index j = 0; j < A.cols(); ++j) {
                        char buf[64];
                        std::snprintf(buf, sizeof(buf), "%zu,%ld,%ld,%.8g", t, long(i),
                                      long(j), A(i, j));
                        csv << buf << "\n";
                    }
                }
            }
            csv << "block,intra,inter\n";
            for (size_t t = 0; t < report.intra.size(); ++t) {
                char buf[64];
                std::snprintf(buf, sizeof(buf), "%zu,%.8g,%.8g", t, report.intra[t],
                              report.inter[t]);
                csv << buf << "\n";
            }
            write_output(out_path, csv.str());
            return 0;
        }

        if (cmd_gradcheck->parsed()) {
            RemimoConfig mc;
            mc.d_s = int(cfg_int(m, "d_s", 16));
            mc.n_heads = int(cfg_int(m, "n_heads", 2));
            mc.T = int(cfg_int(m, "T", 2));
            mc.order = int(cfg_int(m, "order", 4));
            mc.n_r = int(cfg_int(m, "n_r", 8));
            const int n_tr = int(cfg_int(m, "n_tr", 3));
            RemimoModel model = make_remimo(mc, seed);
            Rng rng(Rng::mix(seed));
            const CMat H = sample_channel_iid(mc.n_r, n_tr, rng);
            const double sigma = sigma_for_snr(mc.n_r, n_tr, 10.0);
            const MimoInstance inst =
                transmit(H, sample_symbols(n_tr, model.constellation, rng),
                         model.constellation, sigma, rng);
            const std::vector<double> w(size_t(mc.T), 1.0 / double(mc.T));

            model.params.zero_grads();
            {
                Tape tape;
                RemimoGraph g =
                    remimo_build(tape, model, inst.H, inst.y, inst.sigma, true);
                Var loss = remimo_loss(tape, g, inst.x_indices, w);
                tape.backward(loss);
                accumulate_gradients(tape, g, model.params, 1.0);
            }
            auto loss_fn = [&](ParamStore&) {
                Tape tape;
                RemimoGraph g =
                    remimo_build(tape, model, inst.H, inst.y, inst.sigma, false);
                return tape.value(remimo_loss(tape, g, inst.x_indices, w))(0, 0);
            };
            GradCheckReport rep =
                grad_check(model.params, loss_fn, int(cfg_int(m, "coords", 200)), seed);
            std::ostringstream out;
            out << "coordinates_checked," << rep.coordinates_checked << "\n"
                << "max_rel_error," << rep.max_rel_error << "\n"
                << "worst_coordinate," << rep.worst_coordinate << "\n";
            write_output(out_path, out.str());
            return rep.max_rel_error <= 1e-4 ? 0 : 1;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
