#include "mimolab/training.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace mimolab {

namespace {

std::vector<int> parse_n_tr_list(const std::string& s) {
    std::vector<int> values;
    const size_t dots = s.find("..");
    if (dots != std::string::npos) {
        const int a = std::stoi(s.substr(0, dots));
        const int b = std::stoi(s.substr(dots + 2));
        for (int n = a; n <= b; ++n) {
            values.push_back(n);
        }
        return values;
    }
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        values.push_back(std::stoi(tok));
    }
    return values;
}

} // namespace

TrainConfig train_config_from_map(const ConfigMap& m) {
    TrainConfig c;
    c.n_r = int(cfg_int(m, "n_r", c.n_r));
    c.order = int(cfg_int(m, "order", c.order));
    c.d_s = int(cfg_int(m, "d_s", c.d_s));
    c.n_heads = int(cfg_int(m, "n_heads", c.n_heads));
    c.T = int(cfg_int(m, "T", c.T));
    c.batch_size = int(cfg_int(m, "batch_size", c.batch_size));
    c.epochs = int(cfg_int(m, "epochs", c.epochs));
    c.iters_per_epoch = int(cfg_int(m, "iters_per_epoch", c.iters_per_epoch));
    c.lr = cfg_double(m, "lr", c.lr);
    c.plateau_factor = cfg_double(m, "plateau_factor", c.plateau_factor);
    c.plateau_patience = int(cfg_int(m, "plateau_patience", c.plateau_patience));
    c.plateau_threshold = cfg_double(m, "plateau_threshold", c.plateau_threshold);
    c.val_instances_per_snr = int(cfg_int(m, "val_instances_per_snr", c.val_instances_per_snr));
    c.seed = uint64_t(cfg_int(m, "seed", 1));
    c.n_tr_values = parse_n_tr_list(cfg_str(m, "n_tr", "4..8"));
    for (int n : c.n_tr_values) {
        if (n < 1 || n > c.n_r) {
            throw std::runtime_error("config: n_tr value out of [1, n_r]");
        }
    }
    const std::string table = cfg_str(m, "snr_table", "");
    if (!table.empty()) {
        std::stringstream ss(table);
        std::string entry;
        while (std::getline(ss, entry, ',')) {
            std::stringstream es(entry);
            std::string n, lo, hi;
            if (!std::getline(es, n, ':') || !std::getline(es, lo, ':') ||
                !std::getline(es, hi, ':')) {
                throw std::runtime_error("config: snr_table entries must be n:lo:hi");
            }
            SnrRange r{std::stod(lo), std::stod(hi)};
            if (r.min_db >= r.max_db) {
                throw std::runtime_error("config: snr_table needs lo < hi");
            }
            c.snr_table[std::stoi(n)] = r;
        }
    }
    const std::string rho = cfg_str(m, "rho", "");
    if (!rho.empty()) {
        const size_t colon = rho.find(':');
        if (colon == std::string::npos) {
            throw std::runtime_error("config: rho must be lo:hi");
        }
        c.use_rho = true;
        c.rho_min = std::stod(rho.substr(0, colon));
        c.rho_max = std::stod(rho.substr(colon + 1));
    }
    c.partial = cfg_int(m, "partial", 0) != 0;
    return c;
}

int sample_n_tr(const std::vector<int>& values, Rng& rng) {
    if (values.empty()) {
        throw std::invalid_argument("sample_n_tr: empty value list");
    }
    const size_t k = values.size();
    const uint64_t total = uint64_t(k) * (k + 1) / 2;
    uint64_t u = rng.uniform_int(total);
    for (size_t i = 0; i < k; ++i) {
        const uint64_t w = uint64_t(i) + 1;
        if (u < w) {
            return values[i];
        }
        u -= w;
    }
    return values.back();
}

double sample_rho(double rho_min, double rho_max, Rng& rng) {
    if (!(rho_min >= 0.0 && rho_min < rho_max && rho_max < 1.0)) {
        throw std::invalid_argument("sample_rho: need 0 <= rho_min < rho_max < 1");
    }
    return rho_min + (rho_max - rho_min) * std::sqrt(rng.uniform());
}

std::vector<MimoInstance> make_batch(const TrainConfig& cfg, const Constellation& c,
                                     Rng& rng) {
    const int n_tr = sample_n_tr(cfg.n_tr_values, rng);
    auto it = cfg.snr_table.find(n_tr);
    if (it == cfg.snr_table.end()) {
        throw std::runtime_error("make_batch: no snr_table entry for n_tr=" +
                                 std::to_string(n_tr));
    }
    CorrelationSpec corr;
    corr.partial = cfg.partial;
    if (cfg.use_rho) {
        const double rho = sample_rho(cfg.rho_min, cfg.rho_max, rng);
        corr.rho_rx = rho;
        corr.rho_tx = rho;
    }

    std::vector<MimoInstance> batch;
    batch.reserve(size_t(cfg.batch_size));
    for (int s = 0; s < cfg.batch_size; ++s) {
        const double snr_db =
            it->second.min_db + (it->second.max_db - it->second.min_db) * rng.uniform();
        CMat H;
        if (cfg.channel_fn) {
            H = cfg.channel_fn(n_tr, rng);
        } else if (cfg.use_rho) {
            H = sample_channel_kronecker(cfg.n_r, n_tr, corr, rng);
        } else {
            H = sample_channel_iid(cfg.n_r, n_tr, rng);
        }
        const double sigma = sigma_for_snr(cfg.n_r, n_tr, snr_db);
        MimoInstance inst = transmit(H, sample_symbols(n_tr, c, rng), c, sigma, rng);
        inst.snr_db = snr_db;
        batch.push_back(std::move(inst));
    }
    return batch;
}

namespace {

// Per-epoch validation set: the lowest and highest configured user counts,
// three SNR points each across that system's training range.
std::vector<MimoInstance> build_validation_set(const TrainConfig& cfg,
                                               const Constellation& c) {
    std::vector<MimoInstance> val;
    std::vector<int> systems = {cfg.n_tr_values.front()};
    if (cfg.n_tr_values.back() != systems[0]) {
        systems.push_back(cfg.n_tr_values.back());
    }
    uint64_t idx = 0;
    for (int n_tr : systems) {
        auto it = cfg.snr_table.find(n_tr);
        if (it == cfg.snr_table.end()) {
            throw std::runtime_error("train: no snr_table entry for validation n_tr=" +
                                     std::to_string(n_tr));
        }
        const double snrs[3] = {it->second.min_db,
                                0.5 * (it->second.min_db + it->second.max_db),
                                it->second.max_db};
        for (double snr_db : snrs) {
            for (int i = 0; i < cfg.val_instances_per_snr; ++i) {
                Rng rng = Rng::stream(cfg.seed ^ 0x76616c5f73657421ULL, idx++);
                CMat H;
                if (cfg.channel_fn) {
                    H = cfg.channel_fn(n_tr, rng);
                } else if (cfg.use_rho) {
                    CorrelationSpec corr;
                    corr.partial = cfg.partial;
                    const double rho = sample_rho(cfg.rho_min, cfg.rho_max, rng);
                    corr.rho_rx = rho;
                    corr.rho_tx = rho;
                    H = sample_channel_kronecker(cfg.n_r, n_tr, corr, rng);
                } else {
                    H = sample_channel_iid(cfg.n_r, n_tr, rng);
                }
                const double sigma = sigma_for_snr(cfg.n_r, n_tr, snr_db);
                val.push_back(transmit(H, sample_symbols(n_tr, c, rng), c, sigma, rng));
            }
        }
    }
    return val;
}

double sample_loss(const RemimoModel& model, const MimoInstance& inst,
                   const std::vector<double>& weights) {
    Tape tape;
    RemimoGraph g = remimo_build(tape, model, inst.H, inst.y, inst.sigma, false);
    Var loss = remimo_loss(tape, g, inst.x_indices, weights);
    return tape.value(loss)(0, 0);
}

} // namespace

TrainHistory train(RemimoModel& model, const TrainConfig& cfg) {
    if (model.cfg.n_r != cfg.n_r || model.cfg.order != cfg.order) {
        throw std::invalid_argument("train: model geometry does not match config");
    }
    const std::vector<double> weights(size_t(model.cfg.T), 1.0 / double(model.cfg.T));
    const Constellation& c = model.constellation;

    TrainHistory history;
    if (cfg.epochs == 0) {
        return history;
    }
    const std::vector<MimoInstance> val_set = build_validation_set(cfg, c);

    double lr = cfg.lr;
    double best_val = INFINITY;
    int wait = 0;
    const double inv_batch = 1.0 / double(cfg.batch_size);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        history.lr.push_back(lr);
        for (int iter = 0; iter < cfg.iters_per_epoch; ++iter) {
            const uint64_t global_iter =
                uint64_t(epoch) * uint64_t(cfg.iters_per_epoch) + uint64_t(iter);
            Rng rng = Rng::stream(cfg.seed, global_iter);
            const std::vector<MimoInstance> batch = make_batch(cfg, c, rng);

            // One tape per batch: parameter leaves are pushed once and shared
            // by every sample graph, and a single backward pass covers the
            // whole batch.
            Tape tape;
            const RemimoParamVars pv = remimo_param_vars(tape, model, true);
            double batch_loss = 0.0;
            Var total{};
            for (size_t s = 0; s < batch.size(); ++s) {
                const MimoInstance& inst = batch[s];
                RemimoGraph g = remimo_build(tape, model, pv, inst.H, inst.y, inst.sigma);
                Var loss = remimo_loss(tape, g, inst.x_indices, weights);
                const double l = tape.value(loss)(0, 0);
                if (!std::isfinite(l)) {
                    throw std::runtime_error(
                        "train: loss is not finite at epoch " + std::to_string(epoch) +
                        " iter " + std::to_string(iter));
                }
                batch_loss += l;
                total = (s == 0) ? loss : tape.add(total, loss);
            }
            tape.backward(tape.scale(total, inv_batch));
            model.params.zero_grads();
            accumulate_gradients(tape, pv, model.params, 1.0);
            model.params.adam_step(lr);
            history.train_loss.push_back(batch_loss * inv_batch);
        }

        double val_loss = 0.0;
        for (const MimoInstance& inst : val_set) {
            val_loss += sample_loss(model, inst, weights);
        }
        val_loss /= double(val_set.size());
        history.val_loss.push_back(val_loss);

        // ReduceLROnPlateau with relative threshold.
        if (val_loss < best_val * (1.0 - cfg.plateau_threshold)) {
            best_val = val_loss;
            wait = 0;
        } else {
            ++wait;
            if (wait >= cfg.plateau_patience) {
                lr *= cfg.plateau_factor;
                wait = 0;
            }
        }
    }
    return history;
}

} // namespace mimolab
