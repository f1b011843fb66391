#pragma once

#include <functional>
#include <map>

#include "mimolab/config.hpp"
#include "mimolab/remimo.hpp"

namespace mimolab {

struct SnrRange {
    double min_db = 0.0;
    double max_db = 0.0;
};

struct TrainConfig {
    int n_r = 16;
    std::vector<int> n_tr_values;                // candidate user counts, ascending
    int order = 4;
    std::map<int, SnrRange> snr_table;           // n_tr -> training SNR range
    bool use_rho = false;
    double rho_min = 0.0, rho_max = 0.0;
    bool partial = false;                        // skip transmit-side correlation
    int batch_size = 64;
    int epochs = 10;
    int iters_per_epoch = 100;
    double lr = 1e-3;
    double plateau_factor = 0.91;
    int plateau_patience = 3;
    double plateau_threshold = 1e-4;
    int val_instances_per_snr = 200;
    uint64_t seed = 1;
    // Model dimensions (the model itself is built from these).
    int d_s = 64;
    int n_heads = 4;
    int T = 6;
    // Optional custom channel draw (used by the attention probe); when empty,
    // channels come from the i.i.d. / Kronecker samplers above.
    std::function<CMat(int n_tr, Rng&)> channel_fn;
};

// Builds a TrainConfig from a flat key=value map. Recognized keys:
//   n_r, order, d_s, n_heads, T, batch_size, epochs, iters_per_epoch, lr,
//   plateau_factor, plateau_patience, plateau_threshold, val_instances_per_snr,
//   seed, n_tr = comma list or "a..b", snr_table = n:lo:hi[,n:lo:hi...],
//   rho = lo:hi, partial = 0|1
TrainConfig train_config_from_map(const ConfigMap& m);

// Discrete triangular draw over the ascending candidate list: the k-th
// smallest value has weight k+1, so the mode sits at the largest value.
int sample_n_tr(const std::vector<int>& values, Rng& rng);

// Continuous triangular with mode at the upper limit (inverse CDF sqrt(u)).
double sample_rho(double rho_min, double rho_max, Rng& rng);

// One mini-batch: a single n_tr shared by all samples, per-sample SNR uniform
// over the table entry for that n_tr. Throws if n_tr has no table entry.
std::vector<MimoInstance> make_batch(const TrainConfig& cfg, const Constellation& c,
                                     Rng& rng);

struct TrainHistory {
    std::vector<double> train_loss; // per iteration (batch mean)
    std::vector<double> val_loss;   // per epoch
    std::vector<double> lr;         // per epoch (rate in effect that epoch)
};

// Full training loop: curriculum batches, Adam with equal per-block loss
// weights, per-epoch validation on a fixed two-system set, multiplicative
// plateau schedule. Deterministic in (cfg, cfg.seed).
TrainHistory train(RemimoModel& model, const TrainConfig& cfg);

// Checkpoint persistence: text header (format version, model config, tensor
// directory) followed by a raw little-endian float64 payload covering values
// and Adam moments. save -> load -> save is byte-identical.
struct TrainMeta {
    int epoch = 0;
    uint64_t seed = 0;
    std::vector<double> val_loss_history;
};

void save_checkpoint(const RemimoModel& model, const TrainMeta& meta,
                     const std::string& path);

struct LoadedCheckpoint {
    RemimoModel model;
    TrainMeta meta;
};
LoadedCheckpoint load_checkpoint(const std::string& path);

} // namespace mimolab
