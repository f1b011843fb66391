#pragma once

#include "mimolab/ser.hpp"
#include "mimolab/training.hpp"

namespace mimolab {

// Interpolation / extrapolation study. Variant I trains on `train_values_I`
// (typically every alternate user count), variant II on `train_values_II`
// (the full range), and variant III trains one exclusive model per test point.
struct InterpSpec {
    TrainConfig base;                 // shared training hyperparameters
    std::vector<int> train_values_I;
    std::vector<int> train_values_II;
    std::vector<int> test_values;
    std::map<int, double> test_snr_db;      // evaluation SNR per test n_tr
    std::map<int, SnrRange> test_snr_table; // training range per test n_tr (variant III)
    StoppingRule stopping;
};

struct InterpReport {
    struct Row {
        int n_tr = 0;
        double snr_db = 0.0;
        SerPoint variant_I, variant_II, variant_III;
    };
    std::vector<Row> rows;
};

InterpReport interpolation_experiment(const InterpSpec& spec);

// Attention probe: channel columns are orthonormal, partitioned into groups,
// each group mixed by a random full-rank matrix with unit-norm columns, so
// interference exists only inside a group. Trains a simplified single-head
// model and reports per-block attention statistics.
struct ProbeSpec {
    int n_r = 32;
    int group_count = 3;
    int group_size = 4;
    int order = 4;
    int d_s = 32;
    int T = 8;
    SnrRange train_snr{8.0, 13.0};
    int batch_size = 32;
    int epochs = 4;
    int iters_per_epoch = 100;
    double lr = 1e-3;
    int probe_instances = 64;      // instances averaged for the heatmaps
    double probe_snr_db = 10.0;
    uint64_t seed = 7;
    double mixing = 1.0;           // 0 keeps the groups orthogonal (identity mix)
};

struct ProbeReport {
    std::vector<Tensor> mean_attention; // per block, n_tr x n_tr, rows sum to 1
    std::vector<double> intra;          // per block mean intra-group attention
    std::vector<double> inter;          // per block mean inter-group attention
    RemimoModel model;
};

// Channel construction used by the probe (exposed for tests).
CMat orthogonal_group_channel(int n_r, int group_count, int group_size, double mixing,
                              Rng& rng);

ProbeReport attention_probe(const ProbeSpec& spec);

} // namespace mimolab
