#include "mimolab/experiments.hpp"

#include <stdexcept>

namespace mimolab {

namespace {

NamedDetector remimo_detector(const RemimoModel& model, const std::string& name) {
    return {name, [&model](const MimoInstance& i) {
                return detect_remimo(model, i.H, i.y, i.sigma).hard_indices;
            }};
}

RemimoModel train_variant(const TrainConfig& base, const std::vector<int>& values,
                          const std::map<int, SnrRange>& extra_snr, uint64_t seed_salt) {
    TrainConfig cfg = base;
    cfg.n_tr_values = values;
    for (const auto& [n, r] : extra_snr) {
        cfg.snr_table[n] = r;
    }
    cfg.seed = Rng::mix(base.seed ^ seed_salt);
    RemimoConfig mc;
    mc.d_s = cfg.d_s;
    mc.n_heads = cfg.n_heads;
    mc.T = cfg.T;
    mc.order = cfg.order;
    mc.n_r = cfg.n_r;
    RemimoModel model = make_remimo(mc, cfg.seed);
    train(model, cfg);
    return model;
}

} // namespace

InterpReport interpolation_experiment(const InterpSpec& spec) {
    if (spec.train_values_I.empty() || spec.train_values_II.empty() ||
        spec.test_values.empty()) {
        throw std::invalid_argument("interpolation_experiment: empty value lists");
    }
    RemimoModel model_I = train_variant(spec.base, spec.train_values_I, {}, 0x49);
    RemimoModel model_II = train_variant(spec.base, spec.train_values_II, {}, 0x4949);

    InterpReport report;
    for (int n_tr : spec.test_values) {
        auto snr_it = spec.test_snr_db.find(n_tr);
        if (snr_it == spec.test_snr_db.end()) {
            throw std::invalid_argument("interpolation_experiment: no test SNR for n_tr=" +
                                        std::to_string(n_tr));
        }
        auto range_it = spec.test_snr_table.find(n_tr);
        if (range_it == spec.test_snr_table.end()) {
            throw std::invalid_argument(
                "interpolation_experiment: no training range for exclusive n_tr=" +
                std::to_string(n_tr));
        }
        RemimoModel model_III = train_variant(spec.base, {n_tr},
                                              {{n_tr, range_it->second}},
                                              0x494949 + uint64_t(n_tr));

        InstanceSampler sampler;
        sampler.n_r = spec.base.n_r;
        sampler.n_tr = n_tr;
        sampler.constellation = make_constellation(spec.base.order);
        sampler.seed = Rng::mix(spec.base.seed ^ 0x65766121ULL ^ uint64_t(n_tr));

        SweepSpec sweep;
        sweep.detectors = {remimo_detector(model_I, "remimo-I"),
                           remimo_detector(model_II, "remimo-II"),
                           remimo_detector(model_III, "remimo-III")};
        sweep.sampler = sampler;
        sweep.snr_grid_db = {snr_it->second};
        sweep.stopping = spec.stopping;
        SweepResult res = snr_sweep(sweep);

        InterpReport::Row row;
        row.n_tr = n_tr;
        row.snr_db = snr_it->second;
        row.variant_I = res.points[0];
        row.variant_II = res.points[1];
        row.variant_III = res.points[2];
        report.rows.push_back(std::move(row));
    }
    return report;
}

CMat orthogonal_group_channel(int n_r, int group_count, int group_size, double mixing,
                              Rng& rng) {
    const int n_tr = group_count * group_size;
    if (n_tr > n_r) {
        throw std::invalid_argument("orthogonal_group_channel: need n_tr <= n_r");
    }
    // Orthonormal columns from the QR factorization of a complex Gaussian.
    CMat G(n_r, n_tr);
    for (int i = 0; i < n_r; ++i) {
        for (int j = 0; j < n_tr; ++j) {
            G(i, j) = cplx(rng.normal(), rng.normal());
        }
    }
    Eigen::HouseholderQR<CMat> qr(G);
    CMat Q = qr.householderQ() * CMat::Identity(n_r, n_tr);

    if (mixing == 0.0) {
        return Q;
    }
    for (int g = 0; g < group_count; ++g) {
        CMat mix(group_size, group_size);
        for (int i = 0; i < group_size; ++i) {
            for (int j = 0; j < group_size; ++j) {
                mix(i, j) = cplx(rng.normal(), rng.normal()) * mixing;
            }
        }
        for (int j = 0; j < group_size; ++j) {
            mix.col(j) /= mix.col(j).norm();
        }
        Q.middleCols(g * group_size, group_size) =
            Q.middleCols(g * group_size, group_size) * mix;
    }
    return Q;
}

ProbeReport attention_probe(const ProbeSpec& spec) {
    const int n_tr = spec.group_count * spec.group_size;
    if (n_tr > spec.n_r) {
        throw std::invalid_argument("attention_probe: group_count*group_size must be <= n_r");
    }

    TrainConfig cfg;
    cfg.n_r = spec.n_r;
    cfg.n_tr_values = {n_tr};
    cfg.order = spec.order;
    cfg.snr_table[n_tr] = spec.train_snr;
    cfg.batch_size = spec.batch_size;
    cfg.epochs = spec.epochs;
    cfg.iters_per_epoch = spec.iters_per_epoch;
    cfg.lr = spec.lr;
    cfg.seed = spec.seed;
    cfg.d_s = spec.d_s;
    cfg.n_heads = 1; // single head so the attention map is directly readable
    cfg.T = spec.T;
    cfg.val_instances_per_snr = 32;
    const double mixing = spec.mixing;
    const int gc = spec.group_count, gs = spec.group_size;
    cfg.channel_fn = [gc, gs, mixing, n_r = spec.n_r](int users, Rng& rng) {
        if (users != gc * gs) {
            throw std::invalid_argument("attention_probe: unexpected user count");
        }
        return orthogonal_group_channel(n_r, gc, gs, mixing, rng);
    };

    RemimoConfig mc;
    mc.d_s = spec.d_s;
    mc.n_heads = 1;
    mc.T = spec.T;
    mc.order = spec.order;
    mc.n_r = spec.n_r;
    ProbeReport report{{}, {}, {}, make_remimo(mc, spec.seed)};
    train(report.model, cfg);

    // Average the per-block attention maps over fresh instances.
    const Constellation c = make_constellation(spec.order);
    const double sigma = sigma_for_snr(spec.n_r, n_tr, spec.probe_snr_db);
    std::vector<Tensor> mean(size_t(spec.T), Tensor::Zero(n_tr, n_tr));
    for (int k = 0; k < spec.probe_instances; ++k) {
        Rng rng = Rng::stream(spec.seed ^ 0x70726f6265ULL, uint64_t(k));
        CMat H = orthogonal_group_channel(spec.n_r, gc, gs, mixing, rng);
        MimoInstance inst = transmit(H, sample_symbols(n_tr, c, rng), c, sigma, rng);
        RemimoOutput out = remimo_forward(report.model, inst.H, inst.y, inst.sigma);
        for (int t = 0; t < spec.T; ++t) {
            mean[size_t(t)] += out.attn[size_t(t)][0];
        }
    }
    for (Tensor& m : mean) {
        m /= double(spec.probe_instances);
    }

    for (int t = 0; t < spec.T; ++t) {
        double intra = 0.0, inter = 0.0;
        int n_intra = 0, n_inter = 0;
        for (int i = 0; i < n_tr; ++i) {
            for (int j = 0; j < n_tr; ++j) {
                if (i / gs == j / gs) {
                    intra += mean[size_t(t)](i, j);
                    ++n_intra;
                } else {
                    inter += mean[size_t(t)](i, j);
                    ++n_inter;
                }
            }
        }
        report.intra.push_back(intra / double(n_intra));
        report.inter.push_back(inter / double(n_inter));
    }
    report.mean_attention = std::move(mean);
    return report;
}

} // namespace mimolab
