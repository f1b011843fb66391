#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "mimolab/training.hpp"

using namespace mimolab;

namespace {

TrainConfig tiny_config() {
    TrainConfig cfg;
    cfg.n_r = 8;
    cfg.n_tr_values = {2, 3};
    cfg.order = 4;
    cfg.snr_table[2] = {4.0, 8.0};
    cfg.snr_table[3] = {5.0, 9.0};
    cfg.batch_size = 4;
    cfg.epochs = 1;
    cfg.iters_per_epoch = 5;
    cfg.val_instances_per_snr = 4;
    cfg.d_s = 16;
    cfg.n_heads = 2;
    cfg.T = 2;
    cfg.seed = 11;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("discrete triangular user-count sampling") {
    Rng rng(3);
    CHECK(sample_n_tr({5}, rng) == 5);

    // Values {4..8} with weights 1..5: Pr(8)/Pr(4) = 5, mean = sum k*w / 15.
    std::vector<int> values = {4, 5, 6, 7, 8};
    std::vector<int64_t> counts(9, 0);
    const int n = 1000000;
    for (int k = 0; k < n; ++k) counts[size_t(sample_n_tr(values, rng))]++;
    const double p4 = double(counts[4]) / n;
    const double p8 = double(counts[8]) / n;
    CHECK(std::abs(p8 / p4 - 5.0) <= 0.15); // ratio of weights, 3% per-bin noise
    double mean = 0.0;
    for (int v = 4; v <= 8; ++v) mean += v * double(counts[size_t(v)]) / n;
    const double expect = (4.0 * 1 + 5.0 * 2 + 6.0 * 3 + 7.0 * 4 + 8.0 * 5) / 15.0;
    CHECK(std::abs(mean - expect) <= 0.01);
}

TEST_CASE("continuous triangular correlation sampling") {
    Rng rng(5);
    const double lo = 0.55, hi = 0.75;
    const int n = 1000000;
    double mean = 0.0;
    int64_t below_mid = 0;
    for (int k = 0; k < n; ++k) {
        const double r = sample_rho(lo, hi, rng);
        CHECK(r >= lo);
        CHECK(r <= hi);
        mean += r;
        below_mid += r < lo + 0.5 * (hi - lo);
    }
    mean /= n;
    // Density 2u on [0,1] after mapping: mean at lo + (2/3) span, CDF(mid) = 1/4.
    CHECK(std::abs(mean - (lo + 2.0 / 3.0 * (hi - lo))) <= 0.002);
    CHECK(std::abs(double(below_mid) / n - 0.25) <= 0.005);

    // The range must be nondegenerate and inside [0, 1).
    CHECK_THROWS_AS(sample_rho(0.6, 0.6, rng), std::invalid_argument);
    CHECK_THROWS_AS(sample_rho(0.5, 1.0, rng), std::invalid_argument);
}

TEST_CASE("batch construction") {
    TrainConfig cfg = tiny_config();
    Constellation c = make_constellation(cfg.order);
    Rng rng(7);
    for (int k = 0; k < 20; ++k) {
        std::vector<MimoInstance> batch = make_batch(cfg, c, rng);
        REQUIRE(int(batch.size()) == cfg.batch_size);
        const Eigen::Index n_tr = batch[0].H.cols();
        for (const MimoInstance& inst : batch) {
            CHECK(inst.H.cols() == n_tr); // one user count per batch
            CHECK(inst.H.rows() == cfg.n_r);
            const SnrRange& r = cfg.snr_table.at(int(n_tr));
            CHECK(inst.snr_db >= r.min_db);
            CHECK(inst.snr_db <= r.max_db);
            CHECK(std::abs(inst.sigma -
                           sigma_for_snr(cfg.n_r, int(n_tr), inst.snr_db)) <= 1e-15);
        }
    }

    Rng a(9), b(9);
    std::vector<MimoInstance> b1 = make_batch(cfg, c, a);
    std::vector<MimoInstance> b2 = make_batch(cfg, c, b);
    for (size_t i = 0; i < b1.size(); ++i) {
        CHECK((b1[i].H - b2[i].H).norm() == 0.0);
        CHECK((b1[i].y - b2[i].y).norm() == 0.0);
        CHECK(b1[i].x_indices == b2[i].x_indices);
    }

    TrainConfig missing = cfg;
    missing.snr_table.erase(3);
    Rng r3(1);
    // Some draw eventually picks n_tr = 3 and must throw.
    CHECK_THROWS_AS(
        [&] {
            for (int k = 0; k < 100; ++k) make_batch(missing, c, r3);
        }(),
        std::runtime_error);
}

TEST_CASE("config parsing") {
    ConfigMap m;
    m["n_r"] = "32";
    m["order"] = "16";
    m["n_tr"] = "4..8";
    m["snr_table"] = "4:9:14,5:10:15,6:10:15,7:11:16,8:11:16";
    m["rho"] = "0.55:0.75";
    m["partial"] = "1";
    m["batch_size"] = "128";
    m["d_s"] = "96";
    m["seed"] = "77";
    TrainConfig cfg = train_config_from_map(m);
    CHECK(cfg.n_r == 32);
    CHECK(cfg.order == 16);
    CHECK(cfg.n_tr_values == std::vector<int>{4, 5, 6, 7, 8});
    CHECK(cfg.snr_table.at(4).min_db == 9.0);
    CHECK(cfg.snr_table.at(8).max_db == 16.0);
    CHECK(cfg.use_rho);
    CHECK(cfg.rho_min == 0.55);
    CHECK(cfg.rho_max == 0.75);
    CHECK(cfg.partial);
    CHECK(cfg.batch_size == 128);
    CHECK(cfg.d_s == 96);
    CHECK(cfg.seed == 77);

    ConfigMap list;
    list["n_tr"] = "4,6,8";
    CHECK(train_config_from_map(list).n_tr_values == std::vector<int>{4, 6, 8});
}

TEST_CASE("zero epochs leave the model untouched") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 0;
    RemimoConfig mc;
    mc.d_s = cfg.d_s;
    mc.n_heads = cfg.n_heads;
    mc.T = cfg.T;
    mc.order = cfg.order;
    mc.n_r = cfg.n_r;
    RemimoModel model = make_remimo(mc, 1);
    RemimoModel copy = make_remimo(mc, 1);
    TrainHistory h = train(model, cfg);
    CHECK(h.train_loss.empty());
    CHECK(h.val_loss.empty());
    for (int i = 0; i < model.params.count(); ++i) {
        CHECK((model.params.value(i) - copy.params.value(i)).norm() == 0.0);
    }
}

TEST_CASE("training is deterministic in config and seed") {
    TrainConfig cfg = tiny_config();
    RemimoConfig mc;
    mc.d_s = cfg.d_s;
    mc.n_heads = cfg.n_heads;
    mc.T = cfg.T;
    mc.order = cfg.order;
    mc.n_r = cfg.n_r;

    RemimoModel m1 = make_remimo(mc, 5);
    RemimoModel m2 = make_remimo(mc, 5);
    TrainHistory h1 = train(m1, cfg);
    TrainHistory h2 = train(m2, cfg);
    CHECK(h1.train_loss == h2.train_loss);
    CHECK(h1.val_loss == h2.val_loss);
    for (int i = 0; i < m1.params.count(); ++i) {
        CHECK((m1.params.value(i) - m2.params.value(i)).norm() == 0.0);
    }

    // A different seed takes a different path.
    TrainConfig other = cfg;
    other.seed = 99;
    RemimoModel m3 = make_remimo(mc, 5);
    TrainHistory h3 = train(m3, other);
    CHECK(h1.train_loss != h3.train_loss);
}

TEST_CASE("training history shape and learning-rate schedule") {
    TrainConfig cfg = tiny_config();
    cfg.epochs = 3;
    RemimoConfig mc;
    mc.d_s = cfg.d_s;
    mc.n_heads = cfg.n_heads;
    mc.T = cfg.T;
    mc.order = cfg.order;
    mc.n_r = cfg.n_r;
    RemimoModel model = make_remimo(mc, 2);
    TrainHistory h = train(model, cfg);
    CHECK(int(h.train_loss.size()) == cfg.epochs * cfg.iters_per_epoch);
    CHECK(int(h.val_loss.size()) == cfg.epochs);
    CHECK(int(h.lr.size()) == cfg.epochs);
    CHECK(h.lr[0] == cfg.lr);
    for (double l : h.train_loss) CHECK(std::isfinite(l));
    // Rates only ever shrink by the plateau factor.
    for (size_t e = 1; e < h.lr.size(); ++e) {
        const bool same = h.lr[e] == h.lr[e - 1];
        const bool cut = std::abs(h.lr[e] - h.lr[e - 1] * cfg.plateau_factor) <= 1e-15;
        CHECK((same || cut));
    }
}

TEST_CASE("short training run reduces the loss on a small system") {
    TrainConfig cfg;
    cfg.n_r = 8;
    cfg.n_tr_values = {2, 3, 4};
    cfg.order = 4;
    cfg.snr_table[2] = {3.0, 8.0};
    cfg.snr_table[3] = {4.0, 9.0};
    cfg.snr_table[4] = {5.0, 10.0};
    cfg.batch_size = 8;
    cfg.epochs = 4;
    cfg.iters_per_epoch = 500;
    cfg.val_instances_per_snr = 16;
    cfg.d_s = 16;
    cfg.n_heads = 2;
    cfg.T = 2;
    cfg.lr = 1e-3;
    cfg.seed = 21;
    RemimoConfig mc;
    mc.d_s = cfg.d_s;
    mc.n_heads = cfg.n_heads;
    mc.T = cfg.T;
    mc.order = cfg.order;
    mc.n_r = cfg.n_r;
    RemimoModel model = make_remimo(mc, 1);
    TrainHistory h = train(model, cfg);
    const size_t n = h.train_loss.size();
    double head = 0.0, tail = 0.0;
    for (size_t i = 0; i < 50; ++i) head += h.train_loss[i];
    for (size_t i = n - 50; i < n; ++i) tail += h.train_loss[i];
    head /= 50.0;
    tail /= 50.0;
    CHECK(tail <= 0.5 * head); // the smoke criterion: loss at least halves
    CHECK(h.val_loss.back() < std::log(4.0)); // better than uniform guessing
}

TEST_CASE("checkpoint round trip") {
    RemimoConfig mc;
    mc.d_s = 16;
    mc.n_heads = 2;
    mc.T = 2;
    mc.order = 4;
    mc.n_r = 8;
    RemimoModel model = make_remimo(mc, 9);
    // Touch the optimizer state so moments are nontrivial.
    Rng rng(13);
    for (int i = 0; i < model.params.count(); ++i) {
        Tensor g = Tensor::Zero(model.params.value(i).rows(), model.params.value(i).cols());
        for (int k = 0; k < g.size(); ++k) g(k) = rng.normal();
        model.params.grad(i) = g;
    }
    model.params.adam_step(1e-3);
    TrainMeta meta;
    meta.epoch = 7;
    meta.seed = 42;
    meta.val_loss_history = {1.5, 1.25, 1.125};

    const std::string p1 = "ckpt_roundtrip_a.bin";
    const std::string p2 = "ckpt_roundtrip_b.bin";
    save_checkpoint(model, meta, p1);
    LoadedCheckpoint lc = load_checkpoint(p1);
    CHECK(lc.meta.epoch == 7);
    CHECK(lc.meta.seed == 42);
    CHECK(lc.meta.val_loss_history == meta.val_loss_history);
    CHECK(lc.model.cfg.d_s == mc.d_s);
    CHECK(lc.model.cfg.n_r == mc.n_r);
    REQUIRE(lc.model.params.count() == model.params.count());
    for (int i = 0; i < model.params.count(); ++i) {
        CHECK(lc.model.params.name(i) == model.params.name(i));
        CHECK((lc.model.params.value(i) - model.params.value(i)).norm() == 0.0);
        CHECK((lc.model.params.adam_m(i) - model.params.adam_m(i)).norm() == 0.0);
        CHECK((lc.model.params.adam_v(i) - model.params.adam_v(i)).norm() == 0.0);
    }
    CHECK(lc.model.params.step_count() == model.params.step_count());

    // save -> load -> save produces identical bytes.
    save_checkpoint(lc.model, lc.meta, p2);
    CHECK(slurp(p1) == slurp(p2));

    // Loaded model predicts identically.
    Rng r2(17);
    CMat H = sample_channel_iid(8, 3, r2);
    MimoInstance inst = transmit(H, sample_symbols(3, model.constellation, r2),
                                 model.constellation, 0.3, r2);
    CHECK(detect_remimo(lc.model, H, inst.y, 0.3).hard_indices ==
          detect_remimo(model, H, inst.y, 0.3).hard_indices);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("checkpoint corruption is rejected") {
    RemimoConfig mc;
    mc.d_s = 16;
    mc.n_heads = 2;
    mc.T = 2;
    mc.order = 4;
    mc.n_r = 8;
    RemimoModel model = make_remimo(mc, 9);
    TrainMeta meta;
    const std::string path = "ckpt_corrupt.bin";
    save_checkpoint(model, meta, path);

    // Bad magic line.
    std::string bytes = slurp(path);
    std::string bad = bytes;
    bad[0] = 'X';
    {
        std::ofstream out(path, std::ios::binary);
        out << bad;
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);

    // Truncated payload.
    {
        std::ofstream out(path, std::ios::binary);
        out << bytes.substr(0, bytes.size() - 64);
    }
    CHECK_THROWS_AS(load_checkpoint(path), std::runtime_error);

    // Tensor directory dimension mismatch names the offending tensor.
    std::string edited = bytes;
    const std::string needle = "gamma.W2 ";
    size_t pos = edited.find(needle);
    REQUIRE(pos != std::string::npos);
    // Header lines are "name rows cols"; bump the row count's first digit.
    size_t digit = pos + needle.size();
    edited[digit] = edited[digit] == '9' ? '8' : char(edited[digit] + 1);
    {
        std::ofstream out(path, std::ios::binary);
        out << edited;
    }
    bool named = false;
    try {
        load_checkpoint(path);
    } catch (const std::runtime_error& e) {
        named = std::string(e.what()).find("gamma.W2") != std::string::npos;
    }
    CHECK(named);
    std::remove(path.c_str());

    CHECK_THROWS_AS(load_checkpoint("definitely_missing_ckpt.bin"), std::runtime_error);
}

TEST_CASE("nan loss aborts with context") {
    TrainConfig cfg = tiny_config();
    cfg.lr = 1e200; // blow the parameters up to overflow scale
    cfg.epochs = 2;
    cfg.iters_per_epoch = 20;
    RemimoConfig mc;
    mc.d_s = cfg.d_s;
    mc.n_heads = cfg.n_heads;
    mc.T = cfg.T;
    mc.order = cfg.order;
    mc.n_r = cfg.n_r;
    RemimoModel model = make_remimo(mc, 3);
    bool threw = false;
    try {
        train(model, cfg);
    } catch (const std::runtime_error& e) {
        threw = std::string(e.what()).find("epoch") != std::string::npos;
    }
    CHECK(threw);
}
