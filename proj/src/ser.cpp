#include "mimolab/ser.hpp"

#include <cstring>
#include <iostream>
#include <sstream>

namespace mimolab {

MimoInstance InstanceSampler::sample(double snr_db, uint64_t index) const {
    Rng rng = Rng::stream(seed, index);
    CMat H;
    if (channel_fn) {
        H = channel_fn(n_tr, rng);
    } else if (use_corr) {
        H = sample_channel_kronecker(n_r, n_tr, corr, rng);
    } else {
        H = sample_channel_iid(n_r, n_tr, rng);
    }
    const double sigma = sigma_for_snr(n_r, n_tr, snr_db);
    MimoInstance inst =
        transmit(H, sample_symbols(n_tr, constellation, rng), constellation, sigma, rng);
    inst.snr_db = snr_db;
    if (std::isfinite(est_snr_db)) {
        // Detectors work from a noisy channel estimate; y was produced by the
        // true channel.
        inst.H = perturb_channel(inst.H, est_snr_db, rng);
    }
    return inst;
}

uint64_t instance_checksum(const MimoInstance& inst) {
    uint64_t h = 1469598103934665603ULL;
    auto mix_bytes = [&h](const void* p, size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ULL;
        }
    };
    mix_bytes(inst.H.data(), sizeof(cplx) * size_t(inst.H.size()));
    mix_bytes(inst.y.data(), sizeof(cplx) * size_t(inst.y.size()));
    return h;
}

namespace {

int64_t count_errors(const std::vector<int>& detected, const std::vector<int>& truth) {
    int64_t e = 0;
    for (size_t i = 0; i < truth.size(); ++i) {
        e += detected[i] != truth[i] ? 1 : 0;
    }
    return e;
}

} // namespace

SerPoint estimate_ser(const NamedDetector& det, const InstanceSampler& sampler,
                      double snr_db, const StoppingRule& rule) {
    SerPoint pt;
    pt.detector = det.name;
    pt.n_tr = sampler.n_tr;
    pt.n_r = sampler.n_r;
    pt.mod = sampler.constellation.order;
    pt.snr_db = snr_db;
    uint64_t index = 0;
    // Failed instances count toward the symbol cap so a detector that always
    // throws still terminates.
    while (pt.num_errors < rule.min_errors &&
           pt.num_symbols + int64_t(sampler.n_tr) * pt.failed_instances <
               rule.max_symbols) {
        const MimoInstance inst = sampler.sample(snr_db, index++);
        try {
            const std::vector<int> hard = det.fn(inst);
            pt.num_errors += count_errors(hard, inst.x_indices);
            pt.num_symbols += int64_t(inst.x_indices.size());
        } catch (const std::exception&) {
            ++pt.failed_instances;
        }
    }
    return pt;
}

SweepResult snr_sweep(const SweepSpec& spec) {
    for (size_t i = 1; i < spec.snr_grid_db.size(); ++i) {
        if (spec.snr_grid_db[i] <= spec.snr_grid_db[i - 1]) {
            throw std::invalid_argument("snr_sweep: SNR grid must be strictly increasing");
        }
    }
    const size_t nd = spec.detectors.size();
    SweepResult result;
    std::vector<std::vector<SerPoint>> grid(
        nd, std::vector<SerPoint>(spec.snr_grid_db.size()));

    for (size_t si = 0; si < spec.snr_grid_db.size(); ++si) {
        const double snr_db = spec.snr_grid_db[si];
        for (size_t d = 0; d < nd; ++d) {
            SerPoint& pt = grid[d][si];
            pt.detector = spec.detectors[d].name;
            pt.n_tr = spec.sampler.n_tr;
            pt.n_r = spec.sampler.n_r;
            pt.mod = spec.sampler.constellation.order;
            pt.snr_db = snr_db;
        }
        // The stream checksum covers a fixed prefix so it only depends on
        // (sampler, snr), never on which detectors consumed how much; sweeps
        // over different detector sets can then be verified as paired.
        uint64_t checksum = 0;
        for (uint64_t k = 0; k < 64; ++k) {
            const MimoInstance inst = spec.sampler.sample(snr_db, k);
            checksum ^= instance_checksum(inst) + 0x9e3779b97f4a7c15ULL +
                        (checksum << 6) + (checksum >> 2);
        }
        uint64_t index = 0;
        auto resolved = [&](const SerPoint& pt) {
            return pt.num_errors >= spec.stopping.min_errors ||
                   pt.num_symbols + int64_t(spec.sampler.n_tr) * pt.failed_instances >=
                       spec.stopping.max_symbols;
        };
        auto need_more = [&]() {
            for (size_t d = 0; d < nd; ++d) {
                if (!resolved(grid[d][si])) return true;
            }
            return false;
        };
        while (need_more()) {
            const MimoInstance inst = spec.sampler.sample(snr_db, index++);
            for (size_t d = 0; d < nd; ++d) {
                SerPoint& pt = grid[d][si];
                if (resolved(pt)) continue;
                try {
                    const std::vector<int> hard = spec.detectors[d].fn(inst);
                    pt.num_errors += count_errors(hard, inst.x_indices);
                    pt.num_symbols += int64_t(inst.x_indices.size());
                } catch (const std::exception&) {
                    ++pt.failed_instances;
                }
            }
        }
        result.snr_checksums.push_back(checksum);
    }
    for (size_t d = 0; d < nd; ++d) {
        for (const SerPoint& pt : grid[d]) {
            if (pt.failed_instances > 0) {
                std::cerr << "sweep: detector " << pt.detector << " failed on "
                          << pt.failed_instances << " instances at " << pt.snr_db
                          << " dB\n";
            }
            result.points.push_back(pt);
        }
    }
    return result;
}

std::string sweep_csv(const std::vector<SerPoint>& points) {
    std::ostringstream out;
    out << "detector,n_tr,n_r,mod,snr_db,num_symbols,num_errors,ser\n";
    char buf[64];
    for (const SerPoint& p : points) {
        std::snprintf(buf, sizeof(buf), "%.6g", p.snr_db);
        out << p.detector << "," << p.n_tr << "," << p.n_r << "," << p.mod << "," << buf
            << "," << p.num_symbols << "," << p.num_errors << ",";
        std::snprintf(buf, sizeof(buf), "%.8g", p.ser());
        out << buf << "\n";
    }
    return out.str();
}

NamedDetector make_classical_detector(const std::string& name, const Constellation& c) {
    if (name == "zf") {
        return {name, [c](const MimoInstance& i) {
                    return detect_zf(i.H, i.y, c).hard_indices;
                }};
    }
    if (name == "mf") {
        return {name, [c](const MimoInstance& i) {
                    return detect_mf(i.H, i.y, c).hard_indices;
                }};
    }
    if (name == "mmse") {
        return {name, [c](const MimoInstance& i) {
                    return detect_mmse(i.H, i.y, i.sigma, c).hard_indices;
                }};
    }
    if (name == "ml") {
        return {name, [c](const MimoInstance& i) {
                    return detect_ml(i.H, i.y, c).hard_indices;
                }};
    }
    if (name == "amp") {
        return {name, [c](const MimoInstance& i) {
                    return detect_amp(i.H, i.y, i.sigma, c).hard_indices;
                }};
    }
    if (name == "vblast") {
        return {name, [c](const MimoInstance& i) {
                    return detect_vblast(i.H, i.y, i.sigma, c).hard_indices;
                }};
    }
    throw std::invalid_argument("unknown detector '" + name + "'");
}

double calibrate_snr(const NamedDetector& det, const InstanceSampler& sampler,
                     double target_ser, double lo_db, double hi_db,
                     const StoppingRule& rule) {
    double lo = lo_db, hi = hi_db;
    while (hi - lo > 0.25) {
        const double mid = 0.5 * (lo + hi);
        const SerPoint pt = estimate_ser(det, sampler, mid, rule);
        if (pt.ser() > target_ser) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

} // namespace mimolab
