#pragma once

#include <functional>

#include "mimolab/detectors.hpp"

namespace mimolab {

struct SerPoint {
    std::string detector;
    int n_tr = 0;
    int n_r = 0;
    int mod = 0;
    double snr_db = 0.0;
    int64_t num_symbols = 0;
    int64_t num_errors = 0;
    int64_t failed_instances = 0;
    double ser() const {
        return num_symbols > 0 ? double(num_errors) / double(num_symbols) : 0.0;
    }
    // One-sigma binomial standard deviation of the SER estimate.
    double sigma() const {
        if (num_symbols == 0) return 0.0;
        const double p = ser();
        return std::sqrt(p * (1.0 - p) / double(num_symbols));
    }
};

struct StoppingRule {
    int64_t min_errors = 200;
    int64_t max_symbols = 1000000;
};

using DetectorFn = std::function<std::vector<int>(const MimoInstance&)>;

struct NamedDetector {
    std::string name;
    DetectorFn fn;
};

// Deterministic instance source: instance k at a given SNR is a pure function
// of (seed, k), so paired comparisons across detectors and across process
// runs see identical streams.
struct InstanceSampler {
    int n_r = 16;
    int n_tr = 4;
    Constellation constellation;
    bool use_corr = false;
    CorrelationSpec corr;
    double est_snr_db = INFINITY; // finite -> detectors see a perturbed channel
    std::function<CMat(int n_tr, Rng&)> channel_fn; // optional custom channel
    uint64_t seed = 1;

    MimoInstance sample(double snr_db, uint64_t index) const;
};

// FNV-style checksum of an instance's (H, y) bytes; used to verify that
// paired sweeps consume identical streams.
uint64_t instance_checksum(const MimoInstance& inst);

SerPoint estimate_ser(const NamedDetector& det, const InstanceSampler& sampler,
                      double snr_db, const StoppingRule& rule);

struct SweepSpec {
    std::vector<NamedDetector> detectors;
    InstanceSampler sampler;
    std::vector<double> snr_grid_db; // strictly increasing
    StoppingRule stopping;
};

struct SweepResult {
    std::vector<SerPoint> points;          // detector-major, then SNR
    std::vector<uint64_t> snr_checksums;   // one per SNR, over the shared stream
};

// Paired Monte-Carlo sweep: at each SNR every detector sees the same
// instances; sampling stops once every detector has min_errors errors or the
// symbol cap is reached. A detector failure on an instance is counted and
// that instance is skipped for that detector only.
SweepResult snr_sweep(const SweepSpec& spec);

// CSV with header detector,n_tr,n_r,mod,snr_db,num_symbols,num_errors,ser.
std::string sweep_csv(const std::vector<SerPoint>& points);

// Classical baseline detectors for a given geometry. names: zf, mf, mmse,
// ml, amp, vblast. Unknown name -> error.
NamedDetector make_classical_detector(const std::string& name, const Constellation& c);

// Finds the SNR inside [lo_db, hi_db] where the detector's SER crosses
// `target_ser`, by bisection (SER is monotone decreasing in SNR). Used to
// calibrate operating points before sweeps and training.
double calibrate_snr(const NamedDetector& det, const InstanceSampler& sampler,
                     double target_ser, double lo_db, double hi_db,
                     const StoppingRule& rule);

} // namespace mimolab
