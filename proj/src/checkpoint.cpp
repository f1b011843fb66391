#include "mimolab/training.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mimolab {

namespace {

constexpr const char* kMagic = "mimolab-checkpoint 1";

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void save_checkpoint(const RemimoModel& model, const TrainMeta& meta,
                     const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    const RemimoConfig& c = model.cfg;
    out << kMagic << "\n";
    out << "dims " << c.d_s << " " << c.n_heads << " " << c.T << " " << c.order << " "
        << c.n_r << " " << c.d_te << "\n";
    out << "step " << model.params.step_count() << "\n";
    out << "epoch " << meta.epoch << "\n";
    out << "seed " << meta.seed << "\n";
    out << "val_history " << meta.val_loss_history.size();
    for (double v : meta.val_loss_history) {
        out << " " << fmt_double(v);
    }
    out << "\n";
    out << "tensors " << model.params.count() << "\n";
    for (int i = 0; i < model.params.count(); ++i) {
        const Tensor& t = model.params.value(i);
        out << model.params.name(i) << " " << t.rows() << " " << t.cols() << "\n";
    }
    int64_t n_doubles = 3 * model.params.scalar_count();
    out << "payload " << n_doubles << "\n";
    ParamStore& p = const_cast<ParamStore&>(model.params);
    for (int i = 0; i < model.params.count(); ++i) {
        const auto write_tensor = [&out](const Tensor& t) {
            out.write(reinterpret_cast<const char*>(t.data()),
                      std::streamsize(sizeof(double)) * t.size());
        };
        write_tensor(p.value(i));
        write_tensor(p.adam_m(i));
        write_tensor(p.adam_v(i));
    }
    if (!out) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    std::string line;
    if (!std::getline(in, line) || line != kMagic) {
        throw std::runtime_error("load_checkpoint: bad magic / unsupported version in " +
                                 path);
    }
    auto expect = [&](const char* key) -> std::string {
        if (!std::getline(in, line) || line.rfind(key, 0) != 0) {
            throw std::runtime_error(std::string("load_checkpoint: expected '") + key +
                                     "' line");
        }
        return line.substr(std::string(key).size() + 1);
    };

    RemimoConfig cfg;
    {
        const std::string v = expect("dims");
        if (std::sscanf(v.c_str(), "%d %d %d %d %d %d", &cfg.d_s, &cfg.n_heads, &cfg.T,
                        &cfg.order, &cfg.n_r, &cfg.d_te) != 6) {
            throw std::runtime_error("load_checkpoint: malformed dims line");
        }
    }
    int64_t step = 0;
    if (std::sscanf(expect("step").c_str(), "%" SCNd64, &step) != 1) {
        throw std::runtime_error("load_checkpoint: malformed step line");
    }
    TrainMeta meta;
    meta.epoch = std::stoi(expect("epoch"));
    meta.seed = std::stoull(expect("seed"));
    {
        std::istringstream hs(expect("val_history"));
        size_t n = 0;
        hs >> n;
        meta.val_loss_history.resize(n);
        for (size_t i = 0; i < n; ++i) {
            hs >> meta.val_loss_history[i];
        }
        if (!hs) {
            throw std::runtime_error("load_checkpoint: malformed val_history line");
        }
    }

    LoadedCheckpoint loaded{make_remimo(cfg, 0), meta};
    ParamStore& p = loaded.model.params;
    p.set_step_count(step);

    const int count = std::stoi(expect("tensors"));
    if (count != p.count()) {
        throw std::runtime_error("load_checkpoint: tensor count mismatch");
    }
    for (int i = 0; i < count; ++i) {
        if (!std::getline(in, line)) {
            throw std::runtime_error("load_checkpoint: truncated tensor directory");
        }
        std::istringstream ls(line);
        std::string name;
        Eigen::Index rows = 0, cols = 0;
        ls >> name >> rows >> cols;
        if (name != p.name(i)) {
            throw std::runtime_error("load_checkpoint: unexpected tensor '" + name +
                                     "' (expected '" + p.name(i) + "')");
        }
        if (rows != p.value(i).rows() || cols != p.value(i).cols()) {
            throw std::runtime_error("load_checkpoint: shape mismatch for tensor '" +
                                     name + "'");
        }
    }
    int64_t n_doubles = 0;
    if (std::sscanf(expect("payload").c_str(), "%" SCNd64, &n_doubles) != 1 ||
        n_doubles != 3 * p.scalar_count()) {
        throw std::runtime_error("load_checkpoint: payload size mismatch");
    }
    for (int i = 0; i < count; ++i) {
        const auto read_tensor = [&in, &path](Tensor& t) {
            in.read(reinterpret_cast<char*>(t.data()),
                    std::streamsize(sizeof(double)) * t.size());
            if (in.gcount() != std::streamsize(sizeof(double)) * t.size()) {
                throw std::runtime_error("load_checkpoint: truncated payload in " + path);
            }
        };
        read_tensor(p.value(i));
        read_tensor(p.adam_m(i));
        read_tensor(p.adam_v(i));
    }
    return loaded;
}

} // namespace mimolab
