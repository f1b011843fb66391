#include "mimolab/config.hpp"

#include <fstream>
#include <stdexcept>

namespace mimolab {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) {
        return "";
    }
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

} // namespace

ConfigMap load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("config: cannot open " + path);
    }
    ConfigMap cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config: " + path + ":" + std::to_string(lineno) +
                                     ": expected key=value");
        }
        cfg[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return cfg;
}

void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides) {
    for (const std::string& o : overrides) {
        const size_t eq = o.find('=');
        if (eq == std::string::npos) {
            throw std::runtime_error("config override '" + o + "': expected key=value");
        }
        cfg[trim(o.substr(0, eq))] = trim(o.substr(eq + 1));
    }
}

std::string cfg_str(const ConfigMap& c, const std::string& key) {
    auto it = c.find(key);
    if (it == c.end()) {
        throw std::runtime_error("config: missing required key '" + key + "'");
    }
    return it->second;
}

std::string cfg_str(const ConfigMap& c, const std::string& key, const std::string& dflt) {
    auto it = c.find(key);
    return it == c.end() ? dflt : it->second;
}

long cfg_int(const ConfigMap& c, const std::string& key) {
    const std::string v = cfg_str(c, key);
    try {
        size_t pos = 0;
        long r = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not an integer: " + v);
    }
}

long cfg_int(const ConfigMap& c, const std::string& key, long dflt) {
    return c.count(key) ? cfg_int(c, key) : dflt;
}

double cfg_double(const ConfigMap& c, const std::string& key) {
    const std::string v = cfg_str(c, key);
    try {
        size_t pos = 0;
        double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw std::runtime_error("config: key '" + key + "' is not a number: " + v);
    }
}

double cfg_double(const ConfigMap& c, const std::string& key, double dflt) {
    return c.count(key) ? cfg_double(c, key) : dflt;
}

} // namespace mimolab
