#pragma once

#include <map>
#include <string>
#include <vector>

namespace mimolab {

// Flat key=value config file. '#' starts a comment; blank lines are ignored.
// Later assignments (including CLI overrides) win.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap load_config_file(const std::string& path);

// Applies "key=value" override strings on top of a loaded map.
void apply_overrides(ConfigMap& cfg, const std::vector<std::string>& overrides);

// Typed getters; a missing key with no default or an unparsable value throws
// with the key name in the message.
std::string cfg_str(const ConfigMap& c, const std::string& key);
std::string cfg_str(const ConfigMap& c, const std::string& key, const std::string& dflt);
long cfg_int(const ConfigMap& c, const std::string& key);
long cfg_int(const ConfigMap& c, const std::string& key, long dflt);
double cfg_double(const ConfigMap& c, const std::string& key);
double cfg_double(const ConfigMap& c, const std::string& key, double dflt);

} // namespace mimolab
