#include "sls/config_file.hpp"

#include <fstream>
#include <sstream>

#include "sls/errors.hpp"

namespace sls {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

ConfigFile ConfigFile::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

ConfigFile ConfigFile::parse(const std::string& text) {
    ConfigFile cfg;
    std::stringstream ss(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(ss, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) +
                              " is not 'key = value': " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("config line " + std::to_string(line_no) + " has empty key");
        cfg.entries_[key] = value;
    }
    return cfg;
}

void ConfigFile::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

bool ConfigFile::has(const std::string& key) const {
    return entries_.find(key) != entries_.end();
}

std::string ConfigFile::get_string(const std::string& key,
                                   const std::string& fallback) const {
    auto it = entries_.find(key);
    return it == entries_.end() ? fallback : it->second;
}

std::string ConfigFile::require_string(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("missing required config key: " + key);
    return it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "' is not a number: " + it->second);
    }
}

int64_t ConfigFile::get_int(const std::string& key, int64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return std::stoll(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
    }
}

uint64_t ConfigFile::get_uint(const std::string& key, uint64_t fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    try {
        return std::stoull(it->second);
    } catch (...) {
        throw ConfigError("config key '" + key + "' is not an unsigned integer: " +
                          it->second);
    }
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: " + v);
}

std::vector<std::string> ConfigFile::get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = entries_.find(key);
    if (it == entries_.end()) return out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::vector<std::size_t> ConfigFile::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& s : get_list(key)) {
        try {
            out.push_back(static_cast<std::size_t>(std::stoull(s)));
        } catch (...) {
            throw ConfigError("config key '" + key + "' has a non-integer entry: " + s);
        }
    }
    return out;
}

std::vector<double> ConfigFile::get_double_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) {
        try {
            out.push_back(std::stod(s));
        } catch (...) {
            throw ConfigError("config key '" + key + "' has a non-numeric entry: " + s);
        }
    }
    return out;
}

} // namespace sls
