#include "goemo/config.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "goemo/error.hpp"

namespace goemo {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
    T out{};
    const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc{} || p != value.data() + value.size() || value.empty())
        throw ValidationError("config key " + key + ": expected a non-negative integer, got '" + value + "'");
    return out;
}

}  // namespace

RunConfig::RunConfig(std::string command, std::vector<ConfigKey> schema)
    : command_(std::move(command)), schema_(std::move(schema)) {
    for (const auto& k : schema_) values_[k.name] = k.default_value;
}

const ConfigKey& RunConfig::key_info(const std::string& key) const {
    for (const auto& k : schema_) {
        if (k.name == key) return k;
    }
    throw ValidationError("unknown config key '" + key + "' for command " + command_);
}

void RunConfig::load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read config file: " + path);
    std::set<std::string> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError(path + ": expected key=value", lineno);
        const std::string key = trim(t.substr(0, eq));
        if (!seen.insert(key).second) throw ParseError(path + ": key '" + key + "' given twice", lineno);
        try {
            set(key, trim(t.substr(eq + 1)));
        } catch (const ValidationError& e) {
            throw ParseError(path + ": " + e.what(), lineno);
        }
    }
}

void RunConfig::set(const std::string& key, const std::string& value) {
    key_info(key);
    values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return !get(key).empty(); }

const std::string& RunConfig::get(const std::string& key) const {
    key_info(key);
    return values_.at(key);
}

const std::string& RunConfig::require(const std::string& key) const {
    const std::string& v = get(key);
    if (v.empty()) throw ValidationError("config key '" + key + "' is required for " + command_);
    return v;
}

std::size_t RunConfig::get_size(const std::string& key) const { return parse_integer<std::size_t>(key, require(key)); }

std::uint64_t RunConfig::get_u64(const std::string& key) const {
    return parse_integer<std::uint64_t>(key, require(key));
}

double RunConfig::get_double(const std::string& key) const {
    const std::string& v = require(key);
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw ValidationError("config key " + key + ": expected a number, got '" + v + "'");
    return out;
}

bool RunConfig::get_bool(const std::string& key) const {
    const std::string& v = require(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config key " + key + ": expected true or false, got '" + v + "'");
}

std::vector<std::string> RunConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::istringstream in(get(key));
    std::string item;
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string RunConfig::render() const {
    std::ostringstream out;
    out << "# " << command_ << '\n';
    for (const auto& k : schema_) out << k.name << '=' << values_.at(k.name) << '\n';
    return out.str();
}

void RunConfig::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write config: " + path);
    out << render();
}

}  // namespace goemo
