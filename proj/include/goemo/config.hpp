#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace goemo {

struct ConfigKey {
    std::string name;
    std::string default_value;  // empty means unset
    std::string help;
};

/// Resolved settings of one command. Keys outside the command's schema are
/// rejected wherever they come from.
class RunConfig {
   public:
    RunConfig(std::string command, std::vector<ConfigKey> schema);

    const std::string& command() const noexcept { return command_; }
    const std::vector<ConfigKey>& schema() const noexcept { return schema_; }

    /// `key=value` lines; blank lines and lines starting with '#' are
    /// ignored. A key may appear once per file.
    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);

    bool has(const std::string& key) const;  // set to a non-empty value
    const std::string& get(const std::string& key) const;
    /// Like get() but throws when the value is empty.
    const std::string& require(const std::string& key) const;
    std::size_t get_size(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    /// Comma-separated, empty items dropped.
    std::vector<std::string> get_list(const std::string& key) const;

    /// Every schema key in order, as `key=value`.
    std::string render() const;
    void save(const std::string& path) const;

   private:
    const ConfigKey& key_info(const std::string& key) const;

    std::string command_;
    std::vector<ConfigKey> schema_;
    std::map<std::string, std::string> values_;
};

}  // namespace goemo
