#pragma once

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>

namespace fcadl {

/// Flat `key = value` configuration with `#` comments. Later set() calls
/// override file values (CLI flags use this).
class KvConfig {
public:
    static KvConfig load(const std::filesystem::path& path);
    static KvConfig parse(std::istream& in, const std::string& source = "<config>");

    void set(const std::string& key, const std::string& value);
    /// Parses "key=value".
    void set_assignment(const std::string& assignment);

    bool contains(const std::string& key) const { return entries_.count(key) != 0; }
    std::optional<std::string> get(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key, long long fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    double get_double(const std::string& key, double fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    /// Throws Errc::config naming the first key not in `known`.
    void reject_unknown(std::initializer_list<std::string_view> known) const;

    const std::map<std::string, std::string>& entries() const noexcept { return entries_; }
    /// Sorted `key=value` lines; stable input for hashing.
    std::string canonical() const;

private:
    std::map<std::string, std::string> entries_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

} // namespace fcadl
