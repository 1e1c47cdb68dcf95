#include "fcadl/kvconfig.hpp"

#include "fcadl/error.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>

namespace fcadl {
namespace {

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end) {
        throw Error(Errc::config, "key '" + key + "': cannot parse '" + text + "'");
    }
    return value;
}

} // namespace

KvConfig KvConfig::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::io, "cannot open config '" + path.string() + "'");
    }
    return parse(in, path.string());
}

KvConfig KvConfig::parse(std::istream& in, const std::string& source) {
    KvConfig cfg;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        const std::string body = trim(std::string_view(line).substr(0, hash));
        if (body.empty()) {
            continue;
        }
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw Error(Errc::config, source + ":" + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(std::string_view(body).substr(0, eq));
        const std::string value = trim(std::string_view(body).substr(eq + 1));
        if (key.empty()) {
            throw Error(Errc::config, source + ":" + std::to_string(line_no) + ": empty key");
        }
        if (cfg.entries_.count(key)) {
            throw Error(Errc::config, source + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        }
        cfg.entries_[key] = value;
    }
    return cfg;
}

void KvConfig::set(const std::string& key, const std::string& value) {
    entries_[key] = value;
}

void KvConfig::set_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(Errc::config, "override '" + assignment + "' is not of the form key=value");
    }
    set(trim(std::string_view(assignment).substr(0, eq)), trim(std::string_view(assignment).substr(eq + 1)));
}

std::optional<std::string> KvConfig::get(const std::string& key) const {
    const auto it = entries_.find(key);
    if (it == entries_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
    return get(key).value_or(fallback);
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
    const auto v = get(key);
    return v ? parse_number<long long>(key, *v) : fallback;
}

std::uint64_t KvConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    const auto v = get(key);
    return v ? parse_number<std::uint64_t>(key, *v) : fallback;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
    const auto v = get(key);
    return v ? parse_number<double>(key, *v) : fallback;
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
    const auto v = get(key);
    if (!v) {
        return fallback;
    }
    if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
    if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
    throw Error(Errc::config, "key '" + key + "': expected a boolean, got '" + *v + "'");
}

void KvConfig::reject_unknown(std::initializer_list<std::string_view> known) const {
    for (const auto& [key, value] : entries_) {
        if (std::find(known.begin(), known.end(), key) == known.end()) {
            throw Error(Errc::config, "unknown key '" + key + "'");
        }
    }
}

std::string KvConfig::canonical() const {
    std::string out;
    for (const auto& [key, value] : entries_) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    return out;
}

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace fcadl
