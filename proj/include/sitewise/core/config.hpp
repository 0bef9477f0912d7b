#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "sitewise/core/error.hpp"
#include "sitewise/core/format.hpp"

namespace sitewise {

/// Flat key/value configuration in a TOML-like text form:
///
///     # comment
///     seed = 7
///     [synthetic]
///     ncols = 150        -> key "synthetic.ncols"
///
/// Values may be bare or double-quoted; no arrays or nested tables.
class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& in) {
        KeyValueConfig cfg;
        std::string line;
        std::string section;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto hash = line.find('#');
            std::string_view body = trim(std::string_view(line).substr(0, hash == std::string::npos ? line.size() : hash));
            if (body.empty()) continue;
            if (body.front() == '[') {
                if (body.back() != ']') throw ParseError("unterminated section header", lineno);
                section = std::string(trim(body.substr(1, body.size() - 2)));
                continue;
            }
            auto eq = body.find('=');
            if (eq == std::string_view::npos) throw ParseError("expected 'key = value'", lineno);
            std::string key(trim(body.substr(0, eq)));
            std::string value(trim(body.substr(eq + 1)));
            if (key.empty()) throw ParseError("empty key", lineno);
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            if (!section.empty()) key = section + "." + key;
            cfg.values_[key] = value;
        }
        return cfg;
    }

    static KeyValueConfig load(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw Error("cannot open config " + path.string());
        try {
            return parse(in);
        } catch (const ParseError& e) {
            throw ParseError(path.filename().string() + ": " + e.what(), 0);
        }
    }

    bool has(const std::string& key) const { return values_.count(key) != 0; }

    std::optional<std::string> get(const std::string& key) const {
        auto it = values_.find(key);
        if (it == values_.end()) return std::nullopt;
        return it->second;
    }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        return get(key).value_or(fallback);
    }

    double get_double(const std::string& key, double fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        auto d = parse_double(*v);
        if (!d) throw Error("config key '" + key + "' is not a number: " + *v);
        return *d;
    }

    long long get_int(const std::string& key, long long fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        auto d = parse_int(*v);
        if (!d) throw Error("config key '" + key + "' is not an integer: " + *v);
        return *d;
    }

    bool get_bool(const std::string& key, bool fallback) const {
        auto v = get(key);
        if (!v) return fallback;
        if (*v == "true" || *v == "1" || *v == "yes") return true;
        if (*v == "false" || *v == "0" || *v == "no") return false;
        throw Error("config key '" + key + "' is not a boolean: " + *v);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    const std::map<std::string, std::string>& values() const { return values_; }

    /// Canonical text form: sorted keys, no sections.
    std::string to_string() const {
        std::ostringstream out;
        for (const auto& [k, v] : values_) out << k << " = " << v << "\n";
        return out.str();
    }

private:
    std::map<std::string, std::string> values_;
};

} // namespace sitewise
