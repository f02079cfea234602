#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gfe {

// Raised for malformed config text and for config values that violate an
// operation's preconditions; the CLI maps it to exit status 1.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Keyed configuration text: [section] headers, key = value lines, `#`
// comments, quoted strings, single-line arrays.  Values stay raw strings
// until a typed getter converts them, so 64-bit seeds survive exactly.
class Config {
  public:
    static Config parse(std::string_view text, std::string origin = "<string>") {
        Config c;
        c.origin_ = std::move(origin);
        std::string section;
        std::size_t lineno = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const std::size_t eol = std::min(text.find('\n', pos), text.size());
            std::string_view line = text.substr(pos, eol - pos);
            pos = eol + 1;
            ++lineno;
            line = strip_comment(line, c.where(lineno));
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError(c.where(lineno) + ": unterminated section header");
                section = std::string(trim(line.substr(1, line.size() - 2)));
                if (section.empty())
                    throw ConfigError(c.where(lineno) + ": empty section name");
                continue;
            }
            const std::size_t eq = line.find('=');
            if (eq == std::string_view::npos)
                throw ConfigError(c.where(lineno) + ": expected key = value");
            const std::string key(trim(line.substr(0, eq)));
            if (key.empty()) throw ConfigError(c.where(lineno) + ": empty key");
            Value v = parse_value(trim(line.substr(eq + 1)), c.where(lineno));
            auto [it, fresh] = c.sections_[section].emplace(key, std::move(v));
            if (!fresh)
                throw ConfigError(c.where(lineno) + ": duplicate key [" + section + "]." + key);
        }
        return c;
    }

    static Config from_file(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw ConfigError("config error: cannot open " + path);
        std::ostringstream buf;
        buf << in.rdbuf();
        return parse(buf.str(), path);
    }

    bool has(const std::string& section, const std::string& key) const {
        return find(section, key) != nullptr;
    }

    // Overwrites or inserts; used for CLI flag overrides.
    void set(const std::string& section, const std::string& key, std::string value) {
        Value v;
        v.raw = std::move(value);
        sections_[section][key] = std::move(v);
    }

    std::string get_string(const std::string& section, const std::string& key) const {
        return require(section, key).raw;
    }
    std::string get_string_or(const std::string& section, const std::string& key,
                              std::string fallback) const {
        const Value* v = find(section, key);
        return v ? v->raw : std::move(fallback);
    }

    bool get_bool(const std::string& section, const std::string& key) const {
        const Value& v = require(section, key);
        if (v.raw == "true") return true;
        if (v.raw == "false") return false;
        throw ConfigError(at(section, key) + ": expected true or false, got \"" + v.raw + "\"");
    }
    bool get_bool_or(const std::string& section, const std::string& key, bool fallback) const {
        return has(section, key) ? get_bool(section, key) : fallback;
    }

    std::uint64_t get_u64(const std::string& section, const std::string& key) const {
        return to_u64(require(section, key).raw, at(section, key));
    }
    std::uint64_t get_u64_or(const std::string& section, const std::string& key,
                             std::uint64_t fallback) const {
        return has(section, key) ? get_u64(section, key) : fallback;
    }

    double get_double(const std::string& section, const std::string& key) const {
        return to_double(require(section, key).raw, at(section, key));
    }
    double get_double_or(const std::string& section, const std::string& key,
                         double fallback) const {
        return has(section, key) ? get_double(section, key) : fallback;
    }

    std::vector<double> get_double_list(const std::string& section,
                                        const std::string& key) const {
        const Value& v = require(section, key);
        if (!v.is_array)
            throw ConfigError(at(section, key) + ": expected an array like [1, 2, 3]");
        std::vector<double> out;
        out.reserve(v.items.size());
        for (const std::string& item : v.items) out.push_back(to_double(item, at(section, key)));
        return out;
    }

    std::vector<std::string> get_string_list(const std::string& section,
                                             const std::string& key) const {
        const Value& v = require(section, key);
        if (!v.is_array)
            throw ConfigError(at(section, key) + ": expected an array like [\"a\", \"b\"]");
        return v.items;
    }

    // Keys of one section in lexicographic order (echoing configs verbatim).
    std::vector<std::pair<std::string, std::string>> entries(const std::string& section) const {
        std::vector<std::pair<std::string, std::string>> out;
        auto it = sections_.find(section);
        if (it == sections_.end()) return out;
        for (const auto& [k, v] : it->second) out.emplace_back(k, v.render());
        return out;
    }

    std::vector<std::string> section_names() const {
        std::vector<std::string> out;
        for (const auto& [name, _] : sections_) out.push_back(name);
        return out;
    }

  private:
    struct Value {
        std::string raw;
        std::vector<std::string> items;
        bool is_array = false;
        bool quoted = false;

        std::string render() const {
            if (!is_array) return quoted ? "\"" + raw + "\"" : raw;
            std::string s = "[";
            for (std::size_t i = 0; i < items.size(); ++i) {
                if (i) s += ", ";
                s += items[i];
            }
            return s + "]";
        }
    };

    std::string where(std::size_t lineno) const {
        return origin_ + ":" + std::to_string(lineno);
    }
    std::string at(const std::string& section, const std::string& key) const {
        return "config error: [" + section + "]." + key;
    }

    const Value* find(const std::string& section, const std::string& key) const {
        auto s = sections_.find(section);
        if (s == sections_.end()) return nullptr;
        auto k = s->second.find(key);
        return k == s->second.end() ? nullptr : &k->second;
    }

    const Value& require(const std::string& section, const std::string& key) const {
        const Value* v = find(section, key);
        if (!v) throw ConfigError(at(section, key) + ": missing required key");
        return *v;
    }

    static std::string_view trim(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
            s.remove_suffix(1);
        return s;
    }

    static std::string_view strip_comment(std::string_view line, const std::string& where) {
        bool in_quotes = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') in_quotes = !in_quotes;
            if (line[i] == '#' && !in_quotes) return line.substr(0, i);
        }
        if (in_quotes) throw ConfigError(where + ": unterminated string");
        return line;
    }

    static Value parse_value(std::string_view text, const std::string& where) {
        Value v;
        if (text.empty()) throw ConfigError(where + ": empty value");
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError(where + ": unterminated array");
            v.is_array = true;
            std::string_view body = text.substr(1, text.size() - 2);
            while (true) {
                body = trim(body);
                if (body.empty()) break;
                std::size_t comma;
                if (body.front() == '"') {
                    const std::size_t close = body.find('"', 1);
                    if (close == std::string_view::npos)
                        throw ConfigError(where + ": unterminated string in array");
                    v.items.emplace_back(body.substr(1, close - 1));
                    comma = body.find(',', close + 1);
                } else {
                    comma = body.find(',');
                    v.items.emplace_back(trim(body.substr(0, comma)));
                }
                if (comma == std::string_view::npos) break;
                body.remove_prefix(comma + 1);
            }
            return v;
        }
        if (text.front() == '"') {
            if (text.size() < 2 || text.back() != '"')
                throw ConfigError(where + ": unterminated string");
            std::string_view body = text.substr(1, text.size() - 2);
            if (body.find('"') != std::string_view::npos)
                throw ConfigError(where + ": embedded quotes are not supported");
            v.raw = std::string(body);
            v.quoted = true;
            return v;
        }
        v.raw = std::string(text);
        return v;
    }

    static std::uint64_t to_u64(const std::string& s, const std::string& at) {
        std::uint64_t out = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw ConfigError(at + ": expected a nonnegative integer, got \"" + s + "\"");
        return out;
    }

    static double to_double(const std::string& s, const std::string& at) {
        double out = 0.0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
        if (ec != std::errc{} || ptr != s.data() + s.size())
            throw ConfigError(at + ": expected a number, got \"" + s + "\"");
        return out;
    }

    std::string origin_;
    std::map<std::string, std::map<std::string, Value>> sections_;
};

} // namespace gfe
