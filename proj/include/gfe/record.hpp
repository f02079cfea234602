#pragma once

#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stats.hpp"

namespace gfe {

// Everything one experiment run reports: point estimates, intervals,
// fitted constants, and pass/fail flags, plus enough provenance to rerun
// it.  Wall-clock time is kept out of the persisted forms so that reruns
// of the same config produce identical bytes; the CLI reports it on stderr.
struct ResultRecord {
    std::string experiment;
    std::vector<std::pair<std::string, std::string>> config_echo; // "section.key" -> value
    std::uint64_t seed = 0;
    std::uint64_t trials = 0;
    unsigned workers = 1;
    std::vector<std::pair<std::string, double>> estimates;
    std::vector<std::pair<std::string, Interval>> intervals; // subset of estimates, by name
    std::vector<std::pair<std::string, double>> constants;
    std::vector<std::pair<std::string, bool>> checks;
    std::vector<std::pair<std::string, std::string>> notes;
    double wall_seconds = 0.0; // stderr only, never serialized
    std::string rng = "philox4x64-10";

    void put(const std::string& name, double value) { estimates.emplace_back(name, value); }
    void put(const std::string& name, double value, Interval ci) {
        estimates.emplace_back(name, value);
        intervals.emplace_back(name, ci);
    }
    void put_constant(const std::string& name, double value) {
        constants.emplace_back(name, value);
    }
    void put_check(const std::string& name, bool pass) { checks.emplace_back(name, pass); }
    void put_note(const std::string& name, std::string text) {
        notes.emplace_back(name, std::move(text));
    }

    bool all_checks_pass() const {
        for (const auto& [_, ok] : checks)
            if (!ok) return false;
        return true;
    }
};

namespace detail {

// One renderer for every numeric cell in both output forms, so a CSV cell
// and its JSON counterpart are byte-equal; non-finite values become null.
inline std::string render_number(double x) { return nlohmann::json(x).dump(); }

inline std::string csv_quote(const std::string& field) {
    bool needs = false;
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') {
            needs = true;
            break;
        }
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

} // namespace detail

inline nlohmann::json to_json(const ResultRecord& r) {
    nlohmann::json j;
    j["experiment"] = r.experiment;
    j["seed"] = r.seed;
    j["trials"] = r.trials;
    j["workers"] = r.workers;
    j["rng"] = r.rng;
    nlohmann::json cfg = nlohmann::json::object();
    for (const auto& [k, v] : r.config_echo) cfg[k] = v;
    j["config"] = cfg;
    nlohmann::json est = nlohmann::json::object();
    for (const auto& [k, v] : r.estimates) est[k] = v;
    j["estimates"] = est;
    nlohmann::json ivs = nlohmann::json::object();
    for (const auto& [k, v] : r.intervals) ivs[k] = nlohmann::json{{"lo", v.lo}, {"hi", v.hi}};
    j["intervals"] = ivs;
    nlohmann::json cons = nlohmann::json::object();
    for (const auto& [k, v] : r.constants) cons[k] = v;
    j["constants"] = cons;
    nlohmann::json chk = nlohmann::json::object();
    for (const auto& [k, v] : r.checks) chk[k] = v;
    j["checks"] = chk;
    nlohmann::json nts = nlohmann::json::object();
    for (const auto& [k, v] : r.notes) nts[k] = v;
    j["notes"] = nts;
    return j;
}

inline std::string to_json_text(const ResultRecord& r) { return to_json(r).dump(2) + "\n"; }

inline constexpr const char* csv_header = "experiment,seed,trials,workers,name,kind,value,lo,hi";

// One row per reported quantity; rows carry the run identity so a flat
// concatenation of many runs stays plottable.
inline std::string to_csv_text(const ResultRecord& r) {
    std::string out = csv_header;
    out += '\n';
    const std::string prefix = detail::csv_quote(r.experiment) + "," + std::to_string(r.seed) +
                               "," + std::to_string(r.trials) + "," + std::to_string(r.workers) +
                               ",";
    auto interval_of = [&](const std::string& name) -> const Interval* {
        for (const auto& [k, v] : r.intervals)
            if (k == name) return &v;
        return nullptr;
    };
    for (const auto& [name, value] : r.estimates) {
        const Interval* ci = interval_of(name);
        out += prefix + detail::csv_quote(name) + ",estimate," + detail::render_number(value) +
               "," + (ci ? detail::render_number(ci->lo) : "") + "," +
               (ci ? detail::render_number(ci->hi) : "") + "\n";
    }
    for (const auto& [name, value] : r.constants)
        out += prefix + detail::csv_quote(name) + ",constant," + detail::render_number(value) +
               ",,\n";
    for (const auto& [name, pass] : r.checks)
        out += prefix + detail::csv_quote(name) + ",check," + (pass ? "true" : "false") + ",,\n";
    for (const auto& [name, text] : r.notes)
        out += prefix + detail::csv_quote(name) + ",note," + detail::csv_quote(text) + ",,\n";
    return out;
}

// Minimal RFC-4180 reader for round-trip tests and small covariance files.
inline std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string cell;
    bool quoted = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                if (!cell.empty()) throw std::invalid_argument("parse_csv: stray quote mid-cell");
                quoted = true;
                any = true;
                break;
            case ',':
                row.push_back(std::move(cell));
                cell.clear();
                any = true;
                break;
            case '\r': break;
            case '\n':
                if (any || !cell.empty()) {
                    row.push_back(std::move(cell));
                    cell.clear();
                    rows.push_back(std::move(row));
                    row.clear();
                    any = false;
                }
                break;
            default:
                cell += c;
                any = true;
        }
    }
    if (quoted) throw std::invalid_argument("parse_csv: unterminated quoted cell");
    if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << text;
    if (!out) throw std::runtime_error("write failed: " + path);
}

} // namespace gfe
