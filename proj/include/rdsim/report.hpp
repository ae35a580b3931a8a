#pragma once

// Report document assembly and rendering. A report is an ordered JSON
// document with a fixed key layout; the meta block is the only part allowed
// to differ between reruns of the same (config, seed) pair, so comparisons
// strip it before checking bytes.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "rdsim/config.hpp"

namespace rdsim {

inline std::string iso8601_utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// One row of the checks table. Bound and observed are optional; a check that
// compares count tables carries its evidence in note instead.
inline json check_entry(const std::string& name, bool pass) {
    json j = json::object();
    j["name"] = name;
    j["pass"] = pass;
    return j;
}

inline json check_entry(const std::string& name, bool pass, double observed, double bound) {
    json j = check_entry(name, pass);
    j["observed"] = observed;
    j["bound"] = bound;
    return j;
}

inline json check_entry(const std::string& name, bool pass, const std::string& note) {
    json j = check_entry(name, pass);
    j["note"] = note;
    return j;
}

inline bool all_checks_pass(const json& checks) {
    for (const json& c : checks)
        if (!c.at("pass").get<bool>()) return false;
    return true;
}

// Fixed top-level layout: schema, kind, config echo, results, checks, pass,
// meta. Everything above meta is a pure function of (config, seed).
inline json make_report(const std::string& kind, const json& config_echo, json results,
                        json checks, double wall_ms, unsigned workers) {
    json doc = json::object();
    doc["schema"] = "rdsim-report/1";
    doc["kind"] = kind;
    doc["config"] = config_echo;
    doc["results"] = std::move(results);
    doc["checks"] = checks;
    doc["pass"] = all_checks_pass(doc["checks"]);
    json meta = json::object();
    meta["generated_at"] = iso8601_utc_now();
    meta["wall_ms"] = wall_ms;
    meta["workers"] = workers;
    doc["meta"] = meta;
    return doc;
}

// Deterministic body: the document minus its meta block.
inline json strip_meta(json report) {
    report.erase("meta");
    return report;
}

inline std::string render_json(const json& doc) { return doc.dump(2) + "\n"; }

namespace detail {

inline std::string csv_escape(const std::string& s) {
    bool need_quotes = false;
    for (char c : s)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') need_quotes = true;
    if (!need_quotes) return s;
    std::string out;
    out.reserve(s.size() + 2);
    out.push_back('"');
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

inline std::string csv_scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump(); // numbers and booleans keep their JSON spelling
}

inline void csv_walk(const json& node, const std::string& section, const std::string& key,
                     std::string& out) {
    if (node.is_object()) {
        for (const auto& item : node.items()) {
            const std::string sub = key.empty() ? item.key() : key + "." + item.key();
            csv_walk(item.value(), section, sub, out);
        }
        return;
    }
    if (node.is_array()) {
        for (std::size_t i = 0; i < node.size(); ++i) {
            const std::string sub =
                key.empty() ? std::to_string(i) : key + "." + std::to_string(i);
            csv_walk(node[i], section, sub, out);
        }
        return;
    }
    out += csv_escape(section);
    out += ',';
    out += csv_escape(key);
    out += ',';
    out += csv_escape(csv_scalar(node));
    out += "\r\n";
}

}  // namespace detail

// Flat three-column rendering: section is the top-level key, key is the
// dotted path below it (array indices as numbers), value keeps the JSON
// number spelling. RFC 4180: CRLF rows, quoting only where required.
inline std::string render_csv(const json& doc) {
    std::string out = "section,key,value\r\n";
    for (const auto& item : doc.items()) detail::csv_walk(item.value(), item.key(), "", out);
    return out;
}

inline std::string render_report(const json& doc, const std::string& format) {
    if (format == "csv") return render_csv(doc);
    if (format == "json") return render_json(doc);
    throw std::invalid_argument("render_report: format must be json or csv");
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file " + path);
    out << text;
    if (!out) throw std::runtime_error("failed writing output file " + path);
}

}  // namespace rdsim
