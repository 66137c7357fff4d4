#pragma once

// Campaign input formats.
//
//   JSONL     one object per line: {"id": "t1", "species": ["a", "b"], "order": 3}
//             (`order` optional). Blank lines are ignored.
//   CSV       header `input_id,species_id`, one (input, species) pair per row,
//             rows of one input contiguous. An empty species cell records an
//             input that exhibited nothing. Double-quoted fields are supported.
//   showmap   a directory with one file per input, named by input id, holding
//             `EDGEID:COUNT` lines. Species id is "edge:" + EDGEID; the hit
//             count is ignored.
//
// Parsers stream records into a sink so a snapshot can be accumulated
// without materialising the campaign.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "fuzz_assure/error.hpp"
#include "fuzz_assure/incidence.hpp"

namespace fuzz_assure {

enum class FormatKind { jsonl, csv, showmap_dir };

inline std::string_view to_string(FormatKind k) {
    switch (k) {
    case FormatKind::jsonl: return "jsonl";
    case FormatKind::csv: return "csv";
    case FormatKind::showmap_dir: return "showmap";
    }
    return "?";
}

inline std::optional<FormatKind> parse_format_kind(std::string_view s) {
    if (s == "jsonl") return FormatKind::jsonl;
    if (s == "csv") return FormatKind::csv;
    if (s == "showmap" || s == "showmap-dir") return FormatKind::showmap_dir;
    return std::nullopt;
}

/// Directory -> showmap, *.csv -> csv, anything else -> jsonl.
inline FormatKind detect_format(const std::filesystem::path& path) {
    if (std::filesystem::is_directory(path)) {
        return FormatKind::showmap_dir;
    }
    return path.extension() == ".csv" ? FormatKind::csv : FormatKind::jsonl;
}

struct FormatDescriptor {
    FormatKind kind = FormatKind::jsonl;
    /// Tolerate malformed JSONL lines / CSV rows instead of failing.
    bool skip_bad_records = false;
    /// Prepended to every species id. Empty means the format default
    /// ("edge:" for showmap, nothing otherwise).
    std::optional<std::string> species_prefix;
    // CSV only.
    char delimiter = ',';
    std::string input_column = "input_id";
    std::string species_column = "species_id";

    static FormatDescriptor of(FormatKind k, bool skip_bad = false) {
        FormatDescriptor f;
        f.kind = k;
        f.skip_bad_records = skip_bad;
        return f;
    }

    std::string prefix() const {
        return species_prefix.value_or(kind == FormatKind::showmap_dir ? "edge:" : "");
    }
};

struct ParseStats {
    std::size_t records = 0;
    std::size_t skipped = 0;
    /// Repeated (input, species) pairs collapsed by set semantics.
    std::size_t duplicate_pairs = 0;
};

using RecordSink = std::function<void(IncidenceRecord&&)>;

namespace detail {

inline void strip_cr(std::string& line) {
    if (!line.empty() && line.back() == '\r') {
        line.pop_back();
    }
}

inline bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

inline IncidenceRecord jsonl_record(std::string_view line, const std::string& prefix, ParseStats& stats) {
    nlohmann::json j = nlohmann::json::parse(line);
    if (!j.is_object()) {
        throw std::invalid_argument("expected a JSON object");
    }
    auto id = j.find("id");
    if (id == j.end() || !id->is_string()) {
        throw std::invalid_argument("field \"id\" must be a string");
    }
    auto species = j.find("species");
    if (species == j.end() || !species->is_array()) {
        throw std::invalid_argument("field \"species\" must be an array of strings");
    }
    IncidenceRecord r;
    r.input_id = id->get<std::string>();
    for (const auto& s : *species) {
        if (!s.is_string() || s.get_ref<const std::string&>().empty()) {
            throw std::invalid_argument("species entries must be non-empty strings");
        }
        if (!r.species.emplace(prefix + s.get<std::string>()).second) {
            ++stats.duplicate_pairs;
        }
    }
    if (auto order = j.find("order"); order != j.end() && !order->is_null()) {
        if (!order->is_number_unsigned() && !(order->is_number_integer() && order->get<std::int64_t>() >= 0)) {
            throw std::invalid_argument("field \"order\" must be a non-negative integer");
        }
        r.order = order->get<Count>();
    }
    return r;
}

/// Splits one CSV line; fields may be double-quoted with "" escapes.
inline std::vector<std::string> split_csv(std::string_view line, char delimiter) {
    std::vector<std::string> fields(1);
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    fields.back() += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                fields.back() += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == delimiter) {
            fields.emplace_back();
        } else {
            fields.back() += c;
        }
    }
    if (quoted) {
        throw std::invalid_argument("unterminated quoted field");
    }
    return fields;
}

} // namespace detail

/// Streams records from canonical JSONL. `source` names the stream in errors.
inline ParseStats for_each_jsonl(std::istream& in, const RecordSink& sink, const FormatDescriptor& format = {},
                                 const std::string& source = "<stream>") {
    ParseStats stats;
    const std::string prefix = format.prefix();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::is_blank(line)) {
            continue;
        }
        IncidenceRecord record;
        try {
            record = detail::jsonl_record(line, prefix, stats);
        } catch (const std::exception& e) {
            if (format.skip_bad_records) {
                ++stats.skipped;
                continue;
            }
            throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what(), source, line_no);
        }
        ++stats.records;
        sink(std::move(record));
    }
    return stats;
}

/// Streams records from CSV pairs, grouping contiguous rows per input.
inline ParseStats for_each_csv(std::istream& in, const RecordSink& sink, const FormatDescriptor& format = {},
                               const std::string& source = "<stream>") {
    ParseStats stats;
    const std::string prefix = format.prefix();
    std::string line;
    std::size_t line_no = 0;
    std::optional<std::pair<std::size_t, std::size_t>> columns;
    std::size_t width = 0;
    std::optional<IncidenceRecord> current;
    // Every finished group; needed to reject a reappearing input id.
    std::unordered_set<std::string> finished;

    auto fail = [&](const std::string& msg) {
        throw ParseError(source + ":" + std::to_string(line_no) + ": " + msg, source, line_no);
    };
    auto flush = [&] {
        if (current) {
            finished.insert(current->input_id);
            ++stats.records;
            sink(std::move(*current));
            current.reset();
        }
    };

    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::is_blank(line)) {
            continue;
        }
        std::vector<std::string> fields;
        try {
            fields = detail::split_csv(line, format.delimiter);
        } catch (const std::exception& e) {
            if (columns && format.skip_bad_records) {
                ++stats.skipped;
                continue;
            }
            fail(e.what());
        }
        if (!columns) {
            auto find = [&](const std::string& name) {
                return static_cast<std::size_t>(std::find(fields.begin(), fields.end(), name) - fields.begin());
            };
            const std::size_t in_col = find(format.input_column);
            const std::size_t sp_col = find(format.species_column);
            if (in_col == fields.size() || sp_col == fields.size()) {
                fail("header must name columns " + format.input_column + " and " + format.species_column);
            }
            columns = {in_col, sp_col};
            width = fields.size();
            continue;
        }
        if (fields.size() != width || fields[columns->first].empty()) {
            if (format.skip_bad_records) {
                ++stats.skipped;
                continue;
            }
            fail(fields.size() != width ? "expected " + std::to_string(width) + " fields" : "empty input id");
        }
        const std::string& input = fields[columns->first];
        const std::string& species = fields[columns->second];
        if (!current || current->input_id != input) {
            flush();
            if (finished.contains(input)) {
                fail("non-contiguous rows for input " + input);
            }
            current = IncidenceRecord{input, {}, std::nullopt};
        }
        if (!species.empty() && !current->species.emplace(prefix + species).second) {
            ++stats.duplicate_pairs;
        }
    }
    flush();
    return stats;
}

/// Parses one showmap file (one input).
inline IncidenceRecord parse_showmap_file(const std::filesystem::path& file, const std::string& prefix,
                                          ParseStats& stats) {
    std::ifstream in(file);
    if (!in) {
        throw ParseError("cannot read " + file.string(), file.string());
    }
    IncidenceRecord r{file.filename().string(), {}, std::nullopt};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        detail::strip_cr(line);
        if (detail::is_blank(line)) {
            continue;
        }
        const auto colon = line.find(':');
        const bool ok = colon != std::string::npos && colon > 0 && colon + 1 < line.size() &&
                        line.find(':', colon + 1) == std::string::npos &&
                        std::all_of(line.begin() + static_cast<std::ptrdiff_t>(colon) + 1, line.end(),
                                    [](unsigned char c) { return std::isdigit(c); });
        if (!ok) {
            throw ParseError(file.string() + ":" + std::to_string(line_no) + ": expected EDGEID:COUNT",
                             file.string(), line_no);
        }
        if (!r.species.emplace(prefix + line.substr(0, colon)).second) {
            ++stats.duplicate_pairs;
        }
    }
    if (in.bad()) {
        throw ParseError("error reading " + file.string(), file.string());
    }
    return r;
}

/// Regular files of a showmap directory in lexicographic name order.
/// Dot-files are ignored.
inline std::vector<std::filesystem::path> showmap_files(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::directory_iterator it(dir, ec);
    if (ec) {
        throw ParseError("cannot open directory " + dir.string() + ": " + ec.message(), dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : it) {
        const std::string name = entry.path().filename().string();
        if (entry.is_regular_file() && !name.starts_with(".")) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
    return files;
}

inline ParseStats for_each_showmap(const std::filesystem::path& dir, const RecordSink& sink,
                                   const FormatDescriptor& format = FormatDescriptor::of(FormatKind::showmap_dir)) {
    ParseStats stats;
    const std::string prefix = format.prefix();
    for (const auto& file : showmap_files(dir)) {
        IncidenceRecord r;
        try {
            r = parse_showmap_file(file, prefix, stats);
        } catch (const ParseError&) {
            if (format.skip_bad_records) {
                ++stats.skipped;
                continue;
            }
            throw;
        }
        ++stats.records;
        sink(std::move(r));
    }
    return stats;
}

/// Streams records from `path` according to `format.kind`.
inline ParseStats for_each_record(const std::filesystem::path& path, const FormatDescriptor& format,
                                  const RecordSink& sink) {
    if (format.kind == FormatKind::showmap_dir) {
        return for_each_showmap(path, sink, format);
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open " + path.string(), path.string());
    }
    return format.kind == FormatKind::csv ? for_each_csv(in, sink, format, path.string())
                                          : for_each_jsonl(in, sink, format, path.string());
}

inline std::vector<IncidenceRecord> read_records(const std::filesystem::path& path, const FormatDescriptor& format,
                                                 ParseStats* stats = nullptr) {
    std::vector<IncidenceRecord> out;
    const ParseStats s = for_each_record(path, format, [&](IncidenceRecord&& r) { out.push_back(std::move(r)); });
    if (stats) {
        *stats = s;
    }
    return out;
}

/// Single-pass snapshot; memory grows with species, not inputs.
inline CampaignSnapshot read_snapshot(const std::filesystem::path& path, const FormatDescriptor& format,
                                      ParseStats* stats = nullptr) {
    CampaignSnapshot snap;
    const ParseStats s = for_each_record(path, format, [&](IncidenceRecord&& r) { observe_into(snap, r); });
    if (stats) {
        *stats = s;
    }
    return snap;
}

inline std::vector<IncidenceRecord> parse_jsonl(std::istream& in, const FormatDescriptor& format = {},
                                                ParseStats* stats = nullptr) {
    std::vector<IncidenceRecord> out;
    const ParseStats s = for_each_jsonl(in, [&](IncidenceRecord&& r) { out.push_back(std::move(r)); }, format);
    if (stats) {
        *stats = s;
    }
    return out;
}

inline std::vector<IncidenceRecord> parse_csv(std::istream& in, const FormatDescriptor& format = {},
                                              ParseStats* stats = nullptr) {
    std::vector<IncidenceRecord> out;
    const ParseStats s = for_each_csv(in, [&](IncidenceRecord&& r) { out.push_back(std::move(r)); }, format);
    if (stats) {
        *stats = s;
    }
    return out;
}

inline std::vector<IncidenceRecord> parse_showmap_dir(const std::filesystem::path& dir,
                                                      const FormatDescriptor& format = FormatDescriptor::of(FormatKind::showmap_dir),
                                                      ParseStats* stats = nullptr) {
    std::vector<IncidenceRecord> out;
    const ParseStats s = for_each_showmap(dir, [&](IncidenceRecord&& r) { out.push_back(std::move(r)); }, format);
    if (stats) {
        *stats = s;
    }
    return out;
}

/// Canonical JSONL line (no trailing newline). Keys in order id, species, order.
inline std::string to_jsonl(const IncidenceRecord& r) {
    nlohmann::ordered_json j;
    j["id"] = r.input_id;
    j["species"] = nlohmann::ordered_json::array();
    for (const auto& s : r.species) {
        j["species"].push_back(s.str());
    }
    if (r.order) {
        j["order"] = *r.order;
    }
    return j.dump();
}

inline void write_jsonl(std::ostream& out, const std::vector<IncidenceRecord>& records) {
    for (const auto& r : records) {
        out << to_jsonl(r) << '\n';
    }
}

/// CSV pairs; inputs with no species get one row with an empty species cell.
inline void write_csv(std::ostream& out, const std::vector<IncidenceRecord>& records) {
    auto field = [](const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) {
            return s;
        }
        std::string q = "\"";
        for (char c : s) {
            q += c;
            if (c == '"') {
                q += '"';
            }
        }
        return q + "\"";
    };
    out << "input_id,species_id\n";
    for (const auto& r : records) {
        if (r.species.empty()) {
            out << field(r.input_id) << ",\n";
        }
        for (const auto& s : r.species) {
            out << field(r.input_id) << ',' << field(s.str()) << '\n';
        }
    }
}

} // namespace fuzz_assure
