#include "glucolens/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace glucolens {

namespace {

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e;
}

void require_header(const CsvTable& t, const std::vector<std::string>& expected,
                    const std::filesystem::path& path, std::size_t n_required) {
    if (t.header.size() < n_required || t.header.size() > expected.size())
        throw std::runtime_error(path.string() + ": unexpected column count in header");
    for (std::size_t i = 0; i < t.header.size(); ++i) {
        if (t.header[i] != expected[i])
            throw std::runtime_error(path.string() + ": expected header column '" +
                                     expected[i] + "', found '" + t.header[i] + "'");
    }
}

// Timestamp format is auto-detected from the first data row and then
// applied file-wide.
class TsMode {
public:
    void detect(const std::string& first) { epoch_ = is_epoch_seconds(first); }
    bool parse(const std::string& s, Timestamp& out, std::string& err) const {
        if (epoch_ != is_epoch_seconds(s)) {
            err = "timestamp format differs from the file's detected format";
            return false;
        }
        try {
            out = parse_timestamp(s);
        } catch (const std::exception& e) {
            err = e.what();
            return false;
        }
        return true;
    }

private:
    bool epoch_ = true;
};

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path.string() + ": missing header row");
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        t.rows.push_back(split_line(line));
    }
    return t;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    for (std::size_t i = 0; i < header.size(); ++i)
        out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            out << (i ? "," : "") << row[i];
        out << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

IngestResult<ActivityMeasurement> read_activities_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"ts", "label"}, path, 2);
    IngestResult<ActivityMeasurement> out;
    TsMode mode;
    if (!t.rows.empty()) mode.detect(t.rows[0][0]);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != 2) {
            out.rejected.push_back({i + 1, "expected 2 columns"});
            continue;
        }
        ActivityMeasurement m;
        std::string err;
        if (!mode.parse(row[0], m.t, err)) {
            out.rejected.push_back({i + 1, err});
            continue;
        }
        auto label = parse_activity(row[1]);
        if (!label) {
            out.rejected.push_back({i + 1, "unknown activity label '" + row[1] + "'"});
            continue;
        }
        m.label = *label;
        out.records.push_back(m);
    }
    return out;
}

IngestResult<GeoFix> read_locations_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"ts", "lat", "lon", "accuracy_m"}, path, 4);
    IngestResult<GeoFix> out;
    TsMode mode;
    if (!t.rows.empty()) mode.detect(t.rows[0][0]);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != 4) {
            out.rejected.push_back({i + 1, "expected 4 columns"});
            continue;
        }
        GeoFix f;
        std::string err;
        if (!mode.parse(row[0], f.t, err)) {
            out.rejected.push_back({i + 1, err});
            continue;
        }
        if (!parse_double(row[1], f.lat) || !parse_double(row[2], f.lon) ||
            !parse_double(row[3], f.accuracy_m)) {
            out.rejected.push_back({i + 1, "unparseable numeric field"});
            continue;
        }
        if (std::string v = validate(f); !v.empty()) {
            out.rejected.push_back({i + 1, v});
            continue;
        }
        out.records.push_back(f);
    }
    return out;
}

IngestResult<GlucoseReading> read_glucose_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"ts", "mgdl"}, path, 2);
    IngestResult<GlucoseReading> out;
    TsMode mode;
    if (!t.rows.empty()) mode.detect(t.rows[0][0]);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != 2) {
            out.rejected.push_back({i + 1, "expected 2 columns"});
            continue;
        }
        GlucoseReading g;
        std::string err;
        if (!mode.parse(row[0], g.t, err)) {
            out.rejected.push_back({i + 1, err});
            continue;
        }
        if (!parse_double(row[1], g.mgdl)) {
            out.rejected.push_back({i + 1, "unparseable glucose value"});
            continue;
        }
        if (std::string v = validate(g); !v.empty()) {
            out.rejected.push_back({i + 1, v});
            continue;
        }
        out.records.push_back(g);
    }
    return out;
}

IngestResult<PurchaseRecord> read_purchases_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    require_header(t, {"ts", "merchant", "amount", "lat", "lon"}, path, 3);
    bool has_loc = t.header.size() == 5;
    IngestResult<PurchaseRecord> out;
    TsMode mode;
    if (!t.rows.empty()) mode.detect(t.rows[0][0]);
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        const auto& row = t.rows[i];
        if (row.size() != t.header.size()) {
            out.rejected.push_back({i + 1, "column count does not match header"});
            continue;
        }
        PurchaseRecord p;
        std::string err;
        if (!mode.parse(row[0], p.t, err)) {
            out.rejected.push_back({i + 1, err});
            continue;
        }
        p.merchant_tag = row[1];
        if (!parse_double(row[2], p.amount)) {
            out.rejected.push_back({i + 1, "unparseable amount"});
            continue;
        }
        if (has_loc && !(row[3].empty() && row[4].empty())) {
            GeoFix f;
            f.t = p.t;
            if (!parse_double(row[3], f.lat) || !parse_double(row[4], f.lon)) {
                out.rejected.push_back({i + 1, "unparseable purchase location"});
                continue;
            }
            p.loc = f;
        }
        if (std::string v = validate(p); !v.empty()) {
            out.rejected.push_back({i + 1, v});
            continue;
        }
        out.records.push_back(std::move(p));
    }
    return out;
}

void write_activities_csv(const std::filesystem::path& path,
                          const std::vector<ActivityMeasurement>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const auto& r : records)
        rows.push_back({std::to_string(r.t.seconds_utc), to_string(r.label)});
    write_csv(path, {"ts", "label"}, rows);
}

void write_locations_csv(const std::filesystem::path& path,
                         const std::vector<GeoFix>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const auto& r : records)
        rows.push_back({std::to_string(r.t.seconds_utc), format_double(r.lat),
                        format_double(r.lon), format_double(r.accuracy_m)});
    write_csv(path, {"ts", "lat", "lon", "accuracy_m"}, rows);
}

void write_glucose_csv(const std::filesystem::path& path,
                       const std::vector<GlucoseReading>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const auto& r : records)
        rows.push_back({std::to_string(r.t.seconds_utc), format_double(r.mgdl)});
    write_csv(path, {"ts", "mgdl"}, rows);
}

void write_purchases_csv(const std::filesystem::path& path,
                         const std::vector<PurchaseRecord>& records) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(records.size());
    for (const auto& r : records) {
        std::vector<std::string> row = {std::to_string(r.t.seconds_utc), r.merchant_tag,
                                        format_double(r.amount)};
        if (r.loc) {
            row.push_back(format_double(r.loc->lat));
            row.push_back(format_double(r.loc->lon));
        } else {
            row.push_back("");
            row.push_back("");
        }
        rows.push_back(std::move(row));
    }
    write_csv(path, {"ts", "merchant", "amount", "lat", "lon"}, rows);
}

}  // namespace glucolens
