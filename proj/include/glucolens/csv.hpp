#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "glucolens/activity.hpp"
#include "glucolens/records.hpp"

namespace glucolens {

struct RejectedRecord {
    std::size_t row = 0;  // 1-based data row index (header excluded)
    std::string reason;
};

template <typename T>
struct IngestResult {
    std::vector<T> records;
    std::vector<RejectedRecord> rejected;
};

// Raw comma-separated table. No quoting support; none of the schemas here
// need it.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Round-trip-exact decimal formatting used by every CSV writer.
std::string format_double(double v);

// Ingestion of the four standard schemas. The ts column accepts ISO-8601
// UTC or integer epoch seconds, auto-detected per file from the first data
// row. Structurally or physiologically bad records are collected in
// `rejected` rather than aborting the load; a wrong header throws.
IngestResult<ActivityMeasurement> read_activities_csv(const std::filesystem::path& path);
IngestResult<GeoFix> read_locations_csv(const std::filesystem::path& path);
IngestResult<GlucoseReading> read_glucose_csv(const std::filesystem::path& path);
IngestResult<PurchaseRecord> read_purchases_csv(const std::filesystem::path& path);

// Writers emit epoch-second timestamps.
void write_activities_csv(const std::filesystem::path& path,
                          const std::vector<ActivityMeasurement>& records);
void write_locations_csv(const std::filesystem::path& path,
                         const std::vector<GeoFix>& records);
void write_glucose_csv(const std::filesystem::path& path,
                       const std::vector<GlucoseReading>& records);
void write_purchases_csv(const std::filesystem::path& path,
                         const std::vector<PurchaseRecord>& records);

}  // namespace glucolens
