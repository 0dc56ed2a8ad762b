#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "glucolens/cluster.hpp"
#include "glucolens/slot_grid.hpp"
#include "glucolens/time.hpp"

namespace glucolens::events {

inline constexpr std::int64_t kCgmStepSeconds = kCgmIntervalSeconds;

struct DensityCurve {
    Timestamp t0;
    std::int64_t step_s = 15;
    double bandwidth_s = 7200.0;
    std::vector<double> rho;

    Timestamp time_at(std::size_t i) const {
        return t0 + static_cast<std::int64_t>(i) * step_s;
    }
};

// Unnormalized Gaussian kernel density of the observation times evaluated
// on a uniform grid: rho(y) = sum_x exp(-((y - x)/h)^2). Contributions
// beyond six bandwidths are dropped; they are below double precision of
// any O(1) density value.
DensityCurve density(std::span<const Timestamp> times, double bandwidth_s,
                     Timestamp grid_t0, std::int64_t step_s, std::size_t n);

struct PeakParams {
    double min_separation_s = 7200.0;
    double min_density = 0.5;
};

// Strict local maxima with rho >= min_density; plateau maxima take the
// leftmost slot; peaks closer than min_separation merge into the higher
// one (ties keep the earlier peak). Returned indices ascend.
std::vector<std::size_t> find_event_peaks(const DensityCurve& curve, const PeakParams& params);

struct EventOccurrence {
    int hotspot_id = 0;
    Timestamp peak_time;
    double peak_density = 0.0;
};

// KDE peak extraction per hotspot over its member fix times; output sorted
// by (peak_time, hotspot_id).
std::vector<EventOccurrence> extract_events(std::span<const cluster::Hotspot> hotspots,
                                            const SlotGrid& grid, double bandwidth_s,
                                            const PeakParams& params);

struct AlignedWindows {
    std::size_t cols = 0;  // width_s / 300
    std::vector<std::vector<double>> values;        // one row per event
    std::vector<std::vector<std::uint8_t>> mask;
};

// Row i holds CGM readings in [peak_i, peak_i + width); cells without a
// reading (or beyond the grid) are masked.
AlignedWindows align_bg_windows(std::span<const Timestamp> peaks, const SlotGrid& grid,
                                std::int64_t width_s = 7200);

struct HotspotStats {
    std::size_t visit_count = 0;
    std::vector<std::optional<double>> mean;  // nullopt when no observation
    std::vector<std::optional<double>> std;   // nullopt when fewer than 2
    std::vector<std::size_t> n;
};

// Per-column masked mean and population standard deviation.
HotspotStats hotspot_stats(const AlignedWindows& windows);

void write_events_csv(const std::filesystem::path& path,
                      std::span<const EventOccurrence> events);
std::vector<EventOccurrence> read_events_csv(const std::filesystem::path& path);

void write_stats_csv(const std::filesystem::path& path,
                     std::span<const std::pair<int, HotspotStats>> stats);

}  // namespace glucolens::events
