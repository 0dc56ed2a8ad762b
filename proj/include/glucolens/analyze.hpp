#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "glucolens/events.hpp"
#include "glucolens/predict.hpp"
#include "glucolens/slot_grid.hpp"

namespace glucolens::analyze {

// Per-CGM-bin binary series with a validity mask; invalid bins are
// excluded from correlations.
struct IndicatorSeries {
    std::string tag;
    std::vector<std::uint8_t> v;
    std::vector<std::uint8_t> valid;
};

// indicator[t] = 1 iff bg[t + lag] - bg[t] > threshold; valid only where
// both endpoints are observed.
IndicatorSeries bg_rise_indicator(const predict::CgmSeries& bg, int lag_min,
                                  double threshold_mgdl = 30.0);

// nullopt when fewer than 2 valid pairs or either variance is zero.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::span<const std::uint8_t> valid);

struct CorrelationCurve {
    std::string tag;
    std::vector<int> lag_min;
    std::vector<std::optional<double>> r;
    std::vector<std::size_t> n_valid;

    // lag of the largest defined r, if any
    std::optional<int> peak_lag() const;
};

CorrelationCurve correlation_curve(const IndicatorSeries& indicator,
                                   const predict::CgmSeries& bg, int lag_max_min,
                                   int lag_step_min, double rise_threshold_mgdl);

// 1 where any observed activity measurement in the bin is stationary;
// valid only in bins holding at least one activity observation.
IndicatorSeries stationary_indicator(const SlotGrid& grid, const predict::CgmSeries& shape);

// 1 at bins containing an event peak, optionally restricted to a hotspot
// subset. Marks the single peak bin, not the visit span.
IndicatorSeries event_indicator(std::span<const events::EventOccurrence> evts,
                                const predict::CgmSeries& shape, std::string tag,
                                const std::set<int>* hotspot_filter = nullptr);

void write_correlations_csv(const std::filesystem::path& path,
                            std::span<const CorrelationCurve> curves);

}  // namespace glucolens::analyze
