#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "glucolens/cluster.hpp"
#include "glucolens/geo.hpp"

namespace glucolens::geofence {

struct Superfence {
    int id = 0;
    GeoPoint center;
    double radius_m = 0.0;
    std::vector<int> children;  // hotspot ids
};

struct GeofencePlan {
    int max_active = 20;
    std::vector<Superfence> superfences;
};

struct RegionRef {
    enum class Kind { hotspot, superfence };
    Kind kind = Kind::hotspot;
    int id = 0;
};

// Groups hotspots into superfences so that no superfence has more than
// max_active - 1 children; oversized groups split recursively at the
// median of their wider axis. The superfences partition the hotspot set.
GeofencePlan plan_geofences(std::span<const cluster::Hotspot> hotspots, int max_active = 20);

// Regions the OS should monitor at position p: inside a superfence these
// are its children plus the superfence boundary itself (for exit
// detection); outside every superfence, the nearest superfence boundaries.
// Never exceeds plan.max_active.
std::vector<RegionRef> active_regions(const GeofencePlan& plan,
                                      std::span<const cluster::Hotspot> hotspots,
                                      GeoPoint p);

struct ReplayReport {
    std::size_t max_active_seen = 0;
    std::size_t entries = 0;
    std::size_t covered_entries = 0;
    std::vector<int> uncovered_hotspots;
};

// Walks the trace in order, recomputing the active set at each fix, and
// checks that every hotspot entry happened while that hotspot's fence was
// already active.
ReplayReport replay_trace(const GeofencePlan& plan,
                          std::span<const cluster::Hotspot> hotspots,
                          std::span<const GeoFix> trace);

void write_plan_json(const std::filesystem::path& path, const GeofencePlan& plan);

}  // namespace glucolens::geofence
