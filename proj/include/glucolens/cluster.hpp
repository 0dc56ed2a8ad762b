#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glucolens/geo.hpp"
#include "glucolens/impute.hpp"
#include "glucolens/slot_grid.hpp"

namespace glucolens::cluster {

inline constexpr int kNoise = -1;

struct DbscanParams {
    double eps_m = 30.0;
    int min_pts = 20;
};

// Density clustering over haversine distance. Labels are cluster ids in
// order of discovery, kNoise for noise. Points are processed in input
// order, so border-point assignment is deterministic: a border point joins
// the earliest-discovered cluster that reaches it. Internally uses a grid
// hash at eps resolution; results are identical to the naive O(n^2) scan.
std::vector<int> dbscan(std::span<const GeoFix> points, const DbscanParams& params);

namespace detail {
std::vector<int> dbscan_impl(std::span<const GeoFix> points, const DbscanParams& params,
                             bool use_index);
}

struct Hull {
    enum class Kind { empty, point, segment, polygon };
    Kind kind = Kind::empty;
    std::vector<GeoPoint> vertices;  // counter-clockwise for polygons
};

// Minimal convex polygon in the lat/lon plane. Fewer than 3 non-collinear
// points produce a flagged degenerate hull (point or segment).
Hull convex_hull(std::span<const GeoPoint> points);

bool hull_contains(const Hull& hull, GeoPoint p, double tol_deg = 1e-9);

enum class HotspotTag { food, other, untagged };
const char* to_string(HotspotTag tag);
std::optional<HotspotTag> parse_tag(std::string_view text);

struct Hotspot {
    int id = 0;
    std::vector<GeoFix> members;
    Hull hull;
    HotspotTag tag = HotspotTag::untagged;
    GeoPoint centroid;
    double radius_m = 0.0;  // max member distance from the centroid
};

// Keeps fixes whose imputed P(stationary) meets the threshold. Fixes whose
// slot lies outside the grid or beyond reach of any observed activity
// window are dropped.
std::vector<GeoFix> filter_stationary(const SlotGrid& grid, std::span<const GeoFix> fixes,
                                      const impute::SlotProbabilities& probs,
                                      double threshold);

std::vector<Hotspot> build_hotspots(std::span<const GeoFix> fixes, std::span<const int> labels);

void apply_tags(std::vector<Hotspot>& hotspots, const std::map<int, HotspotTag>& tags);

// hotspot_id,tag rows; tags editable by hand between pipeline stages.
void write_tags_csv(const std::filesystem::path& path, std::span<const Hotspot> hotspots);
std::map<int, HotspotTag> read_tags_csv(const std::filesystem::path& path);

void write_hotspots_json(const std::filesystem::path& path, std::span<const Hotspot> hotspots);
std::vector<Hotspot> read_hotspots_json(const std::filesystem::path& path);

// One Feature per hotspot with properties {id, tag, n_members, n_visits}.
void write_geojson(const std::filesystem::path& path, std::span<const Hotspot> hotspots,
                   const std::map<int, std::size_t>& visit_counts);

}  // namespace glucolens::cluster
