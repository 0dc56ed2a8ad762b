#include "glucolens/geofence.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace glucolens::geofence {

namespace {

// Extra reach so a fence is armed well before the subject gets close to a
// child hotspot at ordinary travel speed.
constexpr double kSuperfenceMarginM = 500.0;

using HotspotIndex = std::map<int, const cluster::Hotspot*>;

void split_group(const HotspotIndex& by_id, std::vector<int> group, std::size_t cap,
                 std::vector<std::vector<int>>& out) {
    if (group.size() <= cap) {
        out.push_back(std::move(group));
        return;
    }
    double lat_min = 90, lat_max = -90, lon_min = 180, lon_max = -180, lat_mid = 0;
    for (int id : group) {
        const auto& c = by_id.at(id)->centroid;
        lat_min = std::min(lat_min, c.lat);
        lat_max = std::max(lat_max, c.lat);
        lon_min = std::min(lon_min, c.lon);
        lon_max = std::max(lon_max, c.lon);
        lat_mid += c.lat;
    }
    lat_mid /= static_cast<double>(group.size());
    double lat_extent = lat_max - lat_min;
    double lon_extent = (lon_max - lon_min) * std::cos(lat_mid * 0.017453292519943295);
    bool by_lat = lat_extent >= lon_extent;
    std::stable_sort(group.begin(), group.end(), [&](int a, int b) {
        const auto& ca = by_id.at(a)->centroid;
        const auto& cb = by_id.at(b)->centroid;
        double pa = by_lat ? ca.lat : ca.lon;
        double pb = by_lat ? cb.lat : cb.lon;
        if (pa != pb) return pa < pb;
        return a < b;
    });
    std::size_t half = (group.size() + 1) / 2;
    std::vector<int> left(group.begin(), group.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<int> right(group.begin() + static_cast<std::ptrdiff_t>(half), group.end());
    split_group(by_id, std::move(left), cap, out);
    split_group(by_id, std::move(right), cap, out);
}

}  // namespace

GeofencePlan plan_geofences(std::span<const cluster::Hotspot> hotspots, int max_active) {
    if (hotspots.empty()) throw std::invalid_argument("no hotspots to plan around");
    if (max_active < 2)
        throw std::invalid_argument("max_active must be >= 2 (children plus the superfence)");

    HotspotIndex by_id;
    std::vector<int> all;
    for (const auto& h : hotspots) {
        if (!by_id.emplace(h.id, &h).second)
            throw std::invalid_argument("duplicate hotspot id " + std::to_string(h.id));
        all.push_back(h.id);
    }
    std::sort(all.begin(), all.end());

    std::vector<std::vector<int>> groups;
    split_group(by_id, std::move(all), static_cast<std::size_t>(max_active - 1), groups);

    GeofencePlan plan;
    plan.max_active = max_active;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        Superfence sf;
        sf.id = static_cast<int>(g);
        sf.children = groups[g];
        double lat = 0, lon = 0;
        for (int id : sf.children) {
            lat += by_id.at(id)->centroid.lat;
            lon += by_id.at(id)->centroid.lon;
        }
        sf.center = {lat / static_cast<double>(sf.children.size()),
                     lon / static_cast<double>(sf.children.size())};
        for (int id : sf.children) {
            const auto* h = by_id.at(id);
            sf.radius_m = std::max(sf.radius_m,
                                   haversine_m(sf.center, h->centroid) + h->radius_m);
        }
        sf.radius_m += kSuperfenceMarginM;
        plan.superfences.push_back(std::move(sf));
    }
    return plan;
}

std::vector<RegionRef> active_regions(const GeofencePlan& plan,
                                      std::span<const cluster::Hotspot> hotspots,
                                      GeoPoint p) {
    (void)hotspots;
    int enclosing = -1;
    double best_depth = 0.0;
    for (const auto& sf : plan.superfences) {
        double depth = haversine_m(p, sf.center) - sf.radius_m;
        if (depth <= 0.0 && (enclosing < 0 || depth < best_depth)) {
            enclosing = sf.id;
            best_depth = depth;
        }
    }
    std::vector<RegionRef> active;
    if (enclosing >= 0) {
        const auto& sf = plan.superfences[static_cast<std::size_t>(enclosing)];
        for (int id : sf.children)
            active.push_back({RegionRef::Kind::hotspot, id});
        active.push_back({RegionRef::Kind::superfence, sf.id});
        return active;
    }
    // outside everything: watch the nearest superfence boundaries
    std::vector<std::pair<double, int>> dist;
    for (const auto& sf : plan.superfences)
        dist.emplace_back(haversine_m(p, sf.center), sf.id);
    std::sort(dist.begin(), dist.end());
    for (std::size_t i = 0; i < dist.size() && i < static_cast<std::size_t>(plan.max_active);
         ++i)
        active.push_back({RegionRef::Kind::superfence, dist[i].second});
    return active;
}

ReplayReport replay_trace(const GeofencePlan& plan,
                          std::span<const cluster::Hotspot> hotspots,
                          std::span<const GeoFix> trace) {
    ReplayReport report;
    if (trace.empty()) return report;

    auto inside = [&](const cluster::Hotspot& h, const GeoFix& f) {
        return haversine_m(h.centroid, f.point()) <= h.radius_m;
    };
    auto armed_hotspots = [&](GeoPoint p) {
        std::set<int> armed;
        for (const RegionRef& r : active_regions(plan, hotspots, p))
            if (r.kind == RegionRef::Kind::hotspot) armed.insert(r.id);
        return armed;
    };

    std::set<int> prev_inside;
    std::set<int> prev_armed = armed_hotspots(trace[0].point());
    report.max_active_seen = active_regions(plan, hotspots, trace[0].point()).size();
    for (std::size_t i = 0; i < trace.size(); ++i) {
        std::set<int> cur_inside;
        for (const auto& h : hotspots)
            if (inside(h, trace[i])) cur_inside.insert(h.id);
        for (int id : cur_inside) {
            if (prev_inside.count(id)) continue;
            ++report.entries;
            if (prev_armed.count(id))
                ++report.covered_entries;
            else
                report.uncovered_hotspots.push_back(id);
        }
        auto active = active_regions(plan, hotspots, trace[i].point());
        report.max_active_seen = std::max(report.max_active_seen, active.size());
        prev_armed.clear();
        for (const RegionRef& r : active)
            if (r.kind == RegionRef::Kind::hotspot) prev_armed.insert(r.id);
        prev_inside = std::move(cur_inside);
    }
    return report;
}

void write_plan_json(const std::filesystem::path& path, const GeofencePlan& plan) {
    nlohmann::json j;
    j["max_active"] = plan.max_active;
    nlohmann::json sfs = nlohmann::json::array();
    for (const auto& sf : plan.superfences) {
        sfs.push_back({{"id", sf.id},
                       {"center", {sf.center.lat, sf.center.lon}},
                       {"radius_m", sf.radius_m},
                       {"children", sf.children}});
    }
    j["superfences"] = sfs;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

}  // namespace glucolens::geofence
