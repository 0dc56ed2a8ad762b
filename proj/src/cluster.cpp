#include "glucolens/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "glucolens/csv.hpp"

namespace glucolens::cluster {

namespace {

constexpr int kUnvisited = -2;

// meters of arc per degree of latitude on the reference sphere
constexpr double kMetersPerDegArc = kEarthRadiusM * 0.017453292519943295;

struct GridIndex {
    double lat_cell = 0.0;
    double lon_cell = 0.0;
    std::unordered_map<std::int64_t, std::vector<int>> cells;

    static std::int64_t key(std::int64_t cx, std::int64_t cy) {
        return cx * 2000003 + cy;  // large prime stride; city-scale extents
    }

    bool build(std::span<const GeoFix> pts, double eps_m) {
        double lat_min = 90.0, lat_max = -90.0, lon_min = 180.0, lon_max = -180.0;
        for (const auto& p : pts) {
            lat_min = std::min(lat_min, p.lat);
            lat_max = std::max(lat_max, p.lat);
            lon_min = std::min(lon_min, p.lon);
            lon_max = std::max(lon_max, p.lon);
        }
        double abs_lat = std::max(std::abs(lat_min), std::abs(lat_max));
        // near the poles or across the antimeridian the cell adjacency
        // argument breaks down; caller falls back to the naive scan
        if (abs_lat > 85.0) return false;
        if (lon_max - lon_min > 180.0) return false;
        double sigma = eps_m / kEarthRadiusM;  // central angle of eps
        double cos_phi = std::cos(abs_lat * 0.017453292519943295);
        double s = std::sin(sigma / 2.0) / cos_phi;
        if (s >= 1.0) return false;
        // any pair within eps differs by at most one cell in each axis
        lat_cell = (eps_m / kMetersPerDegArc) * (1.0 + 1e-9);
        lon_cell = 2.0 * std::asin(s) * 57.29577951308232 * (1.0 + 1e-9);
        for (std::size_t i = 0; i < pts.size(); ++i) {
            auto cx = static_cast<std::int64_t>(std::floor(pts[i].lat / lat_cell));
            auto cy = static_cast<std::int64_t>(std::floor(pts[i].lon / lon_cell));
            cells[key(cx, cy)].push_back(static_cast<int>(i));
        }
        return true;
    }

    void candidates(const GeoFix& p, std::vector<int>& out) const {
        out.clear();
        auto cx = static_cast<std::int64_t>(std::floor(p.lat / lat_cell));
        auto cy = static_cast<std::int64_t>(std::floor(p.lon / lon_cell));
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
            for (std::int64_t dy = -1; dy <= 1; ++dy) {
                auto it = cells.find(key(cx + dx, cy + dy));
                if (it == cells.end()) continue;
                out.insert(out.end(), it->second.begin(), it->second.end());
            }
        }
    }
};

double cross(const GeoPoint& o, const GeoPoint& a, const GeoPoint& b) {
    return (a.lon - o.lon) * (b.lat - o.lat) - (a.lat - o.lat) * (b.lon - o.lon);
}

}  // namespace

std::vector<int> detail::dbscan_impl(std::span<const GeoFix> points,
                                     const DbscanParams& params, bool use_index) {
    if (params.eps_m <= 0.0) throw std::invalid_argument("eps_m must be positive");
    if (params.min_pts < 1) throw std::invalid_argument("min_pts must be >= 1");
    const int n = static_cast<int>(points.size());
    std::vector<int> labels(points.size(), kUnvisited);

    GridIndex index;
    bool indexed = use_index && n > 0 && index.build(points, params.eps_m);

    std::vector<int> scratch;
    auto region_query = [&](int i, std::vector<int>& out) {
        out.clear();
        if (indexed) {
            index.candidates(points[static_cast<std::size_t>(i)], scratch);
            for (int j : scratch) {
                if (haversine_m(points[static_cast<std::size_t>(i)],
                                points[static_cast<std::size_t>(j)]) <= params.eps_m)
                    out.push_back(j);
            }
            std::sort(out.begin(), out.end());
        } else {
            for (int j = 0; j < n; ++j) {
                if (haversine_m(points[static_cast<std::size_t>(i)],
                                points[static_cast<std::size_t>(j)]) <= params.eps_m)
                    out.push_back(j);
            }
        }
    };

    std::vector<int> neigh, neigh2;
    int cid = 0;
    for (int i = 0; i < n; ++i) {
        if (labels[static_cast<std::size_t>(i)] != kUnvisited) continue;
        region_query(i, neigh);
        if (static_cast<int>(neigh.size()) < params.min_pts) {
            labels[static_cast<std::size_t>(i)] = kNoise;
            continue;
        }
        labels[static_cast<std::size_t>(i)] = cid;
        std::deque<int> queue(neigh.begin(), neigh.end());
        while (!queue.empty()) {
            int q = queue.front();
            queue.pop_front();
            auto uq = static_cast<std::size_t>(q);
            if (labels[uq] == kNoise) labels[uq] = cid;  // noise becomes border
            if (labels[uq] != kUnvisited) continue;
            labels[uq] = cid;
            region_query(q, neigh2);
            if (static_cast<int>(neigh2.size()) >= params.min_pts)
                queue.insert(queue.end(), neigh2.begin(), neigh2.end());
        }
        ++cid;
    }
    return labels;
}

std::vector<int> dbscan(std::span<const GeoFix> points, const DbscanParams& params) {
    // below a couple hundred points the naive scan wins anyway
    return detail::dbscan_impl(points, params, points.size() > 256);
}

Hull convex_hull(std::span<const GeoPoint> points) {
    Hull hull;
    if (points.empty()) return hull;
    std::vector<GeoPoint> pts(points.begin(), points.end());
    std::sort(pts.begin(), pts.end(), [](const GeoPoint& a, const GeoPoint& b) {
        return a.lon < b.lon || (a.lon == b.lon && a.lat < b.lat);
    });
    pts.erase(std::unique(pts.begin(), pts.end(),
                          [](const GeoPoint& a, const GeoPoint& b) {
                              return a.lon == b.lon && a.lat == b.lat;
                          }),
              pts.end());
    if (pts.size() == 1) {
        hull.kind = Hull::Kind::point;
        hull.vertices = pts;
        return hull;
    }

    // Andrew's monotone chain; x = lon, y = lat.
    std::vector<GeoPoint> h(2 * pts.size());
    std::size_t m = 0;
    for (const auto& p : pts) {
        while (m >= 2 && cross(h[m - 2], h[m - 1], p) <= 0) --m;
        h[m++] = p;
    }
    std::size_t lower = m + 1;
    for (std::size_t i = pts.size() - 1; i-- > 0;) {
        while (m >= lower && cross(h[m - 2], h[m - 1], pts[i]) <= 0) --m;
        h[m++] = pts[i];
    }
    h.resize(m - 1);

    if (h.size() < 3) {
        hull.kind = Hull::Kind::segment;
        hull.vertices = {pts.front(), pts.back()};
        return hull;
    }
    hull.kind = Hull::Kind::polygon;
    hull.vertices = std::move(h);
    return hull;
}

bool hull_contains(const Hull& hull, GeoPoint p, double tol_deg) {
    switch (hull.kind) {
        case Hull::Kind::empty:
            return false;
        case Hull::Kind::point: {
            const GeoPoint& v = hull.vertices[0];
            return std::abs(v.lat - p.lat) <= tol_deg && std::abs(v.lon - p.lon) <= tol_deg;
        }
        case Hull::Kind::segment: {
            const GeoPoint& a = hull.vertices[0];
            const GeoPoint& b = hull.vertices[1];
            double dx = b.lon - a.lon, dy = b.lat - a.lat;
            double len2 = dx * dx + dy * dy;
            double t = len2 > 0 ? ((p.lon - a.lon) * dx + (p.lat - a.lat) * dy) / len2 : 0.0;
            t = std::clamp(t, 0.0, 1.0);
            double ex = a.lon + t * dx - p.lon, ey = a.lat + t * dy - p.lat;
            return std::sqrt(ex * ex + ey * ey) <= tol_deg;
        }
        case Hull::Kind::polygon: {
            // inside or on boundary of the CCW polygon
            std::size_t nv = hull.vertices.size();
            for (std::size_t i = 0; i < nv; ++i) {
                const GeoPoint& a = hull.vertices[i];
                const GeoPoint& b = hull.vertices[(i + 1) % nv];
                double c = cross(a, b, p);
                double elen = std::hypot(b.lon - a.lon, b.lat - a.lat);
                if (c < -tol_deg * std::max(elen, 1e-300)) return false;
            }
            return true;
        }
    }
    return false;
}

const char* to_string(HotspotTag tag) {
    switch (tag) {
        case HotspotTag::food: return "food";
        case HotspotTag::other: return "other";
        case HotspotTag::untagged: return "untagged";
    }
    return "?";
}

std::optional<HotspotTag> parse_tag(std::string_view text) {
    if (text == "food") return HotspotTag::food;
    if (text == "other") return HotspotTag::other;
    if (text == "untagged") return HotspotTag::untagged;
    return std::nullopt;
}

std::vector<GeoFix> filter_stationary(const SlotGrid& grid, std::span<const GeoFix> fixes,
                                      const impute::SlotProbabilities& probs,
                                      double threshold) {
    if (threshold < 0.0 || threshold > 1.0)
        throw std::invalid_argument("threshold must lie in [0, 1]");
    if (probs.p.size() != grid.n_slots())
        throw std::invalid_argument("probability table does not match the grid");
    std::vector<GeoFix> kept;
    const auto stationary = static_cast<std::size_t>(ActivityClass::stationary);
    for (const auto& f : fixes) {
        auto slot = grid.slot_of(f.t);
        if (!slot || !probs.imputable[*slot]) continue;
        if (probs.p[*slot][stationary] >= threshold) kept.push_back(f);
    }
    return kept;
}

std::vector<Hotspot> build_hotspots(std::span<const GeoFix> fixes,
                                    std::span<const int> labels) {
    if (fixes.size() != labels.size())
        throw std::invalid_argument("fixes/labels size mismatch");
    int max_label = -1;
    for (int l : labels) max_label = std::max(max_label, l);
    std::vector<Hotspot> hotspots(static_cast<std::size_t>(max_label + 1));
    for (std::size_t i = 0; i < fixes.size(); ++i) {
        if (labels[i] < 0) continue;
        hotspots[static_cast<std::size_t>(labels[i])].members.push_back(fixes[i]);
    }
    for (std::size_t c = 0; c < hotspots.size(); ++c) {
        Hotspot& h = hotspots[c];
        h.id = static_cast<int>(c);
        std::vector<GeoPoint> pts;
        pts.reserve(h.members.size());
        double lat = 0.0, lon = 0.0;
        for (const auto& m : h.members) {
            pts.push_back(m.point());
            lat += m.lat;
            lon += m.lon;
        }
        h.hull = convex_hull(pts);
        if (!h.members.empty()) {
            h.centroid = {lat / static_cast<double>(h.members.size()),
                          lon / static_cast<double>(h.members.size())};
            for (const auto& m : h.members)
                h.radius_m = std::max(h.radius_m, haversine_m(h.centroid, m.point()));
        }
    }
    return hotspots;
}

void apply_tags(std::vector<Hotspot>& hotspots, const std::map<int, HotspotTag>& tags) {
    for (auto& h : hotspots) {
        auto it = tags.find(h.id);
        if (it != tags.end()) h.tag = it->second;
    }
}

void write_tags_csv(const std::filesystem::path& path, std::span<const Hotspot> hotspots) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& h : hotspots)
        rows.push_back({std::to_string(h.id), to_string(h.tag)});
    write_csv(path, {"hotspot_id", "tag"}, rows);
}

std::map<int, HotspotTag> read_tags_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"hotspot_id", "tag"})
        throw std::runtime_error(path.string() + ": expected header hotspot_id,tag");
    std::map<int, HotspotTag> tags;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (t.rows[i].size() != 2)
            throw std::runtime_error(path.string() + ": bad row " + std::to_string(i + 1));
        auto tag = parse_tag(t.rows[i][1]);
        if (!tag)
            throw std::runtime_error(path.string() + ": unknown tag '" + t.rows[i][1] + "'");
        tags[std::stoi(t.rows[i][0])] = *tag;
    }
    return tags;
}

namespace {

nlohmann::json hull_to_json(const Hull& hull) {
    nlohmann::json j;
    switch (hull.kind) {
        case Hull::Kind::empty: j["kind"] = "empty"; break;
        case Hull::Kind::point: j["kind"] = "point"; break;
        case Hull::Kind::segment: j["kind"] = "segment"; break;
        case Hull::Kind::polygon: j["kind"] = "polygon"; break;
    }
    nlohmann::json verts = nlohmann::json::array();
    for (const auto& v : hull.vertices) verts.push_back({v.lat, v.lon});
    j["vertices"] = verts;
    return j;
}

Hull hull_from_json(const nlohmann::json& j) {
    Hull h;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "point") h.kind = Hull::Kind::point;
    else if (kind == "segment") h.kind = Hull::Kind::segment;
    else if (kind == "polygon") h.kind = Hull::Kind::polygon;
    for (const auto& v : j.at("vertices"))
        h.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
    return h;
}

}  // namespace

void write_hotspots_json(const std::filesystem::path& path,
                         std::span<const Hotspot> hotspots) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& h : hotspots) {
        nlohmann::json j;
        j["id"] = h.id;
        j["tag"] = to_string(h.tag);
        j["centroid"] = {h.centroid.lat, h.centroid.lon};
        j["radius_m"] = h.radius_m;
        j["hull"] = hull_to_json(h.hull);
        nlohmann::json members = nlohmann::json::array();
        for (const auto& m : h.members)
            members.push_back({m.t.seconds_utc, m.lat, m.lon, m.accuracy_m});
        j["members"] = members;
        arr.push_back(std::move(j));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << arr.dump() << "\n";
}

std::vector<Hotspot> read_hotspots_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json arr;
    in >> arr;
    std::vector<Hotspot> hotspots;
    for (const auto& j : arr) {
        Hotspot h;
        h.id = j.at("id").get<int>();
        auto tag = parse_tag(j.at("tag").get<std::string>());
        h.tag = tag.value_or(HotspotTag::untagged);
        h.centroid = {j.at("centroid").at(0).get<double>(),
                      j.at("centroid").at(1).get<double>()};
        h.radius_m = j.at("radius_m").get<double>();
        h.hull = hull_from_json(j.at("hull"));
        for (const auto& m : j.at("members")) {
            GeoFix f;
            f.t = Timestamp{m.at(0).get<std::int64_t>()};
            f.lat = m.at(1).get<double>();
            f.lon = m.at(2).get<double>();
            f.accuracy_m = m.at(3).get<double>();
            h.members.push_back(f);
        }
        hotspots.push_back(std::move(h));
    }
    return hotspots;
}

void write_geojson(const std::filesystem::path& path, std::span<const Hotspot> hotspots,
                   const std::map<int, std::size_t>& visit_counts) {
    nlohmann::json features = nlohmann::json::array();
    for (const auto& h : hotspots) {
        nlohmann::json geom;
        if (h.hull.kind == Hull::Kind::polygon) {
            nlohmann::json ring = nlohmann::json::array();
            for (const auto& v : h.hull.vertices) ring.push_back({v.lon, v.lat});
            ring.push_back({h.hull.vertices[0].lon, h.hull.vertices[0].lat});
            geom = {{"type", "Polygon"}, {"coordinates", nlohmann::json::array({ring})}};
        } else if (h.hull.kind == Hull::Kind::segment) {
            geom = {{"type", "LineString"},
                    {"coordinates",
                     {{h.hull.vertices[0].lon, h.hull.vertices[0].lat},
                      {h.hull.vertices[1].lon, h.hull.vertices[1].lat}}}};
        } else {
            geom = {{"type", "Point"}, {"coordinates", {h.centroid.lon, h.centroid.lat}}};
        }
        auto it = visit_counts.find(h.id);
        nlohmann::json props = {{"id", h.id},
                                {"tag", to_string(h.tag)},
                                {"n_members", h.members.size()},
                                {"n_visits", it == visit_counts.end() ? 0 : it->second}};
        features.push_back(
            {{"type", "Feature"}, {"geometry", geom}, {"properties", props}});
    }
    nlohmann::json fc = {{"type", "FeatureCollection"}, {"features", features}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << fc.dump(2) << "\n";
}

}  // namespace glucolens::cluster
