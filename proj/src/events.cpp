#include "glucolens/events.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "glucolens/csv.hpp"

namespace glucolens::events {

DensityCurve density(std::span<const Timestamp> times, double bandwidth_s,
                     Timestamp grid_t0, std::int64_t step_s, std::size_t n) {
    if (times.empty()) throw std::invalid_argument("no observation times");
    if (bandwidth_s <= 0.0) throw std::invalid_argument("bandwidth must be positive");
    if (step_s <= 0) throw std::invalid_argument("grid step must be positive");
    DensityCurve curve;
    curve.t0 = grid_t0;
    curve.step_s = step_s;
    curve.bandwidth_s = bandwidth_s;
    curve.rho.assign(n, 0.0);

    const double inv_h2 = 1.0 / (bandwidth_s * bandwidth_s);
    const auto reach = static_cast<std::int64_t>(std::ceil(6.0 * bandwidth_s));
    for (const Timestamp& x : times) {
        // slots with |t - x| <= 6h; offsets computed in integer seconds so
        // translating every input shifts the curve exactly
        std::int64_t lo_t = x.seconds_utc - reach;
        std::int64_t hi_t = x.seconds_utc + reach;
        std::int64_t lo = (lo_t - grid_t0.seconds_utc) / step_s - 1;
        std::int64_t hi = (hi_t - grid_t0.seconds_utc) / step_s + 1;
        lo = std::max<std::int64_t>(lo, 0);
        hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(n) - 1);
        for (std::int64_t i = lo; i <= hi; ++i) {
            std::int64_t dt = grid_t0.seconds_utc + i * step_s - x.seconds_utc;
            if (dt < -reach || dt > reach) continue;
            double d = static_cast<double>(dt);
            curve.rho[static_cast<std::size_t>(i)] += std::exp(-d * d * inv_h2);
        }
    }
    return curve;
}

std::vector<std::size_t> find_event_peaks(const DensityCurve& curve,
                                          const PeakParams& params) {
    const std::vector<double>& rho = curve.rho;
    if (rho.empty()) throw std::invalid_argument("empty density curve");

    // candidate maxima: strictly above the previous distinct value and the
    // next distinct value; plateaus contribute their leftmost slot
    std::vector<std::size_t> candidates;
    std::size_t i = 1;
    const std::size_t n = rho.size();
    while (i + 1 <= n - 1) {
        if (rho[i] > rho[i - 1]) {
            std::size_t j = i;
            while (j + 1 < n && rho[j + 1] == rho[i]) ++j;  // plateau [i, j]
            if (j + 1 < n && rho[j + 1] < rho[i] && rho[i] >= params.min_density)
                candidates.push_back(i);
            i = j + 1;
        } else {
            ++i;
        }
    }

    // keep the highest peak in any min_separation neighborhood
    std::vector<std::size_t> order(candidates.size());
    for (std::size_t c = 0; c < candidates.size(); ++c) order[c] = c;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        double ra = rho[candidates[a]], rb = rho[candidates[b]];
        if (ra != rb) return ra > rb;
        return candidates[a] < candidates[b];
    });
    std::vector<std::size_t> accepted;
    for (std::size_t c : order) {
        std::size_t idx = candidates[c];
        bool blocked = false;
        for (std::size_t a : accepted) {
            double gap = std::abs(static_cast<double>(idx) - static_cast<double>(a)) *
                         static_cast<double>(curve.step_s);
            if (gap < params.min_separation_s) {
                blocked = true;
                break;
            }
        }
        if (!blocked) accepted.push_back(idx);
    }
    std::sort(accepted.begin(), accepted.end());
    return accepted;
}

std::vector<EventOccurrence> extract_events(std::span<const cluster::Hotspot> hotspots,
                                            const SlotGrid& grid, double bandwidth_s,
                                            const PeakParams& params) {
    std::vector<EventOccurrence> events;
    for (const auto& h : hotspots) {
        if (h.members.empty()) continue;
        std::vector<Timestamp> times;
        times.reserve(h.members.size());
        for (const auto& m : h.members) times.push_back(m.t);
        DensityCurve curve =
            density(times, bandwidth_s, grid.t0(), grid.slot_width_s(), grid.n_slots());
        for (std::size_t idx : find_event_peaks(curve, params))
            events.push_back({h.id, curve.time_at(idx), curve.rho[idx]});
    }
    std::sort(events.begin(), events.end(), [](const EventOccurrence& a,
                                               const EventOccurrence& b) {
        if (a.peak_time != b.peak_time) return a.peak_time < b.peak_time;
        return a.hotspot_id < b.hotspot_id;
    });
    return events;
}

AlignedWindows align_bg_windows(std::span<const Timestamp> peaks, const SlotGrid& grid,
                                std::int64_t width_s) {
    if (width_s <= 0 || width_s % kCgmStepSeconds != 0)
        throw std::invalid_argument("window width must be a positive multiple of 300 s");
    const Channel& bg = grid.channel(kChGlucose);
    AlignedWindows out;
    out.cols = static_cast<std::size_t>(width_s / kCgmStepSeconds);
    for (const Timestamp& peak : peaks) {
        std::vector<double> row(out.cols, 0.0);
        std::vector<std::uint8_t> mask(out.cols, 0);
        for (std::size_t c = 0; c < out.cols; ++c) {
            // latest observed reading within the 5-minute bin, matching the
            // grid's collision policy
            Timestamp bin_start = peak + static_cast<std::int64_t>(c) * kCgmStepSeconds;
            for (std::int64_t off = kCgmStepSeconds - grid.slot_width_s(); off >= 0;
                 off -= grid.slot_width_s()) {
                auto slot = grid.slot_of(bin_start + off);
                if (!slot) continue;
                if (bg.mask[*slot]) {
                    row[c] = bg.values[*slot];
                    mask[c] = 1;
                    break;
                }
            }
        }
        out.values.push_back(std::move(row));
        out.mask.push_back(std::move(mask));
    }
    return out;
}

HotspotStats hotspot_stats(const AlignedWindows& windows) {
    if (windows.values.empty()) throw std::invalid_argument("no aligned windows");
    HotspotStats s;
    s.visit_count = windows.values.size();
    s.mean.resize(windows.cols);
    s.std.resize(windows.cols);
    s.n.assign(windows.cols, 0);
    for (std::size_t c = 0; c < windows.cols; ++c) {
        double sum = 0.0;
        std::size_t n = 0;
        for (std::size_t r = 0; r < windows.values.size(); ++r) {
            if (!windows.mask[r][c]) continue;
            sum += windows.values[r][c];
            ++n;
        }
        s.n[c] = n;
        if (n == 0) continue;
        double mean = sum / static_cast<double>(n);
        s.mean[c] = mean;
        if (n < 2) continue;  // population std undefined below 2 samples
        double ss = 0.0;
        for (std::size_t r = 0; r < windows.values.size(); ++r) {
            if (!windows.mask[r][c]) continue;
            double d = windows.values[r][c] - mean;
            ss += d * d;
        }
        s.std[c] = std::sqrt(ss / static_cast<double>(n));
    }
    return s;
}

void write_events_csv(const std::filesystem::path& path,
                      std::span<const EventOccurrence> events) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& e : events)
        rows.push_back({std::to_string(e.hotspot_id), std::to_string(e.peak_time.seconds_utc),
                        format_double(e.peak_density)});
    write_csv(path, {"hotspot_id", "peak_time", "peak_density"}, rows);
}

std::vector<EventOccurrence> read_events_csv(const std::filesystem::path& path) {
    CsvTable t = read_csv(path);
    if (t.header != std::vector<std::string>{"hotspot_id", "peak_time", "peak_density"})
        throw std::runtime_error(path.string() + ": unexpected events header");
    std::vector<EventOccurrence> events;
    for (const auto& row : t.rows) {
        if (row.size() != 3)
            throw std::runtime_error(path.string() + ": malformed events row");
        events.push_back({std::stoi(row[0]), Timestamp{std::stoll(row[1])},
                          std::stod(row[2])});
    }
    return events;
}

void write_stats_csv(const std::filesystem::path& path,
                     std::span<const std::pair<int, HotspotStats>> stats) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& [id, s] : stats) {
        for (std::size_t c = 0; c < s.mean.size(); ++c) {
            rows.push_back({std::to_string(id),
                            std::to_string(c * static_cast<std::size_t>(kCgmStepSeconds) / 60),
                            s.mean[c] ? format_double(*s.mean[c]) : "NA",
                            s.std[c] ? format_double(*s.std[c]) : "NA",
                            std::to_string(s.n[c])});
        }
    }
    write_csv(path, {"hotspot_id", "column_minute", "mean", "std", "n"}, rows);
}

}  // namespace glucolens::events
