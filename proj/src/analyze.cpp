#include "glucolens/analyze.hpp"

#include <cmath>
#include <stdexcept>

#include "glucolens/csv.hpp"

namespace glucolens::analyze {

IndicatorSeries bg_rise_indicator(const predict::CgmSeries& bg, int lag_min,
                                  double threshold_mgdl) {
    if (lag_min < 0 || lag_min % 5 != 0)
        throw std::invalid_argument("lag must be a non-negative multiple of 5 minutes");
    const std::size_t lag = static_cast<std::size_t>(lag_min) / 5;
    const std::size_t n = bg.size();
    IndicatorSeries out;
    out.tag = "bg_rise";
    out.v.assign(n, 0);
    out.valid.assign(n, 0);
    for (std::size_t t = 0; t + lag < n; ++t) {
        if (!bg.mask[t] || !bg.mask[t + lag]) continue;
        out.valid[t] = 1;
        out.v[t] = (bg.v[t + lag] - bg.v[t] > threshold_mgdl) ? 1 : 0;
    }
    return out;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y,
                              std::span<const std::uint8_t> valid) {
    if (x.size() != y.size() || x.size() != valid.size())
        throw std::invalid_argument("pearson input size mismatch");
    double sx = 0, sy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!valid[i]) continue;
        sx += x[i];
        sy += y[i];
        ++n;
    }
    if (n < 2) return std::nullopt;
    double mx = sx / static_cast<double>(n), my = sy / static_cast<double>(n);
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!valid[i]) continue;
        double dx = x[i] - mx, dy = y[i] - my;
        cov += dx * dy;
        vx += dx * dx;
        vy += dy * dy;
    }
    if (vx <= 0.0 || vy <= 0.0) return std::nullopt;
    return cov / std::sqrt(vx * vy);
}

std::optional<int> CorrelationCurve::peak_lag() const {
    std::optional<int> best;
    double best_r = 0.0;
    for (std::size_t i = 0; i < lag_min.size(); ++i) {
        if (!r[i]) continue;
        if (!best || *r[i] > best_r) {
            best = lag_min[i];
            best_r = *r[i];
        }
    }
    return best;
}

CorrelationCurve correlation_curve(const IndicatorSeries& indicator,
                                   const predict::CgmSeries& bg, int lag_max_min,
                                   int lag_step_min, double rise_threshold_mgdl) {
    if (lag_step_min <= 0 || lag_step_min % 5 != 0)
        throw std::invalid_argument("lag step must be a positive multiple of 5 minutes");
    if (indicator.v.size() != bg.size())
        throw std::invalid_argument("indicator and CGM series lengths differ");
    CorrelationCurve curve;
    curve.tag = indicator.tag;
    std::vector<double> x(indicator.v.begin(), indicator.v.end());
    for (int lag = 0; lag <= lag_max_min; lag += lag_step_min) {
        IndicatorSeries rise = bg_rise_indicator(bg, lag, rise_threshold_mgdl);
        std::vector<double> y(rise.v.begin(), rise.v.end());
        std::vector<std::uint8_t> valid(bg.size());
        std::size_t n = 0;
        for (std::size_t i = 0; i < bg.size(); ++i) {
            valid[i] = indicator.valid[i] && rise.valid[i];
            n += valid[i];
        }
        curve.lag_min.push_back(lag);
        curve.r.push_back(pearson(x, y, valid));
        curve.n_valid.push_back(n);
    }
    return curve;
}

IndicatorSeries stationary_indicator(const SlotGrid& grid, const predict::CgmSeries& shape) {
    const Channel& act = grid.channel(kChActivity);
    IndicatorSeries out;
    out.tag = "stationary";
    out.v.assign(shape.size(), 0);
    out.valid.assign(shape.size(), 0);
    for (std::size_t slot = 0; slot < grid.n_slots(); ++slot) {
        if (!act.mask[slot]) continue;
        std::int64_t off = grid.slot_time(slot) - shape.t0;
        if (off < 0) continue;
        auto bin = static_cast<std::size_t>(off / kCgmIntervalSeconds);
        if (bin >= shape.size()) continue;
        out.valid[bin] = 1;
        if (static_cast<int>(act.values[slot]) ==
            static_cast<int>(ActivityClass::stationary))
            out.v[bin] = 1;
    }
    return out;
}

IndicatorSeries event_indicator(std::span<const events::EventOccurrence> evts,
                                const predict::CgmSeries& shape, std::string tag,
                                const std::set<int>* hotspot_filter) {
    IndicatorSeries out;
    out.tag = std::move(tag);
    out.v.assign(shape.size(), 0);
    out.valid.assign(shape.size(), 1);
    for (const auto& e : evts) {
        if (hotspot_filter && !hotspot_filter->count(e.hotspot_id)) continue;
        std::int64_t off = e.peak_time - shape.t0;
        if (off < 0) continue;
        auto bin = static_cast<std::size_t>(off / kCgmIntervalSeconds);
        if (bin < shape.size()) out.v[bin] = 1;
    }
    return out;
}

void write_correlations_csv(const std::filesystem::path& path,
                            std::span<const CorrelationCurve> curves) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& c : curves) {
        for (std::size_t i = 0; i < c.lag_min.size(); ++i) {
            rows.push_back({c.tag, std::to_string(c.lag_min[i]),
                            c.r[i] ? format_double(*c.r[i]) : "NA",
                            std::to_string(c.n_valid[i])});
        }
    }
    write_csv(path, {"indicator_tag", "lag_min", "r", "n_valid"}, rows);
}

}  // namespace glucolens::analyze
