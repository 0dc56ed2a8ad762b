#include "glucolens/slot_grid.hpp"

#include <stdexcept>

namespace glucolens {

SlotGrid::SlotGrid(Timestamp t0, std::int64_t slot_width_s, std::size_t n_slots,
                   std::map<std::string, Channel> channels)
    : t0_(t0), slot_width_s_(slot_width_s), n_slots_(n_slots),
      channels_(std::move(channels)) {
    if (slot_width_s_ <= 0) throw std::invalid_argument("slot width must be positive");
    for (const auto& [name, ch] : channels_) {
        if (ch.values.size() != n_slots_ || ch.mask.size() != n_slots_)
            throw std::invalid_argument("channel '" + name + "' length mismatch");
    }
}

std::optional<std::size_t> SlotGrid::slot_of(Timestamp t) const {
    if (t < t0_ || t >= t_end()) return std::nullopt;
    return static_cast<std::size_t>((t - t0_) / slot_width_s_);
}

bool SlotGrid::has_channel(const std::string& name) const {
    return channels_.count(name) != 0;
}

const Channel& SlotGrid::channel(const std::string& name) const {
    auto it = channels_.find(name);
    if (it == channels_.end())
        throw std::invalid_argument("unknown channel: " + name);
    return it->second;
}

std::vector<std::string> SlotGrid::channel_names() const {
    std::vector<std::string> names;
    names.reserve(channels_.size());
    for (const auto& [name, ch] : channels_) names.push_back(name);
    return names;
}

std::optional<ActivityClass> SlotGrid::activity_at(std::size_t slot) const {
    const Channel& ch = channel(kChActivity);
    if (slot >= n_slots_ || !ch.mask[slot]) return std::nullopt;
    return static_cast<ActivityClass>(static_cast<int>(ch.values[slot]));
}

SlotGrid build_grid(const std::map<std::string, std::vector<TimedValue>>& measurements,
                    Timestamp t0, Timestamp t_end, std::int64_t slot_width_s) {
    if (slot_width_s <= 0) throw std::invalid_argument("slot width must be positive");
    if (!(t0 < t_end)) throw std::invalid_argument("empty time range");
    std::int64_t span = t_end - t0;
    std::size_t n_slots = static_cast<std::size_t>((span + slot_width_s - 1) / slot_width_s);

    std::map<std::string, Channel> channels;
    for (const auto& [name, values] : measurements) {
        Channel ch;
        ch.values.assign(n_slots, 0.0);
        ch.mask.assign(n_slots, 0);
        // latest-wins per slot; ties keep the later input record
        std::vector<Timestamp> winner(n_slots, Timestamp{0});
        for (std::size_t i = 0; i < values.size(); ++i) {
            const TimedValue& m = values[i];
            if (m.t < t0 || m.t >= t_end)
                throw std::invalid_argument("channel '" + name + "': measurement " +
                                            std::to_string(i) + " outside [t0, t_end)");
            std::size_t slot = static_cast<std::size_t>((m.t - t0) / slot_width_s);
            if (!ch.mask[slot] || winner[slot] <= m.t) {
                ch.values[slot] = m.value;
                ch.mask[slot] = 1;
                winner[slot] = m.t;
            }
        }
        channels.emplace(name, std::move(ch));
    }
    return SlotGrid(t0, slot_width_s, n_slots, std::move(channels));
}

SlotGrid build_standard_grid(std::span<const ActivityMeasurement> activities,
                             std::span<const GeoFix> fixes,
                             std::span<const GlucoseReading> glucose,
                             std::span<const PurchaseRecord> purchases,
                             Timestamp t0, Timestamp t_end, std::int64_t slot_width_s) {
    std::map<std::string, std::vector<TimedValue>> m;
    auto& act = m[kChActivity];
    for (const auto& a : activities)
        act.push_back({a.t, static_cast<double>(static_cast<int>(a.label))});
    auto& lat = m[kChLat];
    auto& lon = m[kChLon];
    auto& acc = m[kChAccuracy];
    for (const auto& f : fixes) {
        lat.push_back({f.t, f.lat});
        lon.push_back({f.t, f.lon});
        acc.push_back({f.t, f.accuracy_m});
    }
    auto& glu = m[kChGlucose];
    for (const auto& g : glucose) glu.push_back({g.t, g.mgdl});
    auto& pur = m[kChPurchase];
    for (const auto& p : purchases) pur.push_back({p.t, p.amount});
    return build_grid(m, t0, t_end, slot_width_s);
}

WindowView window(const SlotGrid& grid, const std::string& channel,
                  std::size_t center, std::size_t k) {
    const Channel& ch = grid.channel(channel);
    std::size_t width = 2 * k + 1;
    WindowView out;
    out.values.assign(width, 0.0);
    out.mask.assign(width, 0);
    for (std::size_t p = 0; p < width; ++p) {
        std::int64_t slot = static_cast<std::int64_t>(center) -
                            static_cast<std::int64_t>(k) + static_cast<std::int64_t>(p);
        if (slot < 0 || slot >= static_cast<std::int64_t>(grid.n_slots())) continue;
        out.values[p] = ch.values[static_cast<std::size_t>(slot)];
        out.mask[p] = ch.mask[static_cast<std::size_t>(slot)];
    }
    return out;
}

}  // namespace glucolens
