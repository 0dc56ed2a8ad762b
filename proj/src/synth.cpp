#include "glucolens/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "glucolens/rng.hpp"

namespace glucolens::synth {

namespace {

using json = nlohmann::json;

constexpr double kMetersPerDegLat = 111320.0;

constexpr std::size_t W = 0, R = 1, C = 2, S = 3, A = 4, SA = 5, U = 6;

GeoFix offset_point(double lat0, double lon0, double east_m, double north_m) {
    GeoFix f;
    f.lat = lat0 + north_m / kMetersPerDegLat;
    f.lon = lon0 + east_m / (kMetersPerDegLat * std::cos(lat0 * 0.017453292519943295));
    return f;
}

struct Anchor {
    std::size_t start = 0, end = 0;  // slots, [start, end)
    double lat = 0.0, lon = 0.0;
};

}  // namespace

TransitionMatrix default_transition() {
    TransitionMatrix m{};
    auto set_row = [&](std::size_t from, std::initializer_list<std::pair<std::size_t, double>> to) {
        double off = 0.0;
        for (auto [j, p] : to) {
            m[from][j] = p;
            off += p;
        }
        m[from][from] = 1.0 - off;
    };
    set_row(W, {{R, 0.002}, {C, 0.002}, {S, 0.060}, {A, 0.005}, {U, 0.001}});
    set_row(R, {{W, 0.010}, {S, 0.040}, {U, 0.001}});
    set_row(C, {{W, 0.009}, {S, 0.040}, {U, 0.001}});
    set_row(S, {{W, 0.0018}, {R, 0.0003}, {C, 0.0003}, {A, 0.0035}, {U, 0.0003}});
    set_row(A, {{W, 0.003}, {S, 0.022}, {SA, 0.550}, {U, 0.001}});
    set_row(SA, {{W, 0.003}, {S, 0.022}, {A, 0.620}, {U, 0.001}});
    set_row(U, {{W, 0.050}, {R, 0.005}, {C, 0.005}, {S, 0.300}, {A, 0.080}, {SA, 0.010}});
    return m;
}

std::string validate(const SynthConfig& cfg) {
    std::vector<std::string> errs;
    if (cfg.days < 1) errs.push_back("days must be >= 1");
    if (cfg.hotspot_count < 1) errs.push_back("hotspot_count must be >= 1");
    if (cfg.meal_hotspot_fraction < 0.0 || cfg.meal_hotspot_fraction > 1.0)
        errs.push_back("meal_hotspot_fraction must lie in [0, 1]");
    if (cfg.slot_width_s <= 0) errs.push_back("slot_width_s must be positive");
    if (cfg.meal_peak_minutes <= 0.0) errs.push_back("meal_peak_minutes must be positive");
    if (cfg.meal_onset_delay_minutes < 0.0 ||
        cfg.meal_onset_delay_minutes >= cfg.meal_peak_minutes)
        errs.push_back("meal_onset_delay_minutes must lie in [0, meal_peak_minutes)");
    if (cfg.meal_amplitude_mgdl < 0.0) errs.push_back("meal_amplitude_mgdl must be >= 0");
    if (cfg.gps_stationary_rate <= 0.0 || cfg.gps_stationary_rate > 1.0)
        errs.push_back("gps_stationary_rate must lie in (0, 1]");
    if (cfg.bg_wander_phi < 0.0 || cfg.bg_wander_phi >= 1.0)
        errs.push_back("bg_wander_phi must lie in [0, 1)");
    if (cfg.bg_momentum_rho < 0.0 || cfg.bg_momentum_rho >= 1.0)
        errs.push_back("bg_momentum_rho must lie in [0, 1)");
    if (cfg.bg_momentum_innov_mgdl < 0.0)
        errs.push_back("bg_momentum_innov_mgdl must be >= 0");
    const double* rates[] = {&cfg.missingness.activity, &cfg.missingness.location,
                             &cfg.missingness.glucose, &cfg.missingness.purchase};
    for (const double* r : rates) {
        if (*r < 0.0 || *r >= 1.0) {
            errs.push_back("missingness rates must lie in [0, 1)");
            break;
        }
    }
    for (std::size_t i = 0; i < kActivityClassCount; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < kActivityClassCount; ++j) {
            if (cfg.transition[i][j] < 0.0) {
                errs.push_back("transition probabilities must be >= 0");
                break;
            }
            sum += cfg.transition[i][j];
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            errs.push_back("transition matrix rows must sum to 1");
            break;
        }
    }
    if (cfg.transition[U][U] > 1.0 - 1e-12)
        errs.push_back("degenerate transition matrix: unknown state is absorbing");
    std::string out;
    for (const auto& e : errs) {
        if (!out.empty()) out += "; ";
        out += e;
    }
    return out;
}

double BaselineModel::at(std::int64_t seconds_since_t0) const {
    return mean + amplitude * std::sin(6.283185307179586 * static_cast<double>(seconds_since_t0) /
                                           period_s +
                                       phase);
}

double meal_response(double dt_s, double amplitude_mgdl, double tau_s,
                     double onset_delay_s) {
    if (dt_s <= onset_delay_s) return 0.0;
    double rise_s = tau_s - onset_delay_s;
    if (rise_s <= 0.0) rise_s = tau_s;
    double x = (dt_s - onset_delay_s) / rise_s;
    return amplitude_mgdl * x * std::exp(1.0 - x);
}

std::pair<RawTrace, GroundTruth> generate(const SynthConfig& cfg) {
    if (std::string err = validate(cfg); !err.empty())
        throw std::invalid_argument("invalid synth config: " + err);

    const std::size_t n_slots =
        static_cast<std::size_t>(cfg.days) * 86400 / static_cast<std::size_t>(cfg.slot_width_s);
    Rng root(cfg.seed);
    Rng chain_rng = root.fork(1);
    Rng visit_rng = root.fork(2);
    Rng gps_rng = root.fork(3);
    Rng bg_rng = root.fork(4);
    Rng meal_rng = root.fork(5);
    Rng purchase_rng = root.fork(6);

    GroundTruth gt;
    gt.t0 = cfg.t0;
    gt.slot_width_s = cfg.slot_width_s;
    gt.n_slots = n_slots;
    gt.baseline = BaselineModel{};

    // Activity Markov chain at slot resolution.
    gt.activity.resize(n_slots);
    ActivityClass cur = ActivityClass::stationary;
    for (std::size_t i = 0; i < n_slots; ++i) {
        gt.activity[i] = cur;
        double u = chain_rng.uniform();
        const auto& row = cfg.transition[static_cast<std::size_t>(cur)];
        double acc = 0.0;
        std::size_t next = kActivityClassCount - 1;
        for (std::size_t j = 0; j < kActivityClassCount; ++j) {
            acc += row[j];
            if (u < acc) {
                next = j;
                break;
            }
        }
        cur = static_cast<ActivityClass>(next);
    }

    // Hotspots sit on a ring around the city center so that travel chords
    // between opposite hotspots intersect near the middle.
    int n_food = static_cast<int>(std::llround(cfg.meal_hotspot_fraction * cfg.hotspot_count));
    for (int h = 0; h < cfg.hotspot_count; ++h) {
        double ang = 6.283185307179586 * h / cfg.hotspot_count;
        GeoFix p = offset_point(cfg.center_lat, cfg.center_lon,
                                cfg.ring_radius_m * std::cos(ang),
                                cfg.ring_radius_m * std::sin(ang));
        gt.hotspots.push_back({h, p.lat, p.lon, h < n_food});
    }
    GeoFix home = offset_point(cfg.center_lat, cfg.center_lon, 0.0, -2.2 * cfg.ring_radius_m);

    // Long stationary runs become either hotspot visits or home stays.
    // A hotspot is not revisited within the reuse gap, which keeps density
    // peaks of the same hotspot well separated in time.
    const std::int64_t gap_slots = cfg.hotspot_reuse_gap_s / cfg.slot_width_s;
    std::vector<std::int64_t> last_end(static_cast<std::size_t>(cfg.hotspot_count),
                                       -gap_slots - 1);
    std::vector<Anchor> anchors;
    std::size_t i = 0;
    while (i < n_slots) {
        if (gt.activity[i] != ActivityClass::stationary) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n_slots && gt.activity[j] == ActivityClass::stationary) ++j;
        if (j - i >= cfg.visit_min_slots) {
            bool outing = visit_rng.bernoulli(cfg.outing_probability);
            int chosen = -1;
            if (outing) {
                std::vector<int> eligible;
                for (int h = 0; h < cfg.hotspot_count; ++h) {
                    if (static_cast<std::int64_t>(i) - last_end[static_cast<std::size_t>(h)] >
                        gap_slots)
                        eligible.push_back(h);
                }
                if (!eligible.empty())
                    chosen = eligible[static_cast<std::size_t>(
                        visit_rng.below(eligible.size()))];
            }
            Anchor a;
            a.start = i;
            a.end = j;
            if (chosen >= 0) {
                const auto& h = gt.hotspots[static_cast<std::size_t>(chosen)];
                a.lat = h.lat;
                a.lon = h.lon;
                gt.visits.push_back({chosen, i, j});
                last_end[static_cast<std::size_t>(chosen)] = static_cast<std::int64_t>(j);
            } else {
                a.lat = home.lat;
                a.lon = home.lon;
            }
            anchors.push_back(a);
        }
        i = j;
    }
    if (anchors.empty()) anchors.push_back({0, n_slots, home.lat, home.lon});

    // Meals happen near visit midpoints of food hotspots.
    for (const auto& v : gt.visits) {
        if (!gt.hotspots[static_cast<std::size_t>(v.hotspot)].food) continue;
        Timestamp when = gt.visit_midpoint(v);
        if (cfg.meal_time_jitter_minutes > 0.0)
            when = when + static_cast<std::int64_t>(
                              std::llround(meal_rng.normal(0.0, cfg.meal_time_jitter_minutes * 60.0)));
        gt.meal_times.push_back(when);
        double amp = cfg.meal_amplitude_mgdl;
        if (cfg.amplitude_jitter_sigma > 0.0)
            amp *= std::exp(meal_rng.normal(0.0, cfg.amplitude_jitter_sigma));
        gt.meal_amplitudes.push_back(amp);
    }

    RawTrace trace;
    trace.activities.reserve(n_slots);
    for (std::size_t s = 0; s < n_slots; ++s)
        trace.activities.push_back({gt.slot_time(s), gt.activity[s]});

    // Position timeline: at anchors the subject sits at the anchor point;
    // between anchors position interpolates along the straight chord.
    // Stationary slots emit fixes at a reduced rate, mirroring how the OS
    // throttles GPS when the device is parked.
    std::size_t ai = 0;
    for (std::size_t s = 0; s < n_slots; ++s) {
        while (ai + 1 < anchors.size() && s >= anchors[ai + 1].start) ++ai;
        if (gt.activity[s] == ActivityClass::stationary &&
            !gps_rng.bernoulli(cfg.gps_stationary_rate))
            continue;
        const Anchor& a = anchors[ai];
        double lat, lon;
        bool in_visit = s >= a.start && s < a.end;
        if (in_visit || ai + 1 >= anchors.size() || s < a.start) {
            lat = a.lat;
            lon = a.lon;
        } else {
            const Anchor& b = anchors[ai + 1];
            double frac = static_cast<double>(s - a.end) /
                          static_cast<double>(b.start - a.end);
            lat = a.lat + frac * (b.lat - a.lat);
            lon = a.lon + frac * (b.lon - a.lon);
        }
        double sigma = in_visit ? 10.0 : 15.0;
        double east, north;
        do {
            east = gps_rng.normal(0.0, sigma);
            north = gps_rng.normal(0.0, sigma);
        } while (in_visit && east * east + north * north > 40.0 * 40.0);
        GeoFix f = offset_point(lat, lon, east, north);
        f.t = gt.slot_time(s);
        f.accuracy_m = gps_rng.uniform(5.0, 15.0);
        trace.fixes.push_back(f);
    }

    // CGM readings every 5 minutes; noise is re-sampled rather than the
    // signal clamped when a draw would leave the physiological range.
    const double tau_s = cfg.meal_peak_minutes * 60.0;
    const double delay_s = cfg.meal_onset_delay_minutes * 60.0;
    const std::int64_t t_end = gt.slot_time(n_slots).seconds_utc;
    double wander = 0.0, velocity = 0.0;
    for (std::int64_t ts = cfg.t0.seconds_utc; ts < t_end; ts += 300) {
        double v = gt.baseline.at(ts - cfg.t0.seconds_utc);
        for (std::size_t mi = 0; mi < gt.meal_times.size(); ++mi)
            v += meal_response(static_cast<double>(ts - gt.meal_times[mi].seconds_utc),
                               gt.meal_amplitudes[mi], tau_s, delay_s);
        velocity = cfg.bg_momentum_rho * velocity +
                   bg_rng.normal(0.0, cfg.bg_momentum_innov_mgdl);
        wander = cfg.bg_wander_phi * wander + velocity;
        double value = 0.0;
        int tries = 0;
        for (;;) {
            value = v + wander + bg_rng.normal(0.0, cfg.bg_noise_mgdl);
            if (value >= kGlucoseMinMgdl && value <= kGlucoseMaxMgdl) break;
            if (++tries > 100) {
                wander *= 0.5;  // pull the walk back toward baseline
                velocity *= 0.5;
                tries = 0;
            }
        }
        trace.glucose.push_back({Timestamp{ts}, value});
    }

    // One purchase per food-hotspot visit, shortly after arrival.
    for (const auto& v : gt.visits) {
        const auto& h = gt.hotspots[static_cast<std::size_t>(v.hotspot)];
        if (!h.food) continue;
        PurchaseRecord p;
        p.t = gt.slot_time(v.start_slot) + 60;
        p.merchant_tag = "hotspot_" + std::to_string(v.hotspot);
        p.amount = std::round(purchase_rng.uniform(5.0, 30.0) * 100.0) / 100.0;
        GeoFix loc;
        loc.t = p.t;
        loc.lat = h.lat;
        loc.lon = h.lon;
        loc.accuracy_m = 10.0;
        p.loc = loc;
        trace.purchases.push_back(std::move(p));
    }

    return {std::move(trace), std::move(gt)};
}

RawTrace apply_missingness(const RawTrace& trace, const MissingnessRates& rates,
                           std::uint64_t seed) {
    const double* rs[] = {&rates.activity, &rates.location, &rates.glucose, &rates.purchase};
    for (const double* r : rs)
        if (*r < 0.0 || *r >= 1.0)
            throw std::invalid_argument("missingness rates must lie in [0, 1)");
    Rng root(seed);
    RawTrace out;
    Rng r_act = root.fork(11);
    for (const auto& a : trace.activities)
        if (!r_act.bernoulli(rates.activity)) out.activities.push_back(a);
    Rng r_loc = root.fork(12);
    for (const auto& f : trace.fixes)
        if (!r_loc.bernoulli(rates.location)) out.fixes.push_back(f);
    Rng r_glu = root.fork(13);
    for (const auto& g : trace.glucose)
        if (!r_glu.bernoulli(rates.glucose)) out.glucose.push_back(g);
    Rng r_pur = root.fork(14);
    for (const auto& p : trace.purchases)
        if (!r_pur.bernoulli(rates.purchase)) out.purchases.push_back(p);
    return out;
}

void write_groundtruth(const std::filesystem::path& path, const GroundTruth& gt) {
    json j;
    j["t0"] = gt.t0.seconds_utc;
    j["slot_width_s"] = gt.slot_width_s;
    j["n_slots"] = gt.n_slots;
    j["baseline"] = {{"mean", gt.baseline.mean},
                     {"amplitude", gt.baseline.amplitude},
                     {"period_s", gt.baseline.period_s},
                     {"phase", gt.baseline.phase}};
    json hs = json::array();
    for (const auto& h : gt.hotspots)
        hs.push_back({{"id", h.id}, {"lat", h.lat}, {"lon", h.lon}, {"food", h.food}});
    j["hotspots"] = hs;
    json vs = json::array();
    for (const auto& v : gt.visits)
        vs.push_back({{"hotspot", v.hotspot},
                      {"start_slot", v.start_slot},
                      {"end_slot", v.end_slot}});
    j["visits"] = vs;
    json mt = json::array();
    for (const auto& t : gt.meal_times) mt.push_back(t.seconds_utc);
    j["meal_times"] = mt;
    j["meal_amplitudes"] = gt.meal_amplitudes;
    std::vector<int> acts;
    acts.reserve(gt.activity.size());
    for (ActivityClass a : gt.activity) acts.push_back(static_cast<int>(a));
    j["activity"] = acts;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump(2) << "\n";
}

GroundTruth read_groundtruth(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    json j;
    in >> j;
    GroundTruth gt;
    gt.t0 = Timestamp{j.at("t0").get<std::int64_t>()};
    gt.slot_width_s = j.at("slot_width_s").get<std::int64_t>();
    gt.n_slots = j.at("n_slots").get<std::size_t>();
    const auto& b = j.at("baseline");
    gt.baseline = {b.at("mean").get<double>(), b.at("amplitude").get<double>(),
                   b.at("period_s").get<double>(), b.at("phase").get<double>()};
    for (const auto& h : j.at("hotspots"))
        gt.hotspots.push_back({h.at("id").get<int>(), h.at("lat").get<double>(),
                               h.at("lon").get<double>(), h.at("food").get<bool>()});
    for (const auto& v : j.at("visits"))
        gt.visits.push_back({v.at("hotspot").get<int>(),
                             v.at("start_slot").get<std::size_t>(),
                             v.at("end_slot").get<std::size_t>()});
    for (const auto& t : j.at("meal_times")) gt.meal_times.push_back(Timestamp{t.get<std::int64_t>()});
    gt.meal_amplitudes = j.at("meal_amplitudes").get<std::vector<double>>();
    for (const auto& a : j.at("activity"))
        gt.activity.push_back(static_cast<ActivityClass>(a.get<int>()));
    return gt;
}

}  // namespace glucolens::synth
