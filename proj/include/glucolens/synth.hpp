#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "glucolens/activity.hpp"
#include "glucolens/records.hpp"
#include "glucolens/time.hpp"

namespace glucolens::synth {

using TransitionMatrix =
    std::array<std::array<double, kActivityClassCount>, kActivityClassCount>;

// Biases automotive <-> stationary_automotive alternation during driving
// bouts and gives stationary stretches a dwell time long enough to read as
// visits.
TransitionMatrix default_transition();

struct MissingnessRates {
    double activity = 0.5;
    double location = 0.5;
    double glucose = 0.1;
    double purchase = 0.0;
};

struct SynthConfig {
    std::uint64_t seed = 42;
    int days = 7;
    int hotspot_count = 6;
    double meal_hotspot_fraction = 0.5;
    MissingnessRates missingness;
    TransitionMatrix transition = default_transition();
    double meal_amplitude_mgdl = 34.0;
    double meal_peak_minutes = 60.0;
    // CGM detection trails ingestion; the response is zero until the onset
    // delay and then rises to its peak at meal_peak_minutes.
    double meal_onset_delay_minutes = 25.0;
    // Per-meal lognormal amplitude multiplier exp(N(0, sigma)); 0 makes
    // every meal identical.
    double amplitude_jitter_sigma = 0.25;
    // Meals land near the visit midpoint, not on it; detected events are
    // therefore only a loose clock for the metabolic response.
    double meal_time_jitter_minutes = 15.0;

    std::int64_t slot_width_s = 15;
    Timestamp t0{1704067200};  // 2024-01-01T00:00:00Z

    // Trace geometry and scheduling internals.
    double center_lat = 40.0;
    double center_lon = -74.0;
    double ring_radius_m = 1500.0;
    std::size_t visit_min_slots = 80;          // 20 minutes
    std::int64_t hotspot_reuse_gap_s = 5 * 3600;
    double outing_probability = 0.35;          // hotspot visit vs staying home
    // Sensor noise is independent per reading. The wander term stands in
    // for unmodeled physiology: a slowly reverting level driven by a
    // persistent velocity, so the trace has genuine local trend the way
    // smooth metabolic signals do.
    double bg_noise_mgdl = 2.2;
    double bg_wander_phi = 0.996;              // level persistence per 5-minute step
    double bg_momentum_rho = 0.85;             // velocity persistence
    double bg_momentum_innov_mgdl = 0.25;      // velocity innovation
    // The OS polls GPS aggressively in motion but rarely when parked.
    double gps_stationary_rate = 0.10;         // fixes per slot while stationary
};

// Empty string when valid, otherwise all violations joined by "; ".
std::string validate(const SynthConfig& cfg);

struct HotspotTruth {
    int id = 0;
    double lat = 0.0;
    double lon = 0.0;
    bool food = false;
};

// [start_slot, end_slot)
struct VisitInterval {
    int hotspot = 0;
    std::size_t start_slot = 0;
    std::size_t end_slot = 0;
};

struct BaselineModel {
    double mean = 115.0;
    double amplitude = 12.0;
    double period_s = 86400.0;
    double phase = 0.0;
    double at(std::int64_t seconds_since_t0) const;
};

struct GroundTruth {
    Timestamp t0;
    std::int64_t slot_width_s = 15;
    std::size_t n_slots = 0;
    std::vector<ActivityClass> activity;  // true label per slot
    std::vector<HotspotTruth> hotspots;   // excludes the home location
    std::vector<VisitInterval> visits;    // hotspot visits only
    std::vector<Timestamp> meal_times;
    std::vector<double> meal_amplitudes;
    BaselineModel baseline;

    Timestamp slot_time(std::size_t i) const {
        return t0 + static_cast<std::int64_t>(i) * slot_width_s;
    }
    Timestamp visit_midpoint(const VisitInterval& v) const {
        return slot_time((v.start_slot + v.end_slot) / 2);
    }
};

struct RawTrace {
    std::vector<ActivityMeasurement> activities;
    std::vector<GeoFix> fixes;
    std::vector<GlucoseReading> glucose;
    std::vector<PurchaseRecord> purchases;
};

// Gamma-like pulse that stays at zero through the onset delay and peaks at
// amplitude when dt reaches tau.
double meal_response(double dt_s, double amplitude_mgdl, double tau_s,
                     double onset_delay_s = 0.0);

// Deterministic given cfg.seed. Emits dense per-slot activity and GPS
// streams plus 5-minute CGM readings; pair with apply_missingness to get
// realistic sampling gaps.
std::pair<RawTrace, GroundTruth> generate(const SynthConfig& cfg);

// Drops each record independently at its channel rate.
RawTrace apply_missingness(const RawTrace& trace, const MissingnessRates& rates,
                           std::uint64_t seed);

void write_groundtruth(const std::filesystem::path& path, const GroundTruth& gt);
GroundTruth read_groundtruth(const std::filesystem::path& path);

}  // namespace glucolens::synth
