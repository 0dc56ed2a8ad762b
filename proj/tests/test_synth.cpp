#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "glucolens/synth.hpp"

using namespace glucolens;
using namespace glucolens::synth;

namespace {

std::string trace_fingerprint(const RawTrace& t) {
    std::ostringstream os;
    for (const auto& a : t.activities) os << a.t.seconds_utc << ':' << int(a.label) << ';';
    for (const auto& f : t.fixes)
        os << f.t.seconds_utc << ':' << f.lat << ',' << f.lon << ',' << f.accuracy_m << ';';
    for (const auto& g : t.glucose) os << g.t.seconds_utc << ':' << g.mgdl << ';';
    for (const auto& p : t.purchases)
        os << p.t.seconds_utc << ':' << p.merchant_tag << ',' << p.amount << ';';
    return os.str();
}

}  // namespace

TEST_SUITE("synth") {
    TEST_CASE("same seed, byte-identical output") {
        SynthConfig cfg;
        cfg.days = 2;
        auto [t1, g1] = generate(cfg);
        auto [t2, g2] = generate(cfg);
        CHECK(trace_fingerprint(t1) == trace_fingerprint(t2));
        CHECK(g1.visits.size() == g2.visits.size());
        auto r1 = apply_missingness(t1, cfg.missingness, 99);
        auto r2 = apply_missingness(t2, cfg.missingness, 99);
        CHECK(trace_fingerprint(r1) == trace_fingerprint(r2));
    }

    TEST_CASE("amplitude zero leaves baseline plus noise") {
        SynthConfig cfg;
        cfg.days = 3;
        cfg.meal_amplitude_mgdl = 0.0;
        cfg.bg_momentum_innov_mgdl = 0.0;
        auto [trace, gt] = generate(cfg);
        for (const auto& r : trace.glucose) {
            double base = gt.baseline.at(r.t - gt.t0);
            CHECK(std::abs(r.mgdl - base) < 6.0 * cfg.bg_noise_mgdl);
        }
    }

    TEST_CASE("meal response peaks at tau") {
        double tau = 3600.0;
        double peak = meal_response(tau, 40.0, tau);
        CHECK(peak == doctest::Approx(40.0));
        CHECK(meal_response(0.0, 40.0, tau) == 0.0);
        CHECK(meal_response(-50.0, 40.0, tau) == 0.0);
        CHECK(meal_response(tau * 0.5, 40.0, tau) < peak);
        CHECK(meal_response(tau * 2.0, 40.0, tau) < peak);
    }

    TEST_CASE("missingness rate 0 is the identity") {
        SynthConfig cfg;
        cfg.days = 1;
        auto [trace, gt] = generate(cfg);
        auto kept = apply_missingness(trace, MissingnessRates{0, 0, 0, 0}, 1);
        CHECK(trace_fingerprint(kept) == trace_fingerprint(trace));
    }

    TEST_CASE("missingness rate 0.5 keeps about half") {
        SynthConfig cfg;
        cfg.days = 2;  // 11520 slots of dense activity
        auto [trace, gt] = generate(cfg);
        auto kept = apply_missingness(trace, MissingnessRates{0.5, 0, 0, 0}, 7);
        double n = static_cast<double>(trace.activities.size());
        double expectation = 0.5 * n;
        double sigma = std::sqrt(n * 0.25);
        CHECK(std::abs(static_cast<double>(kept.activities.size()) - expectation) <
              3.0 * sigma);
    }

    TEST_CASE("transition validation") {
        SynthConfig cfg;
        cfg.transition[0][0] += 0.5;  // row no longer sums to 1
        CHECK(!validate(cfg).empty());
        SynthConfig cfg2;
        for (auto& v : cfg2.transition[6]) v = 0.0;
        cfg2.transition[6][6] = 1.0;  // absorbing unknown
        CHECK(validate(cfg2).find("absorbing") != std::string::npos);
        CHECK_THROWS(generate(cfg2));
    }

    TEST_CASE("empirical transition frequencies match the configured matrix") {
        SynthConfig cfg;
        cfg.days = 10;  // 57600 slots
        auto [trace, gt] = generate(cfg);
        REQUIRE(gt.activity.size() >= 50000);
        std::array<std::array<double, 7>, 7> counts{};
        std::array<double, 7> row_totals{};
        for (std::size_t i = 0; i + 1 < gt.activity.size(); ++i) {
            auto a = static_cast<std::size_t>(gt.activity[i]);
            auto b = static_cast<std::size_t>(gt.activity[i + 1]);
            counts[a][b] += 1.0;
            row_totals[a] += 1.0;
        }
        for (std::size_t a = 0; a < 7; ++a) {
            if (row_totals[a] < 500) continue;  // rare source states carry no power
            for (std::size_t b = 0; b < 7; ++b) {
                double p = cfg.transition[a][b];
                double sigma = std::sqrt(row_totals[a] * p * (1 - p));
                double allowed = 3.0 * sigma + 1.0;
                CHECK(std::abs(counts[a][b] - row_totals[a] * p) <= allowed);
            }
        }
    }

    TEST_CASE("visit fixes stay within 40 m of their hotspot center") {
        SynthConfig cfg;
        cfg.days = 5;
        auto [trace, gt] = generate(cfg);
        REQUIRE(!gt.visits.empty());
        std::size_t checked = 0;
        for (const GeoFix& f : trace.fixes) {
            auto slot = static_cast<std::size_t>((f.t - gt.t0) / gt.slot_width_s);
            for (const auto& v : gt.visits) {
                if (slot < v.start_slot || slot >= v.end_slot) continue;
                const auto& h = gt.hotspots[static_cast<std::size_t>(v.hotspot)];
                CHECK(haversine_m(f.lat, f.lon, h.lat, h.lon) <= 40.0 * 1.01);
                ++checked;
                break;
            }
        }
        CHECK(checked > 500);
    }

    TEST_CASE("glucose stays inside physiological bounds") {
        SynthConfig cfg;
        cfg.days = 5;
        cfg.meal_amplitude_mgdl = 120.0;  // push toward the ceiling
        auto [trace, gt] = generate(cfg);
        for (const auto& r : trace.glucose) {
            CHECK(r.mgdl >= kGlucoseMinMgdl);
            CHECK(r.mgdl <= kGlucoseMaxMgdl);
        }
    }

    TEST_CASE("visits per hotspot do not overlap") {
        SynthConfig cfg;
        cfg.days = 7;
        auto [trace, gt] = generate(cfg);
        std::map<int, std::vector<VisitInterval>> per;
        for (const auto& v : gt.visits) per[v.hotspot].push_back(v);
        for (auto& [h, vs] : per) {
            for (std::size_t i = 1; i < vs.size(); ++i)
                CHECK(vs[i - 1].end_slot <= vs[i].start_slot);
        }
    }

    TEST_CASE("groundtruth json round-trip") {
        SynthConfig cfg;
        cfg.days = 1;
        auto [trace, gt] = generate(cfg);
        auto dir = std::filesystem::temp_directory_path() / "glucolens_synth_test";
        std::filesystem::create_directories(dir);
        write_groundtruth(dir / "gt.json", gt);
        GroundTruth back = read_groundtruth(dir / "gt.json");
        CHECK(back.n_slots == gt.n_slots);
        CHECK(back.activity == gt.activity);
        CHECK(back.visits.size() == gt.visits.size());
        CHECK(back.meal_times.size() == gt.meal_times.size());
        CHECK(back.baseline.mean == gt.baseline.mean);
    }
}
