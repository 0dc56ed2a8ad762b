// Acceptance suite: one binary, one numbered check per invocation.
// Each check prints a single PASS/FAIL line (plus supporting values) and
// the process exit code reflects the verdict.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "glucolens/analyze.hpp"
#include "glucolens/cluster.hpp"
#include "glucolens/events.hpp"
#include "glucolens/geofence.hpp"
#include "glucolens/impute.hpp"
#include "glucolens/pipeline.hpp"
#include "glucolens/predict.hpp"
#include "glucolens/rng.hpp"
#include "glucolens/synth.hpp"
#include "oracles.hpp"

using namespace glucolens;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Check {
    bool ok = true;
    std::vector<std::string> notes;

    void require(bool cond, const std::string& what) {
        ok = ok && cond;
        notes.push_back(std::string(cond ? "  ok   " : "  FAIL ") + what);
    }
    void note(const std::string& what) { notes.push_back("       " + what); }
};

struct PipelineRun {
    SlotGrid grid;
    synth::GroundTruth gt;
    std::vector<GeoFix> fixes;
    std::vector<cluster::Hotspot> hotspots;
    std::vector<events::EventOccurrence> events;
    std::set<int> food_hotspots;
};

// The in-process equivalent of synth -> ingest -> impute -> cluster ->
// events with the pipeline's seed derivations.
PipelineRun run_chain(synth::SynthConfig cfg) {
    auto [trace, gt] = synth::generate(cfg);
    synth::RawTrace thin = synth::apply_missingness(trace, cfg.missingness,
                                                    pipeline::derive_seed(cfg.seed, 101));
    SlotGrid grid = build_standard_grid(thin.activities, thin.fixes, thin.glucose,
                                        thin.purchases, gt.t0, gt.slot_time(gt.n_slots),
                                        cfg.slot_width_s);
    impute::TrainConfig tc;
    tc.seed = pipeline::derive_seed(cfg.seed, 102);
    impute::LogisticWeights W = impute::logistic_train(grid, 20, tc);
    impute::SlotProbabilities probs = impute::predict_all_slots(W, grid);
    std::vector<GeoFix> stationary =
        cluster::filter_stationary(grid, thin.fixes, probs, 0.8);
    std::vector<int> labels = cluster::dbscan(stationary, cluster::DbscanParams{30.0, 20});
    std::vector<cluster::Hotspot> hotspots = cluster::build_hotspots(stationary, labels);
    std::set<int> food;
    for (const auto& h : hotspots)
        for (const auto& g : gt.hotspots)
            if (g.food && haversine_m(h.centroid, GeoPoint{g.lat, g.lon}) < 150.0)
                food.insert(h.id);
    std::vector<events::EventOccurrence> evts =
        events::extract_events(hotspots, grid, 7200.0, events::PeakParams{7200.0, 0.5});
    return {std::move(grid), std::move(gt), std::move(thin.fixes), std::move(hotspots),
            std::move(evts), std::move(food)};
}

predict::CgmSeries exog_channel(const SlotGrid& grid,
                                const std::vector<events::EventOccurrence>& evts,
                                const std::set<int>& significant) {
    predict::CgmSeries exog;
    exog.t0 = grid.t0();
    std::int64_t span = grid.t_end() - grid.t0();
    std::size_t n =
        static_cast<std::size_t>((span + kCgmIntervalSeconds - 1) / kCgmIntervalSeconds);
    exog.v.assign(n, 0.0);
    exog.mask.assign(n, 0);
    const Channel& lat = grid.channel(kChLat);
    const Channel& pur = grid.channel(kChPurchase);
    for (std::size_t s = 0; s < grid.n_slots(); ++s) {
        if (!lat.mask[s] && !pur.mask[s]) continue;
        auto bin =
            static_cast<std::size_t>((grid.slot_time(s) - grid.t0()) / kCgmIntervalSeconds);
        if (bin < n) exog.mask[bin] = 1;
    }
    for (const auto& e : evts) {
        if (!significant.empty() && !significant.count(e.hotspot_id)) continue;
        std::int64_t off = e.peak_time - grid.t0();
        if (off < 0) continue;
        auto bin = static_cast<std::size_t>(off / kCgmIntervalSeconds);
        if (bin < n) {
            exog.v[bin] = 1.0;
            exog.mask[bin] = 1;
        }
    }
    return exog;
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// ---- criterion 1 -----------------------------------------------------------

Check criterion1() {
    Check c;
    auto start = Clock::now();
    synth::SynthConfig cfg;
    cfg.seed = 42;
    cfg.days = 9;  // 51840 slots
    auto [trace, gt] = synth::generate(cfg);
    c.require(gt.n_slots >= 50000, "trace holds at least 50k slots");
    synth::RawTrace thin = synth::apply_missingness(trace, cfg.missingness,
                                                    pipeline::derive_seed(cfg.seed, 101));
    SlotGrid grid = build_standard_grid(thin.activities, thin.fixes, thin.glucose,
                                        thin.purchases, gt.t0, gt.slot_time(gt.n_slots), 15);
    impute::TrainConfig tc;
    tc.seed = pipeline::derive_seed(cfg.seed, 102);
    impute::EvaluationReport report =
        impute::evaluate_imputers(grid, 0.2, 20, tc, pipeline::derive_seed(cfg.seed, 103));
    std::map<impute::ImputerKind, double> acc;
    for (const auto& [kind, scores] : report.results) acc[kind] = scores.overall_accuracy;
    c.note("accuracy: logistic=" + fmt(acc[impute::ImputerKind::logistic]) +
           " nearest_neighbor=" + fmt(acc[impute::ImputerKind::nearest_neighbor]) +
           " rolling_mode=" + fmt(acc[impute::ImputerKind::rolling_mode]));
    c.require(acc[impute::ImputerKind::logistic] >
                  acc[impute::ImputerKind::nearest_neighbor],
              "logistic accuracy strictly exceeds nearest-neighbor");
    c.require(acc[impute::ImputerKind::logistic] > acc[impute::ImputerKind::rolling_mode],
              "logistic accuracy strictly exceeds rolling-mode");
    double elapsed = seconds_since(start);
    c.note("runtime " + fmt(elapsed) + " s");
    c.require(elapsed < 120.0, "runtime under 2 minutes");
    return c;
}

// ---- criterion 2 -----------------------------------------------------------

Check criterion2() {
    Check c;
    auto start = Clock::now();
    const double h = 1e-5;

    // logistic NLL gradient
    double worst_logistic = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        Rng rng(900 + static_cast<std::uint64_t>(trial));
        std::map<std::string, std::vector<TimedValue>> m;
        auto& ch = m[kChActivity];
        for (std::int64_t s = 0; s < 200; ++s)
            if (rng.bernoulli(0.6))
                ch.push_back({Timestamp{s * 15}, double(rng.below(kActivityClassCount))});
        SlotGrid grid = build_grid(m, Timestamp{0}, Timestamp{200 * 15}, 15);
        const std::size_t k = 2;
        auto targets = impute::training_targets(grid, k);
        if (targets.size() > 60) targets.resize(60);
        if (targets.empty()) continue;
        impute::LogisticWeights W = impute::LogisticWeights::zeros(k);
        for (auto& v : W.w) v = 0.3 * rng.normal();
        std::vector<double> grad(W.size());
        impute::logistic_loss_grad(W, grid, targets, grad);
        double num = 0.0, den = 0.0;
        for (std::size_t idx = 0; idx < W.size(); ++idx) {
            impute::LogisticWeights Wp = W, Wm = W;
            Wp.w[idx] += h;
            Wm.w[idx] -= h;
            double fd = (impute::logistic_loss(Wp, grid, targets) -
                         impute::logistic_loss(Wm, grid, targets)) /
                        (2.0 * h);
            num += (fd - grad[idx]) * (fd - grad[idx]);
            den += fd * fd;
        }
        double rel = std::sqrt(num) / std::max(std::sqrt(den), 1e-10);
        worst_logistic = std::max(worst_logistic, rel);
    }
    c.note("worst logistic gradient error " + fmt(worst_logistic));
    c.require(worst_logistic < 1e-4, "logistic NLL gradient matches finite differences");

    // masked kernel loss, plain and with an exogenous block
    auto kernel_case = [&](bool with_exog) {
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            Rng rng((with_exog ? 2000 : 1500) + static_cast<std::uint64_t>(trial));
            Eigen::Index n = 15, mb = 4, me = with_exog ? 3 : 0;
            Eigen::MatrixXd X(n, mb + me), M(n, mb + me);
            for (Eigen::Index i = 0; i < n; ++i) {
                for (Eigen::Index j = 0; j < mb; ++j) {
                    bool obs = j == 0 || rng.bernoulli(0.7);
                    M(i, j) = obs ? 1.0 : 0.0;
                    X(i, j) = obs ? rng.normal() : 0.0;
                }
                for (Eigen::Index j = mb; j < mb + me; ++j) {
                    bool obs = rng.bernoulli(0.6);
                    M(i, j) = obs ? 1.0 : 0.0;
                    X(i, j) = (obs && rng.bernoulli(0.3)) ? 1.0 : 0.0;
                }
            }
            Eigen::VectorXd y(n), w(mb + me);
            for (Eigen::Index i = 0; i < n; ++i) y(i) = rng.normal();
            for (Eigen::Index j = 0; j < mb; ++j) w(j) = 1.0 + 0.2 * rng.normal();
            for (Eigen::Index j = mb; j < mb + me; ++j) w(j) = 0.3 + 0.1 * rng.normal();
            Eigen::VectorXd grad;
            predict::kernel_loss_grad(X, M, y, w, grad);
            double num = 0.0, den = 0.0;
            for (Eigen::Index j = 0; j < w.size(); ++j) {
                Eigen::VectorXd wp = w, wm = w;
                wp(j) += h;
                wm(j) -= h;
                double fd = (predict::kernel_loss(X, M, y, wp) -
                             predict::kernel_loss(X, M, y, wm)) /
                            (2.0 * h);
                num += (fd - grad(j)) * (fd - grad(j));
                den += fd * fd;
            }
            worst = std::max(worst, std::sqrt(num) / std::max(std::sqrt(den), 1e-10));
        }
        return worst;
    };
    double worst_masked = kernel_case(false);
    c.note("worst masked kernel gradient error " + fmt(worst_masked));
    c.require(worst_masked < 1e-4, "masked kernel gradient matches finite differences");
    double worst_exog = kernel_case(true);
    c.note("worst exogenous kernel gradient error " + fmt(worst_exog));
    c.require(worst_exog < 1e-4, "exogenous kernel gradient matches finite differences");

    double elapsed = seconds_since(start);
    c.note("runtime " + fmt(elapsed) + " s");
    c.require(elapsed < 30.0, "runtime under 30 seconds");
    return c;
}

// ---- criterion 3 -----------------------------------------------------------

Check criterion3() {
    Check c;
    auto start = Clock::now();
    Rng rng(777);
    auto at_meters = [](double east, double north) {
        GeoFix f;
        f.lat = 40.0 + north / 111320.0;
        f.lon = -74.0 + east / (111320.0 * std::cos(40.0 * 0.017453292519943295));
        f.accuracy_m = 10.0;
        return f;
    };
    int mismatches = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<GeoFix> pts;
        int blobs = 1 + static_cast<int>(rng.below(4));
        for (int b = 0; b < blobs; ++b) {
            double cx = rng.uniform(-900, 900), cy = rng.uniform(-900, 900);
            double sigma = rng.uniform(5, 30);
            int count = 5 + static_cast<int>(rng.below(45));
            for (int i = 0; i < count; ++i)
                pts.push_back(
                    at_meters(cx + sigma * rng.normal(), cy + sigma * rng.normal()));
        }
        int noise = static_cast<int>(rng.below(60));
        for (int i = 0; i < noise; ++i)
            pts.push_back(at_meters(rng.uniform(-1000, 1000), rng.uniform(-1000, 1000)));
        if (pts.size() > 200) pts.resize(200);
        cluster::DbscanParams params{rng.uniform(15, 60), 3 + static_cast<int>(rng.below(10))};
        auto impl = cluster::dbscan(pts, params);
        auto ref = oracles::dbscan_reference(pts, params);
        if (impl != ref) ++mismatches;
    }
    c.note("mismatching instances: " + std::to_string(mismatches) + " of 100");
    c.require(mismatches == 0, "implementation matches the density-reachability oracle");
    double elapsed = seconds_since(start);
    c.note("runtime " + fmt(elapsed) + " s");
    c.require(elapsed < 60.0, "runtime under 1 minute");
    return c;
}

// ---- criterion 4 -----------------------------------------------------------

Check criterion4() {
    Check c;
    Rng rng(4040);
    double worst_ridge = 0, worst_kkt = 0, worst_tv = 0, worst_limit = 0;
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::MatrixXd X(20, 5);
        Eigen::VectorXd y(20);
        for (int i = 0; i < 20; ++i) {
            for (int j = 0; j < 5; ++j) X(i, j) = rng.normal();
            y(i) = rng.normal();
        }
        double lambda = rng.uniform(0.5, 10.0);

        // ridge: closed form vs coordinate descent (elastic net with the
        // l1 term switched off)
        Eigen::VectorXd closed = predict::fit_ridge(X, y, lambda).w;
        Eigen::VectorXd iterative = predict::fit_elastic_net(X, y, lambda, 0.0).w;
        worst_ridge = std::max(worst_ridge, (closed - iterative).cwiseAbs().maxCoeff());

        // lasso KKT residual
        predict::FitResult lasso = predict::fit_lasso(X, y, lambda);
        Eigen::VectorXd grad = 2.0 * X.transpose() * (X * lasso.w - y);
        for (int j = 0; j < 5; ++j) {
            double viol = lasso.w(j) == 0.0
                              ? std::max(0.0, std::abs(grad(j)) - lambda)
                              : std::abs(grad(j) + lambda * (lasso.w(j) > 0 ? 1.0 : -1.0));
            worst_kkt = std::max(worst_kkt, viol);
        }

        // TV objective vs the subgradient oracle
        predict::FitResult tv = predict::fit_tv(X, y, lambda);
        double oracle = oracles::tv_subgradient_best(X, y, lambda);
        worst_tv = std::max(worst_tv, std::abs(tv.objective - oracle));

        // lambda -> 0 limits collapse to ordinary least squares
        Eigen::VectorXd wols = predict::fit_ols(X, y).w;
        worst_limit = std::max(worst_limit,
                               (predict::fit_lasso(X, y, 0.0).w - wols).cwiseAbs().maxCoeff());
        worst_limit = std::max(
            worst_limit, (predict::fit_ridge(X, y, 1e-10).w - wols).cwiseAbs().maxCoeff());
        worst_limit = std::max(worst_limit,
                               (predict::fit_tv(X, y, 0.0).w - wols).cwiseAbs().maxCoeff());
    }
    c.note("ridge closed-vs-iterative max gap " + fmt(worst_ridge));
    c.require(worst_ridge < 1e-6, "ridge routes agree to 1e-6");
    c.note("worst lasso KKT violation " + fmt(worst_kkt));
    c.require(worst_kkt < 1e-6, "lasso satisfies KKT at tolerance 1e-6");
    c.note("worst TV objective gap vs oracle " + fmt(worst_tv));
    c.require(worst_tv < 1e-6, "TV reparameterization matches the subgradient oracle");
    c.note("worst lambda->0 deviation from OLS " + fmt(worst_limit));
    c.require(worst_limit < 1e-6, "lambda->0 limits recover OLS");
    return c;
}

// ---- criterion 5 -----------------------------------------------------------

Check criterion5() {
    Check c;
    auto start = Clock::now();
    for (std::uint64_t seed : {42ULL, 1ULL, 7ULL}) {
        synth::SynthConfig cfg;
        cfg.seed = seed;
        cfg.days = 28;
        cfg.missingness.glucose = 0.40;
        auto [trace, gt] = synth::generate(cfg);
        synth::RawTrace thin = synth::apply_missingness(
            trace, cfg.missingness, pipeline::derive_seed(cfg.seed, 101));
        SlotGrid grid = build_standard_grid(thin.activities, thin.fixes, thin.glucose,
                                            thin.purchases, gt.t0,
                                            gt.slot_time(gt.n_slots), 15);
        predict::CgmSeries cgm = predict::extract_cgm(grid);
        std::size_t missing = 0;
        for (auto m : cgm.mask) missing += m == 0;
        double rate = double(missing) / double(cgm.size());
        c.require(rate >= 0.30, "seed " + std::to_string(seed) +
                                    ": lag-feature missingness at least 30% (" + fmt(rate) +
                                    ")");
        predict::HyperParams hp;
        predict::SgdConfig sgd;
        sgd.seed = pipeline::derive_seed(cfg.seed, 105);
        std::vector<predict::ModelSpec> models = {
            predict::standard_model(predict::ModelKind::ols, hp, sgd),
            predict::standard_model(predict::ModelKind::kernel_masked, hp, sgd)};
        std::vector<int> horizons = {30};
        predict::CvResult res = predict::cross_validate(cgm, nullptr, models, horizons, 5, 8);
        auto ols = res.mean_rmse("ols", 30);
        auto kernel = res.mean_rmse("kernel", 30);
        bool got = ols.has_value() && kernel.has_value();
        c.require(got, "seed " + std::to_string(seed) + ": both models produced scores");
        if (got) {
            c.note("seed " + std::to_string(seed) + ": kernel=" + fmt(*kernel) +
                   " ols=" + fmt(*ols));
            c.require(*kernel < *ols,
                      "seed " + std::to_string(seed) + ": kernel beats OLS at 30 minutes");
        }
    }
    double elapsed = seconds_since(start);
    c.note("runtime " + fmt(elapsed) + " s");
    c.require(elapsed < 300.0, "runtime under 5 minutes");
    return c;
}

// ---- criterion 6 -----------------------------------------------------------

Check criterion6() {
    Check c;
    for (std::uint64_t seed : {42ULL, 1ULL, 7ULL}) {
        synth::SynthConfig cfg;
        cfg.seed = seed;
        cfg.days = 30;
        auto [trace, gt] = synth::generate(cfg);
        synth::RawTrace thin = synth::apply_missingness(
            trace, cfg.missingness, pipeline::derive_seed(cfg.seed, 101));
        SlotGrid grid = build_standard_grid(thin.activities, thin.fixes, thin.glucose,
                                            thin.purchases, gt.t0,
                                            gt.slot_time(gt.n_slots), 15);
        predict::CgmSeries cgm = predict::extract_cgm(grid);
        predict::HyperParams hp;
        predict::SgdConfig sgd;
        sgd.seed = pipeline::derive_seed(cfg.seed, 105);
        std::vector<predict::ModelSpec> models;
        for (auto kind : {predict::ModelKind::static_last, predict::ModelKind::ols,
                          predict::ModelKind::lasso, predict::ModelKind::ridge,
                          predict::ModelKind::elastic_net,
                          predict::ModelKind::total_variation})
            models.push_back(predict::standard_model(kind, hp, sgd));
        std::vector<int> horizons = {15, 30, 60};
        predict::CvResult res = predict::cross_validate(cgm, nullptr, models, horizons, 5, 12);
        for (int h : horizons) {
            auto st = res.mean_rmse("static", h);
            c.require(st.has_value(), "static produced a score");
            if (!st) continue;
            for (const char* m : {"ols", "lasso", "ridge", "elastic_net", "tv"}) {
                auto v = res.mean_rmse(m, h);
                bool win = v.has_value() && *v < *st;
                c.require(win, "seed " + std::to_string(seed) + " h=" + std::to_string(h) +
                                   ": " + m + " (" + fmt(v.value_or(-1)) + ") beats static (" +
                                   fmt(*st) + ")");
            }
        }
    }
    return c;
}

// ---- criterion 7 -----------------------------------------------------------

Check criterion7() {
    Check c;
    synth::SynthConfig cfg;  // the default trace
    PipelineRun run = run_chain(cfg);
    c.require(!run.events.empty(), "events were detected");

    std::size_t recovered = 0;
    for (const auto& v : run.gt.visits) {
        Timestamp mid = run.gt.visit_midpoint(v);
        for (const auto& e : run.events) {
            if (std::llabs(e.peak_time - mid) <= 15 * 60) {
                ++recovered;
                break;
            }
        }
    }
    double recall = run.gt.visits.empty()
                        ? 0.0
                        : double(recovered) / double(run.gt.visits.size());
    c.note("recovered " + std::to_string(recovered) + " of " +
           std::to_string(run.gt.visits.size()) + " visits (recall " + fmt(recall) + ")");
    c.require(recall >= 0.90, "at least 90% of visit midpoints within 15 minutes of a peak");

    // translation: +1 day applied to fix times and the evaluation grid
    const std::int64_t day = 86400;
    bool all_shift = true;
    for (const auto& h : run.hotspots) {
        if (h.members.empty()) continue;
        std::vector<Timestamp> times, shifted;
        for (const auto& m : h.members) {
            times.push_back(m.t);
            shifted.push_back(m.t + day);
        }
        events::DensityCurve base = events::density(times, 7200.0, run.grid.t0(), 15,
                                                    run.grid.n_slots());
        events::DensityCurve moved = events::density(shifted, 7200.0, run.grid.t0() + day,
                                                     15, run.grid.n_slots());
        auto p1 = events::find_event_peaks(base, events::PeakParams{7200.0, 0.5});
        auto p2 = events::find_event_peaks(moved, events::PeakParams{7200.0, 0.5});
        if (p1.size() != p2.size()) {
            all_shift = false;
            break;
        }
        for (std::size_t i = 0; i < p1.size(); ++i) {
            if (moved.time_at(p2[i]).seconds_utc - base.time_at(p1[i]).seconds_utc != day)
                all_shift = false;
        }
    }
    c.require(all_shift, "translating all timestamps by +1 day shifts every peak by +1 day");
    return c;
}

// ---- criterion 8 -----------------------------------------------------------

Check criterion8() {
    Check c;
    synth::SynthConfig cfg;
    cfg.seed = 42;
    cfg.days = 45;  // enough food events for a stable argmax
    PipelineRun run = run_chain(cfg);
    predict::CgmSeries cgm = predict::extract_cgm(run.grid);

    analyze::IndicatorSeries stat = analyze::stationary_indicator(run.grid, cgm);
    analyze::IndicatorSeries ev = analyze::event_indicator(run.events, cgm, "event");
    analyze::IndicatorSeries food =
        analyze::event_indicator(run.events, cgm, "food_event", &run.food_hotspots);
    analyze::CorrelationCurve c_stat = analyze::correlation_curve(stat, cgm, 180, 5, 30.0);
    analyze::CorrelationCurve c_ev = analyze::correlation_curve(ev, cgm, 180, 5, 30.0);
    analyze::CorrelationCurve c_food = analyze::correlation_curve(food, cgm, 180, 5, 30.0);

    auto peak = c_food.peak_lag();
    c.require(peak.has_value(), "food-event curve has a defined maximum");
    if (peak) {
        c.note("food-event argmax at " + std::to_string(*peak) + " minutes");
        c.require(*peak >= 50 && *peak <= 70, "argmax lies in [50, 70] minutes");
        auto at = [&](const analyze::CorrelationCurve& curve) {
            for (std::size_t i = 0; i < curve.lag_min.size(); ++i)
                if (curve.lag_min[i] == *peak) return curve.r[i].value_or(-2.0);
            return -2.0;
        };
        double rf = at(c_food), re = at(c_ev), rs = at(c_stat);
        c.note("r at peak: food=" + fmt(rf) + " event=" + fmt(re) + " stationary=" + fmt(rs));
        c.require(rf >= re, "food-event correlation >= all-event correlation at the peak");
        c.require(re >= rs, "all-event correlation >= stationary correlation at the peak");
    }
    return c;
}

// ---- criterion 9 -----------------------------------------------------------

Check criterion9() {
    Check c;
    synth::SynthConfig cfg;
    cfg.seed = 42;
    cfg.days = 30;
    PipelineRun run = run_chain(cfg);
    predict::CgmSeries cgm = predict::extract_cgm(run.grid);
    predict::CgmSeries exog = exog_channel(run.grid, run.events, run.food_hotspots);

    predict::HyperParams hp;
    predict::SgdConfig sgd;
    sgd.seed = pipeline::derive_seed(cfg.seed, 105);
    std::vector<predict::ModelSpec> models = {
        predict::standard_model(predict::ModelKind::kernel_masked, hp, sgd),
        predict::standard_model(predict::ModelKind::kernel_exog, hp, sgd)};
    std::vector<int> horizons = {30};
    predict::CvResult res = predict::cross_validate(cgm, &exog, models, horizons, 5, 12);
    auto masked = res.mean_rmse("kernel", 30);
    auto exog_rmse = res.mean_rmse("kernel_exog", 30);
    c.require(masked.has_value() && exog_rmse.has_value(), "both kernels produced scores");
    if (masked && exog_rmse) {
        double rel = std::abs(*exog_rmse - *masked) / *masked;
        c.note("kernel=" + fmt(*masked) + " kernel_exog=" + fmt(*exog_rmse) +
               " relative gap=" + fmt(100.0 * rel) + "%");
        c.require(rel <= 0.01, "exogenous 30-minute RMSE within 1% of the masked kernel");
    }
    return c;
}

// ---- criterion 10 ----------------------------------------------------------

Check criterion10() {
    Check c;
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "glucolens_acceptance_run";
    fs::remove_all(dir);

    pipeline::PipelineConfig cfg;
    cfg.out_dir = dir;
    cfg.seed = 42;
    cfg.synth.days = 30;

    auto start = Clock::now();
    pipeline::run_all(cfg);
    double elapsed = seconds_since(start);
    c.note("full pipeline wall clock " + fmt(elapsed) + " s");
    c.require(elapsed < 600.0, "30-day pipeline completes in under 10 minutes");

    std::map<std::string, std::string> snapshot;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        snapshot[entry.path().filename().string()] = buf.str();
    }
    c.require(snapshot.size() >= 18, "all expected artifacts were produced");

    fs::remove_all(dir);
    pipeline::run_all(cfg);

    bool identical = true;
    std::string offender;
    std::size_t compared = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        std::string name = entry.path().filename().string();
        std::ifstream in(entry.path(), std::ios::binary);
        std::ostringstream buf;
        buf << in.rdbuf();
        auto it = snapshot.find(name);
        if (it == snapshot.end()) {
            identical = false;
            offender = name + " (new file)";
            break;
        }
        ++compared;
        if (name == "manifest.json") {
            // wall-clock timings are the one legitimately varying field
            auto strip = [](const std::string& text) {
                nlohmann::json j = nlohmann::json::parse(text);
                for (auto& [stage, entry2] : j["stages"].items()) entry2.erase("wall_clock_ms");
                return j.dump();
            };
            if (strip(it->second) != strip(buf.str())) {
                identical = false;
                offender = name;
                break;
            }
        } else if (it->second != buf.str()) {
            identical = false;
            offender = name;
            break;
        }
    }
    c.note("compared " + std::to_string(compared) + " artifacts");
    c.require(compared == snapshot.size(), "rerun produced the same artifact set");
    c.require(identical, identical ? "rerun is byte-identical (manifest timings aside)"
                                   : "artifact differs: " + offender);
    fs::remove_all(dir);
    return c;
}

// ---- criterion 11 ----------------------------------------------------------

Check criterion11() {
    Check c;
    synth::SynthConfig cfg;
    cfg.seed = 42;
    cfg.days = 14;
    PipelineRun run = run_chain(cfg);
    c.require(!run.hotspots.empty(), "hotspots were detected");

    geofence::GeofencePlan plan = geofence::plan_geofences(run.hotspots, 20);
    c.note(std::to_string(plan.superfences.size()) + " superfences over " +
           std::to_string(run.hotspots.size()) + " hotspots");
    geofence::ReplayReport report = geofence::replay_trace(plan, run.hotspots, run.fixes);
    c.note("entries=" + std::to_string(report.entries) +
           " covered=" + std::to_string(report.covered_entries) +
           " max_active=" + std::to_string(report.max_active_seen));
    c.require(report.max_active_seen <= 20, "active fence set never exceeds 20");
    c.require(report.entries > 0, "the replay crossed into hotspots");
    c.require(report.covered_entries == report.entries,
              "every hotspot entry happened with that fence already active");

    // every ground-truth visit maps to a detected hotspot whose fence was
    // active at entry: with full coverage above it suffices that each
    // visited ground-truth hotspot matches a detected hotspot
    std::size_t matched = 0, visited = 0;
    std::set<int> visited_gt;
    for (const auto& v : run.gt.visits) visited_gt.insert(v.hotspot);
    for (int gid : visited_gt) {
        ++visited;
        const auto& g = run.gt.hotspots[static_cast<std::size_t>(gid)];
        for (const auto& h : run.hotspots) {
            if (haversine_m(h.centroid, GeoPoint{g.lat, g.lon}) < 150.0) {
                ++matched;
                break;
            }
        }
    }
    c.note(std::to_string(matched) + " of " + std::to_string(visited) +
           " visited ground-truth hotspots detected");
    c.require(matched == visited, "every visited ground-truth hotspot has a detected fence");
    return c;
}

}  // namespace

int main(int argc, char** argv) {
    int criterion = 0;
    for (int i = 1; i + 1 < argc; ++i)
        if (std::strcmp(argv[i], "--criterion") == 0) criterion = std::atoi(argv[i + 1]);
    if (criterion < 1 || criterion > 11) {
        std::fprintf(stderr, "usage: acceptance --criterion N   (N in 1..11)\n");
        return 2;
    }
    static const char* kTitles[] = {
        "",
        "imputer ordering: logistic beats rolling-mode and nearest-neighbor",
        "analytic gradients match central finite differences",
        "dbscan matches the brute-force density-reachability oracle",
        "solver agreement: ridge routes, lasso KKT, TV oracle, lambda->0 limits",
        "masked kernel regression beats OLS under heavy missingness",
        "every linear model beats the static baseline",
        "event recovery within 15 minutes and exact translation equivariance",
        "food-event correlation peaks near 60 minutes with the expected ordering",
        "exogenous kernel parity within 1% at 30 minutes",
        "full-pipeline determinism and runtime at 30-day scale",
        "geofence active set capped at 20 with covered entries",
    };
    Check result;
    switch (criterion) {
        case 1: result = criterion1(); break;
        case 2: result = criterion2(); break;
        case 3: result = criterion3(); break;
        case 4: result = criterion4(); break;
        case 5: result = criterion5(); break;
        case 6: result = criterion6(); break;
        case 7: result = criterion7(); break;
        case 8: result = criterion8(); break;
        case 9: result = criterion9(); break;
        case 10: result = criterion10(); break;
        case 11: result = criterion11(); break;
    }
    for (const auto& note : result.notes) std::printf("%s\n", note.c_str());
    std::printf("[%s] criterion %d: %s\n", result.ok ? "PASS" : "FAIL", criterion,
                kTitles[criterion]);
    return result.ok ? 0 : 1;
}
