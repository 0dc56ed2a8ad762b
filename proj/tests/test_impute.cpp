#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "glucolens/impute.hpp"
#include "glucolens/rng.hpp"
#include "glucolens/slot_grid.hpp"
#include "glucolens/synth.hpp"

using namespace glucolens;
using impute::LogisticWeights;

namespace {

SlotGrid activity_grid(const std::vector<std::pair<std::int64_t, ActivityClass>>& obs,
                       std::int64_t n_slots = 64) {
    std::map<std::string, std::vector<TimedValue>> m;
    auto& ch = m[kChActivity];
    for (auto [slot, label] : obs)
        ch.push_back({Timestamp{slot * 15}, static_cast<double>(static_cast<int>(label))});
    return build_grid(m, Timestamp{0}, Timestamp{n_slots * 15}, 15);
}

constexpr auto W = ActivityClass::walking;
constexpr auto R = ActivityClass::running;
constexpr auto C = ActivityClass::cycling;
constexpr auto S = ActivityClass::stationary;
constexpr auto A = ActivityClass::automotive;
constexpr auto SA = ActivityClass::stationary_automotive;

}  // namespace

TEST_SUITE("impute_nn") {
    TEST_CASE("observed slot returns its own label") {
        SlotGrid g = activity_grid({{5, C}});
        CHECK(impute::impute_nn(g, 5) == C);
    }

    TEST_CASE("nearest of two observed neighbors wins") {
        SlotGrid g = activity_grid({{7, W}, {15, C}});
        CHECK(impute::impute_nn(g, 10) == W);  // 3 back vs 5 ahead
    }

    TEST_CASE("equidistant tie resolves to the earlier slot") {
        SlotGrid g = activity_grid({{6, S}, {14, R}});
        CHECK(impute::impute_nn(g, 10) == S);
    }

    TEST_CASE("no observations anywhere throws") {
        SlotGrid g = activity_grid({});
        CHECK_THROWS(impute::impute_nn(g, 3));
    }
}

TEST_SUITE("impute_mode") {
    TEST_CASE("plain majority") {
        CHECK(impute::mode_label(std::vector<ActivityClass>{A, A, S}) == A);
    }

    TEST_CASE("single observation") {
        CHECK(impute::mode_label(std::vector<ActivityClass>{W}) == W);
    }

    TEST_CASE("tie resolves by alphabet order") {
        CHECK(impute::mode_label(std::vector<ActivityClass>{W, W, C, C}) == W);
        CHECK(impute::mode_label(std::vector<ActivityClass>{SA, SA, A, A}) == A);
    }

    TEST_CASE("empty window throws") {
        CHECK_THROWS(impute::mode_label(std::vector<ActivityClass>{}));
        SlotGrid g = activity_grid({{40, A}});
        CHECK_THROWS(impute::impute_mode(g, 5, 2));
    }
}

TEST_SUITE("logistic") {
    TEST_CASE("zero weights give the uniform distribution") {
        SlotGrid g = activity_grid({{5, W}, {6, C}});
        LogisticWeights zero = LogisticWeights::zeros(3);
        auto p = impute::logistic_predict_proba(zero, g, 6);
        double sum = 0.0;
        for (double v : p) {
            CHECK(v == doctest::Approx(1.0 / 7.0));
            sum += v;
        }
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }

    TEST_CASE("adding a constant to every class score leaves probabilities unchanged") {
        SlotGrid g = activity_grid({{4, A}, {5, SA}, {7, A}});
        LogisticWeights w = LogisticWeights::zeros(2);
        Rng rng(5);
        for (auto& v : w.w) v = rng.normal();
        auto p1 = impute::logistic_predict_proba(w, g, 5);
        LogisticWeights shifted = w;
        for (std::size_t b = 0; b < kActivityClassCount; ++b)
            for (std::size_t pos = 0; pos < shifted.width(); ++pos)
                for (std::size_t a = 0; a < kActivityClassCount; ++a)
                    shifted.at(a, b, pos) += 0.37;
        auto p2 = impute::logistic_predict_proba(shifted, g, 5);
        for (std::size_t a = 0; a < kActivityClassCount; ++a)
            CHECK(p1[a] == doctest::Approx(p2[a]).epsilon(1e-9));
    }

    TEST_CASE("two-class single-lag softmax matches the closed form") {
        // scores (1, 0) -> (e/(e+1), 1/(e+1))
        SlotGrid g = activity_grid({{4, W}, {5, R}});
        LogisticWeights w = LogisticWeights::zeros(1);
        // neighbor is walking at offset -1 (position 0); give walking score 1
        w.at(static_cast<std::size_t>(W), static_cast<std::size_t>(W), 0) = 1.0;
        auto p = impute::logistic_predict_proba(w, g, 5);
        double e = std::exp(1.0);
        // remaining six classes share the zero score
        CHECK(p[0] == doctest::Approx(e / (e + 6.0)).epsilon(1e-9));
        CHECK(p[1] == doctest::Approx(1.0 / (e + 6.0)).epsilon(1e-9));
    }

    TEST_CASE("probabilities always form a simplex point") {
        synth::SynthConfig cfg;
        cfg.days = 1;
        auto [trace, gt] = synth::generate(cfg);
        auto thin = synth::apply_missingness(trace, cfg.missingness, 17);
        SlotGrid g = build_standard_grid(thin.activities, {}, {}, {}, gt.t0,
                                         gt.slot_time(gt.n_slots), 15);
        impute::TrainConfig tc;
        tc.epochs = 2;
        LogisticWeights w = impute::logistic_train(g, 4, tc);
        Rng rng(3);
        for (int i = 0; i < 200; ++i) {
            auto t = static_cast<std::size_t>(rng.below(g.n_slots()));
            auto p = impute::logistic_predict_proba(w, g, t);
            double sum = 0.0;
            for (double v : p) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                sum += v;
            }
            CHECK(std::abs(sum - 1.0) <= 1e-9);
        }
    }

    TEST_CASE("analytic gradient matches central finite differences") {
        synth::SynthConfig cfg;
        cfg.days = 1;
        cfg.seed = 9;
        auto [trace, gt] = synth::generate(cfg);
        auto thin = synth::apply_missingness(trace, cfg.missingness, 29);
        SlotGrid g = build_standard_grid(thin.activities, {}, {}, {}, gt.t0,
                                         gt.slot_time(gt.n_slots), 15);
        const std::size_t k = 2;
        auto targets_all = impute::training_targets(g, k);
        REQUIRE(targets_all.size() > 50);
        std::vector<std::size_t> targets(targets_all.begin(), targets_all.begin() + 50);

        LogisticWeights w = LogisticWeights::zeros(k);
        Rng rng(123);
        for (auto& v : w.w) v = 0.3 * rng.normal();
        std::vector<double> grad(w.size());
        impute::logistic_loss_grad(w, g, targets, grad);

        const double h = 1e-5;
        Rng pick(77);
        for (int trial = 0; trial < 5; ++trial) {
            auto idx = static_cast<std::size_t>(pick.below(w.size()));
            LogisticWeights wp = w, wm = w;
            wp.w[idx] += h;
            wm.w[idx] -= h;
            double fd = (impute::logistic_loss(wp, g, targets) -
                         impute::logistic_loss(wm, g, targets)) /
                        (2.0 * h);
            double denom = std::max({std::abs(fd), std::abs(grad[idx]), 1e-8});
            CHECK(std::abs(fd - grad[idx]) / denom < 1e-4);
        }
    }

    TEST_CASE("full-batch loss never ends above its initial value") {
        synth::SynthConfig cfg;
        cfg.days = 1;
        auto [trace, gt] = synth::generate(cfg);
        auto thin = synth::apply_missingness(trace, cfg.missingness, 5);
        SlotGrid g = build_standard_grid(thin.activities, {}, {}, {}, gt.t0,
                                         gt.slot_time(gt.n_slots), 15);
        auto targets = impute::training_targets(g, 4);
        impute::TrainConfig tc;
        tc.epochs = 6;
        tc.learning_rate = 0.5;
        LogisticWeights w = impute::logistic_train(g, 4, tc);
        double init = impute::logistic_loss(LogisticWeights::zeros(4), g, targets);
        double trained = impute::logistic_loss(w, g, targets);
        CHECK(trained <= init + 1e-9);
    }

    TEST_CASE("alternating traffic teaches cross-class weights") {
        // pure automotive <-> stationary_automotive alternation: the learned
        // tensor should route mass from an observed automotive neighbor to
        // the stationary_automotive score and vice versa at odd offsets
        std::vector<std::pair<std::int64_t, ActivityClass>> obs;
        for (std::int64_t s = 0; s < 4000; ++s) obs.push_back({s, s % 2 == 0 ? A : SA});
        SlotGrid g = activity_grid(obs, 4000);
        impute::TrainConfig tc;
        tc.epochs = 8;
        tc.learning_rate = 0.5;
        const std::size_t k = 2;
        LogisticWeights w = impute::logistic_train(g, k, tc);
        auto a = static_cast<std::size_t>(A);
        auto sa = static_cast<std::size_t>(SA);
        for (std::size_t pos : {k - 1, k + 1}) {  // odd offsets
            CHECK(w.at(sa, a, pos) > w.at(a, a, pos));
            CHECK(w.at(a, sa, pos) > w.at(sa, sa, pos));
        }
    }

    TEST_CASE("training refuses an all-unknown channel") {
        std::vector<std::pair<std::int64_t, ActivityClass>> obs;
        for (std::int64_t s = 0; s < 32; ++s) obs.push_back({s, ActivityClass::unknown});
        SlotGrid g = activity_grid(obs, 32);
        impute::TrainConfig tc;
        CHECK_THROWS(impute::logistic_train(g, 2, tc));
    }
}

TEST_SUITE("evaluate_imputers") {
    TEST_CASE("scoring a perfect predictor") {
        std::vector<ActivityClass> truth = {W, S, A, SA, W, C};
        auto s = impute::score_predictions(truth, truth);
        CHECK(s.overall_accuracy == 1.0);
        for (std::size_t c = 0; c < kActivityClassCount; ++c) {
            if (s.support[c] > 0) CHECK(*s.f_score[c] == doctest::Approx(1.0));
            else CHECK(!s.f_score[c].has_value());
        }
    }

    TEST_CASE("constant predictor on balanced two-class data") {
        // stationary recall 1, precision 0.5 -> F = 2/3; walking F = 0
        std::vector<ActivityClass> truth, pred;
        for (int i = 0; i < 10; ++i) {
            truth.push_back(i % 2 == 0 ? S : W);
            pred.push_back(S);
        }
        auto s = impute::score_predictions(truth, pred);
        CHECK(s.overall_accuracy == doctest::Approx(0.5));
        CHECK(*s.f_score[static_cast<std::size_t>(S)] == doctest::Approx(2.0 / 3.0));
        CHECK(*s.f_score[static_cast<std::size_t>(W)] == doctest::Approx(0.0));
        CHECK(!s.f_score[static_cast<std::size_t>(C)].has_value());
    }

    TEST_CASE("scores are invariant to evaluation order") {
        Rng rng(8);
        std::vector<ActivityClass> truth, pred;
        for (int i = 0; i < 500; ++i) {
            truth.push_back(static_cast<ActivityClass>(rng.below(7)));
            pred.push_back(static_cast<ActivityClass>(rng.below(7)));
        }
        auto s1 = impute::score_predictions(truth, pred);
        std::vector<std::size_t> perm(truth.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
        rng.shuffle(perm);
        std::vector<ActivityClass> truth2, pred2;
        for (std::size_t i : perm) {
            truth2.push_back(truth[i]);
            pred2.push_back(pred[i]);
        }
        auto s2 = impute::score_predictions(truth2, pred2);
        CHECK(s1.overall_accuracy == s2.overall_accuracy);
        for (std::size_t c = 0; c < kActivityClassCount; ++c) {
            CHECK(s1.support[c] == s2.support[c]);
            CHECK(s1.f_score[c].has_value() == s2.f_score[c].has_value());
            if (s1.f_score[c]) CHECK(*s1.f_score[c] == doctest::Approx(*s2.f_score[c]));
        }
    }

    TEST_CASE("logistic beats the baselines on alternating synthetic data") {
        synth::SynthConfig cfg;
        cfg.days = 3;
        auto [trace, gt] = synth::generate(cfg);
        auto thin = synth::apply_missingness(trace, cfg.missingness, 55);
        SlotGrid g = build_standard_grid(thin.activities, {}, {}, {}, gt.t0,
                                         gt.slot_time(gt.n_slots), 15);
        impute::TrainConfig tc;
        auto report = impute::evaluate_imputers(g, 0.2, 20, tc, 91);
        std::map<impute::ImputerKind, double> acc;
        for (auto& [kind, s] : report.results) acc[kind] = s.overall_accuracy;
        CHECK(acc[impute::ImputerKind::logistic] > acc[impute::ImputerKind::rolling_mode]);
        CHECK(acc[impute::ImputerKind::logistic] >
              acc[impute::ImputerKind::nearest_neighbor]);
    }
}
