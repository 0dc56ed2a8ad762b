#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glucolens/activity.hpp"
#include "glucolens/slot_grid.hpp"

namespace glucolens::impute {

struct TrainConfig {
    double learning_rate = 0.2;
    int epochs = 15;
    int batch_size = 64;
    std::uint64_t seed = 1;
    double l2 = 0.0;
};

// W[a][b][p] is the contribution of an observed neighbor of class b at
// window position p (p = offset + k) toward the score of class a. The
// center position carries no weight: the center observation is excluded
// from the input window so the model generalizes to unobserved centers.
struct LogisticWeights {
    std::size_t k = 0;
    std::vector<double> w;

    static LogisticWeights zeros(std::size_t k);
    std::size_t width() const { return 2 * k + 1; }
    std::size_t size() const { return w.size(); }
    double& at(std::size_t a, std::size_t b, std::size_t p) {
        return w[(a * kActivityClassCount + b) * width() + p];
    }
    double at(std::size_t a, std::size_t b, std::size_t p) const {
        return w[(a * kActivityClassCount + b) * width() + p];
    }
};

// Label of the temporally nearest observed activity slot; equidistant ties
// resolve to the earlier slot. Throws when no activity is observed at all.
ActivityClass impute_nn(const SlotGrid& grid, std::size_t t);

// Modal label; ties resolve by fixed alphabet order. Throws on empty input.
ActivityClass mode_label(std::span<const ActivityClass> labels);

// Modal observed label over the given window slots.
ActivityClass impute_mode(const SlotGrid& grid, std::span<const std::size_t> window_slots);
ActivityClass impute_mode(const SlotGrid& grid, std::size_t center, std::size_t k);

// Observed, non-unknown slots that have at least one observed neighbor
// within +-k (center excluded): the trainable targets.
std::vector<std::size_t> training_targets(const SlotGrid& grid, std::size_t k);

// Mean negative log-likelihood over `targets` (without the l2 term).
double logistic_loss(const LogisticWeights& W, const SlotGrid& grid,
                     std::span<const std::size_t> targets);

// Same, also accumulating d(mean NLL)/dW into `grad` (sized like W.w).
double logistic_loss_grad(const LogisticWeights& W, const SlotGrid& grid,
                          std::span<const std::size_t> targets, std::span<double> grad);

LogisticWeights logistic_train(const SlotGrid& grid, std::size_t k, const TrainConfig& cfg);

std::array<double, kActivityClassCount> logistic_predict_proba(const LogisticWeights& W,
                                                               const SlotGrid& grid,
                                                               std::size_t t);

struct SlotProbabilities {
    std::vector<std::array<double, kActivityClassCount>> p;
    // 0 where the window holds no observed neighbor; such slots cannot be
    // imputed and their probabilities are the uninformative uniform.
    std::vector<std::uint8_t> imputable;
};

SlotProbabilities predict_all_slots(const LogisticWeights& W, const SlotGrid& grid);

enum class ImputerKind { nearest_neighbor, rolling_mode, logistic };
const char* to_string(ImputerKind kind);

struct ImputerScores {
    double overall_accuracy = 0.0;
    std::size_t n_eval = 0;
    // One-vs-all F-score per class; nullopt when the class is absent from
    // the held-out set.
    std::array<std::optional<double>, kActivityClassCount> f_score;
    std::array<std::size_t, kActivityClassCount> support{};
};

ImputerScores score_predictions(std::span<const ActivityClass> truth,
                                std::span<const ActivityClass> predicted);

struct EvaluationReport {
    std::vector<std::pair<ImputerKind, ImputerScores>> results;
};

// Holds out `holdout_fraction` of the observed activity slots (seeded),
// re-imputes them with each method and scores against the hidden labels.
// Slots whose neighbor window is empty fall back to the nearest-neighbor
// label for every imputer.
EvaluationReport evaluate_imputers(const SlotGrid& grid, double holdout_fraction,
                                   std::size_t k, const TrainConfig& cfg,
                                   std::uint64_t holdout_seed);

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report);

void write_weights_json(const std::filesystem::path& path, const LogisticWeights& W);
LogisticWeights read_weights_json(const std::filesystem::path& path);

}  // namespace glucolens::impute
