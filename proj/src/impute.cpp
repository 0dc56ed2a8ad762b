#include "glucolens/impute.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "glucolens/csv.hpp"
#include "glucolens/rng.hpp"

namespace glucolens::impute {

namespace {

constexpr std::size_t kA = kActivityClassCount;

// Observed (position, class) pairs in the +-k window around t, center
// excluded. Positions are offset + k in [0, 2k].
struct WindowFeatures {
    std::vector<std::size_t> pos;
    std::vector<std::size_t> cls;
    std::size_t n = 0;
};

void collect_window(const Channel& act, std::size_t n_slots, std::size_t t, std::size_t k,
                    WindowFeatures& out) {
    out.n = 0;
    out.pos.resize(2 * k + 1);
    out.cls.resize(2 * k + 1);
    std::int64_t lo = static_cast<std::int64_t>(t) - static_cast<std::int64_t>(k);
    std::int64_t hi = static_cast<std::int64_t>(t) + static_cast<std::int64_t>(k);
    if (lo < 0) lo = 0;
    if (hi >= static_cast<std::int64_t>(n_slots)) hi = static_cast<std::int64_t>(n_slots) - 1;
    for (std::int64_t s = lo; s <= hi; ++s) {
        if (s == static_cast<std::int64_t>(t)) continue;
        auto us = static_cast<std::size_t>(s);
        if (!act.mask[us]) continue;
        out.pos[out.n] = static_cast<std::size_t>(s - static_cast<std::int64_t>(t) +
                                                  static_cast<std::int64_t>(k));
        out.cls[out.n] = static_cast<std::size_t>(static_cast<int>(act.values[us]));
        ++out.n;
    }
}

std::array<double, kA> softmax(const std::array<double, kA>& scores) {
    double mx = scores[0];
    for (double s : scores) mx = std::max(mx, s);
    std::array<double, kA> p{};
    double sum = 0.0;
    for (std::size_t a = 0; a < kA; ++a) {
        p[a] = std::exp(scores[a] - mx);
        sum += p[a];
    }
    for (std::size_t a = 0; a < kA; ++a) p[a] /= sum;
    return p;
}

std::array<double, kA> scores_for(const LogisticWeights& W, const WindowFeatures& f) {
    std::array<double, kA> s{};
    for (std::size_t a = 0; a < kA; ++a) {
        double acc = 0.0;
        for (std::size_t i = 0; i < f.n; ++i) acc += W.at(a, f.cls[i], f.pos[i]);
        s[a] = acc;
    }
    return s;
}

}  // namespace

LogisticWeights LogisticWeights::zeros(std::size_t k) {
    LogisticWeights W;
    W.k = k;
    W.w.assign(kA * kA * (2 * k + 1), 0.0);
    return W;
}

ActivityClass impute_nn(const SlotGrid& grid, std::size_t t) {
    const Channel& act = grid.channel(kChActivity);
    std::size_t n = grid.n_slots();
    if (t >= n) throw std::invalid_argument("slot index out of range");
    for (std::size_t d = 0; d < n; ++d) {
        // earlier slot checked first so equidistant ties resolve backwards
        if (t >= d && act.mask[t - d])
            return static_cast<ActivityClass>(static_cast<int>(act.values[t - d]));
        if (t + d < n && act.mask[t + d])
            return static_cast<ActivityClass>(static_cast<int>(act.values[t + d]));
    }
    throw std::runtime_error("no observed activity to impute from");
}

ActivityClass mode_label(std::span<const ActivityClass> labels) {
    if (labels.empty()) throw std::invalid_argument("empty window");
    std::array<std::size_t, kA> counts{};
    for (ActivityClass a : labels) counts[static_cast<std::size_t>(a)]++;
    std::size_t best = 0;
    for (std::size_t a = 1; a < kA; ++a)
        if (counts[a] > counts[best]) best = a;  // strict > keeps alphabet order on ties
    return static_cast<ActivityClass>(best);
}

ActivityClass impute_mode(const SlotGrid& grid, std::span<const std::size_t> window_slots) {
    const Channel& act = grid.channel(kChActivity);
    std::vector<ActivityClass> labels;
    labels.reserve(window_slots.size());
    for (std::size_t s : window_slots) {
        if (s < grid.n_slots() && act.mask[s])
            labels.push_back(static_cast<ActivityClass>(static_cast<int>(act.values[s])));
    }
    return mode_label(labels);
}

ActivityClass impute_mode(const SlotGrid& grid, std::size_t center, std::size_t k) {
    std::vector<std::size_t> slots;
    std::int64_t lo = static_cast<std::int64_t>(center) - static_cast<std::int64_t>(k);
    for (std::int64_t s = lo; s <= static_cast<std::int64_t>(center + k); ++s)
        if (s >= 0 && s < static_cast<std::int64_t>(grid.n_slots()))
            slots.push_back(static_cast<std::size_t>(s));
    return impute_mode(grid, slots);
}

std::vector<std::size_t> training_targets(const SlotGrid& grid, std::size_t k) {
    const Channel& act = grid.channel(kChActivity);
    std::vector<std::size_t> targets;
    WindowFeatures f;
    for (std::size_t t = 0; t < grid.n_slots(); ++t) {
        if (!act.mask[t]) continue;
        if (static_cast<int>(act.values[t]) == static_cast<int>(ActivityClass::unknown))
            continue;
        collect_window(act, grid.n_slots(), t, k, f);
        if (f.n > 0) targets.push_back(t);
    }
    return targets;
}

double logistic_loss(const LogisticWeights& W, const SlotGrid& grid,
                     std::span<const std::size_t> targets) {
    const Channel& act = grid.channel(kChActivity);
    WindowFeatures f;
    double total = 0.0;
    for (std::size_t t : targets) {
        collect_window(act, grid.n_slots(), t, W.k, f);
        auto p = softmax(scores_for(W, f));
        auto y = static_cast<std::size_t>(static_cast<int>(act.values[t]));
        total -= std::log(std::max(p[y], 1e-300));
    }
    return targets.empty() ? 0.0 : total / static_cast<double>(targets.size());
}

double logistic_loss_grad(const LogisticWeights& W, const SlotGrid& grid,
                          std::span<const std::size_t> targets, std::span<double> grad) {
    if (grad.size() != W.size()) throw std::invalid_argument("gradient buffer size mismatch");
    const Channel& act = grid.channel(kChActivity);
    const std::size_t width = W.width();
    WindowFeatures f;
    double total = 0.0;
    std::fill(grad.begin(), grad.end(), 0.0);
    for (std::size_t t : targets) {
        collect_window(act, grid.n_slots(), t, W.k, f);
        auto p = softmax(scores_for(W, f));
        auto y = static_cast<std::size_t>(static_cast<int>(act.values[t]));
        total -= std::log(std::max(p[y], 1e-300));
        for (std::size_t a = 0; a < kA; ++a) {
            double g = p[a] - (a == y ? 1.0 : 0.0);
            for (std::size_t i = 0; i < f.n; ++i)
                grad[(a * kA + f.cls[i]) * width + f.pos[i]] += g;
        }
    }
    double inv_n = targets.empty() ? 0.0 : 1.0 / static_cast<double>(targets.size());
    for (double& g : grad) g *= inv_n;
    return total * inv_n;
}

LogisticWeights logistic_train(const SlotGrid& grid, std::size_t k, const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
    if (cfg.epochs <= 0) throw std::invalid_argument("epochs must be > 0");
    if (cfg.batch_size <= 0) throw std::invalid_argument("batch_size must be > 0");
    if (cfg.l2 < 0.0) throw std::invalid_argument("l2 must be >= 0");
    std::vector<std::size_t> targets = training_targets(grid, k);
    if (targets.empty())
        throw std::invalid_argument("no trainable activity slots (all unknown or isolated)");

    const Channel& act = grid.channel(kChActivity);
    LogisticWeights W = LogisticWeights::zeros(k);
    const std::size_t width = W.width();
    Rng rng(cfg.seed);
    std::vector<double> grad(W.size(), 0.0);
    WindowFeatures f;

    auto full_loss = [&]() {
        double l = logistic_loss(W, grid, targets);
        double norm2 = 0.0;
        for (double v : W.w) norm2 += v * v;
        return l + cfg.l2 * norm2;
    };

    double lr = cfg.learning_rate;
    double prev_loss = full_loss();
    std::vector<double> prev_w = W.w;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(targets);
        for (std::size_t start = 0; start < targets.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            std::size_t end = std::min(targets.size(),
                                       start + static_cast<std::size_t>(cfg.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t bi = start; bi < end; ++bi) {
                std::size_t t = targets[bi];
                collect_window(act, grid.n_slots(), t, k, f);
                auto p = softmax(scores_for(W, f));
                auto y = static_cast<std::size_t>(static_cast<int>(act.values[t]));
                for (std::size_t a = 0; a < kA; ++a) {
                    double g = p[a] - (a == y ? 1.0 : 0.0);
                    for (std::size_t i = 0; i < f.n; ++i)
                        grad[(a * kA + f.cls[i]) * width + f.pos[i]] += g;
                }
            }
            double scale = lr / static_cast<double>(end - start);
            for (std::size_t idx = 0; idx < W.size(); ++idx)
                W.w[idx] -= scale * grad[idx] + lr * 2.0 * cfg.l2 * W.w[idx];
        }
        // Plain mini-batch descent with an epoch-level backtrack: if the
        // full-batch loss rose, restore the previous weights and halve the
        // step so the per-epoch loss sequence is non-increasing.
        double loss = full_loss();
        if (loss > prev_loss + 1e-9) {
            W.w = prev_w;
            lr *= 0.5;
        } else {
            prev_loss = loss;
            prev_w = W.w;
        }
    }
    return W;
}

std::array<double, kA> logistic_predict_proba(const LogisticWeights& W, const SlotGrid& grid,
                                              std::size_t t) {
    const Channel& act = grid.channel(kChActivity);
    WindowFeatures f;
    collect_window(act, grid.n_slots(), t, W.k, f);
    return softmax(scores_for(W, f));
}

SlotProbabilities predict_all_slots(const LogisticWeights& W, const SlotGrid& grid) {
    const Channel& act = grid.channel(kChActivity);
    SlotProbabilities out;
    out.p.resize(grid.n_slots());
    out.imputable.assign(grid.n_slots(), 0);
    WindowFeatures f;
    for (std::size_t t = 0; t < grid.n_slots(); ++t) {
        collect_window(act, grid.n_slots(), t, W.k, f);
        out.p[t] = softmax(scores_for(W, f));
        out.imputable[t] = f.n > 0 ? 1 : 0;
    }
    return out;
}

const char* to_string(ImputerKind kind) {
    switch (kind) {
        case ImputerKind::nearest_neighbor: return "nearest_neighbor";
        case ImputerKind::rolling_mode: return "rolling_mode";
        case ImputerKind::logistic: return "logistic";
    }
    return "?";
}

ImputerScores score_predictions(std::span<const ActivityClass> truth,
                                std::span<const ActivityClass> predicted) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("truth/prediction size mismatch");
    if (truth.empty()) throw std::invalid_argument("empty evaluation set");
    std::array<std::array<std::size_t, kA>, kA> confusion{};  // [truth][pred]
    std::size_t correct = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])]++;
        if (truth[i] == predicted[i]) ++correct;
    }
    ImputerScores s;
    s.n_eval = truth.size();
    s.overall_accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
    for (std::size_t c = 0; c < kA; ++c) {
        std::size_t tp = confusion[c][c];
        std::size_t truth_c = 0, pred_c = 0;
        for (std::size_t o = 0; o < kA; ++o) {
            truth_c += confusion[c][o];
            pred_c += confusion[o][c];
        }
        s.support[c] = truth_c;
        if (truth_c == 0) {
            s.f_score[c] = std::nullopt;  // class absent: undefined, not zero
            continue;
        }
        double recall = static_cast<double>(tp) / static_cast<double>(truth_c);
        double precision = pred_c == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(pred_c);
        s.f_score[c] = (precision + recall) > 0.0
                           ? 2.0 * precision * recall / (precision + recall)
                           : 0.0;
    }
    return s;
}

EvaluationReport evaluate_imputers(const SlotGrid& grid, double holdout_fraction,
                                   std::size_t k, const TrainConfig& cfg,
                                   std::uint64_t holdout_seed) {
    if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0)
        throw std::invalid_argument("holdout_fraction must lie in (0, 1)");
    const Channel& act = grid.channel(kChActivity);
    std::vector<std::size_t> observed;
    for (std::size_t t = 0; t < grid.n_slots(); ++t)
        if (act.mask[t]) observed.push_back(t);
    if (observed.size() < 2) throw std::invalid_argument("not enough observed activity");

    Rng rng(holdout_seed);
    rng.shuffle(observed);
    std::size_t n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(holdout_fraction *
                                                 static_cast<double>(observed.size()))));
    n_hold = std::min(n_hold, observed.size() - 1);
    std::vector<std::size_t> holdout(observed.begin(),
                                     observed.begin() + static_cast<std::int64_t>(n_hold));
    std::sort(holdout.begin(), holdout.end());

    // Rebuild a grid whose activity channel lacks the held-out slots.
    std::vector<std::uint8_t> held(grid.n_slots(), 0);
    for (std::size_t t : holdout) held[t] = 1;
    std::map<std::string, std::vector<TimedValue>> m;
    auto& ch = m[kChActivity];
    for (std::size_t t = 0; t < grid.n_slots(); ++t)
        if (act.mask[t] && !held[t]) ch.push_back({grid.slot_time(t), act.values[t]});
    SlotGrid train_grid = build_grid(m, grid.t0(), grid.t_end(), grid.slot_width_s());

    LogisticWeights W = logistic_train(train_grid, k, cfg);
    const Channel& train_act = train_grid.channel(kChActivity);

    std::vector<ActivityClass> truth, nn_pred, mode_pred, log_pred;
    WindowFeatures f;
    for (std::size_t t : holdout) {
        truth.push_back(static_cast<ActivityClass>(static_cast<int>(act.values[t])));
        ActivityClass nn = impute_nn(train_grid, t);
        nn_pred.push_back(nn);
        collect_window(train_act, train_grid.n_slots(), t, k, f);
        if (f.n == 0) {
            mode_pred.push_back(nn);
            log_pred.push_back(nn);
            continue;
        }
        mode_pred.push_back(impute_mode(train_grid, t, k));
        auto p = softmax(scores_for(W, f));
        std::size_t best = 0;
        for (std::size_t a = 1; a < kA; ++a)
            if (p[a] > p[best]) best = a;
        log_pred.push_back(static_cast<ActivityClass>(best));
    }

    EvaluationReport report;
    report.results.emplace_back(ImputerKind::nearest_neighbor,
                                score_predictions(truth, nn_pred));
    report.results.emplace_back(ImputerKind::rolling_mode, score_predictions(truth, mode_pred));
    report.results.emplace_back(ImputerKind::logistic, score_predictions(truth, log_pred));
    return report;
}

void write_report_csv(const std::filesystem::path& path, const EvaluationReport& report) {
    std::vector<std::vector<std::string>> rows;
    char buf[32];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.6f", v);
        return std::string(buf);
    };
    for (const auto& [kind, scores] : report.results) {
        for (std::size_t c = 0; c < kA; ++c) {
            rows.push_back({to_string(kind), to_string(static_cast<ActivityClass>(c)),
                            scores.f_score[c] ? fmt(*scores.f_score[c]) : "NA",
                            std::to_string(scores.support[c])});
        }
        rows.push_back({to_string(kind), "overall_accuracy", fmt(scores.overall_accuracy),
                        std::to_string(scores.n_eval)});
    }
    write_csv(path, {"imputer", "class", "f_score", "support"}, rows);
}

void write_weights_json(const std::filesystem::path& path, const LogisticWeights& W) {
    nlohmann::json j;
    j["k"] = W.k;
    j["shape"] = {kA, kA, W.width()};
    nlohmann::json alphabet = nlohmann::json::array();
    for (ActivityClass a : kActivityAlphabet) alphabet.push_back(to_string(a));
    j["alphabet"] = alphabet;
    j["weights"] = W.w;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << j.dump() << "\n";
}

LogisticWeights read_weights_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    in >> j;
    LogisticWeights W;
    W.k = j.at("k").get<std::size_t>();
    W.w = j.at("weights").get<std::vector<double>>();
    if (W.w.size() != kA * kA * W.width())
        throw std::runtime_error(path.string() + ": weight tensor shape mismatch");
    return W;
}

}  // namespace glucolens::impute
