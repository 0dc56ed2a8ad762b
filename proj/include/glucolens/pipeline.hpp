#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "glucolens/analyze.hpp"
#include "glucolens/cluster.hpp"
#include "glucolens/events.hpp"
#include "glucolens/geofence.hpp"
#include "glucolens/impute.hpp"
#include "glucolens/predict.hpp"
#include "glucolens/slot_grid.hpp"
#include "glucolens/synth.hpp"

namespace glucolens::pipeline {

// Config problems (exit code 1) vs. runtime/stage problems (exit code 2).
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GridConfig {
    std::int64_t slot_width_s = 15;
    std::optional<Timestamp> t0;     // default: earliest record, floored to a slot
    std::optional<Timestamp> t_end;  // default: just past the latest record
};

struct InputPaths {
    std::string activities;  // empty = <out_dir>/activities.csv
    std::string locations;
    std::string glucose;
    std::string purchases;
};

struct ImputeStageConfig {
    std::size_t k = 20;
    impute::TrainConfig train;
    double holdout_fraction = 0.2;
};

struct ClusterStageConfig {
    double stationary_threshold = 0.8;
    cluster::DbscanParams dbscan;
    std::string tags_file;  // empty = <out_dir>/hotspot_tags.csv
};

struct EventsStageConfig {
    double bandwidth_s = 7200.0;
    events::PeakParams peaks;
    std::int64_t window_s = 7200;
};

struct AnalyzeStageConfig {
    double rise_threshold_mgdl = 30.0;
    int lag_max_min = 180;
    int lag_step_min = 5;
};

struct PredictStageConfig {
    int lags = 12;
    std::vector<int> horizons_min = {15, 30, 60};
    int folds = 5;
    std::vector<predict::ModelKind> models = {
        predict::ModelKind::static_last,   predict::ModelKind::ols,
        predict::ModelKind::lasso,         predict::ModelKind::ridge,
        predict::ModelKind::elastic_net,   predict::ModelKind::total_variation,
        predict::ModelKind::kernel_masked, predict::ModelKind::kernel_exog,
    };
    predict::HyperParams hyper;
    predict::SgdConfig sgd;
};

struct GeofenceStageConfig {
    int max_active = 20;
};

struct PipelineConfig {
    std::filesystem::path out_dir = "out";
    std::uint64_t seed = 42;
    bool verbose = false;
    synth::SynthConfig synth;
    GridConfig grid;
    InputPaths inputs;
    ImputeStageConfig impute;
    ClusterStageConfig cluster;
    EventsStageConfig events;
    AnalyzeStageConfig analyze;
    PredictStageConfig predict;
    GeofenceStageConfig geofence;
};

// Parses and validates; throws ConfigError listing every violation.
PipelineConfig load_config(const std::filesystem::path& path);

// Re-validate a programmatically built config (same checks as load_config).
void validate_config(const PipelineConfig& cfg);

// Stage names in dependency order: synth, ingest, impute, cluster, events,
// correlate, train, evaluate, export.
const std::vector<std::string>& stage_names();

void run_stage(const PipelineConfig& cfg, const std::string& stage);
void run_all(const PipelineConfig& cfg);

// Grid artifact round-trip (grid.csv + grid_meta.json).
void save_grid(const std::filesystem::path& dir, const SlotGrid& grid);
SlotGrid load_grid(const std::filesystem::path& dir);

// FNV-1a 64-bit digest of a file's bytes, as hex.
std::string file_digest(const std::filesystem::path& path);

// Deterministic child seed for a named pipeline concern.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag);

}  // namespace glucolens::pipeline
