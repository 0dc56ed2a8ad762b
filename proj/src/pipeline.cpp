#include "glucolens/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "glucolens/csv.hpp"
#include "glucolens/rng.hpp"

namespace glucolens::pipeline {

namespace {

using json = nlohmann::json;

constexpr const char* kManifest = "manifest.json";
constexpr const char* kResolvedConfig = "config_resolved.json";

struct StageFiles {
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
    std::string upstream;  // stage that produces the inputs
};

const std::map<std::string, StageFiles>& stage_files() {
    static const std::map<std::string, StageFiles> files = {
        {"synth",
         {{},
          {"activities.csv", "locations.csv", "glucose.csv", "purchases.csv",
           "groundtruth.json"},
          ""}},
        {"ingest", {{"activities.csv", "locations.csv", "glucose.csv", "purchases.csv"},
                    {"grid.csv", "grid_meta.json"},
                    "synth"}},
        {"impute", {{"grid.csv", "grid_meta.json"},
                    {"impute_weights.json", "imputation_report.csv"},
                    "ingest"}},
        {"cluster", {{"grid.csv", "grid_meta.json", "impute_weights.json"},
                     {"hotspots.json", "hotspot_tags.csv"},
                     "impute"}},
        {"events", {{"grid.csv", "grid_meta.json", "hotspots.json"},
                    {"events.csv", "hotspot_stats.csv"},
                    "cluster"}},
        {"correlate", {{"grid.csv", "grid_meta.json", "events.csv", "hotspots.json"},
                       {"correlations.csv"},
                       "events"}},
        {"train", {{"grid.csv", "grid_meta.json"}, {"fit_results.json"}, "ingest"}},
        {"evaluate", {{"grid.csv", "grid_meta.json"}, {"rmse_table.csv", "rmse_summary.csv"},
                      "ingest"}},
        {"export", {{"hotspots.json", "events.csv"},
                    {"hotspots.geojson", "geofence_plan.json"},
                    "events"}},
    };
    return files;
}

void require_artifacts(const PipelineConfig& cfg, const std::string& stage) {
    const StageFiles& sf = stage_files().at(stage);
    for (const std::string& f : sf.inputs) {
        if (!std::filesystem::exists(cfg.out_dir / f))
            throw StageError("missing artifact '" + (cfg.out_dir / f).string() +
                             "': run the `" + sf.upstream + "` stage first");
    }
}

json config_to_json(const PipelineConfig& cfg);

void log(const PipelineConfig& cfg, const std::string& msg) {
    if (cfg.verbose) std::cerr << "[glucolens] " << msg << "\n";
}

// ---- manifest -------------------------------------------------------------

json load_manifest(const PipelineConfig& cfg) {
    std::filesystem::path p = cfg.out_dir / kManifest;
    if (!std::filesystem::exists(p)) return json::object();
    std::ifstream in(p);
    json j;
    in >> j;
    return j;
}

void record_stage(const PipelineConfig& cfg, const std::string& stage, double wall_ms) {
    json manifest = load_manifest(cfg);
    json resolved = config_to_json(cfg);
    manifest["config_hash"] = [] (const std::string& s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (unsigned char c : s) {
            h ^= c;
            h *= 1099511628211ULL;
        }
        char buf[20];
        std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
        return std::string(buf);
    }(resolved.dump());
    manifest["seed"] = cfg.seed;
    json entry;
    entry["version"] = 1;
    const StageFiles& sf = stage_files().at(stage);
    json inputs = json::object(), outputs = json::object();
    for (const std::string& f : sf.inputs)
        if (std::filesystem::exists(cfg.out_dir / f))
            inputs[f] = file_digest(cfg.out_dir / f);
    for (const std::string& f : sf.outputs)
        if (std::filesystem::exists(cfg.out_dir / f))
            outputs[f] = file_digest(cfg.out_dir / f);
    entry["inputs"] = inputs;
    entry["outputs"] = outputs;
    entry["wall_clock_ms"] = wall_ms;
    manifest["stages"][stage] = entry;
    std::ofstream out(cfg.out_dir / kManifest, std::ios::binary);
    out << manifest.dump(2) << "\n";
}

// ---- config ---------------------------------------------------------------

json config_to_json(const PipelineConfig& cfg) {
    json j;
    j["out_dir"] = cfg.out_dir.string();
    j["seed"] = cfg.seed;
    json tm = json::array();
    for (const auto& row : cfg.synth.transition) tm.push_back(row);
    j["synth"] = {{"days", cfg.synth.days},
                  {"hotspot_count", cfg.synth.hotspot_count},
                  {"meal_hotspot_fraction", cfg.synth.meal_hotspot_fraction},
                  {"missingness",
                   {{"activity", cfg.synth.missingness.activity},
                    {"location", cfg.synth.missingness.location},
                    {"glucose", cfg.synth.missingness.glucose},
                    {"purchase", cfg.synth.missingness.purchase}}},
                  {"meal_amplitude_mgdl", cfg.synth.meal_amplitude_mgdl},
                  {"meal_peak_minutes", cfg.synth.meal_peak_minutes},
                  {"meal_onset_delay_minutes", cfg.synth.meal_onset_delay_minutes},
                  {"meal_time_jitter_minutes", cfg.synth.meal_time_jitter_minutes},
                  {"bg_wander_phi", cfg.synth.bg_wander_phi},
                  {"bg_momentum_rho", cfg.synth.bg_momentum_rho},
                  {"bg_momentum_innov_mgdl", cfg.synth.bg_momentum_innov_mgdl},
                  {"amplitude_jitter_sigma", cfg.synth.amplitude_jitter_sigma},
                  {"transition_matrix", tm}};
    j["grid"]["slot_width_s"] = cfg.grid.slot_width_s;
    if (cfg.grid.t0) j["grid"]["t0"] = cfg.grid.t0->seconds_utc;
    if (cfg.grid.t_end) j["grid"]["t_end"] = cfg.grid.t_end->seconds_utc;
    j["inputs"] = {{"activities", cfg.inputs.activities},
                   {"locations", cfg.inputs.locations},
                   {"glucose", cfg.inputs.glucose},
                   {"purchases", cfg.inputs.purchases}};
    j["impute"] = {{"k", cfg.impute.k},
                   {"holdout_fraction", cfg.impute.holdout_fraction},
                   {"train",
                    {{"learning_rate", cfg.impute.train.learning_rate},
                     {"epochs", cfg.impute.train.epochs},
                     {"batch_size", cfg.impute.train.batch_size},
                     {"l2", cfg.impute.train.l2}}}};
    j["cluster"] = {{"stationary_threshold", cfg.cluster.stationary_threshold},
                    {"eps_m", cfg.cluster.dbscan.eps_m},
                    {"min_pts", cfg.cluster.dbscan.min_pts},
                    {"tags_file", cfg.cluster.tags_file}};
    j["events"] = {{"bandwidth_s", cfg.events.bandwidth_s},
                   {"min_separation_s", cfg.events.peaks.min_separation_s},
                   {"min_density", cfg.events.peaks.min_density},
                   {"window_s", cfg.events.window_s}};
    j["analyze"] = {{"rise_threshold_mgdl", cfg.analyze.rise_threshold_mgdl},
                    {"lag_max_min", cfg.analyze.lag_max_min},
                    {"lag_step_min", cfg.analyze.lag_step_min}};
    json models = json::array();
    for (auto m : cfg.predict.models) models.push_back(predict::to_string(m));
    j["predict"] = {{"lags", cfg.predict.lags},
                    {"horizons_min", cfg.predict.horizons_min},
                    {"folds", cfg.predict.folds},
                    {"models", models},
                    {"lambda_lasso", cfg.predict.hyper.lambda_lasso},
                    {"lambda_ridge", cfg.predict.hyper.lambda_ridge},
                    {"alpha_enet", cfg.predict.hyper.alpha_enet},
                    {"lambda_enet", cfg.predict.hyper.lambda_enet},
                    {"lambda_tv", cfg.predict.hyper.lambda_tv},
                    {"sgd",
                     {{"learning_rate", cfg.predict.sgd.learning_rate},
                      {"epochs", cfg.predict.sgd.epochs},
                      {"batch_size", cfg.predict.sgd.batch_size}}}};
    j["geofence"] = {{"max_active", cfg.geofence.max_active}};
    return j;
}

std::vector<std::string> collect_violations(const PipelineConfig& cfg) {
    std::vector<std::string> v;
    if (std::string err = synth::validate(cfg.synth); !err.empty()) v.push_back("synth: " + err);
    if (cfg.grid.slot_width_s <= 0) v.push_back("grid.slot_width_s must be positive");
    if (cfg.grid.t0 && cfg.grid.t_end && !(*cfg.grid.t0 < *cfg.grid.t_end))
        v.push_back("grid: t0 must precede t_end");
    if (cfg.impute.k < 1) v.push_back("impute.k must be >= 1");
    if (cfg.impute.holdout_fraction <= 0 || cfg.impute.holdout_fraction >= 1)
        v.push_back("impute.holdout_fraction must lie in (0, 1)");
    if (cfg.impute.train.learning_rate <= 0) v.push_back("impute.train.learning_rate must be > 0");
    if (cfg.impute.train.epochs <= 0) v.push_back("impute.train.epochs must be > 0");
    if (cfg.impute.train.batch_size <= 0) v.push_back("impute.train.batch_size must be > 0");
    if (cfg.impute.train.l2 < 0) v.push_back("impute.train.l2 must be >= 0");
    if (cfg.cluster.stationary_threshold < 0 || cfg.cluster.stationary_threshold > 1)
        v.push_back("cluster.stationary_threshold must lie in [0, 1]");
    if (cfg.cluster.dbscan.eps_m <= 0) v.push_back("cluster.eps_m must be > 0");
    if (cfg.cluster.dbscan.min_pts < 1) v.push_back("cluster.min_pts must be >= 1");
    if (!cfg.cluster.tags_file.empty() && !std::filesystem::exists(cfg.cluster.tags_file))
        v.push_back("cluster.tags_file does not exist: " + cfg.cluster.tags_file);
    if (cfg.events.bandwidth_s <= 0) v.push_back("events.bandwidth_s must be > 0");
    if (cfg.events.peaks.min_separation_s < 0) v.push_back("events.min_separation_s must be >= 0");
    if (cfg.events.window_s <= 0 || cfg.events.window_s % kCgmIntervalSeconds != 0)
        v.push_back("events.window_s must be a positive multiple of 300");
    if (cfg.analyze.lag_step_min <= 0 || cfg.analyze.lag_step_min % 5 != 0)
        v.push_back("analyze.lag_step_min must be a positive multiple of 5");
    if (cfg.analyze.lag_max_min < 0) v.push_back("analyze.lag_max_min must be >= 0");
    if (cfg.predict.lags < 1) v.push_back("predict.lags must be >= 1");
    if (cfg.predict.folds < 2) v.push_back("predict.folds must be >= 2");
    if (cfg.predict.horizons_min.empty()) v.push_back("predict.horizons_min must be non-empty");
    for (int h : cfg.predict.horizons_min)
        if (h <= 0 || h % 5 != 0) {
            v.push_back("predict.horizons_min entries must be positive multiples of 5");
            break;
        }
    if (cfg.predict.hyper.lambda_lasso < 0 || cfg.predict.hyper.lambda_ridge < 0 ||
        cfg.predict.hyper.alpha_enet < 0 || cfg.predict.hyper.lambda_enet < 0 ||
        cfg.predict.hyper.lambda_tv < 0)
        v.push_back("predict hyperparameters must be >= 0");
    if (cfg.predict.sgd.learning_rate <= 0) v.push_back("predict.sgd.learning_rate must be > 0");
    if (cfg.predict.sgd.epochs <= 0) v.push_back("predict.sgd.epochs must be > 0");
    if (cfg.predict.sgd.batch_size <= 0) v.push_back("predict.sgd.batch_size must be > 0");
    if (cfg.geofence.max_active < 2) v.push_back("geofence.max_active must be >= 2");
    auto check_input = [&](const std::string& p, const char* name) {
        if (!p.empty() && !std::filesystem::exists(p))
            v.push_back(std::string("inputs.") + name + " does not exist: " + p);
    };
    check_input(cfg.inputs.activities, "activities");
    check_input(cfg.inputs.locations, "locations");
    check_input(cfg.inputs.glucose, "glucose");
    check_input(cfg.inputs.purchases, "purchases");
    return v;
}

Timestamp parse_cfg_time(const json& j) {
    if (j.is_number_integer()) return Timestamp{j.get<std::int64_t>()};
    return parse_timestamp(j.get<std::string>());
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    Rng child = Rng(master).fork(tag);
    return child.next_u64();
}

void validate_config(const PipelineConfig& cfg) {
    std::vector<std::string> v = collect_violations(cfg);
    if (v.empty()) return;
    std::string msg = "invalid configuration (" + std::to_string(v.size()) + " problem" +
                      (v.size() == 1 ? "" : "s") + "):";
    for (const auto& e : v) msg += "\n  - " + e;
    throw ConfigError(msg);
}

PipelineConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }

    PipelineConfig cfg;
    try {
        if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("synth")) {
            const json& s = j["synth"];
            if (s.contains("days")) cfg.synth.days = s["days"].get<int>();
            if (s.contains("hotspot_count"))
                cfg.synth.hotspot_count = s["hotspot_count"].get<int>();
            if (s.contains("meal_hotspot_fraction"))
                cfg.synth.meal_hotspot_fraction = s["meal_hotspot_fraction"].get<double>();
            if (s.contains("missingness")) {
                const json& m = s["missingness"];
                if (m.contains("activity"))
                    cfg.synth.missingness.activity = m["activity"].get<double>();
                if (m.contains("location"))
                    cfg.synth.missingness.location = m["location"].get<double>();
                if (m.contains("glucose"))
                    cfg.synth.missingness.glucose = m["glucose"].get<double>();
                if (m.contains("purchase"))
                    cfg.synth.missingness.purchase = m["purchase"].get<double>();
            }
            if (s.contains("meal_amplitude_mgdl"))
                cfg.synth.meal_amplitude_mgdl = s["meal_amplitude_mgdl"].get<double>();
            if (s.contains("meal_peak_minutes"))
                cfg.synth.meal_peak_minutes = s["meal_peak_minutes"].get<double>();
            if (s.contains("meal_onset_delay_minutes"))
                cfg.synth.meal_onset_delay_minutes =
                    s["meal_onset_delay_minutes"].get<double>();
            if (s.contains("meal_time_jitter_minutes"))
                cfg.synth.meal_time_jitter_minutes =
                    s["meal_time_jitter_minutes"].get<double>();
            if (s.contains("bg_wander_phi"))
                cfg.synth.bg_wander_phi = s["bg_wander_phi"].get<double>();
            if (s.contains("bg_momentum_rho"))
                cfg.synth.bg_momentum_rho = s["bg_momentum_rho"].get<double>();
            if (s.contains("bg_momentum_innov_mgdl"))
                cfg.synth.bg_momentum_innov_mgdl = s["bg_momentum_innov_mgdl"].get<double>();
            if (s.contains("amplitude_jitter_sigma"))
                cfg.synth.amplitude_jitter_sigma = s["amplitude_jitter_sigma"].get<double>();
            if (s.contains("transition_matrix")) {
                const json& tm = s["transition_matrix"];
                if (tm.size() != kActivityClassCount)
                    throw ConfigError("synth.transition_matrix must have 7 rows");
                for (std::size_t r = 0; r < kActivityClassCount; ++r) {
                    if (tm[r].size() != kActivityClassCount)
                        throw ConfigError("synth.transition_matrix rows must have 7 entries");
                    for (std::size_t c = 0; c < kActivityClassCount; ++c)
                        cfg.synth.transition[r][c] = tm[r][c].get<double>();
                }
            }
        }
        if (j.contains("grid")) {
            const json& g = j["grid"];
            if (g.contains("slot_width_s")) cfg.grid.slot_width_s = g["slot_width_s"].get<std::int64_t>();
            if (g.contains("t0")) cfg.grid.t0 = parse_cfg_time(g["t0"]);
            if (g.contains("t_end")) cfg.grid.t_end = parse_cfg_time(g["t_end"]);
        }
        if (j.contains("inputs")) {
            const json& i = j["inputs"];
            if (i.contains("activities")) cfg.inputs.activities = i["activities"].get<std::string>();
            if (i.contains("locations")) cfg.inputs.locations = i["locations"].get<std::string>();
            if (i.contains("glucose")) cfg.inputs.glucose = i["glucose"].get<std::string>();
            if (i.contains("purchases")) cfg.inputs.purchases = i["purchases"].get<std::string>();
        }
        if (j.contains("impute")) {
            const json& i = j["impute"];
            if (i.contains("k")) cfg.impute.k = i["k"].get<std::size_t>();
            if (i.contains("holdout_fraction"))
                cfg.impute.holdout_fraction = i["holdout_fraction"].get<double>();
            if (i.contains("train")) {
                const json& t = i["train"];
                if (t.contains("learning_rate"))
                    cfg.impute.train.learning_rate = t["learning_rate"].get<double>();
                if (t.contains("epochs")) cfg.impute.train.epochs = t["epochs"].get<int>();
                if (t.contains("batch_size"))
                    cfg.impute.train.batch_size = t["batch_size"].get<int>();
                if (t.contains("l2")) cfg.impute.train.l2 = t["l2"].get<double>();
            }
        }
        if (j.contains("cluster")) {
            const json& c = j["cluster"];
            if (c.contains("stationary_threshold"))
                cfg.cluster.stationary_threshold = c["stationary_threshold"].get<double>();
            if (c.contains("eps_m")) cfg.cluster.dbscan.eps_m = c["eps_m"].get<double>();
            if (c.contains("min_pts")) cfg.cluster.dbscan.min_pts = c["min_pts"].get<int>();
            if (c.contains("tags_file")) cfg.cluster.tags_file = c["tags_file"].get<std::string>();
        }
        if (j.contains("events")) {
            const json& e = j["events"];
            if (e.contains("bandwidth_s")) cfg.events.bandwidth_s = e["bandwidth_s"].get<double>();
            if (e.contains("min_separation_s"))
                cfg.events.peaks.min_separation_s = e["min_separation_s"].get<double>();
            if (e.contains("min_density"))
                cfg.events.peaks.min_density = e["min_density"].get<double>();
            if (e.contains("window_s")) cfg.events.window_s = e["window_s"].get<std::int64_t>();
        }
        if (j.contains("analyze")) {
            const json& a = j["analyze"];
            if (a.contains("rise_threshold_mgdl"))
                cfg.analyze.rise_threshold_mgdl = a["rise_threshold_mgdl"].get<double>();
            if (a.contains("lag_max_min")) cfg.analyze.lag_max_min = a["lag_max_min"].get<int>();
            if (a.contains("lag_step_min")) cfg.analyze.lag_step_min = a["lag_step_min"].get<int>();
        }
        if (j.contains("predict")) {
            const json& p = j["predict"];
            if (p.contains("lags")) cfg.predict.lags = p["lags"].get<int>();
            if (p.contains("horizons_min"))
                cfg.predict.horizons_min = p["horizons_min"].get<std::vector<int>>();
            if (p.contains("folds")) cfg.predict.folds = p["folds"].get<int>();
            if (p.contains("models")) {
                cfg.predict.models.clear();
                for (const auto& name : p["models"]) {
                    auto kind = predict::parse_model(name.get<std::string>());
                    if (!kind)
                        throw ConfigError("unknown model '" + name.get<std::string>() + "'");
                    cfg.predict.models.push_back(*kind);
                }
            }
            if (p.contains("lambda_lasso")) cfg.predict.hyper.lambda_lasso = p["lambda_lasso"].get<double>();
            if (p.contains("lambda_ridge")) cfg.predict.hyper.lambda_ridge = p["lambda_ridge"].get<double>();
            if (p.contains("alpha_enet")) cfg.predict.hyper.alpha_enet = p["alpha_enet"].get<double>();
            if (p.contains("lambda_enet")) cfg.predict.hyper.lambda_enet = p["lambda_enet"].get<double>();
            if (p.contains("lambda_tv")) cfg.predict.hyper.lambda_tv = p["lambda_tv"].get<double>();
            if (p.contains("sgd")) {
                const json& s = p["sgd"];
                if (s.contains("learning_rate"))
                    cfg.predict.sgd.learning_rate = s["learning_rate"].get<double>();
                if (s.contains("epochs")) cfg.predict.sgd.epochs = s["epochs"].get<int>();
                if (s.contains("batch_size")) cfg.predict.sgd.batch_size = s["batch_size"].get<int>();
            }
        }
        if (j.contains("geofence")) {
            const json& g = j["geofence"];
            if (g.contains("max_active")) cfg.geofence.max_active = g["max_active"].get<int>();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError("config field has the wrong type: " + std::string(e.what()));
    }
    validate_config(cfg);
    return cfg;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StageError("cannot open " + path.string() + " for digest");
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in) {
        in.read(buf, sizeof(buf));
        std::streamsize got = in.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ULL;
        }
    }
    char hex[20];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

void save_grid(const std::filesystem::path& dir, const SlotGrid& grid) {
    json meta;
    meta["t0"] = grid.t0().seconds_utc;
    meta["slot_width_s"] = grid.slot_width_s();
    meta["n_slots"] = grid.n_slots();
    meta["channels"] = grid.channel_names();
    {
        std::ofstream out(dir / "grid_meta.json", std::ios::binary);
        out << meta.dump(2) << "\n";
    }
    std::vector<std::vector<std::string>> rows;
    for (const std::string& name : grid.channel_names()) {
        const Channel& ch = grid.channel(name);
        for (std::size_t s = 0; s < grid.n_slots(); ++s)
            if (ch.mask[s])
                rows.push_back({name, std::to_string(s), format_double(ch.values[s])});
    }
    write_csv(dir / "grid.csv", {"channel", "slot", "value"}, rows);
}

SlotGrid load_grid(const std::filesystem::path& dir) {
    std::ifstream in(dir / "grid_meta.json");
    if (!in) throw StageError("cannot open " + (dir / "grid_meta.json").string());
    json meta;
    in >> meta;
    auto t0 = Timestamp{meta.at("t0").get<std::int64_t>()};
    auto width = meta.at("slot_width_s").get<std::int64_t>();
    auto n_slots = meta.at("n_slots").get<std::size_t>();
    auto names = meta.at("channels").get<std::vector<std::string>>();

    std::map<std::string, Channel> channels;
    for (const auto& name : names) {
        Channel ch;
        ch.values.assign(n_slots, 0.0);
        ch.mask.assign(n_slots, 0);
        channels.emplace(name, std::move(ch));
    }
    CsvTable t = read_csv(dir / "grid.csv");
    for (const auto& row : t.rows) {
        auto it = channels.find(row[0]);
        if (it == channels.end())
            throw StageError("grid.csv references unknown channel '" + row[0] + "'");
        std::size_t slot = std::stoull(row[1]);
        it->second.values[slot] = std::stod(row[2]);
        it->second.mask[slot] = 1;
    }
    return SlotGrid(t0, width, n_slots, std::move(channels));
}

namespace {

std::filesystem::path input_path(const PipelineConfig& cfg, const std::string& configured,
                                 const char* def) {
    return configured.empty() ? cfg.out_dir / def : std::filesystem::path(configured);
}

void stage_synth(const PipelineConfig& cfg) {
    synth::SynthConfig sc = cfg.synth;
    sc.seed = cfg.seed;
    auto [full, gt] = synth::generate(sc);
    synth::RawTrace thinned =
        synth::apply_missingness(full, sc.missingness, derive_seed(cfg.seed, 101));
    write_activities_csv(cfg.out_dir / "activities.csv", thinned.activities);
    write_locations_csv(cfg.out_dir / "locations.csv", thinned.fixes);
    write_glucose_csv(cfg.out_dir / "glucose.csv", thinned.glucose);
    write_purchases_csv(cfg.out_dir / "purchases.csv", thinned.purchases);
    synth::write_groundtruth(cfg.out_dir / "groundtruth.json", gt);
}

void warn_rejects(const PipelineConfig& cfg, const std::filesystem::path& file,
                  const std::vector<RejectedRecord>& rejected) {
    if (rejected.empty()) return;
    std::cerr << file.string() << ": rejected " << rejected.size() << " record"
              << (rejected.size() == 1 ? "" : "s") << "\n";
    std::size_t shown = 0;
    for (const auto& r : rejected) {
        if (!cfg.verbose && shown >= 5) {
            std::cerr << "  ...\n";
            break;
        }
        std::cerr << "  row " << r.row << ": " << r.reason << "\n";
        ++shown;
    }
}

void stage_ingest(const PipelineConfig& cfg) {
    auto pa = input_path(cfg, cfg.inputs.activities, "activities.csv");
    auto pl = input_path(cfg, cfg.inputs.locations, "locations.csv");
    auto pg = input_path(cfg, cfg.inputs.glucose, "glucose.csv");
    auto pp = input_path(cfg, cfg.inputs.purchases, "purchases.csv");
    for (const auto& p : {pa, pl, pg, pp})
        if (!std::filesystem::exists(p))
            throw StageError("missing input '" + p.string() +
                             "': run the `synth` stage first or point inputs.* at data");

    auto acts = read_activities_csv(pa);
    auto locs = read_locations_csv(pl);
    auto glus = read_glucose_csv(pg);
    auto purs = read_purchases_csv(pp);
    warn_rejects(cfg, pa, acts.rejected);
    warn_rejects(cfg, pl, locs.rejected);
    warn_rejects(cfg, pg, glus.rejected);
    warn_rejects(cfg, pp, purs.rejected);

    std::optional<Timestamp> lo, hi;
    auto see = [&](Timestamp t) {
        if (!lo || t < *lo) lo = t;
        if (!hi || *hi < t) hi = t;
    };
    for (const auto& r : acts.records) see(r.t);
    for (const auto& r : locs.records) see(r.t);
    for (const auto& r : glus.records) see(r.t);
    for (const auto& r : purs.records) see(r.t);
    if (!lo) throw StageError("no records survived ingestion; nothing to grid");

    std::int64_t width = cfg.grid.slot_width_s;
    Timestamp t0 = cfg.grid.t0 ? *cfg.grid.t0
                               : Timestamp{(lo->seconds_utc / width) * width};
    Timestamp t_end = cfg.grid.t_end ? *cfg.grid.t_end : Timestamp{hi->seconds_utc + 1};
    SlotGrid grid = build_standard_grid(acts.records, locs.records, glus.records,
                                        purs.records, t0, t_end, width);
    save_grid(cfg.out_dir, grid);
    log(cfg, "grid: " + std::to_string(grid.n_slots()) + " slots");
}

void stage_impute(const PipelineConfig& cfg) {
    require_artifacts(cfg, "impute");
    SlotGrid grid = load_grid(cfg.out_dir);
    impute::TrainConfig tc = cfg.impute.train;
    tc.seed = derive_seed(cfg.seed, 102);
    impute::LogisticWeights W = impute::logistic_train(grid, cfg.impute.k, tc);
    impute::write_weights_json(cfg.out_dir / "impute_weights.json", W);
    impute::EvaluationReport report = impute::evaluate_imputers(
        grid, cfg.impute.holdout_fraction, cfg.impute.k, tc, derive_seed(cfg.seed, 103));
    impute::write_report_csv(cfg.out_dir / "imputation_report.csv", report);
}

std::vector<GeoFix> fixes_from_grid(const SlotGrid& grid) {
    const Channel& lat = grid.channel(kChLat);
    const Channel& lon = grid.channel(kChLon);
    const Channel& acc = grid.channel(kChAccuracy);
    std::vector<GeoFix> fixes;
    for (std::size_t s = 0; s < grid.n_slots(); ++s) {
        if (!lat.mask[s]) continue;
        fixes.push_back({grid.slot_time(s), lat.values[s], lon.values[s], acc.values[s]});
    }
    return fixes;
}

std::map<int, cluster::HotspotTag> suggest_tags_from_groundtruth(
    const PipelineConfig& cfg, const std::vector<cluster::Hotspot>& hotspots) {
    std::map<int, cluster::HotspotTag> tags;
    auto gt_path = cfg.out_dir / "groundtruth.json";
    if (!std::filesystem::exists(gt_path)) return tags;
    synth::GroundTruth gt = synth::read_groundtruth(gt_path);
    for (const auto& h : hotspots) {
        double best = 150.0;  // a cluster further than this matches nothing
        const synth::HotspotTruth* hit = nullptr;
        for (const auto& g : gt.hotspots) {
            double d = haversine_m(h.centroid, GeoPoint{g.lat, g.lon});
            if (d < best) {
                best = d;
                hit = &g;
            }
        }
        if (hit)
            tags[h.id] = hit->food ? cluster::HotspotTag::food : cluster::HotspotTag::other;
        else
            tags[h.id] = cluster::HotspotTag::other;
    }
    return tags;
}

void stage_cluster(const PipelineConfig& cfg) {
    require_artifacts(cfg, "cluster");
    SlotGrid grid = load_grid(cfg.out_dir);
    impute::LogisticWeights W =
        impute::read_weights_json(cfg.out_dir / "impute_weights.json");
    impute::SlotProbabilities probs = impute::predict_all_slots(W, grid);
    std::vector<GeoFix> fixes = fixes_from_grid(grid);
    std::vector<GeoFix> stationary =
        cluster::filter_stationary(grid, fixes, probs, cfg.cluster.stationary_threshold);
    log(cfg, "stationary filter kept " + std::to_string(stationary.size()) + " of " +
                 std::to_string(fixes.size()) + " fixes");
    std::vector<int> labels = cluster::dbscan(stationary, cfg.cluster.dbscan);
    std::vector<cluster::Hotspot> hotspots = cluster::build_hotspots(stationary, labels);
    log(cfg, "dbscan found " + std::to_string(hotspots.size()) + " hotspots");

    if (!cfg.cluster.tags_file.empty()) {
        cluster::apply_tags(hotspots, cluster::read_tags_csv(cfg.cluster.tags_file));
    } else {
        cluster::apply_tags(hotspots, suggest_tags_from_groundtruth(cfg, hotspots));
    }
    cluster::write_hotspots_json(cfg.out_dir / "hotspots.json", hotspots);
    cluster::write_tags_csv(cfg.out_dir / "hotspot_tags.csv", hotspots);
}

std::map<int, cluster::HotspotTag> stage_tags(const PipelineConfig& cfg) {
    auto path = cfg.cluster.tags_file.empty()
                    ? cfg.out_dir / "hotspot_tags.csv"
                    : std::filesystem::path(cfg.cluster.tags_file);
    if (!std::filesystem::exists(path)) return {};
    return cluster::read_tags_csv(path);
}

void stage_events(const PipelineConfig& cfg) {
    require_artifacts(cfg, "events");
    SlotGrid grid = load_grid(cfg.out_dir);
    std::vector<cluster::Hotspot> hotspots =
        cluster::read_hotspots_json(cfg.out_dir / "hotspots.json");
    cluster::apply_tags(hotspots, stage_tags(cfg));
    std::vector<events::EventOccurrence> evts =
        events::extract_events(hotspots, grid, cfg.events.bandwidth_s, cfg.events.peaks);
    events::write_events_csv(cfg.out_dir / "events.csv", evts);

    std::vector<std::pair<int, events::HotspotStats>> stats;
    for (const auto& h : hotspots) {
        std::vector<Timestamp> peaks;
        for (const auto& e : evts)
            if (e.hotspot_id == h.id) peaks.push_back(e.peak_time);
        if (peaks.empty()) continue;
        events::AlignedWindows win =
            events::align_bg_windows(peaks, grid, cfg.events.window_s);
        stats.emplace_back(h.id, events::hotspot_stats(win));
    }
    events::write_stats_csv(cfg.out_dir / "hotspot_stats.csv", stats);
}

std::set<int> food_hotspots(const std::vector<cluster::Hotspot>& hotspots) {
    std::set<int> food;
    for (const auto& h : hotspots)
        if (h.tag == cluster::HotspotTag::food) food.insert(h.id);
    return food;
}

void stage_correlate(const PipelineConfig& cfg) {
    require_artifacts(cfg, "correlate");
    SlotGrid grid = load_grid(cfg.out_dir);
    std::vector<cluster::Hotspot> hotspots =
        cluster::read_hotspots_json(cfg.out_dir / "hotspots.json");
    cluster::apply_tags(hotspots, stage_tags(cfg));
    std::vector<events::EventOccurrence> evts =
        events::read_events_csv(cfg.out_dir / "events.csv");
    predict::CgmSeries cgm = predict::extract_cgm(grid);
    std::set<int> food = food_hotspots(hotspots);

    std::vector<analyze::CorrelationCurve> curves;
    auto run = [&](const analyze::IndicatorSeries& ind) {
        curves.push_back(analyze::correlation_curve(ind, cgm, cfg.analyze.lag_max_min,
                                                    cfg.analyze.lag_step_min,
                                                    cfg.analyze.rise_threshold_mgdl));
    };
    run(analyze::stationary_indicator(grid, cgm));
    run(analyze::event_indicator(evts, cgm, "event"));
    run(analyze::event_indicator(evts, cgm, "food_event", &food));
    analyze::write_correlations_csv(cfg.out_dir / "correlations.csv", curves);
}

// Exogenous channel: binary "significant event happened in this bin", with
// a bin observed whenever any location measurement or purchase exists (an
// event bin is always observed).
predict::CgmSeries build_exog_channel(const SlotGrid& grid,
                                      const std::vector<events::EventOccurrence>& evts,
                                      const std::set<int>& significant) {
    predict::CgmSeries exog;
    exog.t0 = grid.t0();
    std::int64_t span = grid.t_end() - grid.t0();
    std::size_t n = static_cast<std::size_t>((span + kCgmIntervalSeconds - 1) /
                                             kCgmIntervalSeconds);
    exog.v.assign(n, 0.0);
    exog.mask.assign(n, 0);
    const Channel& lat = grid.channel(kChLat);
    const Channel& pur = grid.channel(kChPurchase);
    for (std::size_t s = 0; s < grid.n_slots(); ++s) {
        if (!lat.mask[s] && !pur.mask[s]) continue;
        auto bin = static_cast<std::size_t>((grid.slot_time(s) - grid.t0()) /
                                            kCgmIntervalSeconds);
        if (bin < n) exog.mask[bin] = 1;
    }
    for (const auto& e : evts) {
        if (!significant.empty() && !significant.count(e.hotspot_id)) continue;
        std::int64_t off = e.peak_time - grid.t0();
        if (off < 0) continue;
        auto bin = static_cast<std::size_t>(off / kCgmIntervalSeconds);
        if (bin < n) {
            exog.v[bin] = 1.0;
            exog.mask[bin] = 1;  // an event implies an observation
        }
    }
    return exog;
}

std::optional<predict::CgmSeries> maybe_exog(const PipelineConfig& cfg,
                                             const SlotGrid& grid, bool needed) {
    if (!needed) return std::nullopt;
    auto events_path = cfg.out_dir / "events.csv";
    if (!std::filesystem::exists(events_path))
        throw StageError("missing artifact '" + events_path.string() +
                         "': run the `events` stage first (kernel_exog needs it)");
    std::vector<events::EventOccurrence> evts = events::read_events_csv(events_path);
    std::vector<cluster::Hotspot> hotspots =
        cluster::read_hotspots_json(cfg.out_dir / "hotspots.json");
    cluster::apply_tags(hotspots, stage_tags(cfg));
    std::set<int> significant = food_hotspots(hotspots);
    return build_exog_channel(grid, evts, significant);
}

bool wants_exog(const PipelineConfig& cfg) {
    return std::find(cfg.predict.models.begin(), cfg.predict.models.end(),
                     predict::ModelKind::kernel_exog) != cfg.predict.models.end();
}

void stage_train(const PipelineConfig& cfg) {
    require_artifacts(cfg, "train");
    SlotGrid grid = load_grid(cfg.out_dir);
    predict::CgmSeries cgm = predict::extract_cgm(grid);
    std::optional<predict::CgmSeries> exog = maybe_exog(cfg, grid, wants_exog(cfg));

    predict::SgdConfig sgd = cfg.predict.sgd;
    sgd.seed = derive_seed(cfg.seed, 104);

    nlohmann::json out = nlohmann::json::array();
    for (int horizon : cfg.predict.horizons_min) {
        predict::DesignMatrix D = predict::make_lagged(cgm, cfg.predict.lags, horizon);
        std::vector<Eigen::Index> all_rows(static_cast<std::size_t>(D.X.rows()));
        std::iota(all_rows.begin(), all_rows.end(), Eigen::Index{0});
        if (all_rows.empty()) throw StageError("no design rows at horizon " + std::to_string(horizon));
        predict::Standardizer st = predict::fit_standardizer(D, all_rows);
        std::vector<Eigen::Index> comp = predict::complete_rows(D);

        Eigen::MatrixXd Xc, Mc, Xa, Ma;
        st.apply(D.X, D.M, comp, Xc, Mc);
        st.apply(D.X, D.M, all_rows, Xa, Ma);
        Eigen::VectorXd yc(static_cast<Eigen::Index>(comp.size()));
        for (std::size_t i = 0; i < comp.size(); ++i)
            yc(static_cast<Eigen::Index>(i)) = st.transform_y(D.y(comp[i]));
        Eigen::VectorXd ya(static_cast<Eigen::Index>(all_rows.size()));
        for (std::size_t i = 0; i < all_rows.size(); ++i)
            ya(static_cast<Eigen::Index>(i)) = st.transform_y(D.y(all_rows[i]));

        for (predict::ModelKind kind : cfg.predict.models) {
            if (kind == predict::ModelKind::static_last) continue;  // nothing to fit
            std::optional<predict::FitResult> fit;
            try {
                switch (kind) {
                    case predict::ModelKind::ols:
                        fit = predict::fit_ols(Xc, yc);
                        break;
                    case predict::ModelKind::ridge:
                        fit = predict::fit_ridge(Xc, yc, cfg.predict.hyper.lambda_ridge);
                        break;
                    case predict::ModelKind::lasso:
                        fit = predict::fit_lasso(Xc, yc, cfg.predict.hyper.lambda_lasso);
                        break;
                    case predict::ModelKind::elastic_net:
                        fit = predict::fit_elastic_net(Xc, yc, cfg.predict.hyper.alpha_enet,
                                                       cfg.predict.hyper.lambda_enet);
                        break;
                    case predict::ModelKind::total_variation:
                        fit = predict::fit_tv(Xc, yc, cfg.predict.hyper.lambda_tv);
                        break;
                    case predict::ModelKind::kernel_masked:
                        fit = predict::fit_kernel_masked(Xa, Ma, ya, sgd);
                        break;
                    case predict::ModelKind::kernel_exog: {
                        Eigen::MatrixXd E, EM;
                        predict::lagged_block(*exog, D.row_bins, cfg.predict.lags, E, EM);
                        fit = predict::fit_kernel_exog(Xa, Ma, E, EM, ya, sgd);
                        break;
                    }
                    default:
                        break;
                }
            } catch (const std::exception& e) {
                std::cerr << predict::to_string(kind) << " at horizon " << horizon
                          << " failed to fit: " << e.what() << "\n";
            }
            if (!fit) continue;
            nlohmann::json entry;
            entry["model"] = predict::to_string(kind);
            entry["horizon_min"] = horizon;
            entry["lambda"] = fit->lambda;
            entry["alpha"] = fit->alpha;
            entry["objective"] = fit->objective;
            entry["iterations"] = fit->iterations;
            entry["singular_fallback"] = fit->singular_fallback;
            entry["weights"] = std::vector<double>(fit->w.data(), fit->w.data() + fit->w.size());
            std::vector<std::int64_t> kept(st.kept.begin(), st.kept.end());
            entry["kept_lags"] = kept;
            out.push_back(std::move(entry));
        }
    }
    std::ofstream f(cfg.out_dir / "fit_results.json", std::ios::binary);
    f << out.dump(2) << "\n";
}

void stage_evaluate(const PipelineConfig& cfg) {
    require_artifacts(cfg, "evaluate");
    SlotGrid grid = load_grid(cfg.out_dir);
    predict::CgmSeries cgm = predict::extract_cgm(grid);
    std::optional<predict::CgmSeries> exog = maybe_exog(cfg, grid, wants_exog(cfg));

    predict::SgdConfig sgd = cfg.predict.sgd;
    sgd.seed = derive_seed(cfg.seed, 105);
    std::vector<predict::ModelSpec> specs;
    for (predict::ModelKind kind : cfg.predict.models)
        specs.push_back(predict::standard_model(kind, cfg.predict.hyper, sgd));

    predict::CvResult result = predict::cross_validate(
        cgm, exog ? &*exog : nullptr, specs, cfg.predict.horizons_min, cfg.predict.folds,
        cfg.predict.lags);
    predict::write_rmse_csv(cfg.out_dir / "rmse_table.csv", cfg.out_dir / "rmse_summary.csv",
                            result);
}

void stage_export(const PipelineConfig& cfg) {
    require_artifacts(cfg, "export");
    std::vector<cluster::Hotspot> hotspots =
        cluster::read_hotspots_json(cfg.out_dir / "hotspots.json");
    cluster::apply_tags(hotspots, stage_tags(cfg));
    std::vector<events::EventOccurrence> evts =
        events::read_events_csv(cfg.out_dir / "events.csv");
    std::map<int, std::size_t> visit_counts;
    for (const auto& e : evts) visit_counts[e.hotspot_id]++;
    cluster::write_geojson(cfg.out_dir / "hotspots.geojson", hotspots, visit_counts);

    geofence::GeofencePlan plan;
    plan.max_active = cfg.geofence.max_active;
    if (!hotspots.empty())
        plan = geofence::plan_geofences(hotspots, cfg.geofence.max_active);
    geofence::write_plan_json(cfg.out_dir / "geofence_plan.json", plan);
}

}  // namespace

const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {
        "synth",     "ingest", "impute",   "cluster", "events",
        "correlate", "train",  "evaluate", "export"};
    return names;
}

void run_stage(const PipelineConfig& cfg, const std::string& stage) {
    validate_config(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    {
        std::ofstream rc(cfg.out_dir / kResolvedConfig, std::ios::binary);
        rc << config_to_json(cfg).dump(2) << "\n";
    }
    auto start = std::chrono::steady_clock::now();
    if (stage == "synth") stage_synth(cfg);
    else if (stage == "ingest") stage_ingest(cfg);
    else if (stage == "impute") stage_impute(cfg);
    else if (stage == "cluster") stage_cluster(cfg);
    else if (stage == "events") stage_events(cfg);
    else if (stage == "correlate") stage_correlate(cfg);
    else if (stage == "train") stage_train(cfg);
    else if (stage == "evaluate") stage_evaluate(cfg);
    else if (stage == "export") stage_export(cfg);
    else throw ConfigError("unknown stage: " + stage);
    auto end = std::chrono::steady_clock::now();
    double ms = std::chrono::duration<double, std::milli>(end - start).count();
    record_stage(cfg, stage, ms);
    log(cfg, stage + " done");
}

void run_all(const PipelineConfig& cfg) {
    for (const std::string& stage : stage_names()) run_stage(cfg, stage);
}

}  // namespace glucolens::pipeline
