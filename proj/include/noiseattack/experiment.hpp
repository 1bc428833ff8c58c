#ifndef NOISEATTACK_EXPERIMENT_HPP
#define NOISEATTACK_EXPERIMENT_HPP

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "noiseattack/defense.hpp"
#include "noiseattack/metrics.hpp"

namespace noiseattack {

/// Full configuration of one end-to-end run. Parsed strictly: unknown keys
/// are rejected so a typo in a sigma list cannot silently corrupt an
/// experiment.
struct ExperimentConfig {
    // dataset
    std::string dataset_id = "mnist-synth";
    SynthOptions synth;
    std::string cache_dir;

    // model
    std::string architecture = "desk_cnn_small";
    nn::TensorShape input{28, 28, 1};

    // attack
    std::vector<int> victims{0};
    std::vector<int> targets{2, 3};
    std::vector<double> sigmas{5.0, 10.0};
    double poison_ratio = 0.10;

    // training
    int clean_epochs = 6;
    TrainConfig train;  // backdoor phase settings (seed fields derived from master_seed)
    bool fine_tune_from_clean = true;
    std::string clean_checkpoint;  // reuse an existing clean model when set

    // evaluation
    std::vector<double> grid;  // empty: default integer grid

    // defenses
    struct StripCfg {
        bool enabled = false;
        int n_overlays = 100;
        double blend_alpha = 0.5;
        int n_inputs = 100;
    } strip;
    struct CleanseCfg {
        bool enabled = false;
        NeuralCleanseOptions opts;
        int probe_per_class = 10;
    } cleanse;
    struct CamCfg {
        bool enabled = false;
        int n_images = 32;
        double sigma = 0.0;  // 0: use the smallest trained sigma
        std::string layer;
    } cam;

    bool dump_poisoned = false;
    bool unsupported_desk_scale = false;  // presets above desk scale refuse to run...
    bool allow_heavy = false;             // ...unless explicitly overridden

    std::string output_dir = "runs/out";
    std::uint64_t master_seed = 1;
    bool deterministic = true;
    nlohmann::json axes;  // optional grid axes (victims / attacks / poison_ratios)

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    void validate() const;
    /// Hash over every semantic field (output_dir excluded: it does not
    /// change what is computed).
    std::uint64_t hash() const;
};

/// Built-in preset configurations mirroring the quantitative studies at
/// desk scale. Known names: mnist-2target, cifar-2target, cifar-pgrid,
/// cifar-multitarget, imagenet100.
ExperimentConfig preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct RunRecord {
    nlohmann::json doc;

    std::string status() const { return doc.value("status", "unknown"); }
    MetricsReport metrics() const { return MetricsReport::from_json(doc.at("metrics")); }
};

/// Executes poison -> train -> evaluate -> (optional) defend, persisting
/// artifacts under config.output_dir. A completed run directory is
/// returned as-is; a failed one leaves FAILED.json plus whatever stage
/// outputs completed, and a rerun resumes from there.
RunRecord run_experiment(const ExperimentConfig& config);

struct GridCell {
    std::string name;
    ExperimentConfig config;
    std::string status;  // complete | failed: <msg>
    std::optional<MetricsReport> metrics;
};

/// Cross-product execution over config.axes; individual cell failures are
/// recorded and the grid continues. Writes summary.csv / summary.md under
/// config.output_dir.
std::vector<GridCell> run_grid(const ExperimentConfig& base);

/// Regenerates the report bundle (summary table + sweep plots) from
/// persisted run records. Deterministic: equal inputs give byte-equal
/// outputs.
void render_report(const std::vector<std::string>& run_dirs, const std::string& out_dir);

RunRecord load_run_record(const std::string& run_dir);

}  // namespace noiseattack

#endif  // NOISEATTACK_EXPERIMENT_HPP
