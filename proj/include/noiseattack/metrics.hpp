#ifndef NOISEATTACK_METRICS_HPP
#define NOISEATTACK_METRICS_HPP

#include <json.hpp>

#include <string>
#include <vector>

#include "noiseattack/trainer.hpp"

namespace noiseattack {

/// Everything the quantitative evaluation produces for one checkpoint.
struct MetricsReport {
    double ca = 0.0;
    struct TargetAsr {
        int target_index = 0;
        int target = 0;
        double sigma = 0.0;
        double asr = 0.0;
    };
    std::vector<TargetAsr> per_target_asr;  // at theta_test
    double aasr = 0.0;
    double ac = 0.0;
    double aevc = 0.0;
    std::vector<double> theta_train;
    std::vector<double> theta_test;  // per-target argmax over the sweep grid
    std::vector<double> sweep_grid;
    std::vector<std::vector<double>> sweep_asr;  // [grid point][target]

    nlohmann::json to_json() const;
    static MetricsReport from_json(const nlohmann::json& j);
};

/// Deterministic seed for the fresh evaluation noise applied at sigma bucket
/// j. Exposed so oracle tests can regenerate identical triggered sets.
std::uint64_t eval_noise_seed(std::uint64_t eval_seed, int bucket);

/// Fraction of argmax-correct predictions on unmodified inputs.
double clean_accuracy(Predictor& model, const Dataset& test, int threads = 0);

/// (1/S) sum_i [pred(G_sigma(x_i)) == target] over victim-class images.
double asr(Predictor& model, const std::vector<ImageF>& victim_images, double sigma, int target,
           std::uint64_t eval_seed, int threads = 0);

/// Matched-target AASR and crossed-target AC over p sigma buckets:
/// AASR = (1/(pS)) sum_j sum_i [pred(G_{sigma_j}(x_i)) == t_j]
/// AC   = (1/(pS)) sum_j sum_i sum_{k != j} [pred(G_{sigma_j}(x_i)) == t_k]
/// The counting core over per-bucket prediction lists is exposed separately.
std::pair<double, double> aasr_ac_from_labels(const std::vector<std::vector<int>>& labels_per_bucket,
                                              const std::vector<int>& targets);
std::pair<double, double> aasr_ac(Predictor& model, const std::vector<ImageF>& victim_images,
                                  const std::vector<int>& targets,
                                  const std::vector<double>& sigmas_eval, std::uint64_t eval_seed,
                                  int threads = 0);

/// Accuracy (against true labels) on non-victim images triggered at each
/// sigma, averaged over sigmas. The input must not contain victim classes.
double aevc(Predictor& model, const Dataset& nonvictim_test, const std::vector<int>& victim_classes,
            const std::vector<double>& sigmas_eval, std::uint64_t eval_seed, int threads = 0);

struct SweepResult {
    std::vector<double> grid;
    std::vector<std::vector<double>> asr;  // [grid point][target]
    std::vector<double> theta_test;        // argmax sigma per target, ties to smaller sigma
};

/// Per-target ASR across the sigma grid plus theta_test. The grid must be
/// ascending with >= 5 points spanning [0, 2 * max(theta_train)].
SweepResult sigma_sweep(Predictor& model, const std::vector<ImageF>& victim_images,
                        const AttackPlan& plan, const std::vector<double>& grid,
                        std::uint64_t eval_seed, int threads = 0);

/// Default sweep grid: integer sigmas 0..max(20, ceil(2 * max theta_train)).
std::vector<double> default_sweep_grid(const AttackPlan& plan);

/// Full evaluation pipeline: CA, sweep -> theta_test, AASR/AC and AEVC at
/// theta_test.
MetricsReport evaluate_attack(Predictor& model, const Dataset& clean_test, const AttackPlan& plan,
                              const std::vector<double>& grid, std::uint64_t eval_seed,
                              int threads = 0);

void write_metrics_json(const MetricsReport& report, const std::string& path);
MetricsReport read_metrics_json(const std::string& path);
/// Sweep curves as CSV: sigma, ASR_target_1, ..., ASR_target_p.
void write_sweep_csv(const MetricsReport& report, const std::string& path);
/// Sweep curves as a deterministic SVG line plot with theta_train markers.
void write_sweep_svg(const MetricsReport& report, const std::string& path);

}  // namespace noiseattack

#endif  // NOISEATTACK_METRICS_HPP
