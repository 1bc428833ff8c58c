#ifndef NOISEATTACK_DEFENSE_HPP
#define NOISEATTACK_DEFENSE_HPP

#include <json.hpp>

#include <map>
#include <string>
#include <vector>

#include "noiseattack/stats.hpp"
#include "noiseattack/trainer.hpp"

namespace noiseattack {

// ---------------------------------------------------------------------------
// STRIP: overlay blending and prediction-entropy statistics
// ---------------------------------------------------------------------------

struct StripResult {
    std::vector<double> entropies_clean;
    std::vector<double> entropies_triggered;
    int n_overlays = 0;
    double mean_clean = 0.0, std_clean = 0.0;
    double mean_triggered = 0.0, std_triggered = 0.0;
    double overlap = 0.0;  // histogram overlap coefficient in [0, 1]

    nlohmann::json to_json() const;
};

/// Mean prediction entropy of the input blended with the first n_overlays
/// overlays: blend = alpha * input + (1 - alpha) * overlay, clamped to the
/// 0-255 range.
double strip_entropy(Predictor& model, const ImageF& input, const std::vector<ImageF>& overlay_set,
                     int n_overlays, double blend_alpha, int threads = 0);

/// Entropy distributions for a clean and a triggered input population.
StripResult strip_suite(Predictor& model, const std::vector<ImageF>& clean_inputs,
                        const std::vector<ImageF>& triggered_inputs,
                        const std::vector<ImageF>& overlay_set, int n_overlays, double blend_alpha,
                        int threads = 0);

// ---------------------------------------------------------------------------
// Neural Cleanse: per-class trigger reverse engineering
// ---------------------------------------------------------------------------

struct NeuralCleanseOptions {
    int steps = 1000;
    double lambda = 1e-3;  // L1 mask penalty
    double lr = 0.1;
    std::string optimizer = "adam";  // adam | sgd
    int batch = 32;
    bool dynamic_lambda = false;      // multiplicative adjustment on attack success
    double success_threshold = 0.99;
    double lambda_factor = 1.02;
};

struct CleansePerClass {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> mask;  // h x w in [0,1]
    ImageF pattern;  // h x w x c on the 0-255 scale
    double l1_norm = 0.0;
    std::vector<double> loss_trace;
    double mask_min = 0.0, mask_max = 0.0;  // extremes seen over all steps
};

struct CleanseResult {
    std::map<int, CleansePerClass> per_class;
    std::map<int, double> anomaly;  // MAD-based outlier score of the L1 norms
    double median_l1 = 0.0;
    // Backdoor flag per the defense's convention: an anomalous mask norm on
    // the small side (a small trigger reaches the class). Large-side
    // outliers mean the class resists reconstruction, not that it hides a
    // triggerdoor.
    std::map<int, bool> flagged;
};

/// Optimizes (mask, pattern) so that (1-m) * x + m * pattern is classified
/// as cls, with an L1 penalty on the mask. The mask stays in [0,1] via a
/// tanh parameterization; non-convergence is not an error, the final state
/// and full loss trace are returned.
CleansePerClass neural_cleanse(Predictor& model, const std::vector<ImageF>& probe_images, int cls,
                               const NeuralCleanseOptions& opts, std::uint64_t seed,
                               int threads = 0);

/// Runs neural_cleanse for every class and scores mask norms with the
/// normal-consistent MAD anomaly index.
CleanseResult neural_cleanse_all(Predictor& model, const std::vector<ImageF>& probe_images,
                                 const NeuralCleanseOptions& opts, std::uint64_t seed,
                                 int threads = 0);

// ---------------------------------------------------------------------------
// Grad-CAM
// ---------------------------------------------------------------------------

struct CamResult {
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> heatmap;  // a x b in [0,1]
    int cls = 0;
    std::string provenance;  // "clean" or "triggered(sigma)"
};

/// Gradient-weighted class activation map at the named layer (default: the
/// last spatial layer). Channel weights are spatial means of d logit / d A;
/// the heatmap is ReLU(sum_k w_k A_k), bilinearly upsampled and
/// max-normalized (all-zero if no activation has positive weight).
CamResult gradcam(Predictor& model, const ImageF& image, int cls,
                  const std::string& layer_name = "", const std::string& provenance = "clean");

struct CamShift {
    double mean_abs_diff = 0.0;            // mean |H_clean - H_triggered|
    std::vector<double> per_image;
};

/// Heatmap displacement between clean and sigma-triggered copies of the
/// same images, for the model's predicted class on the clean input.
CamShift gradcam_shift(Predictor& model, const std::vector<ImageF>& images, double sigma,
                       std::uint64_t eval_seed, const std::string& layer_name = "");

/// Dumps heatmap pairs (clean vs triggered) for the first count images as
/// PGM files with JSON metadata sidecars.
void write_cam_examples(Predictor& model, const std::vector<ImageF>& images, double sigma,
                        std::uint64_t eval_seed, const std::string& dir,
                        const std::string& layer_name = "", int count = 4);

// ---------------------------------------------------------------------------
// aggregate report
// ---------------------------------------------------------------------------

struct DefenseReport {
    bool has_strip = false;
    StripResult strip;
    bool has_cleanse = false;
    CleanseResult cleanse;
    bool has_gradcam = false;
    CamShift cam_shift;

    nlohmann::json to_json() const;
};

void write_defense_report(const DefenseReport& report, const std::string& dir);

}  // namespace noiseattack

#endif  // NOISEATTACK_DEFENSE_HPP
