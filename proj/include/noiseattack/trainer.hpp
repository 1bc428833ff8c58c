#ifndef NOISEATTACK_TRAINER_HPP
#define NOISEATTACK_TRAINER_HPP

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "noiseattack/nn.hpp"
#include "noiseattack/poison.hpp"

namespace noiseattack {

/// Which classifier to train. architecture is a built-in id
/// (desk_cnn_small | desk_cnn_cifar) or file:<path> pointing at a JSON
/// layer list for pluggable externals.
struct ModelSpec {
    std::string architecture = "desk_cnn_small";
    int num_classes = 10;
    nn::TensorShape input{28, 28, 1};
};

nn::ModelArch resolve_arch(const ModelSpec& spec);
nlohmann::json arch_to_json(const nn::ModelArch& arch);
nn::ModelArch arch_from_json(const nlohmann::json& j);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 64;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::vector<int> lr_milestones;  // epoch indices where lr *= lr_gamma
    double lr_gamma = 0.1;
    std::string optimizer = "sgd_momentum";
    std::uint64_t seed = 1;
    bool deterministic = true;
    int threads = 0;  // 0: hardware default
    double holdout_fraction = 0.1;
    int holdout_cap = 2000;
    // per-bucket loss weights (clean / victim_poisoned / nonvictim_poisoned)
    double w_clean = 1.0;
    double w_victim = 1.0;
    double w_nonvictim = 1.0;

    void validate() const;
};

/// Weights plus everything needed to rebuild and audit the model.
struct Checkpoint {
    nn::ModelArch arch;
    std::vector<float> state;
    nlohmann::json provenance;
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

/// Eval-mode model wrapper shared by evaluator and defense code.
class Predictor {
public:
    explicit Predictor(const Checkpoint& ckpt);

    /// Class-probability rows, one row per image.
    Eigen::MatrixXf predict(const std::vector<ImageF>& images, int threads = 0);
    std::vector<int> predict_labels(const std::vector<ImageF>& images, int threads = 0);

    nn::Network<float>& network() { return net_; }
    const nn::ModelArch& arch() const { return net_.arch(); }

private:
    nn::Network<float> net_;
};

/// Trains from scratch on clean data; the checkpoint provenance records the
/// final held-out accuracy.
Checkpoint train_clean(const ModelSpec& spec, const Dataset& train, const TrainConfig& cfg,
                       const std::string& log_path = "");

/// Fine-tunes (or trains from scratch when init is null) on the three-bucket
/// poisoned union, minimizing the summed cross-entropy objective with all
/// buckets mixed in every epoch.
Checkpoint train_backdoored(const ModelSpec& spec, const PoisonedDataset& poisoned,
                            const TrainConfig& cfg, const Checkpoint* init = nullptr,
                            const std::string& log_path = "");

/// Class-probability rows for a batch of images (softmax output).
Eigen::MatrixXf predict_batch(const Checkpoint& ckpt, const std::vector<ImageF>& images,
                              int threads = 0);

struct BucketLosses {
    double clean = 0.0;
    double victim = 0.0;
    double nonvictim = 0.0;
    double total = 0.0;
    int n_clean = 0, n_victim = 0, n_nonvictim = 0;
};

/// Eval-mode mean cross-entropy per provenance bucket over the first
/// `limit` samples (all when limit <= 0); total is the count-weighted mean
/// over the union.
BucketLosses compute_bucket_losses(const Checkpoint& ckpt, const PoisonedDataset& poisoned,
                                   int limit = 0, int threads = 0);

}  // namespace noiseattack

#endif  // NOISEATTACK_TRAINER_HPP
