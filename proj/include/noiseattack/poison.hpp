#ifndef NOISEATTACK_POISON_HPP
#define NOISEATTACK_POISON_HPP

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "noiseattack/dataset.hpp"
#include "noiseattack/wgn.hpp"

namespace noiseattack {

/// Full attack configuration: victim classes, ordered (target, sigma)
/// pairs and the per-class/per-target poison ratio.
struct AttackPlan {
    std::vector<int> victim_classes;  // sorted, distinct
    std::vector<int> targets;         // one per sigma, pairwise distinct
    std::vector<double> sigmas;       // strictly increasing, positive
    double poison_ratio = 0.0;        // in (0, 1]
    std::uint64_t master_seed = 0;

    int num_targets() const { return static_cast<int>(targets.size()); }
    bool is_victim(int cls) const;
    void validate() const;
};

/// Validates and canonically orders a plan: (sigma, target) pairs sorted by
/// ascending sigma, victims sorted and deduplicated.
AttackPlan plan_attack(std::vector<int> victims, std::vector<int> targets,
                       std::vector<double> sigmas, double poison_ratio, std::uint64_t master_seed);

enum class Provenance { kClean = 0, kVictimPoisoned = 1, kNonVictimPoisoned = 2 };

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& s);

struct PoisonedSample {
    int source_index = 0;   // index into the clean dataset
    int label = 0;          // training label (relabeled for victim_poisoned)
    Provenance provenance = Provenance::kClean;
    int target_index = -1;  // sigma bucket j for poisoned samples, -1 for clean
    double sigma = 0.0;
    std::uint64_t seed = 0;  // noise seed, 0 for clean
};

struct Composition {
    int clean = 0;
    int victim_poisoned = 0;
    int nonvictim_poisoned = 0;
    int total() const { return clean + victim_poisoned + nonvictim_poisoned; }
};

/// The backdoor training set: all clean samples plus victim and non-victim
/// triggered copies. Images are regenerated on demand from (source, sigma,
/// seed), which is bit-exact, unless a materialized payload was loaded from
/// disk.
struct PoisonedDataset {
    std::shared_ptr<const Dataset> clean;
    AttackPlan plan;
    std::vector<PoisonedSample> samples;
    Composition composition;
    std::vector<ImageF> materialized;  // optional; parallel to samples when set

    int size() const { return static_cast<int>(samples.size()); }
    ImageF materialize(int i) const;
    void validate() const;
};

/// Constructs D*_train: per victim class with s samples and per target
/// bucket j, ceil(P*s) distinct samples triggered at sigma_j and relabeled
/// to targets[j]; per non-victim class and bucket, ceil(P*s) samples
/// triggered but keeping their labels; every original sample retained
/// clean. Deterministic in plan.master_seed.
PoisonedDataset build_poisoned_dataset(std::shared_ptr<const Dataset> clean, const AttackPlan& plan);

/// Triggered copies for evaluation: every image gets fresh noise at the
/// given sigma (seeds derived from eval_seed, independent of training
/// noise). Labels are the caller's bookkeeping and stay untouched.
std::vector<ImageF> poison_for_eval(const std::vector<ImageF>& images, double sigma,
                                    std::uint64_t eval_seed);

/// On-disk layout: meta.json + index.jsonl (one record per sample) +
/// payloads.bin (float32 image records). Bit-exact round-trip.
void write_poisoned_dataset(const PoisonedDataset& pd, const std::string& dir);
PoisonedDataset read_poisoned_dataset(const std::string& dir,
                                      std::shared_ptr<const Dataset> clean = nullptr);

}  // namespace noiseattack

#endif  // NOISEATTACK_POISON_HPP
