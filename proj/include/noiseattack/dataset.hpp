#ifndef NOISEATTACK_DATASET_HPP
#define NOISEATTACK_DATASET_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "noiseattack/image.hpp"

namespace noiseattack {

/// A labeled image collection, values on the 0-255 scale, planar float
/// storage. Labels are dense integers in [0, num_classes).
struct Dataset {
    std::string name;
    int height = 0;
    int width = 0;
    int channels = 0;
    int num_classes = 0;
    std::vector<ImageF> images;
    std::vector<int> labels;

    int size() const { return static_cast<int>(images.size()); }
    void validate() const;

    /// Indices of all samples with the given label.
    std::vector<int> indices_of_class(int cls) const;
    /// Per-class index lists, one vector per label.
    std::vector<std::vector<int>> class_indices() const;
    Dataset subset(const std::vector<int>& indices, const std::string& subset_name) const;
};

struct DatasetPair {
    Dataset train;
    Dataset test;
};

struct SynthOptions {
    int train_per_class = 1000;
    int test_per_class = 200;
    std::uint64_t seed = 1;
};

struct IngestOptions {
    SynthOptions synth;
    std::string cache_dir;  // empty: $NOISEATTACK_CACHE or ./na_cache
};

/// Procedural handwritten-style digit set (28x28x1, 10 classes).
Dataset make_synth_digits(int per_class, std::uint64_t seed, const std::string& name);

/// Procedural colored-object set (32x32x3, 10 classes): per-class shape and
/// hue priors under heavy pose/palette/clutter jitter plus correlated grain.
Dataset make_synth_objects(int per_class, std::uint64_t seed, const std::string& name);

/// IDX-format MNIST from a directory holding the four standard
/// (decompressed) files. train selects train-images/labels vs t10k.
Dataset load_mnist_idx(const std::string& dir, bool train);

/// CIFAR-10 binary batches (data_batch_1..5.bin / test_batch.bin).
Dataset load_cifar10(const std::string& dir, bool train);

/// Directory of class subfolders holding PGM/PPM images. If dir contains
/// train/ and test/ both are used; otherwise a deterministic 90/10 split.
DatasetPair load_image_folder(const std::string& dir);

/// Checksummed binary container (format NADSET01). Loading verifies the
/// integrity checksum and throws CorruptCache on mismatch.
void save_dataset_bin(const Dataset& ds, const std::string& path);
Dataset load_dataset_bin(const std::string& path);

/// Resolves a dataset id to normalized train/test splits, materializing and
/// verifying the cache copy. Ids: mnist | cifar10 | mnist-synth |
/// cifar10-synth | folder:<path>.
DatasetPair ingest_dataset(const std::string& id, const IngestOptions& opts = {});

/// Cache directory resolution used by ingest_dataset.
std::string resolve_cache_dir(const std::string& explicit_dir);

}  // namespace noiseattack

#endif  // NOISEATTACK_DATASET_HPP
