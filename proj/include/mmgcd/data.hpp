#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mmgcd/matrix.hpp"
#include "mmgcd/theory.hpp"

namespace mmgcd {

// One paired observation. `truth` is the ground-truth category kept for
// evaluation (-1 if genuinely unknown); the label visible to training is
// `truth` only when is_labeled is set.
struct PairedSample {
    Vec x;
    Vec y;
    int truth = -1;
    bool is_labeled = false;

    std::optional<int> label() const {
        return is_labeled ? std::optional<int>(truth) : std::nullopt;
    }
};

struct MultimodalDataset {
    std::vector<PairedSample> samples;
    std::size_t num_old = 0;
    std::size_t num_new = 0;
    std::size_t d_x = 0;
    std::size_t d_y = 0;

    std::size_t size() const { return samples.size(); }
    std::size_t num_classes() const { return num_old + num_new; }

    Matrix features_x() const;
    Matrix features_y() const;
    std::vector<int> truths() const;
    std::vector<std::size_t> unlabeled_indices() const;
};

struct DatasetSpec {
    std::size_t k_total = 10;
    std::size_t k_old = 5;
    std::size_t d = 32;             // per-modality dimension
    std::size_t n_per_class = 200;
    double mean_separation = 1.0;   // in units of average per-coordinate std
    double r_low = 0.5;
    double r_high = 0.5;
    double labeled_fraction = 0.5;  // within old classes
    RngSeed seed;
};

// Synthesize a dataset of fused Gaussian draws, split back into the two
// modalities, plus the ground-truth class models for theory cross-checks.
// The labeled/unlabeled split is already applied.
std::pair<MultimodalDataset, std::vector<GaussianClassModel>> generate(const DatasetSpec& spec);

// Stratified labeling: per old class, a seed-deterministic shuffle marks
// round(fraction * n_k) samples labeled. New-class samples stay unlabeled.
MultimodalDataset split_gcd(const MultimodalDataset& ds, double labeled_fraction, RngSeed seed);

// Feature files: headerless CSV, one row of decimal floats per sample.
// Labels file: CSV with header `index,label,is_labeled`.
MultimodalDataset load_features(const std::string& x_path, const std::string& y_path,
                                const std::string& labels_path);
void save_features(const MultimodalDataset& ds, const std::string& x_path,
                   const std::string& y_path, const std::string& labels_path);

// Two-step feature-space view: additive Gaussian noise, then coordinate
// dropout with survivors rescaled by 1/(1-drop_rate).
Vec augment(const Vec& v, double noise_sigma, double drop_rate, Rng& rng);
Vec augment(const Vec& v, double noise_sigma, double drop_rate, RngSeed seed);

}  // namespace mmgcd
