#pragma once

#include <string>
#include <utility>
#include <vector>

#include "mmgcd/losses.hpp"

namespace mmgcd {

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 128;
    double lr0 = 0.1;
    LossWeights weights;
    double noise_sigma = 0.1;
    double drop_rate = 0.1;
    RngSeed seed;                 // drives shuffling and augmentation
    std::size_t map_refresh = 1;  // epochs between label-mapping recomputes
    bool map_per_batch = false;
};

struct TrainHistory {
    // Per-epoch batch means of the loss terms; gradients are not kept.
    std::vector<LossBreakdown> epochs;
    std::vector<double> lr_at_epoch;
    std::vector<int> final_mapping;
};

// lr0 * (1 + cos(pi * step / total)) / 2.
double cosine_lr(std::size_t step, std::size_t total_steps, double lr0);

// Maximum-agreement alignment of the two modalities' new-class ids from
// their predictions on the unlabeled set; old ids map to themselves. The
// result maps modality-y ids into modality-x index space.
std::vector<int> compute_label_mapping(const std::vector<int>& pred_x,
                                       const std::vector<int>& pred_y, std::size_t num_old,
                                       std::size_t k_total);

// Mini-batch SGD over the full objective: two augmented views per modality,
// cosine learning rate, prototype re-normalization after every step, and
// periodic Hungarian label-mapping refresh on the unlabeled set. Trailing
// incomplete batches are dropped. Deterministic given seeds.
std::pair<EncoderStack, TrainHistory> train(EncoderStack model, const MultimodalDataset& ds,
                                            const TrainConfig& cfg);

void write_history_csv(const TrainHistory& history, const std::string& path);

}  // namespace mmgcd
