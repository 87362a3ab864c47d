#pragma once

#include <utility>
#include <vector>

#include "mmgcd/model.hpp"

namespace mmgcd {

struct LossWeights {
    double lambda_u = 0.35;
    double lambda_s = 0.35;  // cross-modal weight is 1 - lambda_u - lambda_s
    double epsilon = 1.0;
};

void validate_weights(const LossWeights& w);

// Gradients aligned with EncoderStack::params() order.
struct ParamGrads {
    std::vector<Matrix> by_param;
};

struct LossBreakdown {
    double rep_u = 0.0, rep_s = 0.0, rep_c = 0.0;
    double cls_u = 0.0, cls_s = 0.0, cls_c = 0.0;
    double entropy = 0.0;
    double fusion = 0.0;
    double total = 0.0;
    bool no_positives = false;  // batch had no same-label pair
    bool no_labeled = false;    // batch had no labeled row
    ParamGrads grads;
};

// One training batch: two augmented views per modality plus the visible
// labels (-1 on unlabeled rows). num_old bounds the ids the label mapping
// must keep fixed.
struct BatchInputs {
    Matrix x1, x2;
    Matrix y1, y2;
    std::vector<int> labels;
    std::size_t num_old = 0;
};

// --- individual objectives (value-level API) -------------------------------

// Two-view InfoNCE; the denominator ranges over all B rows including the
// positive.
double loss_rep_unsup(const Matrix& z, const Matrix& z_prime, double tau);

// Supervised contrastive: positives are the other labeled same-label rows.
// Returns {0, true} when no row has a positive.
std::pair<double, bool> loss_rep_sup(const Matrix& z, const Matrix& z_prime,
                                     const std::vector<int>& labels, double tau);

// Cross-modal InfoNCE on encoder features, row-normalized here, averaged
// over both directions.
double loss_rep_cross(const Matrix& h, const Matrix& h_tilde, double tau);

// Mean cross-entropy against constant soft targets.
double loss_cls_self_distill(const Matrix& p, const Matrix& q_sharp);

// Mean one-hot cross-entropy over labeled rows; {0, true} when none.
std::pair<double, bool> loss_cls_sup(const Matrix& p, const std::vector<int>& labels);

// Symmetrized cross-modal distillation with new-class index remapping;
// targets are constants.
double loss_cls_cross_distill(const Matrix& p_x, const Matrix& p_y,
                              const std::vector<int>& mapping, std::size_t num_old);

// Entropy of the mean prediction over all rows (both views stacked).
double entropy_reg(const Matrix& p_all_views);

// --- combined objective -----------------------------------------------------

std::vector<int> identity_mapping(std::size_t k);

// Throws InvalidMapping unless mapping fixes [0, num_old) and permutes the
// rest.
void validate_mapping(const std::vector<int>& mapping, std::size_t num_old, std::size_t k);

// The distillation targets are constants in the objective (stop-gradient):
// sharpened per-head per-view posteriors and the remapped cross-modal
// targets for view 1. Capturing them explicitly lets finite differences
// probe exactly the function the gradients differentiate.
struct DistillTargets {
    Matrix q[3][2];   // [x, y, fused] x [view1, view2], temp q
    Matrix t_x, t_y;  // cross-distill targets in each student's index space
};

DistillTargets distill_targets(const EncoderStack& model, const BatchInputs& batch,
                               const std::vector<int>& mapping);

// Full objective with exact gradients for every parameter group. Targets
// are taken from the live model.
LossBreakdown total_loss(const EncoderStack& model, const BatchInputs& batch,
                         const LossWeights& weights, const std::vector<int>& mapping);

// Value-only path (same implementation). Pass frozen targets to probe the
// stop-gradient objective with finite differences.
double total_loss_value(const EncoderStack& model, const BatchInputs& batch,
                        const LossWeights& weights, const std::vector<int>& mapping,
                        const DistillTargets* frozen = nullptr);

}  // namespace mmgcd
