#pragma once

#include <string>
#include <vector>

#include "mmgcd/data.hpp"
#include "mmgcd/matrix.hpp"

namespace mmgcd {

struct Temps {
    double u = 0.07;  // unsupervised contrastive
    double s = 0.07;  // supervised contrastive
    double c = 0.07;  // cross-modal contrastive
    double p = 0.1;   // prototype pseudo-probability
    double q = 0.05;  // sharpened distillation target
};

struct ModelConfig {
    std::size_t d_x = 32;
    std::size_t d_y = 32;
    std::vector<std::size_t> hidden = {64};  // encoder hidden widths
    std::size_t d_h = 32;
    std::size_t d_z = 16;
    std::size_t num_classes = 10;
    Temps temps;
};

// y = x W^T + b. The bias is a 1 x out matrix so parameter and gradient
// traversal stays uniform.
struct Affine {
    Matrix w;
    Matrix b;
};

// Two MLP encoders with tanh between affine layers, a shared projection
// head, a linear fusion head, and one unit-row prototype bank per
// classifier (modality x, modality y, fused). The three banks share the
// class-index vocabulary.
struct EncoderStack {
    ModelConfig cfg;
    std::vector<Affine> enc_x;
    std::vector<Affine> enc_y;
    Affine proj;    // d_h -> d_z
    Affine fusion;  // 2*d_h -> d_h
    Matrix proto_x;
    Matrix proto_y;
    Matrix proto_f;  // each K x d_h

    // Parameters in declaration order; the same order is used by
    // checkpoints, gradients, and the SGD update.
    std::vector<Matrix*> params();
    std::vector<const Matrix*> params() const;
    std::vector<std::string> param_names() const;
};

struct ModalityForward {
    Matrix h1, h2;  // encoder features, both views (B x d_h)
    Matrix z1, z2;  // unit-norm projections (B x d_z)
    Matrix p1, p2;  // pseudo-probabilities at temp p (B x K)
    Matrix q1, q2;  // sharpened targets at temp q (B x K)
};

struct BatchForward {
    ModalityForward x, y, fused;
};

EncoderStack init_model(const ModelConfig& cfg, RngSeed seed);

// Encoder application: affine -> tanh -> ... -> affine.
Matrix encode(const std::vector<Affine>& layers, const Matrix& input);

Matrix affine_apply(const Affine& a, const Matrix& input);

// Unit-normalized projection z = norm(g(h)).
Matrix project_z(const EncoderStack& model, const Matrix& h);

// Temperature softmax over prototype dot products.
Vec classify(const Vec& h, const Matrix& prototypes, double temp);
Matrix classify_rows(const Matrix& h, const Matrix& prototypes, double temp);

// Linear fusion of the concatenated modality features.
Vec fuse(const EncoderStack& model, const Vec& h_x, const Vec& h_y);
Matrix fuse_rows(const EncoderStack& model, const Matrix& h_x, const Matrix& h_y);

// Full two-view forward pass for one batch.
BatchForward forward(const EncoderStack& model, const Matrix& x1, const Matrix& x2,
                     const Matrix& y1, const Matrix& y2);

// Rescale every prototype row to unit norm (applied after each SGD step).
void renormalize_prototypes(EncoderStack& model);

// Inference over a dataset with unaugmented features.
struct Predictions {
    Matrix h_x, h_y, h_f;
    Matrix logits_x, logits_y, logits_f;  // prototype dot products / temp p
    std::vector<int> pred_x, pred_y, pred_f;
};
Predictions predict_all(const EncoderStack& model, const MultimodalDataset& ds);

// Binary checkpoint: "MMGCD1" magic, little-endian shape counts, temps,
// then float32 payloads in declaration order.
void save_checkpoint(const EncoderStack& model, const std::string& path);
EncoderStack load_checkpoint(const std::string& path);

}  // namespace mmgcd
