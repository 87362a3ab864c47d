#include "mmgcd/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "mmgcd/eval.hpp"

namespace mmgcd {

double cosine_lr(std::size_t step, std::size_t total_steps, double lr0) {
    if (total_steps == 0 || step > total_steps)
        throw InvalidConfigError("cosine_lr: need 0 <= step <= total_steps, total > 0");
    return lr0 * 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                       static_cast<double>(total_steps)));
}

std::vector<int> compute_label_mapping(const std::vector<int>& pred_x,
                                       const std::vector<int>& pred_y, std::size_t num_old,
                                       std::size_t k_total) {
    if (pred_x.size() != pred_y.size())
        throw DimensionMismatchError("compute_label_mapping: prediction counts differ");
    std::vector<int> mapping = identity_mapping(k_total);
    const std::size_t n_new = k_total - num_old;
    if (n_new == 0) return mapping;

    // Co-occurrence over new-class predictions only; rows index modality-y
    // ids, columns modality-x ids. Hungarian on the negated counts gives the
    // maximum-agreement bijection.
    Matrix cost(n_new, n_new);
    for (std::size_t i = 0; i < pred_x.size(); ++i) {
        int a = pred_x[i] - static_cast<int>(num_old);
        int b = pred_y[i] - static_cast<int>(num_old);
        if (a < 0 || b < 0) continue;
        if (a >= static_cast<int>(n_new) || b >= static_cast<int>(n_new))
            throw DimensionMismatchError("compute_label_mapping: prediction id out of range");
        cost(b, a) -= 1.0;
    }
    Assignment assign = hungarian_assign(cost);
    for (std::size_t b = 0; b < n_new; ++b)
        mapping[num_old + b] = static_cast<int>(num_old) + assign.mapping[b];
    return mapping;
}

namespace {

std::vector<int> refresh_mapping(const EncoderStack& model, const MultimodalDataset& ds) {
    Predictions pr = predict_all(model, ds);
    std::vector<int> px, py;
    for (std::size_t i : ds.unlabeled_indices()) {
        px.push_back(pr.pred_x[i]);
        py.push_back(pr.pred_y[i]);
    }
    return compute_label_mapping(px, py, ds.num_old, model.cfg.num_classes);
}

}  // namespace

std::pair<EncoderStack, TrainHistory> train(EncoderStack model, const MultimodalDataset& ds,
                                            const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw InvalidConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 2) throw InvalidConfigError("train: batch_size must be >= 2");
    if (!(cfg.lr0 >= 0.0)) throw InvalidConfigError("train: lr0 must be non-negative");
    if (cfg.map_refresh < 1) throw InvalidConfigError("train: map_refresh must be >= 1");
    validate_weights(cfg.weights);
    if (ds.d_x != model.cfg.d_x || ds.d_y != model.cfg.d_y)
        throw DimensionMismatchError("train: dataset dims do not match the model");
    if (ds.num_classes() != model.cfg.num_classes)
        throw InvalidConfigError("train: dataset classes do not match the model");

    const std::size_t n = ds.size();
    const std::size_t batches = n / cfg.batch_size;  // trailing partial batch dropped
    if (batches == 0) throw InvalidConfigError("train: batch_size exceeds the dataset");
    const std::size_t total_steps = cfg.epochs * batches;

    TrainHistory hist;
    std::vector<int> mapping = identity_mapping(model.cfg.num_classes);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng root(cfg.seed);

    std::vector<Matrix*> params = model.params();
    std::size_t step = 0;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (!cfg.map_per_batch && epoch % cfg.map_refresh == 0)
            mapping = refresh_mapping(model, ds);

        Rng shuffle_rng = root.substream(2 * epoch);
        Rng aug_rng = root.substream(2 * epoch + 1);
        for (std::size_t i = n; i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.below(i)]);

        LossBreakdown epoch_sum;
        hist.lr_at_epoch.push_back(cosine_lr(step, total_steps, cfg.lr0));
        for (std::size_t bi = 0; bi < batches; ++bi) {
            if (cfg.map_per_batch) mapping = refresh_mapping(model, ds);

            BatchInputs batch;
            batch.num_old = ds.num_old;
            batch.x1 = Matrix(cfg.batch_size, ds.d_x);
            batch.x2 = Matrix(cfg.batch_size, ds.d_x);
            batch.y1 = Matrix(cfg.batch_size, ds.d_y);
            batch.y2 = Matrix(cfg.batch_size, ds.d_y);
            batch.labels.resize(cfg.batch_size);
            for (std::size_t r = 0; r < cfg.batch_size; ++r) {
                const PairedSample& s = ds.samples[order[bi * cfg.batch_size + r]];
                Vec xv1 = augment(s.x, cfg.noise_sigma, cfg.drop_rate, aug_rng);
                Vec xv2 = augment(s.x, cfg.noise_sigma, cfg.drop_rate, aug_rng);
                Vec yv1 = augment(s.y, cfg.noise_sigma, cfg.drop_rate, aug_rng);
                Vec yv2 = augment(s.y, cfg.noise_sigma, cfg.drop_rate, aug_rng);
                std::copy(xv1.begin(), xv1.end(), batch.x1.row(r));
                std::copy(xv2.begin(), xv2.end(), batch.x2.row(r));
                std::copy(yv1.begin(), yv1.end(), batch.y1.row(r));
                std::copy(yv2.begin(), yv2.end(), batch.y2.row(r));
                batch.labels[r] = s.is_labeled ? s.truth : -1;
            }

            LossBreakdown lb = total_loss(model, batch, cfg.weights, mapping);
            if (!std::isfinite(lb.total))
                throw NonFiniteLossError("train: non-finite loss at epoch " +
                                         std::to_string(epoch) + " batch " + std::to_string(bi));

            const double lr = cosine_lr(step, total_steps, cfg.lr0);
            for (std::size_t pi = 0; pi < params.size(); ++pi)
                add_scaled(*params[pi], lb.grads.by_param[pi], -lr);
            renormalize_prototypes(model);
            ++step;

            epoch_sum.rep_u += lb.rep_u;
            epoch_sum.rep_s += lb.rep_s;
            epoch_sum.rep_c += lb.rep_c;
            epoch_sum.cls_u += lb.cls_u;
            epoch_sum.cls_s += lb.cls_s;
            epoch_sum.cls_c += lb.cls_c;
            epoch_sum.entropy += lb.entropy;
            epoch_sum.fusion += lb.fusion;
            epoch_sum.total += lb.total;
            epoch_sum.no_positives = epoch_sum.no_positives || lb.no_positives;
            epoch_sum.no_labeled = epoch_sum.no_labeled || lb.no_labeled;
        }
        const double inv = 1.0 / static_cast<double>(batches);
        epoch_sum.rep_u *= inv;
        epoch_sum.rep_s *= inv;
        epoch_sum.rep_c *= inv;
        epoch_sum.cls_u *= inv;
        epoch_sum.cls_s *= inv;
        epoch_sum.cls_c *= inv;
        epoch_sum.entropy *= inv;
        epoch_sum.fusion *= inv;
        epoch_sum.total *= inv;
        hist.epochs.push_back(std::move(epoch_sum));
    }
    hist.final_mapping = mapping;
    return {std::move(model), std::move(hist)};
}

void write_history_csv(const TrainHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "epoch,lr,rep_u,rep_s,rep_c,cls_u,cls_s,cls_c,entropy,fusion,total\n";
    char buf[512];
    for (std::size_t e = 0; e < history.epochs.size(); ++e) {
        const LossBreakdown& b = history.epochs[e];
        std::snprintf(buf, sizeof(buf),
                      "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", e,
                      history.lr_at_epoch[e], b.rep_u, b.rep_s, b.rep_c, b.cls_u, b.cls_s, b.cls_c,
                      b.entropy, b.fusion, b.total);
        out << buf;
    }
    if (!out) throw IoError("write failed: " + path);
}

}  // namespace mmgcd
