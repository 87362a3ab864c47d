#include "mmgcd/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "mmgcd/kernels.hpp"

namespace mmgcd {

void validate_weights(const LossWeights& w) {
    if (w.lambda_u < 0.0 || w.lambda_s < 0.0 || w.lambda_u + w.lambda_s > 1.0 + 1e-12)
        throw InvalidConfigError("LossWeights: need lambda_u, lambda_s >= 0, sum <= 1");
    if (w.epsilon < 0.0) throw InvalidConfigError("LossWeights: epsilon must be >= 0");
}

std::vector<int> identity_mapping(std::size_t k) {
    std::vector<int> m(k);
    for (std::size_t i = 0; i < k; ++i) m[i] = static_cast<int>(i);
    return m;
}

void validate_mapping(const std::vector<int>& mapping, std::size_t num_old, std::size_t k) {
    if (mapping.size() != k) throw InvalidMappingError("mapping size != K");
    std::vector<char> seen(k, 0);
    for (std::size_t i = 0; i < k; ++i) {
        int t = mapping[i];
        if (t < 0 || static_cast<std::size_t>(t) >= k || seen[t])
            throw InvalidMappingError("mapping is not a permutation");
        seen[t] = 1;
        if (i < num_old && t != static_cast<int>(i))
            throw InvalidMappingError("mapping moves an old-class id");
    }
}

namespace {

Matrix colsum_row(const Matrix& m) {
    Matrix out(1, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row(i);
        for (std::size_t j = 0; j < m.cols; ++j) out(0, j) += row[j];
    }
    return out;
}

Matrix rownorm(const Matrix& u, Vec& norms) {
    Matrix z = u;
    norms.resize(u.rows);
    for (std::size_t i = 0; i < u.rows; ++i) {
        double* row = z.row(i);
        norms[i] = std::max(norm2(row, z.cols), 1e-12);
        for (std::size_t j = 0; j < z.cols; ++j) row[j] /= norms[i];
    }
    return z;
}

// d/du of z = u/|u| given dL/dz: (gz - z (gz.z)) / |u|, accumulated.
void rownorm_backward(const Matrix& z, const Vec& norms, const Matrix& gz, Matrix& gu) {
    for (std::size_t i = 0; i < z.rows; ++i) {
        const double* zr = z.row(i);
        const double* gr = gz.row(i);
        double* out = gu.row(i);
        double proj = dot(gr, zr, z.cols);
        for (std::size_t j = 0; j < z.cols; ++j) out[j] += (gr[j] - zr[j] * proj) / norms[i];
    }
}

// (1/B) sum_i [ -s_ii/tau + logsumexp_j(s_ij/tau) ] on a square similarity
// matrix.
double infonce_value(const Matrix& s, double tau) {
    const std::size_t b = s.rows;
    double acc = 0.0;
    for (std::size_t i = 0; i < b; ++i) {
        const double* row = s.row(i);
        double m = row[0];
        for (std::size_t j = 1; j < b; ++j) m = std::max(m, row[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < b; ++j) lse += std::exp((row[j] - m) / tau);
        acc += -row[i] / tau + m / tau + std::log(lse);
    }
    return acc / static_cast<double>(b);
}

void infonce_backward(const Matrix& s, double tau, double weight, Matrix& gs) {
    const std::size_t b = s.rows;
    Matrix sigma;
    kernels::softmax_rows(s, tau, sigma);
    const double w = weight / (static_cast<double>(b) * tau);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < b; ++j)
            gs(i, j) += w * (sigma(i, j) - (i == j ? 1.0 : 0.0));
}

// Positive sets: pos[i] lists same-label partners of row i (empty when
// unlabeled or partnerless). Anchors are rows with a non-empty set.
std::vector<std::vector<int>> positive_sets(const std::vector<int>& labels) {
    const std::size_t b = labels.size();
    std::vector<std::vector<int>> pos(b);
    for (std::size_t i = 0; i < b; ++i) {
        if (labels[i] < 0) continue;
        for (std::size_t r = 0; r < b; ++r)
            if (r != i && labels[r] == labels[i]) pos[i].push_back(static_cast<int>(r));
    }
    return pos;
}

double supcon_value(const Matrix& s, double tau, const std::vector<std::vector<int>>& pos) {
    const std::size_t b = s.rows;
    double acc = 0.0;
    std::size_t anchors = 0;
    for (std::size_t i = 0; i < b; ++i) {
        if (pos[i].empty()) continue;
        ++anchors;
        const double* row = s.row(i);
        double m = row[0];
        for (std::size_t j = 1; j < b; ++j) m = std::max(m, row[j]);
        double lse = 0.0;
        for (std::size_t j = 0; j < b; ++j) lse += std::exp((row[j] - m) / tau);
        double mean_pos = 0.0;
        for (int r : pos[i]) mean_pos += row[r];
        mean_pos /= static_cast<double>(pos[i].size());
        acc += -mean_pos / tau + m / tau + std::log(lse);
    }
    return anchors ? acc / static_cast<double>(anchors) : 0.0;
}

void supcon_backward(const Matrix& s, double tau, double weight,
                     const std::vector<std::vector<int>>& pos, Matrix& gs) {
    const std::size_t b = s.rows;
    std::size_t anchors = 0;
    for (const auto& p : pos) anchors += !p.empty();
    if (!anchors) return;
    Matrix sigma;
    kernels::softmax_rows(s, tau, sigma);
    const double w = weight / (static_cast<double>(anchors) * tau);
    for (std::size_t i = 0; i < b; ++i) {
        if (pos[i].empty()) continue;
        for (std::size_t j = 0; j < b; ++j) gs(i, j) += w * sigma(i, j);
        const double wp = w / static_cast<double>(pos[i].size());
        for (int r : pos[i]) gs(i, r) -= wp;
    }
}

double mean_ce(const Matrix& p, const Matrix& q) {
    double acc = 0.0;
    for (std::size_t i = 0; i < p.data.size(); ++i)
        acc -= q.data[i] * std::log(std::max(p.data[i], 1e-300));
    return acc / static_cast<double>(p.rows);
}

}  // namespace

// --- value-level objectives --------------------------------------------------

double loss_rep_unsup(const Matrix& z, const Matrix& z_prime, double tau) {
    if (z.rows < 2) throw DegenerateBatchError("loss_rep_unsup: batch must have >= 2 rows");
    if (!z.same_shape(z_prime)) throw DimensionMismatchError("loss_rep_unsup: view shape mismatch");
    return infonce_value(kernels::matmul_nt(z, z_prime), tau);
}

std::pair<double, bool> loss_rep_sup(const Matrix& z, const Matrix& z_prime,
                                     const std::vector<int>& labels, double tau) {
    if (!z.same_shape(z_prime)) throw DimensionMismatchError("loss_rep_sup: view shape mismatch");
    if (labels.size() != z.rows) throw DimensionMismatchError("loss_rep_sup: label count mismatch");
    auto pos = positive_sets(labels);
    bool any = false;
    for (const auto& p : pos) any = any || !p.empty();
    if (!any) return {0.0, true};
    return {supcon_value(kernels::matmul_nt(z, z_prime), tau, pos), false};
}

double loss_rep_cross(const Matrix& h, const Matrix& h_tilde, double tau) {
    if (h.rows < 2) throw DegenerateBatchError("loss_rep_cross: batch must have >= 2 rows");
    if (!h.same_shape(h_tilde)) throw DimensionMismatchError("loss_rep_cross: shape mismatch");
    Vec n1, n2;
    Matrix a = rownorm(h, n1);
    Matrix b = rownorm(h_tilde, n2);
    Matrix t = kernels::matmul_nt(a, b);
    return 0.5 * (infonce_value(t, tau) + infonce_value(transpose(t), tau));
}

double loss_cls_self_distill(const Matrix& p, const Matrix& q_sharp) {
    if (!p.same_shape(q_sharp)) throw DimensionMismatchError("loss_cls_self_distill: shape mismatch");
    return mean_ce(p, q_sharp);
}

std::pair<double, bool> loss_cls_sup(const Matrix& p, const std::vector<int>& labels) {
    if (labels.size() != p.rows) throw DimensionMismatchError("loss_cls_sup: label count mismatch");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < p.rows; ++i) {
        if (labels[i] < 0) continue;
        if (static_cast<std::size_t>(labels[i]) >= p.cols)
            throw DimensionMismatchError("loss_cls_sup: label id out of range");
        acc -= std::log(std::max(p(i, labels[i]), 1e-300));
        ++n;
    }
    if (!n) return {0.0, true};
    return {acc / static_cast<double>(n), false};
}

double loss_cls_cross_distill(const Matrix& p_x, const Matrix& p_y,
                              const std::vector<int>& mapping, std::size_t num_old) {
    if (!p_x.same_shape(p_y)) throw DimensionMismatchError("loss_cls_cross_distill: shape mismatch");
    validate_mapping(mapping, num_old, p_x.cols);
    const std::size_t b = p_x.rows, k = p_x.cols;
    // Targets in the student's index space: t_x[.,mapping[j]] = p_y[.,j].
    Matrix t_x(b, k), t_y(b, k);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t j = 0; j < k; ++j) {
            t_x(i, mapping[j]) = p_y(i, j);
            t_y(i, j) = p_x(i, mapping[j]);
        }
    return 0.5 * (mean_ce(p_x, t_x) + mean_ce(p_y, t_y));
}

double entropy_reg(const Matrix& p_all_views) {
    if (p_all_views.rows == 0) throw EmptyInputError("entropy_reg: empty input");
    Vec mean(p_all_views.cols, 0.0);
    for (std::size_t i = 0; i < p_all_views.rows; ++i) {
        const double* row = p_all_views.row(i);
        for (std::size_t j = 0; j < p_all_views.cols; ++j) mean[j] += row[j];
    }
    double h = 0.0;
    for (double& v : mean) {
        v /= static_cast<double>(p_all_views.rows);
        if (v > 0.0) h -= v * std::log(v);
    }
    return h;
}

// --- combined objective with gradients ---------------------------------------

namespace {

struct EncCache {
    std::vector<Matrix> inputs;   // layer inputs
    std::vector<Matrix> outputs;  // post-activation layer outputs
};

Matrix encode_cached(const std::vector<Affine>& layers, const Matrix& in, EncCache& cache) {
    cache.inputs.clear();
    cache.outputs.clear();
    Matrix a = in;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        cache.inputs.push_back(a);
        a = affine_apply(layers[l], a);
        if (l + 1 < layers.size())
            for (double& v : a.data) v = std::tanh(v);
        cache.outputs.push_back(a);
    }
    return a;
}

void encode_backward(const std::vector<Affine>& layers, const EncCache& cache, const Matrix& dh,
                     std::vector<Affine>& grads) {
    Matrix gpost = dh;
    for (std::size_t l = layers.size(); l-- > 0;) {
        Matrix gs = std::move(gpost);
        if (l + 1 < layers.size()) {
            const Matrix& out = cache.outputs[l];
            for (std::size_t i = 0; i < gs.data.size(); ++i)
                gs.data[i] *= 1.0 - out.data[i] * out.data[i];
        }
        add_scaled(grads[l].w, kernels::matmul_tn(gs, cache.inputs[l]), 1.0);
        add_scaled(grads[l].b, colsum_row(gs), 1.0);
        if (l > 0) gpost = kernels::matmul_nn(gs, layers[l].w);
    }
}

// Stream indices: modality 0 = x, 1 = y, 2 = fused; view 0/1.
struct Ctx {
    EncCache ecache[2][2];
    Matrix cat[2];
    Matrix h[3][2];
    Matrix u[3][2];
    Vec unorm[3][2];
    Matrix z[3][2];
    Matrix p[3][2], q[3][2];
    Matrix s_uns[3];  // z1 . z2^T per modality
    Matrix hn_x, hn_y;
    Vec hn_x_norm, hn_y_norm;
    Matrix t;  // hn_x . hn_y^T
};

struct Values {
    double rep_u_m[3], rep_s_m[3], cls_u_m[3], cls_s_m[3];
    double rep_c, cls_c, entropy_m[2];
    bool no_positives, no_labeled;
};

void forward_ctx(const EncoderStack& model, const BatchInputs& batch, Ctx& c) {
    const Matrix* views[2][2] = {{&batch.x1, &batch.x2}, {&batch.y1, &batch.y2}};
    for (int m = 0; m < 2; ++m) {
        const std::vector<Affine>& enc = m == 0 ? model.enc_x : model.enc_y;
        const Matrix& proto = m == 0 ? model.proto_x : model.proto_y;
        for (int v = 0; v < 2; ++v) {
            c.h[m][v] = encode_cached(enc, *views[m][v], c.ecache[m][v]);
            c.u[m][v] = affine_apply(model.proj, c.h[m][v]);
            c.z[m][v] = rownorm(c.u[m][v], c.unorm[m][v]);
            Matrix logits = kernels::matmul_nt(c.h[m][v], proto);
            kernels::softmax_rows(logits, model.cfg.temps.p, c.p[m][v]);
            kernels::softmax_rows(logits, model.cfg.temps.q, c.q[m][v]);
        }
    }
    for (int v = 0; v < 2; ++v) {
        const Matrix& hx = c.h[0][v];
        const Matrix& hy = c.h[1][v];
        Matrix cat(hx.rows, hx.cols + hy.cols);
        for (std::size_t i = 0; i < hx.rows; ++i) {
            std::memcpy(cat.row(i), hx.row(i), hx.cols * sizeof(double));
            std::memcpy(cat.row(i) + hx.cols, hy.row(i), hy.cols * sizeof(double));
        }
        c.cat[v] = std::move(cat);
        c.h[2][v] = affine_apply(model.fusion, c.cat[v]);
        c.u[2][v] = affine_apply(model.proj, c.h[2][v]);
        c.z[2][v] = rownorm(c.u[2][v], c.unorm[2][v]);
        Matrix logits = kernels::matmul_nt(c.h[2][v], model.proto_f);
        kernels::softmax_rows(logits, model.cfg.temps.p, c.p[2][v]);
        kernels::softmax_rows(logits, model.cfg.temps.q, c.q[2][v]);
    }
    for (int m = 0; m < 3; ++m) c.s_uns[m] = kernels::matmul_nt(c.z[m][0], c.z[m][1]);
    c.hn_x = rownorm(c.h[0][0], c.hn_x_norm);
    c.hn_y = rownorm(c.h[1][0], c.hn_y_norm);
    c.t = kernels::matmul_nt(c.hn_x, c.hn_y);
}

Matrix remap_target_x(const Matrix& p_y, const std::vector<int>& mapping) {
    Matrix t(p_y.rows, p_y.cols);
    for (std::size_t i = 0; i < p_y.rows; ++i)
        for (std::size_t j = 0; j < p_y.cols; ++j) t(i, mapping[j]) = p_y(i, j);
    return t;
}

Matrix remap_target_y(const Matrix& p_x, const std::vector<int>& mapping) {
    Matrix t(p_x.rows, p_x.cols);
    for (std::size_t i = 0; i < p_x.rows; ++i)
        for (std::size_t j = 0; j < p_x.cols; ++j) t(i, j) = p_x(i, mapping[j]);
    return t;
}

Values compute_values(const Ctx& c, const EncoderStack& model, const BatchInputs& batch,
                      const DistillTargets& tg, const std::vector<std::vector<int>>& pos) {
    const Temps& tp = model.cfg.temps;
    Values v{};
    bool any_pos = false, any_lab = false;
    for (const auto& p : pos) any_pos = any_pos || !p.empty();
    for (int l : batch.labels) any_lab = any_lab || l >= 0;
    v.no_positives = !any_pos;
    v.no_labeled = !any_lab;

    for (int m = 0; m < 3; ++m) {
        v.rep_u_m[m] = infonce_value(c.s_uns[m], tp.u);
        v.rep_s_m[m] = any_pos ? supcon_value(c.s_uns[m], tp.s, pos) : 0.0;
        v.cls_u_m[m] =
            0.5 * (mean_ce(c.p[m][0], tg.q[m][1]) + mean_ce(c.p[m][1], tg.q[m][0]));
        v.cls_s_m[m] = any_lab ? 0.5 * (loss_cls_sup(c.p[m][0], batch.labels).first +
                                        loss_cls_sup(c.p[m][1], batch.labels).first)
                               : 0.0;
    }
    v.rep_c = 0.5 * (infonce_value(c.t, tp.c) + infonce_value(transpose(c.t), tp.c));

    v.cls_c = 0.5 * (mean_ce(c.p[0][0], tg.t_x) + mean_ce(c.p[1][0], tg.t_y));

    for (int m = 0; m < 2; ++m) {
        Matrix both(c.p[m][0].rows * 2, c.p[m][0].cols);
        std::memcpy(both.data.data(), c.p[m][0].data.data(),
                    c.p[m][0].data.size() * sizeof(double));
        std::memcpy(both.data.data() + c.p[m][0].data.size(), c.p[m][1].data.data(),
                    c.p[m][1].data.size() * sizeof(double));
        v.entropy_m[m] = entropy_reg(both);
    }
    return v;
}

LossBreakdown assemble(const Values& v, const LossWeights& w) {
    const double wc = 1.0 - w.lambda_u - w.lambda_s;
    LossBreakdown b;
    b.rep_u = 0.5 * (v.rep_u_m[0] + v.rep_u_m[1]);
    b.rep_s = 0.5 * (v.rep_s_m[0] + v.rep_s_m[1]);
    b.rep_c = v.rep_c;
    b.cls_u = 0.5 * (v.cls_u_m[0] + v.cls_u_m[1]);
    b.cls_s = 0.5 * (v.cls_s_m[0] + v.cls_s_m[1]);
    b.cls_c = v.cls_c;
    b.entropy = 0.5 * (v.entropy_m[0] + v.entropy_m[1]);
    b.fusion = w.lambda_u * (v.rep_u_m[2] + v.cls_u_m[2]) +
               w.lambda_s * (v.rep_s_m[2] + v.cls_s_m[2]);
    b.no_positives = v.no_positives;
    b.no_labeled = v.no_labeled;
    b.total = w.lambda_u * b.rep_u + w.lambda_s * b.rep_s + wc * b.rep_c + w.lambda_u * b.cls_u +
              w.lambda_s * b.cls_s + wc * b.cls_c - w.epsilon * b.entropy + b.fusion;
    return b;
}

DistillTargets targets_from_ctx(const Ctx& c, const std::vector<int>& mapping) {
    DistillTargets tg;
    for (int m = 0; m < 3; ++m)
        for (int v = 0; v < 2; ++v) tg.q[m][v] = c.q[m][v];
    tg.t_x = remap_target_x(c.p[1][0], mapping);
    tg.t_y = remap_target_y(c.p[0][0], mapping);
    return tg;
}

LossBreakdown total_loss_impl(const EncoderStack& model, const BatchInputs& batch,
                              const LossWeights& weights, const std::vector<int>& mapping,
                              bool want_grads, const DistillTargets* frozen) {
    validate_weights(weights);
    const std::size_t b = batch.x1.rows;
    if (b < 2) throw DegenerateBatchError("total_loss: batch must have >= 2 rows");
    if (batch.x2.rows != b || batch.y1.rows != b || batch.y2.rows != b ||
        batch.labels.size() != b)
        throw DimensionMismatchError("total_loss: batch views/labels disagree");
    validate_mapping(mapping, batch.num_old, model.cfg.num_classes);

    Ctx c;
    forward_ctx(model, batch, c);
    DistillTargets live;
    if (!frozen) live = targets_from_ctx(c, mapping);
    const DistillTargets& tg = frozen ? *frozen : live;
    auto pos = positive_sets(batch.labels);
    Values vals = compute_values(c, model, batch, tg, pos);
    LossBreakdown out = assemble(vals, weights);
    if (!want_grads) return out;

    const Temps& tp = model.cfg.temps;
    const double wc = 1.0 - weights.lambda_u - weights.lambda_s;
    const double bsz = static_cast<double>(b);
    std::size_t n_labeled = 0;
    for (int l : batch.labels) n_labeled += l >= 0;

    // Gradient holder with the model's shapes.
    EncoderStack g;
    g.cfg = model.cfg;
    auto zero_like = [](const std::vector<Affine>& src) {
        std::vector<Affine> out;
        for (const Affine& a : src)
            out.push_back({Matrix(a.w.rows, a.w.cols), Matrix(a.b.rows, a.b.cols)});
        return out;
    };
    g.enc_x = zero_like(model.enc_x);
    g.enc_y = zero_like(model.enc_y);
    g.proj = {Matrix(model.proj.w.rows, model.proj.w.cols), Matrix(1, model.proj.b.cols)};
    g.fusion = {Matrix(model.fusion.w.rows, model.fusion.w.cols), Matrix(1, model.fusion.b.cols)};
    g.proto_x = Matrix(model.proto_x.rows, model.proto_x.cols);
    g.proto_y = Matrix(model.proto_y.rows, model.proto_y.cols);
    g.proto_f = Matrix(model.proto_f.rows, model.proto_f.cols);

    Matrix dh[3][2], dz[3][2], gl[3][2];
    for (int m = 0; m < 3; ++m)
        for (int v = 0; v < 2; ++v) {
            dh[m][v] = Matrix(b, model.cfg.d_h);
            dz[m][v] = Matrix(b, model.cfg.d_z);
            gl[m][v] = Matrix(b, model.cfg.num_classes);
        }

    // 1. Contrastive losses in z-space. Per-modality weights: the breakdown
    //    averages modalities, the fusion terms enter at full weight.
    for (int m = 0; m < 3; ++m) {
        const double wu = m == 2 ? weights.lambda_u : 0.5 * weights.lambda_u;
        const double ws = m == 2 ? weights.lambda_s : 0.5 * weights.lambda_s;
        Matrix gs(b, b);
        infonce_backward(c.s_uns[m], tp.u, wu, gs);
        if (!vals.no_positives && ws != 0.0) supcon_backward(c.s_uns[m], tp.s, ws, pos, gs);
        add_scaled(dz[m][0], kernels::matmul_nn(gs, c.z[m][1]), 1.0);
        add_scaled(dz[m][1], kernels::matmul_tn(gs, c.z[m][0]), 1.0);
    }

    // 2. Cross-modal contrastive on normalized encoder features (view 1).
    if (wc != 0.0) {
        Matrix gt(b, b);
        infonce_backward(c.t, tp.c, 0.5 * wc, gt);
        Matrix tt = transpose(c.t);
        Matrix gtt(b, b);
        infonce_backward(tt, tp.c, 0.5 * wc, gtt);
        Matrix gtt_t = transpose(gtt);
        add_scaled(gt, gtt_t, 1.0);
        Matrix dhn_x = kernels::matmul_nn(gt, c.hn_y);
        Matrix dhn_y = kernels::matmul_tn(gt, c.hn_x);
        rownorm_backward(c.hn_x, c.hn_x_norm, dhn_x, dh[0][0]);
        rownorm_backward(c.hn_y, c.hn_y_norm, dhn_y, dh[1][0]);
    }

    // 3. Classifier-head logit gradients (logits = h . proto^T / temp_p).
    auto add_ce_grad = [&](Matrix& target_gl, const Matrix& p, const Matrix& q, double weight) {
        const double s = weight / bsz;
        for (std::size_t i = 0; i < p.data.size(); ++i)
            target_gl.data[i] += s * (p.data[i] - q.data[i]);
    };
    for (int m = 0; m < 3; ++m) {
        const double wu = (m == 2 ? weights.lambda_u : 0.5 * weights.lambda_u) * 0.5;
        add_ce_grad(gl[m][0], c.p[m][0], tg.q[m][1], wu);
        add_ce_grad(gl[m][1], c.p[m][1], tg.q[m][0], wu);
        if (!vals.no_labeled) {
            const double ws = (m == 2 ? weights.lambda_s : 0.5 * weights.lambda_s) * 0.5;
            const double s = ws / static_cast<double>(n_labeled);
            for (int v = 0; v < 2; ++v)
                for (std::size_t i = 0; i < b; ++i) {
                    if (batch.labels[i] < 0) continue;
                    const double* prow = c.p[m][v].row(i);
                    double* grow = gl[m][v].row(i);
                    for (std::size_t k = 0; k < c.p[m][v].cols; ++k) grow[k] += s * prow[k];
                    grow[batch.labels[i]] -= s;
                }
        }
    }
    if (wc != 0.0) {
        add_ce_grad(gl[0][0], c.p[0][0], tg.t_x, 0.5 * wc);
        add_ce_grad(gl[1][0], c.p[1][0], tg.t_y, 0.5 * wc);
    }
    // Mean-entropy regularizer (modality heads only), minimized as -eps*H.
    for (int m = 0; m < 2; ++m) {
        const std::size_t k = model.cfg.num_classes;
        Vec mean(k, 0.0);
        for (int v = 0; v < 2; ++v)
            for (std::size_t i = 0; i < b; ++i) {
                const double* row = c.p[m][v].row(i);
                for (std::size_t j = 0; j < k; ++j) mean[j] += row[j];
            }
        Vec gbar(k);
        for (std::size_t j = 0; j < k; ++j) {
            mean[j] /= 2.0 * bsz;
            // d(-0.5 eps H)/dpbar = 0.5 eps (log pbar + 1)
            gbar[j] = 0.5 * weights.epsilon * (std::log(std::max(mean[j], 1e-300)) + 1.0);
        }
        for (int v = 0; v < 2; ++v)
            for (std::size_t i = 0; i < b; ++i) {
                const double* prow = c.p[m][v].row(i);
                double* grow = gl[m][v].row(i);
                double inner = 0.0;
                for (std::size_t j = 0; j < k; ++j) inner += prow[j] * gbar[j] / (2.0 * bsz);
                for (std::size_t j = 0; j < k; ++j)
                    grow[j] += prow[j] * (gbar[j] / (2.0 * bsz) - inner);
            }
    }

    // 4. Pull logits and projections back to features.
    for (int m = 0; m < 3; ++m) {
        const Matrix& proto = m == 0 ? model.proto_x : (m == 1 ? model.proto_y : model.proto_f);
        Matrix& gproto = m == 0 ? g.proto_x : (m == 1 ? g.proto_y : g.proto_f);
        for (int v = 0; v < 2; ++v) {
            add_scaled(dh[m][v], kernels::matmul_nn(gl[m][v], proto), 1.0 / tp.p);
            add_scaled(gproto, kernels::matmul_tn(gl[m][v], c.h[m][v]), 1.0 / tp.p);

            Matrix du(b, model.cfg.d_z);
            rownorm_backward(c.z[m][v], c.unorm[m][v], dz[m][v], du);
            add_scaled(dh[m][v], kernels::matmul_nn(du, model.proj.w), 1.0);
            add_scaled(g.proj.w, kernels::matmul_tn(du, c.h[m][v]), 1.0);
            add_scaled(g.proj.b, colsum_row(du), 1.0);
        }
    }

    // 5. Fusion head back to the modality features.
    for (int v = 0; v < 2; ++v) {
        add_scaled(g.fusion.w, kernels::matmul_tn(dh[2][v], c.cat[v]), 1.0);
        add_scaled(g.fusion.b, colsum_row(dh[2][v]), 1.0);
        Matrix dcat = kernels::matmul_nn(dh[2][v], model.fusion.w);
        const std::size_t dhh = model.cfg.d_h;
        for (std::size_t i = 0; i < b; ++i) {
            const double* src = dcat.row(i);
            double* gx = dh[0][v].row(i);
            double* gy = dh[1][v].row(i);
            for (std::size_t j = 0; j < dhh; ++j) gx[j] += src[j];
            for (std::size_t j = 0; j < dhh; ++j) gy[j] += src[dhh + j];
        }
    }

    // 6. Encoders.
    for (int v = 0; v < 2; ++v) {
        encode_backward(model.enc_x, c.ecache[0][v], dh[0][v], g.enc_x);
        encode_backward(model.enc_y, c.ecache[1][v], dh[1][v], g.enc_y);
    }

    for (const Matrix* gm : g.params()) out.grads.by_param.push_back(*gm);
    return out;
}

}  // namespace

DistillTargets distill_targets(const EncoderStack& model, const BatchInputs& batch,
                               const std::vector<int>& mapping) {
    Ctx c;
    forward_ctx(model, batch, c);
    return targets_from_ctx(c, mapping);
}

LossBreakdown total_loss(const EncoderStack& model, const BatchInputs& batch,
                         const LossWeights& weights, const std::vector<int>& mapping) {
    return total_loss_impl(model, batch, weights, mapping, true, nullptr);
}

double total_loss_value(const EncoderStack& model, const BatchInputs& batch,
                        const LossWeights& weights, const std::vector<int>& mapping,
                        const DistillTargets* frozen) {
    return total_loss_impl(model, batch, weights, mapping, false, frozen).total;
}

}  // namespace mmgcd
