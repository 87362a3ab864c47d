#include "mmgcd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mmgcd/kmeans.hpp"

namespace mmgcd {

Assignment hungarian_assign(const Matrix& cost) {
    if (cost.rows != cost.cols) throw DimensionMismatchError("hungarian_assign: matrix not square");
    if (!all_finite(cost)) throw DegenerateInputError("hungarian_assign: non-finite cost");
    const int n = static_cast<int>(cost.rows);
    if (n == 0) throw EmptyInputError("hungarian_assign: empty cost matrix");

    const double inf = std::numeric_limits<double>::infinity();
    // Potentials u, v and column matches p (1-indexed, p[0] is the work slot).
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            int i0 = p[j0], j1 = -1;
            double delta = inf;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }

    Assignment a;
    a.mapping.assign(n, -1);
    for (int j = 1; j <= n; ++j) a.mapping[p[j] - 1] = j - 1;
    for (int i = 0; i < n; ++i) a.total_cost += cost(i, a.mapping[i]);
    return a;
}

GcdEvalReport acc_gcd(const std::vector<int>& preds, const std::vector<int>& labels,
                      const std::set<int>& old_set) {
    if (preds.empty() || preds.size() != labels.size())
        throw EmptyInputError("acc_gcd: empty or mismatched inputs");
    int k = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i] < 0 || labels[i] < 0) throw DegenerateInputError("acc_gcd: negative id");
        k = std::max(k, std::max(preds[i], labels[i]) + 1);
    }

    // Pad the confusion matrix to square; the optimal permutation over the
    // full id space is the Eq.-style maximum agreement.
    Matrix agree(k, k);
    for (std::size_t i = 0; i < preds.size(); ++i) agree(preds[i], labels[i]) += 1.0;
    Matrix cost(k, k);
    for (std::size_t i = 0; i < cost.data.size(); ++i) cost.data[i] = -agree.data[i];

    GcdEvalReport rep;
    rep.assignment = hungarian_assign(cost);
    rep.class_counts.assign(k, 0);
    rep.correct_counts.assign(k, 0);

    std::size_t hit_all = 0, hit_old = 0, hit_new = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        bool is_old = old_set.count(labels[i]) > 0;
        bool hit = rep.assignment.mapping[preds[i]] == labels[i];
        rep.class_counts[labels[i]]++;
        if (hit) {
            rep.correct_counts[labels[i]]++;
            ++hit_all;
        }
        if (is_old) {
            rep.n_old++;
            hit_old += hit;
        } else {
            rep.n_new++;
            hit_new += hit;
        }
    }
    rep.n_all = preds.size();
    rep.acc_all = static_cast<double>(hit_all) / static_cast<double>(rep.n_all);
    rep.acc_old = rep.n_old ? static_cast<double>(hit_old) / static_cast<double>(rep.n_old) : 0.0;
    rep.acc_new = rep.n_new ? static_cast<double>(hit_new) / static_cast<double>(rep.n_new) : 0.0;
    return rep;
}

KEstimate estimate_k(const Matrix& features, const std::vector<int>& labels,
                     const std::vector<std::size_t>& k_range, RngSeed seed) {
    if (k_range.empty()) throw EmptyInputError("estimate_k: empty k range");
    if (features.rows != labels.size())
        throw DimensionMismatchError("estimate_k: labels/features row mismatch");
    std::vector<std::size_t> labeled_rows;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] >= 0) labeled_rows.push_back(i);
    if (labeled_rows.empty()) throw EmptyInputError("estimate_k: no labeled rows");

    KEstimate est;
    est.table.resize(k_range.size());
    Rng base(seed);
    for (std::size_t t = 0; t < k_range.size(); ++t) {
        std::size_t k = k_range[t];
        Rng sub = base.substream(k);
        KmeansResult km = kmeans(features, k, RngSeed{sub.next_u64()});
        std::vector<int> preds_l, labels_l;
        preds_l.reserve(labeled_rows.size());
        labels_l.reserve(labeled_rows.size());
        for (std::size_t i : labeled_rows) {
            preds_l.push_back(km.assignments[i]);
            labels_l.push_back(labels[i]);
        }
        GcdEvalReport rep = acc_gcd(preds_l, labels_l, {});
        est.table[t] = {k, rep.acc_all};
    }
    est.k_star = est.table.front().first;
    double best = est.table.front().second;
    for (const auto& [k, acc] : est.table) {
        if (acc > best) {  // strict: ties keep the smaller k (range scanned ascending)
            best = acc;
            est.k_star = k;
        }
    }
    return est;
}

std::vector<SimilarityBin> similarity_bins(const Matrix& h_x, const Matrix& h_y,
                                           const std::vector<bool>& correct, std::size_t bins) {
    const std::size_t m = h_x.rows;
    if (m == 0 || h_y.rows != m || correct.size() != m)
        throw EmptyInputError("similarity_bins: empty or mismatched inputs");
    if (bins < 2 || m < bins) throw EmptyInputError("similarity_bins: need bins >= 2 and M >= bins");
    if (h_x.cols != h_y.cols) throw DimensionMismatchError("similarity_bins: dim mismatch");

    std::vector<double> sim(m);
    for (std::size_t i = 0; i < m; ++i) {
        double nx = norm2(h_x.row(i), h_x.cols);
        double ny = norm2(h_y.row(i), h_y.cols);
        sim[i] = dot(h_x.row(i), h_y.row(i), h_x.cols) / std::max(nx * ny, 1e-300);
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] < sim[b]; });

    std::vector<SimilarityBin> out(bins);
    const std::size_t base = m / bins;
    std::size_t pos = 0;
    for (std::size_t b = 0; b < bins; ++b) {
        std::size_t take = (b + 1 == bins) ? m - pos : base;
        double s = 0.0, acc = 0.0;
        for (std::size_t t = 0; t < take; ++t) {
            s += sim[order[pos + t]];
            acc += correct[order[pos + t]] ? 1.0 : 0.0;
        }
        out[b] = {b, s / static_cast<double>(take), acc / static_cast<double>(take)};
        pos += take;
    }
    return out;
}

BiasReport bias_report(const std::vector<int>& preds, const std::vector<int>& labels,
                       const std::set<int>& old_set) {
    GcdEvalReport rep = acc_gcd(preds, labels, old_set);
    const std::size_t k = rep.class_counts.size();

    BiasReport out;
    std::vector<std::size_t> pred_counts(k, 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        int mapped = rep.assignment.mapping[preds[i]];
        pred_counts[mapped]++;
        bool truth_old = old_set.count(labels[i]) > 0;
        bool pred_old = old_set.count(mapped) > 0;
        out.confusion[truth_old ? 0 : 1][pred_old ? 0 : 1]++;
    }
    out.histogram.resize(k);
    for (std::size_t c = 0; c < k; ++c)
        out.histogram[c] = {static_cast<int>(c), rep.class_counts[c], pred_counts[c]};
    std::stable_sort(out.histogram.begin(), out.histogram.end(),
                     [](const BiasReport::ClassRow& a, const BiasReport::ClassRow& b) {
                         return a.true_count > b.true_count;
                     });
    return out;
}

std::vector<int> predict_vote(const Matrix& logits_x, const Matrix& logits_y) {
    if (!logits_x.same_shape(logits_y)) throw DimensionMismatchError("predict_vote: shape mismatch");
    std::vector<int> out(logits_x.rows);
    for (std::size_t i = 0; i < logits_x.rows; ++i) {
        const double* a = logits_x.row(i);
        const double* b = logits_y.row(i);
        int arg = 0;
        double best = a[0] + b[0];
        for (std::size_t j = 1; j < logits_x.cols; ++j) {
            double v = a[j] + b[j];
            if (v > best) {  // strict: ties keep the smaller id
                best = v;
                arg = static_cast<int>(j);
            }
        }
        out[i] = arg;
    }
    return out;
}

}  // namespace mmgcd
