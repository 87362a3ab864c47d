#include "mmgcd/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmgcd/sampling.hpp"

namespace mmgcd {

Matrix MultimodalDataset::features_x() const {
    Matrix m(samples.size(), d_x);
    for (std::size_t i = 0; i < samples.size(); ++i)
        std::copy(samples[i].x.begin(), samples[i].x.end(), m.row(i));
    return m;
}

Matrix MultimodalDataset::features_y() const {
    Matrix m(samples.size(), d_y);
    for (std::size_t i = 0; i < samples.size(); ++i)
        std::copy(samples[i].y.begin(), samples[i].y.end(), m.row(i));
    return m;
}

std::vector<int> MultimodalDataset::truths() const {
    std::vector<int> t(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) t[i] = samples[i].truth;
    return t;
}

std::vector<std::size_t> MultimodalDataset::unlabeled_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < samples.size(); ++i)
        if (!samples[i].is_labeled) idx.push_back(i);
    return idx;
}

std::pair<MultimodalDataset, std::vector<GaussianClassModel>> generate(const DatasetSpec& spec) {
    if (spec.k_total < 1 || spec.k_old > spec.k_total)
        throw InvalidSpecError("generate: need 1 <= k_old <= k_total");
    if (spec.d < 1 || spec.n_per_class < 1)
        throw InvalidSpecError("generate: d and n_per_class must be positive");
    if (!(spec.labeled_fraction > 0.0 && spec.labeled_fraction <= 1.0))
        throw InvalidSpecError("generate: labeled_fraction must be in (0, 1]");
    if (!(spec.mean_separation >= 0.0)) throw InvalidSpecError("generate: negative separation");
    if (!(spec.r_low >= 0.0 && spec.r_high <= 0.999 && spec.r_low <= spec.r_high))
        throw InvalidSpecError("generate: r_range must satisfy 0 <= low <= high <= 0.999");

    Rng rng(spec.seed);
    const std::size_t d = spec.d;

    MultimodalDataset ds;
    ds.num_old = spec.k_old;
    ds.num_new = spec.k_total - spec.k_old;
    ds.d_x = d;
    ds.d_y = d;
    ds.samples.reserve(spec.k_total * spec.n_per_class);

    std::vector<GaussianClassModel> models;
    models.reserve(spec.k_total);
    for (std::size_t k = 0; k < spec.k_total; ++k) {
        GaussianClassModel m;
        m.class_id = static_cast<int>(k);

        // Diagonal covariances with mildly random variances keep the
        // coordinate-wise cross correlation exactly r.
        Vec var_x(d), var_y(d);
        double std_x = 0.0, std_y = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            var_x[j] = rng.uniform(0.8, 1.25);
            var_y[j] = rng.uniform(0.8, 1.25);
            std_x += std::sqrt(var_x[j]);
            std_y += std::sqrt(var_y[j]);
        }
        std_x /= static_cast<double>(d);
        std_y /= static_cast<double>(d);
        m.cov_x = SpdMatrix::diag(var_x);
        m.cov_y = SpdMatrix::diag(var_y);

        // Means on spheres of radius separation * sqrt(d) * average std,
        // independent directions per modality.
        m.mu_x.resize(d);
        m.mu_y.resize(d);
        for (int half = 0; half < 2; ++half) {
            Vec& mu = half == 0 ? m.mu_x : m.mu_y;
            double radius = spec.mean_separation * std::sqrt(double(d)) * (half == 0 ? std_x : std_y);
            double nrm = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                mu[j] = rng.normal();
                nrm += mu[j] * mu[j];
            }
            nrm = std::max(std::sqrt(nrm), 1e-12);
            for (std::size_t j = 0; j < d; ++j) mu[j] = radius * mu[j] / nrm;
        }

        m.r.assign(d, rng.uniform(spec.r_low, spec.r_high));
        validate_model(m);

        FusedGaussian fused = build_fused(m);
        CholeskyResult ch = cholesky(fused.cov_f);
        Matrix pts = sample_mvn(fused.mu_f, ch.l, spec.n_per_class, rng);
        for (std::size_t i = 0; i < spec.n_per_class; ++i) {
            PairedSample s;
            s.x.assign(pts.row(i), pts.row(i) + d);
            s.y.assign(pts.row(i) + d, pts.row(i) + 2 * d);
            s.truth = static_cast<int>(k);
            ds.samples.push_back(std::move(s));
        }
        models.push_back(std::move(m));
    }

    Rng split_rng = rng.substream(0x5B1D);
    ds = split_gcd(ds, spec.labeled_fraction, RngSeed{split_rng.next_u64()});
    return {std::move(ds), std::move(models)};
}

MultimodalDataset split_gcd(const MultimodalDataset& ds, double labeled_fraction, RngSeed seed) {
    if (!(labeled_fraction > 0.0 && labeled_fraction <= 1.0))
        throw InvalidSpecError("split_gcd: labeled_fraction must be in (0, 1]");
    MultimodalDataset out = ds;
    for (PairedSample& s : out.samples) s.is_labeled = false;

    Rng rng(seed);
    for (std::size_t c = 0; c < ds.num_old; ++c) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < out.samples.size(); ++i)
            if (out.samples[i].truth == static_cast<int>(c)) idx.push_back(i);
        // Fisher-Yates from a per-class substream, then take the head.
        Rng sub = rng.substream(c);
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[sub.below(i)]);
        std::size_t take = static_cast<std::size_t>(
            std::llround(labeled_fraction * static_cast<double>(idx.size())));
        take = std::min(take, idx.size());
        for (std::size_t i = 0; i < take; ++i) out.samples[idx[i]].is_labeled = true;
    }
    return out;
}

namespace {

std::vector<Vec> read_csv_rows(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::vector<Vec> rows;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() && in.peek() == EOF) break;
        Vec row;
        const char* p = line.data();
        const char* end = line.data() + line.size();
        while (p < end && *p == ' ') ++p;
        while (true) {
            double v;
            auto [next, ec] = std::from_chars(p, end, v);
            if (ec != std::errc())
                throw FormatError(path + ":" + std::to_string(lineno) + ": non-numeric cell");
            row.push_back(v);
            p = next;
            if (p == end) break;
            if (*p != ',')
                throw FormatError(path + ":" + std::to_string(lineno) + ": expected comma");
            ++p;
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw FormatError(path + ":" + std::to_string(lineno) + ": ragged row");
        rows.push_back(std::move(row));
    }
    return rows;
}

long parse_int(const std::string& s, const std::string& ctx) {
    long v;
    auto [next, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || next != s.data() + s.size())
        throw FormatError(ctx + ": non-integer value '" + s + "'");
    return v;
}

}  // namespace

MultimodalDataset load_features(const std::string& x_path, const std::string& y_path,
                                const std::string& labels_path) {
    std::vector<Vec> xs = read_csv_rows(x_path);
    std::vector<Vec> ys = read_csv_rows(y_path);
    if (xs.size() != ys.size()) throw FormatError("load_features: feature row counts differ");
    if (xs.empty()) throw FormatError("load_features: empty feature files");

    std::ifstream in(labels_path);
    if (!in) throw IoError("cannot open " + labels_path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(labels_path + ": missing header");
    if (line == "index,label,is_labeled\r") line.pop_back();
    if (line != "index,label,is_labeled")
        throw FormatError(labels_path + ": unknown header '" + line + "'");

    MultimodalDataset ds;
    ds.d_x = xs.front().size();
    ds.d_y = ys.front().size();
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty() && in.peek() == EOF) break;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::stringstream ss(line);
        std::string f0, f1, f2;
        if (!std::getline(ss, f0, ',') || !std::getline(ss, f1, ',') || !std::getline(ss, f2))
            throw FormatError(labels_path + ": malformed row " + std::to_string(row));
        if (parse_int(f0, labels_path) != static_cast<long>(row))
            throw FormatError(labels_path + ": index column must run 0..n-1");
        long label = parse_int(f1, labels_path);
        long flag = parse_int(f2, labels_path);
        if (label < -1) throw FormatError(labels_path + ": label must be >= -1");
        if (flag != 0 && flag != 1) throw FormatError(labels_path + ": is_labeled must be 0 or 1");
        if (flag == 1 && label < 0) throw FormatError(labels_path + ": labeled row without label");
        if (row >= xs.size()) throw FormatError("load_features: more labels than feature rows");

        PairedSample s;
        s.x = std::move(xs[row]);
        s.y = std::move(ys[row]);
        s.truth = static_cast<int>(label);
        s.is_labeled = flag == 1;
        ds.samples.push_back(std::move(s));
        ++row;
    }
    if (row != xs.size()) throw FormatError("load_features: label/feature row counts differ");

    int max_labeled = -1, max_truth = -1;
    for (const PairedSample& s : ds.samples) {
        max_truth = std::max(max_truth, s.truth);
        if (s.is_labeled) max_labeled = std::max(max_labeled, s.truth);
    }
    ds.num_old = static_cast<std::size_t>(max_labeled + 1);
    ds.num_new = static_cast<std::size_t>(std::max(0, max_truth - max_labeled));
    return ds;
}

void save_features(const MultimodalDataset& ds, const std::string& x_path,
                   const std::string& y_path, const std::string& labels_path) {
    auto write_feats = [&](const std::string& path, bool second) {
        std::ofstream out(path);
        if (!out) throw IoError("cannot open " + path + " for writing");
        char buf[32];
        for (const PairedSample& s : ds.samples) {
            const Vec& v = second ? s.y : s.x;
            for (std::size_t j = 0; j < v.size(); ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", v[j]);
                out << (j ? "," : "") << buf;
            }
            out << "\n";
        }
        if (!out) throw IoError("write failed: " + path);
    };
    write_feats(x_path, false);
    write_feats(y_path, true);

    std::ofstream out(labels_path);
    if (!out) throw IoError("cannot open " + labels_path + " for writing");
    out << "index,label,is_labeled\n";
    for (std::size_t i = 0; i < ds.samples.size(); ++i)
        out << i << "," << ds.samples[i].truth << "," << (ds.samples[i].is_labeled ? 1 : 0)
            << "\n";
    if (!out) throw IoError("write failed: " + labels_path);
}

Vec augment(const Vec& v, double noise_sigma, double drop_rate, Rng& rng) {
    if (noise_sigma < 0.0) throw InvalidSpecError("augment: negative noise_sigma");
    if (!(drop_rate >= 0.0 && drop_rate < 1.0))
        throw InvalidSpecError("augment: drop_rate must be in [0, 1)");
    Vec out(v.size());
    const double keep_scale = 1.0 / (1.0 - drop_rate);
    for (std::size_t i = 0; i < v.size(); ++i) {
        double t = v[i];
        if (noise_sigma > 0.0) t += noise_sigma * rng.normal();
        if (drop_rate > 0.0) t = rng.uniform() < drop_rate ? 0.0 : t * keep_scale;
        out[i] = t;
    }
    return out;
}

Vec augment(const Vec& v, double noise_sigma, double drop_rate, RngSeed seed) {
    Rng rng(seed);
    return augment(v, noise_sigma, drop_rate, rng);
}

}  // namespace mmgcd
