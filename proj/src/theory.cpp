#include "mmgcd/theory.hpp"

#include <cmath>

#include "mmgcd/eval.hpp"
#include "mmgcd/kernels.hpp"
#include "mmgcd/kmeans.hpp"
#include "mmgcd/sampling.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mmgcd {

void validate_model(const GaussianClassModel& m) {
    if (m.cov_x.dim() != m.mu_x.size() || m.cov_y.dim() != m.mu_y.size())
        throw DimensionMismatchError("GaussianClassModel: mean/cov dims disagree");
    if (!m.r.empty()) {
        if (m.r.size() != std::min(m.mu_x.size(), m.mu_y.size()))
            throw DimensionMismatchError("GaussianClassModel: r length mismatch");
        for (double v : m.r)
            if (!(v >= 0.0 && v <= 0.999))
                throw InvalidSpecError("GaussianClassModel: correlation outside [0, 0.999]");
    }
}

GaussianClassModel random_class_model(std::size_t dim, double r_low, double r_high,
                                      double condition_cap, RngSeed seed) {
    Rng rng(seed);
    GaussianClassModel m;
    m.cov_x = random_spd(dim, condition_cap, RngSeed{rng.next_u64()});
    m.cov_y = random_spd(dim, condition_cap, RngSeed{rng.next_u64()});
    m.mu_x.resize(dim);
    m.mu_y.resize(dim);
    for (double& v : m.mu_x) v = rng.normal();
    for (double& v : m.mu_y) v = rng.normal();
    m.r.resize(dim);
    for (double& v : m.r) v = rng.uniform(r_low, r_high);
    validate_model(m);
    return m;
}

FusedGaussian build_fused(const GaussianClassModel& model) {
    validate_model(model);
    const std::size_t d = model.mu_x.size();
    if (model.mu_y.size() != d)
        throw DimensionMismatchError("build_fused: modalities must share a dimension");

    Matrix rx = sqrt_spd(model.cov_x).mat();
    Matrix ry = sqrt_spd(model.cov_y).mat();
    // S_xy = sqrt(S_x) diag(r) sqrt(S_y)
    Matrix scaled = rx;
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) scaled(i, j) *= model.r.empty() ? 0.0 : model.r[j];
    Matrix sxy = kernels::matmul_nn(scaled, ry);

    FusedGaussian f;
    f.mu_f.resize(2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        f.mu_f[i] = model.mu_x[i];
        f.mu_f[d + i] = model.mu_y[i];
    }
    Matrix cov(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            cov(i, j) = model.cov_x(i, j);
            cov(d + i, d + j) = model.cov_y(i, j);
            cov(i, d + j) = sxy(i, j);
            cov(d + j, i) = sxy(i, j);
        }
    f.cov_f = SpdMatrix(std::move(cov));
    return f;
}

CompactnessReport compactness(const std::vector<GaussianClassModel>& models) {
    CompactnessReport rep;
    for (const GaussianClassModel& m : models) {
        FusedGaussian f = build_fused(m);
        CompactnessReport::PerClass pc;
        pc.class_id = m.class_id;
        pc.det_x = std::exp(logdet_spd(m.cov_x));
        pc.det_y = std::exp(logdet_spd(m.cov_y));
        pc.det_f = std::exp(logdet_spd(f.cov_f));
        rep.l_x += pc.det_x;
        rep.l_y += pc.det_y;
        rep.l_f += pc.det_f;
        rep.per_class.push_back(pc);
    }
    return rep;
}

AlignmentCheck alignment_identity_check(const GaussianClassModel& model) {
    validate_model(model);
    FusedGaussian fused = build_fused(model);
    const std::size_t d = model.mu_x.size();

    double ld_x = logdet_spd(model.cov_x);
    double ld_y = logdet_spd(model.cov_y);
    double ld_direct = logdet_spd(fused.cov_f);

    // Product form: log|I - R^2| + log|S_x| + log|S_y|.
    double ld_product = ld_x + ld_y;
    for (std::size_t i = 0; i < d; ++i) {
        double r = model.r.empty() ? 0.0 : model.r[i];
        ld_product += std::log1p(-r * r);
    }

    // Schur form: |S_x| * |S_y - S_xy^T S_x^{-1} S_xy|.
    Matrix sxy(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) sxy(i, j) = fused.cov_f(i, d + j);
    CholeskyResult chx = cholesky(model.cov_x);
    Matrix sxinv_sxy = cholesky_solve(chx.l, sxy);
    Matrix quad = kernels::matmul_tn(sxy, sxinv_sxy);  // S_xy^T S_x^{-1} S_xy
    Matrix schur_m(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            schur_m(i, j) = model.cov_y(i, j) - 0.5 * (quad(i, j) + quad(j, i));
    double ld_schur = ld_x + logdet_spd(SpdMatrix(std::move(schur_m)));

    AlignmentCheck out;
    out.direct = std::exp(ld_direct);
    out.product = std::exp(ld_product);
    out.schur = std::exp(ld_schur);
    // |a - b| / a computed in log space keeps dim-6 products stable.
    out.rel_err = std::abs(std::expm1(ld_product - ld_direct));
    out.schur_rel_err = std::max(std::abs(std::expm1(ld_schur - ld_direct)),
                                 std::abs(std::expm1(ld_schur - ld_product)));
    return out;
}

std::vector<SweepRow> correlation_sweep(const GaussianClassModel& base, std::size_t k_classes,
                                        const Vec& r_grid, std::size_t n_per_class,
                                        RngSeed seed) {
    validate_model(base);
    const std::size_t d = base.mu_x.size();
    if (base.mu_y.size() != d)
        throw DimensionMismatchError("correlation_sweep: modalities must share a dimension");
    for (double r : r_grid)
        if (!(r >= 0.0 && r <= 0.999))
            throw InvalidSpecError("correlation_sweep: grid value outside [0, 0.999]");
    if (k_classes < 1 || n_per_class < 2 * d + 2)
        throw InvalidSpecError("correlation_sweep: need k >= 1 and n_per_class > 2d+1");

    // The template's mean norms set the class-separation radius.
    const double radius_x = norm2(base.mu_x.data(), d);
    const double radius_y = norm2(base.mu_y.data(), d);

    std::vector<SweepRow> rows(r_grid.size());
    Rng root(seed);
    const std::ptrdiff_t g = static_cast<std::ptrdiff_t>(r_grid.size());
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t gi = 0; gi < g; ++gi) {
        Rng rng = root.substream(static_cast<std::uint64_t>(gi));
        const double r = r_grid[gi];

        GaussianClassModel cls = base;
        cls.r.assign(d, r);
        FusedGaussian fused = build_fused(cls);
        CholeskyResult chol_f = cholesky(fused.cov_f);
        const double det_f = std::exp(logdet_spd(fused.cov_f));

        Matrix all(k_classes * n_per_class, 2 * d);
        std::vector<int> truth(k_classes * n_per_class);
        double l_f_emp = 0.0;
        for (std::size_t k = 0; k < k_classes; ++k) {
            Vec mu(2 * d);
            for (std::size_t half = 0; half < 2; ++half) {
                double radius = half == 0 ? radius_x : radius_y;
                double nrm = 0.0;
                Vec dir(d);
                for (std::size_t j = 0; j < d; ++j) {
                    dir[j] = rng.normal();
                    nrm += dir[j] * dir[j];
                }
                nrm = std::max(std::sqrt(nrm), 1e-12);
                for (std::size_t j = 0; j < d; ++j) mu[half * d + j] = radius * dir[j] / nrm;
            }
            Matrix pts = sample_mvn(mu, chol_f.l, n_per_class, rng);
            for (std::size_t i = 0; i < n_per_class; ++i) {
                std::copy(pts.row(i), pts.row(i) + 2 * d, all.row(k * n_per_class + i));
                truth[k * n_per_class + i] = static_cast<int>(k);
            }
            l_f_emp += std::exp(logdet_spd(SpdMatrix(empirical_cov(pts))));
        }

        KmeansResult km = kmeans(all, k_classes, RngSeed{rng.next_u64()});
        GcdEvalReport rep = acc_gcd(km.assignments, truth, {});
        rows[gi] = {r, static_cast<double>(k_classes) * det_f, l_f_emp, rep.acc_all};
    }
    return rows;
}

}  // namespace mmgcd
