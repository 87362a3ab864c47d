#include "mmgcd/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mmgcd/kernels.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace mmgcd {

std::vector<Matrix*> EncoderStack::params() {
    std::vector<Matrix*> out;
    for (Affine& a : enc_x) {
        out.push_back(&a.w);
        out.push_back(&a.b);
    }
    for (Affine& a : enc_y) {
        out.push_back(&a.w);
        out.push_back(&a.b);
    }
    out.push_back(&proj.w);
    out.push_back(&proj.b);
    out.push_back(&fusion.w);
    out.push_back(&fusion.b);
    out.push_back(&proto_x);
    out.push_back(&proto_y);
    out.push_back(&proto_f);
    return out;
}

std::vector<const Matrix*> EncoderStack::params() const {
    auto mut = const_cast<EncoderStack*>(this)->params();
    return std::vector<const Matrix*>(mut.begin(), mut.end());
}

std::vector<std::string> EncoderStack::param_names() const {
    std::vector<std::string> out;
    for (std::size_t l = 0; l < enc_x.size(); ++l) {
        out.push_back("enc_x." + std::to_string(l) + ".w");
        out.push_back("enc_x." + std::to_string(l) + ".b");
    }
    for (std::size_t l = 0; l < enc_y.size(); ++l) {
        out.push_back("enc_y." + std::to_string(l) + ".w");
        out.push_back("enc_y." + std::to_string(l) + ".b");
    }
    out.insert(out.end(), {"proj.w", "proj.b", "fusion.w", "fusion.b", "proto_x", "proto_y",
                           "proto_f"});
    return out;
}

namespace {

void check_config(const ModelConfig& cfg) {
    if (cfg.d_x < 1 || cfg.d_y < 1 || cfg.d_h < 1 || cfg.d_z < 1 || cfg.num_classes < 1)
        throw InvalidConfigError("init_model: all sizes must be positive");
    for (std::size_t h : cfg.hidden)
        if (h < 1) throw InvalidConfigError("init_model: hidden widths must be positive");
    const double temps[] = {cfg.temps.u, cfg.temps.s, cfg.temps.c, cfg.temps.p, cfg.temps.q};
    for (double t : temps)
        if (!(t > 0.0)) throw InvalidConfigError("init_model: temperatures must be positive");
}

Affine init_affine(std::size_t in, std::size_t out, Rng& rng) {
    Affine a;
    a.w = Matrix(out, in);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : a.w.data) v = scale * rng.normal();
    a.b = Matrix(1, out);
    return a;
}

std::vector<Affine> init_encoder(std::size_t d_in, const std::vector<std::size_t>& hidden,
                                 std::size_t d_out, Rng& rng) {
    std::vector<Affine> layers;
    std::size_t prev = d_in;
    for (std::size_t h : hidden) {
        layers.push_back(init_affine(prev, h, rng));
        prev = h;
    }
    layers.push_back(init_affine(prev, d_out, rng));
    return layers;
}

Matrix init_prototypes(std::size_t k, std::size_t d, Rng& rng) {
    Matrix p(k, d);
    for (std::size_t i = 0; i < k; ++i) {
        double nrm = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            p(i, j) = rng.normal();
            nrm += p(i, j) * p(i, j);
        }
        nrm = std::max(std::sqrt(nrm), 1e-12);
        for (std::size_t j = 0; j < d; ++j) p(i, j) /= nrm;
    }
    return p;
}

}  // namespace

EncoderStack init_model(const ModelConfig& cfg, RngSeed seed) {
    check_config(cfg);
    Rng rng(seed);
    EncoderStack m;
    m.cfg = cfg;
    m.enc_x = init_encoder(cfg.d_x, cfg.hidden, cfg.d_h, rng);
    m.enc_y = init_encoder(cfg.d_y, cfg.hidden, cfg.d_h, rng);
    m.proj = init_affine(cfg.d_h, cfg.d_z, rng);
    m.fusion = init_affine(2 * cfg.d_h, cfg.d_h, rng);
    m.proto_x = init_prototypes(cfg.num_classes, cfg.d_h, rng);
    m.proto_y = init_prototypes(cfg.num_classes, cfg.d_h, rng);
    m.proto_f = init_prototypes(cfg.num_classes, cfg.d_h, rng);
    return m;
}

Matrix affine_apply(const Affine& a, const Matrix& input) {
    if (input.cols != a.w.cols) throw DimensionMismatchError("affine_apply: input dim mismatch");
    Matrix out = kernels::matmul_nt(input, a.w);
    for (std::size_t i = 0; i < out.rows; ++i) {
        double* row = out.row(i);
        for (std::size_t j = 0; j < out.cols; ++j) row[j] += a.b(0, j);
    }
    return out;
}

Matrix encode(const std::vector<Affine>& layers, const Matrix& input) {
    Matrix a = input;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        a = affine_apply(layers[l], a);
        if (l + 1 < layers.size())
            for (double& v : a.data) v = std::tanh(v);
    }
    return a;
}

namespace {
void normalize_rows(Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row(i);
        double nrm = std::max(norm2(row, m.cols), 1e-12);
        for (std::size_t j = 0; j < m.cols; ++j) row[j] /= nrm;
    }
}
}  // namespace

Matrix project_z(const EncoderStack& model, const Matrix& h) {
    Matrix z = affine_apply(model.proj, h);
    normalize_rows(z);
    return z;
}

Matrix classify_rows(const Matrix& h, const Matrix& prototypes, double temp) {
    if (!(temp > 0.0)) throw InvalidConfigError("classify: temperature must be positive");
    Matrix logits = kernels::matmul_nt(h, prototypes);
    Matrix p;
    kernels::softmax_rows(logits, temp, p);
    return p;
}

Vec classify(const Vec& h, const Matrix& prototypes, double temp) {
    Matrix hm(1, h.size());
    std::copy(h.begin(), h.end(), hm.row(0));
    Matrix p = classify_rows(hm, prototypes, temp);
    return Vec(p.row(0), p.row(0) + p.cols);
}

Matrix fuse_rows(const EncoderStack& model, const Matrix& h_x, const Matrix& h_y) {
    if (h_x.rows != h_y.rows || h_x.cols + h_y.cols != model.fusion.w.cols)
        throw DimensionMismatchError("fuse: feature dims do not match the fusion head");
    Matrix cat(h_x.rows, h_x.cols + h_y.cols);
    for (std::size_t i = 0; i < h_x.rows; ++i) {
        std::memcpy(cat.row(i), h_x.row(i), h_x.cols * sizeof(double));
        std::memcpy(cat.row(i) + h_x.cols, h_y.row(i), h_y.cols * sizeof(double));
    }
    return affine_apply(model.fusion, cat);
}

Vec fuse(const EncoderStack& model, const Vec& h_x, const Vec& h_y) {
    Matrix hx(1, h_x.size()), hy(1, h_y.size());
    std::copy(h_x.begin(), h_x.end(), hx.row(0));
    std::copy(h_y.begin(), h_y.end(), hy.row(0));
    Matrix f = fuse_rows(model, hx, hy);
    return Vec(f.row(0), f.row(0) + f.cols);
}

namespace {
ModalityForward modality_forward(const EncoderStack& model, const std::vector<Affine>& enc,
                                 const Matrix& proto, const Matrix& v1, const Matrix& v2) {
    ModalityForward f;
    f.h1 = encode(enc, v1);
    f.h2 = encode(enc, v2);
    f.z1 = project_z(model, f.h1);
    f.z2 = project_z(model, f.h2);
    f.p1 = classify_rows(f.h1, proto, model.cfg.temps.p);
    f.p2 = classify_rows(f.h2, proto, model.cfg.temps.p);
    f.q1 = classify_rows(f.h1, proto, model.cfg.temps.q);
    f.q2 = classify_rows(f.h2, proto, model.cfg.temps.q);
    return f;
}
}  // namespace

BatchForward forward(const EncoderStack& model, const Matrix& x1, const Matrix& x2,
                     const Matrix& y1, const Matrix& y2) {
    if (x1.cols != model.cfg.d_x || x2.cols != model.cfg.d_x || y1.cols != model.cfg.d_y ||
        y2.cols != model.cfg.d_y)
        throw DimensionMismatchError("forward: feature dims do not match the model config");
    if (x1.rows != x2.rows || x1.rows != y1.rows || y1.rows != y2.rows)
        throw DimensionMismatchError("forward: view batch sizes differ");

    BatchForward bf;
    bf.x = modality_forward(model, model.enc_x, model.proto_x, x1, x2);
    bf.y = modality_forward(model, model.enc_y, model.proto_y, y1, y2);

    bf.fused.h1 = fuse_rows(model, bf.x.h1, bf.y.h1);
    bf.fused.h2 = fuse_rows(model, bf.x.h2, bf.y.h2);
    bf.fused.z1 = project_z(model, bf.fused.h1);
    bf.fused.z2 = project_z(model, bf.fused.h2);
    bf.fused.p1 = classify_rows(bf.fused.h1, model.proto_f, model.cfg.temps.p);
    bf.fused.p2 = classify_rows(bf.fused.h2, model.proto_f, model.cfg.temps.p);
    bf.fused.q1 = classify_rows(bf.fused.h1, model.proto_f, model.cfg.temps.q);
    bf.fused.q2 = classify_rows(bf.fused.h2, model.proto_f, model.cfg.temps.q);
    return bf;
}

void renormalize_prototypes(EncoderStack& model) {
    normalize_rows(model.proto_x);
    normalize_rows(model.proto_y);
    normalize_rows(model.proto_f);
}

Predictions predict_all(const EncoderStack& model, const MultimodalDataset& ds) {
    Predictions pr;
    pr.h_x = encode(model.enc_x, ds.features_x());
    pr.h_y = encode(model.enc_y, ds.features_y());
    pr.h_f = fuse_rows(model, pr.h_x, pr.h_y);

    auto head = [&](const Matrix& h, const Matrix& proto, Matrix& logits, std::vector<int>& pred) {
        logits = kernels::matmul_nt(h, proto);
        for (double& v : logits.data) v /= model.cfg.temps.p;
        pred.resize(h.rows);
        for (std::size_t i = 0; i < h.rows; ++i) {
            const double* row = logits.row(i);
            int arg = 0;
            for (std::size_t j = 1; j < logits.cols; ++j)
                if (row[j] > row[arg]) arg = static_cast<int>(j);
            pred[i] = arg;
        }
    };
    head(pr.h_x, model.proto_x, pr.logits_x, pr.pred_x);
    head(pr.h_y, model.proto_y, pr.logits_y, pr.pred_y);
    head(pr.h_f, model.proto_f, pr.logits_f, pr.pred_f);
    return pr;
}

// --- checkpoint IO ---------------------------------------------------------

namespace {
constexpr char kMagic[6] = {'M', 'M', 'G', 'C', 'D', '1'};

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), 4);
}
void write_f32(std::ofstream& out, float v) { out.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::ifstream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw FormatError("checkpoint: truncated header");
    return v;
}
float read_f32(std::ifstream& in) {
    float v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (!in) throw FormatError("checkpoint: truncated payload");
    return v;
}
}  // namespace

void save_checkpoint(const EncoderStack& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out.write(kMagic, sizeof(kMagic));
    const ModelConfig& c = model.cfg;
    write_u32(out, static_cast<std::uint32_t>(c.d_x));
    write_u32(out, static_cast<std::uint32_t>(c.d_y));
    write_u32(out, static_cast<std::uint32_t>(c.hidden.size()));
    for (std::size_t h : c.hidden) write_u32(out, static_cast<std::uint32_t>(h));
    write_u32(out, static_cast<std::uint32_t>(c.d_h));
    write_u32(out, static_cast<std::uint32_t>(c.d_z));
    write_u32(out, static_cast<std::uint32_t>(c.num_classes));
    write_f32(out, static_cast<float>(c.temps.u));
    write_f32(out, static_cast<float>(c.temps.s));
    write_f32(out, static_cast<float>(c.temps.c));
    write_f32(out, static_cast<float>(c.temps.p));
    write_f32(out, static_cast<float>(c.temps.q));
    for (const Matrix* m : model.params())
        for (double v : m->data) write_f32(out, static_cast<float>(v));
    if (!out) throw IoError("write failed: " + path);
}

EncoderStack load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    char magic[6];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
        throw FormatError("checkpoint: bad magic");

    ModelConfig c;
    c.d_x = read_u32(in);
    c.d_y = read_u32(in);
    c.hidden.resize(read_u32(in));
    for (std::size_t& h : c.hidden) h = read_u32(in);
    c.d_h = read_u32(in);
    c.d_z = read_u32(in);
    c.num_classes = read_u32(in);
    c.temps.u = read_f32(in);
    c.temps.s = read_f32(in);
    c.temps.c = read_f32(in);
    c.temps.p = read_f32(in);
    c.temps.q = read_f32(in);

    EncoderStack model = init_model(c, RngSeed{0});
    for (Matrix* m : model.params())
        for (double& v : m->data) v = read_f32(in);
    char extra;
    if (in.read(&extra, 1)) throw FormatError("checkpoint: trailing bytes");
    return model;
}

}  // namespace mmgcd
