#include "mmgcd/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mmgcd/eval.hpp"
#include "mmgcd/trainer.hpp"

namespace mmgcd::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Options {
    // data
    std::size_t k_total = 10, k_old = 5, d = 32, n_per_class = 200;
    double mean_separation = 1.0, r_low = 0.5, r_high = 0.5, labeled_fraction = 0.5;
    std::uint64_t data_seed = 1;
    // model
    std::vector<std::size_t> hidden = {64};
    std::size_t d_h = 32, d_z = 16;
    double tau_u = 0.07, tau_s = 0.07, tau_c = 0.07, tau_p = 0.1, tau_q = 0.05;
    std::uint64_t model_seed = 2;
    // training
    std::size_t epochs = 100, batch_size = 128, map_refresh = 1;
    double lr0 = 0.1, lambda_u = 0.35, lambda_s = 0.35, epsilon = 1.0;
    double noise_sigma = 0.1, drop_rate = 0.1;
    bool map_per_batch = false;
    // io
    std::string out_dir = "out";
    std::string features_x, features_y, labels_path, checkpoint;
    // eval / estimate-k / theory / sweep
    std::size_t bins = 10, k_min = 2, k_max = 15;
    std::string modality = "fusion";
    std::size_t models = 200, max_dim = 6;
    std::uint64_t seed = 7;
    std::size_t classes = 4;
    std::vector<double> r_grid = {0.0, 0.3, 0.6, 0.9};
    double mean_norm = 4.0;
    std::string out_file;
};

const std::set<std::string>& allowed_keys() {
    static const std::set<std::string> keys = {
        "k_total",     "k_old",       "d",           "n_per_class",  "mean_separation",
        "r_low",       "r_high",      "labeled_fraction",            "data_seed",
        "hidden",      "d_h",         "d_z",         "tau_u",        "tau_s",
        "tau_c",       "tau_p",       "tau_q",       "model_seed",   "epochs",
        "batch_size",  "map_refresh", "lr0",         "lambda_u",     "lambda_s",
        "epsilon",     "noise_sigma", "drop_rate",   "map_per_batch","out_dir",
        "features_x",  "features_y",  "labels",      "checkpoint",   "bins",
        "k_min",       "k_max",       "modality",    "models",       "max_dim",
        "seed",        "classes",     "r_grid",      "mean_norm",    "out_file"};
    return keys;
}

void apply_config_file(const std::string& path, Options& o) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    json cfg;
    try {
        in >> cfg;
    } catch (const json::exception& e) {
        throw InvalidConfigError(std::string("config parse error: ") + e.what());
    }
    if (!cfg.is_object()) throw InvalidConfigError("config root must be an object");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
        const std::string& key = it.key();
        if (!allowed_keys().count(key)) throw InvalidConfigError("unknown config key: " + key);
        try {
            if (key == "k_total") o.k_total = it->get<std::size_t>();
            else if (key == "k_old") o.k_old = it->get<std::size_t>();
            else if (key == "d") o.d = it->get<std::size_t>();
            else if (key == "n_per_class") o.n_per_class = it->get<std::size_t>();
            else if (key == "mean_separation") o.mean_separation = it->get<double>();
            else if (key == "r_low") o.r_low = it->get<double>();
            else if (key == "r_high") o.r_high = it->get<double>();
            else if (key == "labeled_fraction") o.labeled_fraction = it->get<double>();
            else if (key == "data_seed") o.data_seed = it->get<std::uint64_t>();
            else if (key == "hidden") o.hidden = it->get<std::vector<std::size_t>>();
            else if (key == "d_h") o.d_h = it->get<std::size_t>();
            else if (key == "d_z") o.d_z = it->get<std::size_t>();
            else if (key == "tau_u") o.tau_u = it->get<double>();
            else if (key == "tau_s") o.tau_s = it->get<double>();
            else if (key == "tau_c") o.tau_c = it->get<double>();
            else if (key == "tau_p") o.tau_p = it->get<double>();
            else if (key == "tau_q") o.tau_q = it->get<double>();
            else if (key == "model_seed") o.model_seed = it->get<std::uint64_t>();
            else if (key == "epochs") o.epochs = it->get<std::size_t>();
            else if (key == "batch_size") o.batch_size = it->get<std::size_t>();
            else if (key == "map_refresh") o.map_refresh = it->get<std::size_t>();
            else if (key == "lr0") o.lr0 = it->get<double>();
            else if (key == "lambda_u") o.lambda_u = it->get<double>();
            else if (key == "lambda_s") o.lambda_s = it->get<double>();
            else if (key == "epsilon") o.epsilon = it->get<double>();
            else if (key == "noise_sigma") o.noise_sigma = it->get<double>();
            else if (key == "drop_rate") o.drop_rate = it->get<double>();
            else if (key == "map_per_batch") o.map_per_batch = it->get<bool>();
            else if (key == "out_dir") o.out_dir = it->get<std::string>();
            else if (key == "features_x") o.features_x = it->get<std::string>();
            else if (key == "features_y") o.features_y = it->get<std::string>();
            else if (key == "labels") o.labels_path = it->get<std::string>();
            else if (key == "checkpoint") o.checkpoint = it->get<std::string>();
            else if (key == "bins") o.bins = it->get<std::size_t>();
            else if (key == "k_min") o.k_min = it->get<std::size_t>();
            else if (key == "k_max") o.k_max = it->get<std::size_t>();
            else if (key == "modality") o.modality = it->get<std::string>();
            else if (key == "models") o.models = it->get<std::size_t>();
            else if (key == "max_dim") o.max_dim = it->get<std::size_t>();
            else if (key == "seed") o.seed = it->get<std::uint64_t>();
            else if (key == "classes") o.classes = it->get<std::size_t>();
            else if (key == "r_grid") o.r_grid = it->get<std::vector<double>>();
            else if (key == "mean_norm") o.mean_norm = it->get<double>();
            else if (key == "out_file") o.out_file = it->get<std::string>();
        } catch (const json::exception&) {
            throw InvalidConfigError("config key '" + key + "' has the wrong type");
        }
    }
}

DatasetSpec dataset_spec(const Options& o) {
    DatasetSpec spec;
    spec.k_total = o.k_total;
    spec.k_old = o.k_old;
    spec.d = o.d;
    spec.n_per_class = o.n_per_class;
    spec.mean_separation = o.mean_separation;
    spec.r_low = o.r_low;
    spec.r_high = o.r_high;
    spec.labeled_fraction = o.labeled_fraction;
    spec.seed = RngSeed{o.data_seed};
    return spec;
}

ModelConfig model_config(const Options& o, std::size_t d_x, std::size_t d_y, std::size_t k) {
    ModelConfig cfg;
    cfg.d_x = d_x;
    cfg.d_y = d_y;
    cfg.hidden = o.hidden;
    cfg.d_h = o.d_h;
    cfg.d_z = o.d_z;
    cfg.num_classes = k;
    cfg.temps = {o.tau_u, o.tau_s, o.tau_c, o.tau_p, o.tau_q};
    return cfg;
}

TrainConfig train_config(const Options& o) {
    TrainConfig cfg;
    cfg.epochs = o.epochs;
    cfg.batch_size = o.batch_size;
    cfg.lr0 = o.lr0;
    cfg.weights = {o.lambda_u, o.lambda_s, o.epsilon};
    cfg.noise_sigma = o.noise_sigma;
    cfg.drop_rate = o.drop_rate;
    cfg.seed = RngSeed{Rng(o.model_seed).substream(1).next_u64()};
    cfg.map_refresh = o.map_refresh;
    cfg.map_per_batch = o.map_per_batch;
    return cfg;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create output directory " + dir);
}

json seeds_json(const Options& o) {
    return json{{"data_seed", o.data_seed}, {"model_seed", o.model_seed}};
}

// --- subcommands -------------------------------------------------------------

int cmd_theory_check(const Options& o) {
    Rng root(o.seed);
    json per;
    double max_rel = 0.0, max_schur = 0.0;
    for (std::size_t i = 0; i < o.models; ++i) {
        Rng sub = root.substream(i);
        std::size_t dim = 1 + static_cast<std::size_t>(sub.below(o.max_dim));
        GaussianClassModel m =
            random_class_model(dim, 0.0, 0.99, 100.0, RngSeed{sub.next_u64()});
        AlignmentCheck chk = alignment_identity_check(m);
        per.push_back(chk.rel_err);
        max_rel = std::max(max_rel, chk.rel_err);
        max_schur = std::max(max_schur, chk.schur_rel_err);
    }
    json report{{"models", o.models},          {"max_dim", o.max_dim},
                {"seed", o.seed},              {"per_model_rel_err", per},
                {"max_rel_err", max_rel},      {"max_schur_rel_err", max_schur}};
    std::string text = report.dump(2) + "\n";
    if (!o.out_file.empty())
        write_text(o.out_file, text);
    else
        std::cout << text;
    return 0;
}

int cmd_sweep(const Options& o) {
    GaussianClassModel base;
    base.cov_x = SpdMatrix::identity(o.d);
    base.cov_y = SpdMatrix::identity(o.d);
    base.mu_x.assign(o.d, 0.0);
    base.mu_y.assign(o.d, 0.0);
    base.mu_x[0] = o.mean_norm;
    base.mu_y[0] = o.mean_norm;
    base.r.assign(o.d, 0.0);
    auto rows =
        correlation_sweep(base, o.classes, o.r_grid, o.n_per_class, RngSeed{o.seed});
    std::string csv = "r,l_f_analytic,l_f_empirical,kmeans_acc\n";
    char buf[256];
    for (const SweepRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%.17g\n", r.r, r.l_f_analytic,
                      r.l_f_empirical, r.kmeans_acc);
        csv += buf;
    }
    std::string path = o.out_file.empty() ? o.out_dir + "/sweep.csv" : o.out_file;
    if (o.out_file.empty()) ensure_out_dir(o.out_dir);
    write_text(path, csv);
    std::cout << "wrote " << path << "\n";
    return 0;
}

int cmd_generate(const Options& o) {
    auto [ds, models] = generate(dataset_spec(o));
    ensure_out_dir(o.out_dir);
    save_features(ds, o.out_dir + "/x.csv", o.out_dir + "/y.csv", o.out_dir + "/labels.csv");
    json meta{{"k_total", o.k_total},
              {"k_old", o.k_old},
              {"d", o.d},
              {"n_per_class", o.n_per_class},
              {"mean_separation", o.mean_separation},
              {"r_low", o.r_low},
              {"r_high", o.r_high},
              {"labeled_fraction", o.labeled_fraction},
              {"seeds", seeds_json(o)},
              {"samples", ds.size()}};
    write_text(o.out_dir + "/meta.json", meta.dump(2) + "\n");
    std::cout << "wrote " << ds.size() << " samples to " << o.out_dir << "\n";
    return 0;
}

MultimodalDataset load_ds(const Options& o) {
    if (o.features_x.empty() || o.features_y.empty() || o.labels_path.empty())
        throw InvalidConfigError("features_x, features_y and labels are required");
    return load_features(o.features_x, o.features_y, o.labels_path);
}

json train_summary(const TrainHistory& hist) {
    const LossBreakdown& last = hist.epochs.back();
    return json{{"epochs", hist.epochs.size()},
                {"final_total", last.total},
                {"final_rep_u", last.rep_u},
                {"final_rep_s", last.rep_s},
                {"final_rep_c", last.rep_c},
                {"final_cls_u", last.cls_u},
                {"final_cls_s", last.cls_s},
                {"final_cls_c", last.cls_c},
                {"final_entropy", last.entropy},
                {"final_fusion", last.fusion},
                {"final_mapping", hist.final_mapping}};
}

std::pair<EncoderStack, TrainHistory> run_training(const Options& o,
                                                   const MultimodalDataset& ds) {
    ModelConfig mc = model_config(o, ds.d_x, ds.d_y, ds.num_classes());
    EncoderStack model = init_model(mc, RngSeed{o.model_seed});
    return train(std::move(model), ds, train_config(o));
}

json eval_report_json(const EncoderStack& model, const MultimodalDataset& ds, const Options& o,
                      bool write_csvs) {
    Predictions pr = predict_all(model, ds);
    std::vector<std::size_t> rows;
    for (std::size_t i : ds.unlabeled_indices())
        if (ds.samples[i].truth >= 0) rows.push_back(i);
    if (rows.empty()) throw EmptyInputError("eval: no unlabeled samples with known truth");

    std::set<int> old_set;
    for (std::size_t c = 0; c < ds.num_old; ++c) old_set.insert(static_cast<int>(c));

    auto subset = [&](const std::vector<int>& v) {
        std::vector<int> out;
        out.reserve(rows.size());
        for (std::size_t i : rows) out.push_back(v[i]);
        return out;
    };
    std::vector<int> truth = subset(ds.truths());
    std::vector<int> px = subset(pr.pred_x), py = subset(pr.pred_y), pf = subset(pr.pred_f);

    GcdEvalReport rx = acc_gcd(px, truth, old_set);
    GcdEvalReport ry = acc_gcd(py, truth, old_set);
    GcdEvalReport rf = acc_gcd(pf, truth, old_set);

    // Soft voting needs both heads in one index space: remap y's logits.
    std::vector<int> pux, puy;
    for (std::size_t i : ds.unlabeled_indices()) {
        pux.push_back(pr.pred_x[i]);
        puy.push_back(pr.pred_y[i]);
    }
    std::vector<int> mapping =
        compute_label_mapping(pux, puy, ds.num_old, model.cfg.num_classes);
    Matrix ly_mapped(rows.size(), model.cfg.num_classes);
    Matrix lx(rows.size(), model.cfg.num_classes);
    for (std::size_t t = 0; t < rows.size(); ++t)
        for (std::size_t k = 0; k < model.cfg.num_classes; ++k) {
            lx(t, k) = pr.logits_x(rows[t], k);
            ly_mapped(t, mapping[k]) = pr.logits_y(rows[t], k);
        }
    GcdEvalReport rv = acc_gcd(predict_vote(lx, ly_mapped), truth, old_set);

    BiasReport bias = bias_report(pf, truth, old_set);

    auto triple = [](const GcdEvalReport& r) {
        return json{{"all", r.acc_all}, {"old", r.acc_old}, {"new", r.acc_new}};
    };
    json rep{{"x", triple(rx)},
             {"y", triple(ry)},
             {"fusion", triple(rf)},
             {"voting", triple(rv)},
             {"n_eval", rows.size()},
             {"assignment", rf.assignment.mapping},
             {"confusion_old_new",
              {{"old_as_old", bias.confusion[0][0]},
               {"old_as_new", bias.confusion[0][1]},
               {"new_as_old", bias.confusion[1][0]},
               {"new_as_new", bias.confusion[1][1]}}},
             {"seeds", seeds_json(o)}};

    if (write_csvs) {
        // Fig.-3-style similarity deciles of the fused prediction.
        Matrix hx(rows.size(), model.cfg.d_h), hy(rows.size(), model.cfg.d_h);
        std::vector<bool> correct(rows.size());
        for (std::size_t t = 0; t < rows.size(); ++t) {
            std::copy(pr.h_x.row(rows[t]), pr.h_x.row(rows[t]) + model.cfg.d_h, hx.row(t));
            std::copy(pr.h_y.row(rows[t]), pr.h_y.row(rows[t]) + model.cfg.d_h, hy.row(t));
            correct[t] = rf.assignment.mapping[pf[t]] == truth[t];
        }
        std::string bins_csv = "bin,mean_similarity,accuracy\n";
        char buf[160];
        if (rows.size() >= o.bins) {
            for (const SimilarityBin& b : similarity_bins(hx, hy, correct, o.bins)) {
                std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g\n", b.bin, b.mean_similarity,
                              b.accuracy);
                bins_csv += buf;
            }
        }
        write_text(o.out_dir + "/bins.csv", bins_csv);

        std::string bias_csv = "label,true_count,predicted_count\n";
        for (const BiasReport::ClassRow& row : bias.histogram) {
            std::snprintf(buf, sizeof(buf), "%d,%zu,%zu\n", row.label, row.true_count,
                          row.predicted_count);
            bias_csv += buf;
        }
        write_text(o.out_dir + "/bias.csv", bias_csv);
    }
    return rep;
}

int cmd_train(const Options& o) {
    MultimodalDataset ds = load_ds(o);
    ensure_out_dir(o.out_dir);
    auto [model, hist] = run_training(o, ds);
    write_history_csv(hist, o.out_dir + "/history.csv");
    save_checkpoint(model, o.out_dir + "/model.ckpt");
    json rep{{"training", train_summary(hist)}, {"seeds", seeds_json(o)}};
    write_text(o.out_dir + "/report.json", rep.dump(2) + "\n");
    std::cout << "final loss " << hist.epochs.back().total << "\n";
    return 0;
}

int cmd_eval(const Options& o) {
    if (o.checkpoint.empty()) throw InvalidConfigError("checkpoint is required");
    MultimodalDataset ds = load_ds(o);
    EncoderStack model = load_checkpoint(o.checkpoint);
    ensure_out_dir(o.out_dir);
    json rep = eval_report_json(model, ds, o, true);
    write_text(o.out_dir + "/report.json", rep.dump(2) + "\n");
    std::cout << "fusion all/old/new: " << rep["fusion"]["all"] << " " << rep["fusion"]["old"]
              << " " << rep["fusion"]["new"] << "\n";
    return 0;
}

int cmd_estimate_k(const Options& o) {
    if (o.k_min < 1 || o.k_min > o.k_max) throw InvalidConfigError("need 1 <= k_min <= k_max");
    MultimodalDataset ds = load_ds(o);
    Matrix feats;
    if (o.modality == "x")
        feats = ds.features_x();
    else if (o.modality == "y")
        feats = ds.features_y();
    else if (o.modality == "fusion") {
        Matrix fx = ds.features_x(), fy = ds.features_y();
        feats = Matrix(fx.rows, fx.cols + fy.cols);
        for (std::size_t i = 0; i < fx.rows; ++i) {
            std::copy(fx.row(i), fx.row(i) + fx.cols, feats.row(i));
            std::copy(fy.row(i), fy.row(i) + fy.cols, feats.row(i) + fx.cols);
        }
    } else {
        throw InvalidConfigError("modality must be x, y or fusion");
    }
    std::vector<int> labels(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i)
        labels[i] = ds.samples[i].is_labeled ? ds.samples[i].truth : -1;
    std::vector<std::size_t> k_range;
    for (std::size_t k = o.k_min; k <= o.k_max; ++k) k_range.push_back(k);

    KEstimate est = estimate_k(feats, labels, k_range, RngSeed{o.seed});
    ensure_out_dir(o.out_dir);
    std::string csv = "k,labeled_accuracy\n";
    char buf[96];
    for (const auto& [k, acc] : est.table) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", k, acc);
        csv += buf;
    }
    write_text(o.out_dir + "/k_sweep.csv", csv);
    json rep{{"k_star", est.k_star}, {"modality", o.modality}, {"seed", o.seed}};
    write_text(o.out_dir + "/report.json", rep.dump(2) + "\n");
    std::cout << "estimated k = " << est.k_star << "\n";
    return 0;
}

int cmd_e2e(const Options& o) {
    auto [ds, models] = generate(dataset_spec(o));
    ensure_out_dir(o.out_dir);
    save_features(ds, o.out_dir + "/x.csv", o.out_dir + "/y.csv", o.out_dir + "/labels.csv");
    auto [model, hist] = run_training(o, ds);
    write_history_csv(hist, o.out_dir + "/history.csv");
    save_checkpoint(model, o.out_dir + "/model.ckpt");
    json rep = eval_report_json(model, ds, o, true);
    rep["training"] = train_summary(hist);
    write_text(o.out_dir + "/report.json", rep.dump(2) + "\n");
    std::cout << "fusion all/old/new: " << rep["fusion"]["all"].get<double>() << " "
              << rep["fusion"]["old"].get<double>() << " " << rep["fusion"]["new"].get<double>()
              << "\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
    Options o;
    std::string config_path;

    CLI::App app{"Multimodal generalized category discovery toolkit"};
    app.require_subcommand(1);

    // Shared flags are registered per subcommand so help stays local.
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config file (flags override)");
        sub->add_option("--out-dir", o.out_dir, "output directory");
    };
    auto add_data = [&](CLI::App* sub) {
        sub->add_option("--k-total", o.k_total);
        sub->add_option("--k-old", o.k_old);
        sub->add_option("--dim", o.d);
        sub->add_option("--n-per-class", o.n_per_class);
        sub->add_option("--mean-separation", o.mean_separation);
        sub->add_option("--r-low", o.r_low);
        sub->add_option("--r-high", o.r_high);
        sub->add_option("--labeled-fraction", o.labeled_fraction);
        sub->add_option("--data-seed", o.data_seed);
    };
    auto add_features = [&](CLI::App* sub) {
        sub->add_option("--features-x", o.features_x);
        sub->add_option("--features-y", o.features_y);
        sub->add_option("--labels", o.labels_path);
    };
    auto add_train = [&](CLI::App* sub) {
        sub->add_option("--epochs", o.epochs);
        sub->add_option("--batch-size", o.batch_size);
        sub->add_option("--lr0", o.lr0);
        sub->add_option("--lambda-u", o.lambda_u);
        sub->add_option("--lambda-s", o.lambda_s);
        sub->add_option("--epsilon", o.epsilon);
        sub->add_option("--noise-sigma", o.noise_sigma);
        sub->add_option("--drop-rate", o.drop_rate);
        sub->add_option("--map-refresh", o.map_refresh);
        sub->add_flag("--map-per-batch", o.map_per_batch);
        sub->add_option("--hidden", o.hidden);
        sub->add_option("--d-h", o.d_h);
        sub->add_option("--d-z", o.d_z);
        sub->add_option("--model-seed", o.model_seed);
    };

    CLI::App* theory = app.add_subcommand("theory-check", "verify the fused-determinant identity");
    theory->add_option("--models", o.models);
    theory->add_option("--max-dim", o.max_dim);
    theory->add_option("--seed", o.seed);
    theory->add_option("--out", o.out_file);
    add_common(theory);

    CLI::App* sweep = app.add_subcommand("sweep", "correlation sweep CSV");
    sweep->add_option("--classes", o.classes);
    sweep->add_option("--dim", o.d);
    sweep->add_option("--r-grid", o.r_grid)->delimiter(',');
    sweep->add_option("--n-per-class", o.n_per_class);
    sweep->add_option("--mean-norm", o.mean_norm);
    sweep->add_option("--seed", o.seed);
    sweep->add_option("--out", o.out_file);
    add_common(sweep);

    CLI::App* gen = app.add_subcommand("generate", "synthesize a dataset");
    add_common(gen);
    add_data(gen);

    CLI::App* tr = app.add_subcommand("train", "train on feature files");
    add_common(tr);
    add_features(tr);
    add_train(tr);

    CLI::App* ev = app.add_subcommand("eval", "evaluate a checkpoint");
    add_common(ev);
    add_features(ev);
    ev->add_option("--checkpoint", o.checkpoint);
    ev->add_option("--bins", o.bins);

    CLI::App* ek = app.add_subcommand("estimate-k", "category-count estimation");
    add_common(ek);
    add_features(ek);
    ek->add_option("--k-min", o.k_min);
    ek->add_option("--k-max", o.k_max);
    ek->add_option("--modality", o.modality);
    ek->add_option("--seed", o.seed);

    CLI::App* e2e = app.add_subcommand("e2e", "generate, train and evaluate");
    add_common(e2e);
    add_data(e2e);
    add_train(e2e);
    e2e->add_option("--bins", o.bins);

    std::vector<std::string> argv(args);
    // Apply the config file before flags so provided flags win: scan, load,
    // then let CLI11 overwrite.
    for (std::size_t i = 0; i + 1 < argv.size(); ++i)
        if (argv[i] == "--config") config_path = argv[i + 1];

    try {
        if (!config_path.empty()) apply_config_file(config_path, o);
        std::vector<const char*> cargs;
        cargs.push_back("mmgcd");
        for (const std::string& a : argv) cargs.push_back(a.c_str());
        app.parse(static_cast<int>(cargs.size()), cargs.data());

        if (const char* env = std::getenv("MMGCD_OUT_DIR")) o.out_dir = env;

        if (theory->parsed()) return cmd_theory_check(o);
        if (sweep->parsed()) return cmd_sweep(o);
        if (gen->parsed()) return cmd_generate(o);
        if (tr->parsed()) return cmd_train(o);
        if (ev->parsed()) return cmd_eval(o);
        if (ek->parsed()) return cmd_estimate_k(o);
        if (e2e->parsed()) return cmd_e2e(o);
        std::cerr << "no subcommand\n";
        return 1;
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp") {
            std::cout << app.help();
            return 0;
        }
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const InvalidConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const InvalidSpecError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace mmgcd::cli
