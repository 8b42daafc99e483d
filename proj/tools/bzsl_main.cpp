#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>

#include "bzsl/bzslcore.hpp"
#include "bzsl/datastore.hpp"
#include "bzsl/dnaside.hpp"
#include "bzsl/evalharness.hpp"
#include "bzsl/parallel.hpp"
#include "bzsl/runconfig.hpp"

namespace fs = std::filesystem;
using namespace bzsl;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;

MatrixFormat format_for(const std::string& path, const std::string& override_fmt) {
    if (override_fmt == "csv") return MatrixFormat::csv;
    if (override_fmt == "bmat") return MatrixFormat::bmat;
    if (!override_fmt.empty()) throw ConfigError("format must be csv or bmat");
    return path.size() >= 5 && path.substr(path.size() - 5) == ".bmat" ? MatrixFormat::bmat
                                                                       : MatrixFormat::csv;
}

std::string sidecar_for(const std::string& matrix_path) {
    const fs::path p(matrix_path);
    fs::path side = p.parent_path() / p.stem();
    side += ".classes.csv";
    return side.string();
}

void require_exists(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw ConfigError(what + " does not exist: " + path);
}

// Flags fold into the config with duplicate detection, so a key given both
// on the command line and in the file is rejected rather than shadowed.
struct ConfigBuilder {
    CLI::App* cmd;
    std::string config_path;
    std::deque<std::string> storage; // stable addresses for CLI11 bindings
    std::vector<std::pair<std::string, const std::string*>> bindings;

    explicit ConfigBuilder(CLI::App* c) : cmd(c) {
        cmd->add_option("--config", config_path, "flat key=value config file");
    }

    void bind(const std::string& flag, const std::string& key, const std::string& help) {
        storage.emplace_back();
        cmd->add_option(flag, storage.back(), help);
        bindings.emplace_back(key, &storage.back());
    }

    RunConfig build() const {
        RunConfig cfg;
        if (!config_path.empty()) {
            require_exists(config_path, "config file");
            cfg = RunConfig::from_file(config_path);
        }
        for (const auto& [key, value] : bindings) {
            if (!value->empty()) cfg.set(key, *value);
        }
        return cfg;
    }
};

unsigned resolve_threads(const RunConfig& cfg) {
    if (cfg.has("threads")) {
        const int t = cfg.get_int("threads", 0);
        if (t < 0) throw ConfigError("threads must be nonnegative");
        return static_cast<unsigned>(t);
    }
    if (const char* env = std::getenv("BZSL_THREADS")) {
        const int t = std::atoi(env);
        if (t > 0) return static_cast<unsigned>(t);
    }
    return 0; // hardware default
}

Hyperparams hyper_from(const RunConfig& cfg, std::size_t feature_dim,
                       std::size_t train_rows) {
    Hyperparams h;
    h.kappa0 = cfg.get_double("kappa0", h.kappa0);
    h.kappa1 = cfg.get_double("kappa1", h.kappa1);
    h.m_mult = cfg.get_double("m_mult", h.m_mult);
    h.s_scale = cfg.get_double("s", h.s_scale);
    h.k_neighbors = cfg.get_int("k_neighbors", h.k_neighbors);
    if (const auto p = cfg.get_optional("pca_dim")) {
        if (*p != "none") {
            const int d = cfg.get_int("pca_dim", 0);
            if (d < 1) throw ConfigError("pca_dim must be >= 1 or 'none'");
            h.pca_dim = static_cast<std::size_t>(d);
        }
    } else if (feature_dim > 500) {
        // Default reduction for wide features, kept within what the
        // training rows can support.
        h.pca_dim = std::min<std::size_t>(500, train_rows);
    }
    try {
        h.validate();
    } catch (const DomainError& e) {
        throw ConfigError(e.what());
    }
    return h;
}

Dataset load_dataset_from(const RunConfig& cfg) {
    const std::string features = cfg.get_required("features");
    const std::string labels = cfg.get_required("labels");
    require_exists(features, "feature matrix");
    require_exists(labels, "label file");
    return load_dataset(features, format_for(features, cfg.get_string("format", "")), labels);
}

SplitSpec resolve_split(const RunConfig& cfg, const Dataset& ds) {
    if (const auto path = cfg.get_optional("split")) {
        require_exists(*path, "split file");
        return load_split(*path, ds);
    }
    if (!cfg.has("unseen_frac") || !cfg.has("seen_test_frac")) {
        throw ConfigError("provide either split=<path> or unseen_frac + seen_test_frac");
    }
    const double unseen_frac = cfg.get_double("unseen_frac", 0.0);
    const double seen_test_frac = cfg.get_double("seen_test_frac", 0.0);
    if (!(unseen_frac > 0.0 && unseen_frac < 1.0) ||
        !(seen_test_frac > 0.0 && seen_test_frac < 1.0)) {
        throw ConfigError("split fractions must lie strictly between 0 and 1");
    }
    return make_split(ds.labels, unseen_frac, seen_test_frac, ds.group_ids,
                      cfg.get_u64("seed", 0));
}

SideInfoTable resolve_sideinfo(const RunConfig& cfg, const Dataset& ds) {
    std::unordered_map<std::string, int> id_of;
    for (int c = 0; c < ds.labels.n_classes(); ++c) {
        id_of[ds.labels.class_names[static_cast<std::size_t>(c)]] = c;
    }
    const auto load_one = [&](const std::string& path) {
        require_exists(path, "side information matrix");
        const std::string sidecar = sidecar_for(path);
        require_exists(sidecar, "side information sidecar");
        return load_sideinfo(path, format_for(path, cfg.get_string("format", "")), sidecar,
                             id_of, SideInfoSource::dna_external);
    };

    const bool combined = cfg.has("phi");
    const bool split_pair = cfg.has("phi_seen") || cfg.has("phi_unseen");
    if (combined && split_pair) {
        throw ConfigError("give either phi or the phi_seen/phi_unseen pair, not both");
    }
    if (combined) return load_one(cfg.get_required("phi"));
    if (!cfg.has("phi_seen") || !cfg.has("phi_unseen")) {
        throw ConfigError("side information requires phi or both phi_seen and phi_unseen");
    }
    const SideInfoTable seen = load_one(cfg.get_required("phi_seen"));
    const SideInfoTable unseen = load_one(cfg.get_required("phi_unseen"));
    if (seen.dim() != unseen.dim()) {
        throw ConfigError("phi_seen and phi_unseen have different dimensions");
    }
    // Merge into one table sorted by class id; run-time subsetting follows
    // the split.
    std::vector<std::pair<int, std::pair<const SideInfoTable*, std::size_t>>> rows;
    for (std::size_t r = 0; r < seen.n_classes(); ++r) {
        rows.push_back({seen.class_ids[r], {&seen, r}});
    }
    for (std::size_t r = 0; r < unseen.n_classes(); ++r) {
        rows.push_back({unseen.class_ids[r], {&unseen, r}});
    }
    std::sort(rows.begin(), rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t k = 1; k < rows.size(); ++k) {
        if (rows[k].first == rows[k - 1].first) {
            throw ConfigError(
                "class '" + ds.labels.class_names[static_cast<std::size_t>(rows[k].first)] +
                "' appears in both phi_seen and phi_unseen");
        }
    }
    SideInfoTable merged;
    merged.source_tag = seen.source_tag;
    merged.vectors = FeatureMatrix(rows.size(), seen.dim());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& [src, src_row] = rows[k].second;
        merged.class_ids.push_back(rows[k].first);
        for (std::size_t j = 0; j < src->dim(); ++j) {
            merged.vectors.at(k, j) = src->vectors.at(src_row, j);
        }
    }
    return merged;
}

std::set<std::string> dataset_keys() {
    return {"features", "labels",    "split",      "phi",    "phi_seen", "phi_unseen",
            "out",      "format",   "seed",       "threads", "unseen_frac",
            "seen_test_frac"};
}

std::set<std::string> hyper_keys() {
    return {"kappa0", "kappa1", "m_mult", "s", "k_neighbors", "pca_dim"};
}

void add_dataset_flags(ConfigBuilder& b) {
    b.bind("--features", "features", "feature matrix (csv or bmat)");
    b.bind("--labels", "labels", "label csv (sample_id,class_name[,group_id])");
    b.bind("--split", "split", "split csv (sample_id,partition)");
    b.bind("--phi", "phi", "side-info matrix covering all classes");
    b.bind("--phi-seen", "phi_seen", "side-info matrix for seen classes");
    b.bind("--phi-unseen", "phi_unseen", "side-info matrix for unseen classes");
    b.bind("--out", "out", "output directory");
    b.bind("--format", "format", "force matrix format: csv or bmat");
    b.bind("--seed", "seed", "random seed");
    b.bind("--threads", "threads", "worker threads (0 = hardware)");
    b.bind("--unseen-frac", "unseen_frac", "fraction of classes made unseen (if no split file)");
    b.bind("--seen-test-frac", "seen_test_frac", "per-class test fraction (if no split file)");
}

void add_hyper_flags(ConfigBuilder& b) {
    b.bind("--kappa0", "kappa0", "prior precision of local-prior centers");
    b.bind("--kappa1", "kappa1", "prior precision of class centers within a local prior");
    b.bind("--m-mult", "m_mult", "inverse-Wishart dof as a multiple of D+2");
    b.bind("--s", "s", "scaling of the global covariance prior");
    b.bind("--k", "k_neighbors", "seen classes per surrogate");
    b.bind("--pca-dim", "pca_dim", "PCA output dimension or 'none'");
}

std::string out_dir_from(const RunConfig& cfg) {
    const std::string out = cfg.get_required("out");
    fs::create_directories(out);
    return out;
}

// ---------------------------------------------------------------- embed ---

int run_embed(const RunConfig& cfg) {
    cfg.require_known({"fasta", "labels", "out", "method", "class_attr", "kmer.k",
                       "seq.length", "align.match", "align.mismatch", "align.gap", "threads"});
    set_thread_count(resolve_threads(cfg));

    const std::string fasta = cfg.get_required("fasta");
    const std::string labels = cfg.get_required("labels");
    require_exists(fasta, "fasta file");
    require_exists(labels, "label file");
    const std::string method = cfg.get_string("method", "kmer");
    if (method != "kmer" && method != "onehot-export") {
        throw ConfigError("method must be kmer or onehot-export");
    }
    const std::string out = out_dir_from(cfg);

    const BarcodeData data = parse_fasta(fasta, labels);
    const int n_classes = static_cast<int>(data.class_names.size());

    std::size_t length = kDefaultBarcodeLength;
    if (cfg.get_string("seq.length", "") == "auto") {
        length = median_sequence_length(data.records);
    } else if (cfg.has("seq.length")) {
        const int given = cfg.get_int("seq.length", 0);
        if (given < 1) throw ConfigError("seq.length must be >= 1 or 'auto'");
        length = static_cast<std::size_t>(given);
    }
    AlignScoring scoring;
    scoring.match = cfg.get_int("align.match", scoring.match);
    scoring.mismatch = cfg.get_int("align.mismatch", scoring.mismatch);
    scoring.gap = cfg.get_int("align.gap", scoring.gap);

    const TokenSeq cons = consensus(data.records, length);
    std::size_t token_hist[kNumTokens] = {0, 0, 0, 0, 0};
    for (std::uint8_t t : cons.tokens) ++token_hist[t];

    FeatureMatrix samples;
    int k = cfg.get_int("kmer.k", 4);
    if (method == "kmer") {
        try {
            samples = per_sample_kmer(data.records, k);
        } catch (const DomainError& e) {
            throw ConfigError(e.what());
        }
    } else {
        samples = per_sample_onehot_aligned(data.records, length, scoring).samples;
    }

    const std::string class_attr = cfg.get_string("class_attr", "mean");
    if (class_attr != "mean" && class_attr != "consensus") {
        throw ConfigError("class_attr must be mean or consensus");
    }

    std::vector<int> labels_vec;
    for (const auto& r : data.records) labels_vec.push_back(r.class_id);
    SideInfoTable table;
    if (class_attr == "mean") {
        table = class_attributes(samples, labels_vec, n_classes,
                                 method == "kmer" ? SideInfoSource::dna_kmer
                                                  : SideInfoSource::dna_external);
    } else if (method == "kmer") {
        table = class_attributes_from_consensus(data.records, n_classes, length, k);
    } else {
        // Per-class consensus aligned to the global consensus, one-hot encoded.
        std::vector<std::vector<BarcodeRecord>> by_class(static_cast<std::size_t>(n_classes));
        for (const auto& r : data.records) {
            by_class[static_cast<std::size_t>(r.class_id)].push_back(r);
        }
        table.source_tag = SideInfoSource::dna_external;
        table.vectors = FeatureMatrix(static_cast<std::size_t>(n_classes),
                                      length * static_cast<std::size_t>(kNumTokens));
        for (int c = 0; c < n_classes; ++c) {
            const auto& group = by_class[static_cast<std::size_t>(c)];
            if (group.empty()) throw EmptyClass("class id " + std::to_string(c) + " is empty");
            TokenSeq class_cons = consensus(group, length);
            std::string as_text;
            for (std::uint8_t t : class_cons.tokens) as_text.push_back("AGCTN"[t]);
            const TokenSeq aligned = align_to_consensus({"", c, as_text}, cons, scoring);
            const OneHotTensor oh = one_hot(aligned);
            for (std::size_t j = 0; j < oh.values.size(); ++j) {
                table.vectors.at(static_cast<std::size_t>(c), j) =
                    static_cast<double>(oh.values[j]);
            }
            table.class_ids.push_back(c);
        }
    }

    save_matrix(samples, out + "/sample_embeddings.bmat", MatrixFormat::bmat);
    save_sideinfo(table, data.class_names, out + "/class_attributes.bmat", MatrixFormat::bmat,
                  out + "/class_attributes.classes.csv");
    {
        std::ofstream meta(out + "/embed.meta");
        meta << "method=" << method << '\n';
        meta << "class_attr=" << class_attr << '\n';
        if (method == "kmer") meta << "kmer.k=" << k << '\n';
        meta << "seq.length=" << length << '\n';
        meta << "token_order=A,G,C,T,OTHER\n";
    }

    std::printf("consensus length: %zu\n", length);
    std::printf("consensus tokens: A=%zu G=%zu C=%zu T=%zu OTHER=%zu\n", token_hist[0],
                token_hist[1], token_hist[2], token_hist[3], token_hist[4]);
    std::printf("samples: %zu x %zu, classes: %zu\n", samples.n_rows, samples.n_cols,
                table.n_classes());
    return 0;
}

// ---------------------------------------------------------- fit-predict ---

PredictMode mode_from(const std::string& name) {
    if (name == "gzsl") return PredictMode::gzsl;
    if (name == "zsl_only") return PredictMode::zsl_only;
    if (name == "seen_only") return PredictMode::seen_only;
    throw ConfigError("mode must be gzsl, zsl_only or seen_only");
}

int run_fit_predict(const RunConfig& cfg, const std::string& save_model_path) {
    auto allowed = dataset_keys();
    for (const auto& k : hyper_keys()) allowed.insert(k);
    allowed.insert("mode");
    cfg.require_known(allowed);
    set_thread_count(resolve_threads(cfg));

    const Dataset ds = load_dataset_from(cfg);
    const SplitSpec split = resolve_split(cfg, ds);
    const SideInfoTable phi = resolve_sideinfo(cfg, ds);
    const Hyperparams hyper = hyper_from(cfg, ds.features.n_cols, split.train_seen.size());
    const PredictMode mode = mode_from(cfg.get_string("mode", "gzsl"));
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    const std::string out = out_dir_from(cfg);

    const FeatureMatrix x_train = take_rows(ds.features, split.train_seen);
    LabelVector y_train;
    y_train.class_names = ds.labels.class_names;
    for (std::size_t i : split.train_seen) y_train.labels.push_back(ds.labels.labels[i]);

    const SideInfoTable phi_seen = sideinfo_subset(phi, split.seen_classes);
    SideInfoTable phi_unseen;
    phi_unseen.source_tag = phi.source_tag;
    phi_unseen.vectors = FeatureMatrix(0, phi.vectors.n_cols);
    if (!split.unseen_classes.empty()) {
        phi_unseen = sideinfo_subset(phi, split.unseen_classes);
    }

    const FittedModel model = fit(x_train, y_train, phi_seen, phi_unseen, hyper);
    if (!save_model_path.empty()) save_model(model, save_model_path);

    std::vector<std::size_t> test_rows;
    if (mode != PredictMode::zsl_only) {
        test_rows.insert(test_rows.end(), split.test_seen.begin(), split.test_seen.end());
    }
    if (mode != PredictMode::seen_only) {
        test_rows.insert(test_rows.end(), split.test_unseen.begin(), split.test_unseen.end());
    }
    if (test_rows.empty()) throw DegenerateSplit("no test samples for the requested mode");

    const FeatureMatrix x_test = take_rows(ds.features, test_rows);
    const BatchPrediction batch = predict_batch(model, x_test, mode);

    std::vector<int> truth;
    for (std::size_t i : test_rows) truth.push_back(ds.labels.labels[i]);

    GzslReport report;
    report.hyper = hyper;
    report.seed = seed;
    const auto seen_acc = per_class_accuracy(truth, batch.class_ids, split.seen_classes);
    const auto unseen_acc = per_class_accuracy(truth, batch.class_ids, split.unseen_classes);
    report.per_class_acc = seen_acc;
    report.per_class_acc.insert(unseen_acc.begin(), unseen_acc.end());
    if (mode != PredictMode::zsl_only && !seen_acc.empty()) {
        double s = 0.0;
        for (const auto& [c, a] : seen_acc) s += a;
        report.seen_acc = s / static_cast<double>(seen_acc.size());
    }
    if (mode != PredictMode::seen_only && !unseen_acc.empty()) {
        double s = 0.0;
        for (const auto& [c, a] : unseen_acc) s += a;
        report.unseen_acc = s / static_cast<double>(unseen_acc.size());
    }
    report.harmonic = harmonic_mean(report.unseen_acc, report.seen_acc);

    write_reports_csv({report}, out + "/gzsl_report.csv");
    {
        std::ofstream os(out + "/predictions.csv");
        os << "sample_id,true_class,predicted_class,top_score\n";
        char buf[64];
        for (std::size_t k = 0; k < test_rows.size(); ++k) {
            std::snprintf(buf, sizeof(buf), "%.17g", batch.top_scores[k]);
            os << ds.sample_ids[test_rows[k]] << ','
               << ds.labels.class_names[static_cast<std::size_t>(truth[k])] << ','
               << ds.labels.class_names[static_cast<std::size_t>(batch.class_ids[k])] << ','
               << buf << '\n';
        }
    }
    {
        std::ofstream os(out + "/per_class_accuracy.csv");
        os << "class_id,class_name,kind,accuracy\n";
        char buf[32];
        for (const auto& [c, a] : report.per_class_acc) {
            const bool unseen = std::binary_search(split.unseen_classes.begin(),
                                                   split.unseen_classes.end(), c);
            std::snprintf(buf, sizeof(buf), "%.6f", a);
            os << c << ',' << ds.labels.class_names[static_cast<std::size_t>(c)] << ','
               << (unseen ? "unseen" : "seen") << ',' << buf << '\n';
        }
    }

    std::printf("S = %.2f, US = %.2f, H = %.2f\n", report.seen_acc, report.unseen_acc,
                report.harmonic);
    return 0;
}

// ----------------------------------------------------------------- synth ---

int run_synth(const RunConfig& cfg) {
    cfg.require_known({"priors", "classes_per_prior", "samples_per_class", "dim", "kappa0",
                       "kappa1", "m_gen", "sideinfo_noise", "seed", "seen_test_frac", "out",
                       "threads"});
    set_thread_count(resolve_threads(cfg));

    SyntheticSpec spec;
    spec.n_local_priors = static_cast<std::size_t>(cfg.get_int("priors", 10));
    spec.classes_per_prior = static_cast<std::size_t>(cfg.get_int("classes_per_prior", 3));
    spec.samples_per_class = static_cast<std::size_t>(cfg.get_int("samples_per_class", 50));
    spec.dim = static_cast<std::size_t>(cfg.get_int("dim", 10));
    spec.kappa0 = cfg.get_double("kappa0", spec.kappa0);
    spec.kappa1 = cfg.get_double("kappa1", spec.kappa1);
    spec.m_gen = cfg.get_int("m_gen", static_cast<int>(spec.dim) + 5);
    spec.sideinfo_noise = cfg.get_double("sideinfo_noise", spec.sideinfo_noise);
    spec.seed = cfg.get_u64("seed", 0);
    spec.seen_test_frac = cfg.get_double("seen_test_frac", spec.seen_test_frac);

    const std::string out = out_dir_from(cfg);
    const SyntheticData data = generate_synthetic(spec);

    save_matrix(data.dataset.features, out + "/features.bmat", MatrixFormat::bmat);
    LabeledSamples ls;
    ls.sample_ids = data.dataset.sample_ids;
    ls.labels = data.dataset.labels;
    save_labels(ls, out + "/labels.csv");
    save_split(data.split, data.dataset.sample_ids, out + "/split.csv");

    const SideInfoTable phi_seen = sideinfo_subset(data.phi, data.split.seen_classes);
    const SideInfoTable phi_unseen = sideinfo_subset(data.phi, data.split.unseen_classes);
    save_sideinfo(phi_seen, data.dataset.labels.class_names, out + "/sideinfo_seen.bmat",
                  MatrixFormat::bmat, out + "/sideinfo_seen.classes.csv");
    save_sideinfo(phi_unseen, data.dataset.labels.class_names, out + "/sideinfo_unseen.bmat",
                  MatrixFormat::bmat, out + "/sideinfo_unseen.classes.csv");

    std::printf("synthetic: %zu samples, %zu classes (%zu unseen), dim %zu\n",
                data.dataset.features.n_rows, data.dataset.labels.class_names.size(),
                data.split.unseen_classes.size(), spec.dim);
    return 0;
}

// ------------------------------------------------------- tune / ablate ---

int run_tune(const RunConfig& cfg) {
    auto allowed = dataset_keys();
    allowed.insert({"grid.kappa0", "grid.kappa1", "grid.s", "grid.m_mult", "grid.k",
                    "tune.val_unseen_frac", "tune.val_test_frac", "pca_dim"});
    cfg.require_known(allowed);
    set_thread_count(resolve_threads(cfg));

    const Dataset ds = load_dataset_from(cfg);
    const SplitSpec split = resolve_split(cfg, ds);
    const SideInfoTable phi = resolve_sideinfo(cfg, ds);
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    const std::string out = out_dir_from(cfg);

    HyperGrid grid;
    if (cfg.has("grid.kappa0")) grid.kappa0 = cfg.get_double_list("grid.kappa0");
    if (cfg.has("grid.kappa1")) grid.kappa1 = cfg.get_double_list("grid.kappa1");
    if (cfg.has("grid.s")) grid.s_scale = cfg.get_double_list("grid.s");
    if (cfg.has("grid.m_mult")) grid.m_mult = cfg.get_double_list("grid.m_mult");
    if (cfg.has("grid.k")) grid.k_neighbors = cfg.get_int_list("grid.k");
    if (const auto p = cfg.get_optional("pca_dim")) {
        if (*p != "none") grid.pca_dim = static_cast<std::size_t>(cfg.get_int("pca_dim", 0));
    } else if (ds.features.n_cols > 500) {
        grid.pca_dim = 500;
    }

    const SplitSpec val_split =
        make_validation_split(ds.labels, split, cfg.get_double("tune.val_unseen_frac", 0.1),
                              cfg.get_double("tune.val_test_frac", 0.2), seed);

    auto [best, reports] = tune_grid(ds, val_split, phi, grid, seed);
    for (std::size_t i = 0; i < reports.size(); ++i) {
        reports[i].axis_label = "cell_" + std::to_string(i);
    }
    write_reports_csv(reports, out + "/tune_runs.csv");
    {
        std::ofstream os(out + "/best_config.txt");
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%g", best.kappa0);
        os << "kappa0=" << buf << '\n';
        std::snprintf(buf, sizeof(buf), "%g", best.kappa1);
        os << "kappa1=" << buf << '\n';
        std::snprintf(buf, sizeof(buf), "%g", best.m_mult);
        os << "m_mult=" << buf << '\n';
        std::snprintf(buf, sizeof(buf), "%g", best.s_scale);
        os << "s=" << buf << '\n';
        os << "k_neighbors=" << best.k_neighbors << '\n';
        if (best.pca_dim) os << "pca_dim=" << *best.pca_dim << '\n';
    }

    double best_h = 0.0;
    for (const auto& r : reports) best_h = std::max(best_h, r.harmonic);
    std::printf("tuned %zu configurations, best validation H = %.4f\n", reports.size(),
                best_h);
    return 0;
}

int run_ablate(const RunConfig& cfg) {
    auto allowed = dataset_keys();
    for (const auto& k : hyper_keys()) allowed.insert(k);
    allowed.insert({"ablate.fractions", "ablate.repeats"});
    cfg.require_known(allowed);
    set_thread_count(resolve_threads(cfg));

    const Dataset ds = load_dataset_from(cfg);
    const SplitSpec split = resolve_split(cfg, ds);
    const SideInfoTable phi = resolve_sideinfo(cfg, ds);
    const Hyperparams hyper = hyper_from(cfg, ds.features.n_cols, split.train_seen.size());
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    const std::string out = out_dir_from(cfg);

    std::vector<double> fractions{0.25, 0.5, 0.75, 1.0};
    if (cfg.has("ablate.fractions")) fractions = cfg.get_double_list("ablate.fractions");
    const std::size_t repeats = static_cast<std::size_t>(cfg.get_int("ablate.repeats", 5));

    const AblationResult result =
        ablate_seen_count(ds, split, phi, hyper, fractions, repeats, seed);

    std::vector<GzslReport> runs;
    for (const auto& cell : result.cells) {
        runs.insert(runs.end(), cell.runs.begin(), cell.runs.end());
    }
    write_reports_csv(runs, out + "/ablate_runs.csv");
    write_aggregate_csv(result, out + "/ablate_aggregate.csv");
    write_summary_text(result, "seen-class-count ablation", out + "/ablate_summary.txt");
    std::printf("ablation: %zu cells x %zu repeats\n", result.cells.size(), repeats);
    return 0;
}

int run_sweep(const RunConfig& cfg) {
    auto allowed = dataset_keys();
    for (const auto& k : hyper_keys()) allowed.insert(k);
    allowed.insert({"sweep.kappa0", "sweep.kappa1"});
    cfg.require_known(allowed);
    set_thread_count(resolve_threads(cfg));

    const Dataset ds = load_dataset_from(cfg);
    const SplitSpec split = resolve_split(cfg, ds);
    const SideInfoTable phi = resolve_sideinfo(cfg, ds);
    const Hyperparams hyper = hyper_from(cfg, ds.features.n_cols, split.train_seen.size());
    const std::uint64_t seed = cfg.get_u64("seed", 0);
    const std::string out = out_dir_from(cfg);

    std::vector<double> k0{0.01, 0.1, 1.0, 10.0};
    std::vector<double> k1{0.1, 1.0, 10.0, 25.0};
    if (cfg.has("sweep.kappa0")) k0 = cfg.get_double_list("sweep.kappa0");
    if (cfg.has("sweep.kappa1")) k1 = cfg.get_double_list("sweep.kappa1");

    const AblationResult result = sweep_kappas(ds, split, phi, hyper, k0, k1, seed);

    std::vector<GzslReport> runs;
    for (const auto& cell : result.cells) {
        runs.insert(runs.end(), cell.runs.begin(), cell.runs.end());
    }
    write_reports_csv(runs, out + "/sweep_runs.csv");
    write_aggregate_csv(result, out + "/sweep_aggregate.csv");
    write_summary_text(result, "kappa0/kappa1 sweep", out + "/sweep_summary.txt");
    std::printf("sweep: %zu cells\n", result.cells.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical Bayesian zero-shot classifier with DNA side information"};
    app.require_subcommand(1);

    auto* embed = app.add_subcommand("embed", "DNA barcode embeddings from FASTA");
    ConfigBuilder embed_cfg(embed);
    embed_cfg.bind("--fasta", "fasta", "FASTA file of barcode sequences");
    embed_cfg.bind("--labels", "labels", "label csv mapping sample_id to class");
    embed_cfg.bind("--out", "out", "output directory");
    embed_cfg.bind("--method", "method", "kmer or onehot-export");
    embed_cfg.bind("--class-attr", "class_attr",
                   "class attribute route: mean (of sample embeddings) or consensus");
    embed_cfg.bind("--k", "kmer.k", "k-mer length (1..6)");
    embed_cfg.bind("--length", "seq.length", "barcode length (or 'auto' for median)");
    embed_cfg.bind("--align-match", "align.match", "alignment match score");
    embed_cfg.bind("--align-mismatch", "align.mismatch", "alignment mismatch score");
    embed_cfg.bind("--align-gap", "align.gap", "alignment gap score");
    embed_cfg.bind("--threads", "threads", "worker threads");

    auto* fitp = app.add_subcommand("fit-predict", "fit the model and score test partitions");
    ConfigBuilder fitp_cfg(fitp);
    add_dataset_flags(fitp_cfg);
    add_hyper_flags(fitp_cfg);
    fitp_cfg.bind("--mode", "mode", "gzsl, zsl_only or seen_only");
    std::string save_model_path;
    fitp->add_option("--save-model", save_model_path, "also write the fitted model file");

    auto* tune = app.add_subcommand("tune", "grid search on a nested validation split");
    ConfigBuilder tune_cfg(tune);
    add_dataset_flags(tune_cfg);
    tune_cfg.bind("--pca-dim", "pca_dim", "PCA output dimension or 'none'");

    auto* ablate = app.add_subcommand("ablate", "seen-class-count ablation");
    ConfigBuilder ablate_cfg(ablate);
    add_dataset_flags(ablate_cfg);
    add_hyper_flags(ablate_cfg);
    ablate_cfg.bind("--fractions", "ablate.fractions", "comma list of seen-class fractions");
    ablate_cfg.bind("--repeats", "ablate.repeats", "repeats per fraction");

    auto* sweep = app.add_subcommand("sweep", "kappa0 x kappa1 factorial sweep");
    ConfigBuilder sweep_cfg(sweep);
    add_dataset_flags(sweep_cfg);
    add_hyper_flags(sweep_cfg);
    sweep_cfg.bind("--sweep-kappa0", "sweep.kappa0", "comma list of kappa0 values");
    sweep_cfg.bind("--sweep-kappa1", "sweep.kappa1", "comma list of kappa1 values");

    auto* synth = app.add_subcommand("synth", "sample the generative hierarchy to files");
    ConfigBuilder synth_cfg(synth);
    synth_cfg.bind("--priors", "priors", "number of local priors G");
    synth_cfg.bind("--classes-per-prior", "classes_per_prior", "classes per local prior");
    synth_cfg.bind("--samples-per-class", "samples_per_class", "samples per class");
    synth_cfg.bind("--dim", "dim", "feature dimension D");
    synth_cfg.bind("--kappa0", "kappa0", "generative kappa0");
    synth_cfg.bind("--kappa1", "kappa1", "generative kappa1");
    synth_cfg.bind("--m-gen", "m_gen", "generative inverse-Wishart dof (>= D+2)");
    synth_cfg.bind("--sideinfo-noise", "sideinfo_noise", "per-class side-info noise sigma");
    synth_cfg.bind("--seed", "seed", "random seed");
    synth_cfg.bind("--seen-test-frac", "seen_test_frac", "per-class test fraction");
    synth_cfg.bind("--out", "out", "output directory");
    synth_cfg.bind("--threads", "threads", "worker threads");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (app.got_subcommand(embed)) return run_embed(embed_cfg.build());
        if (app.got_subcommand(fitp)) return run_fit_predict(fitp_cfg.build(), save_model_path);
        if (app.got_subcommand(tune)) return run_tune(tune_cfg.build());
        if (app.got_subcommand(ablate)) return run_ablate(ablate_cfg.build());
        if (app.got_subcommand(sweep)) return run_sweep(sweep_cfg.build());
        if (app.got_subcommand(synth)) return run_synth(synth_cfg.build());
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidSpec& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
