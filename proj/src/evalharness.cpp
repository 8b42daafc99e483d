#include "bzsl/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "bzsl/rng.hpp"

namespace bzsl {

void SyntheticSpec::validate() const {
    if (n_local_priors < 1 || classes_per_prior < 2 || samples_per_class < 1 || dim < 1) {
        throw InvalidSpec("synthetic spec needs G >= 1, classes_per_prior >= 2, "
                          "samples_per_class >= 1, dim >= 1");
    }
    if (m_gen < static_cast<int>(dim) + 2) {
        throw InvalidSpec("m_gen must be at least D+2");
    }
    if (!(kappa0 > 0.0) || !(kappa1 > 0.0)) throw InvalidSpec("kappas must be positive");
    if (sideinfo_noise < 0.0) throw InvalidSpec("sideinfo_noise must be nonnegative");
    if (!(seen_test_frac > 0.0 && seen_test_frac < 1.0)) {
        throw InvalidSpec("seen_test_frac must be in (0,1)");
    }
    if (n_local_priors * (classes_per_prior - 1) < 2) {
        throw InvalidSpec("need at least 2 seen classes overall");
    }
}

std::map<int, double> per_class_accuracy(const std::vector<int>& truth,
                                         const std::vector<int>& predicted,
                                         const std::vector<int>& class_set) {
    if (truth.size() != predicted.size()) {
        throw LengthMismatch("truth and prediction vectors differ in length");
    }
    std::unordered_map<int, std::pair<std::size_t, std::size_t>> tally; // class -> (hits, total)
    std::unordered_set<int> wanted(class_set.begin(), class_set.end());
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!wanted.count(truth[i])) continue;
        auto& t = tally[truth[i]];
        ++t.second;
        if (predicted[i] == truth[i]) ++t.first;
    }
    std::map<int, double> out;
    for (const auto& [c, t] : tally) {
        out[c] = static_cast<double>(t.first) / static_cast<double>(t.second);
    }
    return out;
}

double harmonic_mean(double us, double s) {
    if (us < 0.0 || us > 1.0 || s < 0.0 || s > 1.0) {
        throw DomainError("accuracies must lie in [0,1]");
    }
    if (us + s == 0.0) return 0.0;
    return 2.0 * us * s / (us + s);
}

namespace {

double mean_of(const std::map<int, double>& acc) {
    if (acc.empty()) return 0.0;
    double s = 0.0;
    for (const auto& [c, a] : acc) s += a;
    return s / static_cast<double>(acc.size());
}

LabelVector labels_subset(const LabelVector& y, const std::vector<std::size_t>& rows) {
    LabelVector out;
    out.class_names = y.class_names;
    out.labels.reserve(rows.size());
    for (std::size_t i : rows) out.labels.push_back(y.labels[i]);
    return out;
}

} // namespace

GzslReport run_gzsl(const Dataset& ds, const SplitSpec& split, const SideInfoTable& phi,
                    const Hyperparams& hyper, std::uint64_t seed, RunOutputs* outputs) {
    const FeatureMatrix x_train = take_rows(ds.features, split.train_seen);
    const LabelVector y_train = labels_subset(ds.labels, split.train_seen);

    const SideInfoTable phi_seen = sideinfo_subset(phi, split.seen_classes);
    SideInfoTable phi_unseen;
    phi_unseen.source_tag = phi.source_tag;
    phi_unseen.vectors = FeatureMatrix(0, phi.vectors.n_cols);
    if (!split.unseen_classes.empty()) {
        phi_unseen = sideinfo_subset(phi, split.unseen_classes);
    }

    const FittedModel model = fit(x_train, y_train, phi_seen, phi_unseen, hyper);

    std::vector<std::size_t> test_rows = split.test_seen;
    test_rows.insert(test_rows.end(), split.test_unseen.begin(), split.test_unseen.end());

    const FeatureMatrix x_test = take_rows(ds.features, test_rows);
    const BatchPrediction batch = predict_batch(model, x_test, PredictMode::gzsl);

    std::vector<int> truth;
    truth.reserve(test_rows.size());
    for (std::size_t i : test_rows) truth.push_back(ds.labels.labels[i]);

    GzslReport report;
    report.hyper = hyper;
    report.seed = seed;
    const auto seen_acc = per_class_accuracy(truth, batch.class_ids, split.seen_classes);
    const auto unseen_acc = per_class_accuracy(truth, batch.class_ids, split.unseen_classes);
    report.per_class_acc = seen_acc;
    report.per_class_acc.insert(unseen_acc.begin(), unseen_acc.end());
    report.seen_acc = mean_of(seen_acc);
    report.unseen_acc = mean_of(unseen_acc);
    report.harmonic = harmonic_mean(report.unseen_acc, report.seen_acc);

    if (outputs) {
        outputs->test_rows = std::move(test_rows);
        outputs->truth = std::move(truth);
        outputs->predicted = batch.class_ids;
        outputs->top_scores = batch.top_scores;
    }
    return report;
}

SplitSpec make_validation_split(const LabelVector& y, const SplitSpec& base,
                                double val_unseen_frac, double val_test_frac,
                                std::uint64_t seed) {
    if (!(val_unseen_frac > 0.0 && val_unseen_frac < 1.0) ||
        !(val_test_frac > 0.0 && val_test_frac < 1.0)) {
        throw DegenerateSplit("validation fractions must be in (0,1)");
    }
    const std::size_t n_seen = base.seen_classes.size();
    if (n_seen < 2) throw DegenerateSplit("need at least 2 seen classes for validation");

    Rng rng = Rng(seed).child("tune");
    std::vector<int> classes = base.seen_classes;
    rng.shuffle(classes);
    std::size_t n_pseudo = static_cast<std::size_t>(
        std::llround(val_unseen_frac * static_cast<double>(n_seen)));
    n_pseudo = std::clamp<std::size_t>(n_pseudo, 1, n_seen - 1);

    SplitSpec val;
    val.unseen_classes.assign(classes.begin(),
                              classes.begin() + static_cast<std::ptrdiff_t>(n_pseudo));
    std::sort(val.unseen_classes.begin(), val.unseen_classes.end());
    val.seen_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_pseudo),
                            classes.end());
    std::sort(val.seen_classes.begin(), val.seen_classes.end());

    std::unordered_map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i : base.train_seen) by_class[y.labels[i]].push_back(i);

    for (int c : val.unseen_classes) {
        for (std::size_t i : by_class[c]) val.test_unseen.push_back(i);
    }
    for (int c : val.seen_classes) {
        auto rows = by_class[c];
        if (rows.empty()) throw DegenerateSplit("validation seen class has no training rows");
        rng.shuffle(rows);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(val_test_frac * static_cast<double>(rows.size())));
        n_test = std::min(n_test, rows.size() - 1);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            (k < n_test ? val.test_seen : val.train_seen).push_back(rows[k]);
        }
    }
    std::sort(val.train_seen.begin(), val.train_seen.end());
    std::sort(val.test_seen.begin(), val.test_seen.end());
    std::sort(val.test_unseen.begin(), val.test_unseen.end());
    return val;
}

std::size_t select_best_report(const std::vector<GzslReport>& reports) {
    if (reports.empty()) throw EmptyGrid("no reports to select from");
    std::size_t best = 0;
    for (std::size_t i = 1; i < reports.size(); ++i) {
        if (reports[i].harmonic > reports[best].harmonic ||
            (reports[i].harmonic == reports[best].harmonic &&
             reports[i].unseen_acc > reports[best].unseen_acc)) {
            best = i;
        }
    }
    return best;
}

std::pair<Hyperparams, std::vector<GzslReport>> tune_grid(const Dataset& ds,
                                                          const SplitSpec& val_split,
                                                          const SideInfoTable& phi,
                                                          const HyperGrid& grid,
                                                          std::uint64_t seed) {
    if (grid.kappa0.empty() || grid.kappa1.empty() || grid.s_scale.empty() ||
        grid.m_mult.empty() || grid.k_neighbors.empty()) {
        throw EmptyGrid("every hyperparameter list must be nonempty");
    }

    std::vector<Hyperparams> cells;
    for (double k0 : grid.kappa0) {
        for (double k1 : grid.kappa1) {
            for (double mm : grid.m_mult) {
                for (double s : grid.s_scale) {
                    for (int k : grid.k_neighbors) {
                        Hyperparams h;
                        h.kappa0 = k0;
                        h.kappa1 = k1;
                        h.m_mult = mm;
                        h.s_scale = s;
                        h.k_neighbors = k;
                        h.pca_dim = grid.pca_dim;
                        cells.push_back(h);
                    }
                }
            }
        }
    }

    std::vector<GzslReport> reports(cells.size());
    // Cells are independent; fit itself parallelizes over classes, so run
    // the grid sequentially into position-indexed slots.
    for (std::size_t i = 0; i < cells.size(); ++i) {
        reports[i] = run_gzsl(ds, val_split, phi, cells[i], seed);
    }

    const std::size_t best = select_best_report(reports);
    return {cells[best], std::move(reports)};
}

namespace {

RunAggregate aggregate(std::vector<GzslReport> runs) {
    RunAggregate agg;
    const double n = static_cast<double>(runs.size());
    for (const auto& r : runs) {
        agg.mean_s += r.seen_acc;
        agg.mean_us += r.unseen_acc;
        agg.mean_h += r.harmonic;
    }
    agg.mean_s /= n;
    agg.mean_us /= n;
    agg.mean_h /= n;
    if (runs.size() > 1) {
        const auto sample_sd = [n](const std::vector<double>& xs, double mean) {
            // Identical repeats (e.g. subsampling at fraction 1.0) report an
            // exact zero rather than mean-subtraction noise.
            bool all_equal = true;
            for (double x : xs) all_equal = all_equal && x == xs.front();
            if (all_equal) return 0.0;
            double v = 0.0;
            for (double x : xs) v += (x - mean) * (x - mean);
            return std::sqrt(v / (n - 1.0));
        };
        std::vector<double> s, us, h;
        for (const auto& r : runs) {
            s.push_back(r.seen_acc);
            us.push_back(r.unseen_acc);
            h.push_back(r.harmonic);
        }
        agg.sd_s = sample_sd(s, agg.mean_s);
        agg.sd_us = sample_sd(us, agg.mean_us);
        agg.sd_h = sample_sd(h, agg.mean_h);
    }
    agg.runs = std::move(runs);
    return agg;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

} // namespace

AblationResult ablate_seen_count(const Dataset& ds, const SplitSpec& split,
                                 const SideInfoTable& phi, const Hyperparams& hyper,
                                 const std::vector<double>& fractions, std::size_t repeats,
                                 std::uint64_t seed) {
    if (fractions.empty()) throw EmptyGrid("fractions list is empty");
    if (repeats < 1) throw EmptyGrid("repeats must be >= 1");
    for (double f : fractions) {
        if (!(f > 0.0 && f <= 1.0)) throw DegenerateSplit("fractions must lie in (0,1]");
    }

    AblationResult result;
    std::uint64_t run_index = 0;
    for (double f : fractions) {
        std::vector<GzslReport> runs;
        for (std::size_t r = 0; r < repeats; ++r, ++run_index) {
            const std::uint64_t child_seed = seed + run_index;
            Rng rng = Rng(child_seed).child("subsample");

            std::vector<int> pool = split.seen_classes;
            std::size_t n_keep = static_cast<std::size_t>(
                std::llround(f * static_cast<double>(pool.size())));
            n_keep = std::clamp<std::size_t>(n_keep, 1, pool.size());
            rng.shuffle(pool);
            pool.resize(n_keep);
            std::sort(pool.begin(), pool.end());
            if (pool.size() < 2 ||
                pool.size() < static_cast<std::size_t>(hyper.k_neighbors)) {
                throw DegenerateSplit("subsampled seen classes too few for K or the prior");
            }

            const std::unordered_set<int> kept(pool.begin(), pool.end());
            SplitSpec sub;
            sub.seen_classes = pool;
            sub.unseen_classes = split.unseen_classes; // fixed across all cells
            for (std::size_t i : split.train_seen) {
                if (kept.count(ds.labels.labels[i])) sub.train_seen.push_back(i);
            }
            for (std::size_t i : split.test_seen) {
                if (kept.count(ds.labels.labels[i])) sub.test_seen.push_back(i);
            }
            sub.test_unseen = split.test_unseen;

            GzslReport rep = run_gzsl(ds, sub, phi, hyper, child_seed);
            rep.axis_label = "fraction=" + format_double(f);
            runs.push_back(std::move(rep));
        }
        result.axis_labels.push_back("fraction=" + format_double(f));
        result.axis_values.push_back(f);
        result.cells.push_back(aggregate(std::move(runs)));
    }
    return result;
}

AblationResult sweep_kappas(const Dataset& ds, const SplitSpec& split,
                            const SideInfoTable& phi, const Hyperparams& hyper_base,
                            const std::vector<double>& kappa0_list,
                            const std::vector<double>& kappa1_list, std::uint64_t seed) {
    if (kappa0_list.empty() || kappa1_list.empty()) {
        throw EmptyGrid("kappa sweep lists must be nonempty");
    }
    AblationResult result;
    for (double k0 : kappa0_list) {
        for (double k1 : kappa1_list) {
            Hyperparams h = hyper_base;
            h.kappa0 = k0;
            h.kappa1 = k1;
            GzslReport rep = run_gzsl(ds, split, phi, h, seed);
            const std::string label =
                "kappa0=" + format_double(k0) + ",kappa1=" + format_double(k1);
            rep.axis_label = label;
            result.axis_labels.push_back(label);
            result.axis_values.push_back(k1);
            result.cells.push_back(aggregate({std::move(rep)}));
        }
    }
    return result;
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t d = spec.dim;
    const Eigen::Index dd = static_cast<Eigen::Index>(d);
    Rng data_rng = Rng(spec.seed).child("synth");

    const double wishart_scale = static_cast<double>(spec.m_gen) - static_cast<double>(d) - 1.0;

    SyntheticData out;
    SyntheticTruth& truth = out.truth;
    const std::size_t n_classes = spec.n_local_priors * spec.classes_per_prior;
    const std::size_t n_samples = n_classes * spec.samples_per_class;

    out.dataset.features = FeatureMatrix(n_samples, d);
    out.dataset.labels.labels.reserve(n_samples);
    out.dataset.sample_ids.reserve(n_samples);

    FeatureMatrix phi_rows(n_classes, d);

    std::size_t row = 0;
    int class_id = 0;
    for (std::size_t j = 0; j < spec.n_local_priors; ++j) {
        // Sigma_j ~ InvWishart(I*(m-D-1), m) via Bartlett, so E[Sigma_j] = I.
        Matrix bartlett = Matrix::Zero(dd, dd);
        for (Eigen::Index i = 0; i < dd; ++i) {
            bartlett(i, i) = std::sqrt(data_rng.chi_squared(spec.m_gen - static_cast<int>(i)));
            for (Eigen::Index k = 0; k < i; ++k) bartlett(i, k) = data_rng.normal();
        }
        const Matrix wishart =
            (bartlett * bartlett.transpose()) / wishart_scale; // Wishart(I/(m-D-1), m)
        const Matrix sigma_j = wishart.llt().solve(Matrix::Identity(dd, dd));
        const Matrix chol_j = Eigen::LLT<Matrix>(sigma_j).matrixL();

        Vector z(dd);
        auto draw = [&](double scale) {
            for (Eigen::Index i = 0; i < dd; ++i) z[i] = data_rng.normal();
            return Vector(chol_j * z * scale);
        };

        const Vector mu_j = draw(1.0 / std::sqrt(spec.kappa0));
        truth.prior_means.push_back(mu_j);
        truth.prior_covs.push_back(sigma_j);

        for (std::size_t c = 0; c < spec.classes_per_prior; ++c, ++class_id) {
            const Vector mu_ji = mu_j + draw(1.0 / std::sqrt(spec.kappa1));
            truth.class_means.push_back(mu_ji);
            truth.prior_of_class.push_back(static_cast<int>(j));

            Vector phi_c = mu_j;
            if (spec.sideinfo_noise > 0.0) {
                for (Eigen::Index i = 0; i < dd; ++i) {
                    phi_c[i] += spec.sideinfo_noise * data_rng.normal();
                }
            }
            for (std::size_t i = 0; i < d; ++i) {
                phi_rows.at(static_cast<std::size_t>(class_id), i) =
                    phi_c[static_cast<Eigen::Index>(i)];
            }

            char name[32];
            std::snprintf(name, sizeof(name), "class_%04d", class_id);
            out.dataset.labels.class_names.emplace_back(name);

            for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
                const Vector x = mu_ji + draw(1.0);
                for (std::size_t i = 0; i < d; ++i) {
                    out.dataset.features.at(row, i) = x[static_cast<Eigen::Index>(i)];
                }
                out.dataset.labels.labels.push_back(class_id);
                char sid[32];
                std::snprintf(sid, sizeof(sid), "s%06zu", row);
                out.dataset.sample_ids.emplace_back(sid);
            }
        }
    }

    out.phi.source_tag = SideInfoSource::dna_external;
    out.phi.vectors = std::move(phi_rows);
    for (int c = 0; c < static_cast<int>(n_classes); ++c) out.phi.class_ids.push_back(c);

    // One unseen class per local prior.
    Rng unseen_rng = Rng(spec.seed).child("unseen");
    std::vector<char> is_unseen(n_classes, 0);
    for (std::size_t j = 0; j < spec.n_local_priors; ++j) {
        const std::size_t pick = static_cast<std::size_t>(unseen_rng.below(spec.classes_per_prior));
        is_unseen[j * spec.classes_per_prior + pick] = 1;
    }

    Rng split_rng = Rng(spec.seed).child("split");
    SplitSpec& split = out.split;
    for (std::size_t c = 0; c < n_classes; ++c) {
        (is_unseen[c] ? split.unseen_classes : split.seen_classes).push_back(static_cast<int>(c));
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
        std::vector<std::size_t> rows(spec.samples_per_class);
        for (std::size_t s = 0; s < spec.samples_per_class; ++s) {
            rows[s] = c * spec.samples_per_class + s;
        }
        if (is_unseen[c]) {
            for (std::size_t i : rows) split.test_unseen.push_back(i);
            continue;
        }
        split_rng.shuffle(rows);
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(spec.seen_test_frac * static_cast<double>(rows.size())));
        n_test = std::min(n_test, rows.size() - 1);
        for (std::size_t k = 0; k < rows.size(); ++k) {
            (k < n_test ? split.test_seen : split.train_seen).push_back(rows[k]);
        }
    }
    std::sort(split.train_seen.begin(), split.train_seen.end());
    std::sort(split.test_seen.begin(), split.test_seen.end());
    std::sort(split.test_unseen.begin(), split.test_unseen.end());
    return out;
}

namespace {

void write_report_row(std::ofstream& os, const GzslReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%g,%g,%g,%g,%d,%s,%llu,%.6f,%.6f,%.6f",
                  r.hyper.kappa0, r.hyper.kappa1, r.hyper.m_mult, r.hyper.s_scale,
                  r.hyper.k_neighbors,
                  r.hyper.pca_dim ? std::to_string(*r.hyper.pca_dim).c_str() : "none",
                  static_cast<unsigned long long>(r.seed), r.seen_acc, r.unseen_acc,
                  r.harmonic);
    os << r.axis_label << ',' << buf << '\n';
}

} // namespace

void write_reports_csv(const std::vector<GzslReport>& reports, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "axis,kappa0,kappa1,m_mult,s,k_neighbors,pca_dim,seed,S,US,H\n";
    for (const auto& r : reports) write_report_row(os, r);
    if (!os) throw IoError("write failed: " + path);
}

void write_aggregate_csv(const AblationResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << "axis,repeats,mean_S,sd_S,mean_US,sd_US,mean_H,sd_H\n";
    char buf[256];
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const RunAggregate& c = result.cells[i];
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f", c.runs.size(),
                      c.mean_s, c.sd_s, c.mean_us, c.sd_us, c.mean_h, c.sd_h);
        os << result.axis_labels[i] << ',' << buf << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

void write_summary_text(const AblationResult& result, const std::string& title,
                        const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << title << '\n';
    char buf[256];
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const RunAggregate& c = result.cells[i];
        std::snprintf(buf, sizeof(buf),
                      "  %-32s S=%.4f+-%.4f  US=%.4f+-%.4f  H=%.4f+-%.4f  (n=%zu)",
                      result.axis_labels[i].c_str(), c.mean_s, c.sd_s, c.mean_us, c.sd_us,
                      c.mean_h, c.sd_h, c.runs.size());
        os << buf << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

} // namespace bzsl
