#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bzsl/bzslcore.hpp"

namespace bzsl {

// GZSL metrics for one configuration. Accuracies are macro-averaged over
// classes with at least one test sample.
struct GzslReport {
    std::map<int, double> per_class_acc;
    double seen_acc = 0.0;    // S
    double unseen_acc = 0.0;  // US
    double harmonic = 0.0;    // H
    Hyperparams hyper;
    std::uint64_t seed = 0;
    std::string axis_label; // set by sweeps/ablations for reporting
};

// Generative constants for the synthetic two-layer hierarchy.
struct SyntheticSpec {
    std::size_t n_local_priors = 10;
    std::size_t classes_per_prior = 3;
    std::size_t samples_per_class = 50;
    std::size_t dim = 10;
    double kappa0 = 0.05;
    double kappa1 = 0.3;
    int m_gen = 15;
    double sideinfo_noise = 0.0;
    std::uint64_t seed = 0;
    double seen_test_frac = 0.2;

    void validate() const;
};

// Ground truth latents kept for verification.
struct SyntheticTruth {
    std::vector<int> prior_of_class;
    std::vector<Vector> class_means;  // mu_ji
    std::vector<Vector> prior_means;  // mu_j
    std::vector<Matrix> prior_covs;   // Sigma_j
};

struct SyntheticData {
    Dataset dataset;
    SplitSpec split;
    SideInfoTable phi; // all classes, ascending id
    SyntheticTruth truth;
};

struct RunAggregate {
    double mean_s = 0.0, sd_s = 0.0;
    double mean_us = 0.0, sd_us = 0.0;
    double mean_h = 0.0, sd_h = 0.0;
    std::vector<GzslReport> runs;
};

struct AblationResult {
    std::vector<std::string> axis_labels;
    std::vector<double> axis_values;
    std::vector<RunAggregate> cells;
};

struct HyperGrid {
    std::vector<double> kappa0{0.01, 0.1, 1.0, 10.0};
    std::vector<double> kappa1{0.1, 1.0, 10.0, 25.0};
    std::vector<double> s_scale{0.1, 0.5, 1.0, 5.0};
    std::vector<double> m_mult{1.0, 5.0, 25.0, 100.0};
    std::vector<int> k_neighbors{1, 2, 3, 5};
    std::optional<std::size_t> pca_dim;
};

std::map<int, double> per_class_accuracy(const std::vector<int>& truth,
                                         const std::vector<int>& predicted,
                                         const std::vector<int>& class_set);

double harmonic_mean(double us, double s);

// Fits on train_seen, scores test_seen + test_unseen in GZSL mode, returns
// macro metrics. Optionally hands back per-sample predictions.
struct RunOutputs {
    std::vector<std::size_t> test_rows;
    std::vector<int> truth;
    std::vector<int> predicted;
    std::vector<double> top_scores;
};
GzslReport run_gzsl(const Dataset& ds, const SplitSpec& split, const SideInfoTable& phi,
                    const Hyperparams& hyper, std::uint64_t seed,
                    RunOutputs* outputs = nullptr);

// Nested validation split: a fraction of the seen classes become
// pseudo-unseen (their training rows form the validation unseen test set);
// remaining training rows split per class into fit/validation portions.
SplitSpec make_validation_split(const LabelVector& y, const SplitSpec& base,
                                double val_unseen_frac, double val_test_frac,
                                std::uint64_t seed);

// Selection rule shared by tune_grid: argmax H, ties to higher US, then to
// the earlier (lexicographically first) configuration.
std::size_t select_best_report(const std::vector<GzslReport>& reports);

// Exhaustive grid search maximizing validation H; ties break to higher US,
// then to the earlier configuration in lexicographic grid order.
std::pair<Hyperparams, std::vector<GzslReport>> tune_grid(const Dataset& ds,
                                                          const SplitSpec& val_split,
                                                          const SideInfoTable& phi,
                                                          const HyperGrid& grid,
                                                          std::uint64_t seed);

// Subsamples each fraction of the seen classes (unseen classes untouched)
// `repeats` times with child seeds seed + run index.
AblationResult ablate_seen_count(const Dataset& ds, const SplitSpec& split,
                                 const SideInfoTable& phi, const Hyperparams& hyper,
                                 const std::vector<double>& fractions, std::size_t repeats,
                                 std::uint64_t seed);

// Full factorial kappa0 x kappa1 sweep with other hyperparameters fixed.
AblationResult sweep_kappas(const Dataset& ds, const SplitSpec& split,
                            const SideInfoTable& phi, const Hyperparams& hyper_base,
                            const std::vector<double>& kappa0_list,
                            const std::vector<double>& kappa1_list, std::uint64_t seed);

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Report files: per-run CSV, per-cell aggregate CSV, and a text summary.
void write_reports_csv(const std::vector<GzslReport>& reports, const std::string& path);
void write_aggregate_csv(const AblationResult& result, const std::string& path);
void write_summary_text(const AblationResult& result, const std::string& title,
                        const std::string& path);

} // namespace bzsl
