#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bzsl/numkernel.hpp"

namespace bzsl {

// Row-major N x D matrix of per-sample feature vectors.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> values; // row-major, n_rows * n_cols

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t rows, std::size_t cols)
        : n_rows(rows), n_cols(cols), values(rows * cols, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return values[i * n_cols + j]; }
    double at(std::size_t i, std::size_t j) const { return values[i * n_cols + j]; }

    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>
    as_eigen() const {
        return {values.data(), static_cast<Eigen::Index>(n_rows),
                static_cast<Eigen::Index>(n_cols)};
    }

    Vector row(std::size_t i) const {
        return Eigen::Map<const Vector>(values.data() + i * n_cols,
                                        static_cast<Eigen::Index>(n_cols));
    }
};

// Per-sample class ids (dense nonnegative integers, assigned by first
// appearance in the label file) plus the id -> name table for reporting.
struct LabelVector {
    std::vector<int> labels;
    std::vector<std::string> class_names; // indexed by class id

    std::size_t size() const { return labels.size(); }
    int n_classes() const { return static_cast<int>(class_names.size()); }
};

// A loaded dataset: features, labels, sample ids, optional group ids
// (dense integers; empty vector when the label file has no group column).
struct Dataset {
    FeatureMatrix features;
    LabelVector labels;
    std::vector<std::string> sample_ids;
    std::vector<int> group_ids;

    bool has_groups() const { return !group_ids.empty(); }
};

struct SplitSpec {
    std::vector<std::size_t> train_seen;
    std::vector<std::size_t> test_seen;
    std::vector<std::size_t> test_unseen;
    std::vector<int> seen_classes;   // sorted ascending
    std::vector<int> unseen_classes; // sorted ascending
};

// Per-class sufficient statistics: mean, scatter (sum of centered outer
// products) and sample count.
struct ClassStats {
    int class_id = -1;
    Vector mean;
    SymMatrix scatter;
    std::size_t count = 0;
};

struct PcaModel {
    Vector mean;
    Matrix basis; // D x d, orthonormal columns
    std::size_t out_dim = 0;
};

enum class MatrixFormat { csv, bmat };

FeatureMatrix load_matrix(const std::string& path, MatrixFormat format);
void save_matrix(const FeatureMatrix& m, const std::string& path, MatrixFormat format);

// Label file: CSV with header "sample_id,class_name[,group_id]".
struct LabeledSamples {
    std::vector<std::string> sample_ids;
    LabelVector labels;
    std::vector<int> group_ids; // empty if no group column
};
LabeledSamples load_labels(const std::string& path);
void save_labels(const LabeledSamples& ls, const std::string& path);

Dataset load_dataset(const std::string& features_path, MatrixFormat format,
                     const std::string& labels_path);

// Split file: CSV with header "sample_id,partition".
SplitSpec load_split(const std::string& path, const Dataset& ds);
void save_split(const SplitSpec& split, const std::vector<std::string>& sample_ids,
                const std::string& path);

std::vector<ClassStats> compute_class_stats(const FeatureMatrix& x, const LabelVector& y,
                                            const std::vector<int>& class_ids);

// Random class-stratified GZSL split. A fraction of classes become unseen
// (all their samples in test_unseen); remaining classes split per-class by
// seen_test_frac. When group ids are given, samples sharing a group id with
// at least one other sample are all kept in train_seen.
SplitSpec make_split(const LabelVector& y, double unseen_frac, double seen_test_frac,
                     const std::vector<int>& group_ids, std::uint64_t seed);

PcaModel pca_fit(const FeatureMatrix& x, std::size_t out_dim);
FeatureMatrix pca_apply(const PcaModel& model, const FeatureMatrix& x);

FeatureMatrix take_rows(const FeatureMatrix& x, const std::vector<std::size_t>& indices);

} // namespace bzsl
