#include "bzsl/datastore.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "bzsl/binio.hpp"
#include "bzsl/parallel.hpp"
#include "bzsl/rng.hpp"

namespace bzsl {

namespace {

constexpr char kMatMagic[9] = "BZSLMAT1";

std::ifstream open_input(const std::string& path, bool binary) {
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw IoError("cannot open for reading: " + path);
    return is;
}

std::ofstream open_output(const std::string& path, bool binary) {
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

double parse_cell(const std::string& cell, std::size_t line_no) {
    const char* begin = cell.data();
    const char* end = begin + cell.size();
    while (begin != end && (*begin == ' ' || *begin == '\t')) ++begin;
    while (end != begin && (end[-1] == ' ' || end[-1] == '\t' || end[-1] == '\r')) --end;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(begin, end, v);
    if (ec != std::errc() || ptr != end || begin == end) {
        throw FormatError("non-numeric cell '" + cell + "' at line " + std::to_string(line_no));
    }
    if (!std::isfinite(v)) {
        throw NonFiniteValue("non-finite value at line " + std::to_string(line_no));
    }
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') {
        out.back().pop_back();
    }
    return out;
}

FeatureMatrix load_csv_matrix(const std::string& path) {
    std::ifstream is = open_input(path, false);
    std::vector<double> values;
    std::size_t rows = 0, cols = 0, line_no = 0;
    std::string line;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto cells = split_csv_line(line);
        if (rows == 0) {
            cols = cells.size();
        } else if (cells.size() != cols) {
            throw FormatError("row " + std::to_string(line_no) + " has " +
                              std::to_string(cells.size()) + " cells, expected " +
                              std::to_string(cols));
        }
        for (const auto& cell : cells) values.push_back(parse_cell(cell, line_no));
        ++rows;
    }
    if (rows == 0 || cols == 0) throw FormatError("empty matrix file: " + path);
    FeatureMatrix m(rows, cols);
    m.values = std::move(values);
    return m;
}

FeatureMatrix load_bmat_matrix(const std::string& path) {
    std::ifstream is = open_input(path, true);
    io::expect_magic(is, kMatMagic, path);
    const std::uint64_t rows = io::read_u64(is);
    const std::uint64_t cols = io::read_u64(is);
    if (rows == 0 || cols == 0 || rows > (1ULL << 40) || cols > (1ULL << 40)) {
        throw FormatError("implausible dimensions in " + path);
    }
    FeatureMatrix m(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols));
    for (double& v : m.values) {
        v = io::read_f64(is);
        if (!std::isfinite(v)) throw NonFiniteValue("non-finite value in " + path);
    }
    char extra;
    if (is.read(&extra, 1)) throw FormatError("trailing bytes in " + path);
    return m;
}

} // namespace

FeatureMatrix load_matrix(const std::string& path, MatrixFormat format) {
    return format == MatrixFormat::csv ? load_csv_matrix(path) : load_bmat_matrix(path);
}

void save_matrix(const FeatureMatrix& m, const std::string& path, MatrixFormat format) {
    std::ofstream os = open_output(path, format == MatrixFormat::bmat);
    if (format == MatrixFormat::bmat) {
        io::write_magic(os, kMatMagic);
        io::write_u64(os, m.n_rows);
        io::write_u64(os, m.n_cols);
        for (double v : m.values) io::write_f64(os, v);
    } else {
        char buf[64];
        for (std::size_t i = 0; i < m.n_rows; ++i) {
            for (std::size_t j = 0; j < m.n_cols; ++j) {
                std::snprintf(buf, sizeof(buf), "%.17g", m.at(i, j));
                if (j) os << ',';
                os << buf;
            }
            os << '\n';
        }
    }
    if (!os) throw IoError("write failed: " + path);
}

LabeledSamples load_labels(const std::string& path) {
    std::ifstream is = open_input(path, false);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty label file: " + path);
    const auto header = split_csv_line(line);
    const bool has_groups = header.size() == 3 && header[2] == "group_id";
    if (!(header.size() == 2 || has_groups) || header[0] != "sample_id" ||
        header[1] != "class_name") {
        throw FormatError("label file header must be sample_id,class_name[,group_id]");
    }

    LabeledSamples out;
    std::unordered_map<std::string, int> class_ids;
    std::unordered_map<std::string, int> group_ids;
    std::unordered_set<std::string> seen_samples;
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw FormatError("label row " + std::to_string(line_no) +
                              " has wrong number of columns");
        }
        if (!seen_samples.insert(cells[0]).second) {
            throw FormatError("duplicate sample_id '" + cells[0] + "' in " + path);
        }
        out.sample_ids.push_back(cells[0]);
        auto [it, inserted] = class_ids.emplace(cells[1], static_cast<int>(class_ids.size()));
        if (inserted) out.labels.class_names.push_back(cells[1]);
        out.labels.labels.push_back(it->second);
        if (has_groups) {
            auto [git, ginserted] = group_ids.emplace(cells[2], static_cast<int>(group_ids.size()));
            (void)ginserted;
            out.group_ids.push_back(git->second);
        }
    }
    if (out.sample_ids.empty()) throw FormatError("label file has no data rows: " + path);
    return out;
}

void save_labels(const LabeledSamples& ls, const std::string& path) {
    std::ofstream os = open_output(path, false);
    const bool has_groups = !ls.group_ids.empty();
    os << (has_groups ? "sample_id,class_name,group_id\n" : "sample_id,class_name\n");
    for (std::size_t i = 0; i < ls.sample_ids.size(); ++i) {
        os << ls.sample_ids[i] << ',' << ls.labels.class_names[ls.labels.labels[i]];
        if (has_groups) os << ",g" << ls.group_ids[i];
        os << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

Dataset load_dataset(const std::string& features_path, MatrixFormat format,
                     const std::string& labels_path) {
    Dataset ds;
    ds.features = load_matrix(features_path, format);
    LabeledSamples ls = load_labels(labels_path);
    if (ls.sample_ids.size() != ds.features.n_rows) {
        throw FormatError("label file has " + std::to_string(ls.sample_ids.size()) +
                          " rows but feature matrix has " + std::to_string(ds.features.n_rows));
    }
    ds.labels = std::move(ls.labels);
    ds.sample_ids = std::move(ls.sample_ids);
    ds.group_ids = std::move(ls.group_ids);
    return ds;
}

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace

SplitSpec load_split(const std::string& path, const Dataset& ds) {
    std::ifstream is = open_input(path, false);
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty split file: " + path);
    const auto header = split_csv_line(line);
    if (header.size() != 2 || header[0] != "sample_id" || header[1] != "partition") {
        throw FormatError("split file header must be sample_id,partition");
    }
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < ds.sample_ids.size(); ++i) row_of[ds.sample_ids[i]] = i;

    SplitSpec split;
    std::vector<char> assigned(ds.sample_ids.size(), 0);
    std::size_t line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty() || (line.size() == 1 && line[0] == '\r')) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != 2) {
            throw FormatError("split row " + std::to_string(line_no) + " malformed");
        }
        const auto it = row_of.find(cells[0]);
        if (it == row_of.end()) {
            throw FormatError("split references unknown sample_id '" + cells[0] + "'");
        }
        if (assigned[it->second]) {
            throw FormatError("sample_id '" + cells[0] + "' assigned twice in split");
        }
        assigned[it->second] = 1;
        if (cells[1] == "train_seen") {
            split.train_seen.push_back(it->second);
        } else if (cells[1] == "test_seen") {
            split.test_seen.push_back(it->second);
        } else if (cells[1] == "test_unseen") {
            split.test_unseen.push_back(it->second);
        } else {
            throw FormatError("unknown partition '" + cells[1] + "' at line " +
                              std::to_string(line_no));
        }
    }

    std::vector<int> seen, unseen;
    for (std::size_t i : split.train_seen) seen.push_back(ds.labels.labels[i]);
    for (std::size_t i : split.test_seen) seen.push_back(ds.labels.labels[i]);
    for (std::size_t i : split.test_unseen) unseen.push_back(ds.labels.labels[i]);
    split.seen_classes = sorted_unique(std::move(seen));
    split.unseen_classes = sorted_unique(std::move(unseen));
    for (int c : split.unseen_classes) {
        if (std::binary_search(split.seen_classes.begin(), split.seen_classes.end(), c)) {
            throw FormatError("class '" + ds.labels.class_names[c] +
                              "' appears in both seen and unseen partitions");
        }
    }
    return split;
}

void save_split(const SplitSpec& split, const std::vector<std::string>& sample_ids,
                const std::string& path) {
    std::vector<const char*> partition(sample_ids.size(), nullptr);
    for (std::size_t i : split.train_seen) partition[i] = "train_seen";
    for (std::size_t i : split.test_seen) partition[i] = "test_seen";
    for (std::size_t i : split.test_unseen) partition[i] = "test_unseen";
    std::ofstream os = open_output(path, false);
    os << "sample_id,partition\n";
    for (std::size_t i = 0; i < sample_ids.size(); ++i) {
        if (partition[i]) os << sample_ids[i] << ',' << partition[i] << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

std::vector<ClassStats> compute_class_stats(const FeatureMatrix& x, const LabelVector& y,
                                            const std::vector<int>& class_ids) {
    if (x.n_rows != y.size()) {
        throw DimensionMismatch("feature matrix rows and label count differ");
    }
    std::vector<std::vector<std::size_t>> members(class_ids.size());
    std::unordered_map<int, std::size_t> slot;
    for (std::size_t k = 0; k < class_ids.size(); ++k) slot[class_ids[k]] = k;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const auto it = slot.find(y.labels[i]);
        if (it != slot.end()) members[it->second].push_back(i);
    }
    for (std::size_t k = 0; k < class_ids.size(); ++k) {
        if (members[k].empty()) {
            throw EmptyClass("class id " + std::to_string(class_ids[k]) +
                             " has no samples");
        }
    }

    const std::size_t d = x.n_cols;
    std::vector<ClassStats> stats(class_ids.size());
    parallel_for(class_ids.size(), [&](std::size_t k) {
        ClassStats cs;
        cs.class_id = class_ids[k];
        cs.count = members[k].size();
        Vector mean = Vector::Zero(static_cast<Eigen::Index>(d));
        for (std::size_t i : members[k]) mean += x.row(i);
        mean /= static_cast<double>(cs.count);
        cs.mean = mean;
        cs.scatter = SymMatrix(d);
        for (std::size_t i : members[k]) {
            cs.scatter.add_outer(x.row(i) - mean);
        }
        stats[k] = std::move(cs);
    });
    return stats;
}

SplitSpec make_split(const LabelVector& y, double unseen_frac, double seen_test_frac,
                     const std::vector<int>& group_ids, std::uint64_t seed) {
    if (!(unseen_frac > 0.0 && unseen_frac < 1.0)) {
        throw DegenerateSplit("unseen_frac must be in (0,1)");
    }
    if (!(seen_test_frac > 0.0 && seen_test_frac < 1.0)) {
        throw DegenerateSplit("seen_test_frac must be in (0,1)");
    }
    if (!group_ids.empty() && group_ids.size() != y.size()) {
        throw DimensionMismatch("group_ids length does not match label count");
    }
    const int n_classes = y.n_classes();
    if (n_classes < 2) throw DegenerateSplit("need at least 2 classes to split");

    // Groups may not straddle classes, otherwise the group-cohesion rule is
    // unsatisfiable.
    std::unordered_map<int, int> group_class;
    std::unordered_map<int, std::size_t> group_size;
    if (!group_ids.empty()) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            ++group_size[group_ids[i]];
            auto [it, inserted] = group_class.emplace(group_ids[i], y.labels[i]);
            if (!inserted && it->second != y.labels[i]) {
                throw DegenerateSplit("group id spans multiple classes");
            }
        }
    }

    Rng rng = Rng(seed).child("split");
    std::vector<int> classes(static_cast<std::size_t>(n_classes));
    for (int c = 0; c < n_classes; ++c) classes[static_cast<std::size_t>(c)] = c;
    rng.shuffle(classes);

    std::size_t n_unseen =
        static_cast<std::size_t>(std::llround(unseen_frac * static_cast<double>(n_classes)));
    n_unseen = std::clamp<std::size_t>(n_unseen, 1, static_cast<std::size_t>(n_classes) - 1);

    SplitSpec split;
    split.unseen_classes.assign(classes.begin(),
                                classes.begin() + static_cast<std::ptrdiff_t>(n_unseen));
    std::sort(split.unseen_classes.begin(), split.unseen_classes.end());
    split.seen_classes.assign(classes.begin() + static_cast<std::ptrdiff_t>(n_unseen),
                              classes.end());
    std::sort(split.seen_classes.begin(), split.seen_classes.end());

    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < y.size(); ++i) {
        by_class[static_cast<std::size_t>(y.labels[i])].push_back(i);
    }

    for (int c : split.unseen_classes) {
        for (std::size_t i : by_class[static_cast<std::size_t>(c)]) {
            split.test_unseen.push_back(i);
        }
    }

    for (int c : split.seen_classes) {
        const auto& rows = by_class[static_cast<std::size_t>(c)];
        if (rows.empty()) throw DegenerateSplit("seen class has no samples");
        std::vector<std::size_t> forced, pool;
        for (std::size_t i : rows) {
            if (!group_ids.empty() && group_size[group_ids[i]] > 1) {
                forced.push_back(i);
            } else {
                pool.push_back(i);
            }
        }
        std::size_t n_test = static_cast<std::size_t>(
            std::llround(seen_test_frac * static_cast<double>(rows.size())));
        n_test = std::min(n_test, rows.size() - 1);
        n_test = std::min(n_test, pool.size());
        rng.shuffle(pool);
        for (std::size_t k = 0; k < pool.size(); ++k) {
            (k < n_test ? split.test_seen : split.train_seen).push_back(pool[k]);
        }
        for (std::size_t i : forced) split.train_seen.push_back(i);
    }

    std::sort(split.train_seen.begin(), split.train_seen.end());
    std::sort(split.test_seen.begin(), split.test_seen.end());
    std::sort(split.test_unseen.begin(), split.test_unseen.end());
    return split;
}

PcaModel pca_fit(const FeatureMatrix& x, std::size_t out_dim) {
    if (out_dim == 0 || out_dim > std::min(x.n_rows, x.n_cols)) {
        throw DimensionError("pca out_dim must satisfy 1 <= d <= min(N, D)");
    }
    const auto X = x.as_eigen();
    PcaModel model;
    model.out_dim = out_dim;
    model.mean = X.colwise().mean().transpose();

    Matrix centered = X.rowwise() - model.mean.transpose();
    const double denom = x.n_rows > 1 ? static_cast<double>(x.n_rows - 1) : 1.0;
    Matrix cov = (centered.transpose() * centered) / denom;

    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
    if (solver.info() != Eigen::Success) {
        throw DimensionError("pca eigendecomposition failed");
    }
    // Eigenvalues come back ascending; take the trailing out_dim columns.
    model.basis.resize(static_cast<Eigen::Index>(x.n_cols),
                       static_cast<Eigen::Index>(out_dim));
    const Eigen::Index d = static_cast<Eigen::Index>(x.n_cols);
    for (std::size_t k = 0; k < out_dim; ++k) {
        Vector v = solver.eigenvectors().col(d - 1 - static_cast<Eigen::Index>(k));
        // Deterministic sign: largest-magnitude component positive.
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v[imax] < 0.0) v = -v;
        model.basis.col(static_cast<Eigen::Index>(k)) = v;
    }
    return model;
}

FeatureMatrix pca_apply(const PcaModel& model, const FeatureMatrix& x) {
    if (static_cast<Eigen::Index>(x.n_cols) != model.basis.rows()) {
        throw DimensionError("pca_apply: feature dimension does not match model");
    }
    Matrix projected =
        (x.as_eigen().rowwise() - model.mean.transpose()) * model.basis;
    FeatureMatrix out(x.n_rows, model.out_dim);
    for (std::size_t i = 0; i < out.n_rows; ++i) {
        for (std::size_t j = 0; j < out.n_cols; ++j) {
            out.at(i, j) = projected(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(j));
        }
    }
    return out;
}

FeatureMatrix take_rows(const FeatureMatrix& x, const std::vector<std::size_t>& indices) {
    FeatureMatrix out(indices.size(), x.n_cols);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const double* src = x.values.data() + indices[k] * x.n_cols;
        std::copy(src, src + x.n_cols, out.values.data() + k * x.n_cols);
    }
    return out;
}

} // namespace bzsl
