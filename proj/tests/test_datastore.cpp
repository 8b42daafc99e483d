#include <doctest.h>

#include <cstring>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "bzsl/datastore.hpp"
#include "bzsl/rng.hpp"
#include "test_support.hpp"

using namespace bzsl;

TEST_CASE("csv matrix parsing") {
    TempDir dir("csvmat");
    dir.write("m.csv", "1.0,2.0\n3.0,4.0\n");
    const FeatureMatrix m = load_matrix(dir.file("m.csv"), MatrixFormat::csv);
    CHECK(m.n_rows == 2);
    CHECK(m.n_cols == 2);
    CHECK(m.at(0, 0) == 1.0);
    CHECK(m.at(1, 1) == 4.0);

    dir.write("nan.csv", "1.0,nan\n");
    CHECK_THROWS_AS(load_matrix(dir.file("nan.csv"), MatrixFormat::csv), NonFiniteValue);

    dir.write("bad.csv", "1.0,x\n");
    CHECK_THROWS_AS(load_matrix(dir.file("bad.csv"), MatrixFormat::csv), FormatError);

    dir.write("ragged.csv", "1.0,2.0\n3.0\n");
    CHECK_THROWS_AS(load_matrix(dir.file("ragged.csv"), MatrixFormat::csv), FormatError);

    CHECK_THROWS_AS(load_matrix(dir.file("missing.csv"), MatrixFormat::csv), IoError);
}

TEST_CASE("bmat format and bit-exact round trip") {
    TempDir dir("bmat");
    std::mt19937_64 gen(23);
    std::normal_distribution<double> normal(0.0, 10.0);
    FeatureMatrix m(3, 2);
    for (double& v : m.values) v = normal(gen);
    m.at(1, 1) = -0.0;

    const std::string path = dir.file("m.bmat");
    save_matrix(m, path, MatrixFormat::bmat);
    const FeatureMatrix back = load_matrix(path, MatrixFormat::bmat);
    CHECK(back.n_rows == m.n_rows);
    CHECK(back.n_cols == m.n_cols);
    CHECK(std::memcmp(back.values.data(), m.values.data(),
                      m.values.size() * sizeof(double)) == 0);

    dir.write("badmagic.bmat", "NOTMAGIC########");
    CHECK_THROWS_AS(load_matrix(dir.file("badmagic.bmat"), MatrixFormat::bmat), FormatError);

    // Truncate the payload.
    {
        std::ifstream is(path, std::ios::binary);
        std::string contents((std::istreambuf_iterator<char>(is)),
                             std::istreambuf_iterator<char>());
        dir.write("short.bmat", contents.substr(0, contents.size() - 4));
    }
    CHECK_THROWS_AS(load_matrix(dir.file("short.bmat"), MatrixFormat::bmat), FormatError);
}

TEST_CASE("csv save/load round trip") {
    TempDir dir("csvrt");
    std::mt19937_64 gen(29);
    std::normal_distribution<double> normal(0.0, 100.0);
    FeatureMatrix m(4, 3);
    for (double& v : m.values) v = normal(gen);
    save_matrix(m, dir.file("m.csv"), MatrixFormat::csv);
    const FeatureMatrix back = load_matrix(dir.file("m.csv"), MatrixFormat::csv);
    CHECK(back.values == m.values); // %.17g round-trips doubles exactly
}

TEST_CASE("label file parsing assigns dense ids by first appearance") {
    TempDir dir("labels");
    dir.write("l.csv", "sample_id,class_name\ns1,beetle\ns2,wasp\ns3,beetle\n");
    const LabeledSamples ls = load_labels(dir.file("l.csv"));
    CHECK(ls.sample_ids == std::vector<std::string>{"s1", "s2", "s3"});
    CHECK(ls.labels.labels == std::vector<int>{0, 1, 0});
    CHECK(ls.labels.class_names == std::vector<std::string>{"beetle", "wasp"});
    CHECK(ls.group_ids.empty());

    dir.write("g.csv", "sample_id,class_name,group_id\ns1,a,g1\ns2,a,g1\ns3,b,g2\n");
    const LabeledSamples gs = load_labels(dir.file("g.csv"));
    CHECK(gs.group_ids == std::vector<int>{0, 0, 1});

    dir.write("badhdr.csv", "id,name\ns1,a\n");
    CHECK_THROWS_AS(load_labels(dir.file("badhdr.csv")), FormatError);

    dir.write("dup.csv", "sample_id,class_name\ns1,a\ns1,b\n");
    CHECK_THROWS_AS(load_labels(dir.file("dup.csv")), FormatError);
}

TEST_CASE("compute_class_stats hand examples") {
    FeatureMatrix x(3, 2);
    x.at(0, 0) = 0.0;
    x.at(0, 1) = 0.0;
    x.at(1, 0) = 2.0;
    x.at(1, 1) = 0.0;
    x.at(2, 0) = 5.0;
    x.at(2, 1) = 5.0;
    LabelVector y;
    y.labels = {0, 0, 1};
    y.class_names = {"a", "b"};

    const auto stats = compute_class_stats(x, y, {0, 1});
    CHECK(stats[0].count == 2);
    CHECK(stats[0].mean[0] == doctest::Approx(1.0));
    CHECK(stats[0].mean[1] == doctest::Approx(0.0));
    CHECK(stats[0].scatter(0, 0) == doctest::Approx(2.0));
    CHECK(stats[0].scatter(0, 1) == doctest::Approx(0.0));
    CHECK(stats[0].scatter(1, 1) == doctest::Approx(0.0));

    // Single sample: zero scatter.
    CHECK(stats[1].count == 1);
    CHECK(stats[1].mean[0] == doctest::Approx(5.0));
    CHECK(stats[1].scatter(0, 0) == 0.0);
    CHECK(stats[1].scatter(1, 1) == 0.0);

    CHECK_THROWS_AS(compute_class_stats(x, y, {0, 1, 7}), EmptyClass);
}

TEST_CASE("duplicated rows give zero scatter") {
    FeatureMatrix x(3, 2);
    for (int i = 0; i < 3; ++i) {
        x.at(i, 0) = 1.0;
        x.at(i, 1) = 1.0;
    }
    LabelVector y;
    y.labels = {0, 0, 0};
    y.class_names = {"a"};
    const auto stats = compute_class_stats(x, y, {0});
    CHECK(stats[0].count == 3);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t j = 0; j < 2; ++j) CHECK(stats[0].scatter(i, j) == 0.0);
    }
}

TEST_CASE("class stats match the parallel-merge formula") {
    std::mt19937_64 gen(31);
    std::normal_distribution<double> normal(0.0, 2.0);
    const std::size_t d = 5, na = 7, nb = 12;
    FeatureMatrix x(na + nb, d);
    for (double& v : x.values) v = normal(gen);
    LabelVector y;
    y.class_names = {"a", "b", "u"};
    // Two disjoint sample sets of the same class (labelled apart), plus the union.
    for (std::size_t i = 0; i < na; ++i) y.labels.push_back(0);
    for (std::size_t i = 0; i < nb; ++i) y.labels.push_back(1);
    const auto parts = compute_class_stats(x, y, {0, 1});

    LabelVector yu;
    yu.class_names = {"u"};
    yu.labels.assign(na + nb, 0);
    const auto whole = compute_class_stats(x, yu, {0})[0];

    const auto& a = parts[0];
    const auto& b = parts[1];
    const double n = static_cast<double>(a.count + b.count);
    const Vector mean =
        (static_cast<double>(a.count) * a.mean + static_cast<double>(b.count) * b.mean) / n;
    SymMatrix merged(d);
    merged.add_scaled(a.scatter);
    merged.add_scaled(b.scatter);
    merged.add_outer(a.mean - b.mean,
                     static_cast<double>(a.count) * static_cast<double>(b.count) / n);

    CHECK((whole.mean - mean).norm() <= 1e-9);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            CHECK(whole.scatter(i, j) == doctest::Approx(merged(i, j)).epsilon(1e-9));
        }
    }
}

namespace {

LabelVector balanced_labels(int n_classes, int per_class) {
    LabelVector y;
    for (int c = 0; c < n_classes; ++c) {
        y.class_names.push_back("c" + std::to_string(c));
        for (int i = 0; i < per_class; ++i) y.labels.push_back(c);
    }
    return y;
}

} // namespace

TEST_CASE("make_split basic contract") {
    const LabelVector y = balanced_labels(10, 10);
    const SplitSpec split = make_split(y, 0.1, 0.2, {}, 42);
    CHECK(split.unseen_classes.size() == 1);
    CHECK(split.seen_classes.size() == 9);
    CHECK(split.test_unseen.size() == 10);
    // Stratified 8/2 per seen class.
    CHECK(split.train_seen.size() == 9 * 8);
    CHECK(split.test_seen.size() == 9 * 2);

    const SplitSpec again = make_split(y, 0.1, 0.2, {}, 42);
    CHECK(again.train_seen == split.train_seen);
    CHECK(again.test_seen == split.test_seen);
    CHECK(again.test_unseen == split.test_unseen);
    CHECK(again.unseen_classes == split.unseen_classes);

    const SplitSpec other = make_split(y, 0.1, 0.2, {}, 43);
    CHECK((other.train_seen != split.train_seen || other.unseen_classes != split.unseen_classes));

    // Disjoint partitions covering everything.
    std::set<std::size_t> all;
    for (auto i : split.train_seen) all.insert(i);
    for (auto i : split.test_seen) all.insert(i);
    for (auto i : split.test_unseen) all.insert(i);
    CHECK(all.size() == y.size());
}

TEST_CASE("make_split per-class counts sum to the partition sizes") {
    const LabelVector y = balanced_labels(7, 13);
    const SplitSpec split = make_split(y, 0.25, 0.3, {}, 5);
    std::size_t count = 0;
    for (int c : split.seen_classes) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y.labels[i] == c) ++count;
        }
    }
    CHECK(count == split.train_seen.size() + split.test_seen.size());
}

TEST_CASE("make_split group cohesion") {
    // 3 classes x 6 samples; groups of 2 inside each class plus singletons.
    LabelVector y;
    std::vector<int> groups;
    int gid = 0;
    for (int c = 0; c < 3; ++c) {
        y.class_names.push_back("c" + std::to_string(c));
        for (int i = 0; i < 6; ++i) y.labels.push_back(c);
        groups.push_back(gid);
        groups.push_back(gid); // one multi-view pair
        ++gid;
        for (int i = 0; i < 4; ++i) groups.push_back(gid++);
    }
    const SplitSpec split = make_split(y, 0.34, 0.25, groups, 9);

    std::map<int, std::set<int>> partitions_of_group;
    auto note = [&](const std::vector<std::size_t>& rows, int part) {
        for (std::size_t i : rows) partitions_of_group[groups[i]].insert(part);
    };
    note(split.train_seen, 0);
    note(split.test_seen, 1);
    note(split.test_unseen, 2);
    for (const auto& [g, parts] : partitions_of_group) CHECK(parts.size() == 1);

    // Multi-sample groups of seen classes always train.
    for (int c : split.seen_classes) {
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y.labels[i] != c) continue;
            std::size_t same_group = 0;
            for (std::size_t j = 0; j < y.size(); ++j) {
                if (groups[j] == groups[i]) ++same_group;
            }
            if (same_group > 1) {
                CHECK(std::binary_search(split.train_seen.begin(), split.train_seen.end(), i));
            }
        }
    }

    // A group spanning two classes is degenerate.
    std::vector<int> bad = groups;
    bad[0] = bad.back();
    CHECK_THROWS_AS(make_split(y, 0.34, 0.25, bad, 9), DegenerateSplit);
}

TEST_CASE("make_split rejects invalid fractions") {
    const LabelVector y = balanced_labels(4, 4);
    CHECK_THROWS_AS(make_split(y, 0.0, 0.2, {}, 1), DegenerateSplit);
    CHECK_THROWS_AS(make_split(y, 1.0, 0.2, {}, 1), DegenerateSplit);
    CHECK_THROWS_AS(make_split(y, 0.2, 0.0, {}, 1), DegenerateSplit);
}

TEST_CASE("split file round trip") {
    TempDir dir("split");
    const LabelVector y = balanced_labels(5, 6);
    Dataset ds;
    ds.labels = y;
    ds.features = FeatureMatrix(y.size(), 2);
    for (std::size_t i = 0; i < y.size(); ++i) ds.sample_ids.push_back("s" + std::to_string(i));

    const SplitSpec split = make_split(y, 0.2, 0.25, {}, 77);
    save_split(split, ds.sample_ids, dir.file("split.csv"));
    const SplitSpec back = load_split(dir.file("split.csv"), ds);
    CHECK(back.train_seen == split.train_seen);
    CHECK(back.test_seen == split.test_seen);
    CHECK(back.test_unseen == split.test_unseen);
    CHECK(back.seen_classes == split.seen_classes);
    CHECK(back.unseen_classes == split.unseen_classes);

    dir.write("bad.csv", "sample_id,partition\ns0,weird\n");
    CHECK_THROWS_AS(load_split(dir.file("bad.csv"), ds), FormatError);
}

TEST_CASE("pca full-rank projection preserves pairwise distances") {
    std::mt19937_64 gen(41);
    std::normal_distribution<double> normal(0.0, 1.0);
    FeatureMatrix x(30, 4);
    for (double& v : x.values) v = normal(gen);
    const PcaModel model = pca_fit(x, 4);

    Matrix btb = model.basis.transpose() * model.basis;
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(btb(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
        }
    }

    const FeatureMatrix z = pca_apply(model, x);
    for (std::size_t a = 0; a < 10; ++a) {
        for (std::size_t b = a + 1; b < 10; ++b) {
            const double orig = (x.row(a) - x.row(b)).norm();
            const double proj = (z.row(a) - z.row(b)).norm();
            CHECK(proj == doctest::Approx(orig).epsilon(1e-8));
        }
    }
}

TEST_CASE("pca on rank-1 data keeps distances with one component") {
    std::mt19937_64 gen(43);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector dir(6);
    for (int i = 0; i < 6; ++i) dir[i] = normal(gen);
    FeatureMatrix x(20, 6);
    std::vector<double> coef(20);
    for (std::size_t r = 0; r < 20; ++r) {
        coef[r] = normal(gen);
        for (int j = 0; j < 6; ++j) x.at(r, static_cast<std::size_t>(j)) = coef[r] * dir[j];
    }
    const PcaModel model = pca_fit(x, 1);
    const FeatureMatrix z = pca_apply(model, x);
    for (std::size_t a = 0; a < 20; ++a) {
        for (std::size_t b = a + 1; b < 20; ++b) {
            const double orig = (x.row(a) - x.row(b)).norm();
            CHECK(std::fabs(std::fabs(z.at(a, 0) - z.at(b, 0)) - orig) <= 1e-8 * (1.0 + orig));
        }
    }
}

TEST_CASE("pca reconstruction error equals the discarded eigenvalue mass") {
    std::mt19937_64 gen(47);
    std::normal_distribution<double> normal(0.0, 1.0);
    const std::size_t n = 100, d = 20, keep = 5;
    FeatureMatrix x(n, d);
    for (double& v : x.values) v = normal(gen);

    const PcaModel model = pca_fit(x, keep);
    const FeatureMatrix z = pca_apply(model, x);

    // Mean squared reconstruction error, scatter convention /(N-1).
    double err = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const Vector centered = x.row(r) - model.mean;
        const Vector recon = model.basis * (model.basis.transpose() * centered);
        err += (centered - recon).squaredNorm();
    }
    err /= static_cast<double>(n - 1);

    // Oracle: covariance eigenvalues by cyclic Jacobi.
    oracle::Mat cov(d, oracle::Vec(d, 0.0));
    oracle::Vec mean(d, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < d; ++j) mean[j] += x.at(r, j);
    }
    for (double& m : mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j < d; ++j) {
                cov[i][j] += (x.at(r, i) - mean[i]) * (x.at(r, j) - mean[j]);
            }
        }
    }
    for (auto& row : cov) {
        for (double& v : row) v /= static_cast<double>(n - 1);
    }
    const oracle::Vec eig = oracle::jacobi_eigenvalues(cov);
    double discarded = 0.0;
    for (std::size_t i = keep; i < d; ++i) discarded += eig[i];

    CHECK(std::fabs(err - discarded) <= 1e-6 * std::max(1.0, discarded));
    (void)z;
}

TEST_CASE("pca dimension validation") {
    FeatureMatrix x(3, 5);
    CHECK_THROWS_AS(pca_fit(x, 4), DimensionError); // d > N
    CHECK_THROWS_AS(pca_fit(x, 0), DimensionError);
    const PcaModel m = pca_fit(x, 2);
    FeatureMatrix wrong(2, 4);
    CHECK_THROWS_AS(pca_apply(m, wrong), DimensionError);
}
