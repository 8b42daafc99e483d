// Acceptance suite: one pass/fail line per criterion. Returns the number of
// failed criteria. The CLI path for the end-to-end determinism check comes
// from --cli <path>.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "bzsl/evalharness.hpp"
#include "bzsl/rng.hpp"
#include "surrogate_oracle.hpp"
#include "test_support.hpp"

using namespace bzsl;

namespace {

int g_failures = 0;
std::string g_cli_path;

void report(int index, const std::string& name, bool ok, double seconds,
            const std::string& detail) {
    std::printf("%s [%2d] %-24s %6.2fs  %s\n", ok ? "PASS" : "FAIL", index, name.c_str(),
                seconds, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

template <typename Fn>
void criterion(int index, const std::string& name, Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    bool ok = false;
    std::string detail;
    try {
        ok = fn(detail);
    } catch (const std::exception& e) {
        detail = std::string("exception: ") + e.what();
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report(index, name, ok, seconds, detail);
}

std::string fmt(const char* format, ...) {
    char buf[512];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

// ------------------------------------------------------------------ 1 ----

bool metric_fidelity(std::string& detail) {
    const double h1 = harmonic_mean(0.2083, 0.3830);
    const double h2 = harmonic_mean(0.2746, 0.4814);
    detail = fmt("H(20.83,38.30)=%.4f H(27.46,48.14)=%.4f", h1, h2);
    return std::fabs(h1 - 0.2699) <= 0.0005 && std::fabs(h2 - 0.3497) <= 0.0005;
}

// ------------------------------------------------------------------ 2 ----

double integral_1d(const StudentTParams& p, double bound, std::size_t steps) {
    const double h = 2.0 * bound / static_cast<double>(steps);
    double acc = 0.0;
    Vector x(1);
    for (std::size_t i = 0; i <= steps; ++i) {
        x[0] = -bound + static_cast<double>(i) * h;
        const double f = std::exp(student_t_logpdf(x, p));
        acc += (i == 0 || i == steps) ? 0.5 * f : f;
    }
    return acc * h;
}

// Radial quadrature for the isotropic 2-D density: integral of f(r) 2 pi r dr.
double integral_2d_radial(const StudentTParams& p, double bound, std::size_t steps) {
    const double h = bound / static_cast<double>(steps);
    double acc = 0.0;
    Vector x(2);
    x[1] = 0.0;
    for (std::size_t i = 0; i <= steps; ++i) {
        const double r = static_cast<double>(i) * h;
        x[0] = r;
        const double g = std::exp(student_t_logpdf(x, p)) * 2.0 * M_PI * r;
        acc += (i == 0 || i == steps) ? 0.5 * g : g;
    }
    return acc * h;
}

bool student_t_correctness(std::string& detail) {
    bool ok = true;
    std::ostringstream info;

    for (std::size_t d : {std::size_t{1}, std::size_t{2}}) {
        for (double dof : {1.0, 5.0, 50.0}) {
            const StudentTParams p = make_student_t(
                Vector::Zero(static_cast<Eigen::Index>(d)), SymMatrix::identity(d), dof);
            // The Cauchy case carries ~1% of its mass beyond 60 sigma, so its
            // grid must extend further for the integral check to be about
            // implementation correctness rather than tail truncation.
            const double bound = dof == 1.0 ? 2000.0 : 60.0;
            const std::size_t steps = dof == 1.0 ? 4000000 : 600000;
            const double integral =
                d == 1 ? integral_1d(p, bound, steps) : integral_2d_radial(p, bound, steps);
            if (!(integral > 0.99 && integral < 1.01)) {
                ok = false;
                info << " integral(D=" << d << ",v=" << dof << ")=" << integral;
            }
        }
    }

    const StudentTParams cauchy = make_student_t(Vector::Zero(1), SymMatrix::identity(1), 1.0);
    Vector origin(1);
    origin[0] = 0.0;
    const double at_zero = student_t_logpdf(origin, cauchy);
    if (std::fabs(at_zero + std::log(M_PI)) > 1e-9) {
        ok = false;
        info << " cauchy=" << at_zero;
    }

    std::mt19937_64 gen(2026);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + gen() % 5;
        const StudentTParams p = make_student_t(Vector::Zero(static_cast<Eigen::Index>(d)),
                                                SymMatrix::identity(d), 1e6);
        Vector z(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) z[static_cast<Eigen::Index>(i)] = normal(gen);
        const double gauss =
            -0.5 * static_cast<double>(d) * std::log(2.0 * M_PI) - 0.5 * z.squaredNorm();
        worst = std::max(worst, std::fabs(student_t_logpdf(z, p) - gauss));
    }
    if (worst > 1e-3) {
        ok = false;
        info << " gaussian_gap=" << worst;
    }

    detail =
        ok ? fmt("integrals in band, cauchy exact, gaussian gap %.2e", worst) : info.str();
    return ok;
}

// ------------------------------------------------------------------ 3 ----

bool oracle_equivalence(std::string& detail) {
    std::mt19937_64 gen(31);
    std::normal_distribution<double> normal(0.0, 1.0);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t d = 1 + gen() % 20;
        const oracle::Mat s = oracle::random_spd(d, gen);
        SymMatrix sym(d);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j <= i; ++j) sym.set(i, j, s[i][j]);
        }
        oracle::Vec mean(d), x(d);
        Vector mean_v(static_cast<Eigen::Index>(d)), x_v(static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            mean[i] = normal(gen);
            x[i] = mean[i] + 2.0 * normal(gen);
            mean_v[static_cast<Eigen::Index>(i)] = mean[i];
            x_v[static_cast<Eigen::Index>(i)] = x[i];
        }
        const double dof = 3.0 + 30.0 * std::generate_canonical<double, 53>(gen);
        const StudentTParams p = make_student_t(mean_v, sym, dof);
        const double got = student_t_logpdf(x_v, p);
        const double want = oracle::student_t_logpdf(x, mean, s, dof);
        worst = std::max(worst, std::fabs(got - want) / std::max(1.0, std::fabs(want)));
    }
    detail = fmt("worst relative gap %.2e over 1000 SPD instances", worst);
    return worst <= 1e-8;
}

// ------------------------------------------------------------------ 4 ----

bool worked_example(std::string& detail) {
    Hyperparams hyper;
    hyper.kappa0 = 1.0;
    hyper.kappa1 = 1.0;
    hyper.m_mult = 1.0;

    GlobalPrior gp;
    gp.dim = 2;
    gp.m = 4;
    gp.mu0 = Vector(2);
    gp.mu0 << 1.0, 1.0;
    gp.sigma0 = SymMatrix::identity(2);

    ClassStats a, b;
    a.class_id = 0;
    a.mean = Vector(2);
    a.mean << 0.0, 0.0;
    a.count = 3;
    a.scatter = SymMatrix(2);
    b.class_id = 1;
    b.mean = Vector(2);
    b.mean << 2.0, 0.0;
    b.count = 3;
    b.scatter = SymMatrix(2);

    const StudentTParams p = unseen_ppd({a, b}, gp, hyper);
    detail = fmt("mean=(%.17g, %.17g) dof=%.17g", p.mean[0], p.mean[1], p.dof);
    return p.mean[0] == 1.0 && p.mean[1] == 0.4 && p.dof == 7.0;
}

// ------------------------------------------------------------------ 5 ----

bool conjugacy_limits(std::string& detail) {
    GlobalPrior gp;
    gp.dim = 3;
    gp.m = 5;
    gp.mu0 = Vector(3);
    gp.mu0 << 2.0, -1.0, 4.0;
    gp.sigma0 = SymMatrix::identity(3);

    ClassStats cs;
    cs.class_id = 0;
    cs.mean = Vector(3);
    cs.mean << 10.0, 10.0, -10.0;
    cs.count = 8;
    cs.scatter = SymMatrix(3);

    Hyperparams strong;
    strong.kappa0 = 1e9;
    strong.kappa1 = 1e9; // kappa_eff = 5e8 >> n
    const double unseen_gap =
        (unseen_ppd({cs}, gp, strong).mean - gp.mu0).norm() / gp.mu0.norm();
    const double seen_gap = (seen_ppd(cs, gp, strong).mean - gp.mu0).norm() / gp.mu0.norm();

    Hyperparams vanishing;
    vanishing.kappa0 = 1e-12;
    vanishing.kappa1 = 1.0; // kappa_eff -> 0
    const double data_gap =
        (seen_ppd(cs, gp, vanishing).mean - cs.mean).norm() / cs.mean.norm();

    detail = fmt("unseen->mu0 %.2e, seen->mu0 %.2e, seen->xbar %.2e", unseen_gap, seen_gap,
                 data_gap);
    return unseen_gap <= 1e-6 && seen_gap <= 1e-6 && data_gap <= 1e-6;
}

// ------------------------------------------------------------------ 6 ----

bool surrogate_oracle_check(std::string& detail) {
    Rng rng(606);
    std::size_t tables = 0;
    while (tables < 200) {
        const std::size_t n_seen = 4 + rng.below(10);
        const std::size_t n_unseen = 1 + rng.below(5);
        const std::size_t dim = 1 + rng.below(4);
        const int k = static_cast<int>(1 + rng.below(std::min<std::uint64_t>(3, n_seen)));

        std::vector<std::pair<int, Vector>> seen_rows, unseen_rows;
        for (std::size_t s = 0; s < n_seen; ++s) {
            Vector v(static_cast<Eigen::Index>(dim));
            for (std::size_t j = 0; j < dim; ++j) {
                v[static_cast<Eigen::Index>(j)] = static_cast<double>(rng.below(3));
            }
            seen_rows.push_back({static_cast<int>(s), v});
        }
        for (std::size_t u = 0; u < n_unseen; ++u) {
            Vector v(static_cast<Eigen::Index>(dim));
            for (std::size_t j = 0; j < dim; ++j) {
                v[static_cast<Eigen::Index>(j)] = static_cast<double>(rng.below(3));
            }
            unseen_rows.push_back({static_cast<int>(100 + u), v});
        }
        const SideInfoTable seen = testutil::table_from(seen_rows);
        const SideInfoTable unseen = testutil::table_from(unseen_rows);

        std::vector<SurrogateAssignment> got;
        try {
            got = build_surrogates(seen, unseen, k);
        } catch (const UniquenessExhausted&) {
            continue; // not a usable table; draw another
        }
        ++tables;

        const auto want =
            testutil::surrogate_oracle(seen, unseen, k, [](double d) { return d; });
        std::set<std::vector<int>> distinct;
        for (std::size_t u = 0; u < got.size(); ++u) {
            if (testutil::sorted_members(got[u]) != want[u]) {
                detail = fmt("membership mismatch on table %zu", tables);
                return false;
            }
            distinct.insert(testutil::sorted_members(got[u]));
        }
        if (distinct.size() != got.size()) {
            detail = fmt("duplicate member sets on table %zu", tables);
            return false;
        }

        for (auto f : {+[](double d) { return d * d; }, +[](double d) { return std::sqrt(d); },
                       +[](double d) { return 5.0 * d + 1.0; }}) {
            const auto transformed = testutil::surrogate_oracle(seen, unseen, k, f);
            for (std::size_t u = 0; u < got.size(); ++u) {
                if (transformed[u] != want[u]) {
                    detail = fmt("monotone transform changed a member set on table %zu", tables);
                    return false;
                }
            }
        }
    }
    detail = "200 tables: oracle match, distinct sets, transform-invariant";
    return true;
}

// ------------------------------------------------------------------ 7 ----

SyntheticSpec recovery_spec(std::uint64_t seed) {
    SyntheticSpec spec;
    spec.n_local_priors = 10;
    spec.classes_per_prior = 3;
    spec.samples_per_class = 50;
    spec.dim = 10;
    spec.kappa0 = 0.05;
    spec.kappa1 = 0.3;
    spec.m_gen = 15;
    spec.sideinfo_noise = 0.0;
    spec.seed = seed;
    return spec;
}

Hyperparams recovery_hyper(const SyntheticSpec& spec, int k) {
    Hyperparams h;
    h.kappa0 = spec.kappa0;
    h.kappa1 = spec.kappa1;
    h.m_mult = static_cast<double>(spec.m_gen) / (static_cast<double>(spec.dim) + 2.0);
    h.k_neighbors = k;
    return h;
}

bool generative_recovery(std::string& detail) {
    double min_s = 1.0, min_us = 1.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SyntheticSpec spec = recovery_spec(seed);
        const SyntheticData data = generate_synthetic(spec);
        const GzslReport rep =
            run_gzsl(data.dataset, data.split, data.phi, recovery_hyper(spec, 2), seed);
        min_s = std::min(min_s, rep.seen_acc);
        min_us = std::min(min_us, rep.unseen_acc);
    }
    detail = fmt("5 seeds: min S=%.3f (>=0.80), min US=%.3f (>=0.50, chance 0.033)", min_s,
                 min_us);
    return min_s >= 0.80 && min_us >= 0.50;
}

// ------------------------------------------------------------------ 8 ----

bool seen_count_trend(std::string& detail) {
    SyntheticSpec spec = recovery_spec(1);
    spec.n_local_priors = 12;
    spec.classes_per_prior = 4;
    spec.samples_per_class = 30;
    const SyntheticData data = generate_synthetic(spec);

    const AblationResult abl =
        ablate_seen_count(data.dataset, data.split, data.phi, recovery_hyper(spec, 3),
                          {0.25, 0.5, 0.75, 1.0}, 5, 100);

    bool ok = abl.cells.back().mean_us > abl.cells.front().mean_us;
    for (std::size_t i = 0; i + 1 < abl.cells.size(); ++i) {
        const double pooled =
            std::sqrt(0.5 * (abl.cells[i].sd_us * abl.cells[i].sd_us +
                             abl.cells[i + 1].sd_us * abl.cells[i + 1].sd_us));
        if (abl.cells[i + 1].mean_us < abl.cells[i].mean_us - pooled) ok = false;
    }
    detail = fmt("mean US over 5 repeats: %.3f %.3f %.3f %.3f", abl.cells[0].mean_us,
                 abl.cells[1].mean_us, abl.cells[2].mean_us, abl.cells[3].mean_us);
    return ok;
}

// ------------------------------------------------------------------ 9 ----

bool kappa1_peak(std::string& detail) {
    double low = 0.0, mid = 0.0, high = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const SyntheticSpec spec = recovery_spec(seed);
        const SyntheticData data = generate_synthetic(spec);
        const AblationResult sw =
            sweep_kappas(data.dataset, data.split, data.phi, recovery_hyper(spec, 2),
                         {spec.kappa0}, {1e-3, 1.0, 1e3}, seed);
        low += sw.cells[0].mean_us;
        mid += sw.cells[1].mean_us;
        high += sw.cells[2].mean_us;
    }
    low /= 5.0;
    mid /= 5.0;
    high /= 5.0;
    detail = fmt("mean US: kappa1=1e-3 %.3f | kappa1=1 %.3f | kappa1=1e3 %.3f", low, mid, high);
    return mid > low && mid > high;
}

// ----------------------------------------------------------------- 10 ----

int run_command(const std::string& cmd) {
    const int status = std::system((cmd + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

bool cli_determinism(std::string& detail) {
    if (g_cli_path.empty() || !std::filesystem::exists(g_cli_path)) {
        detail = "--cli <path> missing or not built";
        return false;
    }
    TempDir work("bzsl_acceptance");

    auto pipeline = [&](const std::string& tag, int threads) {
        const std::string dir = (work.path / tag).string();
        const std::string synth_cmd =
            g_cli_path +
            " synth --priors 6 --classes-per-prior 3 --samples-per-class 30 "
            "--dim 6 --kappa0 0.05 --kappa1 0.3 --m-gen 11 --seed 17 --threads " +
            std::to_string(threads) + " --out " + dir;
        if (run_command(synth_cmd) != 0) throw Error("synth failed for " + tag);
        const std::string fit_cmd =
            g_cli_path + " fit-predict --features " + dir + "/features.bmat --labels " + dir +
            "/labels.csv --split " + dir + "/split.csv --phi-seen " + dir +
            "/sideinfo_seen.bmat --phi-unseen " + dir +
            "/sideinfo_unseen.bmat --kappa0 0.05 --kappa1 0.3 --m-mult 1.375 --k 2 --seed 17 "
            "--threads " +
            std::to_string(threads) + " --save-model " + dir + "/model.bzsl --out " + dir;
        if (run_command(fit_cmd) != 0) throw Error("fit-predict failed for " + tag);
        return dir;
    };

    const std::string a = pipeline("a", 1);
    const std::string b = pipeline("b", 1);
    const std::string c = pipeline("c", 8);

    const char* files[] = {"features.bmat",    "labels.csv",
                           "split.csv",        "sideinfo_seen.bmat",
                           "sideinfo_unseen.bmat", "gzsl_report.csv",
                           "predictions.csv",  "per_class_accuracy.csv",
                           "model.bzsl"};
    for (const char* f : files) {
        const std::string fa = slurp(std::filesystem::path(a) / f);
        if (fa != slurp(std::filesystem::path(b) / f)) {
            detail = fmt("%s differs across identical runs", f);
            return false;
        }
        if (fa != slurp(std::filesystem::path(c) / f)) {
            detail = fmt("%s differs across thread counts", f);
            return false;
        }
    }
    detail = "synth + fit-predict outputs byte-identical (2 runs; threads 1 vs 8)";
    return true;
}

// ----------------------------------------------------------------- 11 ----

bool dna_pipeline(std::string& detail) {
    Rng rng(1111);
    const char* bases = "ACGTRNYW-";

    // One-hot rows always sum to 1.
    for (int trial = 0; trial < 50; ++trial) {
        std::string seq;
        const std::size_t len = 1 + rng.below(120);
        for (std::size_t i = 0; i < len; ++i) seq.push_back(bases[rng.below(9)]);
        const OneHotTensor oh = one_hot(tokenize(seq));
        for (std::size_t i = 0; i < oh.length; ++i) {
            int sum = 0;
            for (std::size_t ch = 0; ch < kNumTokens; ++ch) sum += oh.at(i, ch);
            if (sum != 1) {
                detail = "one-hot row sum != 1";
                return false;
            }
        }
    }

    // Alignment projection always yields length-L output.
    const TokenSeq cons = tokenize("ACGTAGGCCTTAGCAACGTAGGCCTTAGCA");
    for (int trial = 0; trial < 50; ++trial) {
        std::string seq;
        const std::size_t len = 1 + rng.below(60);
        for (std::size_t i = 0; i < len; ++i) seq.push_back(bases[rng.below(9)]);
        const TokenSeq out = align_to_consensus({"r", 0, seq}, cons);
        if (out.length() != cons.length()) {
            detail = "alignment output length != L";
            return false;
        }
    }

    // 1-NN validation: separable embeddings score 1.0.
    const std::size_t per_class = 40;
    FeatureMatrix sep(2 * per_class, 2);
    std::vector<int> sep_labels;
    for (std::size_t i = 0; i < per_class; ++i) {
        sep.at(i, 0) = 0.01 * rng.normal();
        sep.at(i, 1) = 0.01 * rng.normal();
        sep_labels.push_back(0);
    }
    for (std::size_t i = 0; i < per_class; ++i) {
        sep.at(per_class + i, 0) = 50.0 + 0.01 * rng.normal();
        sep.at(per_class + i, 1) = 50.0 + 0.01 * rng.normal();
        sep_labels.push_back(1);
    }
    const double separable_acc = nn_validate(sep, sep_labels, 0.8, 1);

    // Shuffled labels land near chance.
    const std::size_t n = 400;
    const int classes = 4;
    FeatureMatrix noise(n, 3);
    for (double& v : noise.values) v = rng.normal();
    std::vector<int> chance_labels;
    for (std::size_t i = 0; i < n; ++i) chance_labels.push_back(static_cast<int>(i) % classes);
    const double chance_acc = nn_validate(noise, chance_labels, 0.8, 2);

    detail = fmt("separable 1-NN %.3f, shuffled 1-NN %.3f (chance %.3f)", separable_acc,
                 chance_acc, 1.0 / classes);
    return separable_acc == 1.0 && std::fabs(chance_acc - 1.0 / classes) <= 0.1;
}

} // namespace

int main(int argc, char** argv) {
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--cli") g_cli_path = argv[i + 1];
    }

    criterion(1, "metric fidelity", metric_fidelity);
    criterion(2, "student-t correctness", student_t_correctness);
    criterion(3, "oracle equivalence", oracle_equivalence);
    criterion(4, "posterior hand-check", worked_example);
    criterion(5, "conjugacy limits", conjugacy_limits);
    criterion(6, "surrogate construction", surrogate_oracle_check);
    criterion(7, "generative recovery", generative_recovery);
    criterion(8, "seen-count trend", seen_count_trend);
    criterion(9, "kappa1 peak shape", kappa1_peak);
    criterion(10, "CLI determinism", cli_determinism);
    criterion(11, "DNA pipeline", dna_pipeline);

    if (g_failures == 0) {
        std::printf("all 11 criteria passed\n");
    } else {
        std::printf("%d criteria FAILED\n", g_failures);
    }
    return g_failures == 0 ? 0 : 1;
}
