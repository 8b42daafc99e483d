#include "bzsl/bzslcore.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>

#include "bzsl/binio.hpp"
#include "bzsl/parallel.hpp"

namespace bzsl {

int Hyperparams::derived_m(std::size_t dim) const {
    return static_cast<int>(std::llround(m_mult * (static_cast<double>(dim) + 2.0)));
}

void Hyperparams::validate() const {
    if (!(kappa0 > 0.0)) throw DomainError("kappa0 must be positive");
    if (!(kappa1 > 0.0)) throw DomainError("kappa1 must be positive");
    if (!(m_mult >= 1.0)) throw DomainError("m_mult must be >= 1 so that m >= D+2");
    if (!(s_scale > 0.0)) throw DomainError("s must be positive");
    if (k_neighbors < 1) throw DomainError("k_neighbors must be >= 1");
    if (pca_dim && *pca_dim == 0) throw DomainError("pca_dim must be >= 1");
}

GlobalPrior estimate_global_prior(const std::vector<ClassStats>& stats,
                                  const Hyperparams& hyper) {
    hyper.validate();
    if (stats.size() < 2) {
        throw InsufficientClasses("global prior needs at least 2 seen classes");
    }
    const std::size_t d = static_cast<std::size_t>(stats.front().mean.size());
    GlobalPrior gp;
    gp.dim = d;
    gp.m = hyper.derived_m(d);

    gp.mu0 = Vector::Zero(static_cast<Eigen::Index>(d));
    for (const auto& cs : stats) {
        if (static_cast<std::size_t>(cs.mean.size()) != d) {
            throw DimensionMismatch("class stats have inconsistent dimensions");
        }
        gp.mu0 += cs.mean;
    }
    gp.mu0 /= static_cast<double>(stats.size());

    gp.sigma0 = SymMatrix(d);
    std::size_t n_cov = 0;
    for (const auto& cs : stats) {
        if (cs.count >= 2) {
            gp.sigma0.add_scaled(cs.scatter, 1.0 / static_cast<double>(cs.count - 1));
            ++n_cov;
        }
    }
    if (n_cov > 0) {
        gp.sigma0.scale(hyper.s_scale / static_cast<double>(n_cov));
    } else {
        // All classes are singletons; fall back to a spherical prior shape.
        gp.sigma0 = SymMatrix::identity(d);
        gp.sigma0.scale(hyper.s_scale);
    }
    return gp;
}

std::vector<SurrogateAssignment> build_surrogates(const SideInfoTable& phi_seen,
                                                  const SideInfoTable& phi_unseen,
                                                  int k_neighbors) {
    if (k_neighbors < 1) throw DomainError("k_neighbors must be >= 1");
    const std::size_t n_seen = phi_seen.n_classes();
    const std::size_t k = static_cast<std::size_t>(k_neighbors);
    if (k > n_seen) {
        throw KTooLarge("K=" + std::to_string(k_neighbors) + " exceeds " +
                        std::to_string(n_seen) + " seen classes");
    }
    if (phi_unseen.n_classes() > 0 && phi_seen.dim() != phi_unseen.dim()) {
        throw DimensionMismatch("seen/unseen side information dimensions differ");
    }

    // Unseen classes processed in ascending class-id order.
    std::vector<std::size_t> order(phi_unseen.n_classes());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return phi_unseen.class_ids[a] < phi_unseen.class_ids[b];
    });

    std::set<std::vector<int>> used_sets;
    std::vector<SurrogateAssignment> out(phi_unseen.n_classes());
    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const std::size_t u = order[oi];
        const Vector q = phi_unseen.row_for(u);

        std::vector<std::pair<double, int>> ranked(n_seen); // (distance, seen id)
        for (std::size_t s = 0; s < n_seen; ++s) {
            ranked[s] = {(phi_seen.row_for(s) - q).norm(), phi_seen.class_ids[s]};
        }
        std::sort(ranked.begin(), ranked.end());

        std::vector<std::pair<double, int>> members(ranked.begin(),
                                                    ranked.begin() + static_cast<std::ptrdiff_t>(k));
        std::size_t next = k;
        auto key_of = [&members] {
            std::vector<int> ids;
            ids.reserve(members.size());
            for (const auto& m : members) ids.push_back(m.second);
            std::sort(ids.begin(), ids.end());
            return ids;
        };
        std::vector<int> key = key_of();
        while (used_sets.count(key)) {
            if (next >= n_seen) {
                throw UniquenessExhausted(
                    "cannot make member set unique for unseen class id " +
                    std::to_string(phi_unseen.class_ids[u]));
            }
            // Drop the least similar member, pull the next candidate down the
            // ranking.
            const auto worst = std::max_element(members.begin(), members.end());
            *worst = ranked[next++];
            std::sort(members.begin(), members.end());
            key = key_of();
        }
        used_sets.insert(key);

        SurrogateAssignment sa;
        sa.unseen_class = phi_unseen.class_ids[u];
        for (const auto& [dist, id] : members) {
            sa.member_seen_classes.push_back(id);
            sa.distances.push_back(dist);
        }
        out[u] = std::move(sa);
    }
    return out;
}

namespace {

StudentTParams finish_ppd(const Vector& mean, SymMatrix&& scale_numerator, double kappa_like,
                          double dof) {
    if (!(dof > 0.0)) throw NonPositiveDof("posterior dof is not positive");
    scale_numerator.scale((kappa_like + 1.0) / (kappa_like * dof));
    return make_student_t(mean, scale_numerator, dof, JitterPolicy::escalate);
}

} // namespace

StudentTParams unseen_ppd(const std::vector<ClassStats>& members, const GlobalPrior& gp,
                          const Hyperparams& hyper) {
    if (members.empty()) throw EmptyClass("surrogate class with no member statistics");
    const std::size_t d = gp.dim;

    Vector weighted_sum = Vector::Zero(static_cast<Eigen::Index>(d));
    double weight_total = 0.0;
    double residual_dof = 0.0;
    SymMatrix scatter_sum(d);
    for (const auto& cs : members) {
        const double n = static_cast<double>(cs.count);
        const double w = n * hyper.kappa1 / (n + hyper.kappa1);
        weighted_sum += w * cs.mean;
        weight_total += w;
        residual_dof += n - 1.0;
        scatter_sum.add_scaled(cs.scatter);
    }

    const Vector mean = (weighted_sum + hyper.kappa0 * gp.mu0) / (weight_total + hyper.kappa0);
    const double dof = residual_dof + static_cast<double>(gp.m) -
                       static_cast<double>(d) + 1.0;
    const double kappa_tilde = hyper.kappa0 + weight_total;

    scatter_sum.add_scaled(gp.sigma0);
    return finish_ppd(mean, std::move(scatter_sum), kappa_tilde, dof);
}

StudentTParams seen_ppd(const ClassStats& stats, const GlobalPrior& gp,
                        const Hyperparams& hyper) {
    if (stats.count < 1) throw EmptyClass("seen class with no samples");
    const std::size_t d = gp.dim;
    const double n = static_cast<double>(stats.count);
    const double kappa_eff = hyper.kappa0 * hyper.kappa1 / (hyper.kappa0 + hyper.kappa1);

    const Vector mean = (n * stats.mean + kappa_eff * gp.mu0) / (n + kappa_eff);
    const double dof =
        n + static_cast<double>(gp.m) - static_cast<double>(d) + 1.0;

    SymMatrix numerator(d);
    numerator.add_scaled(gp.sigma0);
    numerator.add_scaled(stats.scatter);
    numerator.add_outer(stats.mean - gp.mu0, n * kappa_eff / (n + kappa_eff));
    return finish_ppd(mean, std::move(numerator), n + kappa_eff, dof);
}

FittedModel fit(const FeatureMatrix& x_train, const LabelVector& y_train,
                const SideInfoTable& phi_seen, const SideInfoTable& phi_unseen,
                const Hyperparams& hyper) {
    hyper.validate();
    if (x_train.n_rows != y_train.size()) {
        throw DimensionMismatch("training rows and labels differ in count");
    }

    FittedModel model;
    model.hyper = hyper;

    const FeatureMatrix* features = &x_train;
    FeatureMatrix projected;
    if (hyper.pca_dim && *hyper.pca_dim < x_train.n_cols) {
        model.pca = pca_fit(x_train, *hyper.pca_dim);
        projected = pca_apply(*model.pca, x_train);
        features = &projected;
    }

    std::vector<int> seen_ids;
    for (int label : y_train.labels) seen_ids.push_back(label);
    std::sort(seen_ids.begin(), seen_ids.end());
    seen_ids.erase(std::unique(seen_ids.begin(), seen_ids.end()), seen_ids.end());

    const std::vector<ClassStats> stats = compute_class_stats(*features, y_train, seen_ids);
    model.global_prior = estimate_global_prior(stats, hyper);

    const SideInfoTable phi_seen_used = sideinfo_subset(phi_seen, seen_ids);
    if (phi_unseen.n_classes() > 0) {
        model.assignments = build_surrogates(phi_seen_used, phi_unseen, hyper.k_neighbors);
    }

    model.seen_models.resize(stats.size());
    parallel_for(stats.size(), [&](std::size_t i) {
        ClassPredictiveModel cpm;
        cpm.class_id = stats[i].class_id;
        cpm.kind = ModelKind::seen;
        try {
            cpm.ppd = seen_ppd(stats[i], model.global_prior, hyper);
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("seen class id " + std::to_string(stats[i].class_id) +
                                      ": " + e.what());
        }
        model.seen_models[i] = std::move(cpm);
    });

    std::unordered_map<int, const ClassStats*> stats_of;
    for (const auto& cs : stats) stats_of[cs.class_id] = &cs;

    std::vector<const SurrogateAssignment*> sorted_assignments;
    for (const auto& sa : model.assignments) sorted_assignments.push_back(&sa);
    std::sort(sorted_assignments.begin(), sorted_assignments.end(),
              [](const SurrogateAssignment* a, const SurrogateAssignment* b) {
                  return a->unseen_class < b->unseen_class;
              });

    model.surrogate_models.resize(sorted_assignments.size());
    parallel_for(sorted_assignments.size(), [&](std::size_t i) {
        const SurrogateAssignment& sa = *sorted_assignments[i];
        std::vector<ClassStats> members;
        members.reserve(sa.member_seen_classes.size());
        for (int id : sa.member_seen_classes) members.push_back(*stats_of.at(id));
        ClassPredictiveModel cpm;
        cpm.class_id = sa.unseen_class;
        cpm.kind = ModelKind::surrogate;
        try {
            cpm.ppd = unseen_ppd(members, model.global_prior, hyper);
        } catch (const NotPositiveDefinite& e) {
            throw NotPositiveDefinite("surrogate class id " + std::to_string(sa.unseen_class) +
                                      ": " + e.what());
        }
        model.surrogate_models[i] = std::move(cpm);
    });

    return model;
}

namespace {

Vector project_input(const FittedModel& model, const Vector& x) {
    const std::size_t expected =
        model.pca ? static_cast<std::size_t>(model.pca->basis.rows()) : model.global_prior.dim;
    if (static_cast<std::size_t>(x.size()) != expected) {
        throw DimensionMismatch("predict: input has dimension " + std::to_string(x.size()) +
                                ", model expects " + std::to_string(expected));
    }
    if (!model.pca) return x;
    return model.pca->basis.transpose() * (x - model.pca->mean);
}

template <typename Fn>
void for_each_eligible(const FittedModel& model, PredictMode mode, Fn&& fn) {
    // Merge the two id-sorted lists so candidates come out in ascending
    // class-id order; first strict maximum then wins ties toward smaller ids.
    const auto& seen = model.seen_models;
    const auto& sur = model.surrogate_models;
    std::size_t i = 0, j = 0;
    const bool use_seen = mode != PredictMode::zsl_only;
    const bool use_sur = mode != PredictMode::seen_only;
    while ((use_seen && i < seen.size()) || (use_sur && j < sur.size())) {
        const bool have_seen = use_seen && i < seen.size();
        const bool have_sur = use_sur && j < sur.size();
        if (have_seen && (!have_sur || seen[i].class_id < sur[j].class_id)) {
            fn(seen[i++]);
        } else {
            fn(sur[j++]);
        }
    }
}

} // namespace

Prediction predict(const FittedModel& model, const Vector& x, PredictMode mode) {
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        if (!std::isfinite(x[i])) throw NonFiniteValue("predict: non-finite input");
    }
    const Vector z = project_input(model, x);

    Prediction pred;
    bool any = false;
    for_each_eligible(model, mode, [&](const ClassPredictiveModel& cpm) {
        const double score = student_t_logpdf(z, cpm.ppd);
        pred.scores.emplace_back(cpm.class_id, score);
        if (!any || score > pred.top_score) {
            any = true;
            pred.top_score = score;
            pred.class_id = cpm.class_id;
        }
    });
    if (!any) throw DomainError("predict: no eligible class models for this mode");
    return pred;
}

BatchPrediction predict_batch(const FittedModel& model, const FeatureMatrix& x,
                              PredictMode mode) {
    BatchPrediction out;
    out.class_ids.resize(x.n_rows);
    out.top_scores.resize(x.n_rows);
    parallel_for(x.n_rows, [&](std::size_t i) {
        Prediction p = predict(model, x.row(i), mode);
        out.class_ids[i] = p.class_id;
        out.top_scores[i] = p.top_score;
    });
    return out;
}

namespace {

constexpr char kModelMagic[9] = "BZSLMDL1";

void write_vector(std::ostream& os, const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) io::write_f64(os, v[i]);
}

Vector read_vector(std::istream& is, std::size_t n) {
    Vector v(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = io::read_f64(is);
    return v;
}

void write_sym(std::ostream& os, const SymMatrix& m) {
    io::write_u64(os, m.dim());
    for (double v : m.packed()) io::write_f64(os, v);
}

SymMatrix read_sym(std::istream& is) {
    const std::size_t d = io::read_u64(is);
    SymMatrix m(d);
    for (double& v : m.packed()) v = io::read_f64(is);
    return m;
}

void write_class_model(std::ostream& os, const ClassPredictiveModel& cpm) {
    io::write_u64(os, static_cast<std::uint64_t>(cpm.class_id));
    os.put(cpm.kind == ModelKind::seen ? 0 : 1);
    io::write_f64(os, cpm.ppd.dof);
    io::write_f64(os, cpm.ppd.log_norm_const);
    const std::size_t d = cpm.ppd.dim();
    io::write_u64(os, d);
    write_vector(os, cpm.ppd.mean);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            io::write_f64(os, cpm.ppd.scale_chol.lower(static_cast<Eigen::Index>(i),
                                                       static_cast<Eigen::Index>(j)));
        }
    }
    io::write_f64(os, cpm.ppd.scale_chol.log_det);
}

ClassPredictiveModel read_class_model(std::istream& is) {
    ClassPredictiveModel cpm;
    cpm.class_id = static_cast<int>(io::read_u64(is));
    const int kind = is.get();
    if (kind != 0 && kind != 1) throw FormatError("bad model kind byte");
    cpm.kind = kind == 0 ? ModelKind::seen : ModelKind::surrogate;
    cpm.ppd.dof = io::read_f64(is);
    cpm.ppd.log_norm_const = io::read_f64(is);
    const std::size_t d = io::read_u64(is);
    cpm.ppd.mean = read_vector(is, d);
    cpm.ppd.scale_chol.lower = Matrix::Zero(static_cast<Eigen::Index>(d),
                                            static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
            cpm.ppd.scale_chol.lower(static_cast<Eigen::Index>(i),
                                     static_cast<Eigen::Index>(j)) = io::read_f64(is);
        }
    }
    cpm.ppd.scale_chol.log_det = io::read_f64(is);
    return cpm;
}

} // namespace

void save_model(const FittedModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path);
    io::write_magic(os, kModelMagic);

    io::write_f64(os, model.hyper.kappa0);
    io::write_f64(os, model.hyper.kappa1);
    io::write_f64(os, model.hyper.m_mult);
    io::write_f64(os, model.hyper.s_scale);
    io::write_u64(os, static_cast<std::uint64_t>(model.hyper.k_neighbors));
    io::write_u64(os, model.hyper.pca_dim ? *model.hyper.pca_dim + 1 : 0);

    io::write_u64(os, model.global_prior.dim);
    io::write_u64(os, static_cast<std::uint64_t>(model.global_prior.m));
    write_vector(os, model.global_prior.mu0);
    write_sym(os, model.global_prior.sigma0);

    os.put(model.pca ? 1 : 0);
    if (model.pca) {
        io::write_u64(os, static_cast<std::uint64_t>(model.pca->basis.rows()));
        io::write_u64(os, model.pca->out_dim);
        write_vector(os, model.pca->mean);
        for (Eigen::Index i = 0; i < model.pca->basis.rows(); ++i) {
            for (Eigen::Index j = 0; j < model.pca->basis.cols(); ++j) {
                io::write_f64(os, model.pca->basis(i, j));
            }
        }
    }

    io::write_u64(os, model.seen_models.size());
    for (const auto& cpm : model.seen_models) write_class_model(os, cpm);
    io::write_u64(os, model.surrogate_models.size());
    for (const auto& cpm : model.surrogate_models) write_class_model(os, cpm);

    io::write_u64(os, model.assignments.size());
    for (const auto& sa : model.assignments) {
        io::write_u64(os, static_cast<std::uint64_t>(sa.unseen_class));
        io::write_u64(os, sa.member_seen_classes.size());
        for (int id : sa.member_seen_classes) io::write_u64(os, static_cast<std::uint64_t>(id));
        for (double d : sa.distances) io::write_f64(os, d);
    }
    if (!os) throw IoError("write failed: " + path);
}

FittedModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path);
    io::expect_magic(is, kModelMagic, path);

    FittedModel model;
    model.hyper.kappa0 = io::read_f64(is);
    model.hyper.kappa1 = io::read_f64(is);
    model.hyper.m_mult = io::read_f64(is);
    model.hyper.s_scale = io::read_f64(is);
    model.hyper.k_neighbors = static_cast<int>(io::read_u64(is));
    const std::uint64_t pca_dim_raw = io::read_u64(is);
    if (pca_dim_raw > 0) model.hyper.pca_dim = pca_dim_raw - 1;

    model.global_prior.dim = io::read_u64(is);
    model.global_prior.m = static_cast<int>(io::read_u64(is));
    model.global_prior.mu0 = read_vector(is, model.global_prior.dim);
    model.global_prior.sigma0 = read_sym(is);

    const int has_pca = is.get();
    if (has_pca == 1) {
        PcaModel pca;
        const std::size_t in_dim = io::read_u64(is);
        pca.out_dim = io::read_u64(is);
        pca.mean = read_vector(is, in_dim);
        pca.basis.resize(static_cast<Eigen::Index>(in_dim),
                         static_cast<Eigen::Index>(pca.out_dim));
        for (Eigen::Index i = 0; i < pca.basis.rows(); ++i) {
            for (Eigen::Index j = 0; j < pca.basis.cols(); ++j) {
                pca.basis(i, j) = io::read_f64(is);
            }
        }
        model.pca = std::move(pca);
    } else if (has_pca != 0) {
        throw FormatError("bad pca flag byte in " + path);
    }

    const std::size_t n_seen = io::read_u64(is);
    model.seen_models.reserve(n_seen);
    for (std::size_t i = 0; i < n_seen; ++i) model.seen_models.push_back(read_class_model(is));
    const std::size_t n_sur = io::read_u64(is);
    model.surrogate_models.reserve(n_sur);
    for (std::size_t i = 0; i < n_sur; ++i) {
        model.surrogate_models.push_back(read_class_model(is));
    }

    const std::size_t n_assign = io::read_u64(is);
    model.assignments.reserve(n_assign);
    for (std::size_t i = 0; i < n_assign; ++i) {
        SurrogateAssignment sa;
        sa.unseen_class = static_cast<int>(io::read_u64(is));
        const std::size_t k = io::read_u64(is);
        for (std::size_t j = 0; j < k; ++j) {
            sa.member_seen_classes.push_back(static_cast<int>(io::read_u64(is)));
        }
        for (std::size_t j = 0; j < k; ++j) sa.distances.push_back(io::read_f64(is));
        model.assignments.push_back(std::move(sa));
    }
    if (!is) throw FormatError("truncated model file: " + path);
    return model;
}

} // namespace bzsl
