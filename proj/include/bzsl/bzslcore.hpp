#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bzsl/datastore.hpp"
#include "bzsl/dnaside.hpp"

namespace bzsl {

// Model hyperparameters. m is exposed as a multiplier of (D+2) so grids
// transfer across feature dimensionalities.
struct Hyperparams {
    double kappa0 = 0.1;
    double kappa1 = 1.0;
    double m_mult = 1.0;
    double s_scale = 1.0;
    int k_neighbors = 2;
    std::optional<std::size_t> pca_dim;

    int derived_m(std::size_t dim) const;
    void validate() const;
};

struct GlobalPrior {
    Vector mu0;
    SymMatrix sigma0;
    int m = 0;
    std::size_t dim = 0;
};

// K seen classes backing one unseen class's local prior, nearest first.
struct SurrogateAssignment {
    int unseen_class = -1;
    std::vector<int> member_seen_classes;
    std::vector<double> distances;
};

enum class ModelKind { seen, surrogate };

struct ClassPredictiveModel {
    int class_id = -1;
    ModelKind kind = ModelKind::seen;
    StudentTParams ppd;
};

struct FittedModel {
    GlobalPrior global_prior;
    std::vector<ClassPredictiveModel> seen_models;      // ascending class id
    std::vector<ClassPredictiveModel> surrogate_models; // ascending class id
    std::vector<SurrogateAssignment> assignments;
    Hyperparams hyper;
    std::optional<PcaModel> pca;
};

enum class PredictMode { gzsl, zsl_only, seen_only };

struct Prediction {
    int class_id = -1;
    double top_score = 0.0;
    std::vector<std::pair<int, double>> scores; // (class id, log score), ascending id
};

// mu0 = unweighted mean of class means; Sigma0 = s * average unbiased
// covariance over classes with n >= 2; m = round(m_mult * (D+2)).
GlobalPrior estimate_global_prior(const std::vector<ClassStats>& stats,
                                  const Hyperparams& hyper);

// K nearest seen classes per unseen class by Euclidean distance on the side
// information. Distance ties break toward the smaller seen class id; when an
// unseen class's member set collides with an earlier one, its least similar
// member is swapped for the next candidate down the ranking until unique.
std::vector<SurrogateAssignment> build_surrogates(const SideInfoTable& phi_seen,
                                                  const SideInfoTable& phi_unseen,
                                                  int k_neighbors);

// Posterior predictive of a surrogate class from its member statistics and
// the global prior.
StudentTParams unseen_ppd(const std::vector<ClassStats>& members, const GlobalPrior& gp,
                          const Hyperparams& hyper);

// Posterior predictive of a seen class (global prior + data likelihood).
StudentTParams seen_ppd(const ClassStats& stats, const GlobalPrior& gp,
                        const Hyperparams& hyper);

FittedModel fit(const FeatureMatrix& x_train, const LabelVector& y_train,
                const SideInfoTable& phi_seen, const SideInfoTable& phi_unseen,
                const Hyperparams& hyper);

Prediction predict(const FittedModel& model, const Vector& x, PredictMode mode);

// Argmax class and top log-score per row; parallel over rows.
struct BatchPrediction {
    std::vector<int> class_ids;
    std::vector<double> top_scores;
};
BatchPrediction predict_batch(const FittedModel& model, const FeatureMatrix& x,
                              PredictMode mode);

// Single-file model serialization (magic "BZSLMDL1", little-endian 64-bit).
void save_model(const FittedModel& model, const std::string& path);
FittedModel load_model(const std::string& path);

} // namespace bzsl
