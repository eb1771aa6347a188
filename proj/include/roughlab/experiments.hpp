#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "roughlab/hmw.hpp"
#include "roughlab/words.hpp"

namespace roughlab {

enum class ExperimentKind {
    Anomaly,            // gamma / gamma0 estimators vs exact excursion stats
    Donsker,            // rescaled geodesic lifts vs the limit at grid times
    NonGeo,             // iterated-sum lifts, drift matrix M, Ito identity
    Occupation,         // ergodic scaling table for one word
    CompareEmbeddings,  // classify embeddings of one walk by Gamma_rho
    Holder,             // dyadic Hoelder-ratio statistic across an N-grid
};

ExperimentKind kind_from_string(const std::string& name);
std::string to_string(ExperimentKind kind);

struct ExperimentConfig {
    std::string model_path;
    ExperimentKind kind = ExperimentKind::Anomaly;
    std::size_t n = 16384;        // path length
    std::size_t k = 100000;       // excursions (estimator experiments)
    std::size_t replicas = 2000;  // independent paths (limit experiments)
    std::uint64_t seed = 1;
    std::vector<double> grid{0.25, 0.5, 0.75, 1.0};
    std::size_t exact_horizon = 24;
    bool isotropize = true;
    std::string word;  // occupation: comma-separated state labels
    unsigned threads = 1;

    // pinned tolerances; overridable from the CLI, never implicit
    double z_max = 3.0;
    double cov_tol = 0.05;          // per unit time, covariance entries
    double holder_slope_max = 0.1;  // log E[H_N] vs log N
    double occupation_tol = 0.01;   // final |rescaled - predicted|
    double identity_tol = 1e-12;
};

/// One verdict. value is compared against target either by z-score (se > 0)
/// or by the absolute tolerance; both are recorded.
struct StatRow {
    std::string statistic;
    std::string component;
    double value = 0.0;
    double se = 0.0;
    double target = 0.0;
    double z = 0.0;
    double tolerance = 0.0;  // absolute tolerance when the check is not a z-test
    bool pass = true;
    std::string estimator;       // provenance: which estimator produced value
    std::size_t sample_size = 0; // provenance: excursions or replicas behind it
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::Anomaly;
    std::string model_path;
    std::size_t n = 0, k = 0, replicas = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> notes;
    std::vector<StatRow> rows;
    std::vector<ErgodicRow> table;  // occupation experiments only
    std::string word;
    std::string estimator_csv;  // raw excursion-estimator dump, when one ran

    bool all_pass() const;
};

ExperimentReport run_anomaly(const ExperimentConfig& config);
ExperimentReport run_donsker(const ExperimentConfig& config);
ExperimentReport run_nongeo(const ExperimentConfig& config);
ExperimentReport run_occupation(const ExperimentConfig& config);
ExperimentReport run_compare_embeddings(const ExperimentConfig& config);
ExperimentReport run_holder(const ExperimentConfig& config);
ExperimentReport run_experiment(const ExperimentConfig& config);

/// statistic,component,value,se,target,z,pass  (occupation experiments emit
/// the table format N,word,count,rescaled,predicted,abs_error instead).
std::string report_to_csv(const ExperimentReport& report);
std::string report_to_json(const ExperimentReport& report);

/// Geodesic embedding value at fractional step index tau in [0, N]:
/// lifts[floor(tau)] (x) delta_{tau - floor(tau)}(step lift).
G2Element geodesic_eval(const std::vector<G2Element>& lifts,
                        const IncrementSeq& F, double tau);

/// Dyadic Hoelder-ratio statistic: sup over dyadic intervals [s,t] of
/// hom_norm(delta_eps(x_s^{-1} (x) x_t)) / ((t-s)/N)^{1/2}.
double holder_ratio(const std::vector<G2Element>& lifts, double eps);

/// Simulate until exactly k complete excursions are collected.
std::vector<ExcursionRecord> simulate_excursions(const HMWModel& model,
                                                 std::size_t k,
                                                 std::uint64_t seed,
                                                 std::uint64_t stream = 0);

}  // namespace roughlab
