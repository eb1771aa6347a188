#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "roughlab/rng.hpp"
#include "roughlab/signatures.hpp"
#include "roughlab/tensor.hpp"

namespace roughlab {

/// Finite-state driving chain: labels, row-stochastic transition matrix,
/// deterministic start state. Estimator runs require a fixed start because
/// excursions are i.i.d. only when anchored to one state.
struct MarkovSpec {
    std::vector<std::string> states;
    Tensor2 Q;
    int start = 0;

    std::size_t n_states() const { return states.size(); }
};

/// One atom of a per-state emission law: with probability p the step is F
/// and the embedding adds the antisymmetric area decoration.
struct Emission {
    double p = 0.0;
    Vec F;
    Tensor2 area;
};

struct HMWModel {
    MarkovSpec chain;
    std::vector<std::vector<Emission>> emissions;  // one list per state
    Eigen::Index dimension = 0;

    bool has_decorations() const;
};

struct ValidationReport {
    bool ok = true;
    std::vector<std::string> errors;
    double step_bound = 0.0;  // K with |F| <= K a.s. (finite supports)
};

/// Checks stochasticity, irreducibility (strong connectivity of the positive
/// graph) and emission-law normalization; never throws, all violations are
/// listed with their location.
ValidationReport validate(const HMWModel& model);
void validate_or_throw(const HMWModel& model);

/// Invariant measure: pi Q = pi, sum pi = 1, pi > 0, by direct linear solve.
Vec stationary(const MarkovSpec& chain);

struct SimResult {
    std::vector<int> states;  // R_0..R_n
    IncrementSeq increments;  // F_1..F_n with decorations when the model has any
};

/// Incremental driver behind simulate(): R_{k+1} ~ Q(R_k, .), then the
/// emission is drawn from nu(.|R_{k+1}). Deterministic in (seed, stream).
class Simulator {
  public:
    Simulator(const HMWModel& model, std::uint64_t seed, std::uint64_t stream = 0);

    int state() const { return state_; }
    bool decorated() const { return decorated_; }
    Eigen::Index dim() const { return model_->dimension; }

    /// Advance one step; returns the new state and the drawn emission atom.
    const Emission& step();

  private:
    const HMWModel* model_;
    std::vector<std::vector<double>> row_cdf_, emit_cdf_;
    Rng rng_;
    int state_;
    bool decorated_;
};

/// R_0 = start, R_{k+1} ~ Q(R_k, .), (F_k, a_k) ~ nu(.|R_k). Deterministic in
/// (seed, stream): replicas use stream = replica index.
SimResult simulate(const HMWModel& model, std::size_t n_steps,
                   std::uint64_t seed, std::uint64_t stream = 0);

/// Return times T_1 < T_2 < ... of the start state (T_0 = 0 is not stored).
std::vector<std::size_t> excursion_times(std::span<const int> states);

/// Aggregates of one pseudo-excursion (steps T_k+1 .. T_{k+1}).
struct ExcursionRecord {
    std::size_t length = 0;
    Vec sumF;            // X_{T_{k+1}} - X_{T_k}
    Tensor2 pairTensor;  // sum_{p1<p2} F_{p1} (x) F_{p2}
    Tensor2 squareSum;   // sum_p F_p (x) F_p
    Tensor2 areaDeco;    // sum_p a_p
};

struct SplitResult {
    std::vector<ExcursionRecord> records;
    std::size_t trailing_steps = 0;  // steps of the dropped incomplete excursion
};

SplitResult split_excursions(std::span<const int> states, const IncrementSeq& F);

/// Estimators of the excursion statistics. Normalized quantities divide by
/// C_hat; their standard errors propagate the per-excursion sample variance
/// of the numerator with C_hat treated as a constant.
struct ExcursionStats {
    std::size_t K = 0;
    double beta = 0.0, beta_se = 0.0;
    Vec mean_increment, mean_increment_se;
    Tensor2 covariance;  // mean of sumF (x) sumF
    Tensor2 covariance_se;
    double C = 0.0;                  // trace(covariance)/d
    double isotropy_offdiag = 0.0;   // max |offdiag(covariance)| / C
    Tensor2 gamma, gamma_se;         // C^{-1} * mean antisym(pairTensor)
    Tensor2 gamma0, gamma0_se;       // C^{-1} * mean areaDeco
    Tensor2 gamma_rho, gamma_rho_se; // C^{-1} * mean (antisym(pairTensor)+areaDeco)
    Tensor2 M, M_se;                 // C^{-1} * mean pairTensor
    Tensor2 pair_mean;               // mean pairTensor (unnormalized)
    Tensor2 square_sum_mean;         // mean squareSum
};

ExcursionStats estimate(std::span<const ExcursionRecord> records);

enum class ExactMethod {
    Enumerate,    // depth-first over state paths, bounded horizon
    LinearSolve,  // first-step-analysis linear systems, no horizon
};

struct ExactStats {
    ExcursionStats stats;        // standard errors are all zero
    double residual_mass = 0.0;  // probability not enumerated (Enumerate only)
};

/// Exact expectations of the excursion statistics. Enumerate walks every
/// state path from the start until first return (emission moments factor
/// per state, so emission supports are never expanded) and fails if the
/// un-enumerated mass at the horizon exceeds mass_tol. LinearSolve computes
/// the same expectations from (I - B)^{-1}-type systems and is exact for
/// every finite model.
ExactStats exact_excursion_stats(const HMWModel& model, std::size_t horizon,
                                 double mass_tol,
                                 ExactMethod method = ExactMethod::Enumerate);

/// Shift every emission vector by -E[X_{T_1}]/beta so the excursions of the
/// returned model are exactly centred.
HMWModel recenter(const HMWModel& model);

struct IsotropizeResult {
    HMWModel model;
    Tensor2 W;  // covariance^{-1/2}; emissions map F -> WF, a -> W a W^T
};

IsotropizeResult isotropize(const HMWModel& model);

/// Diagnostic for the i.i.d.-sum approximation: the walk never strays from
/// the completed-excursion sum by more than step_bound * (current excursion
/// length).
struct IidApproxReport {
    double max_gap = 0.0;
    std::size_t max_excursion_length = 0;
    double bound = 0.0;  // step_bound * max_excursion_length
    bool within_bound = false;
    std::vector<std::pair<std::size_t, double>> checkpoints;  // (n, gap at n)
};

IidApproxReport iid_approx_diag(const HMWModel& model, std::size_t n_steps,
                                std::uint64_t seed);

HMWModel model_from_json(const std::string& text);
std::string model_to_json(const HMWModel& model);
HMWModel load_model_file(const std::string& path);

/// One row per estimator: name, value entries, se entries, K, seed.
std::string stats_to_csv(const ExcursionStats& s, std::uint64_t seed);

}  // namespace roughlab
