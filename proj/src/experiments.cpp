#include "roughlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <nlohmann/json.hpp>

namespace roughlab {

namespace {

constexpr double kTiny = 1e-300;

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

// Deterministic replica map: results land in slots indexed by replica, the
// reduction below runs serially in index order, so worker count never
// changes a single output byte.
void parallel_for(std::size_t count, unsigned threads,
                  const std::function<void(std::size_t)>& body) {
    if (threads <= 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    const unsigned n_workers = std::min<unsigned>(threads, static_cast<unsigned>(count));
    std::vector<std::exception_ptr> errors(n_workers);
    for (unsigned w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w]() {
            try {
                for (std::size_t i = next.fetch_add(1); i < count;
                     i = next.fetch_add(1))
                    body(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

StatRow z_row(std::string statistic, std::string component, double value,
              double se, double target, double z_max, std::string estimator,
              std::size_t sample_size, double exact_tol = 1e-12) {
    StatRow row;
    row.statistic = std::move(statistic);
    row.component = std::move(component);
    row.value = value;
    row.se = se;
    row.target = target;
    row.estimator = std::move(estimator);
    row.sample_size = sample_size;
    if (se > 0.0) {
        row.z = (value - target) / se;
        row.tolerance = z_max * se;
        row.pass = std::abs(row.z) <= z_max;
    } else {
        row.z = 0.0;
        row.tolerance = exact_tol;
        row.pass = std::abs(value - target) <= exact_tol;
    }
    return row;
}

StatRow tol_row(std::string statistic, std::string component, double value,
                double target, double tol, std::string estimator,
                std::size_t sample_size) {
    StatRow row;
    row.statistic = std::move(statistic);
    row.component = std::move(component);
    row.value = value;
    row.se = 0.0;
    row.target = target;
    row.z = 0.0;
    row.tolerance = tol;
    row.pass = std::abs(value - target) <= tol;
    row.estimator = std::move(estimator);
    row.sample_size = sample_size;
    return row;
}

StatRow info_row(std::string statistic, std::string component, double value,
                 double se, std::string estimator, std::size_t sample_size) {
    StatRow row;
    row.statistic = std::move(statistic);
    row.component = std::move(component);
    row.value = value;
    row.se = se;
    row.target = std::numeric_limits<double>::quiet_NaN();
    row.z = 0.0;
    row.tolerance = std::numeric_limits<double>::infinity();
    row.pass = true;
    row.estimator = std::move(estimator);
    row.sample_size = sample_size;
    return row;
}

std::string comp2(Eigen::Index i, Eigen::Index j) {
    return std::to_string(i + 1) + std::to_string(j + 1);
}

// Max |M_hat - gamma_hat - (covariance - squareSumMean)/(2 C_hat)| entry.
double ito_identity_residual(const ExcursionStats& s) {
    const Tensor2 lhs =
        s.M - s.gamma - 0.5 / s.C * (s.covariance - s.square_sum_mean);
    return lhs.cwiseAbs().maxCoeff();
}

struct ExactOracle {
    std::optional<ExcursionStats> stats;
    std::string route;
};

ExactOracle exact_oracle(const HMWModel& model, const ExperimentConfig& config,
                         std::vector<std::string>& notes) {
    ExactOracle oracle;
    try {
        const auto ex =
            exact_excursion_stats(model, config.exact_horizon, 1e-9,
                                  ExactMethod::Enumerate);
        oracle.stats = ex.stats;
        oracle.route = "exact.enumerate";
        notes.push_back("exact oracle: enumeration to horizon " +
                        std::to_string(config.exact_horizon) + ", residual mass " +
                        fmt(ex.residual_mass));
        return oracle;
    } catch (const std::exception& e) {
        notes.push_back(std::string("enumeration infeasible (") + e.what() +
                        "); trying the linear solver");
    }
    try {
        const auto ex = exact_excursion_stats(model, 0, 0.0, ExactMethod::LinearSolve);
        oracle.stats = ex.stats;
        oracle.route = "exact.solve";
        notes.push_back("exact oracle: first-step linear solver");
    } catch (const std::exception& e) {
        notes.push_back(std::string("warning: no exact oracle (") + e.what() +
                        "); Monte Carlo statistics are reported unchecked");
    }
    return oracle;
}

void append_matrix_z_rows(std::vector<StatRow>& rows, const std::string& name,
                          const Tensor2& value, const Tensor2& se,
                          const Tensor2* target, double z_max,
                          const std::string& estimator, std::size_t n,
                          bool upper_only) {
    const Eigen::Index d = value.rows();
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (upper_only && j <= i) continue;
            if (target) {
                rows.push_back(z_row(name, comp2(i, j), value(i, j), se(i, j),
                                     (*target)(i, j), z_max, estimator, n));
            } else {
                rows.push_back(info_row(name, comp2(i, j), value(i, j), se(i, j),
                                        estimator, n));
            }
        }
    }
}

HMWModel prepare_centred_isotropic(const HMWModel& model,
                                   const ExperimentConfig& config,
                                   std::vector<std::string>& notes) {
    HMWModel prepared = recenter(model);
    {
        const auto raw = exact_excursion_stats(model, 0, 0.0, ExactMethod::LinearSolve);
        const double drift = raw.stats.mean_increment.cwiseAbs().maxCoeff();
        if (drift > 1e-14)
            notes.push_back("recentred the model (|E[X_T1]|_max = " + fmt(drift) + ")");
    }
    if (config.isotropize) {
        auto iso = isotropize(prepared);
        const Tensor2 dev = iso.W - Tensor2::Identity(iso.W.rows(), iso.W.cols());
        if (dev.cwiseAbs().maxCoeff() > 1e-12)
            notes.push_back("isotropized the model (W != I)");
        prepared = std::move(iso.model);
    } else {
        const auto ex = exact_excursion_stats(prepared, 0, 0.0, ExactMethod::LinearSolve);
        if (ex.stats.isotropy_offdiag > 0.05)
            throw std::domain_error(
                "model violates the isotropy hypothesis (max offdiag/C = " +
                fmt(ex.stats.isotropy_offdiag) + "); drop --no-isotropize");
        notes.push_back("isotropization skipped on request");
    }
    return prepared;
}

}  // namespace

ExperimentKind kind_from_string(const std::string& name) {
    if (name == "anomaly") return ExperimentKind::Anomaly;
    if (name == "donsker") return ExperimentKind::Donsker;
    if (name == "nongeo") return ExperimentKind::NonGeo;
    if (name == "occupation") return ExperimentKind::Occupation;
    if (name == "compare-embeddings") return ExperimentKind::CompareEmbeddings;
    if (name == "holder") return ExperimentKind::Holder;
    throw std::invalid_argument("unknown experiment kind: " + name);
}

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::Anomaly: return "anomaly";
        case ExperimentKind::Donsker: return "donsker";
        case ExperimentKind::NonGeo: return "nongeo";
        case ExperimentKind::Occupation: return "occupation";
        case ExperimentKind::CompareEmbeddings: return "compare-embeddings";
        case ExperimentKind::Holder: return "holder";
    }
    return "?";
}

bool ExperimentReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(),
                       [](const StatRow& r) { return r.pass; });
}

G2Element geodesic_eval(const std::vector<G2Element>& lifts,
                        const IncrementSeq& F, double tau) {
    if (tau < 0.0 || tau > static_cast<double>(F.size()))
        throw std::invalid_argument("geodesic_eval: tau outside [0, N]");
    const auto idx = static_cast<std::size_t>(std::floor(tau));
    const double frac = tau - std::floor(tau);
    if (frac == 0.0 || idx >= F.size()) return lifts[idx];
    const G2Element step = F.has_decorations()
                               ? lift_step(F.steps[idx], F.decorations[idx])
                               : lift_step(F.steps[idx]);
    return tensor_mul(lifts[idx], dilate(step, frac));
}

std::vector<ExcursionRecord> simulate_excursions(const HMWModel& model,
                                                 std::size_t k,
                                                 std::uint64_t seed,
                                                 std::uint64_t stream) {
    if (k == 0) return {};
    Simulator sim(model, seed, stream);
    const Eigen::Index d = model.dimension;
    const int anchor = model.chain.start;

    std::vector<ExcursionRecord> records;
    records.reserve(k);
    ExcursionRecord rec;
    auto reset = [&rec, d]() {
        rec.length = 0;
        rec.sumF = Vec::Zero(d);
        rec.pairTensor = Tensor2::Zero(d, d);
        rec.squareSum = Tensor2::Zero(d, d);
        rec.areaDeco = Tensor2::Zero(d, d);
    };
    reset();

    constexpr std::size_t kStepCap = 2'000'000'000;
    std::size_t steps = 0;
    while (records.size() < k) {
        if (++steps > kStepCap)
            throw std::runtime_error("simulate_excursions: step budget exhausted");
        const Emission& e = sim.step();
        rec.pairTensor.noalias() += rec.sumF * e.F.transpose();
        rec.squareSum.noalias() += e.F * e.F.transpose();
        if (sim.decorated()) rec.areaDeco += e.area;
        rec.sumF += e.F;
        ++rec.length;
        if (sim.state() == anchor) {
            records.push_back(std::move(rec));
            reset();
        }
    }
    return records;
}

ExperimentReport run_anomaly(const ExperimentConfig& config) {
    const HMWModel model = load_model_file(config.model_path);
    validate_or_throw(model);

    ExperimentReport rep;
    rep.kind = ExperimentKind::Anomaly;
    rep.model_path = config.model_path;
    rep.k = config.k;
    rep.seed = config.seed;

    const ExactOracle oracle = exact_oracle(model, config, rep.notes);

    const auto records = simulate_excursions(model, config.k, config.seed);
    const ExcursionStats mc = estimate(records);
    rep.estimator_csv = stats_to_csv(mc, config.seed);

    const ExcursionStats* ex = oracle.stats ? &*oracle.stats : nullptr;
    const std::size_t K = mc.K;
    if (ex) {
        rep.rows.push_back(z_row("beta", "", mc.beta, mc.beta_se, ex->beta,
                                 config.z_max, "hmw.estimate", K));
        rep.rows.push_back(z_row("C", "", mc.C, 0.0, ex->C, config.z_max,
                                 "hmw.estimate", K, 0.05 * std::abs(ex->C) + 1e-12));
        for (Eigen::Index i = 0; i < mc.mean_increment.size(); ++i)
            rep.rows.push_back(z_row("mean_increment", std::to_string(i + 1),
                                     mc.mean_increment(i), mc.mean_increment_se(i),
                                     ex->mean_increment(i), config.z_max,
                                     "hmw.estimate", K));
    }
    append_matrix_z_rows(rep.rows, "gamma", mc.gamma, mc.gamma_se,
                         ex ? &ex->gamma : nullptr, config.z_max, "hmw.estimate",
                         K, true);
    append_matrix_z_rows(rep.rows, "gamma0", mc.gamma0, mc.gamma0_se,
                         ex ? &ex->gamma0 : nullptr, config.z_max, "hmw.estimate",
                         K, true);
    append_matrix_z_rows(rep.rows, "gamma_rho", mc.gamma_rho, mc.gamma_rho_se,
                         ex ? &ex->gamma_rho : nullptr, config.z_max,
                         "hmw.estimate", K, true);
    rep.rows.push_back(tol_row("ito_identity_residual", "",
                               ito_identity_residual(mc), 0.0,
                               config.identity_tol, "hmw.estimate", K));
    return rep;
}

namespace {

struct GridSample {
    std::vector<Vec> level1;      // one per grid time
    std::vector<Tensor2> level2;  // antisym (donsker) or full (nongeo)
};

// Shared replica sweep for the two limit-theorem experiments.
std::vector<GridSample> replica_sweep(
    const HMWModel& model, const ExperimentConfig& config, double eps,
    bool nongeo) {
    std::vector<GridSample> samples(config.replicas);
    parallel_for(config.replicas, config.threads, [&](std::size_t r) {
        SimResult sim = simulate(model, config.n, config.seed, r);
        if (nongeo) sim.increments.decorations.clear();
        GridSample gs;
        if (nongeo) {
            const auto running = nongeo_lift(sim.increments);
            for (const double t : config.grid) {
                const auto idx = static_cast<std::size_t>(
                    std::llround(t * static_cast<double>(config.n)));
                const T2Element y = dilate(running[idx], eps);
                gs.level1.push_back(y.a);
                gs.level2.push_back(y.b);
            }
        } else {
            const auto lifts = path_lift(sim.increments);
            for (const double t : config.grid) {
                const G2Element x = dilate(
                    geodesic_eval(lifts, sim.increments,
                                  t * static_cast<double>(config.n)),
                    eps);
                gs.level1.push_back(x.a);
                gs.level2.push_back(0.5 * (x.b - x.b.transpose()));
            }
        }
        samples[r] = std::move(gs);
    });
    return samples;
}

}  // namespace

ExperimentReport run_donsker(const ExperimentConfig& config) {
    const HMWModel raw_model = load_model_file(config.model_path);
    validate_or_throw(raw_model);

    ExperimentReport rep;
    rep.kind = ExperimentKind::Donsker;
    rep.model_path = config.model_path;
    rep.n = config.n;
    rep.replicas = config.replicas;
    rep.seed = config.seed;

    const HMWModel model = prepare_centred_isotropic(raw_model, config, rep.notes);
    const ExcursionStats ex =
        exact_excursion_stats(model, 0, 0.0, ExactMethod::LinearSolve).stats;
    const double eps =
        1.0 / std::sqrt(static_cast<double>(config.n) * ex.C / ex.beta);
    rep.notes.push_back("dilation (beta^-1 N C)^-1/2 with beta = " + fmt(ex.beta) +
                        ", C = " + fmt(ex.C));

    const auto samples = replica_sweep(model, config, eps, false);
    const Eigen::Index d = model.dimension;
    const std::size_t R = config.replicas;

    for (std::size_t g = 0; g < config.grid.size(); ++g) {
        const double t = config.grid[g];
        const std::string at = "[t=" + fmt(t) + "]";

        Vec mean1 = Vec::Zero(d);
        for (const auto& s : samples) mean1 += s.level1[g];
        mean1 /= static_cast<double>(R);
        Vec var1 = Vec::Zero(d);
        for (const auto& s : samples)
            var1 += (s.level1[g] - mean1).cwiseAbs2();
        var1 /= static_cast<double>(R - 1);
        for (Eigen::Index i = 0; i < d; ++i)
            rep.rows.push_back(z_row("level1_mean" + at, std::to_string(i + 1),
                                     mean1(i),
                                     std::sqrt(var1(i) / static_cast<double>(R)),
                                     0.0, config.z_max, "replica mean", R));

        // centered covariance of the rescaled endpoint vs t I; the verdict
        // allows the larger of the pinned relative tolerance and z_max
        // sampling errors
        Tensor2 cov = Tensor2::Zero(d, d);
        for (const auto& s : samples) {
            const Vec c = s.level1[g] - mean1;
            cov.noalias() += c * c.transpose();
        }
        cov /= static_cast<double>(R - 1);
        Tensor2 cov_var = Tensor2::Zero(d, d);
        for (const auto& s : samples) {
            const Vec c = s.level1[g] - mean1;
            cov_var += (c * c.transpose() - cov).cwiseAbs2();
        }
        cov_var /= static_cast<double>(R - 1);
        for (Eigen::Index i = 0; i < d; ++i) {
            for (Eigen::Index j = i; j < d; ++j) {
                const double target = (i == j) ? t : 0.0;
                const double se = std::sqrt(cov_var(i, j) / static_cast<double>(R));
                StatRow row = tol_row("level1_cov" + at, comp2(i, j), cov(i, j),
                                      target,
                                      std::max(config.cov_tol * t, config.z_max * se),
                                      "replica covariance", R);
                row.se = se;
                if (se > 0.0) row.z = (cov(i, j) - target) / se;
                rep.rows.push_back(std::move(row));
            }
        }

        // mean antisymmetric level 2 vs Gamma_rho * t
        Tensor2 mean2 = Tensor2::Zero(d, d);
        for (const auto& s : samples) mean2 += s.level2[g];
        mean2 /= static_cast<double>(R);
        Tensor2 var2 = Tensor2::Zero(d, d);
        for (const auto& s : samples)
            var2 += (s.level2[g] - mean2).cwiseAbs2();
        var2 /= static_cast<double>(R - 1);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = i + 1; j < d; ++j)
                rep.rows.push_back(
                    z_row("level2_antisym_mean" + at, comp2(i, j), mean2(i, j),
                          std::sqrt(var2(i, j) / static_cast<double>(R)),
                          ex.gamma_rho(i, j) * t, config.z_max, "replica mean", R));
    }

    // normality proxy at the last grid time: componentwise excess kurtosis
    if (!config.grid.empty()) {
        const std::size_t g = config.grid.size() - 1;
        const double t = config.grid[g];
        if (t > 0.0) {
            for (Eigen::Index i = 0; i < d; ++i) {
                double m1 = 0.0;
                for (const auto& s : samples) m1 += s.level1[g](i);
                m1 /= static_cast<double>(R);
                double m2 = 0.0, m4 = 0.0;
                for (const auto& s : samples) {
                    const double c = s.level1[g](i) - m1;
                    m2 += c * c;
                    m4 += c * c * c * c;
                }
                m2 /= static_cast<double>(R);
                m4 /= static_cast<double>(R);
                const double kurt = m4 / std::max(m2 * m2, kTiny) - 3.0;
                const double se = std::sqrt(24.0 / static_cast<double>(R));
                rep.rows.push_back(z_row("excess_kurtosis[t=" + fmt(t) + "]",
                                         std::to_string(i + 1), kurt, se, 0.0,
                                         config.z_max, "replica moments", R));
            }
        }
    }
    return rep;
}

ExperimentReport run_nongeo(const ExperimentConfig& config) {
    const HMWModel raw_model = load_model_file(config.model_path);
    validate_or_throw(raw_model);

    ExperimentReport rep;
    rep.kind = ExperimentKind::NonGeo;
    rep.model_path = config.model_path;
    rep.n = config.n;
    rep.replicas = config.replicas;
    rep.seed = config.seed;

    HMWModel model = prepare_centred_isotropic(raw_model, config, rep.notes);
    if (model.has_decorations()) {
        rep.notes.push_back(
            "decorations dropped: the iterated-sum lift uses bare steps");
        for (auto& support : model.emissions)
            for (auto& e : support) e.area.setZero();
    }
    const ExcursionStats ex =
        exact_excursion_stats(model, 0, 0.0, ExactMethod::LinearSolve).stats;
    const double eps =
        1.0 / std::sqrt(static_cast<double>(config.n) * ex.C / ex.beta);

    const auto samples = replica_sweep(model, config, eps, true);
    const Eigen::Index d = model.dimension;
    const std::size_t R = config.replicas;

    for (std::size_t g = 0; g < config.grid.size(); ++g) {
        const double t = config.grid[g];
        Tensor2 mean2 = Tensor2::Zero(d, d);
        for (const auto& s : samples) mean2 += s.level2[g];
        mean2 /= static_cast<double>(R);
        Tensor2 var2 = Tensor2::Zero(d, d);
        for (const auto& s : samples)
            var2 += (s.level2[g] - mean2).cwiseAbs2();
        var2 /= static_cast<double>(R - 1);
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j)
                rep.rows.push_back(z_row("level2_mean[t=" + fmt(t) + "]",
                                         comp2(i, j), mean2(i, j),
                                         std::sqrt(var2(i, j) / static_cast<double>(R)),
                                         ex.M(i, j) * t, config.z_max,
                                         "replica mean", R));
    }

    // every sampled endpoint must be non-geometric once steps are nonzero
    std::size_t nongeo_count = 0, moved = 0;
    {
        std::vector<char> flags(R, 0), has_steps(R, 0);
        parallel_for(R, config.threads, [&](std::size_t r) {
            SimResult sim = simulate(model, config.n, config.seed, r);
            const auto running = nongeo_lift(sim.increments);
            has_steps[r] = square_sum(sim.increments).norm() > 0.0 ? 1 : 0;
            flags[r] = !is_geometric(running.back(), 1e-9) ? 1 : 0;
        });
        for (std::size_t r = 0; r < R; ++r) {
            moved += has_steps[r];
            nongeo_count += flags[r];
        }
    }
    rep.rows.push_back(tol_row("nongeo_fraction", "",
                               static_cast<double>(nongeo_count) /
                                   static_cast<double>(std::max<std::size_t>(moved, 1)),
                               1.0, 0.0, "is_geometric@1e-9", R));

    // excursion estimators on a separate stream, for the exact Ito identity
    const auto records = simulate_excursions(model, config.k, config.seed, R + 1);
    const ExcursionStats mc = estimate(records);
    rep.estimator_csv = stats_to_csv(mc, config.seed);
    rep.rows.push_back(tol_row("ito_identity_residual", "",
                               ito_identity_residual(mc), 0.0,
                               config.identity_tol, "hmw.estimate", mc.K));
    append_matrix_z_rows(rep.rows, "M_excursion", mc.M, mc.M_se, &ex.M,
                         config.z_max, "hmw.estimate", mc.K, false);
    return rep;
}

ExperimentReport run_occupation(const ExperimentConfig& config) {
    const HMWModel model = load_model_file(config.model_path);
    validate_or_throw(model);

    ExperimentReport rep;
    rep.kind = ExperimentKind::Occupation;
    rep.model_path = config.model_path;
    rep.n = config.n;
    rep.seed = config.seed;
    rep.word = config.word;

    if (config.word.empty())
        throw std::invalid_argument("occupation experiment needs --word");
    Word w;
    {
        std::istringstream in(config.word);
        std::string label;
        while (std::getline(in, label, ',')) {
            const auto it = std::find(model.chain.states.begin(),
                                      model.chain.states.end(), label);
            if (it == model.chain.states.end())
                throw std::invalid_argument("unknown state label in word: " + label);
            w.push_back(static_cast<Letter>(it - model.chain.states.begin()));
        }
        if (w.empty()) throw std::invalid_argument("empty word");
    }

    const Vec pi = stationary(model.chain);
    const SimResult sim = simulate(model, config.n, config.seed);
    const std::span<const int> seq(sim.states.data() + 1, config.n);

    std::vector<std::size_t> grid;
    for (std::size_t m = config.n; m >= std::max<std::size_t>(64, 2 * w.size());
         m /= 2) {
        grid.push_back(m);
        if (grid.size() >= 8) break;
    }
    if (grid.empty()) grid.push_back(config.n);
    std::reverse(grid.begin(), grid.end());

    std::vector<double> pivec(pi.data(), pi.data() + pi.size());
    rep.table = ergodic_scaling(seq, w, pivec, grid);

    const ErgodicRow& last = rep.table.back();
    rep.rows.push_back(tol_row("ergodic_abs_error_final", config.word,
                               last.abs_error, 0.0, config.occupation_tol,
                               "words.ergodic_scaling", last.n));
    return rep;
}

ExperimentReport run_compare_embeddings(const ExperimentConfig& config) {
    const HMWModel model = load_model_file(config.model_path);
    validate_or_throw(model);

    ExperimentReport rep;
    rep.kind = ExperimentKind::CompareEmbeddings;
    rep.model_path = config.model_path;
    rep.k = config.k;
    rep.seed = config.seed;

    const ExactOracle oracle = exact_oracle(model, config, rep.notes);
    const ExcursionStats* ex = oracle.stats ? &*oracle.stats : nullptr;

    const auto records = simulate_excursions(model, config.k, config.seed);
    const ExcursionStats mc = estimate(records);
    rep.estimator_csv = stats_to_csv(mc, config.seed);

    // the two embeddings of the same walk: piecewise linear (gamma) and the
    // decorated geodesic one (gamma_rho = gamma + gamma0)
    append_matrix_z_rows(rep.rows, "gamma_pwl", mc.gamma, mc.gamma_se,
                         ex ? &ex->gamma : nullptr, config.z_max, "hmw.estimate",
                         mc.K, true);
    append_matrix_z_rows(rep.rows, "gamma0_decoration", mc.gamma0, mc.gamma0_se,
                         ex ? &ex->gamma0 : nullptr, config.z_max,
                         "hmw.estimate", mc.K, true);
    append_matrix_z_rows(rep.rows, "gamma_rho_decorated", mc.gamma_rho,
                         mc.gamma_rho_se, ex ? &ex->gamma_rho : nullptr,
                         config.z_max, "hmw.estimate", mc.K, true);
    // additivity is exact by construction of the estimators
    const double additivity =
        (mc.gamma_rho - mc.gamma - mc.gamma0).cwiseAbs().maxCoeff();
    rep.rows.push_back(tol_row("gamma_rho_additivity", "", additivity, 0.0,
                               config.identity_tol, "hmw.estimate", mc.K));
    if (ex) {
        const double sep = (ex->gamma_rho - ex->gamma).cwiseAbs().maxCoeff();
        rep.rows.push_back(info_row("embedding_class_separation", "", sep, 0.0,
                                    oracle.route, 0));
    }
    return rep;
}

double holder_ratio(const std::vector<G2Element>& lifts, double eps) {
    const std::size_t n = lifts.size() - 1;
    if (n == 0) return 0.0;
    double sup = 0.0;
    for (std::size_t half = n; half >= 1; half /= 2) {
        for (std::size_t s = 0; s + half <= n; s += half) {
            const std::size_t t = s + half;
            const double dist =
                hom_norm(dilate(tensor_mul(tensor_inv(lifts[s]), lifts[t]), eps));
            const double dt = static_cast<double>(half) / static_cast<double>(n);
            sup = std::max(sup, dist / std::sqrt(dt));
        }
        if (half == 1) break;
    }
    return sup;
}

ExperimentReport run_holder(const ExperimentConfig& config) {
    const HMWModel raw_model = load_model_file(config.model_path);
    validate_or_throw(raw_model);

    ExperimentReport rep;
    rep.kind = ExperimentKind::Holder;
    rep.model_path = config.model_path;
    rep.n = config.n;
    rep.replicas = config.replicas;
    rep.seed = config.seed;

    const HMWModel model = prepare_centred_isotropic(raw_model, config, rep.notes);
    const ExcursionStats ex =
        exact_excursion_stats(model, 0, 0.0, ExactMethod::LinearSolve).stats;

    std::vector<std::size_t> n_grid;
    for (std::size_t m = 1024; m <= config.n; m *= 2) n_grid.push_back(m);
    if (n_grid.empty()) n_grid.push_back(config.n);

    const std::size_t seeds = std::max<std::size_t>(config.replicas, 2);
    std::vector<double> log_n, log_mean;
    for (const std::size_t N : n_grid) {
        std::vector<double> h(seeds, 0.0);
        parallel_for(seeds, config.threads, [&](std::size_t r) {
            const SimResult sim = simulate(model, N, config.seed, r);
            const auto lifts = path_lift(sim.increments);
            const double eps =
                1.0 / std::sqrt(static_cast<double>(N) * ex.C / ex.beta);
            h[r] = holder_ratio(lifts, eps);
        });
        double mean = 0.0;
        for (const double v : h) mean += v;
        mean /= static_cast<double>(seeds);
        double var = 0.0;
        for (const double v : h) var += (v - mean) * (v - mean);
        var /= static_cast<double>(seeds - 1);
        rep.rows.push_back(info_row("holder_mean[N=" + std::to_string(N) + "]",
                                    "", mean,
                                    std::sqrt(var / static_cast<double>(seeds)),
                                    "dyadic sup", seeds));
        log_n.push_back(std::log(static_cast<double>(N)));
        log_mean.push_back(std::log(std::max(mean, kTiny)));
    }

    // least-squares slope of log E[H_N] against log N
    double slope = 0.0;
    if (log_n.size() >= 2) {
        const auto m = static_cast<double>(log_n.size());
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < log_n.size(); ++i) {
            sx += log_n[i];
            sy += log_mean[i];
            sxx += log_n[i] * log_n[i];
            sxy += log_n[i] * log_mean[i];
        }
        slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    }
    StatRow row;
    row.statistic = "holder_log_slope";
    row.value = slope;
    row.target = 0.0;
    row.tolerance = config.holder_slope_max;
    row.pass = slope <= config.holder_slope_max;
    row.estimator = "log-log least squares";
    row.sample_size = seeds * n_grid.size();
    rep.rows.push_back(std::move(row));
    return rep;
}

ExperimentReport run_experiment(const ExperimentConfig& config) {
    switch (config.kind) {
        case ExperimentKind::Anomaly: return run_anomaly(config);
        case ExperimentKind::Donsker: return run_donsker(config);
        case ExperimentKind::NonGeo: return run_nongeo(config);
        case ExperimentKind::Occupation: return run_occupation(config);
        case ExperimentKind::CompareEmbeddings:
            return run_compare_embeddings(config);
        case ExperimentKind::Holder: return run_holder(config);
    }
    throw std::logic_error("run_experiment: bad kind");
}

std::string report_to_csv(const ExperimentReport& report) {
    std::ostringstream out;
    if (report.kind == ExperimentKind::Occupation) {
        const std::string word =
            report.word.find(',') != std::string::npos ? '"' + report.word + '"'
                                                       : report.word;
        out << "N,word,count,rescaled,predicted,abs_error\n";
        for (const auto& row : report.table) {
            out << row.n << ',' << word << ',' << row.count.get_str() << ','
                << fmt(row.rescaled) << ',' << fmt(row.predicted) << ','
                << fmt(row.abs_error) << '\n';
        }
        return out.str();
    }
    out << "statistic,component,value,se,target,z,pass\n";
    for (const auto& row : report.rows) {
        out << row.statistic << ',' << row.component << ',' << fmt(row.value)
            << ',' << fmt(row.se) << ',' << fmt(row.target) << ',' << fmt(row.z)
            << ',' << (row.pass ? 1 : 0) << '\n';
    }
    return out.str();
}

std::string report_to_json(const ExperimentReport& report) {
    nlohmann::json j;
    j["kind"] = to_string(report.kind);
    j["model"] = report.model_path;
    j["n"] = report.n;
    j["k"] = report.k;
    j["replicas"] = report.replicas;
    j["seed"] = report.seed;
    j["notes"] = report.notes;
    j["all_pass"] = report.all_pass();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json r;
        r["statistic"] = row.statistic;
        r["component"] = row.component;
        r["value"] = row.value;
        r["se"] = row.se;
        if (std::isfinite(row.target)) r["target"] = row.target;
        r["z"] = row.z;
        if (std::isfinite(row.tolerance)) r["tolerance"] = row.tolerance;
        r["pass"] = row.pass;
        r["estimator"] = row.estimator;
        r["sample_size"] = row.sample_size;
        rows.push_back(std::move(r));
    }
    j["statistics"] = std::move(rows);
    if (report.kind == ExperimentKind::Occupation) {
        nlohmann::json table = nlohmann::json::array();
        for (const auto& row : report.table) {
            nlohmann::json r;
            r["N"] = row.n;
            r["word"] = report.word;
            r["count"] = row.count.get_str();
            r["rescaled"] = row.rescaled;
            r["predicted"] = row.predicted;
            r["abs_error"] = row.abs_error;
            table.push_back(std::move(r));
        }
        j["table"] = std::move(table);
    }
    return j.dump(2);
}

}  // namespace roughlab
