#include "roughlab/hmw.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "roughlab/rng.hpp"

namespace roughlab {

namespace {

using nlohmann::json;

Tensor2 antisym(const Tensor2& b) { return 0.5 * (b - b.transpose()); }

// Per-state emission moments; everything the exact routes need.
struct StateMoments {
    std::vector<Vec> m1;       // E[F | u]
    std::vector<Tensor2> m2;   // E[F (x) F | u]
    std::vector<Tensor2> ma;   // E[a | u]
};

StateMoments state_moments(const HMWModel& model) {
    const Eigen::Index d = model.dimension;
    StateMoments m;
    for (const auto& support : model.emissions) {
        Vec v = Vec::Zero(d);
        Tensor2 sq = Tensor2::Zero(d, d);
        Tensor2 ar = Tensor2::Zero(d, d);
        for (const auto& e : support) {
            v += e.p * e.F;
            sq += e.p * e.F * e.F.transpose();
            ar += e.p * e.area;
        }
        m.m1.push_back(std::move(v));
        m.m2.push_back(std::move(sq));
        m.ma.push_back(std::move(ar));
    }
    return m;
}

// Raw excursion-expectation moments shared by both exact routes.
struct RawMoments {
    double beta = 0.0;
    Vec meanF;
    Tensor2 pair;     // E[sum_{p1<p2} F (x) F]
    Tensor2 square;   // E[sum_p F (x) F]
    Tensor2 area;     // E[sum_p a_p]
    Tensor2 secmom;   // E[X_{T1} (x) X_{T1}] = pair + pair^T + square
    double residual = 0.0;
};

constexpr std::size_t kEnumerateBudget = 20'000'000;

struct EnumState {
    const HMWModel* model;
    const StateMoments* mom;
    std::size_t horizon;
    std::size_t nodes = 0;
    RawMoments acc;
};

void enum_dfs(EnumState& st, int u, double prob, std::size_t len, const Vec& S,
              const Tensor2& P, const Tensor2& Z, const Tensor2& A) {
    const auto& Q = st.model->chain.Q;
    const int start = st.model->chain.start;
    const auto n = static_cast<int>(st.model->chain.n_states());
    for (int v = 0; v < n; ++v) {
        const double q = Q(u, v);
        if (q == 0.0) continue;
        if (++st.nodes > kEnumerateBudget)
            throw std::runtime_error("exact_excursion_stats: enumeration budget exceeded");
        const double p2 = prob * q;
        const auto vu = static_cast<std::size_t>(v);
        const Vec& m1 = st.mom->m1[vu];
        const Tensor2 P2 = P + S * m1.transpose();
        if (v == start) {
            const Vec S2 = S + m1;
            st.acc.beta += p2 * static_cast<double>(len + 1);
            st.acc.meanF += p2 * S2;
            st.acc.pair += p2 * P2;
            const Tensor2 Z2 = Z + st.mom->m2[vu];
            st.acc.square += p2 * Z2;
            st.acc.area += p2 * (A + st.mom->ma[vu]);
            st.acc.secmom += p2 * (P2 + P2.transpose() + Z2);
        } else if (len + 1 < st.horizon) {
            enum_dfs(st, v, p2, len + 1, S + m1, P2, Z + st.mom->m2[vu],
                     A + st.mom->ma[vu]);
        } else {
            st.acc.residual += p2;
        }
    }
}

RawMoments raw_moments_enumerate(const HMWModel& model, std::size_t horizon) {
    const Eigen::Index d = model.dimension;
    const StateMoments mom = state_moments(model);
    EnumState st{&model, &mom, horizon};
    st.acc.meanF = Vec::Zero(d);
    st.acc.pair = Tensor2::Zero(d, d);
    st.acc.square = Tensor2::Zero(d, d);
    st.acc.area = Tensor2::Zero(d, d);
    st.acc.secmom = Tensor2::Zero(d, d);
    enum_dfs(st, model.chain.start, 1.0, 0, Vec::Zero(d), Tensor2::Zero(d, d),
             Tensor2::Zero(d, d), Tensor2::Zero(d, d));
    return st.acc;
}

// First-step analysis. With B = Q killed after hitting the start row,
// V = (I - B^T)^{-1} Q(start,.) gives expected visit counts over one
// excursion, and the accumulated-sum system S = B^T (S + V m1) yields the
// expected ordered-pair tensor. Emission moments enter only through their
// per-state means, which is exact by conditional independence.
RawMoments raw_moments_solve(const HMWModel& model) {
    const Eigen::Index d = model.dimension;
    const auto n = static_cast<Eigen::Index>(model.chain.n_states());
    const int start = model.chain.start;
    const StateMoments mom = state_moments(model);

    Tensor2 B = model.chain.Q;
    B.row(start).setZero();
    const Tensor2 A = Tensor2::Identity(n, n) - B.transpose();
    Eigen::PartialPivLU<Tensor2> lu(A);

    Vec x1 = model.chain.Q.row(start).transpose();
    Vec V = lu.solve(x1);

    RawMoments raw;
    raw.beta = V.sum();
    raw.meanF = Vec::Zero(d);
    raw.square = Tensor2::Zero(d, d);
    raw.area = Tensor2::Zero(d, d);
    for (Eigen::Index u = 0; u < n; ++u) {
        const auto uu = static_cast<std::size_t>(u);
        raw.meanF += V(u) * mom.m1[uu];
        raw.square += V(u) * mom.m2[uu];
        raw.area += V(u) * mom.ma[uu];
    }

    // y(v) = V(v) m1(v); solve componentwise S = B^T (S + y).
    Tensor2 Y(n, d);
    for (Eigen::Index u = 0; u < n; ++u)
        Y.row(u) = V(u) * mom.m1[static_cast<std::size_t>(u)].transpose();
    Tensor2 S(n, d);
    const Tensor2 BtY = B.transpose() * Y;
    for (Eigen::Index c = 0; c < d; ++c) S.col(c) = lu.solve(BtY.col(c));

    raw.pair = Tensor2::Zero(d, d);
    for (Eigen::Index u = 0; u < n; ++u)
        raw.pair += S.row(u).transpose() * mom.m1[static_cast<std::size_t>(u)].transpose();
    raw.secmom = raw.pair + raw.pair.transpose() + raw.square;
    return raw;
}

ExcursionStats stats_from_raw(const RawMoments& raw, Eigen::Index d) {
    ExcursionStats s;
    s.K = 0;
    s.beta = raw.beta;
    s.mean_increment = raw.meanF;
    s.mean_increment_se = Vec::Zero(d);
    s.covariance = raw.secmom;
    s.covariance_se = Tensor2::Zero(d, d);
    s.C = raw.secmom.trace() / static_cast<double>(d);
    if (s.C <= 0.0)
        throw std::domain_error("exact_excursion_stats: C <= 0 (degenerate excursions)");
    double off = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            if (i != j) off = std::max(off, std::abs(raw.secmom(i, j)));
    s.isotropy_offdiag = off / s.C;
    s.gamma = antisym(raw.pair) / s.C;
    s.gamma_se = Tensor2::Zero(d, d);
    s.gamma0 = raw.area / s.C;
    s.gamma0_se = Tensor2::Zero(d, d);
    s.gamma_rho = s.gamma + s.gamma0;
    s.gamma_rho_se = Tensor2::Zero(d, d);
    s.M = raw.pair / s.C;
    s.M_se = Tensor2::Zero(d, d);
    s.pair_mean = raw.pair;
    s.square_sum_mean = raw.square;
    return s;
}

// Elementwise Welford accumulator over Eigen matrices.
struct MatWelford {
    std::size_t n = 0;
    Tensor2 mean, m2;

    void init(Eigen::Index r, Eigen::Index c) {
        mean = Tensor2::Zero(r, c);
        m2 = Tensor2::Zero(r, c);
    }
    void add(const Tensor2& x) {
        ++n;
        const Tensor2 delta = x - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta.cwiseProduct(x - mean);
    }
    Tensor2 se() const {
        if (n < 2) return Tensor2::Zero(mean.rows(), mean.cols());
        return (m2 / static_cast<double>(n - 1) / static_cast<double>(n))
            .cwiseSqrt();
    }
};

}  // namespace

bool HMWModel::has_decorations() const {
    for (const auto& support : emissions)
        for (const auto& e : support)
            if (e.area.size() > 0 && e.area.norm() != 0.0) return true;
    return false;
}

ValidationReport validate(const HMWModel& model) {
    ValidationReport rep;
    auto fail = [&rep](std::string msg) {
        rep.ok = false;
        rep.errors.push_back(std::move(msg));
    };

    const auto n = model.chain.n_states();
    if (n == 0) fail("chain.states: empty state set");
    if (model.dimension < 1) fail("dimension: must be >= 1");
    if (model.chain.Q.rows() != static_cast<Eigen::Index>(n) ||
        model.chain.Q.cols() != static_cast<Eigen::Index>(n))
        fail("Q: shape does not match the state count");
    if (model.chain.start < 0 || static_cast<std::size_t>(model.chain.start) >= n)
        fail("start: index out of range");
    if (!rep.ok) return rep;

    for (std::size_t i = 0; i < n; ++i) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double q = model.chain.Q(static_cast<Eigen::Index>(i),
                                           static_cast<Eigen::Index>(j));
            if (q < 0.0)
                fail("Q[" + std::to_string(i) + "][" + std::to_string(j) +
                     "]: negative entry");
            row_sum += q;
        }
        if (std::abs(row_sum - 1.0) > 1e-12)
            fail("Q[" + std::to_string(i) + "]: row sums to " +
                 std::to_string(row_sum) + ", not 1");
    }

    // Strong connectivity of the positive-entry graph: forward and backward
    // reachability from state 0 must both cover everything.
    auto reach = [&](bool forward) {
        std::vector<char> seen(n, 0);
        std::vector<std::size_t> stack{0};
        seen[0] = 1;
        while (!stack.empty()) {
            const std::size_t u = stack.back();
            stack.pop_back();
            for (std::size_t v = 0; v < n; ++v) {
                const double q = forward
                                     ? model.chain.Q(static_cast<Eigen::Index>(u),
                                                     static_cast<Eigen::Index>(v))
                                     : model.chain.Q(static_cast<Eigen::Index>(v),
                                                     static_cast<Eigen::Index>(u));
                if (q > 0.0 && !seen[v]) {
                    seen[v] = 1;
                    stack.push_back(v);
                }
            }
        }
        return std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; });
    };
    if (!reach(true) || !reach(false)) fail("Q: chain is not irreducible");

    if (model.emissions.size() != n) {
        fail("emissions: expected one support per state");
        return rep;
    }
    const Eigen::Index d = model.dimension;
    for (std::size_t u = 0; u < n; ++u) {
        double mass = 0.0;
        if (model.emissions[u].empty())
            fail("emissions[" + std::to_string(u) + "]: empty support");
        for (std::size_t j = 0; j < model.emissions[u].size(); ++j) {
            const auto& e = model.emissions[u][j];
            const std::string loc =
                "emissions[" + std::to_string(u) + "][" + std::to_string(j) + "]";
            if (e.p < 0.0) fail(loc + ".p: negative probability");
            mass += e.p;
            if (e.F.size() != d) fail(loc + ".F: wrong dimension");
            if (e.area.rows() != d || e.area.cols() != d)
                fail(loc + ".area: wrong shape");
            else if ((e.area + e.area.transpose()).norm() >
                     1e-12 * std::max(1.0, e.area.norm()))
                fail(loc + ".area: not antisymmetric");
            if (e.F.size() == d)
                rep.step_bound = std::max(rep.step_bound, e.F.norm());
        }
        if (std::abs(mass - 1.0) > 1e-12)
            fail("emissions[" + std::to_string(u) + "]: probabilities sum to " +
                 std::to_string(mass) + ", not 1");
    }
    return rep;
}

void validate_or_throw(const HMWModel& model) {
    const auto rep = validate(model);
    if (rep.ok) return;
    std::string msg = "invalid model:";
    for (const auto& e : rep.errors) msg += "\n  " + e;
    throw std::invalid_argument(msg);
}

Vec stationary(const MarkovSpec& chain) {
    const auto n = static_cast<Eigen::Index>(chain.n_states());
    if (n == 0) throw std::invalid_argument("stationary: empty chain");
    // pi (Q - I) = 0 with the normalization row sum(pi) = 1
    Tensor2 A = chain.Q.transpose() - Tensor2::Identity(n, n);
    A.row(n - 1).setOnes();
    Vec rhs = Vec::Zero(n);
    rhs(n - 1) = 1.0;
    Vec pi = A.fullPivLu().solve(rhs);
    const double residual = (chain.Q.transpose() * pi - pi).norm();
    if (residual > 1e-10)
        throw std::runtime_error("stationary: solver residual " +
                                 std::to_string(residual));
    for (Eigen::Index i = 0; i < n; ++i)
        if (!(pi(i) > 0.0))
            throw std::runtime_error("stationary: non-positive mass at state " +
                                     std::to_string(i));
    return pi;
}

Simulator::Simulator(const HMWModel& model, std::uint64_t seed,
                     std::uint64_t stream)
    : model_(&model), rng_(seed, stream), state_(model.chain.start),
      decorated_(model.has_decorations()) {
    validate_or_throw(model);
    const auto n = model.chain.n_states();
    row_cdf_.resize(n);
    emit_cdf_.resize(n);
    for (std::size_t u = 0; u < n; ++u) {
        double acc = 0.0;
        for (std::size_t v = 0; v < n; ++v) {
            acc += model.chain.Q(static_cast<Eigen::Index>(u),
                                 static_cast<Eigen::Index>(v));
            row_cdf_[u].push_back(acc);
        }
        acc = 0.0;
        for (const auto& e : model.emissions[u]) {
            acc += e.p;
            emit_cdf_[u].push_back(acc);
        }
    }
}

const Emission& Simulator::step() {
    const auto uu = static_cast<std::size_t>(state_);
    state_ = static_cast<int>(rng_.pick_cdf(row_cdf_[uu]));
    const auto su = static_cast<std::size_t>(state_);
    return model_->emissions[su][rng_.pick_cdf(emit_cdf_[su])];
}

SimResult simulate(const HMWModel& model, std::size_t n_steps,
                   std::uint64_t seed, std::uint64_t stream) {
    Simulator sim(model, seed, stream);
    const bool decorated = sim.decorated();
    SimResult out;
    out.states.reserve(n_steps + 1);
    out.states.push_back(model.chain.start);
    out.increments.steps.reserve(n_steps);
    if (decorated) out.increments.decorations.reserve(n_steps);
    for (std::size_t k = 0; k < n_steps; ++k) {
        const Emission& e = sim.step();
        out.states.push_back(sim.state());
        out.increments.steps.push_back(e.F);
        if (decorated) out.increments.decorations.push_back(e.area);
    }
    return out;
}

std::vector<std::size_t> excursion_times(std::span<const int> states) {
    std::vector<std::size_t> times;
    if (states.empty()) return times;
    const int anchor = states[0];
    for (std::size_t k = 1; k < states.size(); ++k)
        if (states[k] == anchor) times.push_back(k);
    return times;
}

SplitResult split_excursions(std::span<const int> states, const IncrementSeq& F) {
    if (states.size() != F.size() + 1)
        throw std::invalid_argument("split_excursions: state/step count mismatch");
    const Eigen::Index d = F.dim();
    const int anchor = states.empty() ? 0 : states[0];

    SplitResult out;
    ExcursionRecord rec;
    auto reset = [&rec, d]() {
        rec.length = 0;
        rec.sumF = Vec::Zero(d);
        rec.pairTensor = Tensor2::Zero(d, d);
        rec.squareSum = Tensor2::Zero(d, d);
        rec.areaDeco = Tensor2::Zero(d, d);
    };
    reset();

    for (std::size_t k = 0; k < F.size(); ++k) {
        const Vec& step = F.steps[k];
        rec.pairTensor.noalias() += rec.sumF * step.transpose();
        rec.squareSum.noalias() += step * step.transpose();
        if (F.has_decorations()) rec.areaDeco += F.decorations[k];
        rec.sumF += step;
        ++rec.length;
        if (states[k + 1] == anchor) {
            out.records.push_back(std::move(rec));
            reset();
        }
    }
    out.trailing_steps = rec.length;
    if (out.records.empty())
        throw std::invalid_argument("split_excursions: no complete excursion");
    return out;
}

ExcursionStats estimate(std::span<const ExcursionRecord> records) {
    if (records.size() < 2)
        throw std::invalid_argument("estimate: need at least 2 excursions");
    const Eigen::Index d = records[0].sumF.size();

    MatWelford w_len, w_sum, w_outer, w_anti, w_area, w_rho, w_pair, w_square;
    w_len.init(1, 1);
    w_sum.init(d, 1);
    w_outer.init(d, d);
    w_anti.init(d, d);
    w_area.init(d, d);
    w_rho.init(d, d);
    w_pair.init(d, d);
    w_square.init(d, d);

    for (const auto& r : records) {
        Tensor2 len(1, 1);
        len(0, 0) = static_cast<double>(r.length);
        w_len.add(len);
        w_sum.add(r.sumF);
        w_outer.add(r.sumF * r.sumF.transpose());
        const Tensor2 anti_pair = antisym(r.pairTensor);
        w_anti.add(anti_pair);
        w_area.add(r.areaDeco);
        w_rho.add(anti_pair + r.areaDeco);
        w_pair.add(r.pairTensor);
        w_square.add(r.squareSum);
    }

    ExcursionStats s;
    s.K = records.size();
    s.beta = w_len.mean(0, 0);
    s.beta_se = w_len.se()(0, 0);
    s.mean_increment = w_sum.mean;
    s.mean_increment_se = w_sum.se();
    s.covariance = w_outer.mean;
    s.covariance_se = w_outer.se();
    s.C = s.covariance.trace() / static_cast<double>(d);
    if (s.C <= 0.0)
        throw std::domain_error("estimate: C_hat <= 0 (degenerate excursions)");
    double off = 0.0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j)
            if (i != j) off = std::max(off, std::abs(s.covariance(i, j)));
    s.isotropy_offdiag = off / s.C;
    s.gamma = w_anti.mean / s.C;
    s.gamma_se = w_anti.se() / s.C;
    s.gamma0 = w_area.mean / s.C;
    s.gamma0_se = w_area.se() / s.C;
    // additive by definition; the joint accumulator is kept for the se only
    s.gamma_rho = s.gamma + s.gamma0;
    s.gamma_rho_se = w_rho.se() / s.C;
    s.M = w_pair.mean / s.C;
    s.M_se = w_pair.se() / s.C;
    s.pair_mean = w_pair.mean;
    s.square_sum_mean = w_square.mean;
    return s;
}

ExactStats exact_excursion_stats(const HMWModel& model, std::size_t horizon,
                                 double mass_tol, ExactMethod method) {
    validate_or_throw(model);
    ExactStats out;
    RawMoments raw;
    if (method == ExactMethod::Enumerate) {
        raw = raw_moments_enumerate(model, horizon);
        out.residual_mass = raw.residual;
        if (raw.residual > mass_tol)
            throw std::runtime_error(
                "exact_excursion_stats: residual mass " +
                std::to_string(raw.residual) + " exceeds tolerance at horizon " +
                std::to_string(horizon));
    } else {
        raw = raw_moments_solve(model);
        out.residual_mass = 0.0;
    }
    out.stats = stats_from_raw(raw, model.dimension);
    return out;
}

HMWModel recenter(const HMWModel& model) {
    validate_or_throw(model);
    const RawMoments raw = raw_moments_solve(model);
    if (raw.beta <= 0.0) throw std::runtime_error("recenter: beta <= 0");
    const Vec drift = raw.meanF / raw.beta;
    HMWModel shifted = model;
    for (auto& support : shifted.emissions)
        for (auto& e : support) e.F -= drift;
    return shifted;
}

IsotropizeResult isotropize(const HMWModel& model) {
    validate_or_throw(model);
    const Eigen::Index d = model.dimension;
    const RawMoments raw = raw_moments_solve(model);
    Eigen::SelfAdjointEigenSolver<Tensor2> eig(
        0.5 * (raw.secmom + raw.secmom.transpose()));
    const Vec& lambda = eig.eigenvalues();
    const double lmax = lambda.maxCoeff();
    std::string null_dirs;
    for (Eigen::Index i = 0; i < d; ++i) {
        if (lambda(i) <= 1e-12 * std::max(1.0, lmax)) {
            std::ostringstream dir;
            dir << eig.eigenvectors().col(i).transpose();
            null_dirs += "\n  null direction: [" + dir.str() + "]";
        }
    }
    if (!null_dirs.empty())
        throw std::domain_error("isotropize: singular excursion covariance" +
                                null_dirs);
    Tensor2 W = eig.eigenvectors() *
                lambda.cwiseInverse().cwiseSqrt().asDiagonal() *
                eig.eigenvectors().transpose();
    IsotropizeResult out{model, W};
    for (auto& support : out.model.emissions) {
        for (auto& e : support) {
            e.F = W * e.F;
            e.area = W * e.area * W.transpose();
        }
    }
    return out;
}

IidApproxReport iid_approx_diag(const HMWModel& model, std::size_t n_steps,
                                std::uint64_t seed) {
    const SimResult sim = simulate(model, n_steps, seed);
    const Eigen::Index d = model.dimension;
    const ValidationReport rep = validate(model);

    IidApproxReport out;
    Vec X = Vec::Zero(d);
    Vec X_anchor = Vec::Zero(d);  // walk value at the last completed return
    std::size_t last_return = 0;
    const int anchor = sim.states[0];
    std::size_t next_checkpoint = 1;

    for (std::size_t k = 1; k <= n_steps; ++k) {
        X += sim.increments.steps[k - 1];
        if (sim.states[k] == anchor) {
            X_anchor = X;
            last_return = k;
        }
        const double gap = (X - X_anchor).norm();
        out.max_gap = std::max(out.max_gap, gap);
        out.max_excursion_length =
            std::max(out.max_excursion_length, k - last_return);
        if (k == next_checkpoint || k == n_steps) {
            out.checkpoints.emplace_back(k, gap);
            next_checkpoint *= 2;
        }
    }
    // a completed excursion can be longer than any partial gap window
    std::size_t max_complete = 0, prev = 0;
    for (const std::size_t t : excursion_times(sim.states)) {
        max_complete = std::max(max_complete, t - prev);
        prev = t;
    }
    out.max_excursion_length = std::max(out.max_excursion_length, max_complete);
    out.bound = rep.step_bound * static_cast<double>(out.max_excursion_length);
    out.within_bound = out.max_gap <= out.bound + 1e-9;
    return out;
}

namespace {

Tensor2 parse_area(const json& j, Eigen::Index d, const std::string& loc) {
    if (j.is_number()) {
        if (d != 2)
            throw std::invalid_argument(loc + ": scalar area shorthand needs d=2");
        Tensor2 a = Tensor2::Zero(2, 2);
        a(0, 1) = j.get<double>();
        a(1, 0) = -j.get<double>();
        return a;
    }
    if (!j.is_array() || j.size() != static_cast<std::size_t>(d * d))
        throw std::invalid_argument(loc + ": expected d*d row-major array");
    Tensor2 a(d, d);
    std::size_t pos = 0;
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index k = 0; k < d; ++k) a(i, k) = j[pos++].get<double>();
    // store the exact antisymmetric part so downstream identities are exact
    if ((a + a.transpose()).norm() > 1e-12 * std::max(1.0, a.norm()))
        throw std::invalid_argument(loc + ": area not antisymmetric");
    return 0.5 * (a - a.transpose());
}

}  // namespace

HMWModel model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument(std::string("model: JSON parse error: ") +
                                    e.what());
    }
    auto require = [&j](const char* key) -> const json& {
        if (!j.contains(key))
            throw std::invalid_argument(std::string("model: missing field '") +
                                        key + "'");
        return j.at(key);
    };

    HMWModel model;
    model.dimension = require("dimension").get<Eigen::Index>();
    for (const auto& s : require("states")) {
        model.chain.states.push_back(s.get<std::string>());
    }
    const auto n = static_cast<Eigen::Index>(model.chain.states.size());
    if (n == 0) throw std::invalid_argument("model: states: empty");

    const json& q = require("Q");
    model.chain.Q.resize(n, n);
    if (q.is_array() && !q.empty() && q[0].is_array()) {
        if (q.size() != static_cast<std::size_t>(n))
            throw std::invalid_argument("model: Q: wrong row count");
        for (Eigen::Index i = 0; i < n; ++i) {
            if (q[static_cast<std::size_t>(i)].size() != static_cast<std::size_t>(n))
                throw std::invalid_argument("model: Q[" + std::to_string(i) +
                                            "]: wrong column count");
            for (Eigen::Index k = 0; k < n; ++k)
                model.chain.Q(i, k) =
                    q[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]
                        .get<double>();
        }
    } else if (q.is_array() && q.size() == static_cast<std::size_t>(n * n)) {
        std::size_t pos = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index k = 0; k < n; ++k)
                model.chain.Q(i, k) = q[pos++].get<double>();
    } else {
        throw std::invalid_argument(
            "model: Q: expected row-major flat array or nested rows");
    }

    const json& start = require("start");
    if (start.is_string()) {
        const auto it = std::find(model.chain.states.begin(),
                                  model.chain.states.end(),
                                  start.get<std::string>());
        if (it == model.chain.states.end())
            throw std::invalid_argument("model: start: unknown state label '" +
                                        start.get<std::string>() + "'");
        model.chain.start = static_cast<int>(it - model.chain.states.begin());
    } else {
        model.chain.start = start.get<int>();
    }

    const json& em = require("emissions");
    if (!em.is_array() || em.size() != static_cast<std::size_t>(n))
        throw std::invalid_argument("model: emissions: expected one list per state");
    const Eigen::Index d = model.dimension;
    for (std::size_t u = 0; u < em.size(); ++u) {
        std::vector<Emission> support;
        for (std::size_t k = 0; k < em[u].size(); ++k) {
            const std::string loc =
                "model: emissions[" + std::to_string(u) + "][" + std::to_string(k) + "]";
            const json& atom = em[u][k];
            Emission e;
            if (!atom.contains("p") || !atom.contains("F"))
                throw std::invalid_argument(loc + ": needs fields p and F");
            e.p = atom.at("p").get<double>();
            const json& fv = atom.at("F");
            if (!fv.is_array() || fv.size() != static_cast<std::size_t>(d))
                throw std::invalid_argument(loc + ".F: expected " +
                                            std::to_string(d) + " entries");
            e.F.resize(d);
            for (Eigen::Index i = 0; i < d; ++i)
                e.F(i) = fv[static_cast<std::size_t>(i)].get<double>();
            e.area = atom.contains("area")
                         ? parse_area(atom.at("area"), d, loc + ".area")
                         : Tensor2::Zero(d, d);
            support.push_back(std::move(e));
        }
        model.emissions.push_back(std::move(support));
    }
    return model;
}

std::string model_to_json(const HMWModel& model) {
    json j;
    j["dimension"] = model.dimension;
    j["states"] = model.chain.states;
    const auto n = static_cast<Eigen::Index>(model.chain.n_states());
    json q = json::array();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index k = 0; k < n; ++k) q.push_back(model.chain.Q(i, k));
    j["Q"] = std::move(q);
    j["start"] = model.chain.start;
    json em = json::array();
    for (const auto& support : model.emissions) {
        json list = json::array();
        for (const auto& e : support) {
            json atom;
            atom["p"] = e.p;
            atom["F"] = std::vector<double>(e.F.data(), e.F.data() + e.F.size());
            json area = json::array();
            for (Eigen::Index i = 0; i < e.area.rows(); ++i)
                for (Eigen::Index k = 0; k < e.area.cols(); ++k)
                    area.push_back(e.area(i, k));
            atom["area"] = std::move(area);
            list.push_back(std::move(atom));
        }
        em.push_back(std::move(list));
    }
    j["emissions"] = std::move(em);
    return j.dump(2);
}

HMWModel load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return model_from_json(buf.str());
}

namespace {

void csv_row(std::ostringstream& out, const std::string& name,
             const std::vector<double>& values, const std::vector<double>& ses,
             std::size_t K, std::uint64_t seed) {
    out << name;
    char buf[32];
    for (const double v : values) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << ',' << buf;
    }
    for (const double v : ses) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        out << ',' << buf;
    }
    out << ',' << K << ',' << seed << '\n';
}

std::vector<double> flat(const Tensor2& m) {
    std::vector<double> v;
    v.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) v.push_back(m(i, j));
    return v;
}

}  // namespace

std::string stats_to_csv(const ExcursionStats& s, std::uint64_t seed) {
    std::ostringstream out;
    out << "name,values...,ses...,K,seed\n";
    csv_row(out, "beta", {s.beta}, {s.beta_se}, s.K, seed);
    {
        std::vector<double> v(s.mean_increment.data(),
                              s.mean_increment.data() + s.mean_increment.size());
        std::vector<double> e(s.mean_increment_se.data(),
                              s.mean_increment_se.data() + s.mean_increment_se.size());
        csv_row(out, "mean_increment", v, e, s.K, seed);
    }
    csv_row(out, "covariance", flat(s.covariance), flat(s.covariance_se), s.K, seed);
    csv_row(out, "C", {s.C}, {0.0}, s.K, seed);
    csv_row(out, "isotropy_offdiag", {s.isotropy_offdiag}, {0.0}, s.K, seed);
    csv_row(out, "gamma", flat(s.gamma), flat(s.gamma_se), s.K, seed);
    csv_row(out, "gamma0", flat(s.gamma0), flat(s.gamma0_se), s.K, seed);
    csv_row(out, "gamma_rho", flat(s.gamma_rho), flat(s.gamma_rho_se), s.K, seed);
    csv_row(out, "M", flat(s.M), flat(s.M_se), s.K, seed);
    csv_row(out, "square_sum_mean", flat(s.square_sum_mean),
            std::vector<double>(static_cast<std::size_t>(s.square_sum_mean.size()), 0.0),
            s.K, seed);
    return out.str();
}

}  // namespace roughlab
