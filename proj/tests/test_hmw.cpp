#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "roughlab/hmw.hpp"

using namespace roughlab;

namespace {

HMWModel load_fixture(const std::string& name) {
    return load_model_file(std::string(ROUGHLAB_MODEL_DIR) + "/" + name);
}

Vec vec2(double x, double y) {
    Vec v(2);
    v << x, y;
    return v;
}

// two-state chain with bernoulli-ish point emissions, handy for oracles
HMWModel two_state_model(double alpha, double beta_prob) {
    HMWModel m;
    m.dimension = 2;
    m.chain.states = {"a", "b"};
    m.chain.Q.resize(2, 2);
    m.chain.Q << 1 - alpha, alpha, beta_prob, 1 - beta_prob;
    m.chain.start = 0;
    m.emissions = {
        {{1.0, vec2(1, 0), Tensor2::Zero(2, 2)}},
        {{0.5, vec2(0, 1), Tensor2::Zero(2, 2)},
         {0.5, vec2(0, -1), Tensor2::Zero(2, 2)}},
    };
    return m;
}

HMWModel three_state_model() {
    HMWModel m;
    m.dimension = 2;
    m.chain.states = {"a", "b", "c"};
    m.chain.Q.resize(3, 3);
    m.chain.Q << 0.2, 0.5, 0.3,
                 0.6, 0.1, 0.3,
                 0.25, 0.25, 0.5;
    m.chain.start = 0;
    Tensor2 arc = Tensor2::Zero(2, 2);
    arc(0, 1) = 0.25;
    arc(1, 0) = -0.25;
    m.emissions = {
        {{0.5, vec2(1, 1), Tensor2::Zero(2, 2)},
         {0.5, vec2(-1, 0), arc}},
        {{1.0, vec2(0, -1), Tensor2::Zero(2, 2)}},
        {{0.25, vec2(2, 0), -arc}, {0.75, vec2(0, 0), Tensor2::Zero(2, 2)}},
    };
    return m;
}

}  // namespace

TEST_CASE("validate accepts the fixtures") {
    const auto rot = validate(load_fixture("rotating_bernoulli.json"));
    CHECK(rot.ok);
    CHECK(rot.step_bound == 1.0);

    const auto diamond = validate(load_fixture("diamond.json"));
    CHECK(diamond.ok);

    CHECK(validate(load_fixture("srw.json")).ok);
    CHECK(validate(load_fixture("rotating_bernoulli_arcs.json")).ok);
}

TEST_CASE("validate flags broken models") {
    HMWModel m = two_state_model(0.3, 0.1);
    m.chain.Q(0, 0) = 0.0;
    m.chain.Q(0, 1) = 0.0;  // zero row
    const auto rep = validate(m);
    CHECK(!rep.ok);
    bool found = false;
    for (const auto& e : rep.errors)
        if (e.find("row sums") != std::string::npos) found = true;
    CHECK(found);

    HMWModel reducible = two_state_model(0.3, 0.1);
    reducible.chain.Q << 1, 0, 0.5, 0.5;  // state b unreachable
    const auto rep2 = validate(reducible);
    CHECK(!rep2.ok);
    bool irr = false;
    for (const auto& e : rep2.errors)
        if (e.find("irreducible") != std::string::npos) irr = true;
    CHECK(irr);

    HMWModel badp = two_state_model(0.3, 0.1);
    badp.emissions[0][0].p = 0.9;
    CHECK(!validate(badp).ok);

    HMWModel badarea = two_state_model(0.3, 0.1);
    badarea.emissions[0][0].area(0, 0) = 1.0;
    CHECK(!validate(badarea).ok);
}

TEST_CASE("stationary distributions") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const Vec pi = stationary(rot.chain);
    for (Eigen::Index i = 0; i < 4; ++i)
        CHECK(pi(i) == doctest::Approx(0.25).epsilon(1e-12));

    // two-state closed form (beta/(alpha+beta), alpha/(alpha+beta))
    const HMWModel two = two_state_model(0.3, 0.1);
    const Vec pi2 = stationary(two.chain);
    CHECK(pi2(0) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(pi2(1) == doctest::Approx(0.75).epsilon(1e-12));

    const HMWModel diamond = load_fixture("diamond.json");
    const Vec pi3 = stationary(diamond.chain);
    const Eigen::VectorXd oracle =
        oracles::power_iteration_stationary(diamond.chain.Q);
    CHECK((pi3 - oracle).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("simulate determinism and distribution") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const SimResult a = simulate(rot, 1000, 99);
    const SimResult b = simulate(rot, 1000, 99);
    CHECK(a.states == b.states);
    for (std::size_t k = 0; k < a.increments.size(); ++k)
        CHECK((a.increments.steps[k] - b.increments.steps[k]).norm() == 0.0);
    // the chain is deterministic, so only the emissions depend on the seed
    const SimResult c = simulate(rot, 1000, 100);
    bool same = true;
    for (std::size_t k = 0; k < a.increments.size(); ++k)
        same &= (a.increments.steps[k] - c.increments.steps[k]).norm() == 0.0;
    CHECK(!same);

    // deterministic chain: states must rotate
    for (std::size_t k = 0; k < a.states.size(); ++k)
        CHECK(a.states[k] == static_cast<int>(k % 4));

    // transition frequencies within 4 sigma of Q on a random chain
    const HMWModel two = two_state_model(0.3, 0.1);
    const SimResult sim = simulate(two, 100000, 7);
    Eigen::Matrix2d counts = Eigen::Matrix2d::Zero();
    for (std::size_t k = 1; k < sim.states.size(); ++k)
        counts(sim.states[k - 1], sim.states[k]) += 1.0;
    for (int i = 0; i < 2; ++i) {
        const double row = counts.row(i).sum();
        for (int j = 0; j < 2; ++j) {
            const double p = two.chain.Q(i, j);
            const double se = std::sqrt(p * (1 - p) / row);
            CHECK(std::abs(counts(i, j) / row - p) <= 4 * se);
        }
    }
}

TEST_CASE("excursion_times") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const SimResult sim = simulate(rot, 41, 5);
    const auto times = excursion_times(sim.states);
    REQUIRE(times.size() == 10);
    for (std::size_t i = 0; i < times.size(); ++i) CHECK(times[i] == 4 * (i + 1));

    const std::vector<int> seq{0, 1, 0, 2, 0};
    const auto t = excursion_times(seq);
    REQUIRE(t.size() == 2);
    CHECK(t[0] == 2);
    CHECK(t[1] == 4);

    // excursion frequency ~ 1/beta
    const HMWModel two = two_state_model(0.3, 0.1);
    const SimResult sim2 = simulate(two, 200000, 11);
    const auto t2 = excursion_times(sim2.states);
    const Vec pi = stationary(two.chain);
    // Kac: E[T1] = 1/pi(start)
    const double beta = 1.0 / pi(0);
    const double freq = static_cast<double>(t2.size()) / 200000.0;
    CHECK(std::abs(freq - 1.0 / beta) <= 4 * std::sqrt(freq / 200000.0));
}

TEST_CASE("split_excursions aggregates") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    // force U = 1 at every step by zeroing the U=0 atom
    HMWModel allone = rot;
    for (auto& support : allone.emissions) {
        support[0].p = 0.0;
        support[1].p = 1.0;
    }
    const SimResult sim = simulate(allone, 4, 3);
    const auto split = split_excursions(sim.states, sim.increments);
    REQUIRE(split.records.size() == 1);
    const ExcursionRecord& rec = split.records[0];
    CHECK(rec.length == 4);
    CHECK(rec.sumF.norm() == 0.0);  // N + W + S + E = 0
    // hand aggregation of the ordered pairs of (e2, -e1, -e2, e1)
    Tensor2 pair = Tensor2::Zero(2, 2);
    const std::vector<Vec> steps{vec2(0, 1), vec2(-1, 0), vec2(0, -1), vec2(1, 0)};
    for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b)
            pair += steps[static_cast<std::size_t>(a)] *
                    steps[static_cast<std::size_t>(b)].transpose();
    CHECK((rec.pairTensor - pair).norm() == 0.0);
    CHECK((rec.squareSum - Tensor2::Identity(2, 2) * 2.0).norm() == 0.0);

    // record invariants and concatenation consistency on a long random run
    const SimResult sim2 = simulate(rot, 4000, 17);
    const auto split2 = split_excursions(sim2.states, sim2.increments);
    const auto times = excursion_times(sim2.states);
    Vec total = Vec::Zero(2);
    std::size_t begin = 0;
    for (std::size_t k = 0; k < split2.records.size(); ++k) {
        const ExcursionRecord& r = split2.records[k];
        total += r.sumF;
        const Tensor2 outer = r.sumF * r.sumF.transpose();
        CHECK((outer - (r.pairTensor + r.pairTensor.transpose() + r.squareSum))
                  .lpNorm<Eigen::Infinity>() == 0.0);  // integer emissions
        // antisym part of the pair tensor is twice the excursion signed area
        IncrementSeq slice;
        slice.steps.assign(
            sim2.increments.steps.begin() + static_cast<std::ptrdiff_t>(begin),
            sim2.increments.steps.begin() + static_cast<std::ptrdiff_t>(times[k]));
        const Tensor2 area = signed_area(slice);
        CHECK((r.pairTensor - r.pairTensor.transpose() - 2.0 * area)
                  .lpNorm<Eigen::Infinity>() == 0.0);
        begin = times[k];
    }
    Vec direct = Vec::Zero(2);
    for (std::size_t k = 0; k < times.back(); ++k) direct += sim2.increments.steps[k];
    CHECK((total - direct).norm() == 0.0);

    CHECK_THROWS_AS(
        split_excursions(std::vector<int>{0, 1, 1}, [] {
            IncrementSeq F;
            F.steps = {Vec::Zero(2), Vec::Zero(2)};
            return F;
        }()),
        std::invalid_argument);
}

TEST_CASE("excursion record independence (lag-1 autocorrelation)") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const SimResult sim = simulate(rot, 40000, 23);
    const auto records = split_excursions(sim.states, sim.increments).records;
    REQUIRE(records.size() >= 9000);
    for (int comp = 0; comp < 2; ++comp) {
        double mean = 0.0;
        for (const auto& r : records) mean += r.sumF(comp);
        mean /= static_cast<double>(records.size());
        double num = 0.0, den = 0.0;
        for (std::size_t k = 0; k < records.size(); ++k) {
            const double c = records[k].sumF(comp) - mean;
            den += c * c;
            if (k + 1 < records.size())
                num += c * (records[k + 1].sumF(comp) - mean);
        }
        const double rho = num / den;
        CHECK(std::abs(rho) <= 4.0 / std::sqrt(static_cast<double>(records.size())));
    }
}

TEST_CASE("estimate matches the 16-outcome enumeration oracle") {
    const auto oracle = oracles::rotating_bernoulli_enumeration();
    CHECK(oracle.beta == 4.0);
    CHECK(oracle.meanX.norm() == 0.0);
    CHECK(oracle.C == 0.5);
    CHECK(oracle.gamma12 == 0.5);
    CHECK(oracle.meanArea == 0.25);

    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const SimResult sim = simulate(rot, 400000, 7);
    const auto records = split_excursions(sim.states, sim.increments).records;
    const ExcursionStats s = estimate(records);
    REQUIRE(s.K >= 99000);
    CHECK(s.beta == 4.0);
    CHECK(std::abs(s.gamma(0, 1) - oracle.gamma12) <= 3.0 * s.gamma_se(0, 1));
    CHECK(std::abs(s.C - oracle.C) <= 0.01);
    for (int i = 0; i < 2; ++i)
        CHECK(std::abs(s.mean_increment(i)) <= 3.0 * s.mean_increment_se(i) + 1e-12);
    CHECK(s.gamma0.norm() == 0.0);  // no decorations
    // gamma estimators are exactly antisymmetric
    CHECK((s.gamma + s.gamma.transpose()).norm() == 0.0);
}

TEST_CASE("estimate error paths") {
    std::vector<ExcursionRecord> one(1);
    one[0].sumF = Vec::Zero(2);
    CHECK_THROWS_AS(estimate(one), std::invalid_argument);

    // zero emissions: C_hat <= 0
    HMWModel zero = two_state_model(0.3, 0.1);
    for (auto& support : zero.emissions)
        for (auto& e : support) e.F.setZero();
    const SimResult sim = simulate(zero, 100, 3);
    const auto records = split_excursions(sim.states, sim.increments).records;
    CHECK_THROWS_AS(estimate(records), std::domain_error);
}

TEST_CASE("per-sample Ito identity is exact") {
    const HMWModel m = three_state_model();
    const SimResult sim = simulate(m, 20000, 31);
    const ExcursionStats s =
        estimate(split_excursions(sim.states, sim.increments).records);
    const Tensor2 resid =
        s.M - s.gamma - 0.5 / s.C * (s.covariance - s.square_sum_mean);
    CHECK(resid.cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("exact stats: enumeration, solver and oracle agree") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const auto oracle = oracles::rotating_bernoulli_enumeration();

    const auto en = exact_excursion_stats(rot, 4, 0.0, ExactMethod::Enumerate);
    CHECK(en.residual_mass == 0.0);
    CHECK(en.stats.beta == oracle.beta);
    CHECK(en.stats.C == doctest::Approx(oracle.C).epsilon(1e-14));
    CHECK(en.stats.gamma(0, 1) == doctest::Approx(oracle.gamma12).epsilon(1e-14));
    CHECK(en.stats.mean_increment.norm() <= 1e-15);
    CHECK((en.stats.pair_mean - oracle.pair).lpNorm<Eigen::Infinity>() <= 1e-15);
    CHECK((en.stats.covariance - oracle.secondMoment).lpNorm<Eigen::Infinity>() <= 1e-15);

    const auto so = exact_excursion_stats(rot, 0, 0.0, ExactMethod::LinearSolve);
    CHECK(so.stats.beta == doctest::Approx(en.stats.beta).epsilon(1e-12));
    CHECK((so.stats.pair_mean - en.stats.pair_mean).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((so.stats.covariance - en.stats.covariance).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(so.stats.gamma(0, 1) == doctest::Approx(0.5).epsilon(1e-12));

    // horizon too small: residual mass must be reported as an error
    const HMWModel two = two_state_model(0.3, 0.1);
    CHECK_THROWS_AS(exact_excursion_stats(two, 3, 1e-9, ExactMethod::Enumerate),
                    std::runtime_error);
}

TEST_CASE("exact stats Kac formula") {
    // P(T1 > L) = 0.3 * 0.9^(L-1), so horizon 400 leaves ~1.7e-19 unexplored
    const HMWModel two = two_state_model(0.3, 0.1);
    const auto ex = exact_excursion_stats(two, 400, 1e-12, ExactMethod::Enumerate);
    const Vec pi = stationary(two.chain);
    CHECK(ex.stats.beta == doctest::Approx(1.0 / pi(0)).epsilon(1e-9));

    const auto so = exact_excursion_stats(two, 0, 0.0, ExactMethod::LinearSolve);
    CHECK(so.stats.beta == doctest::Approx(1.0 / pi(0)).epsilon(1e-12));
}

TEST_CASE("Monte Carlo agrees with enumeration on a three-state model") {
    const HMWModel m = three_state_model();
    const auto ex = exact_excursion_stats(m, 0, 0.0, ExactMethod::LinearSolve);
    const SimResult sim = simulate(m, 300000, 13);
    const ExcursionStats mc =
        estimate(split_excursions(sim.states, sim.increments).records);
    CHECK(std::abs(mc.beta - ex.stats.beta) <= 3.0 * mc.beta_se);
    for (Eigen::Index i = 0; i < 2; ++i)
        for (Eigen::Index j = 0; j < 2; ++j) {
            CHECK(std::abs(mc.M(i, j) - ex.stats.M(i, j)) <=
                  3.5 * mc.M_se(i, j) + 1e-9);
            CHECK(std::abs(mc.gamma(i, j) - ex.stats.gamma(i, j)) <=
                  3.5 * mc.gamma_se(i, j) + 1e-9);
            CHECK(std::abs(mc.gamma0(i, j) - ex.stats.gamma0(i, j)) <=
                  3.5 * mc.gamma0_se(i, j) + 1e-9);
        }
}

TEST_CASE("recenter") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const HMWModel same = recenter(rot);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t j = 0; j < 2; ++j)
            CHECK((same.emissions[u][j].F - rot.emissions[u][j].F).norm() <= 1e-15);

    // constant step 1 at the N state only: E[X_T1] = e2/2, drift e2/8
    HMWModel biased = rot;
    biased.emissions[1] = {{1.0, vec2(0, 1), Tensor2::Zero(2, 2)}};
    const auto raw = exact_excursion_stats(biased, 0, 0.0, ExactMethod::LinearSolve);
    CHECK(raw.stats.mean_increment(0) == doctest::Approx(0.0));
    CHECK(raw.stats.mean_increment(1) == doctest::Approx(0.5).epsilon(1e-12));
    const HMWModel centred = recenter(biased);
    CHECK((centred.emissions[0][1].F - (vec2(1, 0) - vec2(0, 1.0 / 8.0))).norm() <= 1e-14);
    const auto after = exact_excursion_stats(centred, 0, 0.0, ExactMethod::LinearSolve);
    CHECK(after.stats.mean_increment.lpNorm<Eigen::Infinity>() <= 1e-13);

    // idempotence
    const HMWModel twice = recenter(centred);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t j = 0; j < centred.emissions[u].size(); ++j)
            CHECK((twice.emissions[u][j].F - centred.emissions[u][j].F).norm() <= 1e-13);
}

TEST_CASE("isotropize") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    // covariance is already isotropic (C/2 I): W must be a multiple of I
    const auto iso = isotropize(rot);
    CHECK((iso.W - std::sqrt(2.0) * Tensor2::Identity(2, 2)).lpNorm<Eigen::Infinity>() <=
          1e-12);
    const auto after = exact_excursion_stats(iso.model, 0, 0.0, ExactMethod::LinearSolve);
    CHECK((after.stats.covariance - Tensor2::Identity(2, 2)).lpNorm<Eigen::Infinity>() <=
          1e-8);

    // anisotropic variant: diag(1, 4) second moment maps by diag(1, 1/2)
    HMWModel stretched = rot;
    for (auto& support : stretched.emissions)
        for (auto& e : support) e.F(1) *= 2.0;
    const auto iso2 = isotropize(stretched);
    const auto cov = exact_excursion_stats(stretched, 0, 0.0, ExactMethod::LinearSolve)
                         .stats.covariance;
    CHECK(cov(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(cov(1, 1) == doctest::Approx(2.0).epsilon(1e-12));
    const auto after2 =
        exact_excursion_stats(iso2.model, 0, 0.0, ExactMethod::LinearSolve);
    CHECK((after2.stats.covariance - Tensor2::Identity(2, 2)).lpNorm<Eigen::Infinity>() <=
          1e-8);

    // decorations transform as W a W^T
    const HMWModel arcs = load_fixture("rotating_bernoulli_arcs.json");
    const auto iso3 = isotropize(arcs);
    const double w = iso3.W(0, 0);
    CHECK(iso3.model.emissions[0][1].area(0, 1) ==
          doctest::Approx(w * w * arcs.emissions[0][1].area(0, 1)).epsilon(1e-12));

    // degenerate excursions: flat direction reported
    HMWModel flat = rot;
    for (auto& support : flat.emissions)
        for (auto& e : support) e.F(1) = 0.0;
    CHECK_THROWS_AS(isotropize(flat), std::domain_error);
}

TEST_CASE("iid approximation diagnostic") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const auto rep = iid_approx_diag(rot, 20000, 3);
    CHECK(rep.max_excursion_length == 4);
    CHECK(rep.bound == 4.0);  // K = 1
    CHECK(rep.within_bound);
    CHECK(rep.max_gap <= 4.0);

    // gap / sqrt(n) shrinks along the checkpoints
    const HMWModel two = two_state_model(0.3, 0.1);
    const auto rep2 = iid_approx_diag(two, 100000, 5);
    CHECK(rep2.within_bound);
    const auto& cps = rep2.checkpoints;
    REQUIRE(cps.size() >= 4);
    const double early = cps[2].second / std::sqrt(static_cast<double>(cps[2].first));
    const double late = cps.back().second / std::sqrt(static_cast<double>(cps.back().first));
    CHECK(late <= early + 0.5);

    HMWModel zero = two_state_model(0.3, 0.1);
    for (auto& support : zero.emissions)
        for (auto& e : support) e.F.setZero();
    CHECK(iid_approx_diag(zero, 5000, 3).max_gap == 0.0);
}

TEST_CASE("model json round trip and errors") {
    const HMWModel rot = load_fixture("rotating_bernoulli_arcs.json");
    const HMWModel back = model_from_json(model_to_json(rot));
    CHECK(back.chain.states == rot.chain.states);
    CHECK((back.chain.Q - rot.chain.Q).norm() == 0.0);
    for (std::size_t u = 0; u < 4; ++u)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK((back.emissions[u][j].F - rot.emissions[u][j].F).norm() == 0.0);
            CHECK((back.emissions[u][j].area - rot.emissions[u][j].area).norm() == 0.0);
        }

    CHECK_THROWS_WITH_AS(model_from_json("{}"),
                         doctest::Contains("missing field"),
                         std::invalid_argument);
    CHECK_THROWS_AS(model_from_json("not json"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        model_from_json(R"({"dimension":2,"states":["a"],"Q":[1],"start":"zzz",
                            "emissions":[[{"p":1.0,"F":[0,0]}]]})"),
        doctest::Contains("unknown state label"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(
        model_from_json(R"({"dimension":2,"states":["a"],"Q":[1],"start":0,
                            "emissions":[[{"p":1.0,"F":[0,0],"area":[1,0,0,0]}]]})"),
        doctest::Contains("not antisymmetric"), std::invalid_argument);

    // start by label
    const HMWModel by_label = model_from_json(
        R"({"dimension":1,"states":["a","b"],"Q":[[0.5,0.5],[1.0,0.0]],
            "start":"b","emissions":[[{"p":1.0,"F":[1]}],[{"p":1.0,"F":[-1]}]]})");
    CHECK(by_label.chain.start == 1);
}

TEST_CASE("stats csv") {
    const HMWModel rot = load_fixture("rotating_bernoulli.json");
    const SimResult sim = simulate(rot, 4000, 3);
    const ExcursionStats s =
        estimate(split_excursions(sim.states, sim.increments).records);
    const std::string csv = stats_to_csv(s, 3);
    CHECK(csv.find("beta,") != std::string::npos);
    CHECK(csv.find("gamma,") != std::string::npos);
    CHECK(csv.find("gamma_rho,") != std::string::npos);
    // one row per estimator plus the header
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}
