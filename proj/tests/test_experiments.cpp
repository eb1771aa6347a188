#include <doctest.h>

#include <cmath>

#include "roughlab/experiments.hpp"

using namespace roughlab;

namespace {

std::string fixture(const std::string& name) {
    return std::string(ROUGHLAB_MODEL_DIR) + "/" + name;
}

const StatRow& find_row(const ExperimentReport& rep, const std::string& stat,
                        const std::string& comp = "") {
    for (const auto& row : rep.rows)
        if (row.statistic == stat && row.component == comp) return row;
    throw std::runtime_error("row not found: " + stat + "/" + comp);
}

}  // namespace

TEST_CASE("geodesic_eval") {
    const HMWModel rot = load_model_file(fixture("rotating_bernoulli.json"));
    const SimResult sim = simulate(rot, 32, 5);
    const auto lifts = path_lift(sim.increments);
    for (std::size_t k = 0; k <= 32; ++k) {
        const G2Element g = geodesic_eval(lifts, sim.increments, static_cast<double>(k));
        CHECK((g.a - lifts[k].a).norm() == 0.0);
        CHECK((g.b - lifts[k].b).norm() == 0.0);
    }
    const G2Element mid = geodesic_eval(lifts, sim.increments, 7.5);
    CHECK(is_geometric(mid, 1e-12));
    // Chen across the partial step: head (x) remaining = lifts[8]
    const G2Element rest = tensor_mul(tensor_inv(mid), lifts[8]);
    CHECK(is_geometric(rest, 1e-12));
    CHECK_THROWS_AS(geodesic_eval(lifts, sim.increments, 33.0), std::invalid_argument);
}

TEST_CASE("simulate_excursions matches split of a plain run") {
    const HMWModel m = load_model_file(fixture("rotating_bernoulli_arcs.json"));
    const auto records = simulate_excursions(m, 50, 21, 0);
    const SimResult sim = simulate(m, 400, 21, 0);
    const auto split = split_excursions(sim.states, sim.increments);
    REQUIRE(split.records.size() >= 50);
    for (std::size_t k = 0; k < 50; ++k) {
        CHECK(records[k].length == split.records[k].length);
        CHECK((records[k].sumF - split.records[k].sumF).norm() == 0.0);
        CHECK((records[k].pairTensor - split.records[k].pairTensor).norm() == 0.0);
        CHECK((records[k].areaDeco - split.records[k].areaDeco).norm() == 0.0);
    }
}

TEST_CASE("run_anomaly on the rotating Bernoulli fixture") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Anomaly;
    config.model_path = fixture("rotating_bernoulli.json");
    config.k = 20000;
    config.seed = 7;
    const ExperimentReport rep = run_anomaly(config);
    CHECK(rep.all_pass());
    CHECK(find_row(rep, "beta").target == 4.0);
    CHECK(find_row(rep, "gamma", "12").target == doctest::Approx(0.5));
    // no decorations: gamma0 vanishes identically
    CHECK(find_row(rep, "gamma0", "12").value == 0.0);
    CHECK(find_row(rep, "ito_identity_residual").value <= 1e-12);
}

TEST_CASE("run_anomaly on the decorated fixture") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Anomaly;
    config.model_path = fixture("rotating_bernoulli_arcs.json");
    config.k = 20000;
    config.seed = 11;
    const ExperimentReport rep = run_anomaly(config);
    CHECK(rep.all_pass());
    // gamma0 target: C^{-1} E[sum a_p] = 2 * (4 * pi/16) = pi/2
    CHECK(find_row(rep, "gamma0", "12").target ==
          doctest::Approx(std::acos(-1.0) / 2).epsilon(1e-12));
    CHECK(find_row(rep, "gamma_rho", "12").target ==
          doctest::Approx(0.5 + std::acos(-1.0) / 2).epsilon(1e-12));
}

TEST_CASE("run_compare_embeddings separates the embedding classes") {
    ExperimentConfig config;
    config.kind = ExperimentKind::CompareEmbeddings;
    config.model_path = fixture("rotating_bernoulli_arcs.json");
    config.k = 15000;
    config.seed = 5;
    const ExperimentReport rep = run_compare_embeddings(config);
    CHECK(rep.all_pass());
    CHECK(find_row(rep, "gamma_rho_additivity").value <= 1e-15);
    CHECK(find_row(rep, "embedding_class_separation").value ==
          doctest::Approx(std::acos(-1.0) / 2).epsilon(1e-12));
}

TEST_CASE("run_nongeo") {
    ExperimentConfig config;
    config.kind = ExperimentKind::NonGeo;
    config.model_path = fixture("rotating_bernoulli.json");
    config.n = 1024;
    config.replicas = 200;
    config.k = 5000;
    config.seed = 13;
    const ExperimentReport rep = run_nongeo(config);
    CHECK(rep.all_pass());
    CHECK(find_row(rep, "nongeo_fraction").value == 1.0);
    CHECK(find_row(rep, "ito_identity_residual").value <= 1e-12);
    // the Ito drift target of the isotropized walk: M = Gamma + (M_sym);
    // its antisymmetric part must match gamma
    const double m12 = find_row(rep, "level2_mean[t=1]", "12").target;
    const double m21 = find_row(rep, "level2_mean[t=1]", "21").target;
    CHECK(0.5 * (m12 - m21) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("run_donsker on a small configuration") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Donsker;
    config.model_path = fixture("rotating_bernoulli.json");
    config.n = 1024;
    config.replicas = 300;
    config.seed = 2;
    config.grid = {0.0, 0.5, 1.0};
    const ExperimentReport rep = run_donsker(config);
    CHECK(rep.all_pass());
    // t = 0: everything is exactly zero
    CHECK(find_row(rep, "level1_mean[t=0]", "1").value == 0.0);
    CHECK(find_row(rep, "level1_cov[t=0]", "11").value == 0.0);
    CHECK(find_row(rep, "level2_antisym_mean[t=0]", "12").value == 0.0);
    // Gamma_rho target scales with t
    CHECK(find_row(rep, "level2_antisym_mean[t=0.5]", "12").target ==
          doctest::Approx(0.25));
}

TEST_CASE("run_donsker covers the simple random walk (Gamma = 0)") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Donsker;
    config.model_path = fixture("srw.json");
    config.n = 512;
    config.replicas = 200;
    config.seed = 3;
    config.grid = {1.0};
    const ExperimentReport rep = run_donsker(config);
    CHECK(rep.all_pass());
    CHECK(find_row(rep, "level2_antisym_mean[t=1]", "12").target == 0.0);
}

TEST_CASE("holder_ratio") {
    // zero path: statistic is exactly zero
    IncrementSeq zeros;
    for (int k = 0; k < 16; ++k) zeros.steps.push_back(Vec::Zero(2));
    CHECK(holder_ratio(path_lift(zeros), 1.0) == 0.0);

    // skipping the dilation makes the statistic grow like sqrt(N)
    const HMWModel m = load_model_file(fixture("rotating_bernoulli.json"));
    double prev = 0.0;
    for (const std::size_t n : {256u, 1024u, 4096u}) {
        const SimResult sim = simulate(m, n, 9);
        const double h = holder_ratio(path_lift(sim.increments), 1.0);
        CHECK(h > prev);
        prev = h;
    }
}

TEST_CASE("run_holder") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Holder;
    config.model_path = fixture("rotating_bernoulli.json");
    config.n = 4096;
    config.replicas = 10;
    config.seed = 19;
    const ExperimentReport rep = run_holder(config);
    const StatRow& slope = find_row(rep, "holder_log_slope");
    CHECK(slope.pass);
    CHECK(slope.tolerance == 0.1);
}

TEST_CASE("run_occupation emits the table format") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Occupation;
    config.model_path = fixture("rotating_bernoulli.json");
    config.n = 65536;
    config.seed = 1;
    config.word = "E,N";
    const ExperimentReport rep = run_occupation(config);
    CHECK(rep.all_pass());
    REQUIRE(!rep.table.empty());
    CHECK(rep.table.back().predicted == doctest::Approx(0.03125));

    const std::string csv = report_to_csv(rep);
    CHECK(csv.rfind("N,word,count,rescaled,predicted,abs_error\n", 0) == 0);
    CHECK(csv.find("\"E,N\"") != std::string::npos);  // word field is quoted
}

TEST_CASE("reports are byte-identical across worker counts") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Donsker;
    config.model_path = fixture("rotating_bernoulli.json");
    config.n = 512;
    config.replicas = 64;
    config.seed = 23;
    config.grid = {1.0};
    config.threads = 1;
    const std::string serial = report_to_csv(run_donsker(config));
    config.threads = 4;
    const std::string parallel = report_to_csv(run_donsker(config));
    CHECK(serial == parallel);
    config.threads = 1;
    CHECK(report_to_csv(run_donsker(config)) == serial);
}

TEST_CASE("report json is well formed") {
    ExperimentConfig config;
    config.kind = ExperimentKind::Anomaly;
    config.model_path = fixture("srw.json");
    config.k = 2000;
    config.seed = 3;
    const ExperimentReport rep = run_anomaly(config);
    const std::string j = report_to_json(rep);
    CHECK(j.find("\"kind\": \"anomaly\"") != std::string::npos);
    CHECK(j.find("\"all_pass\": true") != std::string::npos);
    CHECK(j.find("\"estimator\"") != std::string::npos);
}

TEST_CASE("centered occupation pairs track the indicator-walk drift matrix") {
    // indicator-valued HMW on a two-state chain: emission at state u is the
    // centered indicator vector; its excursions are centred by construction,
    // and the replica mean of N^{-1} L~_{u,v;N} converges to beta^{-1} times
    // the expected within-excursion pair tensor.
    HMWModel m;
    m.dimension = 2;
    m.chain.states = {"a", "b"};
    m.chain.Q.resize(2, 2);
    m.chain.Q << 0.7, 0.3, 0.4, 0.6;
    m.chain.start = 0;
    const Vec pi = stationary(m.chain);
    for (int u = 0; u < 2; ++u) {
        Vec f = -pi;
        f(u) += 1.0;
        m.emissions.push_back({{1.0, f, Tensor2::Zero(2, 2)}});
    }
    const auto ex = exact_excursion_stats(m, 0, 0.0, ExactMethod::LinearSolve);
    CHECK(ex.stats.mean_increment.lpNorm<Eigen::Infinity>() <= 1e-13);

    const std::size_t N = 4000, R = 200;
    const std::vector<double> pivec(pi.data(), pi.data() + pi.size());
    for (const auto [u, v] : {std::pair{0, 1}, std::pair{1, 0}, std::pair{0, 0}}) {
        double mean = 0.0, m2 = 0.0;
        std::vector<double> vals;
        for (std::size_t r = 0; r < R; ++r) {
            const SimResult sim = simulate(m, N, 37, r);
            const std::span<const int> seq(sim.states.data() + 1, N);
            vals.push_back(centered_pair(seq, u, v, pivec) / static_cast<double>(N));
        }
        for (const double x : vals) mean += x;
        mean /= static_cast<double>(R);
        for (const double x : vals) m2 += (x - mean) * (x - mean);
        const double se = std::sqrt(m2 / static_cast<double>(R - 1) /
                                    static_cast<double>(R));
        const double target = ex.stats.pair_mean(u, v) / ex.stats.beta;
        CHECK(std::abs(mean - target) <= 3.5 * se + 1e-6);
    }
}
