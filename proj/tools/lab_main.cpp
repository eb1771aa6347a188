#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "roughlab/experiments.hpp"

namespace {

using namespace roughlab;

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + out_path);
    out << text;
}

std::vector<double> parse_grid(const std::string& text) {
    std::vector<double> grid;
    std::istringstream in(text);
    std::string field;
    while (std::getline(in, field, ',')) grid.push_back(std::stod(field));
    if (grid.empty()) throw std::invalid_argument("empty time grid");
    double prev = -1.0;
    for (const double t : grid) {
        if (t < 0.0 || t > 1.0 || t <= prev)
            throw std::invalid_argument("grid must be sorted within [0,1]");
        prev = t;
    }
    return grid;
}

void add_experiment_options(CLI::App* cmd, ExperimentConfig& config,
                            std::string& grid_text, std::string& out_path,
                            std::string& format, std::string& estimators_path) {
    cmd->add_option("--model", config.model_path, "model JSON file")->required();
    cmd->add_option("--estimators", estimators_path,
                    "also dump the raw excursion estimators (name,values,ses,K,seed)");
    cmd->add_option("--n", config.n, "path length");
    cmd->add_option("--k", config.k, "number of excursions");
    cmd->add_option("--replicas", config.replicas, "independent replicas / seeds");
    cmd->add_option("--seed", config.seed, "RNG seed");
    cmd->add_option("--grid", grid_text, "time grid t1,t2,... in [0,1]");
    cmd->add_option("--out", out_path, "output file (default stdout)");
    cmd->add_option("--format", format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--exact-horizon", config.exact_horizon,
                    "enumeration horizon for the exact oracle");
    cmd->add_flag_callback("--no-isotropize",
                           [&config]() { config.isotropize = false; },
                           "skip the isotropizing transform");
    cmd->add_option("--threads", config.threads, "worker threads (output is identical)");
    cmd->add_option("--z-max", config.z_max, "z-score acceptance threshold");
    cmd->add_option("--cov-tol", config.cov_tol, "covariance tolerance per unit time");
    cmd->add_option("--holder-slope-max", config.holder_slope_max,
                    "max log-log slope of the Hoelder statistic");
    cmd->add_option("--occupation-tol", config.occupation_tol,
                    "final ergodic-scaling error tolerance");
}

int run_signature(const std::string& path_file, int level,
                  const std::string& out_path) {
    std::ifstream in(path_file);
    if (!in) throw std::runtime_error("cannot open path file: " + path_file);
    std::ostringstream buf;
    buf << in.rdbuf();
    const DiscretePath path = path_from_csv(buf.str());
    const IncrementSeq F = increments(path);

    nlohmann::json j;
    j["n_points"] = path.points.size();
    j["dim"] = F.dim();
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& t : discrete_signature(F, level)) {
        nlohmann::json lt;
        lt["order"] = t.order;
        lt["dim"] = t.dim;
        lt["data"] = t.data;
        levels.push_back(std::move(lt));
    }
    j["iterated_sums"] = std::move(levels);
    {
        const Tensor2 b = pwl_level2(F);
        nlohmann::json lt;
        lt["order"] = 2;
        lt["dim"] = F.dim();
        std::vector<double> data;
        for (Eigen::Index i = 0; i < b.rows(); ++i)
            for (Eigen::Index k = 0; k < b.cols(); ++k) data.push_back(b(i, k));
        lt["data"] = std::move(data);
        j["pwl_level2"] = std::move(lt);
        // endpoint group element in the flat [a..., b row-major] layout
        Vec total = Vec::Zero(F.dim());
        for (const auto& s : F.steps) total += s;
        j["pwl_endpoint"] =
            nlohmann::json::parse(to_json(T2Element{total, b}));
    }
    write_output(j.dump(2) + "\n", out_path);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"rough-path laboratory for hidden Markov walks"};
    app.require_subcommand(1);

    ExperimentConfig config;
    std::string grid_text, out_path, format = "csv";

    const std::vector<std::string> kinds = {
        "anomaly", "donsker", "nongeo", "occupation", "compare-embeddings",
        "holder"};
    for (const auto& kind : kinds) {
        auto* cmd = app.add_subcommand(kind, kind + " experiment");
        add_experiment_options(cmd, config, grid_text, out_path, format);
        if (kind == "occupation")
            cmd->add_option("--word", config.word,
                            "comma-separated state labels")->required();
    }

    auto* sig = app.add_subcommand("signature",
                                   "discrete signature of a CSV path");
    std::string path_file;
    int sig_level = 2;
    sig->add_option("--path", path_file, "CSV path file, one point per row")
        ->required();
    sig->add_option("--level", sig_level, "maximum iterated-sum order");
    sig->add_option("--out", out_path, "output file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sig->parsed()) return run_signature(path_file, sig_level, out_path);

        config.kind = kind_from_string(app.get_subcommands().front()->get_name());
        if (!grid_text.empty()) config.grid = parse_grid(grid_text);
        if (config.n < 1 || config.k < 1 || config.replicas < 1)
            throw std::invalid_argument("--n, --k and --replicas must be >= 1");

        const ExperimentReport report = run_experiment(config);
        write_output(format == "json" ? report_to_json(report)
                                      : report_to_csv(report),
                     out_path);
        for (const auto& note : report.notes)
            std::cerr << "note: " << note << "\n";
        if (!report.all_pass()) {
            std::cerr << "statistical check failed\n";
            return 1;
        }
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
