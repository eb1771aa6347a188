#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "roughlab/experiments.hpp"

namespace py = pybind11;
using namespace roughlab;

namespace {

IncrementSeq make_increments(const Eigen::MatrixXd& steps,
                             const py::object& decorations) {
    IncrementSeq F;
    for (Eigen::Index k = 0; k < steps.rows(); ++k)
        F.steps.push_back(steps.row(k).transpose());
    if (!decorations.is_none()) {
        auto arr = decorations.cast<py::array_t<double, py::array::c_style>>();
        if (arr.ndim() != 3 || arr.shape(0) != steps.rows() ||
            arr.shape(1) != steps.cols() || arr.shape(2) != steps.cols())
            throw std::invalid_argument("decorations must have shape (N, d, d)");
        const auto r = arr.unchecked<3>();
        for (py::ssize_t k = 0; k < r.shape(0); ++k) {
            Tensor2 a(steps.cols(), steps.cols());
            for (py::ssize_t i = 0; i < r.shape(1); ++i)
                for (py::ssize_t j = 0; j < r.shape(2); ++j) a(i, j) = r(k, i, j);
            F.decorations.push_back(std::move(a));
        }
    }
    return F;
}

py::array level_to_numpy(const LevelTensor& t) {
    std::vector<py::ssize_t> shape(static_cast<std::size_t>(t.order),
                                   static_cast<py::ssize_t>(t.dim));
    py::array_t<double> arr(shape);
    std::copy(t.data.begin(), t.data.end(), arr.mutable_data());
    return arr;
}

py::int_ big_to_py(const BigInt& v) {
    return py::reinterpret_steal<py::int_>(
        PyLong_FromString(v.get_str().c_str(), nullptr, 10));
}

py::dict combination_to_dict(const WordCombination& comb) {
    py::dict out;
    for (const auto& [word, coeff] : comb) out[py::tuple(py::cast(word))] = coeff;
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "level-2 rough-path arithmetic and hidden-Markov-walk estimators";

    py::class_<T2Element>(m, "T2Element")
        .def(py::init<Vec, Tensor2>(), py::arg("a"), py::arg("b"))
        .def_static("identity", &T2Element::identity)
        .def_static("from_level1", &T2Element::from_level1)
        .def_readonly("a", &T2Element::a)
        .def_readonly("b", &T2Element::b)
        .def("__repr__", [](const T2Element& x) {
            return "T2Element(json=" + to_json(x) + ")";
        });

    m.def("tensor_mul", &tensor_mul);
    m.def("tensor_inv", &tensor_inv);
    m.def("wedge_mul", &wedge_mul);
    m.def("dilate", &dilate);
    m.def("split_sym_antisym", &split_sym_antisym);
    m.def("is_geometric",
          py::overload_cast<const T2Element&, double>(&is_geometric));
    m.def("is_geometric", py::overload_cast<const T2Element&>(&is_geometric));
    m.def("hom_norm", &hom_norm);
    m.def("hom_dist", &hom_dist);
    m.def("geodesic_point", &geodesic_point);
    m.def("geometric_completion", &geometric_completion);
    m.def("t2_to_json", [](const T2Element& x) { return to_json(x); });
    m.def("t2_from_json", &t2_from_json);

    m.def(
        "iterated_sum",
        [](const Eigen::MatrixXd& steps, int order) {
            return level_to_numpy(iterated_sum(make_increments(steps, py::none()), order));
        },
        py::arg("steps"), py::arg("order"));
    m.def(
        "discrete_signature",
        [](const Eigen::MatrixXd& steps, int max_order) {
            py::list out;
            for (const auto& t :
                 discrete_signature(make_increments(steps, py::none()), max_order))
                out.append(level_to_numpy(t));
            return out;
        },
        py::arg("steps"), py::arg("max_order"));
    m.def(
        "pwl_level2",
        [](const Eigen::MatrixXd& steps) {
            return pwl_level2(make_increments(steps, py::none()));
        },
        py::arg("steps"));
    m.def(
        "square_sum",
        [](const Eigen::MatrixXd& steps) {
            return square_sum(make_increments(steps, py::none()));
        },
        py::arg("steps"));
    m.def("lift_step",
          py::overload_cast<const Vec&, const Tensor2&>(&lift_step),
          py::arg("F"), py::arg("area"));
    m.def("lift_step", py::overload_cast<const Vec&>(&lift_step), py::arg("F"));
    m.def(
        "path_lift",
        [](const Eigen::MatrixXd& steps, const py::object& decorations) {
            return path_lift(make_increments(steps, decorations));
        },
        py::arg("steps"), py::arg("decorations") = py::none());
    m.def("chen_check", &chen_check, py::arg("x"), py::arg("y"), py::arg("xy"),
          py::arg("tol") = 1e-12);
    m.def(
        "nongeo_lift",
        [](const Eigen::MatrixXd& steps) {
            return nongeo_lift(make_increments(steps, py::none()));
        },
        py::arg("steps"));
    m.def(
        "signed_area",
        [](const Eigen::MatrixXd& steps) {
            return signed_area(make_increments(steps, py::none()));
        },
        py::arg("steps"));

    py::class_<MarkovSpec>(m, "MarkovSpec")
        .def_readonly("states", &MarkovSpec::states)
        .def_readonly("Q", &MarkovSpec::Q)
        .def_readonly("start", &MarkovSpec::start);

    py::class_<HMWModel>(m, "HMWModel")
        .def_readonly("chain", &HMWModel::chain)
        .def_readonly("dimension", &HMWModel::dimension)
        .def("to_json", &model_to_json);

    m.def("model_from_json", &model_from_json);
    m.def("load_model_file", &load_model_file);
    m.def("validate", [](const HMWModel& model) {
        const auto rep = validate(model);
        py::dict out;
        out["ok"] = rep.ok;
        out["errors"] = rep.errors;
        out["step_bound"] = rep.step_bound;
        return out;
    });
    m.def("stationary", &stationary);
    m.def(
        "simulate",
        [](const HMWModel& model, std::size_t n, std::uint64_t seed,
           std::uint64_t stream) {
            const SimResult sim = simulate(model, n, seed, stream);
            Eigen::MatrixXd steps(sim.increments.size(), model.dimension);
            for (std::size_t k = 0; k < sim.increments.size(); ++k)
                steps.row(static_cast<Eigen::Index>(k)) =
                    sim.increments.steps[k].transpose();
            return py::make_tuple(sim.states, steps);
        },
        py::arg("model"), py::arg("n_steps"), py::arg("seed"),
        py::arg("stream") = 0);
    m.def("excursion_times", [](const std::vector<int>& states) {
        return excursion_times(states);
    });

    py::class_<ExcursionStats>(m, "ExcursionStats")
        .def_readonly("K", &ExcursionStats::K)
        .def_readonly("beta", &ExcursionStats::beta)
        .def_readonly("beta_se", &ExcursionStats::beta_se)
        .def_readonly("mean_increment", &ExcursionStats::mean_increment)
        .def_readonly("covariance", &ExcursionStats::covariance)
        .def_readonly("C", &ExcursionStats::C)
        .def_readonly("isotropy_offdiag", &ExcursionStats::isotropy_offdiag)
        .def_readonly("gamma", &ExcursionStats::gamma)
        .def_readonly("gamma_se", &ExcursionStats::gamma_se)
        .def_readonly("gamma0", &ExcursionStats::gamma0)
        .def_readonly("gamma_rho", &ExcursionStats::gamma_rho)
        .def_readonly("M", &ExcursionStats::M)
        .def_readonly("M_se", &ExcursionStats::M_se)
        .def_readonly("pair_mean", &ExcursionStats::pair_mean)
        .def_readonly("square_sum_mean", &ExcursionStats::square_sum_mean);

    m.def(
        "estimate_excursions",
        [](const HMWModel& model, std::size_t k, std::uint64_t seed) {
            const auto records = simulate_excursions(model, k, seed);
            return estimate(records);
        },
        py::arg("model"), py::arg("k"), py::arg("seed"),
        "simulate k excursions and run the estimators");
    m.def(
        "exact_excursion_stats",
        [](const HMWModel& model, std::size_t horizon, double mass_tol,
           const std::string& method) {
            const auto ex = exact_excursion_stats(
                model, horizon, mass_tol,
                method == "enumerate" ? ExactMethod::Enumerate
                                      : ExactMethod::LinearSolve);
            return py::make_tuple(ex.stats, ex.residual_mass);
        },
        py::arg("model"), py::arg("horizon") = 24, py::arg("mass_tol") = 1e-9,
        py::arg("method") = "enumerate");
    m.def("recenter", &recenter);
    m.def("isotropize", [](const HMWModel& model) {
        auto iso = isotropize(model);
        return py::make_tuple(iso.model, iso.W);
    });

    m.def("occupation", [](const std::vector<Letter>& seq, const Word& w) {
        return big_to_py(occupation(seq, w));
    });
    m.def("shuffle", [](const Word& a, const Word& b) {
        return combination_to_dict(shuffle(a, b));
    });
    m.def("quasi_shuffle", [](const Word& a, const Word& b) {
        return combination_to_dict(quasi_shuffle(a, b));
    });
    m.def("verify_product",
          [](const std::vector<Letter>& seq, const Word& a, const Word& b) {
              return verify_product(seq, a, b);
          });
    m.def("centered_pair",
          [](const std::vector<Letter>& seq, Letter u, Letter v,
             const std::vector<double>& pi) {
              return centered_pair(seq, u, v, pi);
          });

    m.def(
        "run_experiment",
        [](const std::string& kind, const std::string& model_path,
           std::size_t n, std::size_t k, std::size_t replicas,
           std::uint64_t seed, const std::vector<double>& grid,
           std::size_t exact_horizon, bool isotropize_flag,
           const std::string& word, unsigned threads) {
            ExperimentConfig config;
            config.kind = kind_from_string(kind);
            config.model_path = model_path;
            config.n = n;
            config.k = k;
            config.replicas = replicas;
            config.seed = seed;
            if (!grid.empty()) config.grid = grid;
            config.exact_horizon = exact_horizon;
            config.isotropize = isotropize_flag;
            config.word = word;
            config.threads = threads;
            return report_to_json(run_experiment(config));
        },
        py::arg("kind"), py::arg("model_path"), py::arg("n") = 16384,
        py::arg("k") = 100000, py::arg("replicas") = 2000, py::arg("seed") = 1,
        py::arg("grid") = std::vector<double>{}, py::arg("exact_horizon") = 24,
        py::arg("isotropize") = true, py::arg("word") = std::string{},
        py::arg("threads") = 1,
        "run one experiment and return the JSON report");

    m.attr("__all__") = py::make_tuple(
        "T2Element", "tensor_mul", "tensor_inv", "wedge_mul", "dilate",
        "split_sym_antisym", "is_geometric", "hom_norm", "hom_dist",
        "geodesic_point", "geometric_completion", "t2_to_json", "t2_from_json",
        "iterated_sum", "discrete_signature", "pwl_level2", "square_sum",
        "lift_step", "path_lift", "chen_check", "nongeo_lift", "signed_area",
        "MarkovSpec", "HMWModel", "model_from_json", "load_model_file",
        "validate", "stationary", "simulate", "excursion_times",
        "ExcursionStats", "estimate_excursions", "exact_excursion_stats",
        "recenter", "isotropize", "occupation", "shuffle", "quasi_shuffle",
        "verify_product", "centered_pair", "run_experiment");
}
