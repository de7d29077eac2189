#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "matcap/fmc.hpp"
#include "matcap/io.hpp"
#include "matcap/matrix_gaussian.hpp"
#include "matcap/memory_fmc.hpp"
#include "matcap/training.hpp"

namespace py = pybind11;
using namespace matcap;

namespace {

Mat mat_from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() != 2) throw py::value_error("expected a 2-d array");
    Mat m(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
    std::memcpy(m.data(), arr.data(), m.size() * sizeof(double));
    return m;
}

py::array_t<double> mat_to_numpy(const Mat& m) {
    py::array_t<double> arr({m.rows(), m.cols()});
    std::memcpy(arr.mutable_data(), m.data(), m.size() * sizeof(double));
    return arr;
}

py::array_t<std::complex<double>> cmat_to_numpy(const CMat& m) {
    py::array_t<std::complex<double>> arr({m.rows(), m.cols()});
    auto buf = arr.mutable_unchecked<2>();
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) buf(i, j) = m(i, j);
    return arr;
}

using NpMat = py::array_t<double, py::array::c_style | py::array::forcecast>;

LinearMatrixDynamics dyn_from(const NpMat& u, const NpMat& v, const NpMat& w, double eps1, double eps2) {
    LinearMatrixDynamics dyn;
    dyn.u = mat_from_numpy(u);
    dyn.v = mat_from_numpy(v);
    dyn.w = mat_from_numpy(w);
    dyn.eps1 = eps1;
    dyn.eps2 = eps2;
    return dyn;
}

py::dict series_to_dict(const FmcSeries& s) {
    py::dict d;
    d["values"] = s.values;
    d["cumulative"] = s.cumulative;
    d["capacity"] = s.capacity;
    d["truncation_error_bound"] = s.truncation_error_bound;
    return d;
}

}  // namespace

PYBIND11_MODULE(_matcap, m) {
    m.doc() = "Fisher memory capacity of matrix recurrent networks and a matrix NTM";

    m.def(
        "solve_discrete_lyapunov",
        [](const NpMat& a, const NpMat& q, double tol, int iter_max) {
            return mat_to_numpy(solve_discrete_lyapunov(mat_from_numpy(a), mat_from_numpy(q), tol, iter_max));
        },
        py::arg("a"), py::arg("q"), py::arg("tol") = 1e-12, py::arg("iter_max") = 200);
    m.def(
        "solve_discrete_sylvester_sum",
        [](const NpMat& u, const NpMat& v, const NpMat& a, double tol, int iter_max) {
            return mat_to_numpy(solve_discrete_sylvester_sum(mat_from_numpy(u), mat_from_numpy(v),
                                                             mat_from_numpy(a), tol, iter_max));
        },
        py::arg("u"), py::arg("v"), py::arg("a"), py::arg("tol") = 1e-12, py::arg("iter_max") = 200);
    m.def(
        "eig_normal",
        [](const NpMat& a) {
            EigNormal e = eig_normal(mat_from_numpy(a));
            return py::make_tuple(e.values, cmat_to_numpy(e.vectors));
        },
        py::arg("a"));
    m.def(
        "spectral_radius_estimate",
        [](const NpMat& a) { return spectral_radius_estimate(mat_from_numpy(a)); }, py::arg("a"));
    m.def(
        "random_normal_convergent",
        [](int n, double radius_max, uint64_t seed) {
            SeededRng rng(seed);
            return mat_to_numpy(random_normal_convergent(n, radius_max, rng));
        },
        py::arg("n"), py::arg("radius_max"), py::arg("seed"));
    m.def(
        "frobenius_inner",
        [](const NpMat& a, const NpMat& b) { return frobenius_inner(mat_from_numpy(a), mat_from_numpy(b)); },
        py::arg("a"), py::arg("b"));

    py::class_<MatrixGaussian>(m, "MatrixGaussian")
        .def(py::init([](const NpMat& mean, const NpMat& row_cov, const NpMat& col_cov) {
                 return MatrixGaussian(mat_from_numpy(mean), mat_from_numpy(row_cov), mat_from_numpy(col_cov));
             }),
             py::arg("mean"), py::arg("row_cov"), py::arg("col_cov"))
        .def_property_readonly("mean", [](const MatrixGaussian& d) { return mat_to_numpy(d.mean()); })
        .def("sample",
             [](const MatrixGaussian& d, uint64_t seed) {
                 SeededRng rng(seed);
                 return mat_to_numpy(sample(d, rng));
             },
             py::arg("seed"))
        .def("log_density",
             [](const MatrixGaussian& d, const NpMat& x) { return log_density(d, mat_from_numpy(x)); },
             py::arg("x"));
    m.def(
        "kl_divergence",
        [](const MatrixGaussian& p1, const MatrixGaussian& p2) { return kl_divergence(p1, p2); },
        py::arg("p1"), py::arg("p2"));
    m.def("input_fisher_information",
          [](const NpMat& w, double eps1, double eps2) {
              return input_fisher_information(mat_from_numpy(w), eps1, eps2);
          },
          py::arg("w"), py::arg("eps1") = 1.0, py::arg("eps2") = 1.0);

    m.def(
        "fmc",
        [](const NpMat& u, const NpMat& v, const NpMat& w, int k_max, double eps1, double eps2) {
            return series_to_dict(fmc(dyn_from(u, v, w, eps1, eps2), k_max));
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("k_max") = 64, py::arg("eps1") = 1.0,
        py::arg("eps2") = 1.0);
    m.def(
        "capacity",
        [](const NpMat& u, const NpMat& v, const NpMat& w, double tol, double eps1, double eps2) {
            return capacity(dyn_from(u, v, w, eps1, eps2), tol);
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("tol") = 1e-12, py::arg("eps1") = 1.0,
        py::arg("eps2") = 1.0);
    m.def(
        "capacity_normal_closed_form",
        [](const NpMat& u, const NpMat& v, const NpMat& w, double eps1, double eps2) {
            return capacity_normal_closed_form(dyn_from(u, v, w, eps1, eps2));
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("eps1") = 1.0, py::arg("eps2") = 1.0);
    m.def(
        "capacity_bounds_report",
        [](const NpMat& u, const NpMat& v, const NpMat& w, double eps1, double eps2) {
            auto rep = capacity_bounds_report(dyn_from(u, v, w, eps1, eps2));
            py::dict d;
            d["j_tot"] = rep.j_tot;
            d["input_fisher"] = rep.input_fisher;
            d["j_tot_rel"] = rep.j_tot_rel;
            d["normal"] = rep.normal;
            d["convergent"] = rep.convergent;
            d["normal_bound_satisfied"] = rep.normal_bound_satisfied;
            d["general_bound_satisfied"] = rep.general_bound_satisfied;
            d["degenerate_edge"] = rep.degenerate_edge;
            return d;
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("eps1") = 1.0, py::arg("eps2") = 1.0);
    m.def(
        "expected_state_norm",
        [](const NpMat& u, const NpMat& v, const NpMat& w, double tol, double eps1, double eps2) {
            return expected_state_norm(dyn_from(u, v, w, eps1, eps2), tol);
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("tol") = 1e-10, py::arg("eps1") = 1.0,
        py::arg("eps2") = 1.0);
    m.def(
        "vector_fmc",
        [](const NpMat& w_rec, const std::vector<double>& v, int k_max, double eps) {
            VectorDynamics vd;
            vd.w_rec = mat_from_numpy(w_rec);
            vd.v = v;
            vd.eps = eps;
            return series_to_dict(vector_fmc(vd, k_max));
        },
        py::arg("w_rec"), py::arg("v"), py::arg("k_max") = 64, py::arg("eps") = 1.0);

    m.def(
        "mem_fmc",
        [](const NpMat& u, const NpMat& v, const NpMat& w, int m_max, int k_max, double eps1, double eps2) {
            MemoryAugmentedDynamics dyn;
            dyn.base = dyn_from(u, v, w, eps1, eps2);
            dyn.m_max = m_max;
            dyn.k_max = k_max;
            return series_to_dict(mem_fmc(dyn));
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("m_max") = 3, py::arg("k_max") = 32,
        py::arg("eps1") = 1.0, py::arg("eps2") = 1.0);
    m.def(
        "mem_capacity_comparison",
        [](const NpMat& u, const NpMat& v, const NpMat& w, int m_max, int k_max) {
            auto rep = mem_capacity_comparison(dyn_from(u, v, w, 1.0, 1.0), m_max, k_max);
            py::dict d;
            d["j_tot"] = rep.j_tot;
            d["j_tot_mem"] = rep.j_tot_mem;
            d["ratio"] = rep.ratio;
            d["worst_case_bound"] = rep.worst_case_bound;
            d["bound_exceeded"] = rep.bound_exceeded;
            return d;
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("m_max") = 3, py::arg("k_max") = 32);
    m.def(
        "simulate_mem_dynamics",
        [](const NpMat& u, const NpMat& v, const NpMat& w, int p, const std::vector<double>& alpha,
           const std::vector<double>& signal, int steps, uint64_t seed, bool noise_on, double eps1,
           double eps2) {
            SeededRng rng(seed);
            auto res = simulate_mem_dynamics(dyn_from(u, v, w, eps1, eps2), p, alpha, signal, steps, rng,
                                             noise_on);
            py::list states;
            for (const auto& x : res.states) states.append(mat_to_numpy(x));
            py::dict d;
            d["states"] = states;
            d["overflow"] = res.overflow;
            d["overflow_step"] = res.overflow_step;
            return d;
        },
        py::arg("u"), py::arg("v"), py::arg("w"), py::arg("p"), py::arg("alpha"), py::arg("signal"),
        py::arg("steps"), py::arg("seed"), py::arg("noise_on") = true, py::arg("eps1") = 1.0,
        py::arg("eps2") = 1.0);

    m.def(
        "gen_copy_task",
        [](int n, int l_min, int l_max, uint64_t seed) {
            SeededRng rng(seed);
            TaskSample s = gen_copy_task(n, l_min, l_max, rng);
            py::list inputs, targets;
            for (const auto& t : s.inputs) inputs.append(mat_to_numpy(t));
            for (const auto& t : s.targets) targets.append(mat_to_numpy(t));
            return py::make_tuple(inputs, targets);
        },
        py::arg("n") = 5, py::arg("l_min") = 1, py::arg("l_max") = 20, py::arg("seed") = 0);
    m.def(
        "gen_assoc_recall",
        [](int n, int item_len, int k_min, int k_max, uint64_t seed) {
            SeededRng rng(seed);
            TaskSample s = gen_assoc_recall(n, item_len, k_min, k_max, rng);
            py::list inputs, targets;
            for (const auto& t : s.inputs) inputs.append(mat_to_numpy(t));
            for (const auto& t : s.targets) targets.append(mat_to_numpy(t));
            return py::make_tuple(inputs, targets);
        },
        py::arg("n") = 5, py::arg("item_len") = 2, py::arg("k_min") = 2, py::arg("k_max") = 10,
        py::arg("seed") = 0);

    py::class_<MatNtmModel>(m, "MatNtmModel")
        .def(py::init([](const std::string& task, const std::string& kind, uint64_t seed) {
                 TrainConfig cfg;
                 cfg.task = parse_task(task);
                 cfg.external_memory = kind == "matntm";
                 SeededRng rng(seed * 104729 + 3);
                 return MatNtmModel(cfg.model_config(), rng);
             }),
             py::arg("task") = "copy", py::arg("kind") = "matntm", py::arg("seed") = 11)
        .def("param_count", &MatNtmModel::param_count)
        .def("parameter_table", &MatNtmModel::parameter_table)
        .def(
            "forward",
            [](const MatNtmModel& model, const py::list& inputs, int target_len) {
                std::vector<Mat> tokens;
                for (const auto& item : inputs) tokens.push_back(mat_from_numpy(item.cast<NpMat>()));
                Tape tape;
                auto roll = model.forward_sequence(tape, tokens, target_len, nullptr, false, false);
                py::list probs;
                for (int node : roll.probs) probs.append(mat_to_numpy(tape.value(node)));
                return probs;
            },
            py::arg("inputs"), py::arg("target_len"));

    m.def("load_checkpoint_forward",
          [](const std::string& path, const py::list& inputs, int target_len) {
              LoadedCheckpoint ck = load_checkpoint(path);
              MatNtmModel model = ck.instantiate();
              std::vector<Mat> tokens;
              for (const auto& item : inputs) tokens.push_back(mat_from_numpy(item.cast<NpMat>()));
              Tape tape;
              auto roll = model.forward_sequence(tape, tokens, target_len, nullptr, false, false);
              py::list probs;
              for (int node : roll.probs) probs.append(mat_to_numpy(tape.value(node)));
              return probs;
          },
          py::arg("path"), py::arg("inputs"), py::arg("target_len"));
}
