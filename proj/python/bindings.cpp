#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sparseweak/cli.hpp"
#include "sparseweak/errors.hpp"
#include "sparseweak/maximal.hpp"
#include "sparseweak/sparse.hpp"
#include "sparseweak/weaktype.hpp"
#include "sparseweak/young.hpp"

namespace py = pybind11;
using namespace sparseweak;

namespace {

YoungFunction young_from(const std::string& kind, double p, double delta) {
  if (kind == "power") return power_young(p);
  if (kind == "loglog") return loglog_young(delta);
  if (kind == "linear") return linear_young();
  throw PreconditionError("young kind must be power, loglog or linear, got '" + kind + "'");
}

GridFunction grid_from(py::array_t<double, py::array::c_style | py::array::forcecast> values, int dim,
                       int resolution) {
  const auto* data = values.data();
  return GridFunction(dim, resolution, std::vector<double>(data, data + values.size()));
}

py::array_t<double> to_array(const GridFunction& g) {
  py::array_t<double> out(static_cast<py::ssize_t>(g.size()));
  std::copy(g.values().begin(), g.values().end(), out.mutable_data());
  return out;
}

}  // namespace

PYBIND11_MODULE(_sparseweak, m) {
  m.doc() = "Dyadic sparse operators, Orlicz maximal functions and weak-type checks";

  py::register_exception<PreconditionError>(m, "PreconditionError", PyExc_ValueError);
  py::register_exception<ComputationRefused>(m, "ComputationRefused", PyExc_RuntimeError);

  py::class_<YoungFunction>(m, "YoungFunction")
      .def(py::init(&young_from), py::arg("kind"), py::arg("p") = 2.0, py::arg("delta") = 1.0)
      .def("__call__", [](const YoungFunction& phi, double t) { return eval_phi(phi, t); })
      .def_property_readonly("kind", [](const YoungFunction& phi) { return std::string(to_string(phi.kind())); });

  m.def("conjugate", &conjugate, py::arg("phi"), py::arg("s"));
  m.def("conjugate_inverse", &conjugate_inverse, py::arg("phi"), py::arg("log2_y"));
  m.def(
      "c_phi",
      [](const YoungFunction& phi, double tol) {
        const auto r = c_phi(phi, tol);
        py::dict d;
        d["value"] = r.value;
        d["terms"] = r.terms;
        d["divergent"] = r.divergent;
        d["truncated"] = r.truncated;
        return d;
      },
      py::arg("phi"), py::arg("tol") = 1e-9);

  py::class_<DyadicCube>(m, "DyadicCube")
      .def(py::init([](int level, std::vector<std::uint32_t> index) { return DyadicCube::from_index(level, index); }),
           py::arg("level"), py::arg("index"))
      .def_property_readonly("level", &DyadicCube::level)
      .def_property_readonly("index", &DyadicCube::index)
      .def_property_readonly("volume", &DyadicCube::volume)
      .def("contains", &DyadicCube::contains)
      .def("__repr__", &DyadicCube::to_string);

  py::class_<SparseFamily>(m, "SparseFamily")
      .def_readonly("dim", &SparseFamily::dim)
      .def_readonly("resolution", &SparseFamily::resolution)
      .def_readonly("lambda0", &SparseFamily::lambda0)
      .def_readonly("cubes", &SparseFamily::cubes)
      .def("__len__", [](const SparseFamily& s) { return s.cubes.size(); });

  m.def(
      "generate_sparse",
      [](int dim, int resolution, double lambda0, int n_regular, int level_gap, std::size_t size, std::uint64_t seed,
         std::optional<double> child_fraction) {
        SparseGeneratorParams p;
        p.dim = dim;
        p.resolution = resolution;
        p.lambda0 = lambda0;
        p.n_regular = n_regular;
        p.level_gap = level_gap;
        p.target_size = size;
        p.seed = seed;
        p.child_fraction = child_fraction;
        return generate_sparse(p).family;
      },
      py::arg("dim"), py::arg("resolution"), py::arg("lambda0"), py::arg("n_regular") = 2, py::arg("level_gap") = 2,
      py::arg("size") = 50, py::arg("seed") = 1, py::arg("child_fraction") = py::none());
  m.def("verify_sparse", [](const SparseFamily& s) {
    const auto r = verify_sparse(s);
    return py::make_tuple(r.pass, r.worst_ratio);
  });

  m.def(
      "dyadic_frac_maximal",
      [](py::array_t<double> f, int dim, int resolution, double alpha) {
        return to_array(dyadic_frac_maximal(grid_from(f, dim, resolution), alpha));
      },
      py::arg("f"), py::arg("dim"), py::arg("resolution"), py::arg("alpha") = 0.0);
  m.def(
      "orlicz_maximal",
      [](py::array_t<double> w, int dim, int resolution, const YoungFunction& phi) {
        return to_array(orlicz_maximal(grid_from(w, dim, resolution), phi));
      },
      py::arg("w"), py::arg("dim"), py::arg("resolution"), py::arg("phi"));
  m.def(
      "sparse_operator",
      [](py::array_t<double> f, const SparseFamily& s, double alpha, double nu) {
        return to_array(sparse_operator(grid_from(f, s.dim, s.resolution), s, alpha, nu));
      },
      py::arg("f"), py::arg("family"), py::arg("alpha") = 0.0, py::arg("nu") = 1.0);
  m.def(
      "weak_norm",
      [](py::array_t<double> g, py::array_t<double> w, int dim, int resolution) {
        return weak_norm(grid_from(g, dim, resolution), grid_from(w, dim, resolution));
      },
      py::arg("g"), py::arg("w"), py::arg("dim"), py::arg("resolution"));

  m.def(
      "weaktype_report",
      [](const std::map<std::string, std::string>& options) {
        ConfigValues values(options.begin(), options.end());
        const auto cfg = build_config("weaktype", values);
        return report_json(run_experiment(cfg.experiment));
      },
      py::arg("options") = std::map<std::string, std::string>{},
      "Runs the weak-type experiment; options use the config keys, e.g. {'run.trials': '10'}.");
}
