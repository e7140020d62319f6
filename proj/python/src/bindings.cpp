#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "neurodecode/cli.hpp"
#include "neurodecode/recon.hpp"
#include "neurodecode/ridge.hpp"
#include "neurodecode/synth.hpp"
#include "neurodecode/tensor_io.hpp"

namespace py = pybind11;
using namespace neurodecode;

namespace {

using F32Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Tensor from_numpy(const F32Array& a) {
  Dims dims(a.shape(), a.shape() + a.ndim());
  Tensor t(dims);
  std::copy(a.data(), a.data() + a.size(), t.data().begin());
  return t;
}

F32Array to_numpy(const Tensor& t) {
  F32Array a(std::vector<py::ssize_t>(t.dims().begin(), t.dims().end()));
  std::copy(t.data().begin(), t.data().end(), a.mutable_data());
  return a;
}

}  // namespace

PYBIND11_MODULE(_neurodecode, m) {
  static py::exception<Error> error(m, "NeurodecodeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error(e.what());
    }
  });

  m.def("encode_tensor", [](const F32Array& a) {
    const auto bytes = encode_tensor(from_numpy(a));
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  });
  m.def("decode_tensor", [](const py::bytes& b) {
    const std::string s = b;
    const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
    return to_numpy(decode_tensor(std::span<const std::uint8_t>(p, s.size())));
  });
  m.def("read_tensor", [](const std::string& path) { return to_numpy(read_tensor(path)); });
  m.def("write_tensor", [](const F32Array& a, const std::string& path) { write_tensor(from_numpy(a), path); });
  m.def("load_image", [](const std::string& path) { return to_numpy(load_image(path)); });

  py::class_<RidgeModel>(m, "RidgeModel")
      .def_property_readonly("W", [](const RidgeModel& r) { return to_numpy(r.W); })
      .def_property_readonly("b", [](const RidgeModel& r) { return to_numpy(r.b); })
      .def_readonly("alpha", &RidgeModel::alpha)
      .def("predict", [](const RidgeModel& r, const F32Array& X) { return to_numpy(predict_features(r, from_numpy(X))); });

  m.def(
      "fit_ridge",
      [](const F32Array& X, const F32Array& Z, double alpha, bool standardize) {
        return fit_ridge(from_numpy(X), from_numpy(Z), alpha, RidgeOptions{standardize, RidgeSolver::kAuto});
      },
      py::arg("X"), py::arg("Z"), py::arg("alpha"), py::arg("standardize") = true);

  m.def("regression_metrics", [](const F32Array& Z, const F32Array& Z_hat) {
    const auto r = regression_metrics(from_numpy(Z), from_numpy(Z_hat));
    py::dict d;
    d["r_squared"] = r.r_squared;
    d["rmse"] = r.rmse;
    d["excluded_dims"] = r.excluded_dims;
    return d;
  });

  m.def("render_toy_image", [](int category, int size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return to_numpy(render_toy_image(category, size, rng));
  });

  m.def("recon_forward", [](const F32Array& z, std::uint64_t seed, bool paper_scale) {
    const ReconSpec spec = paper_scale ? ReconSpec::paper_scale() : ReconSpec::desk_scale();
    return to_numpy(recon_forward(init_recon(spec, seed), spec, from_numpy(z)));
  }, py::arg("z"), py::arg("seed") = 0, py::arg("paper_scale") = false);

  // Runs one CLI subcommand in-process; returns the exit code.
  m.def("run_cli", [](const std::vector<std::string>& args) {
    py::gil_scoped_release release;
    return run_cli(args);
  });
}
