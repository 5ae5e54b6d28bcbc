#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "mspc/commands.hpp"
#include "mspc/config.hpp"
#include "mspc/constraints.hpp"
#include "mspc/datasets.hpp"
#include "mspc/error.hpp"
#include "mspc/metrics.hpp"
#include "mspc/spatial_transformer.hpp"
#include "mspc/training.hpp"

namespace py = pybind11;
using namespace mspc;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

template <class T>
Tensor<T> to_tensor(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  Shape s(a.shape(), a.shape() + a.ndim());
  return Tensor<T>(s, std::vector<T>(a.data(), a.data() + a.size()));
}

template <class T>
py::array_t<T> to_array(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy_n(t.ptr(), t.size(), out.mutable_data());
  return out;
}

DeformationGrid<double> to_grid(const Array& a) {
  if (a.ndim() != 3 || a.shape(0) != a.shape(1) || a.shape(2) != 2)
    throw py::value_error("grid must have shape (K, K, 2)");
  return {static_cast<int>(a.shape(0)), to_tensor<double>(a)};
}

ConstraintConfig constraint(double a, double b_trans, double weight, const std::string& form) {
  ConstraintConfig c;
  c.a = a;
  c.b_trans = b_trans;
  c.weight = weight;
  c.translation_penalty = parse_penalty_form(form);
  c.validate();
  return c;
}

py::dict dataset_dict(const TaskDataset& d) {
  py::dict out;
  out["name"] = d.name;
  out["seed"] = d.seed;
  out["source"] = to_array(d.source);
  out["target"] = to_array(d.target);
  if (d.has_ground_truth()) {
    std::vector<Tensor<float>> gt;
    for (int64_t i = 0; i < d.source_count(); ++i) gt.push_back(d.ground_truth(d.source_image(i)));
    out["ground_truth"] = to_array(stack<float>(gt));
  } else {
    out["ground_truth"] = py::none();
  }
  return out;
}

CommandOptions options(const std::string& config, const std::string& out, std::optional<uint64_t> seed,
                       const std::string& checkpoint) {
  CommandOptions o;
  o.config = config;
  o.out = out;
  o.seed = seed;
  o.checkpoint = checkpoint;
  return o;
}

// Runs a CLI command in-process; raises with the captured stderr on failure.
int run(int (*cmd)(const CommandOptions&, std::ostream&, std::ostream&), const CommandOptions& o) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cmd(o, out, err);
  }
  if (code == kExitConfig) throw py::value_error(err.str());
  if (code != kExitOk) throw std::runtime_error(err.str());
  return code;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Spatial perturbation consistency for unpaired translation";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);

  m.def("reference_grid", [](int K) { return to_array(reference_grid<double>(K)); }, py::arg("K") = 2);
  m.def(
      "densify",
      [](const Array& grid, int height, int width) { return to_array(densify(to_grid(grid), height, width).coords); },
      py::arg("grid"), py::arg("height"), py::arg("width"));
  m.def(
      "warp",
      [](const Array& image, const Array& grid) {
        if (image.ndim() != 3) throw py::value_error("image must have shape (C, H, W)");
        const auto img = to_tensor<double>(image);
        const auto field = densify(to_grid(grid), static_cast<int>(img.dim(1)), static_cast<int>(img.dim(2)));
        return to_array(warp(img, field));
      },
      py::arg("image"), py::arg("grid"), "Warp a (C, H, W) image by a (K, K, 2) control grid.");

  m.def(
      "pairwise_scale_ratios", [](const Array& grid) { return pairwise_scale_ratios(to_grid(grid)); },
      py::arg("grid"));
  m.def(
      "constraint_penalty",
      [](const Array& grid, double a, double b_trans, double weight, const std::string& form) {
        return constraint_penalty(to_grid(grid), constraint(a, b_trans, weight, form));
      },
      py::arg("grid"), py::arg("a") = 3.0, py::arg("b_trans") = 0.25, py::arg("weight") = 1.0,
      py::arg("translation_penalty") = "hinge");
  m.def(
      "is_feasible",
      [](const Array& grid, double a, double b_trans) {
        return feasibility_report(to_grid(grid), constraint(a, b_trans, 1.0, "hinge")).feasible();
      },
      py::arg("grid"), py::arg("a") = 3.0, py::arg("b_trans") = 0.25);
  m.def(
      "rsp_transform",
      [](uint64_t seed, int K) {
        const auto t = rsp_transform(seed, K);
        return py::make_tuple(to_string(t.family), t.magnitude, to_array(t.grid.points));
      },
      py::arg("seed"), py::arg("K") = 2);

  m.def(
      "sliced_wasserstein",
      [](const Array& a, const Array& b, int projections, uint64_t seed) {
        return sliced_wasserstein(to_tensor<double>(a), to_tensor<double>(b), projections, seed);
      },
      py::arg("a"), py::arg("b"), py::arg("projections") = 128, py::arg("seed") = 0);

  m.def(
      "make_shapes_task", [](uint64_t seed, int n, int size) { return dataset_dict(make_shapes_task(seed, n, size)); },
      py::arg("seed"), py::arg("n") = 64, py::arg("size") = 32);
  m.def(
      "make_misaligned_task",
      [](uint64_t seed, int n, int size, double scale_gap, double shift_gap) {
        return dataset_dict(make_misaligned_task(seed, n, size, scale_gap, shift_gap));
      },
      py::arg("seed"), py::arg("n") = 64, py::arg("size") = 32, py::arg("scale_gap") = 1.5,
      py::arg("shift_gap") = 0.1);

  m.def(
      "config_digest",
      [](const std::string& path) { return digest_hex(config_digest(load_experiment_config(path))); },
      py::arg("config"));
  m.def(
      "read_checkpoint",
      [](const std::string& path) {
        const auto ck = read_checkpoint(path);
        py::dict params;
        for (const auto& r : ck.records) params[py::str(r.name)] = to_array(Tensor<float>(r.shape, r.data));
        return py::make_tuple(digest_hex(ck.config_digest), params);
      },
      py::arg("path"), "Returns (config digest, {name: array}).");

  m.def(
      "train",
      [](const std::string& config, const std::string& out, std::optional<uint64_t> seed) {
        return run(cmd_train, options(config, out, seed, ""));
      },
      py::arg("config"), py::arg("out") = "", py::arg("seed") = py::none());
  m.def(
      "evaluate",
      [](const std::string& config, const std::string& checkpoint, const std::string& out) {
        return run(cmd_eval, options(config, out, std::nullopt, checkpoint));
      },
      py::arg("config"), py::arg("checkpoint"), py::arg("out") = "");
  m.def(
      "compare", [](const std::string& config, const std::string& out) { return run(cmd_compare, options(config, out, std::nullopt, "")); },
      py::arg("config"), py::arg("out") = "");
}
