#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "dbdn/checkpoint.hpp"
#include "dbdn/cli.hpp"
#include "dbdn/gradcheck.hpp"
#include "dbdn/metrics.hpp"
#include "dbdn/model.hpp"

namespace py = pybind11;
using namespace dbdn;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;

ImageRGB to_image(const FloatArray& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("expected an (H, W, 3) array");
  ImageRGB img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

FloatArray to_array(const ImageRGB& img) {
  FloatArray out({img.h, img.w, 3});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

GrayImage to_gray(const FloatArray& a) {
  if (a.ndim() == 3) return rgb_to_y(to_image(a));
  if (a.ndim() != 2) throw py::value_error("expected an (H, W) luma or (H, W, 3) RGB array");
  GrayImage g;
  g.h = static_cast<int>(a.shape(0));
  g.w = static_cast<int>(a.shape(1));
  g.data.assign(a.data(), a.data() + a.size());
  return g;
}

ModelConfig make_config(const std::string& variant, int scale, int blocks, int layers, int nr,
                        int ng, bool prepend) {
  ModelConfig c;
  c.variant = parse_variant(variant);
  c.scale = scale;
  c.blocks = blocks;
  c.layers = layers;
  c.n_r = nr;
  c.n_g = ng > 0 ? ng : nr;
  c.prepend_extraction = prepend;
  if (c.variant == Variant::kWithoutComp) c = ablation_config(c);
  c.validate();
  return c;
}

Network make_network(const ModelConfig& c, std::uint64_t seed) {
  return c.variant == Variant::kWithoutInter || c.variant == Variant::kWithoutComp
             ? build_ablation(c, seed)
             : build_network(c, seed);
}

py::dict config_dict(const ModelConfig& c) {
  py::dict d;
  d["variant"] = std::string(variant_name(c.variant));
  d["scale"] = c.scale;
  d["blocks"] = c.blocks;
  d["layers"] = c.layers;
  d["nr"] = c.n_r;
  d["ng"] = c.n_g;
  d["prepend_extraction"] = c.prepend_extraction;
  return d;
}

}  // namespace

PYBIND11_MODULE(_dbdn, m) {
  m.doc() = "Dense bi-directional super-resolution engine";

  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  py::class_<Network>(m, "Network")
      .def(py::init([](const std::string& variant, int scale, int blocks, int layers, int nr,
                       int ng, bool prepend, std::uint64_t seed) {
             return make_network(make_config(variant, scale, blocks, layers, nr, ng, prepend), seed);
           }),
           py::arg("variant") = "dbdn", py::arg("scale") = 2, py::arg("blocks") = 16,
           py::arg("layers") = 8, py::arg("nr") = 64, py::arg("ng") = 0,
           py::arg("prepend_extraction") = false, py::arg("seed") = 1)
      .def_property_readonly("config", [](const Network& n) { return config_dict(n.config); })
      .def("num_params", [](const Network& n) { return count_params(n); })
      .def("param_breakdown",
           [](const Network& n) {
             const ParamBreakdown b = param_breakdown(n);
             py::dict d;
             d["extraction"] = b.extraction;
             d["blocks"] = b.blocks;
             d["global_compression"] = b.global_compression;
             d["upsampler"] = b.upsampler;
             d["reconstruction"] = b.reconstruction;
             d["total"] = b.total();
             return d;
           })
      .def("parameter_names",
           [](const Network& n) {
             std::vector<std::string> names;
             for (const NamedParameter& p : n.parameters()) names.push_back(p.name);
             return names;
           })
      .def("upscale",
           [](const Network& n, const FloatArray& lr) {
             const ImageRGB img = to_image(lr);
             ImageRGB out;
             {
               py::gil_scoped_release release;
               out = network_upscale(n, img);
             }
             return to_array(out);
           },
           py::arg("lr"), "Upscales an (H, W, 3) float image in [0, 1]. The output is not clamped.")
      .def("save", [](const Network& n, const std::filesystem::path& p) { save_checkpoint(n, p); })
      .def("to_bytes",
           [](const Network& n) {
             const auto b = serialize_network(n);
             return py::bytes(reinterpret_cast<const char*>(b.data()), b.size());
           })
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); })
      .def_static("from_bytes", [](const py::bytes& b) {
        const std::string s = b;
        return deserialize_network(std::span<const std::uint8_t>(
            reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
      });

  m.def("bicubic_resize",
        [](const FloatArray& img, int out_h, int out_w) {
          return to_array(bicubic_resize(to_image(img), out_h, out_w));
        },
        py::arg("image"), py::arg("out_h"), py::arg("out_w"),
        "Antialiased bicubic resize of an (H, W, 3) float image.");
  m.def("quantize", [](const FloatArray& img) { return to_array(quantize(to_image(img))); });
  m.def("rgb_to_y",
        [](const FloatArray& img) {
          const GrayImage g = rgb_to_y(to_image(img));
          py::array_t<double> out({g.h, g.w});
          std::copy(g.data.begin(), g.data.end(), out.mutable_data());
          return out;
        },
        "Luma on the 16-235 scale from an RGB image in [0, 1].");
  m.def("psnr",
        [](const FloatArray& a, const FloatArray& b, int crop) {
          return psnr(to_gray(a), to_gray(b), crop);
        },
        py::arg("a"), py::arg("b"), py::arg("crop") = 0,
        "PSNR on luma. RGB inputs are in [0, 1]; 2-D inputs are luma on the 255 scale.");
  m.def("ssim",
        [](const FloatArray& a, const FloatArray& b, int crop) {
          return ssim(to_gray(a), to_gray(b), crop);
        },
        py::arg("a"), py::arg("b"), py::arg("crop") = 0);
  m.def("load_image", [](const std::filesystem::path& p) { return to_array(load_image(p)); });
  m.def("save_png", [](const FloatArray& img, const std::filesystem::path& p) {
    save_png(to_image(img), p);
  });
  m.def("count_params",
        [](const std::string& variant, int scale, int blocks, int layers, int nr, int ng) {
          return count_params(
              make_network(make_config(variant, scale, blocks, layers, nr, ng, false), 0));
        },
        py::arg("variant") = "dbdn", py::arg("scale") = 2, py::arg("blocks") = 16,
        py::arg("layers") = 8, py::arg("nr") = 64, py::arg("ng") = 0);
  m.def("grad_check",
        [](const std::string& op, std::uint64_t seed) {
          const GradCheckResult r =
              op == "network" ? check_network(gradcheck_network_config(), seed) : check_op(op, seed);
          py::dict d;
          d["name"] = r.name;
          d["max_rel_error"] = r.max_rel_error;
          d["checked"] = r.checked;
          d["passed"] = r.passed;
          return d;
        },
        py::arg("op"), py::arg("seed") = 1);
  m.def("grad_check_ops", &gradcheck_op_names);
  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one command line; returns (exit_code, stdout, stderr).");
}
