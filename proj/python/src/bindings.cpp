#include <pybind11/pybind11.h>
#include <pybind11/numpy.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "vaguegan/checkpoint.hpp"
#include "vaguegan/cli.hpp"
#include "vaguegan/config.hpp"
#include "vaguegan/errors.hpp"
#include "vaguegan/evaluation.hpp"
#include "vaguegan/image.hpp"
#include "vaguegan/networks.hpp"
#include "vaguegan/poisoning.hpp"
#include "vaguegan/random.hpp"
#include "vaguegan/training.hpp"

namespace py = pybind11;
using namespace vaguegan;

namespace {

using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Tensor to_tensor(const F64Array& a) {
  if (a.ndim() != 3) throw ShapeError("expected a (C, H, W) array, got ndim " + std::to_string(a.ndim()));
  Tensor t(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)),
           static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), t.data());
  return t;
}

py::array_t<double> to_array(const Tensor& t) {
  py::array_t<double> a({t.channels(), t.height(), t.width()});
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

image::ImageU8 to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an (H, W, 3) uint8 array");
  image::ImageU8 img;
  img.height = static_cast<int>(a.shape(0));
  img.width = static_cast<int>(a.shape(1));
  img.pixels.assign(a.data(), a.data() + a.size());
  return img;
}

py::array_t<std::uint8_t> image_array(const image::ImageU8& img) {
  py::array_t<std::uint8_t> a({img.height, img.width, 3});
  std::copy(img.pixels.begin(), img.pixels.end(), a.mutable_data());
  return a;
}

py::array_t<double> edge_array(const image::EdgeMap& e) {
  const Tensor& t = e.values;
  py::array_t<double> a({t.height(), t.width()});
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

nlohmann::json py_to_json(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

train::TrainingConfig config_from(const py::dict& d, const std::string& mode,
                                  const std::string& profile) {
  return train::config_from_json(py_to_json(d),
                                 train::default_config(train::mode_from_string(mode),
                                                       train::profile_from_string(profile)));
}

}  // namespace

PYBIND11_MODULE(_vaguegan, m) {
  m.doc() = "Poisoned image-conditioned GAN training and evaluation";

  py::register_exception<Error>(m, "VagueGanError", PyExc_RuntimeError);

  m.attr("LATENT_DIM") = nn::kLatentDim;
  m.attr("FEATURE_DIM") = nn::kFeatureDim;
  m.attr("POISON_LATENT_DIM") = nn::kPoisonLatentDim;

  py::class_<nn::ParamSet>(m, "ParamSet")
      .def_property_readonly("network", [](const nn::ParamSet& p) { return std::string(nn::to_string(p.id())); })
      .def_property_readonly("image_side", &nn::ParamSet::image_side)
      .def_property_readonly("scalar_count", &nn::ParamSet::scalar_count)
      .def("names", [](const nn::ParamSet& p) {
        std::vector<std::string> out;
        for (const auto& q : p.params()) out.push_back(q.name);
        return out;
      })
      .def("get", [](const nn::ParamSet& p, const std::string& name) {
        const nn::Param& q = p.get(name);
        std::vector<py::ssize_t> shape(q.shape.begin(), q.shape.end());
        py::array_t<double> a(shape);
        std::copy(q.values.begin(), q.values.end(), a.mutable_data());
        return a;
      })
      .def("__eq__", [](const nn::ParamSet& a, const nn::ParamSet& b) { return a == b; });

  m.def("init_params", [](const std::string& network, std::uint64_t seed, int side) {
    return nn::init_params(nn::network_from_string(network), seed, side);
  }, py::arg("network"), py::arg("seed"), py::arg("image_side") = 128);
  m.def("zero_params", [](const std::string& network, int side) {
    return nn::zero_params(nn::network_from_string(network), side);
  }, py::arg("network"), py::arg("image_side") = 128);

  m.def("load_image", [](const std::filesystem::path& p) { return image_array(image::load_image(p)); });
  m.def("to_gan_input", [](const U8Array& img, int side) {
    return to_array(image::to_gan_input(to_image(img), side));
  }, py::arg("image"), py::arg("side") = 128);
  m.def("from_gan_output", [](const F64Array& x) { return image_array(image::from_gan_output(to_tensor(x))); });
  m.def("canny_edge_map", [](const U8Array& img, double low, double high) {
    return edge_array(image::canny_edge_map(to_image(img), low, high));
  }, py::arg("image"), py::arg("low") = 100.0, py::arg("high") = 200.0);
  m.def("laplacian_edge_map", [](const U8Array& img) {
    return edge_array(image::laplacian_edge_map(to_image(img)));
  });

  m.def("generator_forward", [](const nn::ParamSet& g, const F64Array& x,
                                const std::vector<double>& z, const std::vector<double>& f) {
    return to_array(nn::generator_forward(g, to_tensor(x), z, f));
  }, py::arg("params"), py::arg("x"), py::arg("z"), py::arg("f"));
  m.def("discriminator_forward", [](const nn::ParamSet& d, const F64Array& x) {
    const nn::DiscriminatorOutput out = nn::discriminator_forward(d, to_tensor(x));
    py::dict r;
    r["prob"] = out.prob;
    r["prob_map"] = to_array(out.prob_map);
    r["features"] = out.features;
    return r;
  }, py::arg("params"), py::arg("x"));
  m.def("poisoner_forward", [](const nn::ParamSet& p, const F64Array& x,
                               const std::vector<double>& z_p, double eps) {
    return to_array(nn::poisoner_forward(p, to_tensor(x), z_p, eps).values);
  }, py::arg("params"), py::arg("x"), py::arg("z_p"), py::arg("eps"));

  m.def("apply_perturbation", [](const F64Array& x, const F64Array& delta, double eps) {
    return to_array(poison::apply_perturbation(to_tensor(x), Perturbation{to_tensor(delta), eps}));
  }, py::arg("x"), py::arg("delta"), py::arg("eps"));
  m.def("maybe_poison", [](const F64Array& x, const F64Array& delta, double eps, double alpha,
                           std::uint64_t seed) {
    RandomStream rng(seed);
    const poison::PoisonDecision d =
        poison::maybe_poison(to_tensor(x), Perturbation{to_tensor(delta), eps}, alpha, rng);
    return py::make_tuple(d.poisoned, to_array(d.sample));
  }, py::arg("x"), py::arg("delta"), py::arg("eps"), py::arg("alpha"), py::arg("seed"));
  m.def("stealth_mse", [](const F64Array& xp, const F64Array& x) {
    return poison::stealth_mse(to_tensor(xp), to_tensor(x));
  });
  m.def("total_variation", [](const F64Array& d) {
    return poison::total_variation(Perturbation{to_tensor(d), 0.0});
  });
  m.def("laplacian_energy", [](const F64Array& d) {
    return poison::laplacian_energy(Perturbation{to_tensor(d), 0.0});
  });
  m.def("inject_trigger", [](const F64Array& x, int patch_side, double value) {
    return to_array(poison::inject_trigger(to_tensor(x), poison::TriggerConfig{patch_side, value}));
  }, py::arg("x"), py::arg("patch_side") = 8, py::arg("value") = 1.0);

  m.def("spectral_scores", [](const F64Array& features) {
    if (features.ndim() != 2) throw ShapeError("expected an (N, K) feature matrix");
    eval::FeatureMatrix fm;
    fm.rows = static_cast<int>(features.shape(0));
    fm.cols = static_cast<int>(features.shape(1));
    fm.values.assign(features.data(), features.data() + features.size());
    fm.labels.assign(fm.rows, false);
    return eval::spectral_scores(fm);
  });
  m.def("flag_outliers", [](const std::vector<double>& scores, double percentile) {
    const eval::OutlierFlags f = eval::flag_outliers(scores, percentile);
    return py::make_tuple(std::vector<bool>(f.flagged.begin(), f.flagged.end()), f.threshold);
  }, py::arg("scores"), py::arg("percentile") = 90.0);
  m.def("detection_metrics", [](const std::vector<bool>& flags, const std::vector<bool>& truth) {
    const eval::DetectionMetrics d = eval::detection_metrics(flags, truth);
    py::dict r;
    r["precision"] = d.precision;
    r["recall"] = d.recall;
    r["f1"] = d.f1;
    return r;
  });
  m.def("backdoor_proxy", [](const nn::ParamSet& g, const F64Array& x, int patch_side,
                             double value, int n_samples, std::uint64_t seed) {
    return json_to_py(eval::to_json(eval::backdoor_proxy(
        g, to_tensor(x), poison::TriggerConfig{patch_side, value}, n_samples, seed)));
  }, py::arg("generator"), py::arg("x"), py::arg("patch_side") = 8, py::arg("value") = 1.0,
     py::arg("n_samples") = 32, py::arg("seed") = 0);
  m.def("frequency_report", [](const F64Array& x, const F64Array& xp, int bands) {
    return json_to_py(eval::to_json(eval::frequency_report(to_tensor(x), to_tensor(xp), bands)));
  }, py::arg("x"), py::arg("xp"), py::arg("bands") = 8);

  m.def("default_config", [](const std::string& mode, const std::string& profile) {
    return json_to_py(train::to_json(train::default_config(train::mode_from_string(mode),
                                                           train::profile_from_string(profile))));
  }, py::arg("mode") = "poisoned", py::arg("profile") = "desk");
  m.def("config_hash", [](const py::dict& d, const std::string& mode, const std::string& profile) {
    return train::config_hash(config_from(d, mode, profile));
  }, py::arg("config"), py::arg("mode") = "poisoned", py::arg("profile") = "desk");

  m.def("load_checkpoint", [](const std::filesystem::path& path) {
    ckpt::Checkpoint c = ckpt::load_checkpoint(path);
    py::dict r;
    r["config"] = json_to_py(train::to_json(c.config));
    r["config_hash"] = c.config_hash;
    r["epoch"] = c.state.epoch;
    r["generator"] = std::move(c.state.generator);
    r["discriminator"] = std::move(c.state.discriminator);
    r["poisoner"] = std::move(c.state.poisoner);
    return r;
  });

  m.def("run_cli", [](const std::vector<std::string>& args) {
    std::vector<std::string> owned{"vaguegan"};
    owned.insert(owned.end(), args.begin(), args.end());
    std::vector<char*> argv;
    for (auto& s : owned) argv.push_back(s.data());
    py::gil_scoped_release release;
    return cli::run(static_cast<int>(argv.size()), argv.data());
  }, py::arg("args"));
}
