#include "polsplat/eval.hpp"
#include "polsplat/pfm.hpp"
#include "polsplat/ply.hpp"
#include "polsplat/tangent.hpp"
#include "polsplat/trainer.hpp"

#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

namespace py = pybind11;
using namespace polsplat;

namespace {

Image numpy_to_image(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
    if (arr.ndim() == 2) {
        Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)), 1);
        std::copy(arr.data(), arr.data() + arr.size(), img.data().begin());
        return img;
    }
    if (arr.ndim() == 3) {
        Image img(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)),
                  static_cast<int>(arr.shape(2)));
        std::copy(arr.data(), arr.data() + arr.size(), img.data().begin());
        return img;
    }
    throw std::invalid_argument("expected a HxW or HxWxC array");
}

py::array_t<double> image_to_numpy(const Image& img) {
    if (img.channels() == 1) {
        py::array_t<double> arr({img.height(), img.width()});
        std::copy(img.data().begin(), img.data().end(), arr.mutable_data());
        return arr;
    }
    py::array_t<double> arr({img.height(), img.width(), img.channels()});
    std::copy(img.data().begin(), img.data().end(), arr.mutable_data());
    return arr;
}

py::dict fresnel_dict(const FresnelTerms& f) {
    py::dict d;
    d["t_plus"] = f.t_plus;
    d["t_minus"] = f.t_minus;
    d["r_plus"] = f.r_plus;
    d["r_minus"] = f.r_minus;
    d["eta"] = f.eta;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Polarimetric Gaussian surfel splatting: Stokes math, rendering, "
              "training and evaluation.";

    m.def("stokes_from_quadruple",
          [](py::array_t<double> i0, py::array_t<double> i45, py::array_t<double> i90,
             py::array_t<double> i135) {
              PolarizedQuadruple q{numpy_to_image(i0), numpy_to_image(i45), numpy_to_image(i90),
                                   numpy_to_image(i135)};
              const StokesImage s = stokes_from_quadruple(q);
              return py::make_tuple(image_to_numpy(s.s0), image_to_numpy(s.s1),
                                    image_to_numpy(s.s2));
          },
          py::arg("i0"), py::arg("i45"), py::arg("i90"), py::arg("i135"));

    m.def("aop",
          [](double s1, double s2) {
              bool valid = false;
              const double phi = aop(s1, s2, &valid);
              return py::make_tuple(phi, valid);
          },
          py::arg("s1"), py::arg("s2"), "angle of polarization in [0, pi) and validity");

    m.def("fresnel",
          [](double cos_theta, double eta) { return fresnel_dict(fresnel(cos_theta, eta)); },
          py::arg("cos_theta"), py::arg("eta") = 1.5);

    m.def("pbrdf_stokes",
          [](double diffuse, double specular, double phi_n, double cos_theta, double eta) {
              const StokesVector s =
                  pbrdf_stokes(diffuse, specular, phi_n, fresnel(cos_theta, eta));
              return py::make_tuple(s.s0, s.s1, s.s2);
          },
          py::arg("diffuse"), py::arg("specular"), py::arg("phi_n"), py::arg("cos_theta"),
          py::arg("eta") = 1.5);

    m.def("projected_tangent", &projected_tangent, py::arg("phi"), py::arg("rotation"));
    m.def("pseudo_tangent", &pseudo_tangent, py::arg("phi"), py::arg("rotation"));

    m.def("read_pfm", [](const std::string& path) { return image_to_numpy(read_pfm(path)); },
          py::arg("path"));
    m.def("write_pfm",
          [](const std::string& path, py::array_t<double> arr) {
              write_pfm(path, numpy_to_image(arr));
          },
          py::arg("path"), py::arg("image"));

    m.def("generate_dataset",
          [](const std::string& out_dir, const std::string& scene, const std::string& material,
             int views, int resolution, double eta, uint64_t seed) {
              SynthParams p;
              p.scene = scene;
              p.material = material;
              p.views = views;
              p.resolution = resolution;
              p.eta = eta;
              p.seed = seed;
              save_dataset(generate(p), out_dir);
          },
          py::arg("out_dir"), py::arg("scene") = "sphere", py::arg("material") = "reflective",
          py::arg("views") = 12, py::arg("resolution") = 128, py::arg("eta") = 1.5,
          py::arg("seed") = 0);

    m.def("train",
          [](const std::string& dataset_dir, const std::string& out_dir, int iterations,
             int warmup, uint64_t seed, int threads, bool enable_pol, bool enable_tsc,
             double tau) {
              const LoadedDataset ds = load_dataset(dataset_dir);
              TrainConfig cfg;
              cfg.iterations = iterations;
              cfg.warmup_iters = warmup;
              cfg.seed = seed;
              cfg.threads = threads;
              cfg.enable_pol = enable_pol;
              cfg.enable_tsc = enable_tsc;
              cfg.tau = tau;
              const TrainResult r = train(ds, cfg, out_dir);
              EvalOptions eopts;
              eopts.threads = threads;
              const EvalResult ev = evaluate_cloud(r.cloud, ds, eopts);
              py::dict d;
              d["iterations"] = r.iterations_run;
              d["surfels"] = r.cloud.size();
              d["aborted_non_finite"] = r.aborted_non_finite;
              d["mae_deg"] = ev.mae_deg;
              d["chamfer_milli"] = ev.chamfer_milli;
              return d;
          },
          py::arg("dataset_dir"), py::arg("out_dir"), py::arg("iterations") = 15000,
          py::arg("warmup") = 1000, py::arg("seed") = 0, py::arg("threads") = 2,
          py::arg("enable_pol") = true, py::arg("enable_tsc") = true, py::arg("tau") = 0.010);

    m.def("render_view",
          [](const std::string& dataset_dir, const std::string& ply_path,
             const std::string& cubemap_dir, int view_index, int threads) {
              const LoadedDataset ds = load_dataset(dataset_dir);
              if (view_index < 0 || view_index >= static_cast<int>(ds.views.size()))
                  throw std::out_of_range("view_index");
              const SurfelCloud cloud = load_surfels_ply(ply_path);
              const bool deferred = !cubemap_dir.empty();
              Cubemap cm = deferred ? Cubemap::load(cubemap_dir) : Cubemap(8, 0.0);
              RenderOptions opts;
              opts.threads = threads;
              opts.eta = ds.eta;
              RenderBuffers b;
              RenderCache c;
              render_full(cloud, ds.views[view_index].cam, cm, opts, deferred, &b, &c);
              py::dict d;
              d["color"] = image_to_numpy(b.color);
              d["s0"] = image_to_numpy(b.s0);
              d["s1"] = image_to_numpy(b.s1);
              d["s2"] = image_to_numpy(b.s2);
              d["depth"] = image_to_numpy(b.depth);
              d["normal"] = image_to_numpy(b.normal);
              d["alpha"] = image_to_numpy(b.alpha);
              d["specular"] = image_to_numpy(b.specular);
              return d;
          },
          py::arg("dataset_dir"), py::arg("ply_path"), py::arg("cubemap_dir") = "",
          py::arg("view_index") = 0, py::arg("threads") = 2);

    m.def("evaluate",
          [](const std::string& dataset_dir, const std::string& ply_path, int threads) {
              const LoadedDataset ds = load_dataset(dataset_dir);
              EvalOptions eopts;
              eopts.threads = threads;
              const EvalResult ev = evaluate_cloud(load_surfels_ply(ply_path), ds, eopts);
              py::dict d;
              d["mae_deg"] = ev.mae_deg;
              d["chamfer_milli"] = ev.chamfer_milli;
              return d;
          },
          py::arg("dataset_dir"), py::arg("ply_path"), py::arg("threads") = 2);
}
