#include "polsplat/synth.hpp"
#include "polsplat/parallel.hpp"
#include "polsplat/pfm.hpp"
#include "polsplat/polarization.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>

namespace polsplat {

using nlohmann::json;

std::vector<Camera> fibonacci_cameras(int n, double distance, int resolution,
                                      double focal_per_pixel) {
    std::vector<Camera> cams;
    cams.reserve(n);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        // spiral over z in (-0.8, 0.8) keeps cameras off the poles
        const double z = 0.8 - 1.6 * (i + 0.5) / n;
        const double r = std::sqrt(1.0 - z * z);
        const double a = golden * i;
        const Eigen::Vector3d pos =
            distance * Eigen::Vector3d(r * std::cos(a), r * std::sin(a), z);
        cams.push_back(look_at_camera(pos, Eigen::Vector3d::Zero(), resolution, resolution,
                                      focal_per_pixel * resolution));
    }
    return cams;
}

namespace {

// deterministic hemisphere directions around +z (Fibonacci)
std::vector<Eigen::Vector3d> fibonacci_hemisphere(int n) {
    std::vector<Eigen::Vector3d> dirs;
    dirs.reserve(n);
    const double golden = M_PI * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < n; ++i) {
        const double z = (i + 0.5) / n; // (0, 1]
        const double r = std::sqrt(1.0 - z * z);
        const double a = golden * i;
        dirs.emplace_back(r * std::cos(a), r * std::sin(a), z);
    }
    return dirs;
}

Eigen::Matrix3d frame_around(const Eigen::Vector3d& n) {
    const Eigen::Vector3d helper =
        std::abs(n.z()) < 0.9 ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitX();
    const Eigen::Vector3d t1 = helper.cross(n).normalized();
    const Eigen::Vector3d t2 = n.cross(t1);
    Eigen::Matrix3d f;
    f.col(0) = t1;
    f.col(1) = t2;
    f.col(2) = n;
    return f;
}

} // namespace

SynthView render_gt_view(const AnalyticScene& scene, const Material& material,
                         const Environment& env, const Camera& cam, double eta,
                         int quadrature_samples) {
    SynthView view;
    view.cam = cam;
    const int w = cam.width, h = cam.height;
    view.stokes.s0 = Image(w, h, 3);
    view.stokes.s1 = Image(w, h, 3);
    view.stokes.s2 = Image(w, h, 3);
    view.mask = Image(w, h, 1);
    view.gt_depth = Image(w, h, 1);
    view.gt_normal = Image(w, h, 3);

    const std::vector<Eigen::Vector3d> hemi = fibonacci_hemisphere(quadrature_samples);
    const double quad_weight = 2.0 * M_PI / quadrature_samples; // uniform hemisphere

    parallel_chunks(h, 2, [&](int, size_t yb, size_t ye) {
        for (size_t y = yb; y < ye; ++y) {
            for (int x = 0; x < w; ++x) {
                const Eigen::Vector3d dir = cam.pixel_ray_world(x, static_cast<double>(y));
                double t_hit;
                Eigen::Vector3d n;
                if (!scene.intersect(cam.center, dir, 1e-6, 1e9, &t_hit, &n)) continue;
                const Eigen::Vector3d p = cam.center + t_hit * dir;

                view.mask.at(y, x) = 1.0;
                view.gt_depth.at(y, x) = cam.world_to_cam(p).z();
                for (int c = 0; c < 3; ++c) view.gt_normal.at(y, x, c) = n[c];

                // diffuse: albedo/pi * integral of L(w) (w.n)+ dw
                const Eigen::Matrix3d frame = frame_around(n);
                Eigen::Vector3d irr = Eigen::Vector3d::Zero();
                for (const auto& d_local : hemi) {
                    const Eigen::Vector3d wd = frame * d_local;
                    irr += env.radiance(wd) * d_local.z();
                }
                irr *= quad_weight;
                const Eigen::Vector3d diffuse = material.diffuse_scale / M_PI *
                                                material.albedo_at(p).cwiseProduct(irr);

                // specular: mirror lookup
                const Eigen::Vector3d refl = dir - 2.0 * dir.dot(n) * n;
                const Eigen::Vector3d spec = material.specular_scale * env.radiance(refl);

                const double cos_theta = std::clamp(-dir.dot(n), 0.0, 1.0);
                const FresnelTerms f = fresnel(cos_theta, eta);
                const Eigen::Vector3d n_cam = cam.R * n;
                const double rho2 = n_cam.x() * n_cam.x() + n_cam.y() * n_cam.y();
                const double phi = rho2 > 1e-15 ? std::atan2(n_cam.y(), n_cam.x()) : 0.0;
                for (int c = 0; c < 3; ++c) {
                    const StokesVector s = pbrdf_stokes(diffuse[c], spec[c], phi, f);
                    view.stokes.s0.at(y, x, c) = s.s0;
                    view.stokes.s1.at(y, x, c) = s.s1;
                    view.stokes.s2.at(y, x, c) = s.s2;
                }
            }
        }
    });

    view.gt_aop = aop_map(view.stokes, &view.gt_aop_valid);

    // camera-realistic quadruple synthesized from the exact Stokes rasters
    view.quad.i0 = Image(w, h, 3);
    view.quad.i45 = Image(w, h, 3);
    view.quad.i90 = Image(w, h, 3);
    view.quad.i135 = Image(w, h, 3);
    for (size_t i = 0; i < view.stokes.s0.size(); ++i) {
        const double s0 = view.stokes.s0.data()[i];
        const double s1 = view.stokes.s1.data()[i];
        const double s2 = view.stokes.s2.data()[i];
        view.quad.i0.data()[i] = 0.5 * (s0 + s1);
        view.quad.i45.data()[i] = 0.5 * (s0 + s2);
        view.quad.i90.data()[i] = 0.5 * (s0 - s1);
        view.quad.i135.data()[i] = 0.5 * (s0 - s2);
    }
    return view;
}

SynthDataset generate(const SynthParams& params) {
    SynthDataset ds;
    ds.params = params;
    ds.scene = AnalyticScene::make(params.scene);
    ds.material = Material::preset(params.material);
    ds.env = Environment::default_three_lobes();
    const std::vector<Camera> cams = fibonacci_cameras(params.views, params.camera_distance,
                                                       params.resolution, params.focal_per_pixel);
    ds.views.reserve(cams.size());
    for (const Camera& cam : cams)
        ds.views.push_back(render_gt_view(ds.scene, ds.material, ds.env, cam, params.eta,
                                          params.quadrature_samples));
    return ds;
}

namespace {

json camera_to_json(const Camera& cam) {
    json j;
    j["width"] = cam.width;
    j["height"] = cam.height;
    j["fx"] = cam.fx;
    j["fy"] = cam.fy;
    j["cx"] = cam.cx;
    j["cy"] = cam.cy;
    std::vector<double> rot(9);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) rot[r * 3 + c] = cam.R(r, c);
    j["rotation"] = rot;
    j["center"] = {cam.center.x(), cam.center.y(), cam.center.z()};
    return j;
}

Camera camera_from_json(const json& j) {
    Camera cam;
    cam.width = j.at("width");
    cam.height = j.at("height");
    cam.fx = j.at("fx");
    cam.fy = j.at("fy");
    cam.cx = j.at("cx");
    cam.cy = j.at("cy");
    const auto rot = j.at("rotation").get<std::vector<double>>();
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) cam.R(r, c) = rot[r * 3 + c];
    const auto ctr = j.at("center").get<std::vector<double>>();
    cam.center = Eigen::Vector3d(ctr[0], ctr[1], ctr[2]);
    return cam;
}

std::string view_dir_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "view_%03d", i);
    return buf;
}

} // namespace

void save_dataset(const SynthDataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);

    json root;
    root["resolution"] = {ds.params.resolution, ds.params.resolution};
    root["eta"] = ds.params.eta;
    root["scene"] = {{"name", ds.params.scene},
                     {"material", ds.params.material},
                     {"seed", ds.params.seed}};
    json views = json::array();
    for (size_t i = 0; i < ds.views.size(); ++i) {
        const SynthView& v = ds.views[i];
        const std::string vdir = dir + "/" + view_dir_name(static_cast<int>(i));
        fs::create_directories(vdir);
        write_pfm(vdir + "/s0.pfm", v.stokes.s0);
        write_pfm(vdir + "/s1.pfm", v.stokes.s1);
        write_pfm(vdir + "/s2.pfm", v.stokes.s2);
        write_pfm(vdir + "/mask.pfm", v.mask);
        write_pfm(vdir + "/gt_depth.pfm", v.gt_depth);
        write_pfm(vdir + "/gt_normal.pfm", v.gt_normal);
        write_pfm(vdir + "/gt_aop.pfm", v.gt_aop);
        if (ds.params.write_quadruples) {
            write_pfm(vdir + "/i0.pfm", v.quad.i0);
            write_pfm(vdir + "/i45.pfm", v.quad.i45);
            write_pfm(vdir + "/i90.pfm", v.quad.i90);
            write_pfm(vdir + "/i135.pfm", v.quad.i135);
        }
        views.push_back(camera_to_json(v.cam));
    }
    root["views"] = views;

    std::ofstream out(dir + "/cameras.json");
    out << root.dump(2) << "\n";

    ds.env.bake(ds.params.cubemap_resolution).save(dir + "/env_cubemap");
}

LoadedDataset load_dataset(const std::string& dir, bool from_quadruples) {
    std::ifstream in(dir + "/cameras.json");
    if (!in) throw std::runtime_error("load_dataset: missing " + dir + "/cameras.json");
    json root;
    in >> root;

    LoadedDataset ds;
    ds.eta = root.value("eta", 1.5);
    if (root.contains("scene")) {
        ds.scene_name = root["scene"].value("name", "");
        ds.material_name = root["scene"].value("material", "");
        if (!ds.scene_name.empty()) {
            ds.scene = AnalyticScene::make(ds.scene_name);
            ds.material = Material::preset(ds.material_name);
            ds.env = Environment::default_three_lobes();
            ds.has_scene = true;
        }
    }

    const auto& views = root.at("views");
    for (size_t i = 0; i < views.size(); ++i) {
        View v;
        v.cam = camera_from_json(views[i]);
        const std::string vdir = dir + "/" + view_dir_name(static_cast<int>(i));
        if (from_quadruples) {
            PolarizedQuadruple q;
            q.i0 = read_pfm(vdir + "/i0.pfm");
            q.i45 = read_pfm(vdir + "/i45.pfm");
            q.i90 = read_pfm(vdir + "/i90.pfm");
            q.i135 = read_pfm(vdir + "/i135.pfm");
            v.stokes = stokes_from_quadruple(q);
        } else {
            v.stokes.s0 = read_pfm(vdir + "/s0.pfm");
            v.stokes.s1 = read_pfm(vdir + "/s1.pfm");
            v.stokes.s2 = read_pfm(vdir + "/s2.pfm");
        }
        v.mask = read_pfm(vdir + "/mask.pfm");
        if (std::filesystem::exists(vdir + "/gt_depth.pfm"))
            v.gt_depth = read_pfm(vdir + "/gt_depth.pfm");
        if (std::filesystem::exists(vdir + "/gt_normal.pfm"))
            v.gt_normal = read_pfm(vdir + "/gt_normal.pfm");
        v.derive_aop();
        ds.views.push_back(std::move(v));
    }
    return ds;
}

} // namespace polsplat
