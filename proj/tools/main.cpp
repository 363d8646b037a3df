#include "polsplat/eval.hpp"
#include "polsplat/pfm.hpp"
#include "polsplat/ply.hpp"
#include "polsplat/trainer.hpp"
#include "polsplat/visibility.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace polsplat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNonFinite = 2;

json synth_to_json(const SynthParams& p) {
    return json{{"scene", p.scene},
                {"material", p.material},
                {"views", p.views},
                {"resolution", p.resolution},
                {"eta", p.eta},
                {"seed", p.seed},
                {"camera_distance", p.camera_distance},
                {"focal_per_pixel", p.focal_per_pixel},
                {"quadrature_samples", p.quadrature_samples},
                {"cubemap_resolution", p.cubemap_resolution},
                {"write_quadruples", p.write_quadruples}};
}

void synth_from_json(const json& j, SynthParams* p) {
    p->scene = j.value("scene", p->scene);
    p->material = j.value("material", p->material);
    p->views = j.value("views", p->views);
    p->resolution = j.value("resolution", p->resolution);
    p->eta = j.value("eta", p->eta);
    p->seed = j.value("seed", p->seed);
    p->camera_distance = j.value("camera_distance", p->camera_distance);
    p->focal_per_pixel = j.value("focal_per_pixel", p->focal_per_pixel);
    p->quadrature_samples = j.value("quadrature_samples", p->quadrature_samples);
    p->cubemap_resolution = j.value("cubemap_resolution", p->cubemap_resolution);
    p->write_quadruples = j.value("write_quadruples", p->write_quadruples);
}

json train_to_json(const TrainConfig& c) {
    return json{{"iterations", c.iterations},
                {"warmup_iters", c.warmup_iters},
                {"seed", c.seed},
                {"threads", c.threads},
                {"beta1", c.beta1},
                {"beta2", c.beta2},
                {"adam_eps", c.adam_eps},
                {"lr_position", c.lr_position},
                {"lr_position_final", c.lr_position_final},
                {"lr_scale", c.lr_scale},
                {"lr_rotation", c.lr_rotation},
                {"lr_opacity", c.lr_opacity},
                {"lr_color", c.lr_color},
                {"lr_cubemap", c.lr_cubemap},
                {"init_surfels", c.init_surfels},
                {"init_opacity_logit", c.init_opacity_logit},
                {"init_radius", c.init_radius},
                {"cubemap_resolution", c.cubemap_resolution},
                {"enable_pol", c.enable_pol},
                {"enable_tsc", c.enable_tsc},
                {"opacity_loss_negated", c.opacity_loss_negated},
                {"alpha_threshold", c.alpha_threshold},
                {"tau", c.tau},
                {"tsc_stride", c.tsc_stride},
                {"neighbor_views", c.neighbor_views},
                {"depth_cache_refresh", c.depth_cache_refresh},
                {"tsc_dolp_weighting", c.tsc_dolp_weighting},
                {"densify_interval", c.densify_interval},
                {"densify_start", c.densify_start},
                {"densify_until", c.densify_until},
                {"densify_grad_threshold", c.densify_grad_threshold},
                {"prune_opacity", c.prune_opacity},
                {"prune_scale_cap", c.prune_scale_cap},
                {"max_surfels", c.max_surfels},
                {"min_surfels", c.min_surfels},
                {"checkpoint_interval", c.checkpoint_interval},
                {"log_interval", c.log_interval}};
}

void train_from_json(const json& j, TrainConfig* c) {
    c->iterations = j.value("iterations", c->iterations);
    c->warmup_iters = j.value("warmup_iters", c->warmup_iters);
    c->seed = j.value("seed", c->seed);
    c->threads = j.value("threads", c->threads);
    c->beta1 = j.value("beta1", c->beta1);
    c->beta2 = j.value("beta2", c->beta2);
    c->adam_eps = j.value("adam_eps", c->adam_eps);
    c->lr_position = j.value("lr_position", c->lr_position);
    c->lr_position_final = j.value("lr_position_final", c->lr_position_final);
    c->lr_scale = j.value("lr_scale", c->lr_scale);
    c->lr_rotation = j.value("lr_rotation", c->lr_rotation);
    c->lr_opacity = j.value("lr_opacity", c->lr_opacity);
    c->lr_color = j.value("lr_color", c->lr_color);
    c->lr_cubemap = j.value("lr_cubemap", c->lr_cubemap);
    c->init_surfels = j.value("init_surfels", c->init_surfels);
    c->init_opacity_logit = j.value("init_opacity_logit", c->init_opacity_logit);
    c->init_radius = j.value("init_radius", c->init_radius);
    c->cubemap_resolution = j.value("cubemap_resolution", c->cubemap_resolution);
    c->enable_pol = j.value("enable_pol", c->enable_pol);
    c->enable_tsc = j.value("enable_tsc", c->enable_tsc);
    c->opacity_loss_negated = j.value("opacity_loss_negated", c->opacity_loss_negated);
    c->alpha_threshold = j.value("alpha_threshold", c->alpha_threshold);
    c->tau = j.value("tau", c->tau);
    c->tsc_stride = j.value("tsc_stride", c->tsc_stride);
    c->neighbor_views = j.value("neighbor_views", c->neighbor_views);
    c->depth_cache_refresh = j.value("depth_cache_refresh", c->depth_cache_refresh);
    c->tsc_dolp_weighting = j.value("tsc_dolp_weighting", c->tsc_dolp_weighting);
    c->densify_interval = j.value("densify_interval", c->densify_interval);
    c->densify_start = j.value("densify_start", c->densify_start);
    c->densify_until = j.value("densify_until", c->densify_until);
    c->densify_grad_threshold = j.value("densify_grad_threshold", c->densify_grad_threshold);
    c->prune_opacity = j.value("prune_opacity", c->prune_opacity);
    c->prune_scale_cap = j.value("prune_scale_cap", c->prune_scale_cap);
    c->max_surfels = j.value("max_surfels", c->max_surfels);
    c->min_surfels = j.value("min_surfels", c->min_surfels);
    c->checkpoint_interval = j.value("checkpoint_interval", c->checkpoint_interval);
    c->log_interval = j.value("log_interval", c->log_interval);
}

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path);
    json j;
    in >> j;
    return j;
}

void write_effective_config(const std::string& out_dir, const json& j) {
    fs::create_directories(out_dir);
    std::ofstream out(out_dir + "/config_used.json");
    out << j.dump(2) << "\n";
}

struct MaskGeometry {
    std::vector<Image> depths;  // camera z per view
    std::vector<Image> alphas;
};

MaskGeometry geometry_for_masks(const LoadedDataset& ds, const std::string& surfels_path,
                                bool use_gt_depth, int threads) {
    MaskGeometry geo;
    if (use_gt_depth) {
        for (const View& v : ds.views) {
            if (v.gt_depth.empty())
                throw std::runtime_error("--use-gt-depth requires gt_depth.pfm in the dataset");
            geo.depths.push_back(v.gt_depth);
            geo.alphas.push_back(v.mask);
        }
        return geo;
    }
    const SurfelCloud cloud = load_surfels_ply(surfels_path);
    RenderOptions opts;
    opts.threads = threads;
    opts.depth_only = true;
    for (const View& v : ds.views) {
        RenderBuffers b;
        RenderCache c;
        rasterize(cloud, v.cam, opts, &b, &c);
        geo.depths.push_back(std::move(b.depth));
        geo.alphas.push_back(std::move(b.alpha));
    }
    return geo;
}

struct TauStats {
    double accuracy = 0.0;
    double coverage = 0.0;
    size_t pairs = 0;
};

TauStats tau_sweep_point(const LoadedDataset& ds, const MaskGeometry& geo, double tau, int stride,
                         double alpha_thr) {
    TauStats st;
    size_t agree = 0, on = 0;
    for (size_t r = 0; r < ds.views.size(); ++r) {
        const PseudoSurfacePoints pts = backproject(geo.depths[r], geo.alphas[r],
                                                    ds.views[r].mask, ds.views[r].cam, stride,
                                                    alpha_thr);
        for (size_t k = 0; k < ds.views.size(); ++k) {
            if (k == r) continue;
            const auto pred = visibility_mask(pts, ds.views[k].cam, geo.depths[k], geo.alphas[k],
                                              tau, alpha_thr);
            const auto oracle = oracle_visibility(pts, ds.views[k].cam, ds.scene);
            for (size_t i = 0; i < pred.size(); ++i) {
                agree += pred[i] == oracle[i];
                on += pred[i];
            }
            st.pairs += pred.size();
        }
    }
    st.accuracy = st.pairs ? static_cast<double>(agree) / st.pairs : 0.0;
    st.coverage = st.pairs ? static_cast<double>(on) / st.pairs : 0.0;
    return st;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"polarimetric Gaussian surfel splatting"};
    app.require_subcommand(1);

    std::string config_path, out_dir, data_dir, surfels_path, cubemap_path;
    uint64_t seed = 0;
    bool seed_set = false;
    int threads = 2, resolution = 0, views = 0;
    double tau = -1.0, eta = -1.0;
    bool no_pol = false, no_tsc = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file; flags override it");
        cmd->add_option("--out", out_dir, "output directory");
        cmd->add_option("--seed", seed, "rng seed")->each([&](const std::string&) { seed_set = true; });
        cmd->add_option("--threads", threads, "worker threads; 1 = deterministic sequential");
        cmd->add_option("--resolution", resolution, "image resolution");
        cmd->add_option("--views", views, "number of views");
        cmd->add_option("--tau", tau, "visibility depth tolerance");
        cmd->add_option("--eta", eta, "refractive index");
    };

    CLI::App* c_synth = app.add_subcommand("synth", "generate a synthetic dataset");
    add_common(c_synth);
    std::string scene_name = "sphere", material_name = "reflective";
    c_synth->add_option("--scene", scene_name, "sphere | two_spheres | torus");
    c_synth->add_option("--material", material_name, "diffuse | reflective | mixed");

    CLI::App* c_render = app.add_subcommand("render", "render buffers for dataset views");
    add_common(c_render);
    c_render->add_option("--data", data_dir, "dataset directory")->required();
    c_render->add_option("--surfels", surfels_path, "surfel PLY")->required();
    c_render->add_option("--cubemap", cubemap_path, "cubemap directory (px.pfm..nz.pfm)");
    int render_view = -1;
    c_render->add_option("--view", render_view, "single view index (default: all)");

    CLI::App* c_train = app.add_subcommand("train", "optimize surfels on a dataset");
    add_common(c_train);
    c_train->add_option("--data", data_dir, "dataset directory")->required();
    int iters_flag = -1;
    c_train->add_option("--iters", iters_flag, "iteration count");
    c_train->add_flag("--no-pol", no_pol, "disable the polarization loss");
    c_train->add_flag("--no-tsc", no_tsc, "disable tangent-space consistency");

    CLI::App* c_mask = app.add_subcommand("mask", "dump depth-guided visibility masks");
    add_common(c_mask);
    c_mask->add_option("--data", data_dir, "dataset directory")->required();
    c_mask->add_option("--surfels", surfels_path, "surfel PLY providing rendered depth");
    bool use_gt_depth = false;
    c_mask->add_flag("--use-gt-depth", use_gt_depth, "use dataset gt depth instead of a PLY");
    int ref_view = 0, mask_stride = 4;
    c_mask->add_option("--ref", ref_view, "reference view index");
    c_mask->add_option("--stride", mask_stride, "pixel stride for pseudo-surface points");

    CLI::App* c_eval = app.add_subcommand("eval", "normal MAE and Chamfer distance");
    add_common(c_eval);
    c_eval->add_option("--data", data_dir, "dataset directory")->required();
    c_eval->add_option("--surfels", surfels_path, "surfel PLY")->required();

    CLI::App* c_ablate = app.add_subcommand("ablate-tau", "sweep the visibility threshold");
    add_common(c_ablate);
    c_ablate->add_option("--data", data_dir, "dataset directory")->required();
    c_ablate->add_option("--surfels", surfels_path, "surfel PLY providing rendered depth");
    c_ablate->add_flag("--use-gt-depth", use_gt_depth, "use dataset gt depth instead of a PLY");
    std::vector<double> taus = {0.002, 0.005, 0.010, 0.020, 0.050};
    c_ablate->add_option("--taus", taus, "tau values to sweep");
    int ablate_train_iters = 0, ablate_stride = 4;
    c_ablate->add_option("--train-iters", ablate_train_iters,
                         "per-tau training iterations for the MAE column (0 = skip)");
    c_ablate->add_option("--stride", ablate_stride, "pixel stride for pseudo-surface points");

    CLI11_PARSE(app, argc, argv);

    try {
        const json file_cfg = load_config_file(config_path);

        if (app.got_subcommand(c_synth)) {
            SynthParams p;
            if (file_cfg.contains("synth")) synth_from_json(file_cfg["synth"], &p);
            if (!c_synth->get_option("--scene")->empty() || !file_cfg.contains("synth"))
                p.scene = scene_name;
            if (!c_synth->get_option("--material")->empty() || !file_cfg.contains("synth"))
                p.material = material_name;
            if (views > 0) p.views = views;
            if (resolution > 0) p.resolution = resolution;
            if (eta > 0) p.eta = eta;
            if (seed_set) p.seed = seed;
            if (out_dir.empty()) throw std::runtime_error("synth requires --out");

            const SynthDataset ds = generate(p);
            save_dataset(ds, out_dir);
            write_effective_config(out_dir, json{{"synth", synth_to_json(p)}});
            std::cout << "wrote " << ds.views.size() << " views to " << out_dir << "\n";
            return kExitOk;
        }

        if (app.got_subcommand(c_render)) {
            if (out_dir.empty()) throw std::runtime_error("render requires --out");
            const LoadedDataset ds = load_dataset(data_dir);
            const SurfelCloud cloud = load_surfels_ply(surfels_path);
            Cubemap cubemap(8, 0.0);
            const bool deferred = !cubemap_path.empty();
            if (deferred) cubemap = Cubemap::load(cubemap_path);
            RenderOptions opts;
            opts.threads = threads;
            opts.eta = eta > 0 ? eta : ds.eta;
            fs::create_directories(out_dir);
            for (size_t i = 0; i < ds.views.size(); ++i) {
                if (render_view >= 0 && static_cast<int>(i) != render_view) continue;
                RenderBuffers b;
                RenderCache c;
                render_full(cloud, ds.views[i].cam, cubemap, opts, deferred, &b, &c);
                char name[32];
                std::snprintf(name, sizeof(name), "view_%03d", static_cast<int>(i));
                const std::string vdir = out_dir + "/" + name;
                fs::create_directories(vdir);
                write_pfm(vdir + "/color.pfm", b.color);
                write_pfm(vdir + "/s0.pfm", b.s0);
                write_pfm(vdir + "/s1.pfm", b.s1);
                write_pfm(vdir + "/s2.pfm", b.s2);
                write_pfm(vdir + "/depth.pfm", b.depth);
                write_pfm(vdir + "/normal.pfm", b.normal);
                write_pfm(vdir + "/alpha.pfm", b.alpha);
                write_pfm(vdir + "/specular.pfm", b.specular);
            }
            write_effective_config(out_dir, json{{"render", {{"eta", opts.eta}}}});
            return kExitOk;
        }

        if (app.got_subcommand(c_train)) {
            if (out_dir.empty()) throw std::runtime_error("train requires --out");
            TrainConfig cfg;
            if (file_cfg.contains("train")) train_from_json(file_cfg["train"], &cfg);
            if (iters_flag > 0) cfg.iterations = iters_flag;
            if (seed_set) cfg.seed = seed;
            cfg.threads = threads;
            if (tau > 0) cfg.tau = tau;
            if (eta > 0) cfg.eta = eta;
            if (no_pol) cfg.enable_pol = false;
            if (no_tsc) cfg.enable_tsc = false;

            const LoadedDataset ds = load_dataset(data_dir);
            write_effective_config(out_dir, json{{"train", train_to_json(cfg)}});

            EvalOptions eopts;
            eopts.threads = threads;
            json metrics;
            const TrainResult result = train(ds, cfg, out_dir);
            if (result.aborted_non_finite) {
                std::cerr << "non-finite loss at iteration " << result.iterations_run
                          << "; diagnostics dumped\n";
                return kExitNonFinite;
            }
            const EvalResult final_eval = evaluate_cloud(result.cloud, ds, eopts);
            metrics["mae_deg"] = final_eval.mae_deg;
            metrics["chamfer_milli"] = final_eval.chamfer_milli;
            metrics["iterations"] = result.iterations_run;
            metrics["surfels"] = result.cloud.size();
            std::ofstream(out_dir + "/metrics.json") << metrics.dump(2) << "\n";
            std::cout << "final MAE " << final_eval.mae_deg << " deg, chamfer "
                      << final_eval.chamfer_milli << " mu\n";
            if (!std::isfinite(final_eval.mae_deg)) return kExitNonFinite;
            return kExitOk;
        }

        if (app.got_subcommand(c_mask)) {
            if (out_dir.empty()) throw std::runtime_error("mask requires --out");
            const LoadedDataset ds = load_dataset(data_dir);
            if (!use_gt_depth && surfels_path.empty())
                throw std::runtime_error("mask needs --surfels or --use-gt-depth");
            const MaskGeometry geo = geometry_for_masks(ds, surfels_path, use_gt_depth, threads);
            const double use_tau = tau > 0 ? tau : 0.010;
            const int r = ref_view;
            if (r < 0 || r >= static_cast<int>(ds.views.size()))
                throw std::runtime_error("mask: --ref out of range");
            const PseudoSurfacePoints pts =
                backproject(geo.depths[r], geo.alphas[r], ds.views[r].mask, ds.views[r].cam,
                            mask_stride, 0.5);
            fs::create_directories(out_dir);
            for (size_t k = 0; k < ds.views.size(); ++k) {
                if (static_cast<int>(k) == r) continue;
                const auto v = visibility_mask(pts, ds.views[k].cam, geo.depths[k], geo.alphas[k],
                                               use_tau, 0.5);
                Image raster(ds.views[r].cam.width, ds.views[r].cam.height, 1, 0.0);
                for (size_t i = 0; i < pts.points.size(); ++i)
                    raster.at(pts.points[i].py, pts.points[i].px) = v[i];
                char name[48];
                std::snprintf(name, sizeof(name), "visibility_ref%03d_view%03d.pfm", r,
                              static_cast<int>(k));
                write_pfm(out_dir + "/" + name, raster);
            }
            write_effective_config(out_dir, json{{"mask", {{"tau", use_tau}, {"ref", r}}}});
            return kExitOk;
        }

        if (app.got_subcommand(c_eval)) {
            const LoadedDataset ds = load_dataset(data_dir);
            const SurfelCloud cloud = load_surfels_ply(surfels_path);
            EvalOptions eopts;
            eopts.threads = threads;
            const EvalResult r = evaluate_cloud(cloud, ds, eopts);
            std::cout << "normal MAE: " << r.mae_deg << " deg\n";
            std::cout << "chamfer: " << r.chamfer_milli << " milli-units\n";
            if (!out_dir.empty()) {
                fs::create_directories(out_dir);
                std::ofstream(out_dir + "/metrics.json")
                    << json{{"mae_deg", r.mae_deg}, {"chamfer_milli", r.chamfer_milli}}.dump(2)
                    << "\n";
                write_effective_config(out_dir, json::object());
            }
            if (!std::isfinite(r.mae_deg)) return kExitNonFinite;
            return kExitOk;
        }

        if (app.got_subcommand(c_ablate)) {
            if (out_dir.empty()) throw std::runtime_error("ablate-tau requires --out");
            const LoadedDataset ds = load_dataset(data_dir);
            if (!ds.has_scene)
                throw std::runtime_error("ablate-tau needs a dataset with a scene block");
            if (!use_gt_depth && surfels_path.empty())
                throw std::runtime_error("ablate-tau needs --surfels or --use-gt-depth");
            const MaskGeometry geo = geometry_for_masks(ds, surfels_path, use_gt_depth, threads);
            fs::create_directories(out_dir);
            std::ofstream csv(out_dir + "/tau_sweep.csv");
            csv << "tau,accuracy,coverage,post_train_mae_deg\n";
            for (double t : taus) {
                const TauStats st = tau_sweep_point(ds, geo, t, ablate_stride, 0.5);
                double mae = std::numeric_limits<double>::quiet_NaN();
                if (ablate_train_iters > 0) {
                    TrainConfig cfg;
                    if (file_cfg.contains("train")) train_from_json(file_cfg["train"], &cfg);
                    cfg.iterations = ablate_train_iters;
                    cfg.tau = t;
                    cfg.threads = threads;
                    if (seed_set) cfg.seed = seed;
                    const TrainResult res = train(ds, cfg);
                    EvalOptions eopts;
                    eopts.threads = threads;
                    mae = evaluate_cloud(res.cloud, ds, eopts).mae_deg;
                }
                csv << t << ',' << st.accuracy << ',' << st.coverage << ',' << mae << '\n';
                std::cout << "tau " << t << ": accuracy " << st.accuracy << ", coverage "
                          << st.coverage << "\n";
            }
            write_effective_config(out_dir, json{{"ablate_tau", {{"taus", taus}}}});
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
