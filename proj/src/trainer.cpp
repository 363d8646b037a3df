#include "polsplat/trainer.hpp"
#include "polsplat/pfm.hpp"
#include "polsplat/ply.hpp"

#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace polsplat {

namespace {

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// All randomness is keyed on (seed, purpose, index), so a resumed run
// replays the identical stream without serialized engine state.
std::mt19937_64 keyed_rng(uint64_t seed, uint64_t salt, uint64_t index) {
    return std::mt19937_64(splitmix64(seed ^ splitmix64(salt) ^ splitmix64(index * 0x9e37ull)));
}

std::vector<int> epoch_view_order(uint64_t seed, int epoch, int n_views) {
    std::vector<int> order(n_views);
    std::iota(order.begin(), order.end(), 0);
    auto rng = keyed_rng(seed, 0x5eedull, epoch);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

struct AdamState {
    SurfelGrads m, v;
    std::vector<double> cm_m, cm_v;

    void resize(size_t n, size_t texels) {
        m.resize_zero(n);
        v.resize_zero(n);
        cm_m.assign(texels, 0.0);
        cm_v.assign(texels, 0.0);
    }
};

void adam_update(double* param, double g, double* m, double* v, double lr, double b1, double b2,
                 double eps, double bias1, double bias2) {
    *m = b1 * *m + (1.0 - b1) * g;
    *v = b2 * *v + (1.0 - b2) * g * g;
    const double mh = *m / bias1;
    const double vh = *v / bias2;
    *param -= lr * mh / (std::sqrt(vh) + eps);
}

std::vector<std::vector<int>> nearest_neighbor_views(const std::vector<View>& views, int k) {
    const int n = static_cast<int>(views.size());
    std::vector<std::vector<int>> out(n);
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> d;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            d.emplace_back((views[i].cam.center - views[j].cam.center).norm(), j);
        }
        std::sort(d.begin(), d.end());
        for (int j = 0; j < std::min<int>(k, static_cast<int>(d.size())); ++j)
            out[i].push_back(d[j].second);
    }
    return out;
}

void write_doubles(std::ofstream& out, const double* p, size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::ifstream& in, double* p, size_t n) {
    in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

} // namespace

SurfelCloud initialize_cloud(int count, double radius, double opacity_logit,
                             std::mt19937_64& rng) {
    SurfelCloud cloud;
    cloud.resize(count);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int i = 0; i < count; ++i) {
        Eigen::Vector3d p;
        do {
            p = Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
        } while (p.squaredNorm() > 1.0);
        cloud.position[i] = radius * p;
        Eigen::Vector4d q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
        cloud.rotation[i] = q.normalized();
        cloud.opacity_logit[i] = opacity_logit;
        cloud.color[i] = Eigen::Vector3d::Constant(0.5);
    }

    // isotropic scale from the mean nearest-neighbor distance
    double nn_sum = 0.0;
    const int probes = std::min(count, 512);
    for (int i = 0; i < probes; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (int j = 0; j < count; ++j) {
            if (j == i) continue;
            best = std::min(best, (cloud.position[i] - cloud.position[j]).squaredNorm());
        }
        nn_sum += std::sqrt(best);
    }
    const double nn = probes > 0 ? nn_sum / probes : 0.05;
    const double log_s = std::log(std::max(nn, 1e-4));
    for (int i = 0; i < count; ++i) cloud.log_scale[i] = Eigen::Vector2d(log_s, log_s);
    return cloud;
}

size_t densify_prune(SurfelCloud* cloud, std::vector<double>* grad_accum,
                     std::vector<int>* grad_counts, const TrainConfig& config,
                     std::mt19937_64& rng, bool* degenerate, SurfelGrads* adam_m,
                     SurfelGrads* adam_v) {
    const size_t n = cloud->size();
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<char> keep(n, 1);
    size_t kept = 0;
    for (size_t i = 0; i < n; ++i) {
        const Eigen::Vector2d s = cloud->scale(i);
        if (cloud->opacity(i) < config.prune_opacity || s.maxCoeff() > config.prune_scale_cap)
            keep[i] = 0;
        else
            ++kept;
    }
    if (degenerate) *degenerate = kept == 0;
    if (kept == 0) return 0;
    if (kept < config.min_surfels)
        std::fill(keep.begin(), keep.end(), 1); // refuse to shrink below the floor

    SurfelCloud next;
    SurfelGrads m_next, v_next;
    const bool with_adam = adam_m != nullptr;
    auto push = [&](size_t i, const Eigen::Vector3d& pos_override, bool fresh_moments) {
        next.position.push_back(pos_override);
        next.log_scale.push_back(cloud->log_scale[i]);
        next.rotation.push_back(cloud->rotation[i]);
        next.opacity_logit.push_back(cloud->opacity_logit[i]);
        next.color.push_back(cloud->color[i]);
        if (with_adam) {
            if (fresh_moments) {
                m_next.position.push_back(Eigen::Vector3d::Zero());
                m_next.log_scale.push_back(Eigen::Vector2d::Zero());
                m_next.rotation.push_back(Eigen::Vector4d::Zero());
                m_next.opacity_logit.push_back(0.0);
                m_next.color.push_back(Eigen::Vector3d::Zero());
                v_next.position.push_back(Eigen::Vector3d::Zero());
                v_next.log_scale.push_back(Eigen::Vector2d::Zero());
                v_next.rotation.push_back(Eigen::Vector4d::Zero());
                v_next.opacity_logit.push_back(0.0);
                v_next.color.push_back(Eigen::Vector3d::Zero());
            } else {
                m_next.position.push_back(adam_m->position[i]);
                m_next.log_scale.push_back(adam_m->log_scale[i]);
                m_next.rotation.push_back(adam_m->rotation[i]);
                m_next.opacity_logit.push_back(adam_m->opacity_logit[i]);
                m_next.color.push_back(adam_m->color[i]);
                v_next.position.push_back(adam_v->position[i]);
                v_next.log_scale.push_back(adam_v->log_scale[i]);
                v_next.rotation.push_back(adam_v->rotation[i]);
                v_next.opacity_logit.push_back(adam_v->opacity_logit[i]);
                v_next.color.push_back(adam_v->color[i]);
            }
        }
    };

    size_t budget = config.max_surfels > kept ? config.max_surfels - kept : 0;
    for (size_t i = 0; i < n; ++i) {
        if (!keep[i]) continue;
        push(i, cloud->position[i], false);
        const double avg = (*grad_counts)[i] > 0 ? (*grad_accum)[i] / (*grad_counts)[i] : 0.0;
        if (avg > config.densify_grad_threshold && budget > 0) {
            // clone jittered within the surfel's own tangent footprint
            const Eigen::Matrix3d rot = quat_to_matrix(cloud->unit_rotation(i));
            const Eigen::Vector2d s = cloud->scale(i);
            const Eigen::Vector3d offset =
                0.5 * (gauss(rng) * s.x() * rot.col(0) + gauss(rng) * s.y() * rot.col(1));
            push(i, cloud->position[i] + offset, true);
            --budget;
        }
    }

    *cloud = std::move(next);
    if (with_adam) {
        *adam_m = std::move(m_next);
        *adam_v = std::move(v_next);
    }
    grad_accum->assign(cloud->size(), 0.0);
    grad_counts->assign(cloud->size(), 0);
    return cloud->size();
}

namespace {

void save_state_bin(const std::string& path, int iteration, const SurfelCloud& cloud,
                    const AdamState& adam, const std::vector<double>& grad_accum,
                    const std::vector<int>& grad_counts) {
    std::ofstream out(path, std::ios::binary);
    const uint64_t n = cloud.size(), t = adam.cm_m.size();
    out.write("PSCK", 4);
    const uint64_t version = 1, it = static_cast<uint64_t>(iteration);
    out.write(reinterpret_cast<const char*>(&version), 8);
    out.write(reinterpret_cast<const char*>(&it), 8);
    out.write(reinterpret_cast<const char*>(&n), 8);
    out.write(reinterpret_cast<const char*>(&t), 8);
    auto dump_grads = [&](const SurfelGrads& g) {
        for (uint64_t i = 0; i < n; ++i) {
            write_doubles(out, g.position[i].data(), 3);
            write_doubles(out, g.log_scale[i].data(), 2);
            write_doubles(out, g.rotation[i].data(), 4);
            write_doubles(out, &g.opacity_logit[i], 1);
            write_doubles(out, g.color[i].data(), 3);
        }
    };
    dump_grads(adam.m);
    dump_grads(adam.v);
    write_doubles(out, adam.cm_m.data(), t);
    write_doubles(out, adam.cm_v.data(), t);
    write_doubles(out, grad_accum.data(), n);
    for (uint64_t i = 0; i < n; ++i) {
        const double c = grad_counts[i];
        write_doubles(out, &c, 1);
    }
}

bool load_state_bin(const std::string& path, int* iteration, size_t n_expected, AdamState* adam,
                    std::vector<double>* grad_accum, std::vector<int>* grad_counts) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    char magic[4];
    in.read(magic, 4);
    if (std::string(magic, 4) != "PSCK") return false;
    uint64_t version, it, n, t;
    in.read(reinterpret_cast<char*>(&version), 8);
    in.read(reinterpret_cast<char*>(&it), 8);
    in.read(reinterpret_cast<char*>(&n), 8);
    in.read(reinterpret_cast<char*>(&t), 8);
    if (version != 1 || n != n_expected) return false;
    *iteration = static_cast<int>(it);
    adam->m.resize_zero(n);
    adam->v.resize_zero(n);
    adam->cm_m.assign(t, 0.0);
    adam->cm_v.assign(t, 0.0);
    auto slurp = [&](SurfelGrads& g) {
        for (uint64_t i = 0; i < n; ++i) {
            read_doubles(in, g.position[i].data(), 3);
            read_doubles(in, g.log_scale[i].data(), 2);
            read_doubles(in, g.rotation[i].data(), 4);
            read_doubles(in, &g.opacity_logit[i], 1);
            read_doubles(in, g.color[i].data(), 3);
        }
    };
    slurp(adam->m);
    slurp(adam->v);
    read_doubles(in, adam->cm_m.data(), t);
    read_doubles(in, adam->cm_v.data(), t);
    grad_accum->assign(n, 0.0);
    read_doubles(in, grad_accum->data(), n);
    grad_counts->assign(n, 0);
    for (uint64_t i = 0; i < n; ++i) {
        double c;
        read_doubles(in, &c, 1);
        (*grad_counts)[i] = static_cast<int>(c);
    }
    return in.good();
}

void dump_diagnostics(const std::string& out_dir, int iteration, const RenderBuffers& buffers) {
    if (out_dir.empty()) return;
    const std::string dir = out_dir + "/diagnostics_it" + std::to_string(iteration);
    std::filesystem::create_directories(dir);
    write_pfm(dir + "/color.pfm", buffers.color);
    write_pfm(dir + "/s0.pfm", buffers.s0);
    write_pfm(dir + "/s1.pfm", buffers.s1);
    write_pfm(dir + "/s2.pfm", buffers.s2);
    write_pfm(dir + "/depth.pfm", buffers.depth);
    write_pfm(dir + "/normal.pfm", buffers.normal);
    write_pfm(dir + "/alpha.pfm", buffers.alpha);
    write_pfm(dir + "/specular.pfm", buffers.specular);
}

} // namespace

TrainResult train(const LoadedDataset& dataset, const TrainConfig& config,
                  const std::string& out_dir, const TrainCallback& callback) {
    if (dataset.views.size() < 2)
        throw std::invalid_argument("train: need at least two views");

    TrainResult result;
    const int n_views = static_cast<int>(dataset.views.size());
    const int w = dataset.views[0].cam.width, h = dataset.views[0].cam.height;

    auto init_rng = keyed_rng(config.seed, 0x1417ull, 0);
    result.cloud = initialize_cloud(config.init_surfels, config.init_radius,
                                    config.init_opacity_logit, init_rng);
    result.cubemap = Cubemap(config.cubemap_resolution, 0.5);

    AdamState adam;
    adam.resize(result.cloud.size(), result.cubemap.texel_count());
    std::vector<double> grad_accum(result.cloud.size(), 0.0);
    std::vector<int> grad_counts(result.cloud.size(), 0);

    int start_iter = 0;
    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        // resume when a checkpoint triple is present
        const std::string ckpt_ply = out_dir + "/checkpoint.ply";
        if (std::filesystem::exists(ckpt_ply) &&
            std::filesystem::exists(out_dir + "/checkpoint_state.bin")) {
            SurfelCloud loaded = load_surfels_ply(ckpt_ply);
            AdamState loaded_adam;
            int it = 0;
            std::vector<double> ga;
            std::vector<int> gc;
            if (load_state_bin(out_dir + "/checkpoint_state.bin", &it, loaded.size(), &loaded_adam,
                               &ga, &gc)) {
                result.cloud = std::move(loaded);
                result.cubemap = Cubemap::load(out_dir + "/checkpoint_cubemap");
                adam = std::move(loaded_adam);
                grad_accum = std::move(ga);
                grad_counts = std::move(gc);
                start_iter = it;
            }
        }
    }

    const auto neighbors = nearest_neighbor_views(dataset.views, config.neighbor_views);

    RenderOptions ropts;
    ropts.threads = config.threads;
    ropts.alpha_threshold = config.alpha_threshold;
    ropts.eta = dataset.eta > 0.0 ? dataset.eta : config.eta;

    // detached per-view depth/alpha caches for visibility
    std::vector<Image> depth_cache(n_views), alpha_cache(n_views);
    std::vector<int> cache_age(n_views, std::numeric_limits<int>::min());
    auto refresh_cache = [&](int v, int it) {
        if (it - cache_age[v] < config.depth_cache_refresh) return;
        RenderBuffers b;
        RenderCache c;
        RenderOptions dopts = ropts;
        dopts.depth_only = true;
        rasterize(result.cloud, dataset.views[v].cam, dopts, &b, &c);
        depth_cache[v] = std::move(b.depth);
        alpha_cache[v] = std::move(b.alpha);
        cache_age[v] = it;
    };

    std::ostringstream log;
    log << "iteration,l_rgb,l_pol,l_tsc,l_m,l_o,l_d,total\n";

    const double lr_pos_decay =
        config.iterations > 0
            ? std::log(config.lr_position_final / config.lr_position) / config.iterations
            : 0.0;

    SurfelGrads grads;
    std::vector<double> cm_grads;
    BufferGrads upstream;
    RenderBuffers buffers;
    RenderCache cache;

    for (int it = start_iter; it < config.iterations; ++it) {
        const int epoch = it / n_views;
        const int ref_idx = epoch_view_order(config.seed, epoch, n_views)[it % n_views];
        const View& ref = dataset.views[ref_idx];
        const bool deferred = it >= config.warmup_iters;

        render_full(result.cloud, ref.cam, result.cubemap, ropts, deferred, &buffers, &cache);

        grads.resize_zero(result.cloud.size());
        cm_grads.assign(result.cubemap.texel_count(), 0.0);
        upstream.allocate(w, h);

        LossComponents comps;
        const double lam5 = config.weights.lambda5(it);
        comps.rgb = l_rgb(buffers.s0, ref.stokes.s0, ref.mask, &upstream.ds0, 1.0);
        if (deferred && config.enable_pol)
            comps.pol = l_pol(buffers.s1, ref.stokes.s1, buffers.s2, ref.stokes.s2, ref.mask,
                              &upstream.ds1, &upstream.ds2, config.weights.lambda1);
        comps.mask = l_mask(ref.mask, buffers.alpha, &upstream.dalpha, config.weights.lambda3);
        comps.opacity = l_opacity(result.cloud, config.opacity_loss_negated,
                                  &grads.opacity_logit, config.weights.lambda4);
        comps.depth_normal =
            l_depth_normal(buffers.depth, buffers.normal, buffers.alpha, ref.cam,
                           config.alpha_threshold, &upstream.ddepth, &upstream.dnormal, lam5);
        if (deferred && config.enable_tsc) {
            std::vector<const Image*> nd, na;
            for (int nb : neighbors[ref_idx]) {
                refresh_cache(nb, it);
                nd.push_back(&depth_cache[nb]);
                na.push_back(&alpha_cache[nb]);
            }
            TscBuildParams tp;
            tp.tau = config.tau;
            tp.stride = config.tsc_stride;
            tp.alpha_threshold = config.alpha_threshold;
            tp.rows.dolp_weighting = config.tsc_dolp_weighting;
            const TscWorkload workload = build_tsc_workload(
                dataset.views, ref_idx, neighbors[ref_idx], buffers, nd, na, tp);
            comps.tsc = l_tsc(workload, buffers.normal, &upstream.dnormal,
                              config.weights.lambda2);
        }

        const double total = total_loss(comps, config.weights, it);
        if (!comps.all_finite() || !std::isfinite(total)) {
            dump_diagnostics(out_dir, it, buffers);
            result.aborted_non_finite = true;
            result.iterations_run = it;
            break;
        }

        render_backward(result.cloud, ref.cam, result.cubemap, ropts, deferred, buffers, cache,
                        upstream, &grads, &cm_grads);

        // adam step
        const int step = it + 1;
        const double bias1 = 1.0 - std::pow(config.beta1, step);
        const double bias2 = 1.0 - std::pow(config.beta2, step);
        const double lr_pos = config.lr_position * std::exp(lr_pos_decay * it);
        const size_t n = result.cloud.size();
        for (size_t i = 0; i < n; ++i) {
            for (int k = 0; k < 3; ++k)
                adam_update(&result.cloud.position[i][k], grads.position[i][k],
                            &adam.m.position[i][k], &adam.v.position[i][k], lr_pos, config.beta1,
                            config.beta2, config.adam_eps, bias1, bias2);
            for (int k = 0; k < 2; ++k)
                adam_update(&result.cloud.log_scale[i][k], grads.log_scale[i][k],
                            &adam.m.log_scale[i][k], &adam.v.log_scale[i][k], config.lr_scale,
                            config.beta1, config.beta2, config.adam_eps, bias1, bias2);
            for (int k = 0; k < 4; ++k)
                adam_update(&result.cloud.rotation[i][k], grads.rotation[i][k],
                            &adam.m.rotation[i][k], &adam.v.rotation[i][k], config.lr_rotation,
                            config.beta1, config.beta2, config.adam_eps, bias1, bias2);
            adam_update(&result.cloud.opacity_logit[i], grads.opacity_logit[i],
                        &adam.m.opacity_logit[i], &adam.v.opacity_logit[i], config.lr_opacity,
                        config.beta1, config.beta2, config.adam_eps, bias1, bias2);
            for (int k = 0; k < 3; ++k)
                adam_update(&result.cloud.color[i][k], grads.color[i][k], &adam.m.color[i][k],
                            &adam.v.color[i][k], config.lr_color, config.beta1, config.beta2,
                            config.adam_eps, bias1, bias2);
            grad_accum[i] += grads.position[i].norm();
            grad_counts[i] += 1;
        }
        if (deferred) {
            for (size_t i = 0; i < cm_grads.size(); ++i)
                adam_update(&result.cubemap.data()[i], cm_grads[i], &adam.cm_m[i], &adam.cm_v[i],
                            config.lr_cubemap, config.beta1, config.beta2, config.adam_eps, bias1,
                            bias2);
        }
        result.cloud.renormalize_rotations();
        result.cubemap.clamp_nonnegative();

        if (it >= config.densify_start && it < config.densify_until &&
            (it - config.densify_start) % config.densify_interval == 0 && it > config.densify_start) {
            bool degenerate = false;
            auto rng = keyed_rng(config.seed, 0xdeull, it);
            densify_prune(&result.cloud, &grad_accum, &grad_counts, config, rng, &degenerate,
                          &adam.m, &adam.v);
            if (degenerate) {
                dump_diagnostics(out_dir, it, buffers);
                result.aborted_non_finite = true;
                result.iterations_run = it;
                break;
            }
        }

        if (it % config.log_interval == 0 || it + 1 == config.iterations) {
            log << it << ',' << comps.rgb << ',' << comps.pol << ',' << comps.tsc << ','
                << comps.mask << ',' << comps.opacity << ',' << comps.depth_normal << ',' << total
                << '\n';
        }
        if (callback) callback(it, comps, total);

        if (!out_dir.empty() && config.checkpoint_interval > 0 &&
            (it + 1) % config.checkpoint_interval == 0) {
            save_surfels_ply(out_dir + "/checkpoint.ply", result.cloud);
            result.cubemap.save(out_dir + "/checkpoint_cubemap");
            save_state_bin(out_dir + "/checkpoint_state.bin", it + 1, result.cloud, adam,
                           grad_accum, grad_counts);
            std::ofstream(out_dir + "/log.csv") << log.str();
        }
        result.iterations_run = it + 1;
    }

    result.log_csv = log.str();
    if (!out_dir.empty()) {
        save_surfels_ply(out_dir + "/final.ply", result.cloud);
        result.cubemap.save(out_dir + "/final_cubemap");
        std::ofstream(out_dir + "/log.csv") << log.str();
    }
    return result;
}

} // namespace polsplat
