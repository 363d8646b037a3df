#include "polsplat/render.hpp"
#include "polsplat/parallel.hpp"
#include "polsplat/polarization.hpp"

#include <algorithm>
#include <cmath>

namespace polsplat {

namespace {

constexpr double kPowerCutoff = -18.420680743952367; // ln(kGaussCutoff)
constexpr double kDivEps = 1e-12;
constexpr double kNormalEps = 1e-9;

struct Contribution {
    int pidx;          // index into cache.projected
    double alpha;      // post-clamp
    bool clamped;
    double gauss;
    Eigen::Vector2d delta;
    double depth;      // d_i(u)
    double weight;     // T_i * alpha
    double trans;      // T_i before this contribution
};

// Re-walks one pixel's compositing sequence; shared by forward and backward
// so early-exit and cutoffs agree exactly.
template <typename Fn>
void walk_pixel(const std::vector<ProjectedSurfel>& projected, const std::vector<int>& bin,
                double px, double py, const RenderOptions& opts, Fn&& fn) {
    double T = 1.0;
    for (int pidx : bin) {
        const ProjectedSurfel& s = projected[pidx];
        const Eigen::Vector2d delta(px - s.u.x(), py - s.u.y());
        const double power = -0.5 * delta.dot(s.cov2d_inv * delta);
        if (power < kPowerCutoff) continue;
        const double gauss = std::exp(power);
        const double raw_alpha = s.opacity * gauss;
        const bool clamped = raw_alpha > opts.alpha_max;
        const double alpha = clamped ? opts.alpha_max : raw_alpha;
        Contribution c{pidx, alpha, clamped, gauss, delta,
                       s.depth_at_mean + s.depth_gradient.dot(delta), T * alpha, T};
        fn(c);
        T *= (1.0 - alpha);
        if (T < opts.transmittance_min) break;
    }
}

} // namespace

void rasterize(const SurfelCloud& cloud, const Camera& cam, const RenderOptions& opts,
               RenderBuffers* buffers, RenderCache* cache) {
    const int w = cam.width, h = cam.height;
    buffers->allocate(w, h);

    // project every surfel, keep order, drop culled
    const size_t n = cloud.size();
    std::vector<ProjectedSurfel> proj(n);
    std::vector<char> keep(n, 0);
    parallel_chunks(n, opts.threads, [&](int, size_t b, size_t e) {
        for (size_t i = b; i < e; ++i)
            keep[i] = project(cloud, i, cam, &proj[i]) ? 1 : 0;
    });
    cache->projected.clear();
    cache->projected.reserve(n);
    for (size_t i = 0; i < n; ++i)
        if (keep[i]) cache->projected.push_back(proj[i]);

    std::stable_sort(cache->projected.begin(), cache->projected.end(),
                     [](const ProjectedSurfel& a, const ProjectedSurfel& b) {
                         if (a.depth_at_mean != b.depth_at_mean)
                             return a.depth_at_mean < b.depth_at_mean;
                         return a.id < b.id;
                     });

    // bin into tiles in depth order
    const int ts = opts.tile_size;
    cache->tiles_x = (w + ts - 1) / ts;
    cache->tiles_y = (h + ts - 1) / ts;
    cache->tile_bins.assign(static_cast<size_t>(cache->tiles_x) * cache->tiles_y, {});
    for (size_t k = 0; k < cache->projected.size(); ++k) {
        const ProjectedSurfel& s = cache->projected[k];
        const int tx0 = std::max(0, static_cast<int>((s.u.x() - s.radius) / ts));
        const int tx1 = std::min(cache->tiles_x - 1, static_cast<int>((s.u.x() + s.radius) / ts));
        const int ty0 = std::max(0, static_cast<int>((s.u.y() - s.radius) / ts));
        const int ty1 = std::min(cache->tiles_y - 1, static_cast<int>((s.u.y() + s.radius) / ts));
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                cache->tile_bins[static_cast<size_t>(ty) * cache->tiles_x + tx].push_back(
                    static_cast<int>(k));
    }

    const size_t n_tiles = cache->tile_bins.size();
    parallel_chunks(n_tiles, opts.threads, [&](int, size_t tb, size_t te) {
        for (size_t t = tb; t < te; ++t) {
            const auto& bin = cache->tile_bins[t];
            const int tx = static_cast<int>(t) % cache->tiles_x;
            const int ty = static_cast<int>(t) / cache->tiles_x;
            for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
                for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
                    if (bin.empty()) continue;
                    Eigen::Vector3d col = Eigen::Vector3d::Zero();
                    Eigen::Vector3d nrm = Eigen::Vector3d::Zero();
                    double sd = 0.0, wsum = 0.0;
                    walk_pixel(cache->projected, bin, x, y, opts, [&](const Contribution& c) {
                        const ProjectedSurfel& s = cache->projected[c.pidx];
                        wsum += c.weight;
                        sd += c.weight * c.depth;
                        if (!opts.depth_only) {
                            col += c.weight * cloud.color[s.id];
                            nrm += c.weight * s.normal_world;
                        }
                    });
                    buffers->alpha.at(y, x) = wsum;
                    if (wsum > kDivEps) {
                        buffers->depth.at(y, x) = sd / wsum;
                        if (!opts.depth_only)
                            for (int c = 0; c < 3; ++c) {
                                buffers->normal.at(y, x, c) = nrm[c] / wsum;
                                buffers->color.at(y, x, c) = col[c];
                            }
                    }
                }
            }
        }
    });
}

void shade_specular(const Camera& cam, const Cubemap& cubemap, const RenderOptions& opts,
                    RenderBuffers* buffers) {
    const int w = cam.width, h = cam.height;
    parallel_chunks(h, opts.threads, [&](int, size_t yb, size_t ye) {
        for (size_t y = yb; y < ye; ++y) {
            for (int x = 0; x < w; ++x) {
                if (buffers->alpha.at(y, x) < opts.alpha_threshold) continue;
                Eigen::Vector3d n_raw(buffers->normal.at(y, x, 0), buffers->normal.at(y, x, 1),
                                      buffers->normal.at(y, x, 2));
                const double nn = n_raw.norm();
                if (nn < kNormalEps) continue;
                const Eigen::Vector3d n_hat = n_raw / nn;
                const Eigen::Vector3d r_d = cam.pixel_ray_world(x, static_cast<double>(y));
                const Eigen::Vector3d refl = r_d - 2.0 * r_d.dot(n_hat) * n_hat;
                const Eigen::Vector3d lr = cubemap.sample(refl);
                for (int c = 0; c < 3; ++c) buffers->specular.at(y, x, c) = lr[c];
                buffers->spec_valid.at(y, x) = 1.0;
            }
        }
    });
}

void render_stokes(const Camera& cam, const RenderOptions& opts, RenderBuffers* buffers) {
    const int w = cam.width, h = cam.height;
    parallel_chunks(h, opts.threads, [&](int, size_t yb, size_t ye) {
        for (size_t y = yb; y < ye; ++y) {
            for (int x = 0; x < w; ++x) {
                if (buffers->spec_valid.at(y, x) < 0.5) {
                    // unpolarized passthrough where no reliable normal exists
                    for (int c = 0; c < 3; ++c) buffers->s0.at(y, x, c) = buffers->color.at(y, x, c);
                    continue;
                }
                Eigen::Vector3d n_raw(buffers->normal.at(y, x, 0), buffers->normal.at(y, x, 1),
                                      buffers->normal.at(y, x, 2));
                const Eigen::Vector3d n_hat = n_raw.normalized();
                const Eigen::Vector3d r_d = cam.pixel_ray_world(x, static_cast<double>(y));
                const double cos_theta = std::clamp(-r_d.dot(n_hat), 0.0, 1.0);
                const FresnelTerms f = fresnel(cos_theta, opts.eta);
                const Eigen::Vector3d n_cam = cam.R * n_hat;
                const double rho2 = n_cam.x() * n_cam.x() + n_cam.y() * n_cam.y();
                const double phi = rho2 > 1e-12 ? std::atan2(n_cam.y(), n_cam.x()) : 0.0;
                for (int c = 0; c < 3; ++c) {
                    const StokesVector s = pbrdf_stokes(buffers->color.at(y, x, c),
                                                        buffers->specular.at(y, x, c), phi, f);
                    buffers->s0.at(y, x, c) = s.s0;
                    buffers->s1.at(y, x, c) = s.s1;
                    buffers->s2.at(y, x, c) = s.s2;
                }
            }
        }
    });
}

void render_full(const SurfelCloud& cloud, const Camera& cam, const Cubemap& cubemap,
                 const RenderOptions& opts, bool deferred,
                 RenderBuffers* buffers, RenderCache* cache) {
    rasterize(cloud, cam, opts, buffers, cache);
    if (deferred) {
        shade_specular(cam, cubemap, opts, buffers);
        render_stokes(cam, opts, buffers);
    } else {
        buffers->s0 = buffers->color;
    }
}

void render_backward(const SurfelCloud& cloud, const Camera& cam, const Cubemap& cubemap,
                     const RenderOptions& opts, bool deferred,
                     const RenderBuffers& buffers, const RenderCache& cache,
                     const BufferGrads& upstream,
                     SurfelGrads* surfel_grads, std::vector<double>* cubemap_grads) {
    const int w = cam.width, h = cam.height;
    const int workers = std::max(1, opts.threads);

    // Stage B adjoint: Stokes + deferred shading down to the raw rasterizer
    // buffers (diffuse color, raw normal) and the cubemap texels.
    Image dcolor_total = upstream.dcolor;
    Image dnormal_total = upstream.dnormal;
    std::vector<std::vector<double>> cm_grads_w(
        workers, std::vector<double>(cubemap_grads ? cubemap_grads->size() : 0, 0.0));

    parallel_chunks(h, opts.threads, [&](int worker, size_t yb, size_t ye) {
        for (size_t y = yb; y < ye; ++y) {
            for (int x = 0; x < w; ++x) {
                Eigen::Vector3d ds0(upstream.ds0.at(y, x, 0), upstream.ds0.at(y, x, 1),
                                    upstream.ds0.at(y, x, 2));
                if (!deferred || buffers.spec_valid.at(y, x) < 0.5) {
                    for (int c = 0; c < 3; ++c) dcolor_total.at(y, x, c) += ds0[c];
                    continue;
                }
                Eigen::Vector3d ds1(upstream.ds1.at(y, x, 0), upstream.ds1.at(y, x, 1),
                                    upstream.ds1.at(y, x, 2));
                Eigen::Vector3d ds2(upstream.ds2.at(y, x, 0), upstream.ds2.at(y, x, 1),
                                    upstream.ds2.at(y, x, 2));

                Eigen::Vector3d n_raw(buffers.normal.at(y, x, 0), buffers.normal.at(y, x, 1),
                                      buffers.normal.at(y, x, 2));
                const double nn = n_raw.norm();
                const Eigen::Vector3d n_hat = n_raw / nn;
                const Eigen::Vector3d r_d = cam.pixel_ray_world(x, static_cast<double>(y));
                const double ndv = -r_d.dot(n_hat);
                const double cos_theta = std::clamp(ndv, 0.0, 1.0);
                FresnelDerivs fd;
                const FresnelTerms f = fresnel_with_derivs(cos_theta, opts.eta, &fd);
                const Eigen::Vector3d n_cam = cam.R * n_hat;
                const double rho2 = n_cam.x() * n_cam.x() + n_cam.y() * n_cam.y();
                const double phi = rho2 > 1e-12 ? std::atan2(n_cam.y(), n_cam.x()) : 0.0;
                const double c2 = std::cos(2.0 * phi), s2 = std::sin(2.0 * phi);
                const Eigen::Vector3d refl = r_d - 2.0 * r_d.dot(n_hat) * n_hat;

                Eigen::Vector3d dLr = Eigen::Vector3d::Zero();
                double dphi = 0.0, dcos = 0.0;
                for (int c = 0; c < 3; ++c) {
                    const double C = buffers.color.at(y, x, c);
                    const double L = buffers.specular.at(y, x, c);
                    const double m = C * f.t_minus + L * f.r_minus;
                    // s0 = C t+ + L r+; s1 = m c2; s2 = -m s2
                    dcolor_total.at(y, x, c) += ds0[c] * f.t_plus;
                    dLr[c] += ds0[c] * f.r_plus;
                    const double dm = ds1[c] * c2 - ds2[c] * s2;
                    dcolor_total.at(y, x, c) += dm * f.t_minus;
                    dLr[c] += dm * f.r_minus;
                    dphi += ds1[c] * (-2.0 * m * s2) + ds2[c] * (-2.0 * m * c2);
                    dcos += ds0[c] * (C * fd.dt_plus + L * fd.dr_plus) +
                            dm * (C * fd.dt_minus + L * fd.dr_minus);
                }

                Eigen::Vector3d dn_hat = Eigen::Vector3d::Zero();

                // cubemap lookup along the reflection
                Eigen::Vector3d drefl = Eigen::Vector3d::Zero();
                cubemap.sample_backward(refl, dLr,
                                        cubemap_grads ? &cm_grads_w[worker] : nullptr, &drefl);
                dn_hat += -2.0 * (drefl.dot(n_hat) * r_d + r_d.dot(n_hat) * drefl);

                // azimuth
                if (rho2 > 1e-12) {
                    Eigen::Vector3d dn_cam(-n_cam.y() / rho2 * dphi, n_cam.x() / rho2 * dphi, 0.0);
                    dn_hat += cam.R.transpose() * dn_cam;
                }

                // Fresnel incidence angle (flat outside the clamp)
                if (ndv > 0.0 && ndv < 1.0) dn_hat += dcos * (-r_d);

                // normalization
                const Eigen::Vector3d dn_raw = (dn_hat - n_hat * n_hat.dot(dn_hat)) / nn;
                for (int c = 0; c < 3; ++c) dnormal_total.at(y, x, c) += dn_raw[c];
            }
        }
    });

    // Stage A adjoint: compositing back to projected-surfel quantities,
    // then through the projection chain to the raw parameters.
    const size_t np = cache.projected.size();
    std::vector<std::vector<ProjectedGrads>> pg_w(workers, std::vector<ProjectedGrads>(np));
    std::vector<std::vector<Eigen::Vector3d>> col_w(
        workers, std::vector<Eigen::Vector3d>(np, Eigen::Vector3d::Zero()));

    const int ts = opts.tile_size;
    const size_t n_tiles = cache.tile_bins.size();
    parallel_chunks(n_tiles, opts.threads, [&](int worker, size_t tb, size_t te) {
        std::vector<Contribution> contribs;
        auto& pg = pg_w[worker];
        auto& colg = col_w[worker];
        for (size_t t = tb; t < te; ++t) {
            const auto& bin = cache.tile_bins[t];
            if (bin.empty()) continue;
            const int tx = static_cast<int>(t) % cache.tiles_x;
            const int ty = static_cast<int>(t) / cache.tiles_x;
            for (int y = ty * ts; y < std::min(h, (ty + 1) * ts); ++y) {
                for (int x = tx * ts; x < std::min(w, (tx + 1) * ts); ++x) {
                    contribs.clear();
                    walk_pixel(cache.projected, bin, x, y, opts,
                               [&](const Contribution& c) { contribs.push_back(c); });
                    if (contribs.empty()) continue;

                    const double A = buffers.alpha.at(y, x);
                    const Eigen::Vector3d dC(dcolor_total.at(y, x, 0), dcolor_total.at(y, x, 1),
                                             dcolor_total.at(y, x, 2));
                    const Eigen::Vector3d dN(dnormal_total.at(y, x, 0), dnormal_total.at(y, x, 1),
                                             dnormal_total.at(y, x, 2));
                    const double dDepth = upstream.ddepth.at(y, x);
                    double dA = upstream.dalpha.at(y, x);
                    Eigen::Vector3d dSn = Eigen::Vector3d::Zero();
                    double dSd = 0.0;
                    if (A > kDivEps) {
                        dSd = dDepth / A;
                        dSn = dN / A;
                        const double D = buffers.depth.at(y, x);
                        const Eigen::Vector3d N(buffers.normal.at(y, x, 0),
                                                buffers.normal.at(y, x, 1),
                                                buffers.normal.at(y, x, 2));
                        dA += -dDepth * D / A - dN.dot(N) / A;
                    }

                    // dL/dw_i, then the transmittance recursion in reverse
                    double acc = 0.0;
                    for (size_t k = contribs.size(); k-- > 0;) {
                        const Contribution& c = contribs[k];
                        const ProjectedSurfel& s = cache.projected[c.pidx];
                        const Eigen::Vector3d& col = cloud.color[s.id];
                        const double dw = dC.dot(col) + dSd * c.depth +
                                          dSn.dot(s.normal_world) + dA;
                        const double dalpha_i = c.trans * dw - acc / (1.0 - c.alpha);
                        acc += dw * c.weight;

                        ProjectedGrads& g = pg[c.pidx];
                        colg[c.pidx] += dC * c.weight;
                        const double dd_i = dSd * c.weight; // via S_d
                        g.dnormal_world += dSn * c.weight;
                        g.ddepth_at_mean += dd_i;
                        g.ddepth_gradient += dd_i * c.delta;
                        Eigen::Vector2d ddelta = dd_i * s.depth_gradient;

                        if (!c.clamped) {
                            g.dopacity += c.gauss * dalpha_i;
                            const double dG = s.opacity * dalpha_i;
                            const double dpower = dG * c.gauss;
                            const Eigen::Vector2d q = s.cov2d_inv * c.delta;
                            ddelta += -dpower * q;
                            g.dcov2d += 0.5 * dpower * (q * q.transpose());
                        }
                        g.du -= ddelta;
                    }
                }
            }
        }
    });

    // deterministic reduction, then the projection chain
    for (int wk = 1; wk < workers; ++wk) {
        for (size_t k = 0; k < np; ++k) {
            auto& dst = pg_w[0][k];
            const auto& src = pg_w[wk][k];
            dst.du += src.du;
            dst.dcov2d += src.dcov2d;
            dst.ddepth_at_mean += src.ddepth_at_mean;
            dst.ddepth_gradient += src.ddepth_gradient;
            dst.dnormal_world += src.dnormal_world;
            dst.dopacity += src.dopacity;
            col_w[0][k] += col_w[wk][k];
        }
        if (cubemap_grads)
            for (size_t i = 0; i < cm_grads_w[0].size(); ++i)
                cm_grads_w[0][i] += cm_grads_w[wk][i];
    }
    if (cubemap_grads)
        for (size_t i = 0; i < cubemap_grads->size(); ++i) (*cubemap_grads)[i] += cm_grads_w[0][i];

    parallel_chunks(np, opts.threads, [&](int, size_t b, size_t e) {
        for (size_t k = b; k < e; ++k) {
            const int id = cache.projected[k].id;
            surfel_grads->color[id] += col_w[0][k];
            if (pg_w[0][k].nonzero())
                project_backward(cloud, id, cam, pg_w[0][k], surfel_grads);
        }
    });
}

} // namespace polsplat
