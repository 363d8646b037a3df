#pragma once

#include "polsplat/camera.hpp"
#include "polsplat/cubemap.hpp"
#include "polsplat/surfel.hpp"

#include <vector>

namespace polsplat {

struct RenderOptions {
    int threads = 1;
    int tile_size = 16;
    double transmittance_min = 1e-4; // compositing early exit
    double alpha_max = 1.0 - 1e-7;   // per-contribution ceiling
    double alpha_threshold = 0.5;    // validity gate for deferred shading et al.
    double eta = 1.5;                // refractive index for the Stokes stage
    bool depth_only = false;         // skip color/normal accumulation (visibility caches)
};

/// Rasterizer and deferred-shading outputs for one view.
struct RenderBuffers {
    Image color;      // rgb diffuse C
    Image s0, s1, s2; // rgb Stokes channels
    Image depth;      // camera z, normalized blend
    Image normal;     // raw blended world normal (norm <= 1)
    Image alpha;      // accumulated opacity
    Image specular;   // rgb L_r
    Image spec_valid; // 1 where the deferred stage ran

    void allocate(int w, int h) {
        color = Image(w, h, 3);
        s0 = Image(w, h, 3);
        s1 = Image(w, h, 3);
        s2 = Image(w, h, 3);
        depth = Image(w, h, 1);
        normal = Image(w, h, 3);
        alpha = Image(w, h, 1);
        specular = Image(w, h, 3);
        spec_valid = Image(w, h, 1);
    }
};

/// Per-view projection cache shared by forward and backward passes.
struct RenderCache {
    std::vector<ProjectedSurfel> projected; // depth sorted, culled removed
    std::vector<std::vector<int>> tile_bins; // indices into `projected`
    int tiles_x = 0, tiles_y = 0;
};

/// Gradients w.r.t. the per-pixel rasterizer outputs.
struct BufferGrads {
    Image dcolor;  // rgb
    Image ddepth;  // 1
    Image dnormal; // rgb, w.r.t. the raw blended normal
    Image dalpha;  // 1
    Image ds0, ds1, ds2; // rgb, w.r.t. the final Stokes buffers

    void allocate(int w, int h) {
        dcolor = Image(w, h, 3);
        ddepth = Image(w, h, 1);
        dnormal = Image(w, h, 3);
        dalpha = Image(w, h, 1);
        ds0 = Image(w, h, 3);
        ds1 = Image(w, h, 3);
        ds2 = Image(w, h, 3);
    }
};

/// Projects, sorts and bins the cloud, then composites color, depth, raw
/// normal and alpha front to back.
void rasterize(const SurfelCloud& cloud, const Camera& cam, const RenderOptions& opts,
               RenderBuffers* buffers, RenderCache* cache);

/// Deferred specular pass: reflect each pixel ray about the renormalized
/// blended normal and sample the cubemap. Pixels below the alpha threshold
/// or with a vanishing normal are skipped and flagged.
void shade_specular(const Camera& cam, const Cubemap& cubemap, const RenderOptions& opts,
                    RenderBuffers* buffers);

/// Fills s0/s1/s2 from the diffuse and specular buffers via the pBRDF
/// Stokes formation; phi_n is the camera-space azimuth of the blended
/// normal. Where the deferred stage was skipped, s0 = C and s1 = s2 = 0.
void render_stokes(const Camera& cam, const RenderOptions& opts, RenderBuffers* buffers);

/// Convenience: rasterize + shade_specular + render_stokes.
/// `deferred` false leaves s0 = C (warm-up stage).
void render_full(const SurfelCloud& cloud, const Camera& cam, const Cubemap& cubemap,
                 const RenderOptions& opts, bool deferred,
                 RenderBuffers* buffers, RenderCache* cache);

/// Adjoint of render_full. Consumes gradients w.r.t. s0/s1/s2, depth, raw
/// normal and alpha, and accumulates parameter gradients. `deferred` must
/// match the forward call. upstream.dcolor is honored in addition to the
/// Stokes path (used by losses that touch C directly).
void render_backward(const SurfelCloud& cloud, const Camera& cam, const Cubemap& cubemap,
                     const RenderOptions& opts, bool deferred,
                     const RenderBuffers& buffers, const RenderCache& cache,
                     const BufferGrads& upstream,
                     SurfelGrads* surfel_grads, std::vector<double>* cubemap_grads);

} // namespace polsplat
