#pragma once

#include "polsplat/render.hpp"
#include "polsplat/tangent.hpp"
#include "polsplat/visibility.hpp"

#include <vector>

namespace polsplat {

/// Weights of the total objective; lambda5 ramps linearly with iteration.
struct LossWeights {
    double lambda1 = 1.0;   // polarization
    double lambda2 = 0.1;   // tangent-space consistency
    double lambda3 = 0.1;   // mask
    double lambda4 = 0.01;  // opacity
    double lambda5_base = 0.01;
    double lambda5_slope = 0.1;
    double lambda5_horizon = 15000.0;

    double lambda5(double iteration) const {
        return lambda5_base + lambda5_slope * (iteration / lambda5_horizon);
    }
};

struct LossComponents {
    double rgb = 0.0;
    double pol = 0.0;
    double tsc = 0.0;
    double mask = 0.0;
    double opacity = 0.0;
    double depth_normal = 0.0;

    bool all_finite() const {
        return std::isfinite(rgb) && std::isfinite(pol) && std::isfinite(tsc) &&
               std::isfinite(mask) && std::isfinite(opacity) && std::isfinite(depth_normal);
    }
};

/// L = rgb + l1*pol + l2*tsc + l3*mask + l4*opacity + l5(it)*depth_normal.
double total_loss(const LossComponents& c, const LossWeights& w, double iteration);

/// 0.8 * masked L1 + 0.2 * (1 - SSIM)/2 on s0. dpred accumulates the
/// gradient scaled by `grad_scale` when non-null.
double l_rgb(const Image& s0_pred, const Image& s0_gt, const Image& mask,
             Image* dpred = nullptr, double grad_scale = 1.0);

/// Masked mean-absolute error on s1 plus s2.
double l_pol(const Image& s1_pred, const Image& s1_gt, const Image& s2_pred,
             const Image& s2_gt, const Image& mask, Image* ds1 = nullptr, Image* ds2 = nullptr,
             double grad_scale = 1.0);

/// Mean binary cross entropy between the 0/1 mask and accumulated alpha
/// (alpha clamped to [1e-6, 1 - 1e-6]).
double l_mask(const Image& mask_gt, const Image& alpha, Image* dalpha = nullptr,
              double grad_scale = 1.0);

/// Sum over surfels of exp(-20 (o - 0.5)^2), as printed in its source;
/// minimizing drives opacities away from 0.5. `negated` flips the sign.
double l_opacity(const SurfelCloud& cloud, bool negated = false,
                 std::vector<double>* dlogits = nullptr, double grad_scale = 1.0);

/// Mean over valid pixels of 1 - N_blend . N_fd where N_fd is the unit
/// cross-product normal of central-difference back-projected depths and
/// N_blend is the raw blended normal (camera frame). Valid pixels have
/// alpha above threshold at the pixel and its four neighbors.
double l_depth_normal(const Image& depth, const Image& normal_raw, const Image& alpha,
                      const Camera& cam, double alpha_threshold, Image* ddepth = nullptr,
                      Image* dnormal = nullptr, double grad_scale = 1.0);

/// Detached per-iteration TSC work: points back-projected from the
/// reference view, one branch-selected tangent row per visible neighbor
/// view. Rows, visibility and branch choice are data; only the rendered
/// normal stays differentiable.
struct TscWorkload {
    struct Point {
        int px = 0, py = 0; // source pixel in the reference view
        std::vector<TangentRowPair> pairs;
        std::vector<uint8_t> use_t; // selected branch per pair
    };
    std::vector<Point> points;
    size_t total_rows = 0;
};

struct TscBuildParams {
    double tau = 0.010;
    int stride = 4;
    double alpha_threshold = 0.5;
    BuildSystemOptions rows;
};

/// Builds the workload from the reference render and the neighbors' cached
/// (detached) depth/alpha buffers, selecting the ambiguity branch closest
/// to orthogonal against the current rendered normal.
TscWorkload build_tsc_workload(const std::vector<View>& views, int ref_index,
                               const std::vector<int>& neighbor_ids,
                               const RenderBuffers& ref_buffers,
                               const std::vector<const Image*>& neighbor_depths,
                               const std::vector<const Image*>& neighbor_alphas,
                               const TscBuildParams& params);

/// Mean over selected rows of weight * (t . n_hat)^2 with n_hat the
/// renormalized blended normal at each source pixel.
double l_tsc(const TscWorkload& workload, const Image& normal_raw, Image* dnormal = nullptr,
             double grad_scale = 1.0);

} // namespace polsplat
