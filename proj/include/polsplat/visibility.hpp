#pragma once

#include "polsplat/camera.hpp"
#include "polsplat/scene.hpp"

#include <cstdint>
#include <vector>

namespace polsplat {

/// A pseudo-surface point back-projected from a reference depth map:
/// x = camera_center + ray_depth * unit_ray(px, py).
struct PseudoSurfacePoint {
    Eigen::Vector3d x;
    int px = 0, py = 0;
    double ray_depth = 0.0;
};

struct PseudoSurfacePoints {
    std::vector<PseudoSurfacePoint> points;
};

/// Back-projects the rendered z-depth at every stride-th pixel that is
/// inside the mask (when given) and above the alpha threshold.
PseudoSurfacePoints backproject(const Image& depth, const Image& alpha, const Image& mask,
                                const Camera& cam, int stride, double alpha_threshold);

/// Depth-guided visibility: V = 1 when the neighbor view's rendered depth
/// at the point's projection agrees with the geometric camera distance
/// within tau. Points projecting outside the image or onto pixels below
/// the alpha threshold get V = 0. depth_k holds camera z; the comparison
/// converts to Euclidean ray depth.
std::vector<uint8_t> visibility_mask(const PseudoSurfacePoints& pts, const Camera& cam_k,
                                     const Image& depth_k, const Image& alpha_k, double tau,
                                     double alpha_threshold);

/// Exact visibility against the analytic scene: marches from each point
/// toward the camera and reports 1 when no surface blocks the segment.
std::vector<uint8_t> oracle_visibility(const PseudoSurfacePoints& pts, const Camera& cam_k,
                                       const AnalyticScene& scene, double lift = 2e-3);

} // namespace polsplat
