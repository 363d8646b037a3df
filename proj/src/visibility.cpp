#include "polsplat/visibility.hpp"

namespace polsplat {

PseudoSurfacePoints backproject(const Image& depth, const Image& alpha, const Image& mask,
                                const Camera& cam, int stride, double alpha_threshold) {
    PseudoSurfacePoints out;
    for (int y = 0; y < depth.height(); y += stride) {
        for (int x = 0; x < depth.width(); x += stride) {
            if (!mask.empty() && mask.at(y, x) < 0.5) continue;
            if (!alpha.empty() && alpha.at(y, x) < alpha_threshold) continue;
            const double z = depth.at(y, x);
            if (z <= 0.0) continue;
            PseudoSurfacePoint p;
            p.px = x;
            p.py = y;
            p.ray_depth = z * cam.ray_scale(x, y);
            p.x = cam.center + p.ray_depth * cam.pixel_ray_world(x, y);
            out.points.push_back(p);
        }
    }
    return out;
}

std::vector<uint8_t> visibility_mask(const PseudoSurfacePoints& pts, const Camera& cam_k,
                                     const Image& depth_k, const Image& alpha_k, double tau,
                                     double alpha_threshold) {
    std::vector<uint8_t> v(pts.points.size(), 0);
    for (size_t i = 0; i < pts.points.size(); ++i) {
        const Eigen::Vector3d& x = pts.points[i].x;
        double z = 0.0;
        const Eigen::Vector2d uv = cam_k.project(x, &z);
        if (z <= 0.0 || !cam_k.contains(uv.x(), uv.y())) continue;
        if (!alpha_k.empty() && alpha_k.sample_bilinear(uv.x(), uv.y()) < alpha_threshold) continue;
        const double rendered_ray = depth_k.sample_bilinear(uv.x(), uv.y()) *
                                    cam_k.ray_scale(uv.x(), uv.y());
        const double geometric = (x - cam_k.center).norm();
        if (std::abs(rendered_ray - geometric) < tau) v[i] = 1;
    }
    return v;
}

std::vector<uint8_t> oracle_visibility(const PseudoSurfacePoints& pts, const Camera& cam_k,
                                       const AnalyticScene& scene, double lift) {
    std::vector<uint8_t> v(pts.points.size(), 0);
    for (size_t i = 0; i < pts.points.size(); ++i) {
        const Eigen::Vector3d& x = pts.points[i].x;
        const Eigen::Vector3d to_cam = cam_k.center - x;
        const double dist = to_cam.norm();
        if (dist <= lift) {
            v[i] = 1;
            continue;
        }
        const Eigen::Vector3d dir = to_cam / dist;
        double t_hit;
        Eigen::Vector3d n;
        v[i] = scene.intersect(x, dir, lift, dist, &t_hit, &n) ? 0 : 1;
    }
    return v;
}

} // namespace polsplat
