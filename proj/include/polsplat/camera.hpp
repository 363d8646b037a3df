#pragma once

#include "polsplat/image.hpp"
#include "polsplat/polarization.hpp"

#include <Eigen/Dense>

namespace polsplat {

/// Pinhole camera. R maps world to camera coordinates (rows r1, r2, r3),
/// `center` is the camera position in world space. Pixel centers sit at
/// integer coordinates; +x right, +y down, +z forward.
struct Camera {
    int width = 0, height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
    Eigen::Vector3d center = Eigen::Vector3d::Zero();

    Eigen::Vector3d world_to_cam(const Eigen::Vector3d& p) const { return R * (p - center); }
    Eigen::Vector3d cam_to_world(const Eigen::Vector3d& p) const { return R.transpose() * p + center; }

    /// Projects a camera-space point; caller checks z > 0.
    Eigen::Vector2d project_cam(const Eigen::Vector3d& pc) const {
        return {fx * pc.x() / pc.z() + cx, fy * pc.y() / pc.z() + cy};
    }
    Eigen::Vector2d project(const Eigen::Vector3d& p_world, double* z = nullptr) const {
        const Eigen::Vector3d pc = world_to_cam(p_world);
        if (z) *z = pc.z();
        return project_cam(pc);
    }

    /// Camera-space ray direction through pixel (x, y), z component = 1.
    Eigen::Vector3d pixel_dir_cam(double x, double y) const {
        return {(x - cx) / fx, (y - cy) / fy, 1.0};
    }
    /// Unit world-space ray direction through pixel (x, y).
    Eigen::Vector3d pixel_ray_world(double x, double y) const {
        return (R.transpose() * pixel_dir_cam(x, y)).normalized();
    }
    /// Length of the camera-space direction with unit z; converts between
    /// z-depth and Euclidean depth along the pixel ray.
    double ray_scale(double x, double y) const {
        return pixel_dir_cam(x, y).norm();
    }

    bool contains(double x, double y) const {
        return x >= 0.0 && y >= 0.0 && x <= width - 1.0 && y <= height - 1.0;
    }

    bool rotation_orthonormal(double tol = 1e-6) const {
        return (R.transpose() * R - Eigen::Matrix3d::Identity()).norm() < tol;
    }
};

/// Builds a camera at `position` looking at `target`; `up_hint` breaks the
/// roll ambiguity (+y image axis points away from it).
Camera look_at_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                      int width, int height, double focal,
                      const Eigen::Vector3d& up_hint = Eigen::Vector3d(0, 0, 1));

/// A camera with its observations: Stokes images, object mask, and the AoP
/// map (with per-pixel validity) derived from the observed Stokes vectors.
struct View {
    Camera cam;
    StokesImage stokes;   // observed s0/s1/s2, rgb
    Image mask;           // 1 channel, 0/1
    Image aop;            // 1 channel, angle in [0, pi)
    Image aop_valid;      // 1 channel, 0/1
    Image dolp;           // 1 channel, channel-mean degree of linear polarization
    Image gt_depth;       // optional, z-depth
    Image gt_normal;      // optional, world normals

    void derive_aop(double dolp_min = 1e-5);
};

} // namespace polsplat
