#pragma once

#include "polsplat/camera.hpp"

#include <Eigen/Dense>
#include <vector>

namespace polsplat {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

/// Rotation matrix of a unit quaternion (w, x, y, z).
Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q_unit);

/// Adjoint of quat_to_matrix: maps dL/dM to dL/dq for the *unit* quaternion.
Eigen::Vector4d quat_to_matrix_backward(const Eigen::Vector4d& q_unit,
                                        const Eigen::Matrix3d& dM);

/// Projects a gradient w.r.t. the normalized quaternion back to the raw one.
inline Eigen::Vector4d quat_normalize_backward(const Eigen::Vector4d& q_raw,
                                               const Eigen::Vector4d& dq_unit) {
    const double n = q_raw.norm();
    const Eigen::Vector4d qh = q_raw / n;
    return (dq_unit - qh * qh.dot(dq_unit)) / n;
}

/// Flattened Gaussian surfel set, one entry per field.
/// Scales are stored as logs, opacity as a logit, so optimizer steps can
/// never leave the valid domain. Quaternions are renormalized after steps.
struct SurfelCloud {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Vector2d> log_scale;
    std::vector<Eigen::Vector4d> rotation; // quaternion (w, x, y, z)
    std::vector<double> opacity_logit;
    std::vector<Eigen::Vector3d> color;    // degree-0 SH coefficients, rgb

    size_t size() const { return position.size(); }

    void resize(size_t n) {
        position.resize(n, Eigen::Vector3d::Zero());
        log_scale.resize(n, Eigen::Vector2d::Zero());
        rotation.resize(n, Eigen::Vector4d(1, 0, 0, 0));
        opacity_logit.resize(n, 0.0);
        color.resize(n, Eigen::Vector3d::Constant(0.5));
    }

    Eigen::Vector2d scale(size_t i) const { return log_scale[i].array().exp(); }
    double opacity(size_t i) const { return sigmoid(opacity_logit[i]); }
    Eigen::Vector4d unit_rotation(size_t i) const { return rotation[i].normalized(); }

    void renormalize_rotations() {
        for (auto& q : rotation) q.normalize();
    }
};

/// Gradients aligned with SurfelCloud fields (w.r.t. the stored raw
/// parameters: position, log scale, raw quaternion, opacity logit, color).
struct SurfelGrads {
    std::vector<Eigen::Vector3d> position;
    std::vector<Eigen::Vector2d> log_scale;
    std::vector<Eigen::Vector4d> rotation;
    std::vector<double> opacity_logit;
    std::vector<Eigen::Vector3d> color;

    void resize_zero(size_t n) {
        position.assign(n, Eigen::Vector3d::Zero());
        log_scale.assign(n, Eigen::Vector2d::Zero());
        rotation.assign(n, Eigen::Vector4d::Zero());
        opacity_logit.assign(n, 0.0);
        color.assign(n, Eigen::Vector3d::Zero());
    }

    void add(const SurfelGrads& other) {
        for (size_t i = 0; i < position.size(); ++i) {
            position[i] += other.position[i];
            log_scale[i] += other.log_scale[i];
            rotation[i] += other.rotation[i];
            opacity_logit[i] += other.opacity_logit[i];
            color[i] += other.color[i];
        }
    }
};

/// Sigma = R Diag[sx^2, sy^2, 0] R^T; symmetric, rank <= 2.
Eigen::Matrix3d covariance_world(const SurfelCloud& cloud, size_t i);

/// Third column of the rotation matrix; the zero-eigenvalue direction of
/// the world covariance. Not view-oriented.
Eigen::Vector3d surfel_normal(const SurfelCloud& cloud, size_t i);

constexpr double kCovReg = 0.3;       // px^2 added to cov2d before inversion
constexpr double kCullNear = 0.01;    // camera-space near plane
constexpr double kCullSigma = 3.0;    // footprint culling radius, in sigma
constexpr double kBinSigma = 6.1;     // tile binning radius, in sigma
constexpr double kGaussCutoff = 1e-8; // per-pixel Gaussian weight cutoff

/// One surfel's footprint in a view.
struct ProjectedSurfel {
    int id = -1;
    Eigen::Vector2d u = Eigen::Vector2d::Zero();       // pixel mean
    Eigen::Matrix2d cov2d = Eigen::Matrix2d::Zero();   // regularized
    Eigen::Matrix2d cov2d_inv = Eigen::Matrix2d::Zero();
    double depth_at_mean = 0.0;                        // camera z
    Eigen::Vector2d depth_gradient = Eigen::Vector2d::Zero();
    Eigen::Vector3d normal_world = Eigen::Vector3d::Zero(); // oriented toward camera
    double opacity = 0.0;
    double radius = 0.0;                               // binning radius in px
};

/// Projects surfel i into the view. Returns false when culled (behind the
/// near plane or the 3-sigma footprint misses the image).
bool project(const SurfelCloud& cloud, size_t i, const Camera& cam, ProjectedSurfel* out);

/// Upstream gradients w.r.t. one projected surfel's outputs.
struct ProjectedGrads {
    Eigen::Vector2d du = Eigen::Vector2d::Zero();
    Eigen::Matrix2d dcov2d = Eigen::Matrix2d::Zero(); // general 2x2 accumulation
    double ddepth_at_mean = 0.0;
    Eigen::Vector2d ddepth_gradient = Eigen::Vector2d::Zero();
    Eigen::Vector3d dnormal_world = Eigen::Vector3d::Zero();
    double dopacity = 0.0;

    bool nonzero() const {
        return du.squaredNorm() != 0.0 || dcov2d.squaredNorm() != 0.0 ||
               ddepth_at_mean != 0.0 || ddepth_gradient.squaredNorm() != 0.0 ||
               dnormal_world.squaredNorm() != 0.0 || dopacity != 0.0;
    }
};

/// Adjoint of project(): accumulates parameter gradients for surfel i.
void project_backward(const SurfelCloud& cloud, size_t i, const Camera& cam,
                      const ProjectedGrads& up, SurfelGrads* grads);

} // namespace polsplat
