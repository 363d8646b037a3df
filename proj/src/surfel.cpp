#include "polsplat/surfel.hpp"

namespace polsplat {

Eigen::Matrix3d quat_to_matrix(const Eigen::Vector4d& q) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Matrix3d m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
         2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
}

Eigen::Vector4d quat_to_matrix_backward(const Eigen::Vector4d& q, const Eigen::Matrix3d& g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Eigen::Vector4d dq;
    dq[0] = 2 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    dq[1] = 2 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2 * x * g(1, 1) - w * g(1, 2) +
                 z * g(2, 0) + w * g(2, 1) - 2 * x * g(2, 2));
    dq[2] = 2 * (-2 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                 w * g(2, 0) + z * g(2, 1) - 2 * y * g(2, 2));
    dq[3] = 2 * (-2 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2 * z * g(1, 1) +
                 y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return dq;
}

Eigen::Matrix3d covariance_world(const SurfelCloud& cloud, size_t i) {
    const Eigen::Matrix3d m = quat_to_matrix(cloud.unit_rotation(i));
    const Eigen::Vector2d s = cloud.scale(i);
    Eigen::Matrix3d d = Eigen::Matrix3d::Zero();
    d(0, 0) = s.x() * s.x();
    d(1, 1) = s.y() * s.y();
    return m * d * m.transpose();
}

Eigen::Vector3d surfel_normal(const SurfelCloud& cloud, size_t i) {
    return quat_to_matrix(cloud.unit_rotation(i)).col(2);
}

namespace {

// Shared forward geometry, recomputed in the backward pass.
struct ProjectionCtx {
    Eigen::Vector3d p;        // camera-space center
    Eigen::Matrix3d M;        // surfel world rotation
    Eigen::Vector2d s;        // scales
    Eigen::Matrix<double, 2, 3> J;
    Eigen::Matrix<double, 2, 3> K; // J * R_cam
    Eigen::Matrix2d B;        // K * [sx m0, sy m1]
    Eigen::Vector3d n_world;  // oriented toward camera
    Eigen::Vector3d n_cam;
    double flip = 1.0;
    double denom = 0.0;       // n_cam . p
    bool grad_active = false; // depth-gradient guard state
};

bool projection_ctx(const SurfelCloud& cloud, size_t i, const Camera& cam, ProjectionCtx* ctx) {
    ctx->p = cam.world_to_cam(cloud.position[i]);
    if (ctx->p.z() < kCullNear) return false;

    ctx->M = quat_to_matrix(cloud.unit_rotation(i));
    ctx->s = cloud.scale(i);

    const double z = ctx->p.z();
    ctx->J << cam.fx / z, 0, -cam.fx * ctx->p.x() / (z * z),
              0, cam.fy / z, -cam.fy * ctx->p.y() / (z * z);
    ctx->K = ctx->J * cam.R;
    ctx->B.col(0) = ctx->s.x() * (ctx->K * ctx->M.col(0));
    ctx->B.col(1) = ctx->s.y() * (ctx->K * ctx->M.col(1));

    const Eigen::Vector3d n_raw = ctx->M.col(2);
    ctx->flip = n_raw.dot(cam.center - cloud.position[i]) >= 0.0 ? 1.0 : -1.0;
    ctx->n_world = ctx->flip * n_raw;
    ctx->n_cam = cam.R * ctx->n_world;
    ctx->denom = ctx->n_cam.dot(ctx->p);
    ctx->grad_active = std::abs(ctx->denom) > 1e-6 * ctx->p.norm();
    return true;
}

} // namespace

bool project(const SurfelCloud& cloud, size_t i, const Camera& cam, ProjectedSurfel* out) {
    ProjectionCtx ctx;
    if (!projection_ctx(cloud, i, cam, &ctx)) return false;

    out->id = static_cast<int>(i);
    out->u = cam.project_cam(ctx.p);
    out->cov2d = ctx.B * ctx.B.transpose() + kCovReg * Eigen::Matrix2d::Identity();
    out->depth_at_mean = ctx.p.z();
    out->normal_world = ctx.n_world;
    out->opacity = cloud.opacity(i);

    const double det = out->cov2d.determinant();
    out->cov2d_inv << out->cov2d(1, 1), -out->cov2d(0, 1),
                      -out->cov2d(1, 0), out->cov2d(0, 0);
    out->cov2d_inv /= det;

    // eigenvalues of the 2x2 covariance bound the footprint
    const double mid = 0.5 * (out->cov2d(0, 0) + out->cov2d(1, 1));
    const double diff = 0.5 * (out->cov2d(0, 0) - out->cov2d(1, 1));
    const double lmax = mid + std::sqrt(diff * diff + out->cov2d(0, 1) * out->cov2d(0, 1));
    const double sigma = std::sqrt(std::max(lmax, 0.0));
    out->radius = kBinSigma * sigma;

    const double cull_r = kCullSigma * sigma;
    if (out->u.x() + cull_r < 0.0 || out->u.x() - cull_r > cam.width - 1.0 ||
        out->u.y() + cull_r < 0.0 || out->u.y() - cull_r > cam.height - 1.0)
        return false;

    if (ctx.grad_active) {
        const double z = ctx.p.z();
        const double scale = -z * z / ctx.denom;
        out->depth_gradient = {scale * ctx.n_cam.x() / cam.fx, scale * ctx.n_cam.y() / cam.fy};
    } else {
        out->depth_gradient.setZero();
    }
    return true;
}

void project_backward(const SurfelCloud& cloud, size_t i, const Camera& cam,
                      const ProjectedGrads& up, SurfelGrads* grads) {
    ProjectionCtx ctx;
    if (!projection_ctx(cloud, i, cam, &ctx)) return;

    const double z = ctx.p.z();
    Eigen::Vector3d dp = Eigen::Vector3d::Zero();
    Eigen::Vector3d dn_world = up.dnormal_world;
    Eigen::Vector3d dn_cam = Eigen::Vector3d::Zero();
    Eigen::Matrix3d dM = Eigen::Matrix3d::Zero();
    Eigen::Vector2d ds = Eigen::Vector2d::Zero();

    // cov2d = B B^T + reg
    const Eigen::Matrix2d dB = (up.dcov2d + up.dcov2d.transpose()) * ctx.B;
    const Eigen::Vector2d km0 = ctx.K * ctx.M.col(0);
    const Eigen::Vector2d km1 = ctx.K * ctx.M.col(1);
    ds.x() += km0.dot(dB.col(0));
    ds.y() += km1.dot(dB.col(1));
    dM.col(0) += ctx.s.x() * (ctx.K.transpose() * dB.col(0));
    dM.col(1) += ctx.s.y() * (ctx.K.transpose() * dB.col(1));
    Eigen::Matrix<double, 2, 3> dK = dB.col(0) * (ctx.s.x() * ctx.M.col(0)).transpose() +
                                     dB.col(1) * (ctx.s.y() * ctx.M.col(1)).transpose();
    const Eigen::Matrix<double, 2, 3> dJ = dK * cam.R.transpose();

    // J entries as functions of p
    dp.x() += dJ(0, 2) * (-cam.fx / (z * z));
    dp.y() += dJ(1, 2) * (-cam.fy / (z * z));
    dp.z() += dJ(0, 0) * (-cam.fx / (z * z)) + dJ(1, 1) * (-cam.fy / (z * z)) +
              dJ(0, 2) * (2 * cam.fx * ctx.p.x() / (z * z * z)) +
              dJ(1, 2) * (2 * cam.fy * ctx.p.y() / (z * z * z));

    // u = (fx px/pz + cx, fy py/pz + cy)
    dp.x() += up.du.x() * cam.fx / z;
    dp.y() += up.du.y() * cam.fy / z;
    dp.z() += -up.du.x() * cam.fx * ctx.p.x() / (z * z) - up.du.y() * cam.fy * ctx.p.y() / (z * z);

    // depth at mean
    dp.z() += up.ddepth_at_mean;

    // depth gradient g = -(z^2/denom) * (ncx/fx, ncy/fy)
    if (ctx.grad_active && up.ddepth_gradient.squaredNorm() != 0.0) {
        const double inv_denom = 1.0 / ctx.denom;
        const double gdot = up.ddepth_gradient.x() * ctx.n_cam.x() / cam.fx +
                            up.ddepth_gradient.y() * ctx.n_cam.y() / cam.fy;
        dp.z() += -2.0 * z * inv_denom * gdot;
        const double ddenom = z * z * inv_denom * inv_denom * gdot;
        dn_cam.x() += -z * z * inv_denom * up.ddepth_gradient.x() / cam.fx;
        dn_cam.y() += -z * z * inv_denom * up.ddepth_gradient.y() / cam.fy;
        dn_cam += ddenom * ctx.p;
        dp += ddenom * ctx.n_cam;
    }

    dn_world += cam.R.transpose() * dn_cam;
    dM.col(2) += ctx.flip * dn_world;

    // opacity logit
    const double o = cloud.opacity(i);
    grads->opacity_logit[i] += up.dopacity * o * (1.0 - o);

    // scales are stored as logs
    grads->log_scale[i] += (ds.array() * ctx.s.array()).matrix();

    // rotation via the unit quaternion
    const Eigen::Vector4d q_unit = cloud.unit_rotation(i);
    const Eigen::Vector4d dq_unit = quat_to_matrix_backward(q_unit, dM);
    grads->rotation[i] += quat_normalize_backward(cloud.rotation[i], dq_unit);

    // position
    grads->position[i] += cam.R.transpose() * dp;
}

} // namespace polsplat
