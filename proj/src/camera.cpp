#include "polsplat/camera.hpp"

namespace polsplat {

void View::derive_aop(double dolp_min) {
    aop = aop_map(stokes, &aop_valid, dolp_min);
    const int w = stokes.s0.width(), h = stokes.s0.height(), c = stokes.s0.channels();
    dolp = Image(w, h, 1);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s0 = 0.0, s1 = 0.0, s2 = 0.0;
            for (int k = 0; k < c; ++k) {
                s0 += stokes.s0.at(y, x, k);
                s1 += stokes.s1.at(y, x, k);
                s2 += stokes.s2.at(y, x, k);
            }
            dolp.at(y, x) = s0 > 0.0 ? std::sqrt(s1 * s1 + s2 * s2) / s0 : 0.0;
        }
    }
}

Camera look_at_camera(const Eigen::Vector3d& position, const Eigen::Vector3d& target,
                      int width, int height, double focal, const Eigen::Vector3d& up_hint) {
    Camera cam;
    cam.width = width;
    cam.height = height;
    cam.fx = cam.fy = focal;
    cam.cx = 0.5 * (width - 1);
    cam.cy = 0.5 * (height - 1);
    cam.center = position;

    const Eigen::Vector3d forward = (target - position).normalized();
    Eigen::Vector3d up = up_hint;
    if (std::abs(forward.dot(up.normalized())) > 0.95) up = Eigen::Vector3d(1, 0, 0);
    const Eigen::Vector3d right = up.cross(forward).normalized();
    const Eigen::Vector3d down = forward.cross(right);
    cam.R.row(0) = right.transpose();
    cam.R.row(1) = down.transpose();
    cam.R.row(2) = forward.transpose();
    return cam;
}

} // namespace polsplat
