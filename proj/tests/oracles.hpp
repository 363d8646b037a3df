// Test-side reference implementations, kept independent of the library's
// computation paths so they can serve as oracles.
#pragma once

#include "polsplat/camera.hpp"
#include "polsplat/polarization.hpp"
#include "polsplat/render.hpp"
#include "polsplat/surfel.hpp"

#include <Eigen/Dense>
#include <random>

namespace oracle {

using namespace polsplat;

// Fresnel via the angle-form identities (Snell angles, sin/tan quotients)
// rather than the cosine amplitudes used by the library.
inline FresnelTerms fresnel_angle_form(double cos_i, double eta) {
    const double ti = std::acos(std::clamp(cos_i, 0.0, 1.0));
    const double tt = std::asin(std::sin(ti) / eta);
    double rs, rp;
    if (ti < 1e-9) {
        rs = rp = (1.0 - eta) / (1.0 + eta);
    } else {
        rs = -std::sin(ti - tt) / std::sin(ti + tt);
        rp = std::tan(ti - tt) / std::tan(ti + tt);
    }
    const double Rs = rs * rs, Rp = rp * rp;
    FresnelTerms f;
    f.eta = eta;
    f.r_plus = 0.5 * (Rs + Rp);
    f.r_minus = 0.5 * (Rs - Rp);
    f.t_plus = 0.5 * ((1 - Rs) + (1 - Rp));
    f.t_minus = 0.5 * ((1 - Rs) - (1 - Rp));
    return f;
}

// Plain-loop per-pixel renderer of the compositing equations. Projection
// goes through full 3x3 matrix products (Eigen quaternions, block products)
// instead of the library's 2-column shortcut. Mirrors the same culling,
// cutoff and early-exit contract as the production rasterizer.
struct RefProjected {
    bool culled = true;
    Eigen::Vector2d u;
    Eigen::Matrix2d cov;
    double z = 0;
    Eigen::Vector2d grad;
    Eigen::Vector3d normal;
    double opacity = 0;
};

inline RefProjected ref_project(const SurfelCloud& cloud, size_t i, const Camera& cam) {
    RefProjected out;
    const Eigen::Vector3d p = cam.R * (cloud.position[i] - cam.center);
    if (p.z() < kCullNear) return out;

    const Eigen::Vector4d qv = cloud.rotation[i].normalized();
    const Eigen::Quaterniond q(qv[0], qv[1], qv[2], qv[3]);
    const Eigen::Matrix3d rot = q.toRotationMatrix();
    const Eigen::Vector2d s = cloud.log_scale[i].array().exp();
    Eigen::Matrix3d diag = Eigen::Matrix3d::Zero();
    diag(0, 0) = s.x() * s.x();
    diag(1, 1) = s.y() * s.y();
    const Eigen::Matrix3d sigma_world = rot * diag * rot.transpose();
    const Eigen::Matrix3d sigma_cam = cam.R * sigma_world * cam.R.transpose();

    Eigen::Matrix<double, 2, 3> J;
    J << cam.fx / p.z(), 0, -cam.fx * p.x() / (p.z() * p.z()),
         0, cam.fy / p.z(), -cam.fy * p.y() / (p.z() * p.z());
    out.cov = J * sigma_cam * J.transpose() + kCovReg * Eigen::Matrix2d::Identity();
    out.u = {cam.fx * p.x() / p.z() + cam.cx, cam.fy * p.y() / p.z() + cam.cy};
    out.z = p.z();

    Eigen::Vector3d n = rot.col(2);
    if (n.dot(cam.center - cloud.position[i]) < 0) n = -n;
    out.normal = n;
    const Eigen::Vector3d n_cam = cam.R * n;
    const double denom = n_cam.dot(p);
    if (std::abs(denom) > 1e-6 * p.norm())
        out.grad = {-p.z() * p.z() / denom * n_cam.x() / cam.fx,
                    -p.z() * p.z() / denom * n_cam.y() / cam.fy};
    else
        out.grad.setZero();
    out.opacity = 1.0 / (1.0 + std::exp(-cloud.opacity_logit[i]));

    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(out.cov);
    const double r3 = kCullSigma * std::sqrt(std::max(eig.eigenvalues()(1), 0.0));
    if (out.u.x() + r3 < 0 || out.u.x() - r3 > cam.width - 1.0 || out.u.y() + r3 < 0 ||
        out.u.y() - r3 > cam.height - 1.0)
        return out;
    out.culled = false;
    return out;
}

inline void ref_rasterize(const SurfelCloud& cloud, const Camera& cam, const RenderOptions& opts,
                          RenderBuffers* buffers) {
    buffers->allocate(cam.width, cam.height);
    std::vector<std::pair<RefProjected, int>> projected;
    for (size_t i = 0; i < cloud.size(); ++i) {
        RefProjected p = ref_project(cloud, i, cam);
        if (!p.culled) projected.push_back({p, static_cast<int>(i)});
    }
    std::stable_sort(projected.begin(), projected.end(), [](const auto& a, const auto& b) {
        if (a.first.z != b.first.z) return a.first.z < b.first.z;
        return a.second < b.second;
    });

    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            double T = 1.0, sd = 0.0, A = 0.0;
            Eigen::Vector3d col = Eigen::Vector3d::Zero(), nrm = Eigen::Vector3d::Zero();
            for (const auto& [p, id] : projected) {
                const Eigen::Vector2d d(x - p.u.x(), y - p.u.y());
                const double power = -0.5 * d.dot(p.cov.inverse() * d);
                const double g = std::exp(power);
                if (g < kGaussCutoff) continue;
                const double alpha = std::min(p.opacity * g, opts.alpha_max);
                const double w = T * alpha;
                col += w * cloud.color[id];
                sd += w * (p.z + p.grad.dot(d));
                nrm += w * p.normal;
                A += w;
                T *= 1.0 - alpha;
                if (T < opts.transmittance_min) break;
            }
            buffers->alpha.at(y, x) = A;
            if (A > 1e-12) {
                buffers->depth.at(y, x) = sd / A;
                for (int c = 0; c < 3; ++c) {
                    buffers->color.at(y, x, c) = col[c];
                    buffers->normal.at(y, x, c) = nrm[c] / A;
                }
            }
        }
}

// naive full-window SSIM, zero padding, mean over in-mask pixels
inline double ref_ssim(const Image& pred, const Image& gt, const Image& mask) {
    constexpr int kHalf = 5;
    constexpr double kC1 = 1e-4, kC2 = 9e-4, kSigma = 1.5;
    double kernel[11][11];
    double ksum = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double dx = i - kHalf, dy = j - kHalf;
            kernel[i][j] = std::exp(-(dx * dx) / (2 * kSigma * kSigma)) *
                           std::exp(-(dy * dy) / (2 * kSigma * kSigma));
            ksum += kernel[i][j];
        }
    for (auto& row : kernel)
        for (double& v : row) v /= ksum;

    double total = 0;
    size_t count = 0;
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            if (!mask.empty() && mask.at(y, x) < 0.5) continue;
            ++count;
            for (int c = 0; c < pred.channels(); ++c) {
                double mx = 0, my = 0, exx = 0, eyy = 0, exy = 0;
                for (int i = -kHalf; i <= kHalf; ++i)
                    for (int j = -kHalf; j <= kHalf; ++j) {
                        const int yy = y + i, xx = x + j;
                        if (yy < 0 || yy >= pred.height() || xx < 0 || xx >= pred.width())
                            continue;
                        const double w = kernel[i + kHalf][j + kHalf];
                        const double a = pred.at(yy, xx, c), b = gt.at(yy, xx, c);
                        mx += w * a;
                        my += w * b;
                        exx += w * a * a;
                        eyy += w * b * b;
                        exy += w * a * b;
                    }
                const double sxx = exx - mx * mx, syy = eyy - my * my, sxy = exy - mx * my;
                total += ((2 * mx * my + kC1) * (2 * sxy + kC2)) /
                         ((mx * mx + my * my + kC1) * (sxx + syy + kC2));
            }
        }
    return count == 0 ? 1.0 : total / (count * pred.channels());
}

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

// random surfel cloud spread in front of the camera rig, parameters kept
// away from clamp/cull boundaries so finite differences stay clean
inline SurfelCloud random_cloud(size_t n, std::mt19937_64& gen, double spread = 0.5) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    SurfelCloud cloud;
    cloud.resize(n);
    for (size_t i = 0; i < n; ++i) {
        cloud.position[i] = spread * Eigen::Vector3d(uni(gen), uni(gen), uni(gen));
        Eigen::Vector4d q(gauss(gen), gauss(gen), gauss(gen), gauss(gen));
        while (q.norm() < 1e-3) q = Eigen::Vector4d(gauss(gen), gauss(gen), gauss(gen), gauss(gen));
        cloud.rotation[i] = q.normalized();
        cloud.log_scale[i] = Eigen::Vector2d(std::log(0.08) + 0.4 * uni(gen),
                                             std::log(0.08) + 0.4 * uni(gen));
        cloud.opacity_logit[i] = 0.8 * uni(gen);
        cloud.color[i] = Eigen::Vector3d(0.5 + 0.4 * uni(gen), 0.5 + 0.4 * uni(gen),
                                         0.5 + 0.4 * uni(gen));
    }
    return cloud;
}

inline Camera test_camera(int res = 16, double focal_mul = 1.6) {
    return look_at_camera(Eigen::Vector3d(0, 0, -3.0), Eigen::Vector3d::Zero(), res, res,
                          focal_mul * res);
}

} // namespace oracle
