#include "polsplat/loss.hpp"
#include "polsplat/ssim.hpp"

#include <stdexcept>

namespace polsplat {

double total_loss(const LossComponents& c, const LossWeights& w, double iteration) {
    return c.rgb + w.lambda1 * c.pol + w.lambda2 * c.tsc + w.lambda3 * c.mask +
           w.lambda4 * c.opacity + w.lambda5(iteration) * c.depth_normal;
}

namespace {

double masked_l1(const Image& pred, const Image& gt, const Image& mask, Image* dpred,
                 double grad_scale) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("masked_l1: shape mismatch");
    size_t count = 0;
    double sum = 0.0;
    const int ch = pred.channels();
    for (int y = 0; y < pred.height(); ++y)
        for (int x = 0; x < pred.width(); ++x) {
            if (!mask.empty() && mask.at(y, x) < 0.5) continue;
            ++count;
            for (int c = 0; c < ch; ++c) sum += std::abs(pred.at(y, x, c) - gt.at(y, x, c));
        }
    if (count == 0) return 0.0;
    const double norm = 1.0 / (static_cast<double>(count) * ch);
    if (dpred) {
        for (int y = 0; y < pred.height(); ++y)
            for (int x = 0; x < pred.width(); ++x) {
                if (!mask.empty() && mask.at(y, x) < 0.5) continue;
                for (int c = 0; c < ch; ++c) {
                    const double d = pred.at(y, x, c) - gt.at(y, x, c);
                    dpred->at(y, x, c) += grad_scale * norm * (d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0));
                }
            }
    }
    return sum * norm;
}

} // namespace

double l_rgb(const Image& s0_pred, const Image& s0_gt, const Image& mask, Image* dpred,
             double grad_scale) {
    if (!s0_pred.same_shape(s0_gt)) throw std::invalid_argument("l_rgb: shape mismatch");
    const double l1 = masked_l1(s0_pred, s0_gt, mask, dpred, 0.8 * grad_scale);
    Image dssim;
    const double s = ssim(s0_pred, s0_gt, mask, dpred ? &dssim : nullptr);
    if (dpred) {
        // d[(1 - S)/2] = -dS/2
        for (size_t i = 0; i < dpred->size(); ++i)
            dpred->data()[i] += grad_scale * 0.2 * (-0.5) * dssim.data()[i];
    }
    return 0.8 * l1 + 0.2 * 0.5 * (1.0 - s);
}

double l_pol(const Image& s1_pred, const Image& s1_gt, const Image& s2_pred, const Image& s2_gt,
             const Image& mask, Image* ds1, Image* ds2, double grad_scale) {
    return masked_l1(s1_pred, s1_gt, mask, ds1, grad_scale) +
           masked_l1(s2_pred, s2_gt, mask, ds2, grad_scale);
}

double l_mask(const Image& mask_gt, const Image& alpha, Image* dalpha, double grad_scale) {
    if (!mask_gt.same_shape(alpha)) throw std::invalid_argument("l_mask: shape mismatch");
    constexpr double kEps = 1e-6;
    const size_t n = alpha.size();
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double m = mask_gt.data()[i];
        const double a = std::clamp(alpha.data()[i], kEps, 1.0 - kEps);
        sum += -(m * std::log(a) + (1.0 - m) * std::log(1.0 - a));
        if (dalpha) {
            const bool clamped = alpha.data()[i] < kEps || alpha.data()[i] > 1.0 - kEps;
            if (!clamped)
                dalpha->data()[i] += grad_scale * (-m / a + (1.0 - m) / (1.0 - a)) / n;
        }
    }
    return sum / static_cast<double>(n);
}

double l_opacity(const SurfelCloud& cloud, bool negated, std::vector<double>* dlogits,
                 double grad_scale) {
    const double sign = negated ? -1.0 : 1.0;
    double sum = 0.0;
    for (size_t i = 0; i < cloud.size(); ++i) {
        const double o = cloud.opacity(i);
        const double e = std::exp(-20.0 * (o - 0.5) * (o - 0.5));
        sum += sign * e;
        if (dlogits)
            (*dlogits)[i] += grad_scale * sign * e * (-40.0 * (o - 0.5)) * o * (1.0 - o);
    }
    return sum;
}

double l_depth_normal(const Image& depth, const Image& normal_raw, const Image& alpha,
                      const Camera& cam, double alpha_threshold, Image* ddepth, Image* dnormal,
                      double grad_scale) {
    const int w = depth.width(), h = depth.height();
    auto valid = [&](int y, int x) {
        return y >= 0 && y < h && x >= 0 && x < w && alpha.at(y, x) >= alpha_threshold &&
               depth.at(y, x) > 0.0;
    };
    auto bp = [&](int y, int x) {
        return depth.at(y, x) * cam.pixel_dir_cam(x, y); // camera space
    };

    struct Term {
        int x, y;
        Eigen::Vector3d n_cam_raw, c, dxv, dyv;
    };
    std::vector<Term> terms;
    double sum = 0.0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!valid(y, x) || !valid(y, x - 1) || !valid(y, x + 1) || !valid(y - 1, x) ||
                !valid(y + 1, x))
                continue;
            const Eigen::Vector3d dxv = bp(y, x + 1) - bp(y, x - 1);
            const Eigen::Vector3d dyv = bp(y + 1, x) - bp(y - 1, x);
            const Eigen::Vector3d c = dxv.cross(dyv);
            const double cn = c.norm();
            if (cn < 1e-12) continue;
            const Eigen::Vector3d n_fd = -c / cn; // faces the camera
            const Eigen::Vector3d n_world(normal_raw.at(y, x, 0), normal_raw.at(y, x, 1),
                                          normal_raw.at(y, x, 2));
            const Eigen::Vector3d n_cam_raw = cam.R * n_world;
            sum += 1.0 - n_cam_raw.dot(n_fd);
            terms.push_back({x, y, n_cam_raw, c, dxv, dyv});
        }
    if (terms.empty()) return 0.0;
    const double norm = 1.0 / static_cast<double>(terms.size());

    if (ddepth || dnormal) {
        for (const Term& t : terms) {
            const double cn = t.c.norm();
            const Eigen::Vector3d chat = t.c / cn;
            const Eigen::Vector3d n_fd = -chat;
            // d(1 - n.n_fd) = -n_fd . dn - n . dn_fd
            if (dnormal) {
                const Eigen::Vector3d dn_world = cam.R.transpose() * (-n_fd) * norm * grad_scale;
                for (int k = 0; k < 3; ++k) dnormal->at(t.y, t.x, k) += dn_world[k];
            }
            if (ddepth) {
                const Eigen::Vector3d dn_fd = -t.n_cam_raw * norm * grad_scale;
                const Eigen::Vector3d dchat = -dn_fd;
                const Eigen::Vector3d dc = (dchat - chat * chat.dot(dchat)) / cn;
                const Eigen::Vector3d ddx = t.dyv.cross(dc); // adjoint of cross, first arg
                const Eigen::Vector3d ddy = dc.cross(t.dxv); // adjoint of cross, second arg
                ddepth->at(t.y, t.x + 1) += ddx.dot(cam.pixel_dir_cam(t.x + 1, t.y));
                ddepth->at(t.y, t.x - 1) -= ddx.dot(cam.pixel_dir_cam(t.x - 1, t.y));
                ddepth->at(t.y + 1, t.x) += ddy.dot(cam.pixel_dir_cam(t.x, t.y + 1));
                ddepth->at(t.y - 1, t.x) -= ddy.dot(cam.pixel_dir_cam(t.x, t.y - 1));
            }
        }
    }
    return sum * norm;
}

TscWorkload build_tsc_workload(const std::vector<View>& views, int ref_index,
                               const std::vector<int>& neighbor_ids,
                               const RenderBuffers& ref_buffers,
                               const std::vector<const Image*>& neighbor_depths,
                               const std::vector<const Image*>& neighbor_alphas,
                               const TscBuildParams& params) {
    TscWorkload out;
    const View& ref = views[ref_index];
    const PseudoSurfacePoints pts = backproject(ref_buffers.depth, ref_buffers.alpha, ref.mask,
                                                ref.cam, params.stride, params.alpha_threshold);

    for (const PseudoSurfacePoint& p : pts.points) {
        Eigen::Vector3d n_raw(ref_buffers.normal.at(p.py, p.px, 0),
                              ref_buffers.normal.at(p.py, p.px, 1),
                              ref_buffers.normal.at(p.py, p.px, 2));
        const double nn = n_raw.norm();
        if (nn < 1e-9) continue;
        const Eigen::Vector3d n_hat = n_raw / nn;

        TscWorkload::Point point;
        point.px = p.px;
        point.py = p.py;
        for (size_t j = 0; j < neighbor_ids.size(); ++j) {
            const View& nb = views[neighbor_ids[j]];
            // depth-guided visibility against the detached neighbor caches
            double z = 0.0;
            const Eigen::Vector2d uv = nb.cam.project(p.x, &z);
            if (z <= 0.0 || !nb.cam.contains(uv.x(), uv.y())) continue;
            if (neighbor_alphas[j] &&
                neighbor_alphas[j]->sample_bilinear(uv.x(), uv.y()) < params.alpha_threshold)
                continue;
            const double rendered_ray = neighbor_depths[j]->sample_bilinear(uv.x(), uv.y()) *
                                        nb.cam.ray_scale(uv.x(), uv.y());
            if (std::abs(rendered_ray - (p.x - nb.cam.center).norm()) >= params.tau) continue;

            const std::optional<AopSample> s = sample_aop(nb.aop, nb.aop_valid, nb.mask, uv,
                                                          &nb.dolp);
            if (!s) continue;
            TangentRowPair pair;
            pair.t = projected_tangent(s->phi, nb.cam.R);
            pair.t_hat = pseudo_tangent(s->phi, nb.cam.R);
            pair.weight = params.rows.dolp_weighting
                              ? std::min(1.0, s->dolp / params.rows.dolp_weight_scale)
                              : 1.0;
            const double a = pair.t.dot(n_hat), b = pair.t_hat.dot(n_hat);
            point.pairs.push_back(pair);
            point.use_t.push_back(a * a <= b * b ? 1 : 0);
        }
        if (!point.pairs.empty()) {
            out.total_rows += point.pairs.size();
            out.points.push_back(std::move(point));
        }
    }
    return out;
}

double l_tsc(const TscWorkload& workload, const Image& normal_raw, Image* dnormal,
             double grad_scale) {
    if (workload.total_rows == 0) return 0.0;
    const double norm = 1.0 / static_cast<double>(workload.total_rows);
    double sum = 0.0;
    for (const auto& point : workload.points) {
        Eigen::Vector3d n_raw(normal_raw.at(point.py, point.px, 0),
                              normal_raw.at(point.py, point.px, 1),
                              normal_raw.at(point.py, point.px, 2));
        const double nn = n_raw.norm();
        if (nn < 1e-9) continue;
        const Eigen::Vector3d n_hat = n_raw / nn;
        Eigen::Vector3d dn_hat = Eigen::Vector3d::Zero();
        for (size_t k = 0; k < point.pairs.size(); ++k) {
            const auto& pair = point.pairs[k];
            const Eigen::Vector3d& row = point.use_t[k] ? pair.t : pair.t_hat;
            const double d = row.dot(n_hat);
            sum += pair.weight * d * d;
            if (dnormal) dn_hat += 2.0 * pair.weight * d * row;
        }
        if (dnormal) {
            const Eigen::Vector3d dn_raw =
                grad_scale * norm * (dn_hat - n_hat * n_hat.dot(dn_hat)) / nn;
            for (int c = 0; c < 3; ++c) dnormal->at(point.py, point.px, c) += dn_raw[c];
        }
    }
    return sum * norm;
}

} // namespace polsplat
