#include "polsplat/tangent.hpp"

#include <cmath>

namespace polsplat {

Eigen::Vector3d projected_tangent(double phi, const Eigen::Matrix3d& R) {
    return std::cos(phi) * R.row(0).transpose() - std::sin(phi) * R.row(1).transpose();
}

Eigen::Vector3d pseudo_tangent(double phi, const Eigen::Matrix3d& R) {
    return std::sin(phi) * R.row(0).transpose() + std::cos(phi) * R.row(1).transpose();
}

std::optional<AopSample> sample_aop(const Image& aop, const Image& aop_valid, const Image& mask,
                                    const Eigen::Vector2d& uv, const Image* dolp) {
    const int w = aop.width(), h = aop.height();
    const double x = uv.x(), y = uv.y();
    if (x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0) return std::nullopt;
    const int x0 = std::min(static_cast<int>(x), w - 2 >= 0 ? w - 2 : 0);
    const int y0 = std::min(static_cast<int>(y), h - 2 >= 0 ? h - 2 : 0);
    const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
    const double fx = x - x0, fy = y - y0;

    double c = 0.0, s = 0.0;
    const int xs[4] = {x0, x1, x0, x1};
    const int ys[4] = {y0, y0, y1, y1};
    const double ws[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
    AopSample out;
    out.dolp = 0.0;
    for (int k = 0; k < 4; ++k) {
        if (aop_valid.at(ys[k], xs[k]) < 0.5) return std::nullopt;
        if (!mask.empty() && mask.at(ys[k], xs[k]) < 0.5) return std::nullopt;
        const double phi = aop.at(ys[k], xs[k]);
        c += ws[k] * std::cos(2.0 * phi);
        s += ws[k] * std::sin(2.0 * phi);
        out.dolp += ws[k] * (dolp ? dolp->at(ys[k], xs[k]) : 1.0);
    }
    if (c * c + s * s < 1e-12) return std::nullopt;
    out.phi = 0.5 * std::atan2(s, c);
    if (out.phi < 0.0) out.phi += M_PI;
    return out;
}

TangentSystem build_system(const Eigen::Vector3d& point, const std::vector<Camera>& cams,
                           const std::vector<char>& visible, const AopProvider& aop_at,
                           const BuildSystemOptions& opts) {
    TangentSystem sys;
    for (size_t k = 0; k < cams.size(); ++k) {
        if (k < visible.size() && !visible[k]) continue;
        double z = 0.0;
        const Eigen::Vector2d uv = cams[k].project(point, &z);
        if (z <= 0.0 || !cams[k].contains(uv.x(), uv.y())) continue;
        const std::optional<AopSample> s = aop_at(static_cast<int>(k), uv);
        if (!s) continue;
        TangentRowPair pair;
        pair.t = projected_tangent(s->phi, cams[k].R);
        pair.t_hat = pseudo_tangent(s->phi, cams[k].R);
        pair.weight = opts.dolp_weighting ? std::min(1.0, s->dolp / opts.dolp_weight_scale) : 1.0;
        sys.pairs.push_back(pair);
    }
    return sys;
}

double tsc_residual(const TangentSystem& system, const Eigen::Vector3d& n) {
    double total = 0.0;
    for (const auto& p : system.pairs) {
        const double a = p.t.dot(n), b = p.t_hat.dot(n);
        total += p.weight * std::min(a * a, b * b);
    }
    return total;
}

NormalSolve solve_normal(const TangentSystem& system) {
    NormalSolve out;
    if (system.pairs.size() < 2) {
        out.underdetermined = true;
        if (!system.pairs.empty()) {
            // nullspace of a single pair is 2-dimensional
            out.residual = 0.0;
        }
        return out;
    }

    auto refine = [&](Eigen::Vector3d n) {
        for (int it = 0; it < 12; ++it) {
            Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
            for (const auto& p : system.pairs) {
                const double a = p.t.dot(n), b = p.t_hat.dot(n);
                const Eigen::Vector3d& row = (a * a <= b * b) ? p.t : p.t_hat;
                m += p.weight * row * row.transpose();
            }
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
            n = eig.eigenvectors().col(0);
        }
        return n;
    };

    const Eigen::Vector3d seeds[7] = {
        Eigen::Vector3d::UnitX(),  Eigen::Vector3d::UnitY(),  Eigen::Vector3d::UnitZ(),
        -Eigen::Vector3d::UnitX(), -Eigen::Vector3d::UnitY(), -Eigen::Vector3d::UnitZ(),
        Eigen::Vector3d(1, 1, 1).normalized()};
    double best = std::numeric_limits<double>::infinity();
    for (const auto& seed : seeds) {
        const Eigen::Vector3d n = refine(seed);
        const double r = tsc_residual(system, n);
        if (r < best) {
            best = r;
            out.normal = n;
        }
    }
    out.residual = best;

    // rank check on the selected rows at the solution
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (const auto& p : system.pairs) {
        const double a = p.t.dot(out.normal), b = p.t_hat.dot(out.normal);
        const Eigen::Vector3d& row = (a * a <= b * b) ? p.t : p.t_hat;
        m += p.weight * row * row.transpose();
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(m);
    out.underdetermined = eig.eigenvalues()(1) < 1e-9 * std::max(eig.eigenvalues()(2), 1e-300);
    return out;
}

} // namespace polsplat
