#pragma once

#include "polsplat/camera.hpp"

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace polsplat {

/// t(phi) = cos(phi) r1 - sin(phi) r2; orthogonal to the surface normal
/// when phi is the diffuse-branch AoP.
Eigen::Vector3d projected_tangent(double phi, const Eigen::Matrix3d& R);

/// t_hat(phi) = sin(phi) r1 + cos(phi) r2 = t(phi - pi/2); the pi/2
/// ambiguity branch (specular dominant).
Eigen::Vector3d pseudo_tangent(double phi, const Eigen::Matrix3d& R);

/// One view's candidate constraint rows. The surface normal annihilates
/// exactly one of the pair; which one depends on diffuse/specular dominance.
struct TangentRowPair {
    Eigen::Vector3d t;
    Eigen::Vector3d t_hat;
    double weight = 1.0;
};

/// Stacked multi-view constraint for one surface point.
struct TangentSystem {
    std::vector<TangentRowPair> pairs;
    size_t size() const { return pairs.size(); }
};

struct AopSample {
    double phi = 0.0;
    double dolp = 1.0;
};

/// AoP lookup the system builder queries per view at a projected pixel
/// position; nullopt where polarization is undefined.
using AopProvider =
    std::function<std::optional<AopSample>(int view_index, const Eigen::Vector2d& uv)>;

struct BuildSystemOptions {
    bool dolp_weighting = false; // row weight min(1, DoLP/0.05); off = weight 1
    double dolp_weight_scale = 0.05;
};

/// Circular-aware bilinear AoP sample: interpolates (cos 2phi, sin 2phi).
/// Requires all four taps valid and in-mask; returns nullopt otherwise.
std::optional<AopSample> sample_aop(const Image& aop, const Image& aop_valid, const Image& mask,
                                    const Eigen::Vector2d& uv, const Image* dolp = nullptr);

/// Adds one row pair per visible view whose AoP is defined at the point's
/// projection; views where the point projects outside the image are skipped.
TangentSystem build_system(const Eigen::Vector3d& point, const std::vector<Camera>& cams,
                           const std::vector<char>& visible, const AopProvider& aop_at,
                           const BuildSystemOptions& opts = {});

/// Sum over pairs of weight * min((t.n)^2, (t_hat.n)^2); n must be unit.
/// The per-pair min resolves the pi/2 ambiguity: the branch consistent with
/// n is scored, so the residual vanishes for exact data.
double tsc_residual(const TangentSystem& system, const Eigen::Vector3d& n);

struct NormalSolve {
    Eigen::Vector3d normal = Eigen::Vector3d::UnitZ();
    double residual = 0.0;
    bool underdetermined = true;
};

/// Least-squares normal of the stacked system: alternates branch selection
/// with the smallest-eigenvector solve, over several deterministic seeds.
NormalSolve solve_normal(const TangentSystem& system);

} // namespace polsplat
