#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "polsplat/surfel.hpp"

using namespace polsplat;

namespace {

SurfelCloud single(const Eigen::Vector3d& pos, const Eigen::Vector4d& q,
                   const Eigen::Vector2d& scale, double opacity_logit = 2.0) {
    SurfelCloud c;
    c.resize(1);
    c.position[0] = pos;
    c.rotation[0] = q.normalized();
    c.log_scale[0] = scale.array().log();
    c.opacity_logit[0] = opacity_logit;
    return c;
}

} // namespace

TEST_CASE("covariance_world for the identity rotation") {
    const SurfelCloud c = single({0, 0, 0}, {1, 0, 0, 0}, {1, 1});
    const Eigen::Matrix3d s = covariance_world(c, 0);
    Eigen::Matrix3d expect = Eigen::Matrix3d::Zero();
    expect(0, 0) = expect(1, 1) = 1.0;
    CHECK((s - expect).norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("covariance_world spectrum under rotation") {
    // 90 degrees about x: quaternion (cos45, sin45, 0, 0)
    const double c45 = std::cos(M_PI / 4);
    const SurfelCloud c = single({0, 0, 0}, {c45, c45, 0, 0}, {1, 2});
    const Eigen::Matrix3d s = covariance_world(c, 0);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(s);
    CHECK(eig.eigenvalues()(0) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(eig.eigenvalues()(1) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(eig.eigenvalues()(2) == doctest::Approx(4.0).epsilon(1e-9));
    // zero eigenvector along the rotated z (= world -y for this rotation)
    const Eigen::Vector3d null_dir = eig.eigenvectors().col(0);
    CHECK(std::abs(null_dir.dot(Eigen::Vector3d::UnitY())) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("covariance_world matches composed R D R^T for random surfels") {
    auto gen = oracle::rng(41);
    const SurfelCloud cloud = oracle::random_cloud(50, gen);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector4d qv = cloud.unit_rotation(i);
        const Eigen::Quaterniond q(qv[0], qv[1], qv[2], qv[3]);
        const Eigen::Matrix3d rot = q.toRotationMatrix();
        const Eigen::Vector2d s = cloud.scale(i);
        Eigen::Matrix3d diag = Eigen::Matrix3d::Zero();
        diag(0, 0) = s.x() * s.x();
        diag(1, 1) = s.y() * s.y();
        const Eigen::Matrix3d expect = rot * diag * rot.transpose();
        CHECK((covariance_world(cloud, i) - expect).norm() <= 1e-9);
    }
}

TEST_CASE("covariance invariant under quaternion sign flip") {
    auto gen = oracle::rng(43);
    SurfelCloud cloud = oracle::random_cloud(20, gen);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Matrix3d a = covariance_world(cloud, i);
        cloud.rotation[i] = -cloud.rotation[i];
        const Eigen::Matrix3d b = covariance_world(cloud, i);
        CHECK((a - b).norm() <= 1e-12);
    }
}

TEST_CASE("surfel_normal basics and eigen-null-space agreement") {
    CHECK((surfel_normal(single({0, 0, 0}, {1, 0, 0, 0}, {1, 1}), 0) - Eigen::Vector3d(0, 0, 1))
              .norm() <= 1e-12);
    CHECK((surfel_normal(single({0, 0, 0}, {0, 1, 0, 0}, {1, 1}), 0) - Eigen::Vector3d(0, 0, -1))
              .norm() <= 1e-12);

    auto gen = oracle::rng(47);
    const SurfelCloud cloud = oracle::random_cloud(30, gen);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Eigen::Vector3d n = surfel_normal(cloud, i);
        CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-12));
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(covariance_world(cloud, i));
        const Eigen::Vector3d null_dir = eig.eigenvectors().col(0);
        CHECK(std::abs(n.dot(null_dir)) == doctest::Approx(1.0).epsilon(1e-8));
    }
}

TEST_CASE("project pinhole center and fronto-parallel depth gradient") {
    Camera cam;
    cam.width = cam.height = 101;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.0;

    SurfelCloud c = single({0, 0, 5}, {1, 0, 0, 0}, {0.1, 0.1});
    ProjectedSurfel p;
    REQUIRE(project(c, 0, cam, &p));
    CHECK(p.u.x() == doctest::Approx(50.0));
    CHECK(p.u.y() == doctest::Approx(50.0));
    CHECK(p.depth_at_mean == doctest::Approx(5.0));
    // fronto-parallel disk: constant depth across the footprint
    CHECK(p.depth_gradient.norm() == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("taylor depth matches exact ray-plane intersection on a tilted surfel") {
    Camera cam;
    cam.width = cam.height = 101;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.0;

    // 45 degrees about x
    const double c45 = std::cos(M_PI / 8), s45 = std::sin(M_PI / 8);
    SurfelCloud c = single({0.1, -0.05, 5}, {c45, s45, 0, 0}, {0.5, 0.5});
    ProjectedSurfel p;
    REQUIRE(project(c, 0, cam, &p));

    const Eigen::Vector3d n_cam = cam.R * p.normal_world;
    const Eigen::Vector3d p0 = cam.world_to_cam(c.position[0]);
    const double sigma = std::sqrt(p.cov2d(0, 0));
    double max_rel = 0.0;
    for (double dx = -sigma; dx <= sigma; dx += sigma / 2)
        for (double dy = -sigma; dy <= sigma; dy += sigma / 2) {
            const Eigen::Vector2d u = p.u + Eigen::Vector2d(dx, dy);
            const double taylor =
                p.depth_at_mean + p.depth_gradient.dot(Eigen::Vector2d(dx, dy));
            const Eigen::Vector3d dir((u.x() - cam.cx) / cam.fx, (u.y() - cam.cy) / cam.fy, 1.0);
            const double exact = n_cam.dot(p0) / n_cam.dot(dir);
            max_rel = std::max(max_rel, std::abs(taylor - exact) / exact);
        }
    CHECK(max_rel < 0.01);
}

TEST_CASE("taylor depth error decays quadratically") {
    Camera cam;
    cam.width = cam.height = 101;
    cam.fx = cam.fy = 100.0;
    cam.cx = cam.cy = 50.0;
    const double c45 = std::cos(M_PI / 8), s45 = std::sin(M_PI / 8);
    SurfelCloud c = single({0, 0, 4}, {c45, 0, s45, 0}, {0.5, 0.5});
    ProjectedSurfel p;
    REQUIRE(project(c, 0, cam, &p));
    const Eigen::Vector3d n_cam = cam.R * p.normal_world;
    const Eigen::Vector3d p0 = cam.world_to_cam(c.position[0]);

    auto err_at = [&](double off) {
        const Eigen::Vector2d u = p.u + Eigen::Vector2d(off, off * 0.5);
        const double taylor = p.depth_at_mean +
                              p.depth_gradient.dot(Eigen::Vector2d(off, off * 0.5));
        const Eigen::Vector3d dir((u.x() - cam.cx) / cam.fx, (u.y() - cam.cy) / cam.fy, 1.0);
        return std::abs(taylor - n_cam.dot(p0) / n_cam.dot(dir));
    };
    const double e1 = err_at(8.0), e2 = err_at(4.0), e3 = err_at(2.0);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.25));
    CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.25));
}

TEST_CASE("project culls behind the camera and off-screen footprints") {
    Camera cam;
    cam.width = cam.height = 64;
    cam.fx = cam.fy = 80.0;
    cam.cx = cam.cy = 31.5;
    ProjectedSurfel p;
    SurfelCloud behind = single({0, 0, -1}, {1, 0, 0, 0}, {0.1, 0.1});
    CHECK_FALSE(project(behind, 0, cam, &p));
    SurfelCloud off = single({50, 0, 2}, {1, 0, 0, 0}, {0.01, 0.01});
    CHECK_FALSE(project(off, 0, cam, &p));
}

TEST_CASE("project equivariant under rigid transforms of surfel and camera") {
    auto gen = oracle::rng(53);
    SurfelCloud cloud = oracle::random_cloud(10, gen);
    Camera cam = oracle::test_camera(32);

    const Eigen::Quaterniond rq =
        Eigen::Quaterniond(0.9, 0.2, -0.3, 0.4).normalized();
    const Eigen::Matrix3d rot = rq.toRotationMatrix();
    const Eigen::Vector3d shift(0.3, -1.2, 0.7);

    SurfelCloud moved = cloud;
    Camera moved_cam = cam;
    moved_cam.R = cam.R * rot.transpose();
    moved_cam.center = rot * cam.center + shift;
    for (size_t i = 0; i < cloud.size(); ++i) {
        moved.position[i] = rot * cloud.position[i] + shift;
        const Eigen::Vector4d q = cloud.unit_rotation(i);
        const Eigen::Quaterniond composed = rq * Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
        moved.rotation[i] =
            Eigen::Vector4d(composed.w(), composed.x(), composed.y(), composed.z());
    }

    for (size_t i = 0; i < cloud.size(); ++i) {
        ProjectedSurfel a, b;
        const bool ka = project(cloud, i, cam, &a);
        const bool kb = project(moved, i, moved_cam, &b);
        REQUIRE(ka == kb);
        if (!ka) continue;
        CHECK((a.u - b.u).norm() <= 1e-6);
        CHECK((a.cov2d - b.cov2d).norm() <= 1e-6);
        CHECK(a.depth_at_mean == doctest::Approx(b.depth_at_mean).epsilon(1e-9));
        CHECK((a.depth_gradient - b.depth_gradient).norm() <= 1e-6);
    }
}

TEST_CASE("project agrees with the reference projection") {
    auto gen = oracle::rng(59);
    const SurfelCloud cloud = oracle::random_cloud(40, gen);
    const Camera cam = oracle::test_camera(32);
    for (size_t i = 0; i < cloud.size(); ++i) {
        ProjectedSurfel p;
        const oracle::RefProjected r = oracle::ref_project(cloud, i, cam);
        const bool kept = project(cloud, i, cam, &p);
        REQUIRE(kept == !r.culled);
        if (!kept) continue;
        CHECK((p.u - r.u).norm() <= 1e-9);
        CHECK((p.cov2d - r.cov).norm() <= 1e-9);
        CHECK(p.depth_at_mean == doctest::Approx(r.z).epsilon(1e-12));
        CHECK((p.depth_gradient - r.grad).norm() <= 1e-9);
        CHECK((p.normal_world - r.normal).norm() <= 1e-9);
    }
}
