#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "polsplat/render.hpp"

using namespace polsplat;

namespace {

RenderOptions seq_opts() {
    RenderOptions o;
    o.threads = 1;
    return o;
}

} // namespace

TEST_CASE("single opaque fronto-parallel surfel at a pixel center") {
    Camera cam;
    cam.width = cam.height = 33;
    cam.fx = cam.fy = 40.0;
    cam.cx = cam.cy = 16.0;

    SurfelCloud c;
    c.resize(1);
    c.position[0] = {0, 0, 2};
    c.rotation[0] = {1, 0, 0, 0};
    c.log_scale[0] = Eigen::Vector2d(0.3, 0.3).array().log();
    c.opacity_logit[0] = logit(0.7);
    c.color[0] = {0.2, 0.5, 0.9};

    RenderBuffers b;
    RenderCache cache;
    rasterize(c, cam, seq_opts(), &b, &cache);

    // pixel (16,16) sits exactly at the projected mean: G = 1, alpha = o
    CHECK(b.alpha.at(16, 16) == doctest::Approx(0.7).epsilon(1e-9));
    CHECK(b.depth.at(16, 16) == doctest::Approx(2.0).epsilon(1e-9));
    for (int k = 0; k < 3; ++k) {
        CHECK(b.color.at(16, 16, k) == doctest::Approx(0.7 * c.color[0][k]).epsilon(1e-9));
        // normalized blend of a single contributor recovers the unit normal
        const double expect_n = k == 2 ? -1.0 : 0.0; // oriented toward the camera at -z
        CHECK(b.normal.at(16, 16, k) == doctest::Approx(expect_n).epsilon(1e-9));
    }
}

TEST_CASE("full occlusion: opaque front surfel hides the back one") {
    Camera cam;
    cam.width = cam.height = 17;
    cam.fx = cam.fy = 30.0;
    cam.cx = cam.cy = 8.0;

    SurfelCloud c;
    c.resize(2);
    c.position[0] = {0, 0, 1.5};
    c.position[1] = {0, 0, 3.0};
    for (int i = 0; i < 2; ++i) {
        c.rotation[i] = {1, 0, 0, 0};
        c.log_scale[i] = Eigen::Vector2d(0.5, 0.5).array().log();
    }
    c.opacity_logit[0] = 30.0; // alpha ~= 1 at the center
    c.opacity_logit[1] = logit(0.9);
    c.color[0] = {1, 0, 0};
    c.color[1] = {0, 1, 0};

    RenderBuffers b;
    RenderCache cache;
    rasterize(c, cam, seq_opts(), &b, &cache);
    CHECK(b.color.at(8, 8, 0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(b.color.at(8, 8, 1) == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(b.depth.at(8, 8) == doctest::Approx(1.5).epsilon(1e-6));
}

TEST_CASE("rasterize matches the scalar reference on random scenes") {
    for (int trial = 0; trial < 10; ++trial) {
        auto gen = oracle::rng(100 + trial);
        const SurfelCloud cloud = oracle::random_cloud(5 + trial % 6, gen);
        const Camera cam = oracle::test_camera(8);

        RenderBuffers fast, ref;
        RenderCache cache;
        rasterize(cloud, cam, seq_opts(), &fast, &cache);
        oracle::ref_rasterize(cloud, cam, seq_opts(), &ref);

        for (int y = 0; y < 8; ++y)
            for (int x = 0; x < 8; ++x) {
                CHECK(fast.alpha.at(y, x) ==
                      doctest::Approx(ref.alpha.at(y, x)).epsilon(1e-6));
                CHECK(fast.depth.at(y, x) ==
                      doctest::Approx(ref.depth.at(y, x)).epsilon(1e-6));
                for (int k = 0; k < 3; ++k) {
                    CHECK(fast.color.at(y, x, k) ==
                          doctest::Approx(ref.color.at(y, x, k)).epsilon(1e-6));
                    CHECK(fast.normal.at(y, x, k) ==
                          doctest::Approx(ref.normal.at(y, x, k)).epsilon(1e-6));
                }
            }
    }
}

TEST_CASE("compositing weights sum to alpha in [0, 1]") {
    auto gen = oracle::rng(321);
    const SurfelCloud cloud = oracle::random_cloud(30, gen);
    const Camera cam = oracle::test_camera(16);
    RenderBuffers b;
    RenderCache cache;
    rasterize(cloud, cam, seq_opts(), &b, &cache);
    for (double a : b.alpha.data()) {
        CHECK(a >= 0.0);
        CHECK(a <= 1.0 + 1e-12);
    }
}

TEST_CASE("rasterize invariant to input surfel order") {
    auto gen = oracle::rng(77);
    SurfelCloud cloud = oracle::random_cloud(20, gen);
    const Camera cam = oracle::test_camera(16);

    RenderBuffers a;
    RenderCache ca;
    rasterize(cloud, cam, seq_opts(), &a, &ca);

    SurfelCloud rev;
    rev.resize(cloud.size());
    for (size_t i = 0; i < cloud.size(); ++i) {
        const size_t j = cloud.size() - 1 - i;
        rev.position[i] = cloud.position[j];
        rev.log_scale[i] = cloud.log_scale[j];
        rev.rotation[i] = cloud.rotation[j];
        rev.opacity_logit[i] = cloud.opacity_logit[j];
        rev.color[i] = cloud.color[j];
    }
    RenderBuffers b;
    RenderCache cb;
    rasterize(rev, cam, seq_opts(), &b, &cb);
    for (size_t i = 0; i < a.color.size(); ++i)
        CHECK(a.color.data()[i] == doctest::Approx(b.color.data()[i]).epsilon(1e-12));
}

TEST_CASE("multithreaded rasterize matches sequential") {
    auto gen = oracle::rng(88);
    const SurfelCloud cloud = oracle::random_cloud(40, gen);
    const Camera cam = oracle::test_camera(32);
    RenderOptions o1 = seq_opts(), o2 = seq_opts();
    o2.threads = 2;
    RenderBuffers a, b;
    RenderCache ca, cb;
    rasterize(cloud, cam, o1, &a, &ca);
    rasterize(cloud, cam, o2, &b, &cb);
    for (size_t i = 0; i < a.color.size(); ++i)
        CHECK(a.color.data()[i] == doctest::Approx(b.color.data()[i]).epsilon(1e-12));
    for (size_t i = 0; i < a.alpha.size(); ++i)
        CHECK(a.alpha.data()[i] == doctest::Approx(b.alpha.data()[i]).epsilon(1e-12));
}

TEST_CASE("cubemap sampling: constant map and texel round trip") {
    Cubemap cm(8, 0.25);
    auto gen = oracle::rng(5);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        Eigen::Vector3d d(uni(gen), uni(gen), uni(gen));
        if (d.norm() < 1e-3) continue;
        const Eigen::Vector3d v = cm.sample(d.normalized());
        for (int k = 0; k < 3; ++k) CHECK(v[k] == doctest::Approx(0.25).epsilon(1e-12));
    }
    for (int f = 0; f < 6; ++f)
        for (int t = 0; t < 8; t += 3)
            for (int s = 0; s < 8; s += 3) {
                const Eigen::Vector3d dir = cm.texel_direction(f, t, s);
                int face;
                double ss, tt;
                Cubemap::direction_to_face(dir, &face, &ss, &tt);
                CHECK(face == f);
                CHECK(ss * 8 - 0.5 == doctest::Approx(s).epsilon(1e-9));
                CHECK(tt * 8 - 0.5 == doctest::Approx(t).epsilon(1e-9));
            }
}

TEST_CASE("shade_specular mirrors the ray about the normal") {
    Camera cam;
    cam.width = cam.height = 9;
    cam.fx = cam.fy = 12.0;
    cam.cx = cam.cy = 4.0;

    RenderBuffers b;
    b.allocate(9, 9);
    b.alpha.fill(1.0);
    const Eigen::Vector3d rd = cam.pixel_ray_world(4, 4);
    for (int k = 0; k < 3; ++k) b.normal.at(4, 4, k) = -rd[k]; // head-on

    Cubemap cm(16, 0.0);
    // paint the face that looks back toward the camera (-z here)
    for (int t = 0; t < 16; ++t)
        for (int s = 0; s < 16; ++s) cm.at(5, t, s, 1) = 2.0;
    shade_specular(cam, cm, seq_opts(), &b);
    CHECK(b.spec_valid.at(4, 4) == 1.0);
    CHECK(b.specular.at(4, 4, 1) == doctest::Approx(2.0).epsilon(1e-9));

    auto gen = oracle::rng(19);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector3d n(uni(gen), uni(gen), uni(gen));
        if (n.norm() < 1e-2) continue;
        n.normalize();
        const Eigen::Vector3d r = rd - 2.0 * rd.dot(n) * n;
        CHECK(r.norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(r.dot(n) == doctest::Approx(-rd.dot(n)).epsilon(1e-9));
    }
}

TEST_CASE("shade_specular matches a scalar reflect-and-sample oracle") {
    Camera cam;
    cam.width = cam.height = 12;
    cam.fx = cam.fy = 16.0;
    cam.cx = cam.cy = 5.5;

    Cubemap cm(16, 0.0);
    auto gen = oracle::rng(31);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (double& v : cm.data()) v = uni(gen);

    RenderBuffers b;
    b.allocate(12, 12);
    b.alpha.fill(1.0);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
            Eigen::Vector3d n(uni(gen) - 0.5, uni(gen) - 0.5, -(0.5 + uni(gen)));
            n.normalize();
            for (int k = 0; k < 3; ++k) b.normal.at(y, x, k) = 0.8 * n[k];
        }
    shade_specular(cam, cm, seq_opts(), &b);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) {
            Eigen::Vector3d n(b.normal.at(y, x, 0), b.normal.at(y, x, 1), b.normal.at(y, x, 2));
            n.normalize();
            const Eigen::Vector3d rd = cam.pixel_ray_world(x, y);
            const Eigen::Vector3d expect = cm.sample(rd - 2.0 * rd.dot(n) * n);
            for (int k = 0; k < 3; ++k)
                CHECK(b.specular.at(y, x, k) == doctest::Approx(expect[k]).epsilon(1e-12));
        }
}

TEST_CASE("shade_specular skips low-alpha and degenerate-normal pixels") {
    Camera cam;
    cam.width = cam.height = 4;
    cam.fx = cam.fy = 6.0;
    cam.cx = cam.cy = 1.5;
    RenderBuffers b;
    b.allocate(4, 4);
    b.alpha.at(0, 0) = 1.0; // valid alpha but zero normal
    Cubemap cm(4, 1.0);
    shade_specular(cam, cm, seq_opts(), &b);
    for (size_t i = 0; i < b.spec_valid.size(); ++i) CHECK(b.spec_valid.data()[i] == 0.0);
}

TEST_CASE("render_stokes composes the pbrdf per pixel") {
    Camera cam;
    cam.width = cam.height = 5;
    cam.fx = cam.fy = 8.0;
    cam.cx = cam.cy = 2.0;
    RenderOptions opts = seq_opts();
    opts.eta = 1.5;

    RenderBuffers b;
    b.allocate(5, 5);
    auto gen = oracle::rng(29);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            b.alpha.at(y, x) = 1.0;
            b.spec_valid.at(y, x) = 1.0;
            Eigen::Vector3d n(uni(gen) - 0.5, uni(gen) - 0.5, -1.0);
            n.normalize();
            for (int k = 0; k < 3; ++k) {
                b.normal.at(y, x, k) = n[k];
                b.color.at(y, x, k) = uni(gen);
                b.specular.at(y, x, k) = uni(gen);
            }
        }
    render_stokes(cam, opts, &b);

    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 5; ++x) {
            Eigen::Vector3d n(b.normal.at(y, x, 0), b.normal.at(y, x, 1), b.normal.at(y, x, 2));
            n.normalize();
            const Eigen::Vector3d rd = cam.pixel_ray_world(x, y);
            const double cos_theta = std::clamp(-rd.dot(n), 0.0, 1.0);
            const FresnelTerms f = oracle::fresnel_angle_form(cos_theta, 1.5);
            const Eigen::Vector3d n_cam = cam.R * n;
            const double phi = std::atan2(n_cam.y(), n_cam.x());
            for (int k = 0; k < 3; ++k) {
                const double C = b.color.at(y, x, k), L = b.specular.at(y, x, k);
                CHECK(b.s0.at(y, x, k) ==
                      doctest::Approx(C * f.t_plus + L * f.r_plus).epsilon(1e-7));
                CHECK(b.s1.at(y, x, k) ==
                      doctest::Approx((C * f.t_minus + L * f.r_minus) * std::cos(2 * phi))
                          .epsilon(1e-7));
                CHECK(b.s2.at(y, x, k) ==
                      doctest::Approx(-(C * f.t_minus + L * f.r_minus) * std::sin(2 * phi))
                          .epsilon(1e-7));
            }
        }
}

TEST_CASE("render_stokes passthrough where the deferred stage was skipped") {
    Camera cam;
    cam.width = cam.height = 3;
    cam.fx = cam.fy = 5.0;
    cam.cx = cam.cy = 1.0;
    RenderBuffers b;
    b.allocate(3, 3);
    b.color.at(1, 1, 0) = 0.4;
    render_stokes(cam, seq_opts(), &b);
    CHECK(b.s0.at(1, 1, 0) == doctest::Approx(0.4));
    CHECK(b.s1.at(1, 1, 0) == 0.0);
    CHECK(b.s2.at(1, 1, 0) == 0.0);
}
