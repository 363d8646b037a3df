#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "oracles.hpp"
#include "polsplat/polarization.hpp"

#include <random>

using namespace polsplat;

TEST_CASE("stokes_from_quadruple trivial cases") {
    PolarizedQuadruple q{Image(2, 2, 1, 0.5), Image(2, 2, 1, 0.5), Image(2, 2, 1, 0.5),
                         Image(2, 2, 1, 0.5)};
    StokesImage s = stokes_from_quadruple(q);
    CHECK(s.s0.at(0, 0) == doctest::Approx(1.0));
    CHECK(s.s1.at(0, 0) == doctest::Approx(0.0));
    CHECK(s.s2.at(0, 0) == doctest::Approx(0.0));

    q.i0.fill(1.0);
    q.i90.fill(0.0);
    q.i45.fill(0.5);
    q.i135.fill(0.5);
    s = stokes_from_quadruple(q);
    CHECK(s.s0.at(1, 1) == doctest::Approx(1.0));
    CHECK(s.s1.at(1, 1) == doctest::Approx(1.0));
    CHECK(s.s2.at(1, 1) == doctest::Approx(0.0));
}

TEST_CASE("stokes_from_quadruple matches per-pixel recomputation") {
    std::mt19937_64 gen(7);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    PolarizedQuadruple q{Image(5, 4, 3), Image(5, 4, 3), Image(5, 4, 3), Image(5, 4, 3)};
    for (Image* img : {&q.i0, &q.i45, &q.i90, &q.i135})
        for (double& v : img->data()) v = uni(gen);
    const StokesImage s = stokes_from_quadruple(q);
    for (size_t i = 0; i < q.i0.size(); ++i) {
        const double a = q.i0.data()[i], b = q.i45.data()[i], c = q.i90.data()[i],
                     d = q.i135.data()[i];
        CHECK(s.s0.data()[i] == doctest::Approx(0.5 * (a + b + c + d)).epsilon(1e-12));
        CHECK(s.s1.data()[i] == doctest::Approx(a - c).epsilon(1e-12));
        CHECK(s.s2.data()[i] == doctest::Approx(b - d).epsilon(1e-12));
    }
}

TEST_CASE("stokes_from_quadruple rejects shape mismatch") {
    PolarizedQuadruple q{Image(2, 2, 1), Image(2, 2, 1), Image(3, 2, 1), Image(2, 2, 1)};
    CHECK_THROWS_AS(stokes_from_quadruple(q), std::invalid_argument);
}

TEST_CASE("aop reference angles and degenerate pixel") {
    bool valid = true;
    CHECK(aop(1.0, 0.0) == doctest::Approx(0.0));
    CHECK(aop(0.0, 1.0) == doctest::Approx(M_PI / 4));
    CHECK(aop(-1.0, 0.0) == doctest::Approx(M_PI / 2));
    CHECK(aop(0.0, 0.0, &valid) == 0.0);
    CHECK_FALSE(valid);
}

TEST_CASE("aop invariant under positive scaling") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> pos(0.1, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double s1 = uni(gen), s2 = uni(gen), k = pos(gen);
        if (s1 == 0 && s2 == 0) continue;
        CHECK(aop(k * s1, k * s2) == doctest::Approx(aop(s1, s2)).epsilon(1e-12));
    }
}

TEST_CASE("fresnel at normal incidence") {
    const FresnelTerms f = fresnel(1.0, 1.5);
    CHECK(f.r_plus == doctest::Approx(0.04).epsilon(1e-9));
    CHECK(f.r_minus == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(f.t_plus == doctest::Approx(0.96).epsilon(1e-9));
    CHECK(f.t_minus == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("fresnel at the Brewster angle") {
    const double cb = std::cos(std::atan(1.5));
    const FresnelTerms f = fresnel(cb, 1.5);
    CHECK(f.r_plus == doctest::Approx(f.r_minus).epsilon(1e-9)); // Rp = 0
    const FresnelTerms o = oracle::fresnel_angle_form(cb, 1.5);
    CHECK(f.r_plus == doctest::Approx(o.r_plus).epsilon(1e-9));
}

TEST_CASE("fresnel matches the angle-form oracle") {
    // frozen values computed from the angle-form formulas at cos=0.5, eta=1.5
    const FresnelTerms f = fresnel(0.5, 1.5);
    CHECK(f.r_plus == doctest::Approx(0.089186712802).epsilon(1e-9));
    CHECK(f.r_minus == doctest::Approx(0.087384775281).epsilon(1e-9));
    CHECK(f.t_plus == doctest::Approx(0.910813287198).epsilon(1e-9));
    CHECK(f.t_minus == doctest::Approx(-0.087384775281).epsilon(1e-9));

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> uni(0.02, 0.999);
    for (int i = 0; i < 100; ++i) {
        const double c = uni(gen);
        const FresnelTerms a = fresnel(c, 1.5);
        const FresnelTerms b = oracle::fresnel_angle_form(c, 1.5);
        CHECK(a.r_plus == doctest::Approx(b.r_plus).epsilon(1e-8));
        CHECK(a.r_minus == doctest::Approx(b.r_minus).epsilon(1e-8));
        CHECK(a.t_plus == doctest::Approx(b.t_plus).epsilon(1e-8));
        CHECK(a.t_minus == doctest::Approx(b.t_minus).epsilon(1e-8));
        CHECK(a.r_plus >= 0.0);
        CHECK(a.r_plus <= 1.0);
        CHECK(std::abs(a.r_minus) <= a.r_plus + 1e-12);
        CHECK(std::abs(a.t_minus) <= a.t_plus + 1e-12);
    }
}

TEST_CASE("fresnel rejects non-dielectric eta") {
    CHECK_THROWS_AS(fresnel(0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(fresnel(0.5, 0.8), std::invalid_argument);
}

TEST_CASE("fresnel derivatives match finite differences") {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> uni(0.05, 0.95);
    for (int i = 0; i < 50; ++i) {
        const double c = uni(gen);
        FresnelDerivs d;
        fresnel_with_derivs(c, 1.5, &d);
        const double h = 1e-6;
        const FresnelTerms fp = fresnel(c + h, 1.5);
        const FresnelTerms fm = fresnel(c - h, 1.5);
        CHECK(d.dr_plus == doctest::Approx((fp.r_plus - fm.r_plus) / (2 * h)).epsilon(1e-4));
        CHECK(d.dr_minus == doctest::Approx((fp.r_minus - fm.r_minus) / (2 * h)).epsilon(1e-4));
        CHECK(d.dt_plus == doctest::Approx((fp.t_plus - fm.t_plus) / (2 * h)).epsilon(1e-4));
        CHECK(d.dt_minus == doctest::Approx((fp.t_minus - fm.t_minus) / (2 * h)).epsilon(1e-4));
    }
}

TEST_CASE("pbrdf_stokes trivial lobes") {
    FresnelTerms f = fresnel(0.8, 1.5);
    SUBCASE("pure diffuse with t_minus forced to zero is unpolarized") {
        f.t_minus = 0.0;
        const StokesVector s = pbrdf_stokes(0.7, 0.0, 1.1, f);
        CHECK(s.s0 == doctest::Approx(0.7 * f.t_plus));
        CHECK(s.s1 == doctest::Approx(0.0));
        CHECK(s.s2 == doctest::Approx(0.0));
    }
    SUBCASE("pure specular at zero azimuth") {
        const StokesVector s = pbrdf_stokes(0.0, 0.9, 0.0, f);
        CHECK(s.s0 == doctest::Approx(0.9 * f.r_plus));
        CHECK(s.s1 == doctest::Approx(0.9 * f.r_minus));
        CHECK(s.s2 == doctest::Approx(0.0));
    }
}

TEST_CASE("pbrdf_stokes frozen oracle values") {
    const FresnelTerms f = fresnel(0.5, 1.5);
    // C = L_r = 1 at phi = pi/3: the minus terms cancel exactly (t- = -r-)
    StokesVector s = pbrdf_stokes(1.0, 1.0, M_PI / 3, f);
    CHECK(s.s0 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(s.s1 == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(s.s2 == doctest::Approx(0.0).epsilon(1e-9));
    // asymmetric lobes, frozen from a scalar re-evaluation
    s = pbrdf_stokes(0.3, 1.2, M_PI / 3, f);
    CHECK(s.s0 == doctest::Approx(0.380268041522).epsilon(1e-9));
    CHECK(s.s1 == doctest::Approx(-0.039323148876).epsilon(1e-9));
    CHECK(s.s2 == doctest::Approx(-0.068109691768).epsilon(1e-9));
}

TEST_CASE("pbrdf_stokes: single-lobe DoLP depends only on Fresnel terms") {
    const FresnelTerms f = fresnel(0.5, 1.5);
    std::mt19937_64 gen(13);
    std::uniform_real_distribution<double> uni(0.0, M_PI);
    for (int i = 0; i < 50; ++i) {
        const double phi = uni(gen);
        const StokesVector d = pbrdf_stokes(0.3, 0.0, phi, f);
        CHECK(std::hypot(d.s1, d.s2) == doctest::Approx(0.3 * std::abs(f.t_minus)).epsilon(1e-10));
        const StokesVector sp = pbrdf_stokes(0.0, 1.2, phi, f);
        CHECK(std::hypot(sp.s1, sp.s2) ==
              doctest::Approx(1.2 * std::abs(f.r_minus)).epsilon(1e-10));
    }
}

TEST_CASE("pbrdf_stokes invariant under phi -> phi + pi") {
    const FresnelTerms f = fresnel(0.6, 1.5);
    std::mt19937_64 gen(17);
    std::uniform_real_distribution<double> uni(0.0, M_PI);
    for (int i = 0; i < 50; ++i) {
        const double phi = uni(gen);
        const StokesVector a = pbrdf_stokes(0.4, 0.8, phi, f);
        const StokesVector b = pbrdf_stokes(0.4, 0.8, phi + M_PI, f);
        CHECK(a.s0 == doctest::Approx(b.s0).epsilon(1e-12));
        CHECK(a.s1 == doctest::Approx(b.s1).epsilon(1e-12));
        CHECK(a.s2 == doctest::Approx(b.s2).epsilon(1e-12));
    }
}

TEST_CASE("stokes round trip through polarizer intensities") {
    std::mt19937_64 gen(23);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        // physically consistent quadruple: i0 + i90 == i45 + i135
        const double s0 = uni(gen) + 0.2;
        const double dolp = uni(gen) * 0.9;
        const double phi = uni(gen) * M_PI;
        const double s1 = s0 * dolp * std::cos(2 * phi);
        const double s2 = s0 * dolp * std::sin(2 * phi);
        const StokesVector s{s0, s1, s2};
        PolarizedQuadruple q{Image(1, 1, 1), Image(1, 1, 1), Image(1, 1, 1), Image(1, 1, 1)};
        q.i0.at(0, 0) = polarizer_intensity(s, 0.0);
        q.i45.at(0, 0) = polarizer_intensity(s, M_PI / 4);
        q.i90.at(0, 0) = polarizer_intensity(s, M_PI / 2);
        q.i135.at(0, 0) = polarizer_intensity(s, 3 * M_PI / 4);
        CHECK(q.i0.at(0, 0) + q.i90.at(0, 0) ==
              doctest::Approx(q.i45.at(0, 0) + q.i135.at(0, 0)).epsilon(1e-12));
        const StokesImage back = stokes_from_quadruple(q);
        CHECK(back.s0.at(0, 0) == doctest::Approx(s0).epsilon(1e-12));
        CHECK(back.s1.at(0, 0) == doctest::Approx(s1).epsilon(1e-12));
        CHECK(back.s2.at(0, 0) == doctest::Approx(s2).epsilon(1e-12));
    }
}
