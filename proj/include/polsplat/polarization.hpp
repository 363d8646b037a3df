#pragma once

#include "polsplat/image.hpp"

namespace polsplat {

/// Linear polarization state; s3 is identically zero (no circular component).
struct StokesVector {
    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;

    double dolp() const {
        return s0 > 0.0 ? std::sqrt(s1 * s1 + s2 * s2) / s0 : 0.0;
    }
};

/// Four co-registered radiance rasters captured behind linear polarizers
/// at 0, 45, 90 and 135 degrees.
struct PolarizedQuadruple {
    Image i0, i45, i90, i135;

    bool consistent_shapes() const {
        return i0.same_shape(i45) && i0.same_shape(i90) && i0.same_shape(i135);
    }
};

/// Stokes rasters sharing one shape; channel count follows the inputs.
struct StokesImage {
    Image s0, s1, s2;
};

/// Dielectric Fresnel coefficients combined for unpolarized incident light:
///   r_plus  = (Rs + Rp)/2,  r_minus = (Rs - Rp)/2,
///   t_plus  = (Ts + Tp)/2,  t_minus = (Ts - Tp)/2  with Ts = 1 - Rs, Tp = 1 - Rp.
struct FresnelTerms {
    double t_plus = 1.0;
    double t_minus = 0.0;
    double r_plus = 0.0;
    double r_minus = 0.0;
    double eta = 1.5;
};

/// Derivatives of the four combined coefficients w.r.t. cos(theta).
struct FresnelDerivs {
    double dt_plus = 0.0;
    double dt_minus = 0.0;
    double dr_plus = 0.0;
    double dr_minus = 0.0;
};

/// s0 = (i0+i45+i90+i135)/2, s1 = i0-i90, s2 = i45-i135.
/// Throws std::invalid_argument on raster shape mismatch.
StokesImage stokes_from_quadruple(const PolarizedQuadruple& q);

/// Intensity of the quadruple channel at polarizer angle theta implied by a
/// Stokes vector: I_theta = (s0 + s1*cos(2 theta) + s2*sin(2 theta)) / 2.
inline double polarizer_intensity(const StokesVector& s, double theta) {
    return 0.5 * (s.s0 + s.s1 * std::cos(2.0 * theta) + s.s2 * std::sin(2.0 * theta));
}

/// Angle of polarization in [0, pi). The degenerate s1 = s2 = 0 pixel
/// reports phi = 0 with *valid = false.
double aop(double s1, double s2, bool* valid = nullptr);

/// Per-pixel AoP of a Stokes image reduced over channels (channel mean of s1, s2).
/// Pixels whose degree of linear polarization falls below dolp_min are
/// flagged invalid. Returns a 1-channel angle raster and fills `valid`.
Image aop_map(const StokesImage& s, Image* valid, double dolp_min = 1e-5);

/// Classical dielectric Fresnel terms at incidence angle acos(cos_theta),
/// air-side, eta > 1. Throws std::invalid_argument for eta <= 1.
/// cos_theta is clamped to [0, 1].
FresnelTerms fresnel(double cos_theta, double eta);

/// fresnel() plus analytic d/d(cos_theta) of every coefficient.
FresnelTerms fresnel_with_derivs(double cos_theta, double eta, FresnelDerivs* d);

/// Final Stokes formation for one color channel: diffuse radiance `diffuse`
/// transmits with (t_plus, t_minus), specular radiance `specular` reflects
/// with (r_plus, r_minus), both modulated by twice the normal azimuth phi_n.
StokesVector pbrdf_stokes(double diffuse, double specular, double phi_n,
                          const FresnelTerms& f);

} // namespace polsplat
