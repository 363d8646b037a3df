#include "polsplat/polarization.hpp"

#include <algorithm>
#include <stdexcept>

namespace polsplat {

StokesImage stokes_from_quadruple(const PolarizedQuadruple& q) {
    if (!q.consistent_shapes())
        throw std::invalid_argument("stokes_from_quadruple: raster shape mismatch");
    StokesImage out;
    const int w = q.i0.width(), h = q.i0.height(), c = q.i0.channels();
    out.s0 = Image(w, h, c);
    out.s1 = Image(w, h, c);
    out.s2 = Image(w, h, c);
    const size_t n = q.i0.size();
    for (size_t i = 0; i < n; ++i) {
        const double a = q.i0.data()[i], b = q.i45.data()[i];
        const double d = q.i90.data()[i], e = q.i135.data()[i];
        out.s0.data()[i] = 0.5 * (a + b + d + e);
        out.s1.data()[i] = a - d;
        out.s2.data()[i] = b - e;
    }
    return out;
}

double aop(double s1, double s2, bool* valid) {
    if (s1 == 0.0 && s2 == 0.0) {
        if (valid) *valid = false;
        return 0.0;
    }
    if (valid) *valid = true;
    double phi = 0.5 * std::atan2(s2, s1);
    if (phi < 0.0) phi += M_PI;
    if (phi >= M_PI) phi -= M_PI;
    return phi;
}

Image aop_map(const StokesImage& s, Image* valid, double dolp_min) {
    const int w = s.s0.width(), h = s.s0.height(), c = s.s0.channels();
    Image phi(w, h, 1);
    if (valid) *valid = Image(w, h, 1, 0.0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double s0 = 0.0, s1 = 0.0, s2 = 0.0;
            for (int k = 0; k < c; ++k) {
                s0 += s.s0.at(y, x, k);
                s1 += s.s1.at(y, x, k);
                s2 += s.s2.at(y, x, k);
            }
            s0 /= c; s1 /= c; s2 /= c;
            bool ok = false;
            phi.at(y, x) = aop(s1, s2, &ok);
            const double dolp = s0 > 0.0 ? std::sqrt(s1 * s1 + s2 * s2) / s0 : 0.0;
            if (valid) valid->at(y, x) = (ok && dolp >= dolp_min) ? 1.0 : 0.0;
        }
    }
    return phi;
}

FresnelTerms fresnel_with_derivs(double cos_theta, double eta, FresnelDerivs* d) {
    if (eta <= 1.0)
        throw std::invalid_argument("fresnel: eta must exceed 1 (dielectric, air side)");
    const double ci = std::clamp(cos_theta, 0.0, 1.0);
    const double sin2_t = (1.0 - ci * ci) / (eta * eta);
    const double ct = std::sqrt(std::max(1.0 - sin2_t, 0.0));
    // amplitude coefficients, air -> dielectric
    const double rs_den = ci + eta * ct;
    const double rp_den = eta * ci + ct;
    const double rs = (ci - eta * ct) / rs_den;
    const double rp = (eta * ci - ct) / rp_den;
    const double Rs = rs * rs;
    const double Rp = rp * rp;

    FresnelTerms f;
    f.eta = eta;
    f.r_plus = 0.5 * (Rs + Rp);
    f.r_minus = 0.5 * (Rs - Rp);
    f.t_plus = 1.0 - f.r_plus;
    f.t_minus = -f.r_minus;

    if (d) {
        const double dct = ct > 1e-12 ? ci / (eta * eta * ct) : 0.0;
        const double drs = ((1.0 - eta * dct) * rs_den - (ci - eta * ct) * (1.0 + eta * dct)) /
                           (rs_den * rs_den);
        const double drp = ((eta - dct) * rp_den - (eta * ci - ct) * (eta + dct)) /
                           (rp_den * rp_den);
        const double dRs = 2.0 * rs * drs;
        const double dRp = 2.0 * rp * drp;
        d->dr_plus = 0.5 * (dRs + dRp);
        d->dr_minus = 0.5 * (dRs - dRp);
        d->dt_plus = -d->dr_plus;
        d->dt_minus = -d->dr_minus;
        if (cos_theta < 0.0 || cos_theta > 1.0) *d = FresnelDerivs{}; // clamp active
    }
    return f;
}

FresnelTerms fresnel(double cos_theta, double eta) {
    return fresnel_with_derivs(cos_theta, eta, nullptr);
}

StokesVector pbrdf_stokes(double diffuse, double specular, double phi_n,
                          const FresnelTerms& f) {
    const double c2 = std::cos(2.0 * phi_n);
    const double s2 = std::sin(2.0 * phi_n);
    StokesVector s;
    s.s0 = diffuse * f.t_plus + specular * f.r_plus;
    s.s1 = (diffuse * f.t_minus + specular * f.r_minus) * c2;
    s.s2 = -(diffuse * f.t_minus + specular * f.r_minus) * s2;
    return s;
}

} // namespace polsplat
