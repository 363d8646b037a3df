#pragma once

#include "polsplat/cubemap.hpp"

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

namespace polsplat {

/// Procedural low-frequency environment: a few directional cosine lobes
/// plus an ambient floor. Evaluable in closed form and bakeable to a
/// cubemap so a recovered environment has a known target.
struct Environment {
    struct Lobe {
        Eigen::Vector3d dir;      // unit
        Eigen::Vector3d radiance; // rgb amplitude
        double exponent = 8.0;
    };
    std::vector<Lobe> lobes;
    Eigen::Vector3d ambient = Eigen::Vector3d::Constant(0.1);

    Eigen::Vector3d radiance(const Eigen::Vector3d& dir) const {
        Eigen::Vector3d out = ambient;
        for (const auto& l : lobes) {
            const double d = std::max(0.0, dir.dot(l.dir));
            out += l.radiance * std::pow(d, l.exponent);
        }
        return out;
    }

    Cubemap bake(int resolution) const;

    static Environment default_three_lobes();
};

/// Implicit scene made of spheres and z-axis tori; analytic normals,
/// closed-form or sphere-traced intersections, and surface sampling.
struct AnalyticScene {
    struct Sphere {
        Eigen::Vector3d center;
        double radius;
    };
    struct Torus {
        Eigen::Vector3d center; // axis along +z
        double major;
        double minor;
    };
    std::vector<Sphere> spheres;
    std::vector<Torus> tori;

    double sdf(const Eigen::Vector3d& p) const;

    /// First intersection along origin + t*dir for t in (t_min, t_max).
    /// Normal is the outward surface normal at the hit.
    bool intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir, double t_min,
                   double t_max, double* t_hit, Eigen::Vector3d* normal) const;

    /// Radius of a bounding sphere centered at the origin.
    double bounding_radius() const;

    /// Uniform-ish surface samples with outward normals.
    void sample_surface(size_t n, std::mt19937_64& rng, std::vector<Eigen::Vector3d>* points,
                        std::vector<Eigen::Vector3d>* normals = nullptr) const;

    static AnalyticScene make(const std::string& name);
};

/// Scene reflectance controls. The diffuse albedo carries a low-frequency
/// procedural pattern so RGB supervision is not fully degenerate.
struct Material {
    Eigen::Vector3d albedo = Eigen::Vector3d(0.55, 0.5, 0.45);
    double texture_amount = 0.25; // 0 = untextured
    double texture_freq = 9.0;
    double diffuse_scale = 1.0;
    double specular_scale = 0.35;

    Eigen::Vector3d albedo_at(const Eigen::Vector3d& p) const {
        const double m = 1.0 - texture_amount * (0.5 + 0.5 * std::sin(texture_freq * p.x()) *
                                                           std::sin(texture_freq * p.y() + 1.3) *
                                                           std::sin(texture_freq * p.z() + 2.1));
        return albedo * m;
    }

    static Material preset(const std::string& name); // "diffuse" | "reflective" | "mixed"
};

} // namespace polsplat
