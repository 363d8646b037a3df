#include "polsplat/scene.hpp"

#include <stdexcept>

namespace polsplat {

Cubemap Environment::bake(int resolution) const {
    Cubemap cm(resolution);
    for (int f = 0; f < 6; ++f)
        for (int ty = 0; ty < resolution; ++ty)
            for (int tx = 0; tx < resolution; ++tx) {
                const Eigen::Vector3d r = radiance(cm.texel_direction(f, ty, tx));
                for (int c = 0; c < 3; ++c) cm.at(f, ty, tx, c) = r[c];
            }
    return cm;
}

Environment Environment::default_three_lobes() {
    Environment env;
    env.ambient = Eigen::Vector3d(0.10, 0.10, 0.12);
    env.lobes = {
        {Eigen::Vector3d(0.5, -0.6, 0.62).normalized(), Eigen::Vector3d(1.6, 1.4, 1.1), 10.0},
        {Eigen::Vector3d(-0.7, 0.3, 0.65).normalized(), Eigen::Vector3d(0.7, 0.9, 1.3), 6.0},
        {Eigen::Vector3d(0.1, 0.8, -0.59).normalized(), Eigen::Vector3d(0.9, 0.6, 0.5), 4.0},
    };
    return env;
}

double AnalyticScene::sdf(const Eigen::Vector3d& p) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& s : spheres) d = std::min(d, (p - s.center).norm() - s.radius);
    for (const auto& t : tori) {
        const Eigen::Vector3d q = p - t.center;
        const double qxy = std::hypot(q.x(), q.y());
        d = std::min(d, std::hypot(qxy - t.major, q.z()) - t.minor);
    }
    return d;
}

namespace {

bool intersect_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                      const AnalyticScene::Sphere& s, double t_min, double t_max, double* t_hit) {
    const Eigen::Vector3d oc = o - s.center;
    const double b = oc.dot(d);
    const double c = oc.squaredNorm() - s.radius * s.radius;
    const double disc = b * b - c;
    if (disc < 0.0) return false;
    const double sq = std::sqrt(disc);
    double t = -b - sq;
    if (t <= t_min) t = -b + sq;
    if (t <= t_min || t >= t_max) return false;
    *t_hit = t;
    return true;
}

} // namespace

bool AnalyticScene::intersect(const Eigen::Vector3d& origin, const Eigen::Vector3d& dir,
                              double t_min, double t_max, double* t_hit,
                              Eigen::Vector3d* normal) const {
    double best = t_max;
    bool found = false;
    Eigen::Vector3d n = Eigen::Vector3d::UnitZ();

    for (const auto& s : spheres) {
        double t;
        if (intersect_sphere(origin, dir, s, t_min, best, &t)) {
            best = t;
            n = (origin + t * dir - s.center).normalized();
            found = true;
        }
    }

    if (!tori.empty()) {
        // sphere-trace the torus part of the SDF
        auto torus_sdf = [this](const Eigen::Vector3d& p) {
            double d = std::numeric_limits<double>::infinity();
            for (const auto& t : tori) {
                const Eigen::Vector3d q = p - t.center;
                const double qxy = std::hypot(q.x(), q.y());
                d = std::min(d, std::hypot(qxy - t.major, q.z()) - t.minor);
            }
            return d;
        };
        double t = std::max(t_min, 1e-9);
        constexpr double kHit = 1e-9;
        for (int step = 0; step < 512 && t < best; ++step) {
            const Eigen::Vector3d p = origin + t * dir;
            const double d = torus_sdf(p);
            if (d < kHit) {
                best = t;
                const double h = 1e-6;
                n = Eigen::Vector3d(
                        torus_sdf(p + Eigen::Vector3d(h, 0, 0)) - torus_sdf(p - Eigen::Vector3d(h, 0, 0)),
                        torus_sdf(p + Eigen::Vector3d(0, h, 0)) - torus_sdf(p - Eigen::Vector3d(0, h, 0)),
                        torus_sdf(p + Eigen::Vector3d(0, 0, h)) - torus_sdf(p - Eigen::Vector3d(0, 0, h)))
                        .normalized();
                found = true;
                break;
            }
            t += std::max(d, 1e-7);
        }
    }

    if (!found) return false;
    if (t_hit) *t_hit = best;
    if (normal) *normal = n;
    return true;
}

double AnalyticScene::bounding_radius() const {
    double r = 0.0;
    for (const auto& s : spheres) r = std::max(r, s.center.norm() + s.radius);
    for (const auto& t : tori) r = std::max(r, t.center.norm() + t.major + t.minor);
    return r;
}

void AnalyticScene::sample_surface(size_t n, std::mt19937_64& rng,
                                   std::vector<Eigen::Vector3d>* points,
                                   std::vector<Eigen::Vector3d>* normals) const {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);

    // area-proportional choice among primitives
    std::vector<double> areas;
    for (const auto& s : spheres) areas.push_back(4.0 * M_PI * s.radius * s.radius);
    for (const auto& t : tori) areas.push_back(4.0 * M_PI * M_PI * t.major * t.minor);
    double total = 0.0;
    for (double a : areas) total += a;

    points->clear();
    points->reserve(n);
    if (normals) {
        normals->clear();
        normals->reserve(n);
    }
    while (points->size() < n) {
        double pick = uni(rng) * total;
        size_t prim = 0;
        while (prim + 1 < areas.size() && pick > areas[prim]) {
            pick -= areas[prim];
            ++prim;
        }
        Eigen::Vector3d p, nrm;
        if (prim < spheres.size()) {
            const auto& s = spheres[prim];
            Eigen::Vector3d d(gauss(rng), gauss(rng), gauss(rng));
            d.normalize();
            p = s.center + s.radius * d;
            nrm = d;
        } else {
            const auto& t = tori[prim - spheres.size()];
            // rejection on the minor angle keeps the sampling uniform in area
            const double u = uni(rng) * 2.0 * M_PI;
            const double v = uni(rng) * 2.0 * M_PI;
            const double accept = (t.major + t.minor * std::cos(v)) / (t.major + t.minor);
            if (uni(rng) > accept) continue;
            const Eigen::Vector3d ring(std::cos(u), std::sin(u), 0.0);
            p = t.center + (t.major + t.minor * std::cos(v)) * ring +
                Eigen::Vector3d(0, 0, t.minor * std::sin(v));
            nrm = (std::cos(v) * ring + Eigen::Vector3d(0, 0, std::sin(v))).normalized();
        }
        // skip points buried inside another primitive (union surface only)
        if (sdf(p) < -1e-9) continue;
        points->push_back(p);
        if (normals) normals->push_back(nrm);
    }
}

AnalyticScene AnalyticScene::make(const std::string& name) {
    AnalyticScene scene;
    if (name == "sphere") {
        scene.spheres = {{Eigen::Vector3d::Zero(), 0.65}};
    } else if (name == "two_spheres") {
        scene.spheres = {{Eigen::Vector3d(-0.28, 0.0, 0.0), 0.42},
                         {Eigen::Vector3d(0.34, 0.08, 0.12), 0.30}};
    } else if (name == "torus") {
        scene.tori = {{Eigen::Vector3d::Zero(), 0.48, 0.18}};
    } else {
        throw std::invalid_argument("unknown scene '" + name + "'");
    }
    return scene;
}

Material Material::preset(const std::string& name) {
    Material m;
    if (name == "diffuse") {
        m.diffuse_scale = 1.0;
        m.specular_scale = 0.05;
        m.texture_amount = 0.35;
    } else if (name == "reflective") {
        m.albedo = Eigen::Vector3d(0.30, 0.30, 0.32);
        m.diffuse_scale = 0.55;
        m.specular_scale = 0.9;
        m.texture_amount = 0.12;
    } else if (name == "mixed") {
        m.diffuse_scale = 0.8;
        m.specular_scale = 0.45;
        m.texture_amount = 0.25;
    } else {
        throw std::invalid_argument("unknown material '" + name + "'");
    }
    return m;
}

} // namespace polsplat
