#include "polsplat/eval.hpp"
#include "polsplat/visibility.hpp"

#include <random>
#include <unordered_map>

namespace polsplat {

double normal_mae_deg(const Image& pred_normal, const Image& gt_normal, const Image& mask) {
    double sum = 0.0;
    size_t count = 0;
    for (int y = 0; y < gt_normal.height(); ++y)
        for (int x = 0; x < gt_normal.width(); ++x) {
            if (!mask.empty() && mask.at(y, x) < 0.5) continue;
            Eigen::Vector3d g(gt_normal.at(y, x, 0), gt_normal.at(y, x, 1), gt_normal.at(y, x, 2));
            if (g.norm() < 1e-9) continue;
            g.normalize();
            Eigen::Vector3d p(pred_normal.at(y, x, 0), pred_normal.at(y, x, 1),
                              pred_normal.at(y, x, 2));
            double angle;
            if (p.norm() < 1e-9) {
                angle = M_PI / 2.0;
            } else {
                p.normalize();
                angle = std::acos(std::clamp(p.dot(g), -1.0, 1.0));
            }
            sum += angle;
            ++count;
        }
    return count == 0 ? 0.0 : sum / count * 180.0 / M_PI;
}

namespace {

struct PointGrid {
    double cell = 1.0;
    std::unordered_map<int64_t, std::vector<int>> cells;
    const std::vector<Eigen::Vector3d>* pts = nullptr;

    static int64_t key(int ix, int iy, int iz) {
        return (static_cast<int64_t>(ix) * 73856093) ^ (static_cast<int64_t>(iy) * 19349663) ^
               (static_cast<int64_t>(iz) * 83492791);
    }

    void build(const std::vector<Eigen::Vector3d>& p, double cell_size) {
        pts = &p;
        cell = cell_size;
        cells.clear();
        for (size_t i = 0; i < p.size(); ++i) {
            const int ix = static_cast<int>(std::floor(p[i].x() / cell));
            const int iy = static_cast<int>(std::floor(p[i].y() / cell));
            const int iz = static_cast<int>(std::floor(p[i].z() / cell));
            cells[key(ix, iy, iz)].push_back(static_cast<int>(i));
        }
    }

    double nearest_dist(const Eigen::Vector3d& q) const {
        const int qx = static_cast<int>(std::floor(q.x() / cell));
        const int qy = static_cast<int>(std::floor(q.y() / cell));
        const int qz = static_cast<int>(std::floor(q.z() / cell));
        double best = std::numeric_limits<double>::infinity();
        for (int ring = 0;; ++ring) {
            // once a candidate is found, one extra ring guarantees correctness
            bool any = false;
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                        const auto it = cells.find(key(qx + dx, qy + dy, qz + dz));
                        if (it == cells.end()) continue;
                        any = true;
                        for (int i : it->second)
                            best = std::min(best, ((*pts)[i] - q).norm());
                    }
            (void)any;
            if (std::isfinite(best) && best <= cell * std::max(0, ring - 1)) break;
            if (ring > 64) break; // empty set guard
        }
        return best;
    }
};

std::vector<Eigen::Vector3d> subsample(const std::vector<Eigen::Vector3d>& pts, size_t max_n,
                                       uint64_t seed) {
    if (pts.size() <= max_n) return pts;
    std::mt19937_64 rng(seed);
    std::vector<Eigen::Vector3d> out;
    out.reserve(max_n);
    std::sample(pts.begin(), pts.end(), std::back_inserter(out), max_n, rng);
    return out;
}

} // namespace

double chamfer_milli(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b,
                     size_t max_samples) {
    if (a.empty() || b.empty()) return std::numeric_limits<double>::quiet_NaN();
    const std::vector<Eigen::Vector3d> as = subsample(a, max_samples, 17);
    const std::vector<Eigen::Vector3d> bs = subsample(b, max_samples, 23);

    auto mean_nn = [](const std::vector<Eigen::Vector3d>& from,
                      const std::vector<Eigen::Vector3d>& to) {
        // cell size from the target's bounding box
        Eigen::Vector3d lo = to[0], hi = to[0];
        for (const auto& p : to) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        const double diag = (hi - lo).norm();
        const double cell = std::max(diag / 64.0, 1e-9);
        PointGrid grid;
        grid.build(to, cell);
        double sum = 0.0;
        for (const auto& q : from) sum += grid.nearest_dist(q);
        return sum / from.size();
    };

    return 1000.0 * 0.5 * (mean_nn(as, bs) + mean_nn(bs, as));
}

EvalResult evaluate_cloud(const SurfelCloud& cloud, const LoadedDataset& ds,
                          const EvalOptions& opts) {
    EvalResult result;
    RenderOptions ropts;
    ropts.threads = opts.threads;
    ropts.alpha_threshold = opts.alpha_threshold;
    ropts.eta = ds.eta;

    double mae_sum = 0.0;
    size_t mae_views = 0;
    std::vector<Eigen::Vector3d> pred_points;
    for (const View& view : ds.views) {
        RenderBuffers buffers;
        RenderCache cache;
        rasterize(cloud, view.cam, ropts, &buffers, &cache);

        if (!view.gt_normal.empty()) {
            const Image eroded = erode_mask(view.mask, opts.erode_radius);
            mae_sum += normal_mae_deg(buffers.normal, view.gt_normal, eroded);
            ++mae_views;
        }
        const PseudoSurfacePoints pts =
            backproject(buffers.depth, buffers.alpha, view.mask, view.cam,
                        opts.backproject_stride, opts.alpha_threshold);
        for (const auto& p : pts.points) pred_points.push_back(p.x);
    }
    result.mae_deg = mae_views > 0 ? mae_sum / mae_views : std::numeric_limits<double>::quiet_NaN();

    if (ds.has_scene) {
        std::mt19937_64 rng(opts.seed);
        std::vector<Eigen::Vector3d> gt_points;
        ds.scene.sample_surface(opts.chamfer_samples, rng, &gt_points);
        result.chamfer_milli = chamfer_milli(pred_points, gt_points, opts.chamfer_samples);
    } else {
        result.chamfer_milli = std::numeric_limits<double>::quiet_NaN();
    }
    return result;
}

} // namespace polsplat
