#pragma once

#include "polsplat/render.hpp"
#include "polsplat/synth.hpp"

#include <vector>

namespace polsplat {

/// Mean angular error in degrees between predicted and ground-truth normal
/// rasters over the (eroded) mask. Both inputs are renormalized per pixel;
/// a vanishing predicted normal counts as 90 degrees.
double normal_mae_deg(const Image& pred_normal, const Image& gt_normal, const Image& mask);

/// Symmetric mean nearest-neighbor distance between two point sets, in
/// milli-units (scene units x 1000). Grid accelerated; each side is
/// subsampled to at most `max_samples` points.
double chamfer_milli(const std::vector<Eigen::Vector3d>& a, const std::vector<Eigen::Vector3d>& b,
                     size_t max_samples = 50000);

struct EvalResult {
    double mae_deg = 0.0;
    double chamfer_milli = 0.0;
};

struct EvalOptions {
    int erode_radius = 2;
    double alpha_threshold = 0.5;
    int backproject_stride = 1;
    size_t chamfer_samples = 50000;
    int threads = 1;
    uint64_t seed = 1234;
};

/// Renders the cloud into every dataset view: normal MAE against gt_normal
/// over the eroded mask, Chamfer between back-projected predicted depth and
/// analytic surface samples (requires the dataset's scene block).
EvalResult evaluate_cloud(const SurfelCloud& cloud, const LoadedDataset& ds,
                          const EvalOptions& opts = {});

} // namespace polsplat
