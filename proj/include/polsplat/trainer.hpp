#pragma once

#include "polsplat/eval.hpp"
#include "polsplat/loss.hpp"
#include "polsplat/synth.hpp"

#include <functional>
#include <string>

namespace polsplat {

/// Training schedule and rates. Learning rates follow common Gaussian
/// Surfels / 3DGS practice and stay configurable; the scene is assumed
/// normalized to a unit bounding sphere so the defaults transfer.
struct TrainConfig {
    int iterations = 15000;
    int warmup_iters = 1000; // polarization, TSC and deferred shading start here
    uint64_t seed = 0;
    int threads = 1;

    // adam
    double beta1 = 0.9;
    double beta2 = 0.999;
    double adam_eps = 1e-15;
    double lr_position = 1.6e-4;      // decays exponentially to lr_position_final
    double lr_position_final = 1.6e-6;
    double lr_scale = 5e-3;
    double lr_rotation = 1e-3;
    double lr_opacity = 5e-2;
    double lr_color = 2.5e-3;
    double lr_cubemap = 1e-2;

    // model
    int init_surfels = 10000;
    double init_opacity_logit = 0.1;
    double init_radius = 1.0; // uniform inside this sphere
    int cubemap_resolution = 64;
    double eta = 1.5; // overridden by the dataset when loaded from disk

    // losses
    LossWeights weights;
    bool enable_pol = true;
    bool enable_tsc = true;
    bool opacity_loss_negated = false;
    double alpha_threshold = 0.5;

    // tangent-space consistency
    double tau = 0.010;
    int tsc_stride = 4;
    int neighbor_views = 4;           // K nearest by camera center
    int depth_cache_refresh = 1;      // iterations between neighbor depth refreshes
    bool tsc_dolp_weighting = false;

    // densify / prune
    int densify_interval = 400;
    int densify_start = 500;
    int densify_until = 9000;
    double densify_grad_threshold = 1.5e-5;
    double prune_opacity = 0.005;
    double prune_scale_cap = 0.5;
    size_t max_surfels = 40000;
    size_t min_surfels = 100;

    int checkpoint_interval = 5000;
    int log_interval = 1;
};

struct TrainResult {
    SurfelCloud cloud;
    Cubemap cubemap;
    std::string log_csv; // iteration, l_rgb, l_pol, l_tsc, l_m, l_o, l_d, total
    int iterations_run = 0;
    bool aborted_non_finite = false;
};

/// Per-iteration observer; return value ignored.
using TrainCallback = std::function<void(int iteration, const LossComponents&, double total)>;

/// Uniform random initialization inside a sphere: isotropic scales from the
/// mean nearest-neighbor distance, gray color, fixed opacity logit.
SurfelCloud initialize_cloud(int count, double radius, double opacity_logit,
                             std::mt19937_64& rng);

/// Runs the optimization. `out_dir` may be empty (no checkpoints written).
TrainResult train(const LoadedDataset& dataset, const TrainConfig& config,
                  const std::string& out_dir = "", const TrainCallback& callback = nullptr);

/// Simplified adaptive density control: clones surfels whose accumulated
/// positional-gradient average exceeds the threshold, prunes low-opacity
/// and oversized ones. Returns the new count.
size_t densify_prune(SurfelCloud* cloud, std::vector<double>* grad_accum,
                     std::vector<int>* grad_counts, const TrainConfig& config,
                     std::mt19937_64& rng, bool* degenerate, SurfelGrads* adam_m = nullptr,
                     SurfelGrads* adam_v = nullptr);

} // namespace polsplat
