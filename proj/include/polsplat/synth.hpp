#pragma once

#include "polsplat/camera.hpp"
#include "polsplat/scene.hpp"

#include <string>
#include <vector>

namespace polsplat {

struct SynthParams {
    std::string scene = "sphere";        // sphere | two_spheres | torus
    std::string material = "reflective"; // diffuse | reflective | mixed
    int views = 12;
    int resolution = 128;
    double eta = 1.5;
    uint64_t seed = 0;
    double camera_distance = 3.0;
    double focal_per_pixel = 1.8;  // focal = this * resolution
    int quadrature_samples = 256;  // hemisphere directions for the diffuse term
    int cubemap_resolution = 64;   // baked reference environment
    bool write_quadruples = true;
};

/// One generated view with every ground-truth layer.
struct SynthView {
    Camera cam;
    StokesImage stokes;      // rgb
    PolarizedQuadruple quad; // rgb, synthesized from the Stokes rasters
    Image mask;              // 1ch
    Image gt_depth;          // 1ch, camera z
    Image gt_normal;         // 3ch, world
    Image gt_aop;            // 1ch, from the generated Stokes
    Image gt_aop_valid;      // 1ch
};

struct SynthDataset {
    SynthParams params;
    AnalyticScene scene;
    Material material;
    Environment env;
    std::vector<SynthView> views;
};

/// Positions `n` cameras on a Fibonacci spiral around the origin.
std::vector<Camera> fibonacci_cameras(int n, double distance, int resolution,
                                      double focal_per_pixel);

/// Renders one ground-truth view by exact ray intersection: cosine-weighted
/// environment quadrature for the diffuse radiance, mirror lookup for the
/// specular radiance, composed into Stokes vectors per color channel.
SynthView render_gt_view(const AnalyticScene& scene, const Material& material,
                         const Environment& env, const Camera& cam, double eta,
                         int quadrature_samples);

SynthDataset generate(const SynthParams& params);

/// Writes view_%03d/*.pfm layers, the baked environment cubemap, and
/// cameras.json (intrinsics, row-major rotation, center, scene block).
void save_dataset(const SynthDataset& ds, const std::string& dir);

/// Dataset as the trainer consumes it.
struct LoadedDataset {
    std::vector<View> views;
    double eta = 1.5;
    std::string scene_name;
    std::string material_name;
    AnalyticScene scene;
    Material material;
    Environment env;
    bool has_scene = false;
};

/// `from_quadruples` re-derives Stokes images from i0..i135 instead of
/// reading the exact s0/s1/s2 rasters.
LoadedDataset load_dataset(const std::string& dir, bool from_quadruples = false);

} // namespace polsplat
