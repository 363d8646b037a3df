#pragma once

#include "polsplat/image.hpp"

#include <Eigen/Dense>
#include <array>
#include <string>
#include <vector>

namespace polsplat {

/// Learnable environment radiance on six square faces, ordered
/// px, nx, py, ny, pz, nz. Bilinear sampling within a face; at face edges
/// the nearest face wins (no seam filtering). Texels are rgb radiance.
class Cubemap {
public:
    static constexpr std::array<const char*, 6> kFaceNames = {"px", "nx", "py", "ny", "pz", "nz"};

    Cubemap() = default;
    explicit Cubemap(int resolution, double fill = 0.0)
        : res_(resolution), data_(static_cast<size_t>(6) * resolution * resolution * 3, fill) {}

    int resolution() const { return res_; }
    size_t texel_count() const { return data_.size(); }
    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    double& at(int face, int ty, int tx, int c) {
        return data_[((static_cast<size_t>(face) * res_ + ty) * res_ + tx) * 3 + c];
    }
    double at(int face, int ty, int tx, int c) const {
        return data_[((static_cast<size_t>(face) * res_ + ty) * res_ + tx) * 3 + c];
    }

    /// Face index and in-face coordinates (s, t) in [0, 1] for a direction.
    static void direction_to_face(const Eigen::Vector3d& dir, int* face, double* s, double* t);

    /// Center direction of a texel (unit length); inverse of the face mapping.
    Eigen::Vector3d texel_direction(int face, int ty, int tx) const;

    Eigen::Vector3d sample(const Eigen::Vector3d& dir) const;

    /// Adjoint of sample(): scatters dL/dvalue into dtexels (flat layout of
    /// data()) and accumulates dL/ddir. Either output may be null.
    void sample_backward(const Eigen::Vector3d& dir, const Eigen::Vector3d& dvalue,
                         std::vector<double>* dtexels, Eigen::Vector3d* ddir) const;

    void clamp_nonnegative() {
        for (double& v : data_) v = std::max(v, 0.0);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    Image face_image(int face) const;
    void set_face(int face, const Image& img);

    void save(const std::string& dir_path) const;  // six PFM files px..nz
    static Cubemap load(const std::string& dir_path);

private:
    int res_ = 0;
    std::vector<double> data_;
};

} // namespace polsplat
