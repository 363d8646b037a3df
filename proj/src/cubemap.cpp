#include "polsplat/cubemap.hpp"
#include "polsplat/pfm.hpp"

#include <filesystem>
#include <stdexcept>

namespace polsplat {

namespace {

// face -> (major axis, major sign, s axis, s sign, t axis, t sign)
struct FaceSpec {
    int axis; double sign; int s_axis; double s_sign; int t_axis; double t_sign;
};
constexpr FaceSpec kFaces[6] = {
    {0, +1.0, 2, -1.0, 1, -1.0}, // px
    {0, -1.0, 2, +1.0, 1, -1.0}, // nx
    {1, +1.0, 0, +1.0, 2, +1.0}, // py
    {1, -1.0, 0, +1.0, 2, -1.0}, // ny
    {2, +1.0, 0, +1.0, 1, -1.0}, // pz
    {2, -1.0, 0, -1.0, 1, -1.0}, // nz
};

int major_face(const Eigen::Vector3d& d) {
    const double ax = std::abs(d.x()), ay = std::abs(d.y()), az = std::abs(d.z());
    if (ax >= ay && ax >= az) return d.x() >= 0 ? 0 : 1;
    if (ay >= az) return d.y() >= 0 ? 2 : 3;
    return d.z() >= 0 ? 4 : 5;
}

struct Taps {
    int x0, x1, y0, y1;
    double fx, fy;
};

Taps bilinear_taps(double s, double t, int res) {
    Taps taps;
    const double px = std::clamp(s * res - 0.5, 0.0, res - 1.0);
    const double py = std::clamp(t * res - 0.5, 0.0, res - 1.0);
    taps.x0 = std::min(static_cast<int>(px), res - 1);
    taps.y0 = std::min(static_cast<int>(py), res - 1);
    taps.x1 = std::min(taps.x0 + 1, res - 1);
    taps.y1 = std::min(taps.y0 + 1, res - 1);
    taps.fx = px - taps.x0;
    taps.fy = py - taps.y0;
    return taps;
}

} // namespace

void Cubemap::direction_to_face(const Eigen::Vector3d& dir, int* face, double* s, double* t) {
    *face = major_face(dir);
    const FaceSpec& f = kFaces[*face];
    const double ma = f.sign * dir[f.axis];
    const double sc = f.s_sign * dir[f.s_axis];
    const double tc = f.t_sign * dir[f.t_axis];
    *s = 0.5 * (sc / ma + 1.0);
    *t = 0.5 * (tc / ma + 1.0);
}

Eigen::Vector3d Cubemap::texel_direction(int face, int ty, int tx) const {
    const FaceSpec& f = kFaces[face];
    const double s = (tx + 0.5) / res_;
    const double t = (ty + 0.5) / res_;
    Eigen::Vector3d d;
    d[f.axis] = f.sign;
    d[f.s_axis] = f.s_sign * (2.0 * s - 1.0);
    d[f.t_axis] = f.t_sign * (2.0 * t - 1.0);
    return d.normalized();
}

Eigen::Vector3d Cubemap::sample(const Eigen::Vector3d& dir) const {
    int face;
    double s, t;
    direction_to_face(dir, &face, &s, &t);
    const Taps w = bilinear_taps(s, t, res_);
    Eigen::Vector3d out;
    for (int c = 0; c < 3; ++c) {
        const double v00 = at(face, w.y0, w.x0, c), v10 = at(face, w.y0, w.x1, c);
        const double v01 = at(face, w.y1, w.x0, c), v11 = at(face, w.y1, w.x1, c);
        out[c] = (1 - w.fy) * ((1 - w.fx) * v00 + w.fx * v10) +
                 w.fy * ((1 - w.fx) * v01 + w.fx * v11);
    }
    return out;
}

void Cubemap::sample_backward(const Eigen::Vector3d& dir, const Eigen::Vector3d& dvalue,
                              std::vector<double>* dtexels, Eigen::Vector3d* ddir) const {
    int face;
    double s, t;
    direction_to_face(dir, &face, &s, &t);
    const Taps w = bilinear_taps(s, t, res_);

    auto idx = [&](int ty, int tx, int c) {
        return ((static_cast<size_t>(face) * res_ + ty) * res_ + tx) * 3 + c;
    };

    double dfx = 0.0, dfy = 0.0;
    for (int c = 0; c < 3; ++c) {
        const double g = dvalue[c];
        if (dtexels) {
            (*dtexels)[idx(w.y0, w.x0, c)] += g * (1 - w.fy) * (1 - w.fx);
            (*dtexels)[idx(w.y0, w.x1, c)] += g * (1 - w.fy) * w.fx;
            (*dtexels)[idx(w.y1, w.x0, c)] += g * w.fy * (1 - w.fx);
            (*dtexels)[idx(w.y1, w.x1, c)] += g * w.fy * w.fx;
        }
        if (ddir) {
            const double v00 = at(face, w.y0, w.x0, c), v10 = at(face, w.y0, w.x1, c);
            const double v01 = at(face, w.y1, w.x0, c), v11 = at(face, w.y1, w.x1, c);
            dfx += g * ((1 - w.fy) * (v10 - v00) + w.fy * (v11 - v01));
            dfy += g * ((1 - w.fx) * (v01 - v00) + w.fx * (v11 - v10));
        }
    }

    if (ddir) {
        // interior taps move with (s, t); clamped taps are flat
        const double px = s * res_ - 0.5, py = t * res_ - 0.5;
        const bool sx_live = px > 0.0 && px < res_ - 1.0;
        const bool sy_live = py > 0.0 && py < res_ - 1.0;
        const double ds = sx_live ? dfx * res_ : 0.0;
        const double dt = sy_live ? dfy * res_ : 0.0;

        const FaceSpec& f = kFaces[face];
        const double ma = f.sign * dir[f.axis];
        const double sc = f.s_sign * dir[f.s_axis];
        const double tc = f.t_sign * dir[f.t_axis];
        // s = (sc/ma + 1)/2, t = (tc/ma + 1)/2
        Eigen::Vector3d g = Eigen::Vector3d::Zero();
        g[f.s_axis] += ds * 0.5 / ma * f.s_sign;
        g[f.t_axis] += dt * 0.5 / ma * f.t_sign;
        g[f.axis] += (-ds * 0.5 * sc / (ma * ma) - dt * 0.5 * tc / (ma * ma)) * f.sign;
        *ddir += g;
    }
}

Image Cubemap::face_image(int face) const {
    Image img(res_, res_, 3);
    for (int y = 0; y < res_; ++y)
        for (int x = 0; x < res_; ++x)
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = at(face, y, x, c);
    return img;
}

void Cubemap::set_face(int face, const Image& img) {
    if (img.width() != res_ || img.height() != res_ || img.channels() != 3)
        throw std::runtime_error("Cubemap::set_face: face shape mismatch");
    for (int y = 0; y < res_; ++y)
        for (int x = 0; x < res_; ++x)
            for (int c = 0; c < 3; ++c) at(face, y, x, c) = img.at(y, x, c);
}

void Cubemap::save(const std::string& dir_path) const {
    std::filesystem::create_directories(dir_path);
    for (int f = 0; f < 6; ++f)
        write_pfm(dir_path + "/" + kFaceNames[f] + ".pfm", face_image(f));
}

Cubemap Cubemap::load(const std::string& dir_path) {
    Image first = read_pfm(dir_path + "/px.pfm");
    Cubemap cm(first.width());
    cm.set_face(0, first);
    for (int f = 1; f < 6; ++f)
        cm.set_face(f, read_pfm(dir_path + "/" + std::string(kFaceNames[f]) + ".pfm"));
    return cm;
}

} // namespace polsplat
