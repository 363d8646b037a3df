#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <vector>

namespace polsplat {

/// Dense raster with row-major storage, row 0 at the top.
/// Channels are interleaved; all math runs in double precision.
class Image {
public:
    Image() = default;
    Image(int width, int height, int channels, double fill = 0.0)
        : width_(width), height_(height), channels_(channels),
          data_(static_cast<size_t>(width) * height * channels, fill) {}

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }
    size_t size() const { return data_.size(); }

    double& at(int y, int x, int c = 0) {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }
    double at(int y, int x, int c = 0) const {
        assert(x >= 0 && x < width_ && y >= 0 && y < height_ && c >= 0 && c < channels_);
        return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
    }

    double* row(int y) { return data_.data() + static_cast<size_t>(y) * width_ * channels_; }
    const double* row(int y) const { return data_.data() + static_cast<size_t>(y) * width_ * channels_; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    bool same_shape(const Image& other) const {
        return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
    }

    bool all_finite() const {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// Bilinear sample of channel c at continuous pixel coordinates
    /// (pixel centers at integer coordinates). Clamps to the border.
    double sample_bilinear(double x, double y, int c = 0) const {
        const double xc = std::clamp(x, 0.0, static_cast<double>(width_ - 1));
        const double yc = std::clamp(y, 0.0, static_cast<double>(height_ - 1));
        const int x0 = std::min(static_cast<int>(xc), width_ - 2 >= 0 ? width_ - 2 : 0);
        const int y0 = std::min(static_cast<int>(yc), height_ - 2 >= 0 ? height_ - 2 : 0);
        const int x1 = std::min(x0 + 1, width_ - 1);
        const int y1 = std::min(y0 + 1, height_ - 1);
        const double fx = xc - x0;
        const double fy = yc - y0;
        const double v00 = at(y0, x0, c), v10 = at(y0, x1, c);
        const double v01 = at(y1, x0, c), v11 = at(y1, x1, c);
        return (1 - fy) * ((1 - fx) * v00 + fx * v10) + fy * ((1 - fx) * v01 + fx * v11);
    }

private:
    int width_ = 0, height_ = 0, channels_ = 0;
    std::vector<double> data_;
};

/// Binary erosion of a 0/1 mask with a (2r+1)x(2r+1) square structuring element.
inline Image erode_mask(const Image& mask, int radius) {
    Image out(mask.width(), mask.height(), 1, 0.0);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            bool keep = true;
            for (int dy = -radius; dy <= radius && keep; ++dy) {
                for (int dx = -radius; dx <= radius && keep; ++dx) {
                    const int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= mask.height() || xx < 0 || xx >= mask.width() ||
                        mask.at(yy, xx) < 0.5)
                        keep = false;
                }
            }
            out.at(y, x) = keep ? 1.0 : 0.0;
        }
    }
    return out;
}

} // namespace polsplat
