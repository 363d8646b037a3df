#include "polsplat/ssim.hpp"

#include <array>
#include <stdexcept>

namespace polsplat {

namespace {

constexpr int kWindow = 11;
constexpr int kHalf = kWindow / 2;
constexpr double kSigma = 1.5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWindow> gaussian_kernel() {
    std::array<double, kWindow> k{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
        const double d = i - kHalf;
        k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// separable convolution with zero padding, one channel
void conv_gauss(const Image& in, int c, Image* out) {
    static const std::array<double, kWindow> kKernel = gaussian_kernel();
    const int w = in.width(), h = in.height();
    Image tmp(w, h, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -kHalf; k <= kHalf; ++k) {
                const int xx = x + k;
                if (xx >= 0 && xx < w) s += kKernel[k + kHalf] * in.at(y, xx, c);
            }
            tmp.at(y, x) = s;
        }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double s = 0.0;
            for (int k = -kHalf; k <= kHalf; ++k) {
                const int yy = y + k;
                if (yy >= 0 && yy < h) s += kKernel[k + kHalf] * tmp.at(yy, x);
            }
            out->at(y, x) = s;
        }
}

} // namespace

double ssim(const Image& pred, const Image& gt, const Image& mask, Image* dpred) {
    if (!pred.same_shape(gt)) throw std::invalid_argument("ssim: shape mismatch");
    const int w = pred.width(), h = pred.height(), ch = pred.channels();

    size_t count = 0;
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (mask.empty() || mask.at(y, x) >= 0.5) ++count;
    if (count == 0) return 1.0;

    if (dpred) {
        *dpred = Image(w, h, ch, 0.0);
    }

    Image mu_x(w, h, 1), mu_y(w, h, 1), e_xx(w, h, 1), e_yy(w, h, 1), e_xy(w, h, 1);
    Image xx(w, h, 1), yy(w, h, 1), xy(w, h, 1), xs(w, h, 1), ys(w, h, 1);
    Image pmu(w, h, 1), pexx(w, h, 1), pexy(w, h, 1); // partial maps for the adjoint

    double total = 0.0;
    for (int c = 0; c < ch; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double a = pred.at(y, x, c), b = gt.at(y, x, c);
                xs.at(y, x) = a;
                ys.at(y, x) = b;
                xx.at(y, x) = a * a;
                yy.at(y, x) = b * b;
                xy.at(y, x) = a * b;
            }
        conv_gauss(xs, 0, &mu_x);
        conv_gauss(ys, 0, &mu_y);
        conv_gauss(xx, 0, &e_xx);
        conv_gauss(yy, 0, &e_yy);
        conv_gauss(xy, 0, &e_xy);

        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const bool counted = mask.empty() || mask.at(y, x) >= 0.5;
                if (!counted) {
                    if (dpred) {
                        pmu.at(y, x) = 0.0;
                        pexx.at(y, x) = 0.0;
                        pexy.at(y, x) = 0.0;
                    }
                    continue;
                }
                const double mx = mu_x.at(y, x), my = mu_y.at(y, x);
                const double sxx = e_xx.at(y, x) - mx * mx;
                const double syy = e_yy.at(y, x) - my * my;
                const double sxy = e_xy.at(y, x) - mx * my;
                const double a1 = 2.0 * mx * my + kC1;
                const double a2 = 2.0 * sxy + kC2;
                const double b1 = mx * mx + my * my + kC1;
                const double b2 = sxx + syy + kC2;
                const double s = (a1 * a2) / (b1 * b2);
                total += s;
                if (dpred) {
                    // dS w.r.t. this pixel's local statistics (mu_x, Exx, Exy)
                    pexy.at(y, x) = 2.0 * a1 / (b1 * b2);
                    pexx.at(y, x) = -s / b2;
                    pmu.at(y, x) = (2.0 * my * a2 - 2.0 * my * a1) / (b1 * b2) -
                                   s * (2.0 * mx / b1 - 2.0 * mx / b2);
                }
            }

        if (dpred) {
            // adjoint of the convolutions: correlate each partial map with the
            // (symmetric) window, then chain through x, x^2 and x*y
            Image g_mu(w, h, 1), g_exx(w, h, 1), g_exy(w, h, 1);
            conv_gauss(pmu, 0, &g_mu);
            conv_gauss(pexx, 0, &g_exx);
            conv_gauss(pexy, 0, &g_exy);
            const double scale = 1.0 / (static_cast<double>(count) * ch);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double a = pred.at(y, x, c), b = gt.at(y, x, c);
                    dpred->at(y, x, c) =
                        scale * (g_mu.at(y, x) + 2.0 * a * g_exx.at(y, x) + b * g_exy.at(y, x));
                }
        }
    }
    return total / (static_cast<double>(count) * ch);
}

} // namespace polsplat
