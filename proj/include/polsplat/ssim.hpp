#pragma once

#include "polsplat/image.hpp"

namespace polsplat {

/// 11x11 Gaussian-window SSIM (sigma 1.5, C1 = 0.01^2, C2 = 0.03^2, zero
/// padding) averaged over in-mask pixels and channels. When dpred is given
/// it receives dSSIM/dpred (same shape as pred).
double ssim(const Image& pred, const Image& gt, const Image& mask, Image* dpred = nullptr);

} // namespace polsplat
