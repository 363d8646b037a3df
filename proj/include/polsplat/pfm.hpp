#pragma once

#include "polsplat/image.hpp"

#include <string>

namespace polsplat {

/// Portable float map I/O.
/// Format: "PF\n" (3 channels) or "Pf\n" (1 channel), "<width> <height>\n",
/// scale line "-1.0\n" (negative = little-endian), then 32-bit float rows
/// stored bottom-to-top.
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

} // namespace polsplat
