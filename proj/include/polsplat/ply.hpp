#pragma once

#include "polsplat/surfel.hpp"

#include <string>

namespace polsplat {

/// ASCII PLY with properties x,y,z, nx,ny,nz (derived normal), opacity
/// (activated, in (0,1)), scale_0, scale_1 (lengths), rot_0..rot_3,
/// f_dc_0..f_dc_2.
void save_surfels_ply(const std::string& path, const SurfelCloud& cloud);
SurfelCloud load_surfels_ply(const std::string& path);

} // namespace polsplat
