#pragma once

#include <cmath>
#include <vector>

#include "lact/core.hpp"
#include "lact/geometry.hpp"

namespace lact::test {

Image random_image(int h, int w, uint64_t seed, double lo = -1.0, double hi = 1.0);
Sinogram random_sinogram(const ScanGeometry& g, uint64_t seed, double lo = -1.0, double hi = 1.0);

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b);
double rel_l2_diff(const std::vector<double>& a, const std::vector<double>& b);

// test-local PSNR with range from the reference image
double psnr_vs(const Image& recon, const Image& ref);

// 8x8 supersampled rasterization of a single ellipse given in grid units
Image rasterize_ellipse(const Ellipse& e, int h, int w);

}  // namespace lact::test
