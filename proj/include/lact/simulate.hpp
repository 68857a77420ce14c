#pragma once

#include <vector>

#include "lact/core.hpp"
#include "lact/geometry.hpp"

namespace lact {

enum class PhantomKind { shepp_logan, random_ellipses };

struct PhantomSpec {
    PhantomKind kind = PhantomKind::shepp_logan;
    int count = 1;               // dataset-level default item count
    double intensity_shift = 0.0;
    int size = 128;
    uint64_t seed = 0;

    void validate() const;
};

// The classic ten-ellipse table in unit coordinates ([-1,1]^2).
const std::vector<Ellipse>& shepp_logan_table();

// Maps a unit-coordinate ellipse onto a size x size pixel grid (spacing 1).
Ellipse ellipse_to_grid(const Ellipse& unit, int size);

// Unit-coordinate ellipse list of a random phantom (shared by make_phantom
// and oracle tests).
std::vector<Ellipse> random_ellipse_set(uint64_t seed);

// Rasterizes with 4x4 subpixel averaging; deterministic given the seed.
Image make_phantom(const PhantomSpec& spec);

struct NoiseModel {
    double gaussian_frac = 0.05;  // std as a fraction of mean |y|
    double poisson_i0 = 5e6;      // incident photon count
    uint64_t seed = 0;

    void validate() const;
};

// Transmission-domain Poisson noise (counts ~ Poisson(I0 exp(-y)), re-logged,
// counts clamped to >= 1) followed by additive Gaussian noise with
// std = gaussian_frac * mean(|y|).
Sinogram add_noise(const Sinogram& y, const NoiseModel& nm);

struct DatasetItem {
    Image gt;
    Sinogram measured;     // noisy, limited-angle rows only
    Sinogram extended_gt;  // clean, full extended width
};

// Noise is applied to the full extended sinogram before view selection.
std::vector<DatasetItem> make_dataset(int n_items, const PhantomSpec& spec,
                                      const ScanGeometry& g_ext, const AngleSelector& sel,
                                      const NoiseModel& nm);

}  // namespace lact
