#pragma once

#include <vector>

#include "lact/core.hpp"
#include "lact/geometry.hpp"

namespace lact {

enum class FilterKind { ram_lak, hann };

struct FilterSpec {
    FilterKind kind = FilterKind::ram_lak;
    double cutoff = 1.0;  // fraction of Nyquist, in (0,1]

    void validate() const;
};

// Closed-form taps of the band-limited ramp (optionally Hann-windowed),
// offsets -half_len..half_len. The center tap absorbs the truncation residue
// so the taps sum to zero exactly.
std::vector<double> ramp_kernel(const FilterSpec& f, int half_len, double spacing);

// Per-view zero-padded spatial convolution with the ramp kernel.
Sinogram filter_sinogram(const Sinogram& y, const FilterSpec& f);

// Filtered backprojection. Fan mode uses the equispaced flat-detector
// weighting: cosine pre-weight, half-scan-free 2*pi normalization, inverse
// squared magnification backprojection weight.
Image fbp_reconstruct(const Sinogram& y, const ScanGeometry& g, const FilterSpec& f);

// Differentiable reconstruction operator: forward equals fbp_reconstruct,
// adjoint is its exact linear transpose.
Image ril_apply(const Sinogram& y, const ScanGeometry& g, const FilterSpec& f);
Sinogram ril_adjoint(const Image& grad_u, const ScanGeometry& g, const FilterSpec& f);

}  // namespace lact
