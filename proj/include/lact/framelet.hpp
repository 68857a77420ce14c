#pragma once

#include <vector>

#include "lact/core.hpp"

namespace lact {

// Undecimated piecewise-linear B-spline tight frame. The nine 2-D channels
// per level are tensor products of h0=[1/4,1/2,1/4], h1=[sqrt2/4,0,-sqrt2/4],
// h2=[-1/4,1/2,-1/4]; deeper levels dilate the taps a trous. Boundary
// handling is half-sample symmetric extension, which keeps W^T W = I exactly
// (the transform's defining invariant, checked in the tests).
struct FrameTransform {
    int levels = 1;

    int highpass_channels() const { return 8 * levels; }  // M
    int total_channels() const { return highpass_channels() + 1; }
    void validate() const;
};

// channels[0] is the coarsest lowpass; channels[1..M] are highpass,
// level-major. All channels have the full image shape.
struct FrameCoeffs {
    int height = 0;
    int width = 0;
    int levels = 1;
    std::vector<std::vector<double>> channels;

    int highpass_count() const { return static_cast<int>(channels.size()) - 1; }
    std::vector<double>& lowpass() { return channels[0]; }
    const std::vector<double>& lowpass() const { return channels[0]; }
    std::vector<double>& highpass(int i) { return channels[1 + i]; }
    const std::vector<double>& highpass(int i) const { return channels[1 + i]; }
};

FrameCoeffs frame_decompose(const Image& u, const FrameTransform& t);
// Exact transpose of frame_decompose; together they satisfy W^T W = I.
Image frame_reconstruct(const FrameCoeffs& z, const FrameTransform& t);

// Elementwise shrinkage sgn(x)*max(|x|-thr,0) on highpass channels only.
// thresholds has one entry per highpass channel, or a single broadcast entry.
FrameCoeffs soft_threshold(const FrameCoeffs& z, const std::vector<double>& thresholds);

double soft_threshold_scalar(double x, double thr);

}  // namespace lact
