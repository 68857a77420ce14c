#pragma once

#include <vector>

#include "lact/core.hpp"
#include "lact/framelet.hpp"
#include "lact/geometry.hpp"

namespace lact::nn {

// Dense C x H x W value, channel-major.
struct Tensor {
    int ch = 0, h = 0, w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c, int hh, int ww, double fill = 0.0)
        : ch(c), h(hh), w(ww), v(static_cast<size_t>(c) * hh * ww, fill) {}

    size_t size() const { return v.size(); }
    bool same_shape(const Tensor& o) const { return ch == o.ch && h == o.h && w == o.w; }
    double& at(int c, int r, int col) {
        return v[(static_cast<size_t>(c) * h + r) * w + col];
    }
    double at(int c, int r, int col) const {
        return v[(static_cast<size_t>(c) * h + r) * w + col];
    }
    static Tensor scalar(double x) {
        Tensor t(1, 1, 1);
        t.v[0] = x;
        return t;
    }
};

Tensor from_image(const Image& u);
Image to_image(const Tensor& t);
Tensor from_sinogram(const Sinogram& y);
Sinogram to_sinogram(const Tensor& t, const ScanGeometry& g);
Tensor from_coeffs(const FrameCoeffs& z);
FrameCoeffs to_coeffs(const Tensor& t, int levels);

}  // namespace lact::nn
