#include "lact/nn/tensor.hpp"

namespace lact::nn {

Tensor from_image(const Image& u) {
    Tensor t(1, u.height, u.width);
    t.v = u.data;
    return t;
}

Image to_image(const Tensor& t) {
    if (t.ch != 1) throw dimension_error("to_image: tensor must have one channel");
    Image u(t.h, t.w);
    u.data = t.v;
    return u;
}

Tensor from_sinogram(const Sinogram& y) {
    Tensor t(1, y.views(), y.bins());
    t.v = y.data;
    return t;
}

Sinogram to_sinogram(const Tensor& t, const ScanGeometry& g) {
    if (t.ch != 1 || t.h != g.n_views() || t.w != g.n_detectors)
        throw dimension_error("to_sinogram: tensor shape does not match geometry");
    Sinogram y(g);
    y.data = t.v;
    return y;
}

Tensor from_coeffs(const FrameCoeffs& z) {
    Tensor t(static_cast<int>(z.channels.size()), z.height, z.width);
    size_t npx = static_cast<size_t>(z.height) * z.width;
    for (size_t c = 0; c < z.channels.size(); ++c)
        std::copy(z.channels[c].begin(), z.channels[c].end(), t.v.begin() + c * npx);
    return t;
}

FrameCoeffs to_coeffs(const Tensor& t, int levels) {
    FrameCoeffs z;
    z.height = t.h;
    z.width = t.w;
    z.levels = levels;
    z.channels.resize(t.ch);
    size_t npx = static_cast<size_t>(t.h) * t.w;
    for (int c = 0; c < t.ch; ++c)
        z.channels[c].assign(t.v.begin() + c * npx, t.v.begin() + (c + 1) * npx);
    return z;
}

}  // namespace lact::nn
