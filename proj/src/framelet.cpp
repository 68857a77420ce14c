#include "lact/framelet.hpp"

#include <cmath>

namespace lact {

namespace {

const double kSqrt2Over4 = std::sqrt(2.0) / 4.0;
const double kTaps[3][3] = {
    {0.25, 0.5, 0.25},
    {kSqrt2Over4, 0.0, -kSqrt2Over4},
    {-0.25, 0.5, -0.25},
};

inline int reflect_half(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -1 - i;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// out[i] = sum_k taps[k] * x[reflect(i + (k-1)*dil)]
void corr_sym(const double* x, int n, int stride, const double* taps, int dil, double* out,
              int out_stride) {
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int k = 0; k < 3; ++k) s += taps[k] * x[reflect_half(i + (k - 1) * dil, n) * stride];
        out[i * out_stride] = s;
    }
}

// adjoint: gx[reflect(i + (k-1)*dil)] += taps[k] * gout[i]
void corr_sym_adj(const double* gout, int n, int stride, const double* taps, int dil, double* gx,
                  int gx_stride) {
    for (int i = 0; i < n; ++i) {
        double v = gout[i * stride];
        for (int k = 0; k < 3; ++k)
            gx[reflect_half(i + (k - 1) * dil, n) * gx_stride] += taps[k] * v;
    }
}

// separable 2-D correlation: h_col along width, then h_row along height
std::vector<double> corr2(const std::vector<double>& u, int h, int w, int fr, int fc, int dil) {
    std::vector<double> tmp(u.size()), out(u.size());
    for (int r = 0; r < h; ++r)
        corr_sym(&u[static_cast<size_t>(r) * w], w, 1, kTaps[fc], dil,
                 &tmp[static_cast<size_t>(r) * w], 1);
    for (int c = 0; c < w; ++c) corr_sym(&tmp[c], h, w, kTaps[fr], dil, &out[c], w);
    return out;
}

// exact transpose of corr2 accumulated into acc
void corr2_adj(const std::vector<double>& g, int h, int w, int fr, int fc, int dil,
               std::vector<double>& acc) {
    std::vector<double> tmp(g.size(), 0.0);
    for (int c = 0; c < w; ++c) corr_sym_adj(&g[c], h, w, kTaps[fr], dil, &tmp[c], w);
    for (int r = 0; r < h; ++r)
        corr_sym_adj(&tmp[static_cast<size_t>(r) * w], w, 1, kTaps[fc], dil,
                     &acc[static_cast<size_t>(r) * w], 1);
}

}  // namespace

void FrameTransform::validate() const {
    if (levels < 1 || levels > 8) throw parameter_error("frame transform: levels must be in 1..8");
}

FrameCoeffs frame_decompose(const Image& u, const FrameTransform& t) {
    t.validate();
    FrameCoeffs z;
    z.height = u.height;
    z.width = u.width;
    z.levels = t.levels;
    z.channels.resize(t.total_channels());
    std::vector<double> low = u.data;
    int idx = 1;
    for (int lev = 0; lev < t.levels; ++lev) {
        int dil = 1 << lev;
        for (int fr = 0; fr < 3; ++fr)
            for (int fc = 0; fc < 3; ++fc) {
                if (fr == 0 && fc == 0) continue;
                z.channels[idx++] = corr2(low, u.height, u.width, fr, fc, dil);
            }
        low = corr2(low, u.height, u.width, 0, 0, dil);
    }
    z.channels[0] = std::move(low);
    return z;
}

Image frame_reconstruct(const FrameCoeffs& z, const FrameTransform& t) {
    t.validate();
    if (static_cast<int>(z.channels.size()) != t.total_channels())
        throw dimension_error("frame_reconstruct: channel count mismatch");
    size_t npx = static_cast<size_t>(z.height) * z.width;
    for (const auto& ch : z.channels)
        if (ch.size() != npx) throw dimension_error("frame_reconstruct: channel shape mismatch");
    std::vector<double> acc = z.channels[0];
    for (int lev = t.levels - 1; lev >= 0; --lev) {
        int dil = 1 << lev;
        std::vector<double> next(npx, 0.0);
        corr2_adj(acc, z.height, z.width, 0, 0, dil, next);
        int base = 1 + 8 * lev;
        int m = 0;
        for (int fr = 0; fr < 3; ++fr)
            for (int fc = 0; fc < 3; ++fc) {
                if (fr == 0 && fc == 0) continue;
                corr2_adj(z.channels[base + m], z.height, z.width, fr, fc, dil, next);
                ++m;
            }
        acc = std::move(next);
    }
    Image u(z.height, z.width);
    u.data = std::move(acc);
    return u;
}

double soft_threshold_scalar(double x, double thr) {
    double m = std::fabs(x) - thr;
    return m > 0.0 ? (x > 0.0 ? m : -m) : 0.0;
}

FrameCoeffs soft_threshold(const FrameCoeffs& z, const std::vector<double>& thresholds) {
    int M = z.highpass_count();
    if (!(static_cast<int>(thresholds.size()) == M || thresholds.size() == 1))
        throw dimension_error("soft_threshold: need one threshold per highpass channel (or one broadcast)");
    for (double t : thresholds)
        if (!(t >= 0.0)) throw parameter_error("soft_threshold: thresholds must be >= 0");
    FrameCoeffs out = z;
    for (int i = 0; i < M; ++i) {
        double thr = thresholds.size() == 1 ? thresholds[0] : thresholds[i];
        for (double& x : out.highpass(i)) x = soft_threshold_scalar(x, thr);
    }
    return out;
}

}  // namespace lact
