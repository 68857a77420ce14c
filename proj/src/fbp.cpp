#include "lact/fbp.hpp"

#include <algorithm>
#include <cmath>

namespace lact {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

// G(a) = integral_0^W w*cos(a*w) dw
double ramp_integral(double a, double omega) {
    double x = a * omega;
    if (std::fabs(x) < 1e-5) {
        // series around a = 0
        double o2 = omega * omega;
        return o2 * 0.5 - x * x * o2 / 8.0 + x * x * x * x * o2 / 144.0;
    }
    return (omega / a) * std::sin(x) + (std::cos(x) - 1.0) / (a * a);
}

double uniform_view_step_rad(const ScanGeometry& g) {
    if (g.n_views() < 2) return kDegToRad;
    return (g.angles_deg.back() - g.angles_deg.front()) / (g.n_views() - 1) * kDegToRad;
}

struct InterpTap {
    int b0;
    double f;
};

inline InterpTap bin_of(double s, double spacing, int n_det) {
    double b = s / spacing + 0.5 * (n_det - 1);
    int b0 = static_cast<int>(std::floor(b));
    return {b0, b - b0};
}

Sinogram convolve_rows(const Sinogram& y, const std::vector<double>& taps) {
    int V = y.views(), D = y.bins();
    int half = (static_cast<int>(taps.size()) - 1) / 2;
    Sinogram out(y.geom, 0.0);
    int chunks = std::min(V, 16);
    parallel_chunks(chunks, [&](int c) {
        int block = (V + chunks - 1) / chunks;
        int lo = c * block, hi = std::min(V, lo + block);
        for (int v = lo; v < hi; ++v) {
            const double* row = &y.data[static_cast<size_t>(v) * D];
            double* orow = &out.data[static_cast<size_t>(v) * D];
            for (int i = 0; i < D; ++i) {
                double s = 0.0;
                int j0 = std::max(0, i - half), j1 = std::min(D - 1, i + half);
                for (int j = j0; j <= j1; ++j) s += taps[half + i - j] * row[j];
                orow[i] = s;
            }
        }
    });
    return out;
}

}  // namespace

void FilterSpec::validate() const {
    if (!(cutoff > 0.0 && cutoff <= 1.0))
        throw parameter_error("filter: cutoff must be in (0,1]");
}

std::vector<double> ramp_kernel(const FilterSpec& f, int half_len, double spacing) {
    f.validate();
    if (half_len < 0 || spacing <= 0.0) throw parameter_error("ramp_kernel: bad arguments");
    double omega = f.cutoff * M_PI / spacing;
    double norm = 1.0 / (2.0 * M_PI * M_PI);
    std::vector<double> taps(2 * half_len + 1, 0.0);
    for (int n = -half_len; n <= half_len; ++n) {
        double a = n * spacing;
        double v;
        if (f.kind == FilterKind::ram_lak) {
            v = norm * ramp_integral(a, omega);
        } else {
            double shift = M_PI / omega;
            v = norm * (0.5 * ramp_integral(a, omega) + 0.25 * ramp_integral(a + shift, omega) +
                        0.25 * ramp_integral(a - shift, omega));
        }
        taps[half_len + n] = v;
    }
    // Truncated analytic taps. The DC response is the leftover tail
    // ~1/(pi^2 half_len tau^2); forcing it to zero by editing taps biases
    // every filtered value by tail*R(s), which visibly cups reconstructions.
    return taps;
}

Sinogram filter_sinogram(const Sinogram& y, const FilterSpec& f) {
    f.validate();
    if (y.bins() < 2) throw dimension_error("filter_sinogram: need at least two detectors");
    std::vector<double> taps = ramp_kernel(f, y.bins() - 1, y.geom.detector_spacing);
    return convolve_rows(y, taps);
}

namespace {

struct FanPlan {
    double dsc, tau_v, step_rad;
    std::vector<double> cos_weight;  // per detector bin
};

FanPlan fan_plan(const ScanGeometry& g) {
    FanPlan p;
    p.dsc = g.source_to_center;
    p.tau_v = g.detector_spacing * g.source_to_center / g.source_to_detector;
    p.step_rad = uniform_view_step_rad(g);
    p.cos_weight.resize(g.n_detectors);
    for (int j = 0; j < g.n_detectors; ++j) {
        double s = (j - 0.5 * (g.n_detectors - 1)) * p.tau_v;
        p.cos_weight[j] = p.dsc / std::hypot(p.dsc, s);
    }
    return p;
}

void pixel_xy(const ScanGeometry& g, int r, int c, double& x, double& y) {
    x = (c - 0.5 * (g.image_width - 1)) * g.pixel_spacing;
    y = (0.5 * (g.image_height - 1) - r) * g.pixel_spacing;
}

}  // namespace

Image fbp_reconstruct(const Sinogram& y, const ScanGeometry& g, const FilterSpec& f) {
    g.validate();
    f.validate();
    if (y.views() != g.n_views() || y.bins() != g.n_detectors)
        throw dimension_error("fbp_reconstruct: sinogram shape does not match geometry");
    int V = g.n_views(), D = g.n_detectors, H = g.image_height, W = g.image_width;
    Image u(H, W, 0.0);

    std::vector<double> ang_t(2 * V);  // cos/sin per view
    for (int v = 0; v < V; ++v) {
        double th = g.angles_deg[v] * kDegToRad;
        ang_t[2 * v] = std::cos(th);
        ang_t[2 * v + 1] = std::sin(th);
    }

    if (g.mode == BeamMode::parallel) {
        double tau = g.detector_spacing;
        double step = uniform_view_step_rad(g);
        Sinogram q = convolve_rows(y, ramp_kernel(f, D - 1, tau));
        for (double& x : q.data) x *= tau;
        int chunks = std::min(H, 16);
        parallel_chunks(chunks, [&](int ci) {
            int block = (H + chunks - 1) / chunks;
            for (int r = ci * block; r < std::min(H, (ci + 1) * block); ++r)
                for (int c = 0; c < W; ++c) {
                    double x, yy;
                    pixel_xy(g, r, c, x, yy);
                    double acc = 0.0;
                    for (int v = 0; v < V; ++v) {
                        double s = x * ang_t[2 * v] + yy * ang_t[2 * v + 1];
                        InterpTap t = bin_of(s, tau, D);
                        const double* row = &q.data[static_cast<size_t>(v) * D];
                        if (t.b0 >= 0 && t.b0 < D) acc += (1.0 - t.f) * row[t.b0];
                        if (t.b0 + 1 >= 0 && t.b0 + 1 < D) acc += t.f * row[t.b0 + 1];
                    }
                    u.at(r, c) = acc * step;
                }
        });
        return u;
    }

    FanPlan p = fan_plan(g);
    Sinogram pre = y;
    for (int v = 0; v < V; ++v)
        for (int j = 0; j < D; ++j) pre.at(v, j) *= p.cos_weight[j];
    Sinogram q = convolve_rows(pre, ramp_kernel(f, D - 1, p.tau_v));
    for (double& x : q.data) x *= p.tau_v * 0.5;
    int chunks = std::min(H, 16);
    parallel_chunks(chunks, [&](int ci) {
        int block = (H + chunks - 1) / chunks;
        for (int r = ci * block; r < std::min(H, (ci + 1) * block); ++r)
            for (int c = 0; c < W; ++c) {
                double x, yy;
                pixel_xy(g, r, c, x, yy);
                double acc = 0.0;
                for (int v = 0; v < V; ++v) {
                    double ct = ang_t[2 * v], st = ang_t[2 * v + 1];
                    double along = x * (-st) + yy * ct;  // projection on the beam axis
                    double across = x * ct + yy * st;
                    double dist = p.dsc + along;
                    double s = p.dsc * across / dist;
                    double w = (p.dsc * p.dsc) / (dist * dist);
                    InterpTap t = bin_of(s, p.tau_v, D);
                    const double* row = &q.data[static_cast<size_t>(v) * D];
                    double val = 0.0;
                    if (t.b0 >= 0 && t.b0 < D) val += (1.0 - t.f) * row[t.b0];
                    if (t.b0 + 1 >= 0 && t.b0 + 1 < D) val += t.f * row[t.b0 + 1];
                    acc += w * val;
                }
                u.at(r, c) = acc * p.step_rad;
            }
    });
    return u;
}

Image ril_apply(const Sinogram& y, const ScanGeometry& g, const FilterSpec& f) {
    return fbp_reconstruct(y, g, f);
}

Sinogram ril_adjoint(const Image& grad_u, const ScanGeometry& g, const FilterSpec& f) {
    g.validate();
    f.validate();
    if (grad_u.height != g.image_height || grad_u.width != g.image_width)
        throw dimension_error("ril_adjoint: image shape does not match geometry");
    int V = g.n_views(), D = g.n_detectors, H = g.image_height, W = g.image_width;

    std::vector<double> ang_t(2 * V);
    for (int v = 0; v < V; ++v) {
        double th = g.angles_deg[v] * kDegToRad;
        ang_t[2 * v] = std::cos(th);
        ang_t[2 * v + 1] = std::sin(th);
    }

    Sinogram qg;  // transpose of the backprojection stage
    if (g.mode == BeamMode::parallel) {
        double tau = g.detector_spacing;
        double step = uniform_view_step_rad(g);
        ScanGeometry gq = g;
        qg = Sinogram(gq, 0.0);
        int chunks = std::min(V, 16);
        parallel_chunks(chunks, [&](int ci) {
            int block = (V + chunks - 1) / chunks;
            for (int v = ci * block; v < std::min(V, (ci + 1) * block); ++v) {
                double* row = &qg.data[static_cast<size_t>(v) * D];
                for (int r = 0; r < H; ++r)
                    for (int c = 0; c < W; ++c) {
                        double x, yy;
                        pixel_xy(g, r, c, x, yy);
                        double s = x * ang_t[2 * v] + yy * ang_t[2 * v + 1];
                        InterpTap t = bin_of(s, tau, D);
                        double gval = grad_u.at(r, c) * step;
                        if (t.b0 >= 0 && t.b0 < D) row[t.b0] += (1.0 - t.f) * gval;
                        if (t.b0 + 1 >= 0 && t.b0 + 1 < D) row[t.b0 + 1] += t.f * gval;
                    }
            }
        });
        Sinogram out = convolve_rows(qg, ramp_kernel(f, D - 1, tau));
        for (double& x : out.data) x *= tau;
        return out;
    }

    FanPlan p = fan_plan(g);
    qg = Sinogram(g, 0.0);
    int chunks = std::min(V, 16);
    parallel_chunks(chunks, [&](int ci) {
        int block = (V + chunks - 1) / chunks;
        for (int v = ci * block; v < std::min(V, (ci + 1) * block); ++v) {
            double ct = ang_t[2 * v], st = ang_t[2 * v + 1];
            double* row = &qg.data[static_cast<size_t>(v) * D];
            for (int r = 0; r < H; ++r)
                for (int c = 0; c < W; ++c) {
                    double x, yy;
                    pixel_xy(g, r, c, x, yy);
                    double along = x * (-st) + yy * ct;
                    double across = x * ct + yy * st;
                    double dist = p.dsc + along;
                    double s = p.dsc * across / dist;
                    double w = (p.dsc * p.dsc) / (dist * dist);
                    InterpTap t = bin_of(s, p.tau_v, D);
                    double gval = grad_u.at(r, c) * w * p.step_rad;
                    if (t.b0 >= 0 && t.b0 < D) row[t.b0] += (1.0 - t.f) * gval;
                    if (t.b0 + 1 >= 0 && t.b0 + 1 < D) row[t.b0 + 1] += t.f * gval;
                }
        }
    });
    Sinogram out = convolve_rows(qg, ramp_kernel(f, D - 1, p.tau_v));
    for (double& x : out.data) x *= p.tau_v * 0.5;
    for (int v = 0; v < V; ++v)
        for (int j = 0; j < D; ++j) out.at(v, j) *= p.cos_weight[j];
    return out;
}

}  // namespace lact
