#include "lact/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace lact {

namespace {

constexpr double kDegToRad = M_PI / 180.0;

struct Ray {
    double ox, oy;  // a point on the ray
    double dx, dy;  // unit direction
};

struct ViewTrig {
    double tx, ty;  // detector axis
    double nx, ny;  // beam direction
};

ViewTrig view_trig(double angle_deg) {
    double th = angle_deg * kDegToRad;
    return {std::cos(th), std::sin(th), -std::sin(th), std::cos(th)};
}

double detector_coord(const ScanGeometry& g, int det) {
    return (det - 0.5 * (g.n_detectors - 1)) * g.detector_spacing;
}

Ray make_ray(const ScanGeometry& g, const ViewTrig& vt, int det) {
    double s = detector_coord(g, det);
    if (g.mode == BeamMode::parallel) {
        return {s * vt.tx, s * vt.ty, vt.nx, vt.ny};
    }
    double sx = -g.source_to_center * vt.nx;
    double sy = -g.source_to_center * vt.ny;
    double cd = g.source_to_detector - g.source_to_center;
    double px = cd * vt.nx + s * vt.tx;
    double py = cd * vt.ny + s * vt.ty;
    double dx = px - sx, dy = py - sy;
    double len = std::hypot(dx, dy);
    return {sx, sy, dx / len, dy / len};
}

// Clips the line o + t*d to the pixel-center bounding box. Returns false when
// the ray misses the image.
bool clip_to_image(const ScanGeometry& g, const Ray& r, double& t0, double& t1) {
    double hx = 0.5 * (g.image_width - 1) * g.pixel_spacing;
    double hy = 0.5 * (g.image_height - 1) * g.pixel_spacing;
    t0 = -1e300;
    t1 = 1e300;
    const double lo[2] = {-hx, -hy};
    const double hi[2] = {hx, hy};
    const double o[2] = {r.ox, r.oy};
    const double d[2] = {r.dx, r.dy};
    for (int axis = 0; axis < 2; ++axis) {
        if (std::fabs(d[axis]) < 1e-14) {
            if (o[axis] < lo[axis] || o[axis] > hi[axis]) return false;
            continue;
        }
        double ta = (lo[axis] - o[axis]) / d[axis];
        double tb = (hi[axis] - o[axis]) / d[axis];
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
    }
    return t1 > t0;
}

struct SamplePlan {
    double t0 = 0.0, dt = 0.0;
    int n = 0;
};

SamplePlan plan_samples(const ScanGeometry& g, const Ray& r) {
    double t0, t1;
    if (!clip_to_image(g, r, t0, t1)) return {};
    double step = g.ray_step_frac * g.pixel_spacing;
    int n = std::max(1, static_cast<int>(std::ceil((t1 - t0) / step)));
    return {t0, (t1 - t0) / n, n};
}

inline void grid_coords(const ScanGeometry& g, double x, double y, double& gr, double& gc) {
    gc = x / g.pixel_spacing + 0.5 * (g.image_width - 1);
    gr = 0.5 * (g.image_height - 1) - y / g.pixel_spacing;
}

inline double gather_bilinear(const Image& u, double gr, double gc) {
    int r0 = static_cast<int>(std::floor(gr));
    int c0 = static_cast<int>(std::floor(gc));
    double fr = gr - r0, fc = gc - c0;
    int r1 = r0 + 1, c1 = c0 + 1;
    double s = 0.0;
    auto in = [&](int r, int c) { return r >= 0 && r < u.height && c >= 0 && c < u.width; };
    if (in(r0, c0)) s += (1 - fr) * (1 - fc) * u.at(r0, c0);
    if (in(r0, c1)) s += (1 - fr) * fc * u.at(r0, c1);
    if (in(r1, c0)) s += fr * (1 - fc) * u.at(r1, c0);
    if (in(r1, c1)) s += fr * fc * u.at(r1, c1);
    return s;
}

inline void scatter_bilinear(Image& u, double gr, double gc, double val) {
    int r0 = static_cast<int>(std::floor(gr));
    int c0 = static_cast<int>(std::floor(gc));
    double fr = gr - r0, fc = gc - c0;
    int r1 = r0 + 1, c1 = c0 + 1;
    auto in = [&](int r, int c) { return r >= 0 && r < u.height && c >= 0 && c < u.width; };
    if (in(r0, c0)) u.at(r0, c0) += (1 - fr) * (1 - fc) * val;
    if (in(r0, c1)) u.at(r0, c1) += (1 - fr) * fc * val;
    if (in(r1, c0)) u.at(r1, c0) += fr * (1 - fc) * val;
    if (in(r1, c1)) u.at(r1, c1) += fr * fc * val;
}

int view_chunks(int n_views) { return std::min(n_views, 16); }

void chunk_range(int n, int chunks, int c, int& lo, int& hi) {
    int block = (n + chunks - 1) / chunks;
    lo = c * block;
    hi = std::min(n, lo + block);
}

}  // namespace

double ScanGeometry::image_diagonal() const {
    return std::hypot(static_cast<double>(image_height), static_cast<double>(image_width)) *
           pixel_spacing;
}

void ScanGeometry::validate() const {
    if (n_detectors < 1) throw parameter_error("geometry: n_detectors must be >= 1");
    if (angles_deg.empty()) throw parameter_error("geometry: empty angle list");
    for (size_t i = 1; i < angles_deg.size(); ++i)
        if (angles_deg[i] <= angles_deg[i - 1])
            throw parameter_error("geometry: angles must be strictly increasing");
    if (image_height < 1 || image_width < 1) throw parameter_error("geometry: bad image size");
    if (pixel_spacing <= 0.0 || detector_spacing <= 0.0)
        throw parameter_error("geometry: spacings must be positive");
    if (ray_step_frac <= 0.0) throw parameter_error("geometry: ray_step_frac must be positive");
    if (mode == BeamMode::fan) {
        if (!(source_to_detector > source_to_center && source_to_center > 0.0))
            throw parameter_error("geometry: fan mode requires source_to_detector > source_to_center > 0");
    }
}

bool ScanGeometry::same_grid(const ScanGeometry& o) const {
    return image_height == o.image_height && image_width == o.image_width &&
           pixel_spacing == o.pixel_spacing;
}

ScanGeometry make_scan_geometry(BeamMode mode, int first_angle_deg, int n_views, int n_detectors,
                                int img_h, int img_w, double pixel_spacing, double det_spacing,
                                double source_to_center, double source_to_detector) {
    ScanGeometry g;
    g.mode = mode;
    g.n_detectors = n_detectors;
    g.image_height = img_h;
    g.image_width = img_w;
    g.pixel_spacing = pixel_spacing;
    g.angles_deg.resize(n_views);
    for (int i = 0; i < n_views; ++i) g.angles_deg[i] = first_angle_deg + i;
    double diag = g.image_diagonal();
    if (mode == BeamMode::fan) {
        g.source_to_center = source_to_center > 0.0 ? source_to_center : 2.0 * diag;
        g.source_to_detector = source_to_detector > 0.0 ? source_to_detector : 4.0 * diag;
        double magnification = g.source_to_detector / g.source_to_center;
        g.detector_spacing =
            det_spacing > 0.0 ? det_spacing : 1.05 * magnification * diag / n_detectors;
    } else {
        g.detector_spacing = det_spacing > 0.0 ? det_spacing : 1.05 * diag / n_detectors;
    }
    g.validate();
    return g;
}

ScanGeometry extend_geometry(const ScanGeometry& g, int n_left, int n_right) {
    if (n_left < 0 || n_right < 0) throw parameter_error("extend_geometry: negative extension");
    ScanGeometry e = g;
    e.angles_deg.clear();
    e.angles_deg.reserve(g.n_views() + n_left + n_right);
    for (int i = n_left; i >= 1; --i) e.angles_deg.push_back(g.angles_deg.front() - i);
    for (double a : g.angles_deg) e.angles_deg.push_back(a);
    for (int i = 1; i <= n_right; ++i) e.angles_deg.push_back(g.angles_deg.back() + i);
    e.validate();
    return e;
}

void AngleSelector::validate(int n_total_views) const {
    for (size_t i = 0; i < measured_indices.size(); ++i) {
        int idx = measured_indices[i];
        if (idx < 0 || idx >= n_total_views)
            throw parameter_error("selector: view index out of range");
        if (i > 0 && idx <= measured_indices[i - 1])
            throw parameter_error("selector: indices must be sorted and unique");
    }
}

bool AngleSelector::is_measured(int view, int n_total_views) const {
    (void)n_total_views;
    return std::binary_search(measured_indices.begin(), measured_indices.end(), view);
}

AngleSelector AngleSelector::contiguous(int first, int count) {
    AngleSelector p;
    p.measured_indices.resize(count);
    for (int i = 0; i < count; ++i) p.measured_indices[i] = first + i;
    return p;
}

Sinogram forward_project(const Image& u, const ScanGeometry& g) {
    g.validate();
    if (u.height != g.image_height || u.width != g.image_width)
        throw dimension_error("forward_project: image shape does not match geometry");
    Sinogram y(g);
    int V = g.n_views(), D = g.n_detectors;
    int chunks = view_chunks(V);
    parallel_chunks(chunks, [&](int c) {
        int lo, hi;
        chunk_range(V, chunks, c, lo, hi);
        for (int v = lo; v < hi; ++v) {
            ViewTrig vt = view_trig(g.angles_deg[v]);
            for (int d = 0; d < D; ++d) {
                Ray r = make_ray(g, vt, d);
                SamplePlan sp = plan_samples(g, r);
                double acc = 0.0;
                for (int k = 0; k < sp.n; ++k) {
                    double t = sp.t0 + (k + 0.5) * sp.dt;
                    double gr, gc;
                    grid_coords(g, r.ox + t * r.dx, r.oy + t * r.dy, gr, gc);
                    acc += gather_bilinear(u, gr, gc);
                }
                y.at(v, d) = acc * sp.dt;
            }
        }
    });
    return y;
}

Image back_project(const Sinogram& y, const ScanGeometry& g) {
    g.validate();
    if (y.views() != g.n_views() || y.bins() != g.n_detectors ||
        !y.geom.same_grid(g))
        throw dimension_error("back_project: sinogram shape does not match geometry");
    int V = g.n_views(), D = g.n_detectors;
    int chunks = view_chunks(V);
    std::vector<Image> partial(chunks);
    parallel_chunks(chunks, [&](int c) {
        partial[c] = Image(g.image_height, g.image_width, 0.0);
        int lo, hi;
        chunk_range(V, chunks, c, lo, hi);
        for (int v = lo; v < hi; ++v) {
            ViewTrig vt = view_trig(g.angles_deg[v]);
            for (int d = 0; d < D; ++d) {
                Ray r = make_ray(g, vt, d);
                SamplePlan sp = plan_samples(g, r);
                double val = y.at(v, d) * sp.dt;
                if (val == 0.0) continue;
                for (int k = 0; k < sp.n; ++k) {
                    double t = sp.t0 + (k + 0.5) * sp.dt;
                    double gr, gc;
                    grid_coords(g, r.ox + t * r.dx, r.oy + t * r.dy, gr, gc);
                    scatter_bilinear(partial[c], gr, gc, val);
                }
            }
        }
    });
    Image u(g.image_height, g.image_width, 0.0);
    for (int c = 0; c < chunks; ++c)
        for (size_t i = 0; i < u.data.size(); ++i) u.data[i] += partial[c].data[i];
    return u;
}

Sinogram analytic_ellipse_projection(const Ellipse& e, const ScanGeometry& g) {
    g.validate();
    if (e.a <= 0.0 || e.b <= 0.0)
        throw parameter_error("analytic_ellipse_projection: degenerate ellipse axis");
    Sinogram y(g);
    double phi = e.angle_deg * kDegToRad;
    double cp = std::cos(phi), sp = std::sin(phi);
    int V = g.n_views(), D = g.n_detectors;
    for (int v = 0; v < V; ++v) {
        ViewTrig vt = view_trig(g.angles_deg[v]);
        for (int d = 0; d < D; ++d) {
            Ray r = make_ray(g, vt, d);
            // ellipse frame: scale axes to the unit circle
            double rx = r.ox - e.cx, ry = r.oy - e.cy;
            double q0x = (cp * rx + sp * ry) / e.a;
            double q0y = (-sp * rx + cp * ry) / e.b;
            double q1x = (cp * r.dx + sp * r.dy) / e.a;
            double q1y = (-sp * r.dx + cp * r.dy) / e.b;
            double qa = q1x * q1x + q1y * q1y;
            double qb = q0x * q1x + q0y * q1y;
            double qc = q0x * q0x + q0y * q0y - 1.0;
            double disc = qb * qb - qa * qc;
            if (disc > 0.0 && qa > 0.0) y.at(v, d) = e.value * 2.0 * std::sqrt(disc) / qa;
        }
    }
    return y;
}

Sinogram select_views(const Sinogram& y_full, const AngleSelector& p) {
    p.validate(y_full.views());
    ScanGeometry g = y_full.geom;
    g.angles_deg.clear();
    for (int idx : p.measured_indices) g.angles_deg.push_back(y_full.geom.angles_deg[idx]);
    Sinogram out;
    out.geom = g;
    out.data.resize(static_cast<size_t>(p.count()) * y_full.bins());
    for (int i = 0; i < p.count(); ++i) {
        int src = p.measured_indices[i];
        std::copy_n(&y_full.data[static_cast<size_t>(src) * y_full.bins()], y_full.bins(),
                    &out.data[static_cast<size_t>(i) * y_full.bins()]);
    }
    return out;
}

Sinogram embed_views(const Sinogram& y, const AngleSelector& p, const ScanGeometry& g_ext) {
    p.validate(g_ext.n_views());
    if (y.views() != p.count())
        throw dimension_error("embed_views: row count does not match selector");
    if (y.bins() != g_ext.n_detectors)
        throw dimension_error("embed_views: detector count mismatch");
    Sinogram out(g_ext, 0.0);
    for (int i = 0; i < p.count(); ++i) {
        int dst = p.measured_indices[i];
        std::copy_n(&y.data[static_cast<size_t>(i) * y.bins()], y.bins(),
                    &out.data[static_cast<size_t>(dst) * y.bins()]);
    }
    return out;
}

}  // namespace lact
