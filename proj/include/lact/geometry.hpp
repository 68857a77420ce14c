#pragma once

#include <vector>

#include "lact/core.hpp"

namespace lact {

enum class BeamMode { parallel, fan };

// Acquisition description. Also fixes the discretization of the projector:
// rays are sampled every ray_step_frac pixels and bilinearly interpolated,
// and the backprojector is the exact transpose of that discretization.
struct ScanGeometry {
    BeamMode mode = BeamMode::parallel;
    std::vector<double> angles_deg;   // strictly increasing view angles
    int n_detectors = 800;
    double detector_spacing = 1.0;    // physical units (pixels by default)
    double source_to_center = 0.0;    // fan only
    double source_to_detector = 0.0;  // fan only
    int image_height = 128;
    int image_width = 128;
    double pixel_spacing = 1.0;
    double ray_step_frac = 0.5;

    int n_views() const { return static_cast<int>(angles_deg.size()); }
    double image_diagonal() const;  // physical length
    void validate() const;
    bool same_grid(const ScanGeometry& o) const;
};

// One view per degree starting at first_angle_deg. Zero detector spacing or
// fan distances request the defaults (object fully covered by every fan).
ScanGeometry make_scan_geometry(BeamMode mode, int first_angle_deg, int n_views, int n_detectors,
                                int img_h, int img_w, double pixel_spacing = 1.0,
                                double det_spacing = 0.0, double source_to_center = 0.0,
                                double source_to_detector = 0.0);

// Prepends n_left and appends n_right one-degree views.
ScanGeometry extend_geometry(const ScanGeometry& g, int n_left, int n_right);

struct Sinogram {
    ScanGeometry geom;
    std::vector<double> data;  // n_views x n_detectors, row-major

    Sinogram() = default;
    explicit Sinogram(const ScanGeometry& g, double fill = 0.0)
        : geom(g), data(static_cast<size_t>(g.n_views()) * g.n_detectors, fill) {}

    int views() const { return geom.n_views(); }
    int bins() const { return geom.n_detectors; }
    double& at(int v, int d) { return data[static_cast<size_t>(v) * bins() + d]; }
    double at(int v, int d) const { return data[static_cast<size_t>(v) * bins() + d]; }
};

// Subset of the extended geometry's view indices that were actually measured.
struct AngleSelector {
    std::vector<int> measured_indices;  // sorted, unique

    int count() const { return static_cast<int>(measured_indices.size()); }
    void validate(int n_total_views) const;
    bool is_measured(int view, int n_total_views) const;
    static AngleSelector contiguous(int first, int count);
};

Sinogram forward_project(const Image& u, const ScanGeometry& g);
Image back_project(const Sinogram& y, const ScanGeometry& g);

// Axis-aligned half-axes a, b rotated by angle_deg, in physical units.
struct Ellipse {
    double cx = 0.0, cy = 0.0;
    double a = 0.0, b = 0.0;
    double angle_deg = 0.0;
    double value = 1.0;
};

// Closed-form chord length times intensity for every ray; the independent
// oracle the discretized projector is validated against.
Sinogram analytic_ellipse_projection(const Ellipse& e, const ScanGeometry& g);

Sinogram select_views(const Sinogram& y_full, const AngleSelector& p);
Sinogram embed_views(const Sinogram& y, const AngleSelector& p, const ScanGeometry& g_ext);

}  // namespace lact
