#include "lact/simulate.hpp"

#include <cmath>

namespace lact {

void PhantomSpec::validate() const {
    if (size < 32) throw parameter_error("phantom: size must be >= 32");
    if (count < 1) throw parameter_error("phantom: count must be >= 1");
}

const std::vector<Ellipse>& shepp_logan_table() {
    // {cx, cy, a, b, angle_deg, value}
    static const std::vector<Ellipse> table = {
        {0.0, 0.0, 0.69, 0.92, 0.0, 2.0},
        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98},
        {0.22, 0.0, 0.11, 0.31, -18.0, -0.02},
        {-0.22, 0.0, 0.16, 0.41, 18.0, -0.02},
        {0.0, 0.35, 0.21, 0.25, 0.0, 0.01},
        {0.0, 0.1, 0.046, 0.046, 0.0, 0.01},
        {0.0, -0.1, 0.046, 0.046, 0.0, 0.01},
        {-0.08, -0.605, 0.046, 0.023, 0.0, 0.01},
        {0.0, -0.606, 0.023, 0.023, 0.0, 0.01},
        {0.06, -0.605, 0.023, 0.046, 0.0, 0.01},
    };
    return table;
}

Ellipse ellipse_to_grid(const Ellipse& unit, int size) {
    double s = 0.5 * size;
    return {unit.cx * s, unit.cy * s, unit.a * s, unit.b * s, unit.angle_deg, unit.value};
}

std::vector<Ellipse> random_ellipse_set(uint64_t seed) {
    Rng rng(seed);
    int n = rng.uniform_int(3, 8);
    std::vector<Ellipse> out;
    out.reserve(n);
    for (int i = 0; i < n; ++i) {
        Ellipse e;
        e.cx = rng.uniform(-0.55, 0.55);
        e.cy = rng.uniform(-0.55, 0.55);
        e.a = rng.uniform(0.08, 0.45);
        e.b = rng.uniform(0.08, 0.45);
        e.angle_deg = rng.uniform(0.0, 180.0);
        e.value = rng.uniform(0.2, 1.0);
        out.push_back(e);
    }
    return out;
}

namespace {

double ellipse_set_value(const std::vector<Ellipse>& set, double x, double y) {
    double v = 0.0;
    for (const Ellipse& e : set) {
        double phi = e.angle_deg * M_PI / 180.0;
        double dx = x - e.cx, dy = y - e.cy;
        double qx = (std::cos(phi) * dx + std::sin(phi) * dy) / e.a;
        double qy = (-std::sin(phi) * dx + std::cos(phi) * dy) / e.b;
        if (qx * qx + qy * qy < 1.0) v += e.value;
    }
    return v;
}

}  // namespace

Image make_phantom(const PhantomSpec& spec) {
    spec.validate();
    std::vector<Ellipse> set = spec.kind == PhantomKind::shepp_logan
                                   ? shepp_logan_table()
                                   : random_ellipse_set(spec.seed);
    int n = spec.size;
    Image u(n, n, 0.0);
    const int ss = 4;  // subpixel grid
    double inv = 2.0 / n;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            double acc = 0.0;
            for (int sr = 0; sr < ss; ++sr)
                for (int sc = 0; sc < ss; ++sc) {
                    double x = (c - 0.5 * (n - 1) + (sc + 0.5) / ss - 0.5) * inv;
                    double y = (0.5 * (n - 1) - r + (sr + 0.5) / ss - 0.5) * inv;
                    acc += ellipse_set_value(set, x, y);
                }
            u.at(r, c) = acc / (ss * ss) + spec.intensity_shift;
        }
    return u;
}

void NoiseModel::validate() const {
    if (!(gaussian_frac >= 0.0)) throw parameter_error("noise: gaussian_frac must be >= 0");
    if (!(poisson_i0 > 0.0)) throw parameter_error("noise: poisson_i0 must be > 0");
}

Sinogram add_noise(const Sinogram& y, const NoiseModel& nm) {
    nm.validate();
    double mean_abs = y.data.empty() ? 0.0 : sum_abs(y.data) / y.data.size();
    double std = nm.gaussian_frac * mean_abs;
    Rng rng(nm.seed);
    Sinogram out = y;
    double log_i0 = std::log(nm.poisson_i0);
    for (double& t : out.data) {
        double clean = t > 0.0 ? t : 0.0;
        double lam = clean < 700.0 ? nm.poisson_i0 * std::exp(-clean) : 0.0;
        int64_t counts = rng.poisson(lam);
        if (counts < 1) counts = 1;
        double v = log_i0 - std::log(static_cast<double>(counts));
        t = v + std * rng.normal();
    }
    return out;
}

std::vector<DatasetItem> make_dataset(int n_items, const PhantomSpec& spec,
                                      const ScanGeometry& g_ext, const AngleSelector& sel,
                                      const NoiseModel& nm) {
    spec.validate();
    nm.validate();
    sel.validate(g_ext.n_views());
    if (g_ext.image_height != spec.size || g_ext.image_width != spec.size)
        throw dimension_error("make_dataset: geometry image size does not match phantom size");
    std::vector<DatasetItem> items;
    items.reserve(n_items);
    for (int i = 0; i < n_items; ++i) {
        PhantomSpec ps = spec;
        ps.seed = mix_seed(spec.seed, static_cast<uint64_t>(i));
        DatasetItem item;
        item.gt = make_phantom(ps);
        item.extended_gt = forward_project(item.gt, g_ext);
        NoiseModel nmi = nm;
        nmi.seed = mix_seed(nm.seed, static_cast<uint64_t>(i));
        Sinogram noisy = add_noise(item.extended_gt, nmi);
        item.measured = select_views(noisy, sel);
        items.push_back(std::move(item));
    }
    return items;
}

}  // namespace lact
